use num_traits::Zero;

use super::{Embedder, Level};
use crate::frac::{self, Rational};
use crate::request::VcRequest;
use crate::topology::{FatTree, Placement};

/// Dense first-fit level traversal.
///
/// Within a candidate subtree hosts are filled in index order, each with as
/// many VMs as it can take. Racks and pods below the candidate are capped so
/// their uplink can carry the hose demand of whatever ends up inside them.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oktopus;

/// Most VMs of `req` (at most `budget`) a host with the given residuals can
/// take.
///
/// Feasible counts form `{0..a} ∪ {n-a'..n}` because the hose demand
/// `min(k, n-k)·b` rises then falls. Full collocation (`k = n`, zero link
/// demand) is tried first; otherwise the answer is the top of the lower block.
pub fn max_vms_on_host(
    residual_compute: &Rational,
    residual_link: &Rational,
    req: &VcRequest,
    budget: u32,
) -> u32 {
    if budget == 0 || residual_compute.is_zero() {
        return 0;
    }
    if budget >= req.n && req.total_compute() <= *residual_compute {
        return req.n;
    }
    let by_compute = frac::fits(residual_compute, &req.c);
    let by_link = frac::fits(residual_link, &req.b);
    by_compute.min(by_link).min(budget as u64) as u32
}

impl Oktopus {
    pub(super) fn fill(
        tree: &FatTree,
        req: &VcRequest,
        level: Level,
        idx: usize,
        budget: u32,
        top: bool,
        out: &mut Vec<(usize, u32)>,
    ) -> u32 {
        let spec = tree.spec();
        let capped = |residual: Rational| {
            if top {
                budget
            } else {
                frac::fits(&residual, &req.b).min(budget as u64) as u32
            }
        };
        let mut placed = 0;
        match level {
            Level::Host => {
                let k = max_vms_on_host(
                    &tree.residual_compute(idx),
                    &tree.residual_link(idx),
                    req,
                    budget,
                );
                if k > 0 {
                    out.push((idx, k));
                }
                placed = k;
            }
            Level::Rack => {
                let cap = capped(tree.residual_rack_uplink(idx));
                for h in spec.hosts_in_rack(idx) {
                    if placed == cap {
                        break;
                    }
                    placed += Self::fill(tree, req, Level::Host, h, cap - placed, false, out);
                }
            }
            Level::Pod => {
                let cap = capped(tree.residual_pod_uplink(idx));
                for r in spec.racks_in_pod(idx) {
                    if placed == cap {
                        break;
                    }
                    placed += Self::fill(tree, req, Level::Rack, r, cap - placed, false, out);
                }
            }
            Level::Root => {
                for p in 0..spec.pods {
                    if placed == budget {
                        break;
                    }
                    placed += Self::fill(tree, req, Level::Pod, p, budget - placed, false, out);
                }
            }
        }
        placed
    }

    /// Tries every subtree of one level in index order.
    pub fn embed_at(&self, tree: &FatTree, req: &VcRequest, level: Level) -> Option<Placement> {
        let spec = tree.spec();
        let mut counts = Vec::new();
        for idx in 0..level.subtree_count(spec) {
            counts.clear();
            let placed = Self::fill(tree, req, level, idx, req.n, true, &mut counts);
            if placed != req.n {
                continue;
            }
            let p = Placement::new(req, counts.iter().copied(), spec)
                .expect("fill produces in-range counts summing to n");
            if tree.validate(&p).is_feasible() {
                return Some(p);
            }
        }
        None
    }
}

impl Embedder for Oktopus {
    fn name(&self) -> &'static str {
        "oktopus"
    }

    fn embed(&self, tree: &FatTree, req: &VcRequest) -> Option<Placement> {
        Level::ALL
            .into_iter()
            .find_map(|level| self.embed_at(tree, req, level))
    }
}
