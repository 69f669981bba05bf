use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::Range;

use num_traits::Zero;

use super::{max_vms_on_host, Embedder, Level, Oktopus};
use crate::frac::Rational;
use crate::hose::uplink_demand;
use crate::request::VcRequest;
use crate::topology::{FatTree, FatTreeSpec, Placement};

/// Balance-aware embedder.
///
/// Inside each candidate subtree the VMs are placed one at a time, each on the
/// host with the best [`BalanceScore`] after the hypothetical placement. Only
/// host access links are considered while spreading; the finished placement
/// must then pass full validation (rack and pod uplinks included). If no
/// level yields a valid placement the request is handed to [`Oktopus`].
///
/// Requests with `c == b` go straight to [`Oktopus`]: they have no skew to
/// offset, and spreading them only adds link load.
#[derive(Debug, Clone, Copy, Default)]
pub struct Tetris;

/// How good a host looks for one more VM of a request.
///
/// `alignment` is the residual fraction of the resource the request is heavy
/// in minus the residual fraction of the other one, so a compute-heavy VM is
/// drawn to hosts whose spare compute outweighs their spare bandwidth and
/// vice versa. It is zero for balanced requests. `headroom` is the smaller of
/// the two residual fractions and breaks ties. Both are measured after the
/// placement. Ordering is lexicographic, higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BalanceScore {
    pub alignment: Rational,
    pub headroom: Rational,
}

/// Scores putting VM number `k + 1` of `req` on a host whose residuals
/// (before any of this request's VMs) are `residual_compute` and
/// `residual_link`. `None` when either residual would go negative.
pub fn score(
    residual_compute: &Rational,
    residual_link: &Rational,
    spec: &FatTreeSpec,
    req: &VcRequest,
    k: u32,
) -> Option<BalanceScore> {
    let next = k + 1;
    if next > req.n {
        return None;
    }
    let compute_left = *residual_compute - req.c * Rational::from_integer(next as i64);
    let link_left = *residual_link - uplink_demand(next, req.n, &req.b);
    if compute_left < Rational::zero() || link_left < Rational::zero() {
        return None;
    }
    let compute_frac = compute_left / spec.host_compute_capacity;
    let link_frac = link_left / spec.host_link_capacity;
    let alignment = match req.c.cmp(&req.b) {
        Ordering::Greater => compute_frac - link_frac,
        Ordering::Less => link_frac - compute_frac,
        Ordering::Equal => Rational::zero(),
    };
    Some(BalanceScore {
        alignment,
        headroom: compute_frac.min(link_frac),
    })
}

impl Tetris {
    /// Spreads `req` over the hosts of one subtree. Returns per-host counts
    /// when all `n` VMs found a host; uplinks above the hosts are not checked.
    ///
    /// Above rack level the number of VMs per rack is taken from the dense
    /// [`Oktopus`] fill of the same subtree, so spreading never adds uplink
    /// load over the baseline; balancing happens among the hosts of each rack.
    fn spread(tree: &FatTree, req: &VcRequest, level: Level, idx: usize) -> Option<Vec<(usize, u32)>> {
        let spec = tree.spec();
        match level {
            Level::Host => {
                // A single host has nothing to balance; all n go there or none.
                let k = max_vms_on_host(&tree.residual_compute(idx), &tree.residual_link(idx), req, req.n);
                (k == req.n).then(|| vec![(idx, k)])
            }
            Level::Rack => Self::balance(tree, req, spec.hosts_in_rack(idx), req.n),
            Level::Pod | Level::Root => {
                let mut dense = Vec::new();
                if Oktopus::fill(tree, req, level, idx, req.n, true, &mut dense) != req.n {
                    return None;
                }
                let mut out = Vec::new();
                for group in dense.chunk_by(|a, b| spec.rack_of(a.0) == spec.rack_of(b.0)) {
                    let rack = spec.rack_of(group[0].0);
                    let quota = group.iter().map(|&(_, k)| k).sum();
                    out.extend(Self::balance(tree, req, spec.hosts_in_rack(rack), quota)?);
                }
                Some(out)
            }
        }
    }

    /// Places `quota` VMs one at a time on the best-scoring host of `hosts`.
        fn balance(tree: &FatTree, req: &VcRequest, hosts: Range<usize>, quota: u32) -> Option<Vec<(usize, u32)>> {
        let spec = tree.spec();
        let first = hosts.start;
        let mut counts = vec![0u32; hosts.len()];
        let mut heap: BinaryHeap<(BalanceScore, Reverse<usize>)> = hosts
            .clone()
            .filter_map(|h| {
                score(&tree.residual_compute(h), &tree.residual_link(h), spec, req, 0)
                    .map(|s| (s, Reverse(h)))
            })
            .collect();

        for _ in 0..quota {
            let (_, Reverse(h)) = heap.pop()?;
            let k = &mut counts[h - first];
            *k += 1;
            if let Some(s) = score(&tree.residual_compute(h), &tree.residual_link(h), spec, req, *k) {
                heap.push((s, Reverse(h)));
            }
        }
        Some(
            counts
                .into_iter()
                .enumerate()
                .filter(|&(_, k)| k > 0)
                .map(|(i, k)| (first + i, k))
                .collect(),
        )
    }

    /// The balanced search alone, without the fallback.
    pub fn embed_balanced(&self, tree: &FatTree, req: &VcRequest) -> Option<Placement> {
        let spec = tree.spec();
        for level in Level::ALL {
            for idx in 0..level.subtree_count(spec) {
                let Some(counts) = Self::spread(tree, req, level, idx) else {
                    continue;
                };
                let p = Placement::new(req, counts, spec)
                    .expect("spread produces in-range counts summing to n");
                if tree.validate(&p).is_feasible() {
                    return Some(p);
                }
            }
        }
        None
    }
}

impl Embedder for Tetris {
    fn name(&self) -> &'static str {
        "tetris"
    }

    fn embed(&self, tree: &FatTree, req: &VcRequest) -> Option<Placement> {
        if req.is_balanced() {
            return Oktopus.embed(tree, req);
        }
        self.embed_balanced(tree, req)
            .or_else(|| Oktopus.embed(tree, req))
    }
}
