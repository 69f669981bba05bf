//! Hose-model bandwidth for virtual clusters.
//!
//! Every VM of `VC(n, c, b)` may send and receive at most `b`. A cut that
//! separates `k` of the VC's VMs from the other `n - k` can therefore carry at
//! most `min(k, n - k) * b` in each direction, and that is what a subtree's
//! uplink must reserve. Collocated VMs talk over the host and use no link.

use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::frac::{self, Rational};
use crate::topology::{FatTree, FatTreeSpec, Placement};

/// Worst-case traffic across a cut with `k` of the `n` VMs on one side.
pub fn uplink_demand(k: u32, n: u32, b: &Rational) -> Rational {
    debug_assert!(k <= n, "k = {k} > n = {n}");
    let cut = k.min(n.saturating_sub(k));
    *b * Rational::from_integer(cut as i64)
}

/// Bandwidth a placement needs on each uplink it touches.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UplinkDemands {
    pub hosts: Vec<(usize, Rational)>,
    pub racks: Vec<(usize, Rational)>,
    pub pods: Vec<(usize, Rational)>,
}

impl UplinkDemands {
    pub fn host(&self, h: usize) -> Rational {
        lookup(&self.hosts, h)
    }

    pub fn rack(&self, r: usize) -> Rational {
        lookup(&self.racks, r)
    }

    pub fn pod(&self, p: usize) -> Rational {
        lookup(&self.pods, p)
    }
}

fn lookup(entries: &[(usize, Rational)], idx: usize) -> Rational {
    entries
        .binary_search_by_key(&idx, |(i, _)| *i)
        .map(|i| entries[i].1)
        .unwrap_or_else(|_| Rational::zero())
}

/// Applies [`uplink_demand`] at every host, rack and pod cut. `counts` must be
/// sorted by host.
pub fn demands_of(counts: &[(usize, u32)], n: u32, b: &Rational, spec: &FatTreeSpec) -> UplinkDemands {
    let hosts = counts
        .iter()
        .map(|&(h, k)| (h, uplink_demand(k, n, b)))
        .collect();

    // Host order is pod-major, so rack and pod ids are non-decreasing here.
    let mut rack_counts: Vec<(usize, u32)> = Vec::new();
    for &(h, k) in counts {
        let r = spec.rack_of(h);
        match rack_counts.last_mut() {
            Some((last, sum)) if *last == r => *sum += k,
            _ => rack_counts.push((r, k)),
        }
    }
    let mut pod_counts: Vec<(usize, u32)> = Vec::new();
    for &(r, k) in &rack_counts {
        let p = spec.pod_of_rack(r);
        match pod_counts.last_mut() {
            Some((last, sum)) if *last == p => *sum += k,
            _ => pod_counts.push((p, k)),
        }
    }
    UplinkDemands {
        hosts,
        racks: rack_counts
            .into_iter()
            .map(|(r, k)| (r, uplink_demand(k, n, b)))
            .collect(),
        pods: pod_counts
            .into_iter()
            .map(|(p, k)| (p, uplink_demand(k, n, b)))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Element {
    HostCompute(usize),
    HostLink(usize),
    RackUplink(usize),
    PodUplink(usize),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::HostCompute(h) => write!(f, "host {h} compute"),
            Element::HostLink(h) => write!(f, "host {h} link"),
            Element::RackUplink(r) => write!(f, "rack {r} uplink"),
            Element::PodUplink(p) => write!(f, "pod {p} uplink"),
        }
    }
}

/// An element whose residual is below what a placement asks of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Overload {
    pub element: Element,
    pub demand: Rational,
    pub residual: Rational,
}

impl fmt::Display for Overload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: needs {} but only {} left",
            self.element,
            frac::format(&self.demand),
            frac::format(&self.residual)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Feasible,
    Violation(Vec<Overload>),
}

impl Validation {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Validation::Feasible)
    }
}

/// Feasible iff every host has room for its VMs' compute and every uplink has
/// room for its hose demand.
pub fn validate(p: &Placement, tree: &FatTree) -> Validation {
    let mut overloads = Vec::new();
    let mut check = |element, demand: Rational, residual: Rational| {
        if demand > residual {
            overloads.push(Overload {
                element,
                demand,
                residual,
            });
        }
    };
    for &(h, k) in p.counts() {
        check(Element::HostCompute(h), p.host_compute(k), tree.residual_compute(h));
    }
    let d = p.demands();
    for (h, bw) in &d.hosts {
        check(Element::HostLink(*h), *bw, tree.residual_link(*h));
    }
    for (r, bw) in &d.racks {
        check(Element::RackUplink(*r), *bw, tree.residual_rack_uplink(*r));
    }
    for (pod, bw) in &d.pods {
        check(Element::PodUplink(*pod), *bw, tree.residual_pod_uplink(*pod));
    }
    if overloads.is_empty() {
        Validation::Feasible
    } else {
        Validation::Violation(overloads)
    }
}
