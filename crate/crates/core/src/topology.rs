//! Three-layer fat-tree substrate with residual capacities.
//!
//! Hosts are numbered globally in pod-major order: host `h` lives in rack
//! `h / hosts_per_rack`, and rack `r` lives in pod `r / racks_per_pod`. Each
//! host has one compute pool and one access link; each rack and pod has a
//! single aggregated uplink. The core is a non-blocking root.

use std::collections::BTreeSet;
use std::ops::Range;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{self, Rational};
use crate::hose::{self, UplinkDemands, Validation};
use crate::request::{VcId, VcRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FatTreeSpec {
    pub pods: usize,
    pub racks_per_pod: usize,
    pub hosts_per_rack: usize,
    #[serde(with = "crate::frac::serde_str", default = "unit")]
    pub host_compute_capacity: Rational,
    #[serde(with = "crate::frac::serde_str", default = "unit")]
    pub host_link_capacity: Rational,
    #[serde(with = "crate::frac::serde_str", default = "unit")]
    pub oversub_tor_agg: Rational,
    #[serde(with = "crate::frac::serde_str", default = "unit")]
    pub oversub_agg_core: Rational,
}

fn unit() -> Rational {
    Rational::one()
}

impl FatTreeSpec {
    /// Non-oversubscribed tree with unit host capacities.
    pub fn new(pods: usize, racks_per_pod: usize, hosts_per_rack: usize) -> Self {
        Self {
            pods,
            racks_per_pod,
            hosts_per_rack,
            host_compute_capacity: Rational::one(),
            host_link_capacity: Rational::one(),
            oversub_tor_agg: Rational::one(),
            oversub_agg_core: Rational::one(),
        }
    }

    pub fn with_oversubscription(mut self, tor_agg: Rational, agg_core: Rational) -> Self {
        self.oversub_tor_agg = tor_agg;
        self.oversub_agg_core = agg_core;
        self
    }

    /// 10 pods of 40 racks of 40 hosts, ToR uplinks oversubscribed 4:1.
    pub fn datacenter() -> Self {
        Self::new(10, 40, 40).with_oversubscription(frac::int(4), Rational::one())
    }

    /// 2 pods of 4 racks of 8 hosts, ToR uplinks oversubscribed 4:1.
    pub fn desk() -> Self {
        Self::new(2, 4, 8).with_oversubscription(frac::int(4), Rational::one())
    }

    /// One rack of six hosts behind a single switch.
    pub fn six_hosts() -> Self {
        Self::new(1, 1, 6)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pods == 0 || self.racks_per_pod == 0 || self.hosts_per_rack == 0 {
            return Err(Error::InvalidTopology("all counts must be >= 1".into()));
        }
        if self.host_compute_capacity <= Rational::zero()
            || self.host_link_capacity <= Rational::zero()
        {
            return Err(Error::InvalidTopology(
                "host capacities must be positive".into(),
            ));
        }
        if self.oversub_tor_agg < Rational::one() || self.oversub_agg_core < Rational::one() {
            return Err(Error::InvalidTopology(
                "oversubscription factors must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn host_count(&self) -> usize {
        self.pods * self.racks_per_pod * self.hosts_per_rack
    }

    pub fn rack_count(&self) -> usize {
        self.pods * self.racks_per_pod
    }

    pub fn hosts_per_pod(&self) -> usize {
        self.racks_per_pod * self.hosts_per_rack
    }

    pub fn rack_uplink_capacity(&self) -> Rational {
        self.host_link_capacity * Rational::from_integer(self.hosts_per_rack as i64)
            / self.oversub_tor_agg
    }

    pub fn pod_uplink_capacity(&self) -> Rational {
        self.rack_uplink_capacity() * Rational::from_integer(self.racks_per_pod as i64)
            / self.oversub_agg_core
    }

    pub fn total_compute(&self) -> Rational {
        self.host_compute_capacity * Rational::from_integer(self.host_count() as i64)
    }

    pub fn rack_of(&self, host: usize) -> usize {
        host / self.hosts_per_rack
    }

    pub fn pod_of_rack(&self, rack: usize) -> usize {
        rack / self.racks_per_pod
    }

    pub fn pod_of(&self, host: usize) -> usize {
        self.pod_of_rack(self.rack_of(host))
    }

    pub fn hosts_in_rack(&self, rack: usize) -> Range<usize> {
        rack * self.hosts_per_rack..(rack + 1) * self.hosts_per_rack
    }

    pub fn racks_in_pod(&self, pod: usize) -> Range<usize> {
        pod * self.racks_per_pod..(pod + 1) * self.racks_per_pod
    }

    pub fn hosts_in_pod(&self, pod: usize) -> Range<usize> {
        let hpp = self.hosts_per_pod();
        pod * hpp..(pod + 1) * hpp
    }
}

/// An embedding of one VC: VM counts per host plus the uplink bandwidth the
/// hose model requires for those counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    vc_id: VcId,
    n: u32,
    c: Rational,
    b: Rational,
    counts: Vec<(usize, u32)>,
    demands: UplinkDemands,
}

impl Placement {
    /// Builds a placement of `req` (at the demand it is embedded with) from
    /// per-host counts. Zero counts are dropped and duplicate hosts merged.
    pub fn new(
        req: &VcRequest,
        counts: impl IntoIterator<Item = (usize, u32)>,
        spec: &FatTreeSpec,
    ) -> Result<Self> {
        let mut merged: Vec<(usize, u32)> = Vec::new();
        for (host, k) in counts {
            if host >= spec.host_count() {
                return Err(Error::InvalidPlacement(format!(
                    "host {host} does not exist ({} hosts)",
                    spec.host_count()
                )));
            }
            if k > 0 {
                merged.push((host, k));
            }
        }
        merged.sort_unstable_by_key(|&(h, _)| h);
        merged.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        let total: u64 = merged.iter().map(|&(_, k)| k as u64).sum();
        if total != req.n as u64 {
            return Err(Error::InvalidPlacement(format!(
                "vc {}: counts sum to {total}, expected n = {}",
                req.id, req.n
            )));
        }
        let demands = hose::demands_of(&merged, req.n, &req.b, spec);
        Ok(Self {
            vc_id: req.id,
            n: req.n,
            c: req.c,
            b: req.b,
            counts: merged,
            demands,
        })
    }

    pub fn vc_id(&self) -> VcId {
        self.vc_id
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn per_vm_compute(&self) -> Rational {
        self.c
    }

    pub fn per_vm_bandwidth(&self) -> Rational {
        self.b
    }

    /// `(host, count)` pairs sorted by host, counts >= 1.
    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    pub fn count_on(&self, host: usize) -> u32 {
        self.counts
            .binary_search_by_key(&host, |&(h, _)| h)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    pub fn demands(&self) -> &UplinkDemands {
        &self.demands
    }

    /// Compute used by `k` VMs of this VC.
    pub fn host_compute(&self, k: u32) -> Rational {
        self.c * Rational::from_integer(k as i64)
    }

    pub fn hosts_used(&self) -> usize {
        self.counts.len()
    }
}

/// Residual capacities of a fat-tree plus the set of VCs currently reserved.
#[derive(Debug, Clone, PartialEq)]
pub struct FatTree {
    spec: FatTreeSpec,
    rack_uplink_capacity: Rational,
    pod_uplink_capacity: Rational,
    host_compute: Vec<Rational>,
    host_link: Vec<Rational>,
    rack_uplink: Vec<Rational>,
    pod_uplink: Vec<Rational>,
    reserved: BTreeSet<VcId>,
}

impl FatTree {
    pub fn build(spec: FatTreeSpec) -> Result<Self> {
        spec.validate()?;
        let hosts = spec.host_count();
        Ok(Self {
            rack_uplink_capacity: spec.rack_uplink_capacity(),
            pod_uplink_capacity: spec.pod_uplink_capacity(),
            host_compute: vec![spec.host_compute_capacity; hosts],
            host_link: vec![spec.host_link_capacity; hosts],
            rack_uplink: vec![spec.rack_uplink_capacity(); spec.rack_count()],
            pod_uplink: vec![spec.pod_uplink_capacity(); spec.pods],
            reserved: BTreeSet::new(),
            spec,
        })
    }

    pub fn spec(&self) -> &FatTreeSpec {
        &self.spec
    }

    pub fn host_count(&self) -> usize {
        self.host_compute.len()
    }

    pub fn residual_compute(&self, host: usize) -> Rational {
        self.host_compute[host]
    }

    pub fn residual_link(&self, host: usize) -> Rational {
        self.host_link[host]
    }

    pub fn residual_rack_uplink(&self, rack: usize) -> Rational {
        self.rack_uplink[rack]
    }

    pub fn residual_pod_uplink(&self, pod: usize) -> Rational {
        self.pod_uplink[pod]
    }

    pub fn rack_uplink_capacity(&self) -> Rational {
        self.rack_uplink_capacity
    }

    pub fn pod_uplink_capacity(&self) -> Rational {
        self.pod_uplink_capacity
    }

    pub fn total_residual_compute(&self) -> Rational {
        self.host_compute.iter().sum()
    }

    pub fn is_reserved(&self, vc: VcId) -> bool {
        self.reserved.contains(&vc)
    }

    pub fn active_count(&self) -> usize {
        self.reserved.len()
    }

    /// True when every residual equals its capacity and nothing is reserved.
    pub fn is_pristine(&self) -> bool {
        self.reserved.is_empty()
            && self.host_compute.iter().all(|r| *r == self.spec.host_compute_capacity)
            && self.host_link.iter().all(|r| *r == self.spec.host_link_capacity)
            && self.rack_uplink.iter().all(|r| *r == self.rack_uplink_capacity)
            && self.pod_uplink.iter().all(|r| *r == self.pod_uplink_capacity)
    }

    pub fn validate(&self, p: &Placement) -> Validation {
        hose::validate(p, self)
    }

    /// Subtracts `p`'s demands. All-or-nothing: on error the tree is unchanged.
    pub fn reserve(&mut self, p: &Placement) -> Result<()> {
        if self.reserved.contains(&p.vc_id) {
            return Err(Error::AlreadyReserved(p.vc_id));
        }
        if let Validation::Violation(overloads) = self.validate(p) {
            return Err(Error::Infeasible {
                vc: p.vc_id,
                overloads,
            });
        }
        for &(h, k) in &p.counts {
            self.host_compute[h] -= p.host_compute(k);
        }
        let d = &p.demands;
        for (h, bw) in &d.hosts {
            self.host_link[*h] -= bw;
        }
        for (r, bw) in &d.racks {
            self.rack_uplink[*r] -= bw;
        }
        for (pod, bw) in &d.pods {
            self.pod_uplink[*pod] -= bw;
        }
        self.reserved.insert(p.vc_id);
        Ok(())
    }

    /// Returns `p`'s demands to the tree. Releasing something that is not
    /// reserved is an error and leaves the tree unchanged.
    pub fn release(&mut self, p: &Placement) -> Result<()> {
        if !self.reserved.contains(&p.vc_id) {
            return Err(Error::NotReserved(p.vc_id));
        }
        let over = |what: &str, idx: usize| {
            Err(Error::Internal(format!(
                "releasing vc {} would push {what} {idx} above capacity",
                p.vc_id
            )))
        };
        for &(h, k) in &p.counts {
            if self.host_compute[h] + p.host_compute(k) > self.spec.host_compute_capacity {
                return over("host compute", h);
            }
        }
        let d = &p.demands;
        for (h, bw) in &d.hosts {
            if self.host_link[*h] + bw > self.spec.host_link_capacity {
                return over("host link", *h);
            }
        }
        for (r, bw) in &d.racks {
            if self.rack_uplink[*r] + bw > self.rack_uplink_capacity {
                return over("rack uplink", *r);
            }
        }
        for (pod, bw) in &d.pods {
            if self.pod_uplink[*pod] + bw > self.pod_uplink_capacity {
                return over("pod uplink", *pod);
            }
        }
        for &(h, k) in &p.counts {
            self.host_compute[h] += p.host_compute(k);
        }
        for (h, bw) in &d.hosts {
            self.host_link[*h] += bw;
        }
        for (r, bw) in &d.racks {
            self.rack_uplink[*r] += bw;
        }
        for (pod, bw) in &d.pods {
            self.pod_uplink[*pod] += bw;
        }
        self.reserved.remove(&p.vc_id);
        Ok(())
    }
}
