//! Discrete-event simulation of online VC admission.
//!
//! Arrivals are embedded or rejected immediately; accepted VCs hold their
//! placement until `arrival + duration`. The first `warmup_requests` arrivals
//! occupy resources like any other but are not scored.
//!
//! The headline metric is the time-weighted *resource sum* of scored VCs that
//! are currently embedded: `n·c` (slots) and `n·b` (bandwidth), both counted
//! in 1/8-VM units. Under DRP a VC is embedded at its upgraded template but
//! credited with what the customer asked for. The averaging window runs from
//! the first scored arrival to the later of the last arrival and the last
//! departure of a scored VC.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::embed::{Embedder, EmbedderKind};
use crate::error::{Error, Result};
use crate::frac::{self, Rational};
use crate::pricing::{self, LambdaParams, Scheme, UnitPrices};
use crate::request::{TemplateSet, VcId, VcRequest};
use crate::topology::{FatTree, FatTreeSpec, Placement};
use crate::workload::{self, WorkloadConfig};

/// Resource sums are reported in units of the smallest VM (1/8 of a host).
pub const SUM_UNITS_PER_HOST: i64 = 8;

/// One arm of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub tree: FatTreeSpec,
    pub workload: WorkloadConfig,
    pub embedder: EmbedderKind,
    pub scheme: Scheme,
    #[serde(default)]
    pub prices: UnitPrices,
    #[serde(default)]
    pub lambdas: LambdaParams,
    #[serde(default)]
    pub templates: TemplateSet,
}

impl Scenario {
    pub fn new(name: impl Into<String>, tree: FatTreeSpec, workload: WorkloadConfig, embedder: EmbedderKind, scheme: Scheme) -> Self {
        Self {
            name: name.into(),
            tree,
            workload,
            embedder,
            scheme,
            prices: UnitPrices::default(),
            lambdas: LambdaParams::default(),
            templates: TemplateSet::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.workload.validate()?;
        self.prices.validate()?;
        self.lambdas.validate()?;
        if self.scheme == Scheme::Drp {
            if let Some(v) = self
                .workload
                .demand_values
                .iter()
                .find(|v| !self.templates.covers(v))
            {
                return Err(Error::Config(format!(
                    "DRP templates do not cover demand value {}",
                    frac::format(v)
                )));
            }
        }
        Ok(())
    }

    /// Short label like `tetris+dsp`.
    pub fn arm(&self) -> String {
        format!("{}+{}", self.embedder, self.scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Revenue {
    pub ideal: f64,
    pub drp: f64,
    pub dsp: f64,
}

impl Revenue {
    pub fn get(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Ideal => self.ideal,
            Scheme::Drp => self.drp,
            Scheme::Dsp => self.dsp,
        }
    }
}

/// VM-time of accepted VCs leaning towards one resource.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SkewSide {
    /// `Σ n·duration`
    pub vm_time: f64,
    /// `Σ n·c·duration`
    pub compute_time: f64,
    /// `Σ n·b·duration`
    pub bandwidth_time: f64,
}

impl SkewSide {
    fn add(&mut self, req: &VcRequest) {
        let w = req.n as f64 * req.duration;
        self.vm_time += w;
        self.compute_time += w * frac::to_f64(&req.c);
        self.bandwidth_time += w * frac::to_f64(&req.b);
    }

    pub fn mean_c(&self) -> f64 {
        self.compute_time / self.vm_time
    }

    pub fn mean_b(&self) -> f64 {
        self.bandwidth_time / self.vm_time
    }
}

/// Skewed demand accepted during the scored window, split by direction.
/// Feeds the λ calibration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SkewStats {
    /// VCs with `c > b`.
    pub compute_heavy: SkewSide,
    /// VCs with `b > c`.
    pub bandwidth_heavy: SkewSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub time: f64,
    pub slots_sum: f64,
    pub bw_sum: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub embedder: EmbedderKind,
    pub scheme: Scheme,
    #[serde(serialize_with = "frac::serde_str::serialize")]
    pub oversub: Rational,
    pub load: f64,
    pub seed: u64,
    pub window_start: f64,
    pub window_end: f64,
    pub mean_slots_sum: f64,
    pub mean_bw_sum: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub revenue: Revenue,
    pub skew: SkewStats,
    pub series: Vec<Sample>,
}

impl MetricsReport {
    pub fn acceptance(&self) -> f64 {
        let total = self.accepted + self.rejected;
        if total == 0 {
            0.0
        } else {
            self.accepted as f64 / total as f64
        }
    }

    /// Revenue under the scenario's own scheme.
    pub fn scheme_revenue(&self) -> f64 {
        self.revenue.get(self.scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure {
    time: f64,
    vc: VcId,
}

impl Eq for Departure {}

impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.vc.cmp(&other.vc))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct Active {
    placement: Placement,
    scored: bool,
    slots: Rational,
    bw: Rational,
}

/// What a [`Simulation::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Accepted { vc: VcId, time: f64 },
    Rejected { vc: VcId, time: f64 },
    Departed { vc: VcId, time: f64 },
}

/// A simulation in progress. [`run`] drives one to completion; tests can
/// step it and inspect the tree between events.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    embedder: &'static dyn Embedder,
    requests: &'a [VcRequest],
    next_arrival: usize,
    tree: FatTree,
    departures: BinaryHeap<Reverse<Departure>>,
    active: BTreeMap<VcId, Active>,
    window_start: Option<f64>,
    last_time: f64,
    slots_now: Rational,
    bw_now: Rational,
    slots_integral: f64,
    bw_integral: f64,
    last_scored_departure: f64,
    accepted: u64,
    rejected: u64,
    revenue: Revenue,
    skew: SkewStats,
    series: Vec<Sample>,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, requests: &'a [VcRequest]) -> Result<Self> {
        scenario.validate()?;
        if requests.windows(2).any(|w| w[1].arrival < w[0].arrival) {
            return Err(Error::InvalidWorkload("arrivals must be sorted".into()));
        }
        let warmup = scenario.workload.warmup_requests;
        Ok(Self {
            scenario,
            embedder: scenario.embedder.embedder(),
            requests,
            next_arrival: 0,
            tree: FatTree::build(scenario.tree.clone())?,
            departures: BinaryHeap::new(),
            active: BTreeMap::new(),
            window_start: requests.get(warmup).map(|r| r.arrival),
            last_time: requests.first().map_or(0.0, |r| r.arrival),
            slots_now: Rational::zero(),
            bw_now: Rational::zero(),
            slots_integral: 0.0,
            bw_integral: 0.0,
            last_scored_departure: f64::NEG_INFINITY,
            accepted: 0,
            rejected: 0,
            revenue: Revenue::default(),
            skew: SkewStats::default(),
            series: Vec::new(),
        })
    }

    pub fn tree(&self) -> &FatTree {
        &self.tree
    }

    /// Placements of every VC currently embedded.
    pub fn active_placements(&self) -> impl Iterator<Item = &Placement> {
        self.active.values().map(|a| &a.placement)
    }

    fn advance(&mut self, to: f64) {
        if to > self.last_time {
            let dt = to - self.last_time;
            self.slots_integral += frac::to_f64(&self.slots_now) * dt;
            self.bw_integral += frac::to_f64(&self.bw_now) * dt;
            self.last_time = to;
        }
    }

    fn sample(&mut self, time: f64) {
        self.series.push(Sample {
            time,
            slots_sum: frac::to_f64(&self.slots_now),
            bw_sum: frac::to_f64(&self.bw_now),
            accepted: self.accepted,
            rejected: self.rejected,
            revenue: self.revenue.get(self.scenario.scheme),
        });
    }

    /// Processes the next event; `None` once every arrival and departure has
    /// been handled.
    pub fn step(&mut self) -> Result<Option<Event>> {
        let next_departure = self.departures.peek().map(|Reverse(d)| *d);
        let arrival = self.requests.get(self.next_arrival);
        match (arrival, next_departure) {
            (None, None) => Ok(None),
            (Some(req), Some(d)) if d.time > req.arrival => self.arrive().map(Some),
            (Some(_), None) => self.arrive().map(Some),
            (_, Some(_)) => self.depart().map(Some),
        }
    }

    fn depart(&mut self) -> Result<Event> {
        let Reverse(d) = self.departures.pop().expect("peeked");
        let active = self
            .active
            .remove(&d.vc)
            .ok_or_else(|| Error::Internal(format!("departure for unknown vc {}", d.vc)))?;
        self.tree.release(&active.placement)?;
        if active.scored {
            self.advance(d.time);
            self.slots_now -= active.slots;
            self.bw_now -= active.bw;
            if self.slots_now < Rational::zero() || self.bw_now < Rational::zero() {
                return Err(Error::Internal("resource sum went negative".into()));
            }
            self.last_scored_departure = self.last_scored_departure.max(d.time);
            self.sample(d.time);
        }
        Ok(Event::Departed {
            vc: d.vc,
            time: d.time,
        })
    }

    fn arrive(&mut self) -> Result<Event> {
        let idx = self.next_arrival;
        self.next_arrival += 1;
        let requests = self.requests;
        let req = &requests[idx];
        let sc = self.scenario;
        let scored = idx >= sc.workload.warmup_requests;

        let embedded_as = match sc.scheme {
            Scheme::Drp => sc
                .templates
                .upgrade(req)
                .ok()
                .map(|(c, b)| req.with_demand(c, b)),
            Scheme::Ideal | Scheme::Dsp => Some(req.clone()),
        };
        let placement = embedded_as
            .as_ref()
            .and_then(|r| self.embedder.embed(&self.tree, r));

        if scored {
            self.advance(req.arrival);
        }
        let Some(placement) = placement else {
            if scored {
                self.rejected += 1;
                self.sample(req.arrival);
            }
            return Ok(Event::Rejected {
                vc: req.id,
                time: req.arrival,
            });
        };

        self.tree.reserve(&placement).map_err(|e| {
            Error::Internal(format!("embedder returned an unreservable placement: {e}"))
        })?;
        self.departures.push(Reverse(Departure {
            time: req.departure(),
            vc: req.id,
        }));
        let units = Rational::from_integer(SUM_UNITS_PER_HOST);
        let slots = req.total_compute() * units;
        let bw = req.total_bandwidth() * units;
        if scored {
            self.accepted += 1;
            self.slots_now += slots;
            self.bw_now += bw;
            self.score_revenue(req);
            self.sample(req.arrival);
        }
        if self.active.insert(req.id, Active { placement, scored, slots, bw }).is_some() {
            return Err(Error::Internal(format!("duplicate vc id {}", req.id)));
        }
        Ok(Event::Accepted {
            vc: req.id,
            time: req.arrival,
        })
    }

    fn score_revenue(&mut self, req: &VcRequest) {
        let sc = self.scenario;
        let d = req.duration;
        let at = |q: Rational| frac::to_f64(&q) * d;
        self.revenue.ideal += at(pricing::price_ideal(req, &sc.prices).total);
        if let Ok(q) = pricing::price_drp(req, &sc.prices, &sc.templates) {
            self.revenue.drp += at(q.total);
        }
        self.revenue.dsp += at(pricing::price_dsp(req, &sc.prices, &sc.lambdas).total);

        match req.c.cmp(&req.b) {
            Ordering::Greater => self.skew.compute_heavy.add(req),
            Ordering::Less => self.skew.bandwidth_heavy.add(req),
            Ordering::Equal => {}
        }
    }

    /// Runs to completion and checks that the tree drained back to its
    /// initial state.
    pub fn finish(mut self) -> Result<MetricsReport> {
        while self.step()?.is_some() {}
        if !self.tree.is_pristine() {
            return Err(Error::Internal(
                "residuals differ from capacities after all departures".into(),
            ));
        }
        let sc = self.scenario;
        let (start, end) = match self.window_start {
            Some(start) => {
                let last_arrival = self.requests.last().map_or(start, |r| r.arrival);
                (start, last_arrival.max(self.last_scored_departure))
            }
            None => (0.0, 0.0),
        };
        let span = end - start;
        let mean = |integral: f64| if span > 0.0 { integral / span } else { 0.0 };
        Ok(MetricsReport {
            scenario: sc.name.clone(),
            embedder: sc.embedder,
            scheme: sc.scheme,
            oversub: sc.tree.oversub_tor_agg,
            load: sc.workload.target_load,
            seed: sc.workload.seed,
            window_start: start,
            window_end: end,
            mean_slots_sum: mean(self.slots_integral),
            mean_bw_sum: mean(self.bw_integral),
            accepted: self.accepted,
            rejected: self.rejected,
            revenue: self.revenue,
            skew: self.skew,
            series: self.series,
        })
    }
}

/// Generates the scenario's workload and simulates it.
pub fn run(scenario: &Scenario) -> Result<MetricsReport> {
    let requests = workload::generate(&scenario.workload, &scenario.tree)?;
    run_with_requests(scenario, &requests)
}

/// Simulates a given request stream (e.g. a replay file). The scenario's
/// workload settings only contribute the warmup count and metadata.
pub fn run_with_requests(scenario: &Scenario, requests: &[VcRequest]) -> Result<MetricsReport> {
    Simulation::new(scenario, requests)?.finish()
}

/// Relative difference `(a − b) / b` of two arms' mean resource sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDiff {
    pub better: String,
    pub baseline: String,
    pub slots_rel: f64,
    pub bw_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reports: Vec<MetricsReport>,
    pub diffs: Vec<PairDiff>,
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / b
    }
}

/// Runs paired scenarios on one shared request stream and reports every
/// ordered pair's relative difference. All scenarios must share the workload
/// and the topology shape.
pub fn compare(scenarios: &[Scenario]) -> Result<Comparison> {
    let Some(first) = scenarios.first() else {
        return Ok(Comparison {
            reports: Vec::new(),
            diffs: Vec::new(),
        });
    };
    for s in &scenarios[1..] {
        if s.workload != first.workload {
            return Err(Error::WorkloadMismatch(format!(
                "{:?} and {:?} use different workloads",
                first.name, s.name
            )));
        }
        if s.tree.total_compute() != first.tree.total_compute() {
            return Err(Error::WorkloadMismatch(format!(
                "{:?} and {:?} have different capacities, so arrival rates differ",
                first.name, s.name
            )));
        }
    }
    let requests = workload::generate(&first.workload, &first.tree)?;
    let reports = scenarios
        .iter()
        .map(|s| run_with_requests(s, &requests))
        .collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        for (j, b) in reports.iter().enumerate() {
            if i != j {
                diffs.push(PairDiff {
                    better: scenarios[i].name.clone(),
                    baseline: scenarios[j].name.clone(),
                    slots_rel: rel(a.mean_slots_sum, b.mean_slots_sum),
                    bw_rel: rel(a.mean_bw_sum, b.mean_bw_sum),
                });
            }
        }
    }
    Ok(Comparison { reports, diffs })
}
