//! Experiment grids: config files, presets, parallel execution and CSV output.
//!
//! A grid crosses the arms (embedder × pricing scheme) with oversubscription
//! factors, load levels and seeds. Every cell writes one time-series CSV and
//! the whole grid writes one summary CSV.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbedderKind;
use crate::error::{Error, Result};
use crate::frac::{self, Rational};
use crate::pricing::{self, CalibrationInput, LambdaParams, Scheme, UnitPrices};
use crate::request::{TemplateSet, VcRequest};
use crate::simulator::{self, MetricsReport, Scenario};
use crate::topology::FatTreeSpec;
use crate::workload::{self, WorkloadConfig};

pub const SERIES_HEADER: &str = "time,slots_sum,bw_sum,accepted,rejected,revenue";
pub const SUMMARY_HEADER: &str =
    "scenario,embedder,scheme,oversub,load,seed,mean_slots_sum,mean_bw_sum,acceptance,revenue";

/// Caps the number of grid cells simulated in parallel.
pub const THREADS_ENV: &str = "VCSIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub embedder: EmbedderKind,
    pub scheme: Scheme,
}

impl Arm {
    pub const fn new(embedder: EmbedderKind, scheme: Scheme) -> Self {
        Self { embedder, scheme }
    }

    /// Tetris+DSP, Oktopus+DSP, Oktopus+DRP.
    pub const COMPARISON: [Arm; 3] = [
        Arm::new(EmbedderKind::Tetris, Scheme::Dsp),
        Arm::new(EmbedderKind::Oktopus, Scheme::Dsp),
        Arm::new(EmbedderKind::Oktopus, Scheme::Drp),
    ];

    pub fn label(&self) -> String {
        format!("{}+{}", self.embedder, self.scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// ToR→aggregation oversubscription factors; defaults to the topology's.
    #[serde(default, with = "crate::frac::serde_str_vec")]
    pub oversub: Vec<Rational>,
    /// Target loads; defaults to the workload's.
    #[serde(default)]
    pub load: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub topology: FatTreeSpec,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub prices: UnitPrices,
    #[serde(default)]
    pub lambdas: LambdaParams,
    #[serde(default)]
    pub templates: TemplateSet,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub sweep: Sweep,
    /// Seeds to run; defaults to the workload's seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_arms() -> Vec<Arm> {
    Arm::COMPARISON.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("vcsim-out")
}

/// One simulation of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scenario: Scenario,
}

impl Cell {
    /// File name of this cell's time series.
    pub fn file_name(&self) -> String {
        let s = &self.scenario;
        format!(
            "{}_{}_{}_os{}_load{}_seed{}.csv",
            s.name,
            s.embedder,
            s.scheme,
            frac::format(&s.tree.oversub_tor_agg).replace('/', "_"),
            s.workload.target_load,
            s.workload.seed
        )
    }
}

pub const PRESETS: [&str; 6] = [
    "paper_defaults",
    "paper_oversub",
    "paper_load",
    "desk",
    "desk_oversub",
    "desk_load",
];

impl ExperimentConfig {
    /// Built-in configurations. The `paper_*` presets use the full
    /// 16,000-host datacenter and 80,000 requests; the `desk_*` presets use a
    /// 64-host tree and 4,000 requests over five seeds.
    pub fn preset(name: &str) -> Option<Self> {
        let full = || ExperimentConfig {
            name: name.to_string(),
            topology: FatTreeSpec::datacenter(),
            workload: WorkloadConfig::default(),
            prices: UnitPrices::default(),
            lambdas: LambdaParams::default(),
            templates: TemplateSet::default(),
            arms: default_arms(),
            sweep: Sweep::default(),
            seeds: vec![1],
            output_dir: default_output_dir(),
        };
        let desk = || ExperimentConfig {
            topology: FatTreeSpec::desk(),
            workload: WorkloadConfig {
                mean_n: 12.0,
                total_requests: 4000,
                warmup_requests: 500,
                ..WorkloadConfig::default()
            },
            seeds: (1..=5).collect(),
            ..full()
        };
        let oversub = || [1, 2, 4, 5, 8].map(frac::int).to_vec();
        let load = || vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        let cfg = match name {
            "paper_defaults" => full(),
            "paper_oversub" => ExperimentConfig {
                sweep: Sweep {
                    oversub: oversub(),
                    load: vec![],
                },
                ..full()
            },
            "paper_load" => ExperimentConfig {
                sweep: Sweep {
                    oversub: vec![],
                    load: load(),
                },
                ..full()
            },
            "desk" => desk(),
            "desk_oversub" => ExperimentConfig {
                sweep: Sweep {
                    oversub: [1, 2, 4, 8].map(frac::int).to_vec(),
                    load: vec![],
                },
                ..desk()
            },
            "desk_load" => ExperimentConfig {
                sweep: Sweep {
                    oversub: vec![],
                    load: vec![0.4, 0.6, 0.8, 1.0],
                },
                ..desk()
            },
            _ => return None,
        };
        Some(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a preset by name, or a JSON file by path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(cfg) = Self::preset(name_or_path) {
            return Ok(cfg);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::Config(format!(
                "{name_or_path:?} is neither a preset ({}) nor an existing file",
                PRESETS.join(", ")
            )));
        }
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn oversub_axis(&self) -> Vec<Rational> {
        if self.sweep.oversub.is_empty() {
            vec![self.topology.oversub_tor_agg]
        } else {
            self.sweep.oversub.clone()
        }
    }

    pub fn load_axis(&self) -> Vec<f64> {
        if self.sweep.load.is_empty() {
            vec![self.workload.target_load]
        } else {
            self.sweep.load.clone()
        }
    }

    pub fn seed_axis(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.workload.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config("name must be a non-empty file-name fragment".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::Config("no arms to run".into()));
        }
        self.cells().into_iter().try_for_each(|c| c.scenario.validate())
    }

    /// Every cell of the grid, ordered by oversub, load, seed, then arm.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for oversub in self.oversub_axis() {
            for load in self.load_axis() {
                for seed in self.seed_axis() {
                    for arm in &self.arms {
                        let mut tree = self.topology.clone();
                        tree.oversub_tor_agg = oversub;
                        let workload = WorkloadConfig {
                            target_load: load,
                            seed,
                            ..self.workload.clone()
                        };
                        out.push(Cell {
                            scenario: Scenario {
                                name: self.name.clone(),
                                tree,
                                workload,
                                embedder: arm.embedder,
                                scheme: arm.scheme,
                                prices: self.prices,
                                lambdas: self.lambdas,
                                templates: self.templates.clone(),
                            },
                        });
                    }
                }
            }
        }
        out
    }
}

/// Worker count from `VCSIM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Runs every cell, in parallel up to `threads` (all cores when `None`).
/// With `replay`, each cell simulates that stream instead of generating one.
/// Reports come back in cell order.
pub fn run_grid(
    config: &ExperimentConfig,
    replay: Option<&[VcRequest]>,
    threads: Option<usize>,
) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    let cells = config.cells();
    let work = || {
        cells
            .par_iter()
            .map(|cell| match replay {
                Some(reqs) => simulator::run_with_requests(&cell.scenario, reqs),
                None => simulator::run(&cell.scenario),
            })
            .collect::<Result<Vec<_>>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(work)
}

pub fn write_series<W: Write>(mut w: W, report: &MetricsReport) -> Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for s in &report.series {
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{},{},{:.2}",
            s.time, s.slots_sum, s.bw_sum, s.accepted, s.rejected, s.revenue
        )?;
    }
    Ok(())
}

pub fn summary_row(report: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.2}",
        report.scenario,
        report.embedder,
        report.scheme,
        frac::format(&report.oversub),
        report.load,
        report.seed,
        report.mean_slots_sum,
        report.mean_bw_sum,
        report.acceptance(),
        report.scheme_revenue()
    )
}

pub fn write_summary<W: Write>(mut w: W, reports: &[MetricsReport]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", summary_row(r))?;
    }
    Ok(())
}

/// Writes one series CSV per cell plus `summary.csv` into `dir`, returning
/// the paths written.
pub fn write_outputs(dir: &Path, cells: &[Cell], reports: &[MetricsReport]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(reports.len() + 1);
    for (cell, report) in cells.iter().zip(reports) {
        let path = dir.join(cell.file_name());
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        write_series(&mut f, report)?;
        f.flush()?;
        written.push(path);
    }
    let path = dir.join("summary.csv");
    let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
    write_summary(&mut f, reports)?;
    f.flush()?;
    written.push(path);
    Ok(written)
}

/// Seed-averaged results of one arm at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmStats {
    pub arm: Arm,
    #[serde(serialize_with = "frac::serde_str::serialize")]
    pub oversub: Rational,
    pub load: f64,
    pub seeds: usize,
    pub mean_slots_sum: f64,
    pub mean_bw_sum: f64,
    pub acceptance: f64,
    pub revenue: f64,
}

pub fn aggregate(reports: &[MetricsReport]) -> Vec<ArmStats> {
    let mut out: Vec<(ArmStats, usize)> = Vec::new();
    for r in reports {
        let arm = Arm::new(r.embedder, r.scheme);
        let slot = out
            .iter_mut()
            .find(|(s, _)| s.arm == arm && s.oversub == r.oversub && s.load == r.load);
        let (stats, n) = match slot {
            Some(entry) => entry,
            None => {
                out.push((
                    ArmStats {
                        arm,
                        oversub: r.oversub,
                        load: r.load,
                        seeds: 0,
                        mean_slots_sum: 0.0,
                        mean_bw_sum: 0.0,
                        acceptance: 0.0,
                        revenue: 0.0,
                    },
                    0,
                ));
                out.last_mut().unwrap()
            }
        };
        *n += 1;
        stats.mean_slots_sum += r.mean_slots_sum;
        stats.mean_bw_sum += r.mean_bw_sum;
        stats.acceptance += r.acceptance();
        stats.revenue += r.scheme_revenue();
    }
    out.into_iter()
        .map(|(mut s, n)| {
            let n_f = n as f64;
            s.seeds = n;
            s.mean_slots_sum /= n_f;
            s.mean_bw_sum /= n_f;
            s.acceptance /= n_f;
            s.revenue /= n_f;
            s
        })
        .collect()
}

/// Human-readable table of seed-averaged results, with each arm's gain over
/// the last arm of its grid point.
pub fn summary_table(reports: &[MetricsReport]) -> String {
    let stats = aggregate(reports);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>5} {:>6} {:>12} {:>12} {:>10} {:>14} {:>9} {:>9}",
        "arm", "oversub", "load", "seeds", "slots_sum", "bw_sum", "accept", "revenue", "d_slots", "d_bw"
    );
    let mut i = 0;
    while i < stats.len() {
        let point = (stats[i].oversub, stats[i].load);
        let group: Vec<&ArmStats> = stats[i..]
            .iter()
            .take_while(|s| (s.oversub, s.load) == point)
            .collect();
        let base = group.last().copied().expect("nonempty group");
        for s in &group {
            let pct = |a: f64, b: f64| if b > 0.0 { 100.0 * (a - b) / b } else { 0.0 };
            let _ = writeln!(
                out,
                "{:<14} {:>7} {:>5} {:>6} {:>12.3} {:>12.3} {:>10.4} {:>14.2} {:>8.2}% {:>8.2}%",
                s.arm.label(),
                frac::format(&s.oversub),
                s.load,
                s.seeds,
                s.mean_slots_sum,
                s.mean_bw_sum,
                s.acceptance,
                s.revenue,
                pct(s.mean_slots_sum, base.mean_slots_sum),
                pct(s.mean_bw_sum, base.mean_bw_sum),
            );
        }
        i += group.len();
    }
    out
}

/// λ values that keep provider revenue at the DRP level.
///
/// `dsp_run` is a run under demand-specific admission and `drp_run` the
/// paired DRP run. `Δ` is what the DSP run would earn at DRP prices
/// (`λ = 1`) minus what the DRP run earned; half of it is returned to each
/// skew direction through its λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub delta: Rational,
    pub compute_heavy: Option<CalibrationInput>,
    pub bandwidth_heavy: Option<CalibrationInput>,
    pub lambdas: LambdaParams,
}

pub fn calibrate_from_runs(
    dsp_run: &MetricsReport,
    drp_run: &MetricsReport,
    prices: &UnitPrices,
) -> Result<Calibration> {
    const DEN: i64 = 1_000_000;
    let delta = (dsp_run.revenue.drp - drp_run.revenue.drp).max(0.0);
    let delta = frac::quantize(delta, 1000)?;
    let input = |side: &simulator::SkewSide| -> Result<Option<CalibrationInput>> {
        if side.vm_time <= 0.0 {
            return Ok(None);
        }
        Ok(Some(CalibrationInput {
            count: frac::quantize(side.vm_time, 1000)?,
            e_c: frac::quantize(side.mean_c(), DEN)?,
            e_b: frac::quantize(side.mean_b(), DEN)?,
            delta,
        }))
    };
    let compute_heavy = input(&dsp_run.skew.compute_heavy)?;
    let bandwidth_heavy = input(&dsp_run.skew.bandwidth_heavy)?;
    let lambda_b = match &compute_heavy {
        Some(i) => pricing::calibrate_lambda_b(i, prices)?,
        None => frac::int(1),
    };
    let lambda_c = match &bandwidth_heavy {
        Some(i) => pricing::calibrate_lambda_c(i, prices)?,
        None => frac::int(1),
    };
    Ok(Calibration {
        delta,
        compute_heavy,
        bandwidth_heavy,
        lambdas: LambdaParams { lambda_c, lambda_b },
    })
}

/// Convenience for the `gen` command: the stream a config's first cell
/// would simulate.
pub fn stream_for(config: &ExperimentConfig) -> Result<Vec<VcRequest>> {
    let cell = config
        .cells()
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("empty grid".into()))?;
    workload::generate(&cell.scenario.workload, &cell.scenario.tree)
}
