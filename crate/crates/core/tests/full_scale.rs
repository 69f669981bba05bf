//! Full datacenter reproduction: 16,000 hosts, 80,000 requests per arm.
//! Takes several minutes; run with `cargo test --release -- --ignored`.

use vcsim::experiment::{self, ExperimentConfig};
use vcsim::frac;
use vcsim::{EmbedderKind, Scheme};

#[test]
#[ignore = "long-running full-scale run"]
fn full_scale_ordering_and_calibration() {
    let cfg = ExperimentConfig::preset("paper_defaults").unwrap();
    let reports = experiment::run_grid(&cfg, None, experiment::threads_from_env()).unwrap();
    print!("{}", experiment::summary_table(&reports));
    let get = |e, s| reports.iter().find(|r| r.embedder == e && r.scheme == s).unwrap();
    let t = get(EmbedderKind::Tetris, Scheme::Dsp);
    let o = get(EmbedderKind::Oktopus, Scheme::Dsp);
    let d = get(EmbedderKind::Oktopus, Scheme::Drp);

    let cal = experiment::calibrate_from_runs(t, d, &cfg.prices).unwrap();
    println!(
        "calibrated from tetris+dsp vs oktopus+drp: delta {:.2}, lambda_c {:.4}, lambda_b {:.4}",
        frac::to_f64(&cal.delta),
        frac::to_f64(&cal.lambdas.lambda_c),
        frac::to_f64(&cal.lambdas.lambda_b)
    );

    assert!(t.mean_slots_sum >= o.mean_slots_sum && o.mean_slots_sum >= d.mean_slots_sum);
    assert!(t.mean_bw_sum >= o.mean_bw_sum && o.mean_bw_sum >= d.mean_bw_sum);
}
