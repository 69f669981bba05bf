use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vcsim::experiment::{self, Arm, ExperimentConfig};
use vcsim::pricing::{self, CalibrationInput};
use vcsim::{frac, workload, EmbedderKind, LambdaParams, Rational, Scheme, TemplateSet, UnitPrices, VcRequest};

#[derive(Parser)]
#[command(name = "vcsim", version, about = "Virtual cluster embedding and pricing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write CSVs plus a summary.
    Simulate(SimulateArgs),
    /// Quote one request under a pricing scheme.
    Price(PriceArgs),
    /// Compute λ weights from measured demand and provider surplus.
    Calibrate(CalibrateArgs),
    /// Write a workload stream for later replay.
    Gen(GenArgs),
    /// Print a preset configuration as JSON.
    Config {
        /// Preset name.
        preset: String,
    },
}

fn rational(s: &str) -> Result<Rational, String> {
    frac::parse(s).map_err(|e| e.to_string())
}

fn rationals(s: &str) -> Result<Vec<Rational>, String> {
    s.split(',').map(|v| rational(v.trim())).collect()
}

#[derive(Args)]
struct ConfigArgs {
    /// Preset name or path to a JSON config.
    #[arg(long, default_value = "desk")]
    config: String,
    /// Override the number of requests per run.
    #[arg(long)]
    requests: Option<usize>,
    /// Override the number of unscored warm-up requests.
    #[arg(long)]
    warmup: Option<usize>,
    /// Override the seed list (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading config {:?}", self.config))?;
        if let Some(r) = self.requests {
            cfg.workload.total_requests = r;
        }
        if let Some(w) = self.warmup {
            cfg.workload.warmup_requests = w;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; defaults to the config's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulate this stream file in every cell instead of generating one.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Skip the summary table.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, value_parser = rational)]
    c: Rational,
    #[arg(long, value_parser = rational)]
    b: Rational,
    #[arg(long, default_value = "dsp")]
    scheme: Scheme,
    #[arg(long, value_parser = rational, default_value = "1")]
    pc: Rational,
    #[arg(long, value_parser = rational, default_value = "1")]
    pb: Rational,
    #[arg(long, value_parser = rational, default_value = "1/6")]
    lambda_c: Rational,
    #[arg(long, value_parser = rational, default_value = "1/6")]
    lambda_b: Rational,
    /// DRP template sizes (comma separated).
    #[arg(long, value_parser = rationals)]
    templates: Option<Vec<Rational>>,
    /// Also print the base price and skew fee.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// VMs (or VM-time) of the skew direction being calibrated.
    #[arg(long, value_parser = rational, required_unless_present = "from_runs")]
    count: Option<Rational>,
    #[arg(long, value_parser = rational, required_unless_present = "from_runs")]
    e_c: Option<Rational>,
    #[arg(long, value_parser = rational, required_unless_present = "from_runs")]
    e_b: Option<Rational>,
    /// Provider surplus to return to customers.
    #[arg(long, value_parser = rational, required_unless_present = "from_runs")]
    delta: Option<Rational>,
    #[arg(long, value_parser = rational, default_value = "1")]
    pc: Rational,
    #[arg(long, value_parser = rational, default_value = "1")]
    pb: Rational,
    /// Measure the inputs from paired Oktopus DSP/DRP runs of a config.
    #[arg(long, conflicts_with_all = ["count", "e_c", "e_b", "delta"])]
    from_runs: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let replay: Option<Vec<VcRequest>> = match &args.replay {
        Some(path) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(workload::read_stream(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?)
        }
        None => None,
    };
    let reports = experiment::run_grid(&cfg, replay.as_deref(), experiment::threads_from_env())?;
    let dir = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let files = experiment::write_outputs(&dir, &cfg.cells(), &reports)
        .with_context(|| format!("writing outputs to {}", dir.display()))?;
    if !args.quiet {
        let mut out = io::stdout().lock();
        write!(out, "{}", experiment::summary_table(&reports))?;
        writeln!(out, "wrote {} files to {}", files.len(), dir.display())?;
    }
    Ok(())
}

fn price(args: &PriceArgs) -> Result<()> {
    let req = VcRequest::shape(0, args.n, args.c, args.b)?;
    let prices = UnitPrices::new(args.pc, args.pb)?;
    let lambdas = LambdaParams::new(args.lambda_c, args.lambda_b)?;
    let templates = match &args.templates {
        Some(t) => TemplateSet::new(t.clone())?,
        None => TemplateSet::default(),
    };
    let q = pricing::quote(args.scheme, &req, &prices, &lambdas, &templates)?;
    if args.verbose {
        println!("base {}", frac::format(&q.base));
        println!("skew_fee {}", frac::format(&q.skew_fee));
    }
    println!("{}", frac::format(&q.total));
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let prices = UnitPrices::new(args.pc, args.pb)?;
    if args.from_runs {
        let mut cfg = args.config.load()?;
        cfg.arms = vec![
            Arm::new(EmbedderKind::Oktopus, Scheme::Dsp),
            Arm::new(EmbedderKind::Oktopus, Scheme::Drp),
        ];
        cfg.seeds.truncate(1);
        cfg.sweep = Default::default();
        cfg.prices = prices;
        let reports = experiment::run_grid(&cfg, None, experiment::threads_from_env())?;
        let cal = experiment::calibrate_from_runs(&reports[0], &reports[1], &prices)?;
        println!("delta {}", frac::to_f64(&cal.delta));
        println!("lambda_c {}", frac::format(&cal.lambdas.lambda_c));
        println!("lambda_b {}", frac::format(&cal.lambdas.lambda_b));
        return Ok(());
    }
    let (Some(count), Some(e_c), Some(e_b), Some(delta)) = (args.count, args.e_c, args.e_b, args.delta) else {
        bail!("--count, --e-c, --e-b and --delta are required");
    };
    let input = CalibrationInput { count, e_c, e_b, delta };
    if e_c > e_b {
        println!("lambda_b {}", frac::format(&pricing::calibrate_lambda_b(&input, &prices)?));
    } else if e_b > e_c {
        println!("lambda_c {}", frac::format(&pricing::calibrate_lambda_c(&input, &prices)?));
    } else {
        bail!("E[c] equals E[b]: there is no skew fee to calibrate");
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let reqs = experiment::stream_for(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
            workload::write_stream(&mut f, &reqs)?;
            f.flush()?;
        }
        None => workload::write_stream(io::stdout().lock(), &reqs)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Price(a) => price(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::Gen(a) => gen(&a),
        Command::Config { preset } => {
            let Some(cfg) = ExperimentConfig::preset(&preset) else {
                bail!("unknown preset {preset:?}; known: {}", experiment::PRESETS.join(", "));
            };
            println!("{}", cfg.to_json()?);
            Ok(())
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || matches!(c.downcast_ref::<vcsim::Error>(), Some(vcsim::Error::Io(io)) if io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
