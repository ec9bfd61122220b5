use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use longcast::aggregator::eta_star;
use longcast::experiment::{
    regret_bound, sort_rows, sweep_row, write_sweep_csv, DataSource, EtaPolicy, RunConfig,
    SweepConfig, DEFAULT_EPSILON_FRAC,
};
use longcast::game::{v1_regret_bound, vd_regret_bound};
use longcast::generate::{generate_game, GameModel, GeneratorSpec};
use longcast::io::write_game;
use longcast::verify::run_verification;
use longcast::{Algorithm, Error, ExpertPrior, LossKind, LossSpec, PriorSpec};

#[derive(Parser)]
#[command(name = "longcast", version, about = "Expert aggregation with delayed feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game and write its trace as JSON.
    Run(RunArgs),
    /// Write a synthetic game file.
    Gen(GenArgs),
    /// Run a grid of configurations and write a CSV summary.
    Sweep(SweepArgs),
    /// Run the self-check suite.
    Verify {
        #[arg(long, default_value_t = 20)]
        seed: u64,
    },
    /// Print theoretical regret bounds and the tuned learning rate.
    Bound(BoundArgs),
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// Game file (`t,omega,xi_1,...,xi_N`).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic game model: noisy-experts, drifting-best or adversarial-swap.
    #[arg(long = "gen", requires = "seed")]
    model: Option<GameModel>,
}

#[derive(Args, Clone)]
struct GenShape {
    #[arg(long, default_value_t = 5)]
    experts: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    algo: Algorithm,
    #[arg(long, default_value = "square")]
    loss: LossKind,
    /// `identity` or `fixed-share:ALPHA`.
    #[arg(long, default_value = "identity")]
    prior: PriorSpec,
    #[arg(long, default_value_t = 1)]
    delay: usize,
    /// A positive number or `auto`.
    #[arg(long, default_value = "auto")]
    eta: EtaPolicy,
    #[arg(long, default_value_t = DEFAULT_EPSILON_FRAC)]
    epsilon: f64,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    shape: GenShape,
    #[arg(long)]
    seed: Option<u64>,
    /// Include the per-step weight matrix in the trace.
    #[arg(long)]
    weights: bool,
    /// Output path; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "gen")]
    model: GameModel,
    #[command(flatten)]
    shape: GenShape,
    #[arg(long, default_value = "square")]
    loss: LossKind,
    /// Block length of adversarial-swap.
    #[arg(long, default_value_t = 1)]
    delay: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "algo-list", value_delimiter = ',', required = true)]
    algos: Vec<Algorithm>,
    #[arg(long = "eta-grid", value_delimiter = ',', required = true)]
    etas: Vec<EtaPolicy>,
    #[arg(long = "delay-grid", value_delimiter = ',', required = true)]
    delays: Vec<usize>,
    #[arg(long = "seeds", value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long, default_value = "square")]
    loss: LossKind,
    /// Used by g-markov cells only.
    #[arg(long, default_value = "identity")]
    prior: PriorSpec,
    #[arg(long, default_value_t = DEFAULT_EPSILON_FRAC)]
    epsilon: f64,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long = "gen", conflicts_with = "data")]
    model: Option<GameModel>,
    #[command(flatten)]
    shape: GenShape,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// Print only the bound of this algorithm.
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    experts: usize,
    /// A positive number or `auto` (the tuned rate).
    #[arg(long, default_value = "auto")]
    eta: EtaPolicy,
    #[arg(long, default_value_t = 1)]
    delay: usize,
    /// Horizon, needed by the fully-connected bound.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value = "square")]
    loss: LossKind,
    #[arg(long, default_value_t = DEFAULT_EPSILON_FRAC)]
    epsilon: f64,
}

fn data_source(data: Option<PathBuf>, model: Option<GameModel>, shape: &GenShape) -> DataSource {
    match (data, model) {
        (Some(p), _) => DataSource::File(p),
        (None, Some(model)) => DataSource::Generator(GeneratorSpec {
            model,
            experts: shape.experts,
            steps: shape.steps,
            noise: shape.noise,
            seed: 0,
            delay: 1,
        }),
        (None, None) => unreachable!("clap enforces a data source"),
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = RunConfig {
        algo: args.algo,
        loss: args.loss,
        prior: args.prior,
        delay: args.delay,
        eta: args.eta,
        epsilon_frac: args.epsilon,
        seed: args.seed.unwrap_or(0),
        source: data_source(args.source.data, args.source.model, &args.shape),
        record_weights: args.weights,
    };
    let trace = cfg.run()?;
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &trace)?;
    writeln!(out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<ExitCode> {
    let spec = GeneratorSpec {
        model: args.model,
        experts: args.shape.experts,
        steps: args.shape.steps,
        noise: args.shape.noise,
        seed: args.seed,
        delay: args.delay,
    };
    let game = generate_game(&spec, LossSpec::from_kind(args.loss))?;
    let mut out = output(args.out.as_deref())?;
    write_game(&mut out, &game)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    if args.data.is_none() && args.model.is_none() {
        return Err(Error::InvalidArgument("sweep needs --data or --gen".into()).into());
    }
    let first = args.algos[0];
    let cfg = SweepConfig {
        base: RunConfig {
            algo: first,
            loss: args.loss,
            prior: args.prior,
            delay: args.delays[0],
            eta: args.etas[0],
            epsilon_frac: args.epsilon,
            seed: args.seeds[0],
            source: data_source(args.data, args.model, &args.shape),
            record_weights: false,
        },
        etas: args.etas,
        delays: args.delays,
        algos: args.algos,
        seeds: args.seeds,
    };
    let mut rows = cfg
        .cells()
        .par_iter()
        .map(sweep_row)
        .collect::<longcast::Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    let out = output(args.out.as_deref())?;
    write_sweep_csv(out, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(seed: u64) -> anyhow::Result<ExitCode> {
    let results = run_verification(seed);
    let mut failed = 0;
    for r in &results {
        println!("{:<22} {}  {}", r.name, if r.passed { "ok" } else { "FAILED" }, r.detail);
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        println!("{failed} of {} checks failed", results.len());
        Ok(ExitCode::from(1))
    } else {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_bound(args: BoundArgs) -> anyhow::Result<ExitCode> {
    let loss = LossSpec::from_kind(args.loss);
    let n = args.experts;
    if n == 0 || args.delay == 0 {
        return Err(Error::InvalidArgument("--experts and --delay must be at least 1".into()).into());
    }
    let tuned = match args.steps {
        Some(t) if n >= 2 => Some(eta_star(n, t, &loss, args.delay, args.epsilon)?),
        _ => None,
    };
    let eta = match args.eta {
        EtaPolicy::Fixed(x) => x,
        EtaPolicy::Auto if args.algo == Some(Algorithm::VdFc) || args.algo.is_none() => match tuned {
            Some(t) => t.eta,
            None => loss.default_eta,
        },
        EtaPolicy::Auto => loss.default_eta,
    };

    if let Some(algo) = args.algo {
        let steps = match (algo, args.steps) {
            (Algorithm::VdFc | Algorithm::GMarkov, None) => {
                return Err(Error::InvalidArgument(format!("--steps is required for {algo}")).into())
            }
            (_, t) => t.unwrap_or(1),
        };
        if algo == Algorithm::V1 && args.delay != 1 {
            return Err(Error::InvalidArgument("v1 is defined for --delay 1 only".into()).into());
        }
        let prior = ExpertPrior::identity(n)?;
        match regret_bound(algo, &prior, &loss, n, steps, args.delay, eta, args.epsilon) {
            Some(b) => println!("{b}"),
            None => println!("no bound for {algo} with delay {}", args.delay),
        }
        return Ok(ExitCode::SUCCESS);
    }

    println!("eta                     {eta}");
    println!("ln_n_over_eta           {}", v1_regret_bound(n, eta));
    println!("delay_ln_n_over_eta     {}", vd_regret_bound(n, args.delay, eta));
    if let (Some(t), Some(steps)) = (tuned, args.steps) {
        println!("eta_star                {}", t.eta);
        println!("fully_connected_bound   {}", t.bound);
        let sqrt_form = 2.0 * (t.drift_constant * n as f64 * (n as f64).ln()).sqrt() * (steps as f64).sqrt();
        println!("sqrt_t_bound            {sqrt_form}");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify { seed } => cmd_verify(seed),
        Command::Bound(a) => cmd_bound(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::InvalidArgument(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
