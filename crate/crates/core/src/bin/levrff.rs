use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levrff::data::{parse_sparse_dataset, Task};
use levrff::experiments::config::{
    build_config, load_settings, simulated_dataset, Command, Settings,
};
use levrff::experiments::csv::{write_csv, write_diagnose_csv};
use levrff::experiments::{run_algorithm1_pipeline, run_benchmark, run_convergence, run_diagnose};
use levrff::Error;

#[derive(Parser, Debug)]
#[command(
    name = "levrff",
    version,
    about = "Leverage-weighted random Fourier feature experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Excess-risk convergence on the spline simulation.
    Simulate(Opts),
    /// Plain versus weighted features on a dataset (or the spline simulation).
    Benchmark(Opts),
    /// Two-stage pool plus approximate-leverage compression.
    Pipeline(Opts),
    /// Leverage, effective dof and concentration diagnostics.
    Diagnose(Opts),
}

#[derive(Args, Debug)]
struct Opts {
    /// Flat key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian or spline.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Even spline order 2r of the learning kernel.
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    truncation: Option<usize>,
    /// cos-plus-sin or cos-sin-pair (Gaussian only).
    #[arg(long)]
    style: Option<String>,
    /// plain, exact_leverage or approx_leverage.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated schemes compared by `benchmark`.
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    s_grid: Option<String>,
    /// inv-sqrt-n, inv-cbrt-n, inv-n, log-n-over-n or fixed.
    #[arg(long)]
    lambda_rule: Option<String>,
    #[arg(long)]
    lambda_const: Option<f64>,
    #[arg(long)]
    lambda_star_rule: Option<String>,
    #[arg(long)]
    lambda_star_const: Option<f64>,
    /// dof, corollary or fixed.
    #[arg(long)]
    s_rule: Option<String>,
    #[arg(long)]
    s_const: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// squared, hinge or logistic.
    #[arg(long)]
    loss: Option<String>,
    /// Sparse `label index:value` dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Force the dataset task (regression or classification).
    #[arg(long)]
    task: Option<String>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep the highest-scoring pool features instead of sampling.
    #[arg(long)]
    top_l: bool,
    /// total, dof, corollary or fixed.
    #[arg(long)]
    l_rule: Option<String>,
    #[arg(long)]
    l_const: Option<f64>,
    /// Record wall-clock times (makes output nondeterministic).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    target_order: Option<u32>,
    #[arg(long)]
    sim_n: Option<usize>,
    #[arg(long)]
    eval_points: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    gamma_grid: Option<String>,
    /// true or false.
    #[arg(long)]
    standardize: Option<String>,
    /// Score budget for exact leverage; `none` scores at the fitting lambda.
    #[arg(long)]
    leverage_budget: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Opts {
    /// Config file settings overlaid with the flags given on the command line.
    fn settings(&self) -> Result<Settings, Error> {
        let mut s = match &self.config {
            Some(p) => load_settings(p)?,
            None => Settings::new(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v);
            }
        };
        let text = |v: &Option<String>| v.clone();
        put("kernel", text(&self.kernel));
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("order", self.order.map(|v| v.to_string()));
        put("truncation", self.truncation.map(|v| v.to_string()));
        put("style", text(&self.style));
        put("scheme", text(&self.scheme));
        put("schemes", text(&self.schemes));
        put("n-grid", text(&self.n_grid));
        put("s-grid", text(&self.s_grid));
        put("lambda-rule", text(&self.lambda_rule));
        put("lambda-const", self.lambda_const.map(|v| v.to_string()));
        put("lambda-star-rule", text(&self.lambda_star_rule));
        put(
            "lambda-star-const",
            self.lambda_star_const.map(|v| v.to_string()),
        );
        put("s-rule", text(&self.s_rule));
        put("s-const", self.s_const.map(|v| v.to_string()));
        put("reps", self.reps.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("loss", text(&self.loss));
        put("task", text(&self.task));
        put("top-l", self.top_l.then(|| "true".to_string()));
        put("l-rule", text(&self.l_rule));
        put("l-const", self.l_const.map(|v| v.to_string()));
        put("timing", self.timing.then(|| "true".to_string()));
        put("subsample", self.subsample.map(|v| v.to_string()));
        put("sigma", self.sigma.map(|v| v.to_string()));
        put("x0", self.x0.map(|v| v.to_string()));
        put("target-order", self.target_order.map(|v| v.to_string()));
        put("sim-n", self.sim_n.map(|v| v.to_string()));
        put("eval-points", self.eval_points.map(|v| v.to_string()));
        put("test-fraction", self.test_fraction.map(|v| v.to_string()));
        put("folds", self.folds.map(|v| v.to_string()));
        put("lambda-grid", text(&self.lambda_grid));
        put("gamma-grid", text(&self.gamma_grid));
        put("standardize", text(&self.standardize));
        put("leverage-budget", text(&self.leverage_budget));
        put("max-iter", self.max_iter.map(|v| v.to_string()));
        put("tol", self.tol.map(|v| v.to_string()));
        put("data", self.data.as_ref().map(|p| p.display().to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        Ok(s)
    }
}

fn run(command: Command, opts: &Opts) -> Result<(), Error> {
    let settings = opts.settings()?;
    if let Some(t) = settings.get("threads") {
        let threads: usize = t
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad thread count '{t}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    }
    let config = build_config(command, &settings)?;
    let task = settings
        .get("task")
        .map(|t| t.parse::<Task>())
        .transpose()?;
    let dataset = settings
        .get("data")
        .map(|p| parse_sparse_dataset(p, task))
        .transpose()?;
    log::info!(
        "{command}: {} repetitions, seed {}",
        config.reps,
        config.seed
    );

    let text = match command {
        Command::Simulate => {
            if dataset.is_some() {
                return Err(Error::InvalidParameter(
                    "simulate does not take --data".into(),
                ));
            }
            write_csv(&run_convergence(&config)?)
        }
        Command::Benchmark | Command::Pipeline => {
            let data = match dataset {
                Some(d) => d,
                None => simulated_dataset(&config)?,
            };
            let result = if command == Command::Benchmark {
                run_benchmark(&config, &data)?
            } else {
                run_algorithm1_pipeline(&config, &data)?
            };
            write_csv(&result)
        }
        Command::Diagnose => write_diagnose_csv(&run_diagnose(&config, dataset.as_ref())?),
    };
    match settings.get("out") {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, opts) = match &cli.command {
        Sub::Simulate(o) => (Command::Simulate, o),
        Sub::Benchmark(o) => (Command::Benchmark, o),
        Sub::Pipeline(o) => (Command::Pipeline, o),
        Sub::Diagnose(o) => (Command::Diagnose, o),
    };
    match run(command, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
