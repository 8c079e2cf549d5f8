use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pacreg::bounds::{thm21_constants, thm32_constants, thm35_constants};
use pacreg::harness::verify::{run_suite, Suite};
use pacreg::harness::{
    emit_report, fit_on, parse_dataset_csv, seed, EstimatorId, ExperimentConfig, PosteriorSettings, Prepared,
};
use pacreg::numeric::quantile;
use pacreg::synthetic::{Noise, SpecFile};
use pacreg::{empirical_risk, Error, LeastSquares, LinearModel};

#[derive(Parser)]
#[command(name = "pacreg", version, about = "Robust least-squares regression with truncated PAC-Bayesian posteriors")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (all cores when unset).
    #[arg(long, global = true, env = "PACREG_THREADS")]
    threads: Option<usize>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimator on a dataset file or a fresh sample from a spec.
    Fit(FitArgs),
    /// Run a replicated experiment and write CSV reports.
    Experiment(ExperimentArgs),
    /// Run the numerical check battery; exits 1 on any failed check.
    Verify(VerifyArgs),
    /// Deviation study of the robust mean against the empirical mean.
    MeanDemo(MeanDemoArgs),
    /// Print the explicit bound constants.
    Constants(ConstantsArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Spec file (TOML) giving the law, features and box.
    #[arg(long)]
    spec: PathBuf,
    /// Estimator identifier, e.g. `ols`, `ridge(0.1)`, `trunc-pacbayes`.
    #[arg(long)]
    estimator: String,
    /// Dataset CSV; a sample of size `--n` is drawn from the spec otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 4_000)]
    chain_length: usize,
    #[arg(long, default_value_t = 1_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 256)]
    m: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write zeros in the timing column, for byte-comparable output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Truncation,
    Bounds,
    Posterior,
    Synthetic,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
}

#[derive(Args)]
struct MeanDemoArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    /// Student-t degrees of freedom of the centred outputs.
    #[arg(long, default_value_t = 2.5)]
    nu: f64,
    /// Bound on the second moment; the t variance when unset.
    #[arg(long)]
    variance_bound: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaRule {
    /// `λ = 0.32/(2σ+H)²`.
    Thm21,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "H", default_value_t = 1.0)]
    h: f64,
    #[arg(long, value_enum, conflicts_with = "lambda")]
    lambda_rule: Option<LambdaRule>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.18)]
    eta_prime: f64,
    /// Complexity factor `G`.
    #[arg(long = "G", default_value_t = 1.0)]
    g: f64,
    /// `η` of the exponential-moment condition, for the Gibbs constants.
    #[arg(long)]
    eta: Option<f64>,
}

/// Three significant figures.
fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.digits$}")
}

fn threads(cli: &Cli) -> Option<usize> {
    cli.threads.filter(|t| *t > 0)
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| Error::Io { path: a.spec.clone(), source: e })?;
    let spec = SpecFile::from_toml_str(&text)?;
    let id: EstimatorId = a.estimator.parse()?;
    let settings = PosteriorSettings { m: a.m, chain_length: a.chain_length, burn_in: a.burn_in, ..Default::default() };
    let prepared = Prepared::new(spec.law.clone(), spec.bounds.clone(), &settings)?;
    let data = match &a.data {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            parse_dataset_csv(f)?
        }
        None => spec.law.sample(a.n, seed::derive(cli.seed, "data", a.n, 0))?,
    };
    let out = fit_on(&prepared, &id, &settings, &data, seed::derive(cli.seed, &id.to_string(), data.len(), 0))?;
    let theta = out.fitted.theta().to_vec();
    let risk = out.fitted.risk(&spec.law)?;
    let emp = empirical_risk(&LinearModel::new(theta.clone()), &prepared.fmap, &data, &LeastSquares)?;
    println!("estimator\t{id}");
    println!("n\t{}", data.len());
    println!("theta\t{}", theta.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(","));
    println!("empirical_risk\t{emp:.6}");
    println!("exact_risk\t{risk:.6}");
    println!("excess_risk\t{:.6e}", risk - prepared.reference_risk(id.reference()));
    if let Some(r) = out.accept_rate {
        println!("accept_rate\t{r:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> Result<ExitCode, Error> {
    let cfg = ExperimentConfig::from_path(&a.config)?;
    let dir = cli.out.clone().or_else(|| cfg.output.path.clone()).unwrap_or_else(|| PathBuf::from("report"));
    let mut report = pacreg::harness::run_experiment(&cfg, threads(cli))?;
    if a.no_timing {
        report = report.without_timing();
    }
    let paths = emit_report(&report, &dir)?;
    for row in
        report.aggregates.iter().filter(|r| matches!(r.stat.as_str(), "mean" | "q0.95" | "worst_mean" | "benchmark"))
    {
        println!("{}\tn={}\t{}\t{:.6e}", row.estimator, row.n, row.stat, row.value);
    }
    for row in &report.bounds {
        println!("{}\t{}\t{}", if row.pass { "pass" } else { "FAIL" }, row.theorem, row.param_json);
    }
    for f in &report.manifest.failures {
        eprintln!("failed: {f}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<ExitCode, Error> {
    let suite = match a.suite {
        SuiteArg::Truncation => Suite::Truncation,
        SuiteArg::Bounds => Suite::Bounds,
        SuiteArg::Posterior => Suite::Posterior,
        SuiteArg::Synthetic => Suite::Synthetic,
        SuiteArg::All => Suite::All,
    };
    let checks = run_suite(suite, cli.seed)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    for c in &checks {
        println!(
            "{}\t{}\tlhs={:.6e}\trhs={:.6e}\tmargin={:.3e}\t{}",
            if c.pass { "pass" } else { "FAIL" },
            c.theorem,
            c.lhs,
            c.rhs,
            c.margin,
            c.params
        );
    }
    println!("{suite}: {} checks, {failed} failed", checks.len());
    if let Some(dir) = &cli.out {
        let rows: Vec<_> = checks.iter().map(pacreg::harness::BoundRow::from).collect();
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        let path = dir.join("verify.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        pacreg::harness::report::write_bounds(f, &rows)?;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_mean_demo(cli: &Cli, a: &MeanDemoArgs) -> Result<ExitCode, Error> {
    let noise = Noise::StudentT { nu: a.nu, scale: 1.0 };
    noise.validate()?;
    let v = match a.variance_bound {
        Some(v) => v,
        None => noise.variance(),
    };
    let run = || pacreg::harness::mean_deviation_study(&noise, 0.0, a.n, a.reps, a.eps, Some(v), cli.seed);
    let study = match threads(cli) {
        Some(k) => rayon_pool(k)?.install(run)?,
        None => run()?,
    };
    println!("n={} reps={} eps={} nu={} variance_bound={v}", a.n, a.reps, a.eps, a.nu);
    println!("quantile\trobust\tempirical");
    for q in [0.5, 0.9, 0.99, 0.999] {
        println!("{q}\t{:.5}\t{:.5}", quantile(&study.robust, q), quantile(&study.empirical, q));
    }
    Ok(ExitCode::SUCCESS)
}

fn rayon_pool(k: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| Error::Config(e.to_string()))
}

fn cmd_constants(a: &ConstantsArgs) -> Result<ExitCode, Error> {
    let v = (2.0 * a.sigma + a.h).powi(2);
    let lambda = match (a.lambda, a.lambda_rule) {
        (Some(l), _) => l,
        (None, _) => 0.32 / v,
    };
    let c = thm21_constants(a.sigma, a.h, lambda, a.eta_prime)?;
    println!("# truncated posterior, V = (2 sigma + H)^2 = {}", sig3(v));
    println!("lambda={}\teta={}\teta_prime={}", sig3(lambda), sig3(c.eta), sig3(a.eta_prime));
    println!("C1={}", sig3(c.c1));
    println!("C2={}", sig3(c.c2));
    println!("C1_linear={}", sig3(c.c1 / 2.0));
    let (c1g, c2g) = thm35_constants(v, a.g, lambda, a.eta_prime)?;
    println!("# general V, G = {}", sig3(a.g));
    println!("C1'={}\tC2'={}", sig3(c1g), sig3(c2g));
    if let Some(eta) = a.eta {
        let (g1, g2) = thm32_constants(lambda, eta, a.eta_prime, a.g)?;
        println!("# Gibbs posterior, eta = {}", sig3(eta));
        println!("C1'={}\tC2'={}", sig3(g1), sig3(g2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(&cli, a),
        Command::Experiment(a) => cmd_experiment(&cli, a),
        Command::Verify(a) => cmd_verify(&cli, a),
        Command::MeanDemo(a) => cmd_mean_demo(&cli, a),
        Command::Constants(a) => cmd_constants(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) | Error::Io { .. } | Error::DimensionMismatch { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
