//! Replicated estimator runs against synthetic laws, with exact excess
//! risk from the moment oracles, aggregate statistics and bound audits.

pub mod config;
pub mod dataset;
pub mod estimator;
pub mod report;
pub mod seed;
pub mod verify;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::bounds::{thm21_constants, BoundCheck};
use crate::error::{Error, Result};
use crate::model::{linf_diameter_bound, Dataset, FeatureMap, ParamBox};
use crate::numeric::{mean, quantile_sorted, std_error};
use crate::posterior::default_lambda;
use crate::synthetic::{DistributionSpec, Noise, PartitionBasis, RiskOracle};
use crate::truncation::{empirical_mean, robust_mean, robust_mean_scaled};

pub use config::ExperimentConfig;
pub use dataset::{parse_dataset_csv, write_dataset_csv};
pub use estimator::{fit_estimator, EstimatorId, FitOutcome, Fitted, PosteriorSettings, Reference};
pub use report::{emit_report, load_report, AggregateRow, BoundRow, Manifest, ReplicationRecord, Report};

const ORACLE_TOL: f64 = 1e-12;

/// Everything about one law that replications share.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub law: DistributionSpec,
    pub bx: ParamBox,
    pub fmap: FeatureMap,
    pub box_oracle: RiskOracle,
    pub linear_oracle: RiskOracle,
    /// `σ` with `σ² = sup_x E[(Y − f*)² | X = x]`.
    pub sigma: f64,
    /// Sup-norm diameter of the box class.
    pub h: f64,
    pub default_lambda: Option<f64>,
}

impl Prepared {
    pub fn new(law: DistributionSpec, bx: ParamBox, settings: &PosteriorSettings) -> Result<Self> {
        law.validate()?;
        let fmap = law.feature_map()?;
        let box_oracle = law.risk_oracle(&bx, ORACLE_TOL)?;
        let linear_oracle = RiskOracle::unconstrained(law.moments()?)?;
        let sigma = match settings.sigma {
            Some(s) => s,
            None => law.sigma_sup_conditional(&box_oracle.theta_star)?.sqrt(),
        };
        let h = match settings.h {
            Some(h) => h,
            None => linf_diameter_bound(&bx, &fmap)?,
        };
        let default_lambda = default_lambda(sigma, h).ok().filter(|l| *l > 0.0 && l.is_finite());
        Ok(Self { law, bx, fmap, box_oracle, linear_oracle, sigma, h, default_lambda })
    }

    pub fn reference_risk(&self, r: Reference) -> f64 {
        match r {
            Reference::Linear => self.linear_oracle.r_star,
            Reference::Box => self.box_oracle.r_star,
        }
    }

    /// Temperature for a posterior estimator: explicit, else the default.
    pub fn lambda_for(&self, id: &EstimatorId) -> Option<f64> {
        if id.is_posterior() {
            id.lambda().or(self.default_lambda)
        } else {
            None
        }
    }

    /// `sup_x |E[Y | X = x]|` on laws with finitely many inputs.
    pub fn regression_sup(&self) -> Option<f64> {
        match &self.law {
            DistributionSpec::PartitionDesign { theta0, .. } => Some(theta0.abs()),
            DistributionSpec::Hypercube { .. } => Some(1.0),
            DistributionSpec::GaussianDesign { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationResult {
    pub excess_risk: f64,
    pub risk: f64,
    pub accept_rate: Option<f64>,
    pub theta: Vec<f64>,
    pub wall_ms: f64,
}

/// One replication: samples a dataset from `data_seed`, fits with
/// `fit_seed`, returns the exact excess risk.
pub fn run_replication(
    prepared: &Prepared,
    id: &EstimatorId,
    settings: &PosteriorSettings,
    n: usize,
    data_seed: u64,
    fit_seed: u64,
) -> Result<ReplicationResult> {
    let start = Instant::now();
    let data = prepared.law.sample(n, data_seed)?;
    let out = fit_on(prepared, id, settings, &data, fit_seed)?;
    let risk = out.fitted.risk(&prepared.law)?;
    Ok(ReplicationResult {
        excess_risk: risk - prepared.reference_risk(id.reference()),
        risk,
        accept_rate: out.accept_rate,
        theta: out.fitted.theta().to_vec(),
        wall_ms: (start.elapsed().as_secs_f64() * 1e6).round() / 1e3,
    })
}

pub fn fit_on(
    prepared: &Prepared,
    id: &EstimatorId,
    settings: &PosteriorSettings,
    data: &Dataset,
    seed: u64,
) -> Result<FitOutcome> {
    fit_estimator(id, data, &prepared.fmap, &prepared.bx, settings, prepared.lambda_for(id), seed)
}

/// A law a grid cell runs against, with its dataset stream name.
#[derive(Clone, Debug)]
struct Arm {
    suffix: &'static str,
    stream: &'static str,
    prepared: Prepared,
}

/// A configured experiment with its laws prepared per sample size.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    arms: Vec<(usize, Vec<Arm>)>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let settings = &config.estimators.posterior;
        let bx = config.spec.bounds.clone();
        let mut arms = Vec::new();
        for &n in &config.grid.n {
            let list = if config.grid.hypercube_pair {
                let (minus, plus) = DistributionSpec::hypercube_pair(n)?;
                vec![
                    Arm {
                        suffix: "@minus",
                        stream: "data:minus",
                        prepared: Prepared::new(minus, bx.clone(), settings)?,
                    },
                    Arm { suffix: "@plus", stream: "data:plus", prepared: Prepared::new(plus, bx.clone(), settings)? },
                ]
            } else {
                vec![Arm {
                    suffix: "",
                    stream: "data",
                    prepared: Prepared::new(config.spec.law.clone(), bx.clone(), settings)?,
                }]
            };
            arms.push((n, list));
        }
        Ok(Self { config, arms })
    }

    /// The prepared law(s) at sample size `n`, with their label suffixes.
    pub fn prepared(&self, n: usize) -> Vec<(&'static str, &Prepared)> {
        self.arms
            .iter()
            .filter(|(m, _)| *m == n)
            .flat_map(|(_, arms)| arms.iter().map(|a| (a.suffix, &a.prepared)))
            .collect()
    }

    /// Runs every (estimator, law, n, rep) cell on `threads` workers
    /// (all available when `None`) and aggregates.
    pub fn run(&self, threads: Option<usize>) -> Result<Report> {
        struct Task<'a> {
            id: &'a EstimatorId,
            label: String,
            n: usize,
            rep: usize,
            arm: &'a Arm,
        }
        let cfg = &self.config;
        let master = cfg.grid.seed;
        let mut tasks = Vec::new();
        for id in &cfg.estimators.list {
            for (n, arms) in &self.arms {
                for arm in arms {
                    for rep in 0..cfg.grid.reps {
                        tasks.push(Task { id, label: format!("{id}{}", arm.suffix), n: *n, rep, arm });
                    }
                }
            }
        }
        let settings = &cfg.estimators.posterior;
        let work = || -> Vec<(ReplicationRecord, Option<String>)> {
            tasks
                .par_iter()
                .map(|t| {
                    let data_seed = seed::derive(master, t.arm.stream, t.n, t.rep);
                    let fit_seed = seed::derive(master, &t.label, t.n, t.rep);
                    match run_replication(&t.arm.prepared, t.id, settings, t.n, data_seed, fit_seed) {
                        Ok(r) => (
                            ReplicationRecord {
                                estimator: t.label.clone(),
                                n: t.n,
                                rep: t.rep,
                                excess_risk: r.excess_risk,
                                accept_rate: r.accept_rate,
                                wall_ms: r.wall_ms,
                            },
                            None,
                        ),
                        Err(e) => (
                            ReplicationRecord {
                                estimator: t.label.clone(),
                                n: t.n,
                                rep: t.rep,
                                excess_risk: f64::NAN,
                                accept_rate: None,
                                wall_ms: 0.0,
                            },
                            Some(format!(
                                "{} n={} rep={} law={} data_seed={data_seed} fit_seed={fit_seed}: {e}",
                                t.label,
                                t.n,
                                t.rep,
                                t.arm.prepared.law.variant_name()
                            )),
                        ),
                    }
                })
                .collect()
        };
        let results = match threads {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::config(e.to_string()))?
                .install(work),
            None => work(),
        };
        let (replications, failures): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let mut report = Report {
            replications,
            aggregates: Vec::new(),
            bounds: Vec::new(),
            manifest: Manifest {
                master_seed: master,
                seeding: report::SEEDING_SCHEME.into(),
                config: cfg.to_toml_string()?,
                failures: failures.into_iter().flatten().collect(),
            },
        };
        self.aggregate(&mut report);
        Ok(report)
    }

    fn aggregate(&self, report: &mut Report) {
        let cfg = &self.config;
        let mut aggregates = Vec::new();
        let mut bounds = Vec::new();
        for id in &cfg.estimators.list {
            for (n, arms) in &self.arms {
                let n = *n;
                let mut arm_means = Vec::new();
                for arm in arms {
                    let label = format!("{id}{}", arm.suffix);
                    let rows: Vec<&ReplicationRecord> =
                        report.replications.iter().filter(|r| r.estimator == label && r.n == n).collect();
                    let mut push = |stat: String, value: f64| {
                        aggregates.push(AggregateRow { estimator: label.clone(), n, stat, value })
                    };
                    let mut xs: Vec<f64> = rows.iter().filter(|r| !r.failed()).map(|r| r.excess_risk).collect();
                    xs.sort_by(f64::total_cmp);
                    push("reps".into(), xs.len() as f64);
                    push("failures".into(), (rows.len() - xs.len()) as f64);
                    if xs.is_empty() {
                        continue;
                    }
                    let m = mean(&xs);
                    arm_means.push(m);
                    push("mean".into(), m);
                    push("se".into(), if xs.len() > 1 { std_error(&xs) } else { 0.0 });
                    push("median".into(), quantile_sorted(&xs, 0.5));
                    for q in [0.9, 0.95, 0.99] {
                        push(format!("q{q}"), quantile_sorted(&xs, q));
                    }
                    let rates: Vec<f64> = rows.iter().filter_map(|r| r.accept_rate).collect();
                    if !rates.is_empty() {
                        push("accept_rate".into(), mean(&rates));
                    }
                    let p = &arm.prepared;
                    let d = p.law.dim();
                    if matches!(id, EstimatorId::TruncPacBayes { .. } | EstimatorId::TruncPacBayesMean { .. }) {
                        let lambda = p.lambda_for(id);
                        let consts = lambda
                            .and_then(|l| thm21_constants(p.sigma, p.h, l, cfg.estimators.posterior.eta_prime).ok());
                        if let Some(c) = consts {
                            for &eps in &cfg.grid.eps {
                                let Ok(b) = c.bound(d, eps, n) else { continue };
                                let freq = xs.iter().filter(|x| **x > b).count() as f64 / xs.len() as f64;
                                push(format!("bound[eps={eps}]"), b);
                                push(format!("violation[eps={eps}]"), freq);
                                let allowed = eps + 3.0 * (eps * (1.0 - eps) / xs.len() as f64).sqrt();
                                bounds.push(BoundRow::from(&BoundCheck::new(
                                    "thm21-violation",
                                    json!({
                                        "estimator": label, "n": n, "eps": eps, "bound": b, "d": d,
                                        "sigma": p.sigma, "H": p.h, "lambda": c.lambda, "reps": xs.len(),
                                    }),
                                    freq,
                                    allowed,
                                    0.0,
                                )));
                            }
                        }
                    }
                    if *id == EstimatorId::Projection {
                        if let (DistributionSpec::PartitionDesign { basis: PartitionBasis::Scaled, .. }, Some(hr)) =
                            (&p.law, p.regression_sup())
                        {
                            let b = (p.law.noise_variance() + hr * hr) * d as f64 / n as f64;
                            let se = if xs.len() > 1 { std_error(&xs) } else { 0.0 };
                            push("mean_bound".into(), b);
                            bounds.push(BoundRow::from(&BoundCheck::new(
                                "projection-mean",
                                json!({ "estimator": label, "n": n, "d": d, "H": hr, "se": se }),
                                m,
                                b,
                                3.0 * se,
                            )));
                        }
                    }
                }
                if cfg.grid.hypercube_pair && !arm_means.is_empty() {
                    let label = id.to_string();
                    aggregates.push(AggregateRow {
                        estimator: label.clone(),
                        n,
                        stat: "worst_mean".into(),
                        value: arm_means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    });
                    aggregates.push(AggregateRow {
                        estimator: label,
                        n,
                        stat: "benchmark".into(),
                        value: 1.0 / (4.0 * (n as f64).sqrt()),
                    });
                }
            }
        }
        report.aggregates = aggregates;
        report.bounds = bounds;
    }
}

pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Report> {
    Experiment::new(config.clone())?.run(threads)
}

/// Absolute deviations of the robust and empirical means over
/// replications.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanStudy {
    pub robust: Vec<f64>,
    pub empirical: Vec<f64>,
}

/// Samples `reps` datasets of `n` values `center + noise` and records
/// `|θ̂ − center|` for both means. Without `second_moment_bound` the robust
/// mean assumes `E Y² ≤ 1`.
pub fn mean_deviation_study(
    noise: &Noise,
    center: f64,
    n: usize,
    reps: usize,
    epsilon: f64,
    second_moment_bound: Option<f64>,
    master: u64,
) -> Result<MeanStudy> {
    noise.validate()?;
    let rows: Vec<Result<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(master, "mean-study", n, rep));
            let ys: Vec<f64> = (0..n).map(|_| center + noise.sample(&mut rng)).collect();
            let r = match second_moment_bound {
                Some(v) => robust_mean_scaled(&ys, epsilon, v)?,
                None => robust_mean(&ys, epsilon)?,
            };
            Ok(((r - center).abs(), (empirical_mean(&ys)? - center).abs()))
        })
        .collect();
    let (robust, empirical) = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(MeanStudy { robust, empirical })
}
