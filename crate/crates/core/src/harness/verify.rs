//! The check battery behind `pacreg verify`. Every check is a
//! [`BoundCheck`] so failures carry their margin.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bounds::{
    check_condition_c, check_log_laplace_d1, check_log_laplace_d2, lemma34_eta, standard_fixtures, thm21_constants,
    thm35_bound, BoundCheck, McConfig, QuadConfig,
};
use crate::error::{Error, Result};
use crate::model::{FeatureMap, LeastSquares, ParamBox};
use crate::numeric::{mean, std_error};
use crate::posterior::{
    binned_total_variation, grid_posterior_oracle, histogram, mh_sample, GibbsTarget, PosteriorConfig, PriorSampleSet,
    TruncatedTarget,
};
use crate::synthetic::{DistributionSpec, Moments, Noise, PartitionBasis, RiskOracle};
use crate::truncation::{soft_trunc, soft_trunc_mirrored, Truncation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Truncation,
    Bounds,
    Posterior,
    Synthetic,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "truncation" => Self::Truncation,
            "bounds" => Self::Bounds,
            "posterior" => Self::Posterior,
            "synthetic" => Self::Synthetic,
            "all" => Self::All,
            _ => return Err(Error::Parse(format!("unknown suite {s:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Truncation => "truncation",
            Self::Bounds => "bounds",
            Self::Posterior => "posterior",
            Self::Synthetic => "synthetic",
            Self::All => "all",
        })
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Truncation {
        out.extend(truncation_checks(10_000));
    }
    if all || suite == Suite::Bounds {
        out.extend(constant_checks()?);
        out.extend(condition_c_checks(&QuadConfig::default())?);
        out.extend(laplace_checks(&McConfig { seed, ..McConfig::default() })?);
    }
    if all || suite == Suite::Posterior {
        out.extend(sampler_checks(10_000, 20, seed)?);
    }
    if all || suite == Suite::Synthetic {
        out.extend(synthetic_checks(100_000, seed)?);
    }
    Ok(out)
}

fn grid(points: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..points).map(move |k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
}

/// The quartic identity, the `1/2` floor of `exp(−T)` and `ψ(x) = −T(−x)`
/// on an even grid of `[−50, 50]`.
pub fn truncation_checks(points: usize) -> Vec<BoundCheck> {
    let mut identity = 0.0f64;
    let mut floor = f64::INFINITY;
    let mut mirror = 0.0f64;
    for x in grid(points, -50.0, 50.0) {
        let lhs = (1.0 - x + 0.5 * x * x) * (1.0 + x + 0.5 * x * x);
        let rhs = 1.0 + x.powi(4) / 4.0;
        identity = identity.max((lhs - rhs).abs() / rhs);
        floor = floor.min((-soft_trunc(x)).exp());
        let psi = soft_trunc_mirrored(x);
        let neg = -soft_trunc(-x);
        mirror = mirror.max((psi - neg).abs() / psi.abs().max(f64::MIN_POSITIVE));
    }
    let params = json!({ "points": points, "range": [-50.0, 50.0] });
    vec![
        BoundCheck::new("trunc-quartic-identity", params.clone(), identity, 1e-12, 0.0),
        BoundCheck::new("trunc-floor", params.clone(), 0.5, floor, 0.0),
        BoundCheck::new("trunc-mirror", params, mirror, 1e-12, 0.0),
    ]
}

/// `|C − published|` within half a unit of the third significant figure.
pub fn constant_checks() -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for (sigma, h) in [(1.0, 1.0), (0.5, 2.0)] {
        let v: f64 = (2.0 * sigma + h) * (2.0f64 * sigma + h);
        let c = thm21_constants(sigma, h, 0.32 / v, 0.18)?;
        let params = json!({ "sigma": sigma, "H": h, "eta": c.eta, "eta_prime": 0.18 });
        out.push(BoundCheck::new("thm21-c1", params.clone(), (c.c1 - 16.6).abs(), 0.05, 0.0));
        out.push(BoundCheck::new("thm21-c2", params.clone(), (c.c2 - 12.5).abs(), 0.05, 0.0));
        out.push(BoundCheck::new("thm21-c1-linear", params, (c.c1 / 2.0 - 8.3).abs(), 0.05, 0.0));
        for (d_const, eps, n) in [(1.0, 0.05, 100), (2.0, 0.01, 400), (0.5, 0.2, 50)] {
            let b = thm35_bound(v, d_const, 1.0, eps, n, 0.32 / v, 0.18)?;
            let published = v * (16.6 * d_const + 12.5 * (2.0 / eps).ln()) / n as f64;
            let tol = v * 0.05 * (d_const + (2.0 / eps).ln()) / n as f64;
            out.push(BoundCheck::new(
                "thm35-published",
                json!({ "V": v, "D": d_const, "G": 1.0, "eps": eps, "n": n, "bound": b }),
                (b - published).abs(),
                tol,
                0.0,
            ));
        }
    }
    let l34 = lemma34_eta(0.1, 1.0, 1.0, 1.0, 2.0, 2.0)?;
    out.push(BoundCheck::new(
        "lemma34-unusable",
        json!({ "lambda": 0.1, "A": 1.0, "M": 1.0, "H": 1.0, "b1": 2.0, "b2": 2.0, "eta": l34.eta }),
        1.0,
        l34.eta,
        0.0,
    ));
    Ok(out)
}

/// A least-squares excess-risk fixture for condition C with its
/// complexity constant `D` (`G = 1`).
#[derive(Clone, Debug)]
pub struct ConditionFixture {
    pub name: &'static str,
    pub oracle: RiskOracle,
    pub bx: ParamBox,
    pub d_const: f64,
}

fn quadratic_fixture(name: &'static str, q: DMatrix<f64>, target: &[f64], interior: bool) -> Result<ConditionFixture> {
    let d = q.nrows();
    let b = &q * DVector::from_column_slice(target);
    let bx = ParamBox::cube(d, -1.0, 1.0)?;
    let oracle = RiskOracle::constrained(Moments { q, b, c0: 4.0 }, &bx, 1e-13)?;
    let d_const = if interior { d as f64 / 2.0 } else { d as f64 };
    Ok(ConditionFixture { name, oracle, bx, d_const })
}

/// Interior-optimum fixtures use `D = d/2`, boundary-optimum ones `D = d`.
pub fn condition_c_fixtures() -> Result<Vec<ConditionFixture>> {
    let q2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    Ok(vec![
        quadratic_fixture("d1-interior", DMatrix::from_element(1, 1, 1.0), &[0.0], true)?,
        quadratic_fixture("d1-offcenter", DMatrix::from_element(1, 1, 2.0), &[0.6], true)?,
        quadratic_fixture("d1-boundary", DMatrix::from_element(1, 1, 1.0), &[1.8], false)?,
        quadratic_fixture("d2-interior", q2.clone(), &[0.2, -0.1], true)?,
        quadratic_fixture("d2-boundary", q2.clone(), &[1.5, 0.2], false)?,
        quadratic_fixture("d2-corner", q2, &[2.0, -2.5], false)?,
    ])
}

pub const CONDITION_ALPHAS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
pub const CONDITION_RATIOS: [f64; 5] = [1.25, 2.0, 4.0, 8.0, 16.0];

/// The 5×5 `(α, β)` grid on every fixture.
pub fn condition_c_checks(quad: &QuadConfig) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for fx in condition_c_fixtures()? {
        for alpha in CONDITION_ALPHAS {
            for ratio in CONDITION_RATIOS {
                let mut c = check_condition_c(&fx.oracle, &fx.bx, alpha, alpha * ratio, fx.d_const, 1.0, quad)?;
                if let Some(map) = c.params.as_object_mut() {
                    map.insert("fixture".into(), json!(fx.name));
                }
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Both log-Laplace lemmas on the shipped fixtures; the first check is
/// the closed-form `log cosh 1 ≤ g(1)`.
pub fn laplace_checks(mc: &McConfig) -> Result<Vec<BoundCheck>> {
    let closed = 1f64.cosh().ln();
    let mut out = vec![BoundCheck::new(
        "lemma-d1-closed-form",
        json!({ "fixture": "rademacher", "a": 1.0, "b": 1.0 }),
        closed,
        crate::bounds::g_fn(1.0),
        0.0,
    )];
    for fx in standard_fixtures() {
        let b = fx.upper_bound();
        if b.is_finite() {
            out.push(check_log_laplace_d1(&fx, b.max(0.0), mc)?);
        }
        if fx.abs_exp_moment().is_finite() {
            out.extend(check_log_laplace_d2(&fx, &[0.0, 0.25, 0.5], mc)?);
        }
    }
    Ok(out)
}

/// A one-dimensional heavy-tailed regression problem for sampler checks.
pub fn sampler_fixture(seed: u64) -> Result<(crate::model::Dataset, FeatureMap, ParamBox)> {
    let law = DistributionSpec::PartitionDesign {
        probs: vec![1.0],
        theta0: 0.3,
        noise: Noise::StudentT { nu: 3.0, scale: 1.0 },
        basis: PartitionBasis::Indicators,
    };
    let data = law.sample(30, seed)?;
    Ok((data, law.feature_map()?, ParamBox::cube(1, -2.0, 2.0)?))
}

pub const SAMPLER_BINS: usize = 32;
pub const SAMPLER_TV_TOL: f64 = 0.05;
/// Large enough that both posteriors concentrate well inside the box.
pub const SAMPLER_LAMBDA: f64 = 0.1;

type LogDensity<'a> = &'a dyn Fn(&[f64]) -> f64;

/// MH histogram against the grid oracle for the truncated and Gibbs
/// targets, `draws` kept states at thinning `thin`.
pub fn sampler_checks(draws: usize, thin: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let (data, fmap, bx) = sampler_fixture(seed)?;
    let lambda = SAMPLER_LAMBDA;
    let prior = PriorSampleSet::draw(&bx, 64, crate::harness::seed::mix(seed, 1))?;
    let trunc = TruncatedTarget::new(&data, &fmap, &prior, lambda, Truncation::Standard)?;
    let gibbs = GibbsTarget::new(&data, &fmap, lambda, &LeastSquares)?;
    let mut cfg = PosteriorConfig::new(lambda, 2_000 + draws * thin, 2_000, seed);
    cfg.thin = thin;
    let mut out = Vec::new();
    let targets: [(&str, LogDensity); 2] =
        [("truncated", &|t| trunc.log_density(t)), ("gibbs", &|t| gibbs.log_density(t))];
    for (name, f) in targets {
        let chain = mh_sample(f, &bx, &cfg)?;
        let oracle = grid_posterior_oracle(f, &bx, SAMPLER_BINS * 32)?;
        let want = oracle.coarsen(0, SAMPLER_BINS)?;
        let got = histogram(&chain.coordinate(0), bx.lo()[0], bx.hi()[0], SAMPLER_BINS);
        let tv = binned_total_variation(&got, &want);
        out.push(BoundCheck::new(
            "sampler-tv",
            json!({ "target": name, "draws": chain.draws.len(), "thin": thin, "bins": SAMPLER_BINS,
                    "accept": chain.acceptance_rate, "lambda": lambda }),
            tv,
            SAMPLER_TV_TOL,
            0.0,
        ));
    }
    Ok(out)
}

/// `P(X_1) = 1 − β` and `E[(Y − E[Y|X])²] = 1 − β` on the hypercube pair,
/// and exact risk against Monte Carlo risk on each law family.
pub fn synthetic_checks(samples: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for n in [16usize, 64, 256] {
        let (minus, plus) = DistributionSpec::hypercube_pair(n)?;
        for (k, law) in [minus, plus].into_iter().enumerate() {
            let DistributionSpec::Hypercube { beta, sign } = law else { unreachable!() };
            let data = law.sample(samples, crate::harness::seed::derive(seed, "hypercube", n, k))?;
            let on_x1: Vec<f64> =
                data.inputs().iter().map(|x| f64::from(u8::from(*x == crate::model::Input::Label(0)))).collect();
            let resid: Vec<f64> = data
                .inputs()
                .iter()
                .zip(data.outputs())
                .map(|(x, y)| Ok((y - law.regression_function(x)?).powi(2)))
                .collect::<Result<_>>()?;
            let p = json!({ "n": n, "beta": beta, "sign": sign, "samples": samples });
            let se1 = std_error(&on_x1);
            out.push(BoundCheck::new("hypercube-p-x1", p.clone(), (mean(&on_x1) - (1.0 - beta)).abs(), 3.0 * se1, 0.0));
            let se2 = std_error(&resid);
            out.push(BoundCheck::new(
                "hypercube-noise-variance",
                p,
                (mean(&resid) - (1.0 - beta)).abs(),
                3.0 * se2,
                0.0,
            ));
        }
    }
    let laws = [
        DistributionSpec::GaussianDesign {
            cov: vec![vec![1.0, 0.4], vec![0.4, 0.8]],
            theta0: vec![0.5, -0.3],
            misspec: 0.3,
            noise: Noise::StudentT { nu: 5.0, scale: 0.7 },
        },
        DistributionSpec::PartitionDesign {
            probs: vec![0.1, 0.2, 0.3, 0.4],
            theta0: 0.7,
            noise: Noise::Gaussian { sd: 1.0 },
            basis: PartitionBasis::Scaled,
        },
        DistributionSpec::Hypercube { beta: 0.25, sign: -1 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7269_736b);
    for law in laws {
        let d = law.dim();
        let theta: Vec<f64> = (0..d).map(|j| 0.2 * j as f64 - 0.1).collect();
        let data = law.sample_with(samples, &mut rng)?;
        let fmap = law.feature_map()?;
        let losses: Vec<f64> = data
            .inputs()
            .iter()
            .zip(data.outputs())
            .map(|(x, y)| Ok((y - crate::numeric::dot(&theta, &fmap.eval(x)?)).powi(2)))
            .collect::<Result<_>>()?;
        let exact = law.exact_risk(&theta)?;
        let se = std_error(&losses);
        out.push(BoundCheck::new(
            "oracle-risk",
            json!({ "law": law.variant_name(), "theta": theta, "exact": exact, "samples": samples }),
            (mean(&losses) - exact).abs(),
            3.0 * se,
            0.0,
        ));
    }
    Ok(out)
}
