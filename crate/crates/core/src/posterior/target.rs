use crate::error::{check_dim, Result};
use crate::model::{Dataset, FeatureMap, Loss};
use crate::numeric::{dot, log_mean_exp};
use crate::posterior::PriorSampleSet;
use crate::truncation::Truncation;
use crate::Error;

/// Factors multiplied before taking one logarithm. Every factor is at least
/// 1/2, so a block cannot underflow; blocks that overflow fall back to
/// per-factor logarithms.
const BLOCK: usize = 8;
const PRODUCT_CEILING: f64 = 1e300;

/// `Ê_m(θ) = log (1/m) Σ_j exp S_j(θ)` with `S_j(θ) = Σ_i T(W_i(θ, θ'_j))`,
/// for a fixed dataset and prior sample set.
///
/// The squared residuals of the prior draws are tabulated once, so a query
/// costs `O(nd + nm)`.
#[derive(Clone, Debug)]
pub struct TruncatedTarget {
    d: usize,
    lambda: f64,
    truncation: Truncation,
    phi: Vec<f64>,
    y: Vec<f64>,
    // row j holds (Y_i − f_{θ'_j}(X_i))² for i = 1..n
    prior_sq: Vec<f64>,
    m: usize,
}

impl TruncatedTarget {
    pub fn new(
        data: &Dataset,
        fmap: &FeatureMap,
        prior: &PriorSampleSet,
        lambda: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        let d = fmap.dim();
        check_dim(d, prior.dim())?;
        let n = data.len();
        let mut phi = vec![0.0; n * d];
        for (row, x) in phi.chunks_mut(d).zip(data.inputs()) {
            fmap.eval_into(x, row)?;
        }
        let y = data.outputs().to_vec();
        let mut prior_sq = Vec::with_capacity(prior.len() * n);
        for theta in prior.thetas() {
            for (row, yi) in phi.chunks(d).zip(&y) {
                let r = yi - dot(row, theta);
                prior_sq.push(r * r);
            }
        }
        Ok(Self { d, lambda, truncation, phi, y, prior_sq, m: prior.len() })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    fn residuals_sq(&self, theta: &[f64]) -> Vec<f64> {
        self.phi
            .chunks(self.d.max(1))
            .zip(&self.y)
            .map(|(row, yi)| {
                let r = yi - dot(row, theta);
                r * r
            })
            .collect()
    }

    /// The per-draw sums `S_j(θ)`, in prior order.
    pub fn s_values(&self, theta: &[f64]) -> Vec<f64> {
        let a = self.residuals_sq(theta);
        let n = a.len();
        if n == 0 {
            return vec![0.0; self.m];
        }
        let sign = self.truncation.log_sign();
        self.prior_sq
            .chunks(n)
            .map(|b| {
                sign * match self.truncation {
                    Truncation::Standard => log_product::<false>(self.lambda, &a, b),
                    Truncation::Mirrored => log_product::<true>(self.lambda, &a, b),
                }
            })
            .collect()
    }

    /// `W_i(θ, θ'_j)` for every draw `j` (outer) and point `i` (inner).
    pub fn loss_diffs(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let a = self.residuals_sq(theta);
        if a.is_empty() {
            return vec![Vec::new(); self.m];
        }
        self.prior_sq.chunks(a.len()).map(|b| a.iter().zip(b).map(|(x, y)| self.lambda * (x - y)).collect()).collect()
    }

    /// Assumes `theta.len() == dim()`.
    pub fn xi_hat(&self, theta: &[f64]) -> f64 {
        log_mean_exp(&self.s_values(theta))
    }

    pub fn xi_hat_checked(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.d, theta.len())?;
        Ok(self.xi_hat(theta))
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        -self.xi_hat(theta)
    }
}

/// `Σ_i log q(λ(a_i − b_i))` with `q(x) = 1 ∓ x + x²/2`.
#[inline]
fn log_product<const MIRROR: bool>(lambda: f64, a: &[f64], b: &[f64]) -> f64 {
    let q = |x: f64| {
        let lin = if MIRROR { x } else { -x };
        1.0 + lin + 0.5 * x * x
    };
    let mut total = 0.0;
    for (ca, cb) in a.chunks(BLOCK).zip(b.chunks(BLOCK)) {
        let mut p = 1.0;
        for (x, y) in ca.iter().zip(cb) {
            p *= q(lambda * (x - y));
        }
        if p < PRODUCT_CEILING {
            total += p.ln();
        } else {
            let tr = if MIRROR { Truncation::Mirrored } else { Truncation::Standard };
            total += ca.iter().zip(cb).map(|(x, y)| tr.log_sign() * tr.apply(lambda * (x - y))).sum::<f64>();
        }
    }
    total
}

/// `−λ Σ_i ℓ̃(Y_i, f_θ(X_i))`.
pub struct GibbsTarget<'a> {
    d: usize,
    lambda: f64,
    phi: Vec<f64>,
    y: Vec<f64>,
    loss: &'a dyn Loss,
}

impl<'a> GibbsTarget<'a> {
    pub fn new(data: &Dataset, fmap: &FeatureMap, lambda: f64, loss: &'a dyn Loss) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        let d = fmap.dim();
        let mut phi = vec![0.0; data.len() * d];
        for (row, x) in phi.chunks_mut(d).zip(data.inputs()) {
            fmap.eval_into(x, row)?;
        }
        Ok(Self { d, lambda, phi, y: data.outputs().to_vec(), loss })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let total: f64 =
            self.phi.chunks(self.d).zip(&self.y).map(|(row, &yi)| self.loss.value(yi, dot(row, theta))).sum();
        -self.lambda * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical_risk;
    use crate::model::{Input, LeastSquares, LinearModel, ParamBox};
    use crate::posterior::{log_posterior_gibbs, log_posterior_trunc, xi_hat};
    use crate::truncation::soft_trunc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_data() -> (Dataset, FeatureMap) {
        let xs = [-1.0, -0.5, 0.0, 0.7, 1.3];
        let ys = [-1.4, -0.2, 0.3, 0.9, 2.5];
        let data = Dataset::new(xs.iter().map(|x| Input::Point(vec![*x])).collect(), ys.to_vec()).unwrap();
        (data, FeatureMap::raw_coordinates(vec![1.5]).unwrap())
    }

    /// Direct `log((1/m) Σ_j Π_i (1 − W + W²/2)^{-1})` with no log-space steps.
    fn direct_xi(lambda: f64, theta: f64, primes: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
        let mut acc = 0.0;
        for tp in primes {
            let mut prod = 1.0;
            for (x, y) in xs.iter().zip(ys) {
                let w = lambda * ((y - theta * x).powi(2) - (y - tp * x).powi(2));
                prod /= 1.0 - w + w * w / 2.0;
            }
            acc += prod;
        }
        (acc / primes.len() as f64).ln()
    }

    #[test]
    fn matches_direct_formula() {
        let (data, fmap) = line_data();
        let xs = [-1.0, -0.5, 0.0, 0.7, 1.3];
        let ys = [-1.4, -0.2, 0.3, 0.9, 2.5];
        let prior = PriorSampleSet::from_thetas(vec![vec![0.2], vec![1.7]]).unwrap();
        for theta in [-1.0, 0.0, 0.9, 1.4, 3.0] {
            for lambda in [0.05, 0.3, 1.0] {
                let got =
                    xi_hat(&LinearModel::new(vec![theta]), &data, lambda, &prior, &fmap, Truncation::Standard).unwrap();
                let want = direct_xi(lambda, theta, &[0.2, 1.7], &xs, &ys);
                assert!((got - want).abs() < 1e-10, "theta {theta} lambda {lambda}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn self_comparison_and_empty_data() {
        let (data, fmap) = line_data();
        let prior = PriorSampleSet::from_thetas(vec![vec![0.4]]).unwrap();
        let v = xi_hat(&LinearModel::new(vec![0.4]), &data, 0.5, &prior, &fmap, Truncation::Standard).unwrap();
        assert_eq!(v, 0.0);
        let empty = Dataset::new(vec![], vec![]).unwrap();
        let prior = PriorSampleSet::from_thetas(vec![vec![0.4], vec![-3.0]]).unwrap();
        let v = xi_hat(&LinearModel::new(vec![1.0]), &empty, 0.5, &prior, &fmap, Truncation::Standard).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (data, fmap) = line_data();
        let prior = PriorSampleSet::from_thetas(vec![vec![0.4]]).unwrap();
        assert!(xi_hat(&LinearModel::zeros(2), &data, 0.5, &prior, &fmap, Truncation::Standard).is_err());
        let prior2 = PriorSampleSet::from_thetas(vec![vec![0.4, 1.0]]).unwrap();
        assert!(TruncatedTarget::new(&data, &fmap, &prior2, 0.5, Truncation::Standard).is_err());
        assert!(TruncatedTarget::new(&data, &fmap, &prior, 0.0, Truncation::Standard).is_err());
    }

    #[test]
    fn blocked_product_survives_huge_loss_gaps() {
        // huge residuals make every block overflow the ceiling
        let n = 40;
        let inputs = vec![Input::Label(0); n];
        let outputs = vec![1e40; n];
        let data = Dataset::new(inputs, outputs).unwrap();
        let fmap = FeatureMap::partition_indicators(1).unwrap();
        let prior = PriorSampleSet::from_thetas(vec![vec![0.0], vec![1e40]]).unwrap();
        let target = TruncatedTarget::new(&data, &fmap, &prior, 1.0, Truncation::Standard).unwrap();
        let s = target.s_values(&[0.5e40]);
        let w = target.loss_diffs(&[0.5e40]);
        for (sj, wj) in s.iter().zip(&w) {
            let want: f64 = wj.iter().map(|x| soft_trunc(*x)).sum();
            assert!(sj.is_finite());
            assert!((sj - want).abs() <= 1e-12 * want.abs());
        }
    }

    #[test]
    fn shift_of_all_s_values_shifts_xi() {
        let s = [0.3, -1.2, 2.0, 0.0];
        let c = 7.5;
        let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
        assert!((log_mean_exp(&shifted) - log_mean_exp(&s) - c).abs() < 1e-12);
    }

    #[test]
    fn gibbs_is_minus_lambda_n_risk() {
        let (data, fmap) = line_data();
        for theta in [-0.5, 0.8, 2.0] {
            let model = LinearModel::new(vec![theta]);
            let lp = log_posterior_gibbs(&model, &data, 0.3, &LeastSquares, &fmap).unwrap();
            let risk = empirical_risk(&model, &fmap, &data, &LeastSquares).unwrap();
            assert!((lp + 0.3 * 5.0 * risk).abs() < 1e-12);
        }
        assert!(log_posterior_gibbs(&LinearModel::zeros(1), &data, -1.0, &LeastSquares, &fmap).is_err());
    }

    fn random_fixture(seed: u64, n: usize, m: usize) -> (Dataset, FeatureMap, PriorSampleSet, ParamBox) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bx = ParamBox::cube(2, -1.0, 1.0).unwrap();
        let inputs = (0..n).map(|_| Input::Point(vec![rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>()])).collect();
        let outputs = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let data = Dataset::new(inputs, outputs).unwrap();
        let fmap = FeatureMap::raw_coordinates(vec![1.0, 1.0]).unwrap();
        let prior = PriorSampleSet::draw(&bx, m, seed ^ 0xabc).unwrap();
        (data, fmap, prior, bx)
    }

    #[test]
    fn permutation_invariance() {
        let (data, fmap, prior, _) = random_fixture(11, 37, 50);
        let theta = LinearModel::new(vec![0.3, -0.6]);
        let base = xi_hat(&theta, &data, 0.2, &prior, &fmap, Truncation::Standard).unwrap();
        let mut inputs = data.inputs().to_vec();
        let mut outputs = data.outputs().to_vec();
        inputs.reverse();
        outputs.reverse();
        inputs.rotate_left(5);
        outputs.rotate_left(5);
        let permuted = Dataset::new(inputs, outputs).unwrap();
        let mut thetas = prior.thetas().to_vec();
        thetas.reverse();
        let prior_rev = PriorSampleSet::from_thetas(thetas).unwrap();
        let other = xi_hat(&theta, &permuted, 0.2, &prior_rev, &fmap, Truncation::Standard).unwrap();
        assert!((base - other).abs() < 1e-12);
    }

    #[test]
    fn mirrored_variant_stays_within_quartic_gap() {
        let (data, fmap, prior, bx) = random_fixture(5, 30, 40);
        let t = TruncatedTarget::new(&data, &fmap, &prior, 0.4, Truncation::Standard).unwrap();
        let p = TruncatedTarget::new(&data, &fmap, &prior, 0.4, Truncation::Mirrored).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let theta = bx.sample_uniform(&mut rng);
            let gap = t
                .loss_diffs(&theta)
                .iter()
                .map(|w| w.iter().map(|x| (x.powi(4) / 4.0).ln_1p()).sum::<f64>())
                .fold(0.0, f64::max);
            let diff = (p.log_density(&theta) - t.log_density(&theta)).abs();
            assert!(diff <= gap + 1e-12, "{diff} > {gap}");
        }
        for k in 0..10_000 {
            let x = -50.0 + 100.0 * k as f64 / 9_999.0;
            assert!(-crate::soft_trunc_mirrored(-x) >= soft_trunc(x) - (x.powi(4) / 4.0).ln_1p() - 1e-12);
        }
    }

    #[test]
    fn gibbs_and_truncated_agree_for_small_loss_gaps() {
        // bounded noise and small λ: λ n max|W| stays below 0.1
        let (data, fmap, prior, bx) = random_fixture(8, 20, 30);
        let lambda = 1e-4;
        let t = TruncatedTarget::new(&data, &fmap, &prior, lambda, Truncation::Standard).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let theta = bx.sample_uniform(&mut rng);
            let w = t.loss_diffs(&theta);
            let max_w = w.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
            assert!(lambda * 20.0 * max_w <= 0.1);
            // with T replaced by the identity, Ê becomes logmeanexp_j Σ_i W_ij
            let identity: Vec<f64> = w.iter().map(|wj| wj.iter().sum()).collect();
            let bound =
                w.iter().map(|wj| wj.iter().map(|x| x * x / 2.0 + x.abs().powi(3)).sum::<f64>()).fold(0.0, f64::max);
            let diff = (t.xi_hat(&theta) - log_mean_exp(&identity)).abs();
            assert!(diff <= bound + 1e-15, "{diff} > {bound}");
        }
    }

    #[test]
    fn nested_prior_sets_are_consistent() {
        let (data, fmap, _, bx) = random_fixture(21, 50, 1);
        let m = 256;
        let big = PriorSampleSet::draw(&bx, 2 * m, 77).unwrap();
        let small = big.prefix(m).unwrap();
        let tb = TruncatedTarget::new(&data, &fmap, &big, 0.05, Truncation::Standard).unwrap();
        let ts = TruncatedTarget::new(&data, &fmap, &small, 0.05, Truncation::Standard).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let theta = bx.sample_uniform(&mut rng);
            let s = ts.s_values(&theta);
            let sd = crate::numeric::variance(&s).sqrt();
            let gap = (tb.xi_hat(&theta) - ts.xi_hat(&theta)).abs();
            assert!(gap <= 10.0 * sd / (m as f64).sqrt(), "{gap} vs sd {sd}");
        }
    }

    #[test]
    fn equal_xi_gives_equal_log_density() {
        // symmetric data around 0 with a symmetric prior set
        let data = Dataset::new(vec![Input::Point(vec![1.0]), Input::Point(vec![-1.0])], vec![0.0, 0.0]).unwrap();
        let fmap = FeatureMap::raw_coordinates(vec![1.0]).unwrap();
        let prior = PriorSampleSet::from_thetas(vec![vec![0.3], vec![-0.3]]).unwrap();
        let a =
            log_posterior_trunc(&LinearModel::new(vec![0.5]), &data, 0.7, &prior, &fmap, Truncation::Standard).unwrap();
        let b = log_posterior_trunc(&LinearModel::new(vec![-0.5]), &data, 0.7, &prior, &fmap, Truncation::Standard)
            .unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn blocked_product_matches_termwise_sum(
            a in prop::collection::vec(0.0f64..50.0, 0..40),
            lambda in 0.01f64..5.0,
        ) {
            let b: Vec<f64> = a.iter().rev().map(|v| v * 0.5 + 1.0).collect();
            let blocked = log_product::<false>(lambda, &a, &b);
            let termwise: f64 = a.iter().zip(&b).map(|(x, y)| -soft_trunc(lambda * (x - y))).sum();
            prop_assert!((blocked - termwise).abs() <= 1e-11 * (1.0 + termwise.abs()));
        }
    }
}
