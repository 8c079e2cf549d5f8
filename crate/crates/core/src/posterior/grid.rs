use crate::error::{Error, Result};
use crate::model::ParamBox;

pub const MAX_GRID_DIM: usize = 2;
pub const MIN_RESOLUTION: usize = 16;

/// Normalized midpoint-rule masses of a density over a regular grid on the
/// box. Cell `(i0, i1)` is stored at `i0 + resolution * i1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMasses {
    resolution: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    masses: Vec<f64>,
}

impl GridMasses {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn centers(&self, axis: usize) -> Vec<f64> {
        cell_centers(self.lo[axis], self.hi[axis], self.resolution)
    }

    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let r = self.resolution;
        let mut out = vec![0.0; r];
        for (k, m) in self.masses.iter().enumerate() {
            let idx = if axis == 0 { k % r } else { k / r };
            out[idx] += m;
        }
        out
    }

    /// Marginal masses merged into `bins` equal bins along `axis`.
    pub fn coarsen(&self, axis: usize, bins: usize) -> Result<Vec<f64>> {
        if bins == 0 || self.resolution % bins != 0 {
            return Err(Error::config(format!("{bins} bins do not divide grid resolution {}", self.resolution)));
        }
        let per = self.resolution / bins;
        Ok(self.marginal(axis).chunks(per).map(|c| c.iter().sum()).collect())
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|axis| self.centers(axis).iter().zip(self.marginal(axis)).map(|(c, m)| c * m).sum())
            .collect()
    }
}

fn cell_centers(lo: f64, hi: f64, r: usize) -> Vec<f64> {
    let h = (hi - lo) / r as f64;
    (0..r).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// Evaluates `log_density` at the cell midpoints and normalizes. Only
/// `d ≤ 2` is supported.
pub fn grid_posterior_oracle<F>(log_density: F, bx: &ParamBox, resolution: usize) -> Result<GridMasses>
where
    F: Fn(&[f64]) -> f64,
{
    let d = bx.dim();
    if d > MAX_GRID_DIM {
        return Err(Error::UnsupportedDimension { d, max: MAX_GRID_DIM });
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::config(format!("grid resolution {resolution} below the minimum {MIN_RESOLUTION}")));
    }
    let axes: Vec<Vec<f64>> = (0..d).map(|j| cell_centers(bx.lo()[j], bx.hi()[j], resolution)).collect();
    let cells = resolution.pow(d as u32);
    let mut point = vec![0.0; d];
    let mut logs = Vec::with_capacity(cells);
    for k in 0..cells {
        point[0] = axes[0][k % resolution];
        if d == 2 {
            point[1] = axes[1][k / resolution];
        }
        logs.push(log_density(&point));
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::config("log-density is not finite anywhere on the grid"));
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(GridMasses {
        resolution,
        lo: bx.lo().to_vec(),
        hi: bx.hi().to_vec(),
        masses: weights.into_iter().map(|w| w / total).collect(),
    })
}

/// Normalized histogram over `bins` equal bins of `[lo, hi]`; the right
/// edge belongs to the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for v in values {
        let k = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1.0;
    }
    let n = values.len().max(1) as f64;
    counts.iter().map(|c| c / n).collect()
}

/// `½ Σ |p_k − q_k|`.
pub fn binned_total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, FeatureMap, Input, LeastSquares};
    use crate::posterior::GibbsTarget;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn constant_density_is_uniform() {
        let bx = ParamBox::cube(2, 0.0, 1.0).unwrap();
        let g = grid_posterior_oracle(|_| 3.0, &bx, 16).unwrap();
        assert!(g.masses().iter().all(|m| (m - 1.0 / 256.0).abs() < 1e-15));
        assert!((g.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_density_gives_mirrored_masses() {
        let bx = ParamBox::new(vec![-1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let g = grid_posterior_oracle(|t| -((t[0] - 1.0).powi(2) + (t[1] - 3.0).powi(4)), &bx, 32).unwrap();
        let r = g.resolution();
        let m = g.masses();
        for i1 in 0..r {
            for i0 in 0..r {
                let a = m[i0 + r * i1];
                assert!((a - m[(r - 1 - i0) + r * i1]).abs() < 1e-12);
                assert!((a - m[i0 + r * (r - 1 - i1)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_large_dim_and_coarse_grids() {
        let bx = ParamBox::cube(3, 0.0, 1.0).unwrap();
        assert!(matches!(grid_posterior_oracle(|_| 0.0, &bx, 16), Err(Error::UnsupportedDimension { d: 3, max: 2 })));
        let bx = ParamBox::cube(1, 0.0, 1.0).unwrap();
        assert!(grid_posterior_oracle(|_| 0.0, &bx, 15).is_err());
    }

    #[test]
    fn gibbs_grid_matches_truncated_gaussian() {
        let xs = [0.5, -1.0, 1.5, 2.0];
        let ys = [0.4, -0.1, 1.9, 1.2];
        let data = Dataset::new(xs.iter().map(|x| Input::Point(vec![*x])).collect(), ys.to_vec()).unwrap();
        let fmap = FeatureMap::raw_coordinates(vec![2.0]).unwrap();
        let lambda = 0.7;
        let target = GibbsTarget::new(&data, &fmap, lambda, &LeastSquares).unwrap();
        let bx = ParamBox::cube(1, -0.5, 1.0).unwrap();
        let g = grid_posterior_oracle(|t| target.log_density(t), &bx, 512).unwrap();

        // −λ Σ (y − θx)² is a Gaussian in θ with mean Sxy/Sxx and variance 1/(2λ Sxx)
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let normal = Normal::new(sxy / sxx, (1.0 / (2.0 * lambda * sxx)).sqrt()).unwrap();
        let total = normal.cdf(1.0) - normal.cdf(-0.5);
        let h = 1.5 / 512.0;
        for (k, m) in g.masses().iter().enumerate() {
            let left = -0.5 + k as f64 * h;
            let exact = (normal.cdf(left + h) - normal.cdf(left)) / total;
            assert!((m - exact).abs() <= 1e-4 * exact + 1e-12, "cell {k}: {m} vs {exact}");
        }
    }

    #[test]
    fn histogram_and_tv() {
        let h = histogram(&[0.0, 0.1, 0.5, 1.0], 0.0, 1.0, 2);
        assert_eq!(h, vec![0.5, 0.5]);
        assert_eq!(binned_total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        let bx = ParamBox::cube(1, 0.0, 1.0).unwrap();
        let g = grid_posterior_oracle(|_| 0.0, &bx, 64).unwrap();
        assert_eq!(g.coarsen(0, 32).unwrap().len(), 32);
        assert!(g.coarsen(0, 30).is_err());
        assert!((g.mean()[0] - 0.5).abs() < 1e-12);
    }
}
