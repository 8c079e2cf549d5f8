use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::estimator::{EstimatorId, PosteriorSettings};
use crate::synthetic::SpecFile;

/// An experiment description, read from TOML:
///
/// ```toml
/// [spec]
/// variant = "partition-design"
/// probs = [0.5, 0.5]
/// theta0 = 0.5
/// noise = { kind = "student-t", nu = 3.0, scale = 1.0 }
/// box = { lo = [-4.0, -4.0], hi = [4.0, 4.0] }
///
/// [estimators]
/// list = ["ols", "trunc-pacbayes"]
/// posterior = { chain_length = 4000, burn_in = 1000 }
///
/// [grid]
/// n = [100, 400]
/// reps = 200
/// eps = [0.05]
/// seed = 7
///
/// [output]
/// path = "out/heavy-tail"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: SpecFile,
    pub estimators: EstimatorSection,
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub list: Vec<EstimatorId>,
    #[serde(default)]
    pub posterior: PosteriorSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Replaces a hypercube spec by the pair `P_±` with `β = 1/(2√n)` at
    /// each sample size.
    #[serde(default)]
    pub hypercube_pair: bool,
}

fn default_eps() -> Vec<f64> {
    vec![0.05]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.estimators.list.is_empty() {
            return Err(Error::config("estimator list is empty"));
        }
        if self.grid.n.is_empty() {
            return Err(Error::config("sample-size list is empty"));
        }
        if let Some(n) = self.grid.n.iter().find(|n| **n < 2) {
            return Err(Error::config(format!("sample sizes must be >= 2, got {n}")));
        }
        if self.grid.reps == 0 {
            return Err(Error::config("replication count must be >= 1"));
        }
        if let Some(e) = self.grid.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::config(format!("confidence levels must lie in (0, 1), got {e}")));
        }
        if self.grid.hypercube_pair && self.spec.law.variant_name() != "hypercube" {
            return Err(Error::config("hypercube_pair needs a hypercube spec"));
        }
        let p = &self.estimators.posterior;
        if p.m == 0 || p.thin == 0 || p.burn_in >= p.chain_length {
            return Err(Error::config("posterior settings need m, thin >= 1 and burn_in < chain_length"));
        }
        if !(p.eta_prime > 0.0 && p.eta_prime < 1.0) {
            return Err(Error::config(format!("eta_prime must lie in (0, 1), got {}", p.eta_prime)));
        }
        for v in [p.sigma, p.h].into_iter().flatten() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("sigma and h overrides must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[spec]
variant = "partition-design"
probs = [0.5, 0.5]
theta0 = 0.5
noise = { kind = "student-t", nu = 3.0, scale = 1.0 }
box = { lo = [-4.0, -4.0], hi = [4.0, 4.0] }

[estimators]
list = ["ols", "trunc-pacbayes", "ridge(0.5)"]
posterior = { chain_length = 400, burn_in = 100 }

[grid]
n = [10, 20]
reps = 3
eps = [0.05, 0.01]
seed = 7

[output]
path = "out/x"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.estimators.list.len(), 3);
        assert_eq!(cfg.estimators.list[2], EstimatorId::Ridge { lambda: 0.5 });
        assert_eq!(cfg.estimators.posterior.m, 256);
        assert_eq!(cfg.grid.n, vec![10, 20]);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid_grids() {
        for (from, to) in [
            ("reps = 3", "reps = 0"),
            ("n = [10, 20]", "n = [1, 20]"),
            ("eps = [0.05, 0.01]", "eps = [1.0]"),
            ("\"ols\", ", "\"lasso\", "),
            ("seed = 7", "seed = 7\nextra = 1"),
            ("burn_in = 100", "burn_in = 400"),
        ] {
            let bad = EXAMPLE.replace(from, to);
            assert!(ExperimentConfig::from_toml_str(&bad).is_err(), "{to}");
        }
    }
}
