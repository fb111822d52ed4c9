use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight specification as it appears in cost files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Scalar(f64),
    PerCell(Vec<f64>),
    PerCellPerStep(Vec<Vec<f64>>),
}

impl Default for Weights {
    fn default() -> Self {
        Weights::Scalar(0.0)
    }
}

impl Weights {
    fn expand(&self, n: usize, steps: usize, what: &'static str) -> Result<Vec<Vec<f64>>> {
        match self {
            Weights::Scalar(v) => Ok(vec![vec![*v; steps]; n]),
            Weights::PerCell(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: n,
                        got: v.len(),
                    });
                }
                Ok(v.iter().map(|&a| vec![a; steps]).collect())
            }
            Weights::PerCellPerStep(m) => {
                if m.len() != n {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: n,
                        got: m.len(),
                    });
                }
                if let Some(r) = m.iter().find(|r| r.len() != steps) {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: steps,
                        got: r.len(),
                    });
                }
                Ok(m.clone())
            }
        }
    }
}

/// `Σ_k Σ_i α_i^k x_i^k + β_i^k u_i^k` with a terminal state term at `k = N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCost {
    /// `alpha[i][k]`, `k = 0..=N`.
    pub alpha: Vec<Vec<f64>>,
    /// `beta[i][k]`, `k = 0..N`.
    pub beta: Vec<Vec<f64>>,
    pub horizon: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostFile {
    pub alpha: Weights,
    #[serde(default)]
    pub beta: Weights,
    pub horizon: usize,
}

impl LinearCost {
    pub fn new(n: usize, horizon: usize, alpha: &Weights, beta: &Weights) -> Result<Self> {
        let cost = Self {
            alpha: alpha.expand(n, horizon + 1, "alpha")?,
            beta: beta.expand(n, horizon, "beta")?,
            horizon,
        };
        if let Some(v) = cost.alpha.iter().flatten().find(|&&a| !(a >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "state weights must be nonnegative, got {v}"
            )));
        }
        if cost.beta.iter().flatten().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("control weights must be finite".into()));
        }
        Ok(cost)
    }

    /// Time-invariant state weights and zero control weights.
    pub fn state_only(alpha: &[f64], horizon: usize) -> Self {
        Self::new(
            alpha.len(),
            horizon,
            &Weights::PerCell(alpha.to_vec()),
            &Weights::Scalar(0.0),
        )
        .expect("per-cell weights match their own length")
    }

    pub fn cells(&self) -> usize {
        self.alpha.len()
    }

    /// The same weights over a shorter or longer horizon (per-step weights
    /// are truncated or extended with their last value).
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let resize = |rows: &Vec<Vec<f64>>, len: usize| {
            rows.iter()
                .map(|r| {
                    let last = r.last().copied().unwrap_or(0.0);
                    (0..len).map(|k| r.get(k).copied().unwrap_or(last)).collect()
                })
                .collect()
        };
        Self {
            alpha: resize(&self.alpha, horizon + 1),
            beta: resize(&self.beta, horizon),
            horizon,
        }
    }

    pub fn stage_cost(&self, k: usize, x: &[f64], u: &[f64]) -> f64 {
        let mut c = 0.0;
        for i in 0..self.cells() {
            c += self.alpha[i][k] * x[i];
            if k < self.horizon {
                c += self.beta[i][k] * u[i];
            }
        }
        c
    }

    pub fn terminal_cost(&self, x: &[f64]) -> f64 {
        (0..self.cells())
            .map(|i| self.alpha[i][self.horizon] * x[i])
            .sum()
    }

    pub fn from_json(text: &str, n: usize) -> Result<Self> {
        let f: CostFile = serde_json::from_str(text)?;
        Self::new(n, f.horizon, &f.alpha, &f.beta)
    }

    pub fn load(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, n)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = CostFile {
            alpha: Weights::PerCellPerStep(self.alpha.clone()),
            beta: Weights::PerCellPerStep(self.beta.clone()),
            horizon: self.horizon,
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }
}
