use serde::{Deserialize, Serialize};

use super::{dot, Polyhedron};
use crate::error::{Error, Result};
use crate::tol::TOL;

/// `z = L θ + l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    #[serde(rename = "L")]
    pub gain: Vec<Vec<f64>>,
    #[serde(rename = "l")]
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn eval(&self, theta: &[f64]) -> Vec<f64> {
        self.gain
            .iter()
            .zip(&self.offset)
            .map(|(row, &c)| dot(row, theta) + c)
            .collect()
    }

    pub fn outputs(&self) -> usize {
        self.offset.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalRegion {
    #[serde(flatten)]
    pub polyhedron: Polyhedron,
    #[serde(flatten)]
    pub law: AffineMap,
    /// Optimal value `q'θ + r` of the full parametric program on this region.
    pub value_gain: Vec<f64>,
    pub value_offset: f64,
    /// Inequality rows active in the basis that generated the region.
    pub active: Vec<usize>,
}

impl CriticalRegion {
    pub fn value(&self, theta: &[f64]) -> f64 {
        dot(&self.value_gain, theta) + self.value_offset
    }
}

/// Explicit piecewise-affine optimizer over a polyhedral partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PwaFeedbackLaw {
    pub n_params: usize,
    pub n_outputs: usize,
    pub domain: Polyhedron,
    pub regions: Vec<CriticalRegion>,
}

impl PwaFeedbackLaw {
    pub fn empty(domain: Polyhedron, n_outputs: usize) -> Self {
        Self {
            n_params: domain.dim,
            n_outputs,
            domain,
            regions: Vec::new(),
        }
    }

    pub fn locate(&self, theta: &[f64]) -> Option<usize> {
        self.regions
            .iter()
            .position(|r| r.polyhedron.contains(theta, TOL.region))
    }

    pub fn eval(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                what: "parameter",
                expected: self.n_params,
                got: theta.len(),
            });
        }
        let i = self
            .locate(theta)
            .ok_or_else(|| Error::OutOfDomain(theta.to_vec()))?;
        Ok(self.regions[i].law.eval(theta))
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        let i = self
            .locate(theta)
            .ok_or_else(|| Error::OutOfDomain(theta.to_vec()))?;
        Ok(self.regions[i].value(theta))
    }

    /// Keeps only the listed output components, e.g. the first control block
    /// of a horizon program.
    pub fn restrict_outputs(&self, keep: &[usize]) -> Self {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.law = AffineMap {
                    gain: keep.iter().map(|&i| r.law.gain[i].clone()).collect(),
                    offset: keep.iter().map(|&i| r.law.offset[i]).collect(),
                };
                r
            })
            .collect();
        Self {
            n_params: self.n_params,
            n_outputs: keep.len(),
            domain: self.domain.clone(),
            regions,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn eval_pwa(law: &PwaFeedbackLaw, theta: &[f64]) -> Result<Vec<f64>> {
    law.eval(theta)
}
