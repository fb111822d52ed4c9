//! Linear programming engine.
//!
//! [`solve_lp`] is a dense two-phase bounded-variable simplex. [`solve_mplp`]
//! enumerates optimal bases of a right-hand-side parametric LP and returns the
//! explicit piecewise-affine optimizer as a [`PwaFeedbackLaw`].

mod mplp;
mod polyhedron;
mod pwa;
mod simplex;

pub use mplp::{solve_mplp, MplpDiagnostics, MplpLimits, MplpStrategy, ParametricLp};
pub use polyhedron::Polyhedron;
pub use pwa::{eval_pwa, AffineMap, CriticalRegion, PwaFeedbackLaw};

use thiserror::Error;

use crate::tol::TOL;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit of {0} exceeded")]
    MaxIterations(usize),
    #[error("malformed problem: {0}")]
    Malformed(String),
}

/// `min c'z  s.t.  A z <= b,  A_eq z = b_eq,  lower <= z <= upper`.
///
/// Bounds default to `0 <= z < inf`; infinite entries are allowed on either
/// side.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        Self {
            cost,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row.into_iter().map(|v| -v).collect());
        self.b_ub.push(-rhs);
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(mut self) -> Self {
        self.lower.iter_mut().for_each(|l| *l = f64::NEG_INFINITY);
        self
    }

    fn check_dims(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors do not match cost".into()));
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(LpError::Malformed("row count does not match rhs".into()));
        }
        if let Some(r) = self.a_ub.iter().chain(&self.a_eq).find(|r| r.len() != n) {
            return Err(LpError::Malformed(format!(
                "row of length {} in a problem with {n} variables",
                r.len()
            )));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("bad bounds on variable {j}")));
            }
        }
        let finite = |v: &f64| v.is_finite();
        if !self.cost.iter().all(finite)
            || !self.b_ub.iter().all(finite)
            || !self.b_eq.iter().all(finite)
            || !self.a_ub.iter().chain(&self.a_eq).all(|r| r.iter().all(finite))
        {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &b) in self.a_ub.iter().zip(&self.b_ub) {
            worst = worst.max(dot(row, z) - b);
        }
        for (row, &b) in self.a_eq.iter().zip(&self.b_eq) {
            worst = worst.max((dot(row, z) - b).abs());
        }
        for ((&v, &l), &u) in z.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Indices of inequality rows binding at the optimizer.
    pub active: Vec<usize>,
    pub iterations: usize,
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check_dims()?;
    let x = simplex::solve(lp)?;
    let objective = dot(&lp.cost, &x.values);
    let active = lp
        .a_ub
        .iter()
        .zip(&lp.b_ub)
        .enumerate()
        .filter(|(_, (row, &b))| b - dot(row, &x.values) <= TOL.feasibility * (1.0 + b.abs()))
        .map(|(i, _)| i)
        .collect();
    Ok(LpSolution {
        x: x.values,
        objective,
        active,
        iterations: x.iterations,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
