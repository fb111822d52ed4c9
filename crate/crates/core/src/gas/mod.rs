//! Line-topology gas pipelines regulated by control valves.
//!
//! Cells are numbered `1..=n` from upstream; flow `u_0` enters cell 1, `u_c`
//! leaves cell `c` through valve `c`, and `u_n` is the consumer demand.
//! `x_{n+1}` is the exogenous output pressure.

mod lp1;
mod lp2;
mod reference;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::Weights;

pub use lp1::{
    build_lp1, build_lp1_view, gas_centralized_action, gas_decentralized_action, GasLp, GasView,
};
pub use lp2::{build_lp2, solve_lp2, BreakpointGrid, GridTerm, Lp2, Lp2Solution};
pub use reference::{solve_nlp_reference, NlpReference};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasCell {
    pub tau: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Bounds on the outflow `u_c` of this cell.
    pub u_min: f64,
    pub u_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

/// Bounds on the inlet flow `u_0`; the upper bound may be absent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InletBounds {
    #[serde(default)]
    pub u_min: f64,
    #[serde(default, with = "optional_bound")]
    pub u_max: f64,
}

impl Default for InletBounds {
    fn default() -> Self {
        Self {
            u_min: 0.0,
            u_max: f64::INFINITY,
        }
    }
}

mod optional_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A series given either as one constant or per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Constant(f64),
    Values(Vec<f64>),
}

impl Series {
    /// Expands to `len` entries, repeating the last value.
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Series::Constant(v) => Ok(vec![*v; len]),
            Series::Values(v) if v.is_empty() => {
                Err(Error::InvalidInput(format!("{what} series is empty")))
            }
            Series::Values(v) => {
                let last = *v.last().unwrap();
                Ok((0..len).map(|k| v.get(k).copied().unwrap_or(last)).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GasLineNetwork {
    pub cells: Vec<GasCell>,
    pub inlet: InletBounds,
    pub horizon: usize,
    /// `u_n^k`, `k = 0..N`.
    pub demand: Vec<f64>,
    /// `x_{n+1}^k`, `k = 0..=N`.
    pub output_pressure: Vec<f64>,
    /// `β^k`, `k = 0..N`.
    pub price: Vec<f64>,
    /// `alpha[c][k]` for cell `c + 1`, `k = 0..=N`.
    pub alpha: Vec<Vec<f64>>,
    pub initial_pressure: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GasScenarioFile {
    pub cells: Vec<GasCell>,
    #[serde(default)]
    pub inlet: InletBounds,
    pub horizon: usize,
    pub demand: Series,
    pub output_pressure: Series,
    pub price: Series,
    pub alpha: Weights,
    pub initial_pressure: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GasViolation {
    pub step: usize,
    pub constraint: String,
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<GasViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst(&self) -> f64 {
        self.violations.iter().map(|v| v.amount).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GasTrajectory {
    /// `N + 1` pressure vectors over cells `1..=n`.
    pub states: Vec<Vec<f64>>,
    /// `N` control vectors `u_0..u_{n-1}`.
    pub controls: Vec<Vec<f64>>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GasScheme {
    Centralized,
    Decentralized,
}

impl GasLineNetwork {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Lower and upper bound of flow `p` (`0..=n`).
    pub fn flow_bounds(&self, p: usize) -> (f64, f64) {
        if p == 0 {
            (self.inlet.u_min, self.inlet.u_max)
        } else {
            let c = &self.cells[p - 1];
            (c.u_min, c.u_max)
        }
    }

    /// Pressure of cell `c` (`1..=n+1`) in the state `x` at step `k`.
    pub fn pressure(&self, x: &[f64], c: usize, k: usize) -> f64 {
        if c == self.len() + 1 {
            self.output_pressure[k]
        } else {
            x[c - 1]
        }
    }

    /// Outflow of cell `c` (`1..=n`) under controls `u` at step `k`.
    pub fn outflow(&self, u: &[f64], c: usize, k: usize) -> f64 {
        if c == self.len() {
            self.demand[k]
        } else {
            u[c]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let bad = |m: String| Err(Error::InvalidInput(m));
        if n == 0 {
            return bad("gas network has no cells".into());
        }
        for (i, c) in self.cells.iter().enumerate() {
            let cell = i + 1;
            if !(c.tau > 0.0 && c.kappa > 0.0) {
                return bad(format!("cell {cell}: tau and kappa must be positive"));
            }
            if !(c.delta >= 0.0) {
                return bad(format!("cell {cell}: delta must be nonnegative"));
            }
            if !(c.x_min > 0.0 && c.x_min <= c.x_max && c.x_max.is_finite()) {
                return bad(format!("cell {cell}: need 0 < x_min <= x_max < inf"));
            }
            if !(c.u_min >= 0.0 && c.u_min <= c.u_max && c.u_max.is_finite()) {
                return bad(format!("cell {cell}: need 0 <= u_min <= u_max < inf"));
            }
        }
        if !(self.inlet.u_min >= 0.0 && self.inlet.u_min <= self.inlet.u_max) {
            return bad("inlet: need 0 <= u_min <= u_max".into());
        }
        let nn = self.horizon;
        for (what, len, want) in [
            ("demand", self.demand.len(), nn),
            ("price", self.price.len(), nn),
            ("output pressure", self.output_pressure.len(), nn + 1),
            ("initial pressure", self.initial_pressure.len(), n),
            ("alpha", self.alpha.len(), n),
        ] {
            if len != want {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: want,
                    got: len,
                });
            }
        }
        if self.alpha.iter().any(|r| r.len() != nn + 1) {
            return bad(format!("alpha must have {} steps per cell", nn + 1));
        }
        if self.alpha.iter().flatten().any(|&a| !(a >= 0.0)) || self.price.iter().any(|&b| !(b >= 0.0)) {
            return bad("weights and prices must be nonnegative".into());
        }
        if self.output_pressure.iter().any(|&p| !(p > 0.0)) {
            return bad("output pressure must be positive".into());
        }
        if self.demand.iter().any(|d| !d.is_finite()) {
            return bad("demand must be finite".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GasScenarioFile = serde_json::from_str(text)?;
        f.into_network()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = GasScenarioFile {
            cells: self.cells.clone(),
            inlet: self.inlet,
            horizon: self.horizon,
            demand: Series::Values(self.demand.clone()),
            output_pressure: Series::Values(self.output_pressure.clone()),
            price: Series::Values(self.price.clone()),
            alpha: Weights::PerCellPerStep(self.alpha.clone()),
            initial_pressure: self.initial_pressure.clone(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// Pressures after one step.
    pub fn step(&self, k: usize, x: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.len();
        (1..=n)
            .map(|c| {
                let inflow = u[c - 1];
                let outflow = self.outflow(u, c, k);
                x[c - 1] + self.cells[c - 1].tau * (inflow - outflow)
            })
            .collect()
    }

    pub fn stage_cost(&self, k: usize, x: &[f64], u: Option<&[f64]>) -> f64 {
        let n = self.len();
        let mut cost: f64 = (1..=n)
            .map(|c| self.alpha[c - 1][k] * (x[c - 1] - self.pressure(x, c + 1, k)))
            .sum();
        if let Some(u) = u {
            cost += self.price[k] * u[0];
        }
        cost
    }

    /// Checks the original flow-pressure relation and all linear rows along a
    /// trajectory.
    pub fn check_feasibility_nonconvex(&self, traj: &GasTrajectory) -> FeasibilityReport {
        let tol = crate::tol::TOL.feasibility;
        let n = self.len();
        let mut violations = Vec::new();
        let mut flag = |step: usize, constraint: String, amount: f64, scale: f64| {
            if amount > tol * (1.0 + scale.abs()) {
                violations.push(GasViolation {
                    step,
                    constraint,
                    amount,
                });
            }
        };
        for (k, x) in traj.states.iter().enumerate() {
            for c in 1..=n {
                let cell = &self.cells[c - 1];
                let (xc, xn) = (x[c - 1], self.pressure(x, c + 1, k));
                flag(k, format!("pressure drop at valve {c} is negative"), xn - xc, xc);
                flag(k, format!("pressure drop at valve {c} exceeds its limit"), xc - xn - cell.delta, cell.delta);
                flag(k, format!("pressure of cell {c} below its minimum"), cell.x_min - xc, xc);
                flag(k, format!("pressure of cell {c} above its maximum"), xc - cell.x_max, xc);
                if let Some(u) = traj.controls.get(k) {
                    let flow = self.outflow(u, c, k);
                    let room = cell.kappa * cell.kappa * (xc * xc - xn * xn);
                    flag(k, format!("flow through valve {c} exceeds the pressure-drop relation"), flow * flow - room, room);
                }
            }
            if let Some(u) = traj.controls.get(k) {
                for p in 0..=n {
                    let (lo, hi) = self.flow_bounds(p);
                    let v = if p == n { self.demand[k] } else { u[p] };
                    flag(k, format!("flow {p} below its minimum"), lo - v, v);
                    if hi.is_finite() {
                        flag(k, format!("flow {p} above its maximum"), v - hi, v);
                    }
                }
            }
        }
        FeasibilityReport { violations }
    }

    pub fn trajectory_cost(&self, traj: &GasTrajectory) -> f64 {
        traj.states
            .iter()
            .enumerate()
            .map(|(k, x)| self.stage_cost(k, x, traj.controls.get(k).map(Vec::as_slice)))
            .sum()
    }

    pub fn simulate(&self, scheme: GasScheme) -> Result<GasTrajectory> {
        self.validate()?;
        let mut x = self.initial_pressure.clone();
        let mut traj = GasTrajectory {
            states: vec![x.clone()],
            ..Default::default()
        };
        for k in 0..self.horizon {
            let u = match scheme {
                GasScheme::Centralized => gas_centralized_action(self, k, &x),
                GasScheme::Decentralized => gas_decentralized_action(self, k, &x),
            }
            .map_err(|e| e.at_step(k))?;
            x = self.step(k, &x, &u);
            traj.controls.push(u);
            traj.states.push(x.clone());
        }
        traj.cost = self.trajectory_cost(&traj);
        Ok(traj)
    }
}

impl GasScenarioFile {
    pub fn into_network(self) -> Result<GasLineNetwork> {
        let n = self.cells.len();
        let nn = self.horizon;
        let alpha = match &self.alpha {
            Weights::Scalar(v) => vec![vec![*v; nn + 1]; n],
            Weights::PerCell(v) if v.len() == n => v.iter().map(|&a| vec![a; nn + 1]).collect(),
            Weights::PerCellPerStep(m) => m.clone(),
            Weights::PerCell(v) => {
                return Err(Error::DimensionMismatch {
                    what: "alpha",
                    expected: n,
                    got: v.len(),
                })
            }
        };
        let net = GasLineNetwork {
            demand: self.demand.expand(nn, "demand")?,
            output_pressure: self.output_pressure.expand(nn + 1, "output pressure")?,
            price: self.price.expand(nn, "price")?,
            cells: self.cells,
            inlet: self.inlet,
            horizon: nn,
            alpha,
            initial_pressure: self.initial_pressure,
        };
        net.validate()?;
        Ok(net)
    }
}

/// `(J_lp1 - J_lp2) / max(1, |J_lp2|)`.
pub fn suboptimality_gap(j_lp1: f64, j_lp2: f64) -> f64 {
    (j_lp1 - j_lp2) / j_lp2.abs().max(1.0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_cell() -> GasLineNetwork {
        let cell = |x_min: f64, x_max: f64| GasCell {
            tau: 0.3,
            kappa: 1.0,
            delta: 3.0,
            u_min: 0.0,
            u_max: 5.0,
            x_min,
            x_max,
        };
        GasLineNetwork {
            cells: vec![cell(1.5, 5.0), cell(1.0, 4.0)],
            inlet: InletBounds::default(),
            horizon: 2,
            demand: vec![0.4; 2],
            output_pressure: vec![0.8; 3],
            price: vec![1.0; 2],
            alpha: vec![vec![1.0; 3]; 2],
            initial_pressure: vec![3.0, 2.0],
        }
    }

    #[test]
    fn gap_arithmetic() {
        assert_eq!(suboptimality_gap(5.0, 5.0), 0.0);
        assert!((suboptimality_gap(110.0, 100.0) - 0.1).abs() < 1e-15);
        assert!((suboptimality_gap(0.5, 0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scenario_round_trip() {
        let g = two_cell();
        let back = GasLineNetwork::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        let text = r#"{"cells":[{"tau":0.3,"kappa":1,"delta":3,"u_min":0,"u_max":5,"x_min":1,"x_max":4}],
            "inlet":{"u_max":null},"horizon":3,"demand":0.2,"output_pressure":[0.5],"price":1,
            "alpha":1,"initial_pressure":[2]}"#;
        let g = GasLineNetwork::from_json(text).unwrap();
        assert_eq!(g.output_pressure, vec![0.5; 4]);
        assert!(g.inlet.u_max.is_infinite());
    }

    #[test]
    fn flagged_violation() {
        let g = two_cell();
        let traj = GasTrajectory {
            states: vec![vec![3.0, 2.0]],
            controls: vec![vec![0.0, 3.5]],
            cost: 0.0,
        };
        let report = g.check_feasibility_nonconvex(&traj);
        assert!(report.violations.iter().any(|v| v.constraint.contains("valve 1")));
        let quiet = GasTrajectory {
            states: vec![vec![3.0, 2.0]; 3],
            controls: vec![vec![0.4, 0.4]; 2],
            cost: 0.0,
        };
        assert!(g.check_feasibility_nonconvex(&quiet).is_feasible());
    }

    #[test]
    fn approximations_bracket_reference() {
        let g = two_cell();
        let x = g.initial_pressure.clone();
        let (_, j1) = build_lp1(&g, 0).unwrap().solve(&x).unwrap();
        let r = solve_nlp_reference(&g, 0, &x, 1e-10, 500).unwrap();
        assert!(r.violation <= 1e-8, "{r:?}");
        assert!(r.objective <= j1 + 1e-8);
        for m in [3, 5, 9, 17] {
            let s = solve_lp2(&g, 0, &x, &BreakpointGrid::uniform(m)).unwrap();
            assert!(s.objective - s.delta <= r.objective + 1e-8, "m={m} {s:?} {r:?}");
            assert!(s.delta >= 0.0);
        }
    }

    #[test]
    fn centralized_rollout_respects_the_valves() {
        let g = two_cell();
        let traj = g.simulate(GasScheme::Centralized).unwrap();
        assert!(g.check_feasibility_nonconvex(&traj).is_feasible());
        assert!((g.trajectory_cost(&traj) - traj.cost).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        let g = two_cell();
        let x = g.initial_pressure.clone();
        let bad = BreakpointGrid::uniform(3).with_term(GridTerm::Flow { p: 1, step: 0 }, vec![0.0, 2.0, 1.0, 5.0]);
        assert!(matches!(solve_lp2(&g, 0, &x, &bad), Err(Error::InvalidInput(_))));
        let short = BreakpointGrid::uniform(3).with_term(GridTerm::Flow { p: 1, step: 0 }, vec![0.0, 4.0]);
        assert!(solve_lp2(&g, 0, &x, &short).is_err());
        assert!(solve_lp2(&g, 0, &x, &BreakpointGrid::uniform(1)).is_err());
        let custom = BreakpointGrid::uniform(3).with_term(GridTerm::Flow { p: 1, step: 0 }, vec![0.0, 0.5, 1.0, 5.0]);
        assert!(solve_lp2(&g, 0, &x, &custom).is_ok());
    }
}
