//! Closed-loop rollouts and cost accounting.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{InflowProfile, NetworkGraph};
use crate::traffic::{
    centralized_action, decentralized_onehop_action, trivial_action, LinearCost,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Centralized,
    Decentralized,
    Trivial,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Centralized, Scheme::Decentralized, Scheme::Trivial];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Centralized => "centralized",
            Scheme::Decentralized => "decentralized",
            Scheme::Trivial => "trivial",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Scheme::Centralized),
            "decentralized" => Ok(Scheme::Decentralized),
            "trivial" | "uncontrolled" => Ok(Scheme::Trivial),
            other => Err(Error::InvalidInput(format!("unknown scheme {other:?}"))),
        }
    }
}

/// What the centralized controller assumes about future inflow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Forecast {
    /// The realized inflow profile is known in advance.
    #[default]
    Exact,
    /// The controller is designed for zero inflow.
    Zero,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    /// `N + 1` states.
    pub states: Vec<Vec<f64>>,
    /// `N` control vectors.
    pub controls: Vec<Vec<f64>>,
    /// `N` inflow vectors.
    pub inflows: Vec<Vec<f64>>,
    pub stage_costs: Vec<f64>,
    pub terminal_cost: f64,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}

pub fn simulate(
    net: &NetworkGraph,
    cost: &LinearCost,
    scheme: Scheme,
    x0: &[f64],
    lambda: &InflowProfile,
) -> Result<Trajectory> {
    simulate_with(net, cost, scheme, x0, lambda, Forecast::Exact)
}

pub fn simulate_with(
    net: &NetworkGraph,
    cost: &LinearCost,
    scheme: Scheme,
    x0: &[f64],
    lambda: &InflowProfile,
    forecast: Forecast,
) -> Result<Trajectory> {
    let n = net.len();
    net.check_state(x0)
        .map_err(|e| Error::InvalidInput(format!("initial state: {e}")))?;
    lambda.validate(net)?;
    let design = match forecast {
        Forecast::Exact => lambda.clone(),
        Forecast::Zero => InflowProfile::zero(),
    };
    let mut traj = Trajectory {
        states: vec![x0.to_vec()],
        ..Default::default()
    };
    let mut x = x0.to_vec();
    for k in 0..cost.horizon {
        let u = match scheme {
            Scheme::Centralized => centralized_action(net, cost, k, &x, &design),
            Scheme::Decentralized => decentralized_onehop_action(net, cost, k, &x),
            Scheme::Trivial => Ok(trivial_action(net, &x)),
        }
        .map_err(|e| e.at_step(k))?;
        let lam = lambda.at(k, n);
        let next = net.step_dynamics(&x, &u, &lam).map_err(|e| e.at_step(k))?;
        net.check_state(&next).map_err(|e| e.at_step(k + 1))?;
        traj.stage_costs.push(cost.stage_cost(k, &x, &u));
        traj.inflows.push(net.inflow_rates(&u, &lam));
        traj.controls.push(u);
        traj.states.push(next.clone());
        x = next;
    }
    traj.terminal_cost = cost.terminal_cost(&x);
    traj.total_cost = traj.stage_costs.iter().sum::<f64>() + traj.terminal_cost;
    Ok(traj)
}

/// Recomputes `φ(x^N) + Σ_k ψ^k(x^k, u^k)` from a trajectory.
pub fn evaluate_cost(traj: &Trajectory, cost: &LinearCost) -> f64 {
    let steps = traj.controls.len();
    let stages: f64 = (0..steps)
        .map(|k| cost.stage_cost(k, &traj.states[k], &traj.controls[k]))
        .sum();
    let terminal: f64 = (0..cost.cells())
        .map(|i| cost.alpha[i][steps.min(cost.horizon)] * traj.final_state()[i])
        .sum();
    stages + terminal
}

/// `100 (J_dec - J_cen) / J_cen`.
pub fn relative_loss(j_dec: f64, j_cen: f64) -> Result<f64> {
    if j_cen == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(100.0 * (j_dec - j_cen) / j_cen)
}

/// One row per cell and step: `k, cell, x, u, y, stage_cost` (cells
/// one-based). The final step has no control and carries the terminal cost.
pub fn write_trace_csv<W: Write>(out: W, traj: &Trajectory, cost: &LinearCost) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "cell", "x", "u", "y", "stage_cost"])?;
    for (k, x) in traj.states.iter().enumerate() {
        for (i, &xi) in x.iter().enumerate() {
            let (u, y, c) = match traj.controls.get(k) {
                Some(u) => (
                    u[i].to_string(),
                    traj.inflows[k][i].to_string(),
                    cost.alpha[i][k] * xi + cost.beta[i][k] * u[i],
                ),
                None => (String::new(), String::new(), cost.alpha[i][k] * xi),
            };
            w.write_record([k.to_string(), (i + 1).to_string(), xi.to_string(), u, y, c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_formula() {
        assert_eq!(relative_loss(115.0, 100.0).unwrap(), 15.0);
        assert_eq!(relative_loss(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(relative_loss(1.0, 0.0), Err(Error::DivisionByZero)));
    }

    #[test]
    fn scheme_names() {
        for s in Scheme::ALL {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
