//! Optimal feedback flow control for cell-transmission traffic networks and
//! gas pipelines.

pub mod data;
pub mod error;
pub mod experiments;
pub mod gas;
pub mod lp;
pub mod network;
pub mod sim;
pub mod tol;
pub mod traffic;

pub use error::{Error, Result};
pub use lp::{
    eval_pwa, solve_lp, solve_mplp, LinearProgram, LpError, LpSolution, ParametricLp,
    Polyhedron, PwaFeedbackLaw,
};
pub use network::{CellParams, InflowProfile, JamDensity, NetworkGraph};
pub use sim::{evaluate_cost, relative_loss, simulate, Scheme, Trajectory};
pub use tol::{Tolerances, TOL};
pub use traffic::{HorizonLp, LinearCost};
