//! Finite-horizon traffic programs and the feedback controllers built on them.

mod control;
mod cost;
mod horizon;
mod thm3;

pub use control::{
    centralized_action, decentralized_onehop_action, local_views, synthesize_explicit,
    trivial_action,
};
pub use cost::{CostFile, LinearCost, Weights};
pub use horizon::{
    build_horizon_lp, build_view_lp, cost_coefficients, state_domain, HorizonLp, View,
};
pub use thm3::{check_thm3_conditions, ConditionReport};
