//! Numerical tolerances shared by every solver and checker in the crate.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility of LP optimizers and of closed-loop constraint checks.
    pub feasibility: f64,
    /// Membership test for critical regions and region de-duplication.
    pub region: f64,
    /// Agreement between an explicit law and a pointwise LP solve.
    pub oracle: f64,
    /// Smallest magnitude accepted as a simplex pivot.
    pub pivot: f64,
    /// Reduced-cost threshold for optimality.
    pub optimality: f64,
    /// Absolute slack on split-ratio row sums before renormalization.
    pub split_sum: f64,
}

pub const TOL: Tolerances = Tolerances {
    feasibility: 1e-8,
    region: 1e-9,
    oracle: 1e-6,
    pivot: 1e-9,
    optimality: 1e-10,
    split_sum: 1e-9,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOL
    }
}
