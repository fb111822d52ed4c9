use serde::Serialize;

use super::LinearCost;
use crate::network::{junction_type, JunctionType, NetworkGraph};

/// Sufficient conditions under which outflows at their upper limits are
/// optimal.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConditionReport {
    pub no_merges: bool,
    /// Split ratios are constant in this model, so this always holds.
    pub time_invariant_splits: bool,
    /// `(step, upstream, downstream)` edges where `α_i^k >= α_j^k >= 0` fails.
    pub alpha_violations: Vec<(usize, usize, usize)>,
    /// `(step, cell)` where `β_i^k <= β_i^{k+1} <= 0` fails.
    pub beta_violations: Vec<(usize, usize)>,
}

impl ConditionReport {
    pub fn alpha_ordered(&self) -> bool {
        self.alpha_violations.is_empty()
    }

    pub fn beta_monotone(&self) -> bool {
        self.beta_violations.is_empty()
    }

    pub fn passes(&self) -> bool {
        self.no_merges && self.time_invariant_splits && self.alpha_ordered() && self.beta_monotone()
    }
}

pub fn check_thm3_conditions(net: &NetworkGraph, cost: &LinearCost) -> ConditionReport {
    let no_merges = net
        .junctions()
        .iter()
        .all(|j| !matches!(junction_type(j), Ok(JunctionType::Merge) | Err(_)));
    let mut alpha_violations = Vec::new();
    for i in 0..net.len() {
        for j in net.successors(i) {
            for k in 0..=cost.horizon {
                let (ai, aj) = (cost.alpha[i][k], cost.alpha[j][k]);
                if !(ai >= aj && aj >= 0.0) {
                    alpha_violations.push((k, i, j));
                }
            }
        }
    }
    let mut beta_violations = Vec::new();
    for i in 0..net.len() {
        let b = &cost.beta[i];
        for k in 0..cost.horizon {
            let ok = b[k] <= 0.0 && b.get(k + 1).is_none_or(|&next| b[k] <= next);
            if !ok {
                beta_violations.push((k, i));
            }
        }
    }
    ConditionReport {
        no_merges,
        time_invariant_splits: true,
        alpha_violations,
        beta_violations,
    }
}
