use super::horizon::{build_horizon_lp, build_view_lp, View};
use super::LinearCost;
use crate::error::{Error, Result};
use crate::lp::{solve_mplp, MplpLimits, PwaFeedbackLaw};
use crate::network::{InflowProfile, NetworkGraph};

fn check_step(cost: &LinearCost, k: usize) -> Result<()> {
    if k >= cost.horizon {
        return Err(Error::InvalidInput(format!(
            "no control is applied at step {k} of a horizon of {}",
            cost.horizon
        )));
    }
    Ok(())
}

/// First control block of the optimal horizon-`[k, N]` program at `x`.
pub fn centralized_action(
    net: &NetworkGraph,
    cost: &LinearCost,
    k: usize,
    x: &[f64],
    lambda: &InflowProfile,
) -> Result<Vec<f64>> {
    check_step(cost, k)?;
    let hlp = build_horizon_lp(net, cost, k, lambda)?;
    let (z, _) = hlp.solve(x)?;
    Ok(clean(hlp.first_block(&z)))
}

/// One explicit law per step `k = 0..N`, each mapping `x^k` to `u^k`.
pub fn synthesize_explicit(
    net: &NetworkGraph,
    cost: &LinearCost,
    lambda: &InflowProfile,
    limits: &MplpLimits,
) -> Result<Vec<PwaFeedbackLaw>> {
    let n = net.len();
    (0..cost.horizon)
        .map(|k| {
            let hlp = build_horizon_lp(net, cost, k, lambda)?;
            let (law, _) = solve_mplp(&hlp.plp, limits)?;
            Ok(law.restrict_outputs(&(0..n).collect::<Vec<_>>()))
        })
        .collect()
}

/// Every outflow at its upper limit; merge demands are scaled by a common
/// factor when they exceed the downstream supply.
pub fn trivial_action(net: &NetworkGraph, x: &[f64]) -> Vec<f64> {
    let bounds = net.flow_bounds(x);
    let mut u = bounds.upper;
    for (cells, limit) in &bounds.merges {
        let total: f64 = cells.iter().map(|&i| u[i]).sum();
        if total > *limit {
            let f = if total > 0.0 { limit / total } else { 0.0 };
            for &i in cells {
                u[i] *= f;
            }
        }
    }
    u
}

/// Local problem for each junction: the junction's incoming and outgoing
/// cells, zero inflow into the incoming cells, rows touching other cells
/// dropped. Sinks solve a problem over themselves alone.
pub fn local_views(net: &NetworkGraph) -> Vec<View> {
    let mut views = Vec::new();
    for j in net.junctions() {
        let mut cells: Vec<usize> = j.incoming.iter().chain(&j.outgoing).copied().collect();
        cells.sort_unstable();
        cells.dedup();
        views.push(View {
            cells,
            zero_inflow: j.incoming.clone(),
            use_inflow: false,
        });
    }
    for &i in &net.off_ramps {
        views.push(View {
            cells: vec![i],
            zero_inflow: vec![i],
            use_inflow: false,
        });
    }
    views
}

/// One-hop decentralized controller. Each cell's control comes from the local
/// problem of its downstream junction (or its own problem if it is a sink).
pub fn decentralized_onehop_action(
    net: &NetworkGraph,
    cost: &LinearCost,
    k: usize,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_step(cost, k)?;
    let mut u = vec![0.0; net.len()];
    for view in local_views(net) {
        let hlp = build_view_lp(net, cost, k, &InflowProfile::zero(), &view)?;
        let theta: Vec<f64> = view.cells.iter().map(|&i| x[i]).collect();
        let (z, _) = hlp.solve(&theta)?;
        let first = hlp.first_block(&z);
        for (a, &i) in view.cells.iter().enumerate() {
            if view.zero_inflow.contains(&i) {
                u[i] = first[a].max(0.0);
            }
        }
    }
    Ok(u)
}

fn clean(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&v| v.max(0.0)).collect()
}
