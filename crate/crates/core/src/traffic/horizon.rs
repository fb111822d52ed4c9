use super::LinearCost;
use crate::error::{Error, Result};
use crate::lp::{dot, solve_lp, LinearProgram, ParametricLp, Polyhedron};
use crate::network::{InflowProfile, NetworkGraph, RowKind};

/// The cells a horizon program is posed over. The full network uses every
/// cell; a one-hop local problem uses the cells around one junction and
/// forces zero inflow into the junction's incoming cells.
#[derive(Clone, Debug)]
pub struct View {
    pub cells: Vec<usize>,
    pub zero_inflow: Vec<usize>,
    pub use_inflow: bool,
}

impl View {
    pub fn full(net: &NetworkGraph) -> Self {
        Self {
            cells: (0..net.len()).collect(),
            zero_inflow: Vec::new(),
            use_inflow: true,
        }
    }
}

/// Horizon `[k, N]` program in the controls `u^k..u^{N-1}` with the state
/// `x^k` (restricted to the view) as parameter.
///
/// Variable `(j - k) * m + a` is the control of the `a`-th view cell at step
/// `j`, with `m` the number of view cells.
#[derive(Clone, Debug)]
pub struct HorizonLp {
    pub k: usize,
    pub horizon: usize,
    pub cells: Vec<usize>,
    pub plp: ParametricLp,
    /// `μ` per decision variable; the LP objective is `-μ'z`.
    pub mu: Vec<f64>,
    /// The constant part of the cost is `offset_gain'θ + offset_const`.
    pub offset_gain: Vec<f64>,
    pub offset_const: f64,
    /// `(step, row kind)` per inequality row of `plp`.
    pub rows: Vec<(usize, RowKind)>,
}

impl HorizonLp {
    pub fn n_vars(&self) -> usize {
        self.plp.n_vars()
    }

    pub fn var(&self, step: usize, local: usize) -> usize {
        (step - self.k) * self.cells.len() + local
    }

    pub fn offset(&self, theta: &[f64]) -> f64 {
        dot(&self.offset_gain, theta) + self.offset_const
    }

    pub fn instantiate(&self, theta: &[f64]) -> LinearProgram {
        self.plp.instantiate(theta)
    }

    /// Optimal controls over the horizon and the optimal cost including the
    /// constant offset.
    pub fn solve(&self, theta: &[f64]) -> Result<(Vec<f64>, f64)> {
        if self.n_vars() == 0 {
            return Ok((Vec::new(), self.offset(theta)));
        }
        let sol = solve_lp(&self.instantiate(theta)).map_err(|e| Error::from(e).at_step(self.k))?;
        Ok((sol.x.clone(), sol.objective + self.offset(theta)))
    }

    /// The first control block of `z`, in view order.
    pub fn first_block<'a>(&self, z: &'a [f64]) -> &'a [f64] {
        &z[..self.cells.len().min(z.len())]
    }
}

/// Coefficients `μ_q^t` for the full network, `t = 0..N`.
pub fn cost_coefficients(net: &NetworkGraph, cost: &LinearCost) -> Vec<Vec<f64>> {
    let view = View::full(net);
    let mu = view_mu(net, cost, &view, 0);
    let n = net.len();
    (0..n)
        .map(|q| (0..cost.horizon).map(|t| mu[t * n + q]).collect())
        .collect()
}

fn receives(net: &NetworkGraph, view: &View, i: usize) -> bool {
    !net.is_on_ramp(i) && !view.zero_inflow.contains(&i)
}

fn view_mu(net: &NetworkGraph, cost: &LinearCost, view: &View, k: usize) -> Vec<f64> {
    let m = view.cells.len();
    let n_steps = cost.horizon.saturating_sub(k);
    let ts = net.sampling_time;
    let mut mu = vec![0.0; n_steps * m];
    for (a, &q) in view.cells.iter().enumerate() {
        // Downstream weight seen by one unit of flow out of q at time s.
        let net_alpha = |s: usize| {
            let mut v = cost.alpha[q][s];
            for &i in &view.cells {
                if receives(net, view, i) {
                    v -= net.split[q][i] * cost.alpha[i][s];
                }
            }
            v
        };
        // Suffix sums over s = t+1..=N.
        let mut tail = 0.0;
        for t in (k..cost.horizon).rev() {
            tail += ts * net_alpha(t + 1);
            mu[(t - k) * m + a] = -cost.beta[q][t] + tail;
        }
    }
    mu
}

/// Parameter domain used for explicit synthesis: `0 <= x_i <= γ_i ℓ_i`, with
/// sources capped at the mass where their demand reaches capacity.
pub fn state_domain(net: &NetworkGraph, cells: &[usize]) -> Polyhedron {
    let hi: Vec<f64> = cells
        .iter()
        .map(|&i| {
            let c = &net.cells[i];
            let cap = c.max_mass();
            if cap.is_finite() {
                cap
            } else {
                c.capacity * c.length / c.free_flow_speed
            }
        })
        .collect();
    Polyhedron::from_box(&vec![0.0; cells.len()], &hi)
}

pub fn build_horizon_lp(
    net: &NetworkGraph,
    cost: &LinearCost,
    k: usize,
    lambda: &InflowProfile,
) -> Result<HorizonLp> {
    build_view_lp(net, cost, k, lambda, &View::full(net))
}

pub fn build_view_lp(
    net: &NetworkGraph,
    cost: &LinearCost,
    k: usize,
    lambda: &InflowProfile,
    view: &View,
) -> Result<HorizonLp> {
    let n = net.len();
    if cost.cells() != n {
        return Err(Error::DimensionMismatch {
            what: "cost weights",
            expected: n,
            got: cost.cells(),
        });
    }
    if k > cost.horizon {
        return Err(Error::InvalidInput(format!(
            "step {k} lies beyond the horizon {}",
            cost.horizon
        )));
    }
    let m = view.cells.len();
    let steps = cost.horizon - k;
    let nz = steps * m;
    let ts = net.sampling_time;
    let mut local = vec![None; n];
    for (a, &i) in view.cells.iter().enumerate() {
        local[i] = Some(a);
    }

    // x^j_a = θ_a + state_const[j][a] + state_z[j][a]'z
    let mut state_const = vec![vec![0.0; m]];
    let mut state_z = vec![vec![vec![0.0; nz]; m]];
    for j in k..cost.horizon {
        let lam = lambda.at(j, n);
        let s = j - k;
        let mut c = state_const[s].clone();
        let mut zc = state_z[s].clone();
        for (a, &i) in view.cells.iter().enumerate() {
            zc[a][s * m + a] -= ts;
            if net.is_on_ramp(i) {
                if view.use_inflow {
                    c[a] += ts * lam[i];
                }
            } else if receives(net, view, i) {
                for (b, &q) in view.cells.iter().enumerate() {
                    let r = net.split[q][i];
                    if r != 0.0 {
                        zc[a][s * m + b] += ts * r;
                    }
                }
            }
        }
        state_const.push(c);
        state_z.push(zc);
    }

    let mu = view_mu(net, cost, view, k);
    let domain = state_domain(net, &view.cells);
    let mut plp = ParametricLp::new(mu.iter().map(|v| -v).collect(), domain);
    let mut rows = Vec::new();
    let flow_rows: Vec<_> = net
        .flow_rows()
        .into_iter()
        .filter(|r| {
            r.controls.iter().all(|&(q, _)| local[q].is_some())
                && r.states.iter().all(|&(i, _)| local[i].is_some())
        })
        .collect();
    for j in k..cost.horizon {
        let s = j - k;
        for row in &flow_rows {
            let mut w = vec![0.0; nz];
            let mut g = row.constant;
            let mut sv = vec![0.0; m];
            for &(q, a) in &row.controls {
                w[s * m + local[q].unwrap()] += a;
            }
            for &(i, b) in &row.states {
                let a = local[i].unwrap();
                g += b * state_const[s][a];
                sv[a] += b;
                for (wt, &zt) in w.iter_mut().zip(&state_z[s][a]) {
                    *wt -= b * zt;
                }
            }
            plp.add_row(w, g, sv);
            rows.push((j, row.kind.clone()));
        }
    }

    // Constant part of the cost.
    let mut offset_gain = vec![0.0; m];
    let mut offset_const = 0.0;
    for (a, &i) in view.cells.iter().enumerate() {
        offset_gain[a] = (k..=cost.horizon).map(|t| cost.alpha[i][t]).sum();
        if net.is_on_ramp(i) && view.use_inflow {
            for t in k + 1..=cost.horizon {
                let inflow: f64 = (k..t).map(|j| lambda.at(j, n)[i]).sum();
                offset_const += ts * cost.alpha[i][t] * inflow;
            }
        }
    }

    Ok(HorizonLp {
        k,
        horizon: cost.horizon,
        cells: view.cells.clone(),
        plp,
        mu,
        offset_gain,
        offset_const,
        rows,
    })
}
