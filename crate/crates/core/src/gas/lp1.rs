use super::GasLineNetwork;
use crate::error::{Error, Result};
use crate::lp::{dot, solve_lp, LpError, ParametricLp, Polyhedron};

/// Cells and flows a gas horizon program is posed over.
#[derive(Clone, Debug, PartialEq)]
pub struct GasView {
    /// Cells `1..=n` whose pressures evolve in the program.
    pub cells: Vec<usize>,
    /// Decision flows, a subset of `0..n`.
    pub controls: Vec<usize>,
    /// Cell whose inflow is taken as zero.
    pub zero_inflow: Option<usize>,
}

impl GasView {
    pub fn full(gas: &GasLineNetwork) -> Self {
        Self {
            cells: (1..=gas.len()).collect(),
            controls: (0..gas.len()).collect(),
            zero_inflow: None,
        }
    }

    /// Local problem of valve `v` (`0` is the inlet): cells `v` and `v + 1`,
    /// the flows out of them, and zero inflow into cell `v`.
    pub fn valve(gas: &GasLineNetwork, v: usize) -> Self {
        let n = gas.len();
        let cells: Vec<usize> = [v, v + 1].into_iter().filter(|&c| c >= 1 && c <= n).collect();
        let mut controls: Vec<usize> = cells.iter().copied().filter(|&c| c < n).collect();
        if v == 0 {
            controls.insert(0, 0);
        }
        Self {
            cells,
            controls,
            zero_inflow: (v >= 1).then_some(v),
        }
    }

    fn is_local(&self, c: usize) -> bool {
        self.cells.contains(&c)
    }
}

/// Horizon program in the controls of a view with the full pressure vector
/// `x^k` as parameter. Variable `(j - k) * m + a` is the `a`-th view
/// control at step `j`.
#[derive(Clone, Debug)]
pub struct GasLp {
    pub k: usize,
    pub horizon: usize,
    pub view: GasView,
    pub plp: ParametricLp,
    pub offset_gain: Vec<f64>,
    pub offset_const: f64,
}

impl GasLp {
    pub fn n_vars(&self) -> usize {
        self.plp.n_vars()
    }

    pub fn var(&self, step: usize, a: usize) -> usize {
        (step - self.k) * self.view.controls.len() + a
    }

    pub fn offset(&self, theta: &[f64]) -> f64 {
        dot(&self.offset_gain, theta) + self.offset_const
    }

    /// Optimal controls and the optimal cost including the constant part.
    pub fn solve(&self, theta: &[f64]) -> Result<(Vec<f64>, f64)> {
        if self.n_vars() == 0 {
            // Only parameter rows remain; check them directly.
            let lp = self.plp.instantiate(theta);
            if lp.max_violation(&[]) > crate::tol::TOL.feasibility {
                return Err(Error::Solver {
                    step: Some(self.k),
                    source: LpError::Infeasible,
                });
            }
            return Ok((Vec::new(), self.offset(theta)));
        }
        let sol = solve_lp(&self.plp.instantiate(theta)).map_err(|e| Error::from(e).at_step(self.k))?;
        Ok((sol.x.clone(), sol.objective + self.offset(theta)))
    }
}

#[derive(Clone)]
struct Aff {
    z: Vec<f64>,
    th: Vec<f64>,
    c: f64,
}

impl Aff {
    fn zero(nz: usize, n: usize) -> Self {
        Self {
            z: vec![0.0; nz],
            th: vec![0.0; n],
            c: 0.0,
        }
    }

    fn add(&mut self, other: &Aff, f: f64) {
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a += f * b;
        }
        for (a, b) in self.th.iter_mut().zip(&other.th) {
            *a += f * b;
        }
        self.c += f * other.c;
    }

    fn scaled(&self, f: f64) -> Aff {
        let mut a = Aff::zero(self.z.len(), self.th.len());
        a.add(self, f);
        a
    }
}

pub fn build_lp1(gas: &GasLineNetwork, k: usize) -> Result<GasLp> {
    build_lp1_view(gas, k, &GasView::full(gas))
}

/// Horizon program with each valve relation replaced by the conservative
/// linear bound `u_c <= κ_c (x_c - x_{c+1})`. Rows that involve the pressure
/// of a cell outside the view are dropped; such pressures enter the cost at
/// their current value.
pub fn build_lp1_view(gas: &GasLineNetwork, k: usize, view: &GasView) -> Result<GasLp> {
    gas.validate()?;
    let n = gas.len();
    let big_n = gas.horizon;
    if k > big_n {
        return Err(Error::InvalidInput(format!(
            "step {k} lies beyond the horizon {big_n}"
        )));
    }
    let (dmin, dmax) = gas.flow_bounds(n);
    for j in k..big_n {
        let d = gas.demand[j];
        if d < dmin || d > dmax {
            return Err(Error::Infeasible {
                step: Some(j),
                context: format!("demand {d} outside the flow bounds [{dmin}, {dmax}] of cell {n}"),
            });
        }
    }
    let m = view.controls.len();
    let nz = (big_n - k) * m;
    let ctrl = |p: usize| view.controls.iter().position(|&q| q == p);

    let flow = |p: usize, j: usize| -> Aff {
        let mut a = Aff::zero(nz, n);
        if p == n {
            a.c = gas.demand[j];
        } else if let Some(b) = ctrl(p) {
            a.z[(j - k) * m + b] = 1.0;
        }
        a
    };

    // Pressures of view cells at steps k..=N.
    let mut states: Vec<Vec<Aff>> = Vec::with_capacity(big_n - k + 1);
    states.push(
        view.cells
            .iter()
            .map(|&c| {
                let mut a = Aff::zero(nz, n);
                a.th[c - 1] = 1.0;
                a
            })
            .collect(),
    );
    for j in k..big_n {
        let prev = states.last().unwrap();
        let mut next = prev.clone();
        for (idx, &c) in view.cells.iter().enumerate() {
            let tau = gas.cells[c - 1].tau;
            if view.zero_inflow != Some(c) {
                next[idx].add(&flow(c - 1, j), tau);
            }
            next[idx].add(&flow(c, j), -tau);
        }
        states.push(next);
    }
    let pressure = |c: usize, j: usize| -> Aff {
        if c == n + 1 {
            let mut a = Aff::zero(nz, n);
            a.c = gas.output_pressure[j];
            a
        } else if let Some(idx) = view.cells.iter().position(|&q| q == c) {
            states[j - k][idx].clone()
        } else {
            let mut a = Aff::zero(nz, n);
            a.th[c - 1] = 1.0;
            a
        }
    };
    let known = |c: usize| c == n + 1 || view.is_local(c);

    let mut rows: Vec<Aff> = Vec::new();
    for j in k..=big_n {
        for &c in &view.cells {
            let cell = &gas.cells[c - 1];
            let xc = pressure(c, j);
            let mut box_lo = xc.scaled(-1.0);
            box_lo.c += cell.x_min;
            let mut box_hi = xc.clone();
            box_hi.c -= cell.x_max;
            rows.push(box_lo);
            rows.push(box_hi);
            if !known(c + 1) {
                continue;
            }
            let mut drop = xc.clone();
            drop.add(&pressure(c + 1, j), -1.0);
            rows.push(drop.scaled(-1.0));
            let mut over = drop.clone();
            over.c -= cell.delta;
            rows.push(over);
            if j < big_n && (c == n || ctrl(c).is_some()) {
                let mut valve = flow(c, j);
                valve.add(&drop, -cell.kappa);
                rows.push(valve);
            }
        }
        if j < big_n {
            for &p in &view.controls {
                let (lo, hi) = gas.flow_bounds(p);
                let u = flow(p, j);
                let mut low = u.scaled(-1.0);
                low.c += lo;
                rows.push(low);
                if hi.is_finite() {
                    let mut high = u;
                    high.c -= hi;
                    rows.push(high);
                }
            }
        }
    }

    let mut cost = Aff::zero(nz, n);
    for j in k..=big_n {
        if j < big_n && ctrl(0).is_some() {
            cost.add(&flow(0, j), gas.price[j]);
        }
        for &c in &view.cells {
            let a = gas.alpha[c - 1][j];
            cost.add(&pressure(c, j), a);
            cost.add(&pressure(c + 1, j), -a);
        }
    }

    let lo: Vec<f64> = gas.cells.iter().map(|c| c.x_min).collect();
    let hi: Vec<f64> = gas.cells.iter().map(|c| c.x_max).collect();
    let mut plp = ParametricLp::new(cost.z.clone(), Polyhedron::from_box(&lo, &hi));
    for r in rows {
        plp.add_row(r.z, -r.c, r.th.iter().map(|v| -v).collect());
    }
    Ok(GasLp {
        k,
        horizon: big_n,
        view: view.clone(),
        plp,
        offset_gain: cost.th,
        offset_const: cost.c,
    })
}

/// First control block `u_0..u_{n-1}` of the LP1 solution over `[k, N]`.
pub fn gas_centralized_action(gas: &GasLineNetwork, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    if k >= gas.horizon {
        return Err(Error::InvalidInput(format!("no control at step {k}")));
    }
    let lp = build_lp1(gas, k)?;
    let (z, _) = lp.solve(x)?;
    Ok(z[..gas.len()].to_vec())
}

/// Each valve solves the LP1 program of its own two cells and keeps its own
/// flow.
pub fn gas_decentralized_action(gas: &GasLineNetwork, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    if k >= gas.horizon {
        return Err(Error::InvalidInput(format!("no control at step {k}")));
    }
    let n = gas.len();
    let mut u = vec![0.0; n];
    for v in 0..n {
        let view = GasView::valve(gas, v);
        let lp = build_lp1_view(gas, k, &view)?;
        let (z, _) = lp.solve(x).map_err(|e| match e {
            Error::Solver { step, source } if source == LpError::Infeasible => Error::Infeasible {
                step,
                context: format!("local problem of valve {v}"),
            },
            other => other,
        })?;
        let a = view.controls.iter().position(|&p| p == v).unwrap();
        u[v] = z[a];
    }
    Ok(u)
}
