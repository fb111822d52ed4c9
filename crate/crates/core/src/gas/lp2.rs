use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GasLineNetwork;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpError};

/// A scalar that enters a valve relation squared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridTerm {
    /// Flow `u_p^step`, `p = 1..n-1`.
    Flow { p: usize, step: usize },
    /// Pressure `x_c^step`, `c = 1..=n`.
    Pressure { c: usize, step: usize },
}

/// Breakpoints per nonlinear term. Terms without an explicit entry use
/// `default_points` uniformly spaced breakpoints over the variable's bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakpointGrid {
    pub default_points: usize,
    #[serde(default)]
    pub terms: BTreeMap<GridTerm, Vec<f64>>,
}

impl BreakpointGrid {
    pub fn uniform(points: usize) -> Self {
        Self {
            default_points: points,
            terms: BTreeMap::new(),
        }
    }

    pub fn with_term(mut self, term: GridTerm, points: Vec<f64>) -> Self {
        self.terms.insert(term, points);
        self
    }

    fn points(&self, term: GridTerm, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if let Some(p) = self.terms.get(&term) {
            let scale = 1.0 + lo.abs().max(hi.abs());
            if p.len() < 2 || p.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!(
                    "breakpoints of {term:?} must be strictly increasing with at least two points"
                )));
            }
            if (p[0] - lo).abs() > 1e-12 * scale || (p[p.len() - 1] - hi).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "breakpoints of {term:?} must span [{lo}, {hi}]"
                )));
            }
            return Ok(p.clone());
        }
        let m = self.default_points;
        if m < 2 {
            return Err(Error::InvalidInput("at least two breakpoints are needed".into()));
        }
        if hi == lo {
            return Ok(vec![lo]);
        }
        Ok((0..m)
            .map(|t| if t + 1 == m { hi } else { lo + (hi - lo) * t as f64 / (m - 1) as f64 })
            .collect())
    }
}

/// A quantity in the explicit model: a decision variable or a known value.
#[derive(Clone, Copy, Debug)]
pub(super) enum Q {
    Var(usize),
    Const(f64),
}

/// Horizon program with explicit flow and pressure variables and equality
/// dynamics; the valve relations are left for the caller.
pub(super) struct Explicit {
    pub lp: LinearProgram,
    pub cost_const: f64,
    u0: usize,
    x0: usize,
    k: usize,
    n: usize,
}

impl Explicit {
    pub fn flow(&self, gas: &GasLineNetwork, p: usize, j: usize) -> Q {
        if p == self.n {
            Q::Const(gas.demand[j])
        } else {
            Q::Var(self.u0 + (j - self.k) * self.n + p)
        }
    }

    pub fn pressure(&self, gas: &GasLineNetwork, x: &[f64], c: usize, j: usize) -> Q {
        if c == self.n + 1 {
            Q::Const(gas.output_pressure[j])
        } else if j == self.k {
            Q::Const(x[c - 1])
        } else {
            Q::Var(self.x0 + (j - self.k - 1) * self.n + c - 1)
        }
    }

    pub fn build(gas: &GasLineNetwork, k: usize, x: &[f64]) -> Result<Self> {
        gas.validate()?;
        let n = gas.len();
        let big_n = gas.horizon;
        if k >= big_n {
            return Err(Error::InvalidInput(format!("no control at step {k}")));
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "pressure",
                expected: n,
                got: x.len(),
            });
        }
        let (dmin, dmax) = gas.flow_bounds(n);
        for j in k..big_n {
            if gas.demand[j] < dmin || gas.demand[j] > dmax {
                return Err(Error::Infeasible {
                    step: Some(j),
                    context: format!("demand outside the flow bounds of cell {n}"),
                });
            }
        }
        let steps = big_n - k;
        let nu = steps * n;
        let nx = steps * n;
        let mut lp = LinearProgram::new(vec![0.0; nu + nx]);
        let mut e = Explicit {
            lp: LinearProgram::default(),
            cost_const: 0.0,
            u0: 0,
            x0: nu,
            k,
            n,
        };
        for j in k..big_n {
            for p in 0..n {
                let (lo, hi) = gas.flow_bounds(p);
                lp.set_bounds((j - k) * n + p, lo, hi);
            }
            for c in 1..=n {
                let cell = &gas.cells[c - 1];
                lp.set_bounds(nu + (j - k) * n + c - 1, cell.x_min, cell.x_max);
            }
        }
        let width = nu + nx;
        let linear = |terms: &[(Q, f64)]| -> (Vec<f64>, f64) {
            let mut row = vec![0.0; width];
            let mut c = 0.0;
            for &(q, f) in terms {
                match q {
                    Q::Var(i) => row[i] += f,
                    Q::Const(v) => c += f * v,
                }
            }
            (row, c)
        };

        for j in k..big_n {
            for c in 1..=n {
                let tau = gas.cells[c - 1].tau;
                let (row, cst) = linear(
                    &[
                        (e.pressure(gas, x, c, j + 1), 1.0),
                        (e.pressure(gas, x, c, j), -1.0),
                        (e.flow(gas, c - 1, j), -tau),
                        (e.flow(gas, c, j), tau),
                    ],
                );
                lp.add_eq(row, -cst);
            }
        }
        for j in k..=big_n {
            for c in 1..=n {
                let cell = &gas.cells[c - 1];
                let (row, cst) = linear(
                    &[(e.pressure(gas, x, c, j), 1.0), (e.pressure(gas, x, c + 1, j), -1.0)],
                );
                lp.add_le(row.iter().map(|v| -v).collect(), cst);
                lp.add_le(row, cell.delta - cst);
                if j == k {
                    let xc = x[c - 1];
                    if xc < cell.x_min || xc > cell.x_max {
                        return Err(Error::Infeasible {
                            step: Some(k),
                            context: format!("pressure of cell {c} outside its bounds"),
                        });
                    }
                }
            }
        }
        let mut cost = vec![0.0; width];
        let mut cost_const = 0.0;
        for j in k..=big_n {
            let mut terms = Vec::new();
            if j < big_n {
                terms.push((e.flow(gas, 0, j), gas.price[j]));
            }
            for c in 1..=n {
                let a = gas.alpha[c - 1][j];
                terms.push((e.pressure(gas, x, c, j), a));
                terms.push((e.pressure(gas, x, c + 1, j), -a));
            }
            let (row, cst) = linear(&terms);
            for (a, b) in cost.iter_mut().zip(row) {
                *a += b;
            }
            cost_const += cst;
        }
        lp.cost = cost;
        e.lp = lp;
        e.cost_const = cost_const;
        Ok(e)
    }
}

/// Separable approximation of the valve relations and its relaxed copy.
#[derive(Clone, Debug)]
pub struct Lp2 {
    pub lp: LinearProgram,
    /// The same program with each valve row loosened by the largest
    /// interpolation error of its convex terms.
    pub relaxed: LinearProgram,
    pub cost_const: f64,
    pub terms: Vec<(GridTerm, Vec<f64>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lp2Solution {
    pub objective: f64,
    pub relaxed_objective: f64,
    /// `objective - relaxed_objective`: bounds how far the approximation can
    /// lie above the true optimum.
    pub delta: f64,
    /// First control block of the approximate optimizer (not necessarily
    /// feasible for the original relations).
    pub first_controls: Vec<f64>,
}

pub fn build_lp2(gas: &GasLineNetwork, k: usize, x: &[f64], grid: &BreakpointGrid) -> Result<Lp2> {
    let e = Explicit::build(gas, k, x)?;
    let n = gas.len();
    let big_n = gas.horizon;
    let mut lp = e.lp.clone();
    let mut terms: Vec<(GridTerm, Vec<f64>)> = Vec::new();
    // term -> (first ξ column, breakpoints)
    let mut columns: BTreeMap<GridTerm, (usize, Vec<f64>)> = BTreeMap::new();
    let mut add_term = |lp: &mut LinearProgram, term: GridTerm, var: usize, lo: f64, hi: f64| -> Result<()> {
        let pts = grid.points(term, lo, hi)?;
        let first = lp.num_vars();
        for _ in &pts {
            lp.cost.push(0.0);
            lp.lower.push(0.0);
            lp.upper.push(f64::INFINITY);
        }
        for r in lp.a_ub.iter_mut().chain(lp.a_eq.iter_mut()) {
            r.resize(first + pts.len(), 0.0);
        }
        let width = first + pts.len();
        let mut sum = vec![0.0; width];
        let mut link = vec![0.0; width];
        link[var] = 1.0;
        for (t, &z) in pts.iter().enumerate() {
            sum[first + t] = 1.0;
            link[first + t] = -z;
        }
        lp.add_eq(sum, 1.0);
        lp.add_eq(link, 0.0);
        columns.insert(term, (first, pts.clone()));
        terms.push((term, pts));
        Ok(())
    };
    for j in k..big_n {
        for p in 1..n {
            if let Q::Var(v) = e.flow(gas, p, j) {
                let (lo, hi) = gas.flow_bounds(p);
                add_term(&mut lp, GridTerm::Flow { p, step: j }, v, lo, hi)?;
            }
        }
        for c in 1..=n {
            if let Q::Var(v) = e.pressure(gas, x, c, j) {
                let cell = &gas.cells[c - 1];
                add_term(&mut lp, GridTerm::Pressure { c, step: j }, v, cell.x_min, cell.x_max)?;
            }
        }
    }
    let width = lp.num_vars();
    for r in lp.a_ub.iter_mut().chain(lp.a_eq.iter_mut()) {
        r.resize(width, 0.0);
    }

    // Valve rows: sq(u_c) - κ² sq(x_c) + κ² sq(x_{c+1}) <= 0.
    let mut relaxed = lp.clone();
    for j in k..big_n {
        for c in 1..=n {
            let kappa2 = gas.cells[c - 1].kappa.powi(2);
            let mut row = vec![0.0; width];
            let mut rhs = 0.0;
            let mut slack = 0.0;
            let mut square = |q: Q, term: Option<GridTerm>, f: f64, row: &mut Vec<f64>| match q {
                Q::Const(v) => rhs -= f * v * v,
                Q::Var(_) => {
                    let (first, pts) = &columns[&term.expect("variables have grid terms")];
                    for (t, z) in pts.iter().enumerate() {
                        row[first + t] += f * z * z;
                    }
                    if f > 0.0 {
                        let h = pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                        slack += f * h * h / 4.0;
                    }
                }
            };
            square(e.flow(gas, c, j), Some(GridTerm::Flow { p: c, step: j }), 1.0, &mut row);
            square(
                e.pressure(gas, x, c, j),
                Some(GridTerm::Pressure { c, step: j }),
                -kappa2,
                &mut row,
            );
            square(
                e.pressure(gas, x, c + 1, j),
                Some(GridTerm::Pressure { c: c + 1, step: j }),
                kappa2,
                &mut row,
            );
            lp.add_le(row.clone(), rhs);
            relaxed.add_le(row, rhs + slack);
        }
    }
    Ok(Lp2 {
        lp,
        relaxed,
        cost_const: e.cost_const,
        terms,
    })
}

pub fn solve_lp2(
    gas: &GasLineNetwork,
    k: usize,
    x: &[f64],
    grid: &BreakpointGrid,
) -> Result<Lp2Solution> {
    let lp2 = build_lp2(gas, k, x, grid)?;
    let tag = |e: LpError| Error::from(e).at_step(k);
    let sol = solve_lp(&lp2.lp).map_err(tag)?;
    let relaxed = solve_lp(&lp2.relaxed).map_err(tag)?;
    let objective = sol.objective + lp2.cost_const;
    let relaxed_objective = relaxed.objective + lp2.cost_const;
    Ok(Lp2Solution {
        objective,
        relaxed_objective,
        delta: (objective - relaxed_objective).max(0.0),
        first_controls: sol.x[..gas.len()].to_vec(),
    })
}
