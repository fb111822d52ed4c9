use serde::Serialize;

use super::lp2::{Explicit, Q};
use super::GasLineNetwork;
use crate::error::{Error, Result};
use crate::lp::solve_lp;

#[derive(Clone, Debug, Serialize)]
pub struct NlpReference {
    /// Optimal value of the last outer approximation: a lower bound on the
    /// true optimum that is tight once `violation` is small.
    pub objective: f64,
    /// Largest violation of `sqrt(u_c² + κ_c² x_{c+1}²) <= κ_c x_c` at the
    /// returned point.
    pub violation: f64,
    pub iterations: usize,
    pub first_controls: Vec<f64>,
}

/// Solves the horizon program with the exact valve relations by cutting
/// planes on their second-order cone form.
pub fn solve_nlp_reference(
    gas: &GasLineNetwork,
    k: usize,
    x: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NlpReference> {
    let e = Explicit::build(gas, k, x)?;
    let n = gas.len();
    let mut lp = e.lp.clone();
    let width = lp.num_vars();
    let valves: Vec<(f64, Q, Q, Q)> = (k..gas.horizon)
        .flat_map(|j| (1..=n).map(move |c| (j, c)))
        .map(|(j, c)| {
            (
                gas.cells[c - 1].kappa,
                e.flow(gas, c, j),
                e.pressure(gas, x, c, j),
                e.pressure(gas, x, c + 1, j),
            )
        })
        .collect();
    let value = |q: Q, z: &[f64]| match q {
        Q::Var(i) => z[i],
        Q::Const(v) => v,
    };
    // Adds `a_u u + a_y y - κ x_c <= 0` with constants moved right.
    let add_cut = |lp: &mut crate::lp::LinearProgram, terms: [(Q, f64); 3]| {
        let mut row = vec![0.0; width];
        let mut rhs = 0.0;
        for (q, f) in terms {
            match q {
                Q::Var(i) => row[i] += f,
                Q::Const(v) => rhs -= f * v,
            }
        }
        lp.add_le(row, rhs);
    };
    for &(kappa, u, xc, _) in &valves {
        add_cut(&mut lp, [(u, 1.0), (xc, -kappa), (Q::Const(0.0), 0.0)]);
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let sol = solve_lp(&lp).map_err(|err| Error::from(err).at_step(k))?;
        let z = &sol.x;
        let mut violation: f64 = 0.0;
        for &(kappa, u, xc, xn) in &valves {
            let (uv, yv) = (value(u, z), kappa * value(xn, z));
            let norm = uv.hypot(yv);
            let g = norm - kappa * value(xc, z);
            violation = violation.max(g);
            if g > tol && norm > 0.0 {
                add_cut(
                    &mut lp,
                    [(u, uv / norm), (xn, kappa * yv / norm), (xc, -kappa)],
                );
            }
        }
        if violation <= tol || iterations >= max_iter {
            return Ok(NlpReference {
                objective: sol.objective + e.cost_const,
                violation: violation.max(0.0),
                iterations,
                first_controls: z[..n].to_vec(),
            });
        }
    }
}
