#![allow(dead_code)]

use flownet::gas::{GasCell, GasLineNetwork, InletBounds};
use flownet::lp::ParametricLp;
use flownet::{CellParams, JamDensity, LinearCost, NetworkGraph, Polyhedron};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn cell(rng: &mut TestRng, on_ramp: bool) -> CellParams {
    let length = rng.gen_range(0.5..2.0);
    CellParams::new(
        length,
        rng.gen_range(0.2..1.0) * length,
        rng.gen_range(0.1..0.6) * length,
        if on_ramp {
            JamDensity::Infinite
        } else {
            JamDensity::Finite(rng.gen_range(2.0..5.0))
        },
        rng.gen_range(0.5..2.0),
    )
}

fn random_splits(rng: &mut TestRng, edges: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < edges.len() {
        let from = edges[i].0;
        let group: Vec<usize> = edges[i..].iter().take_while(|e| e.0 == from).map(|e| e.1).collect();
        let w: Vec<f64> = group.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = w.iter().sum();
        for (j, wj) in group.iter().zip(&w) {
            out.push((from, *j, wj / total));
        }
        i += group.len();
    }
    out
}

/// Rooted trees: every cell has at most one predecessor, leaves are sinks.
pub fn merge_free_network(rng: &mut TestRng, n: usize, with_on_ramp: bool) -> NetworkGraph {
    let mut edges = Vec::new();
    for i in 1..n {
        // Attach to an earlier cell that is not the on-ramp's only slot.
        let parent = rng.gen_range(0..i);
        edges.push((parent, i));
    }
    edges.sort_unstable();
    let has_child = |i: usize| edges.iter().any(|e| e.0 == i);
    let off: Vec<usize> = (0..n).filter(|&i| !has_child(i)).collect();
    let on = if with_on_ramp && n > 1 { vec![0] } else { Vec::new() };
    let cells = (0..n).map(|i| cell(rng, on.contains(&i))).collect();
    let splits = random_splits(rng, &edges);
    NetworkGraph::new(cells, &splits, on, off, 1.0).unwrap()
}

/// Acyclic networks grown by simple, diverge and merge junctions.
pub fn merge_diverge_network(rng: &mut TestRng, max_cells: usize) -> NetworkGraph {
    let sources = rng.gen_range(2..=3);
    let mut n = sources;
    let mut open: Vec<usize> = (0..sources).collect();
    let mut edges = Vec::new();
    let mut merges = 0;
    let mut diverges = 0;
    while n < max_cells {
        let room = max_cells - n;
        let op = if merges == 0 && open.len() >= 2 {
            0
        } else if diverges == 0 && room >= 2 {
            1
        } else {
            rng.gen_range(0..3)
        };
        match op {
            0 if open.len() >= 2 => {
                let k = rng.gen_range(2..=open.len().min(3));
                let ins: Vec<usize> = (0..k).map(|_| open.remove(rng.gen_range(0..open.len()))).collect();
                for i in ins {
                    edges.push((i, n));
                }
                open.push(n);
                n += 1;
                merges += 1;
            }
            1 if room >= 2 => {
                let from = open.remove(rng.gen_range(0..open.len()));
                let k = rng.gen_range(2..=room.min(3));
                for t in 0..k {
                    edges.push((from, n + t));
                    open.push(n + t);
                }
                n += k;
                diverges += 1;
            }
            _ => {
                let from = open.remove(rng.gen_range(0..open.len()));
                edges.push((from, n));
                open.push(n);
                n += 1;
            }
        }
    }
    edges.sort_unstable();
    let on: Vec<usize> = (0..sources).filter(|_| rng.gen_bool(0.5)).collect();
    let cells = (0..n).map(|i| cell(rng, on.contains(&i))).collect();
    let splits = random_splits(rng, &edges);
    NetworkGraph::new(cells, &splits, on, open, 1.0).unwrap()
}

pub fn random_state(rng: &mut TestRng, net: &NetworkGraph) -> Vec<f64> {
    net.cells
        .iter()
        .map(|c| rng.gen_range(0.0..=c.gamma.finite().unwrap_or(3.0) * c.length))
        .collect()
}

pub fn random_cost(rng: &mut TestRng, n: usize, horizon: usize) -> LinearCost {
    let alpha: Vec<Vec<f64>> = (0..n).map(|_| (0..=horizon).map(|_| rng.gen_range(0.0..6.0)).collect()).collect();
    let beta: Vec<Vec<f64>> = (0..n).map(|_| (0..horizon).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    LinearCost::new(
        n,
        horizon,
        &flownet::traffic::Weights::PerCellPerStep(alpha),
        &flownet::traffic::Weights::PerCellPerStep(beta),
    )
    .unwrap()
}

/// Weights that shrink downstream and flow weights that are nonpositive and
/// nondecreasing in time.
pub fn ordered_cost(rng: &mut TestRng, net: &NetworkGraph, horizon: usize) -> LinearCost {
    let n = net.len();
    let mut alpha = vec![vec![0.0; horizon + 1]; n];
    for k in 0..=horizon {
        for i in 0..n {
            let cap = net
                .predecessors(i)
                .iter()
                .map(|&p| alpha[p][k])
                .fold(6.0f64, f64::min);
            alpha[i][k] = rng.gen_range(0.0..=cap);
        }
    }
    let beta: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut b: Vec<f64> = (0..horizon).map(|_| -rng.gen_range(0.0..1.0)).collect();
            b.sort_by(f64::total_cmp);
            b
        })
        .collect();
    LinearCost::new(
        n,
        horizon,
        &flownet::traffic::Weights::PerCellPerStep(alpha),
        &flownet::traffic::Weights::PerCellPerStep(beta),
    )
    .unwrap()
}

/// Two cells over two steps, started inside every bound.
pub fn random_gas2(rng: &mut TestRng) -> GasLineNetwork {
    let out = rng.gen_range(0.5..1.0);
    let mk = |rng: &mut TestRng, x_min: f64, x_max: f64| GasCell {
        tau: rng.gen_range(0.1..0.4),
        kappa: rng.gen_range(0.5..1.5),
        delta: rng.gen_range(1.5..3.0),
        u_min: 0.0,
        u_max: rng.gen_range(3.0..5.0),
        x_min,
        x_max,
    };
    let c2 = mk(rng, 1.0, 6.0);
    let c1 = mk(rng, 2.0, 8.0);
    let x2 = (out + rng.gen_range(0.2..c2.delta - 0.1)).clamp(c2.x_min + 0.1, c2.x_max);
    let x1 = (x2 + rng.gen_range(0.2..c1.delta - 0.1)).clamp(c1.x_min + 0.1, c1.x_max);
    let room = c2.kappa * (x2 * x2 - out * out).sqrt();
    let demand = rng.gen_range(0.1..0.8) * room.min(c2.u_max);
    GasLineNetwork {
        inlet: InletBounds {
            u_min: 0.0,
            u_max: rng.gen_range(3.0..6.0),
        },
        horizon: 2,
        demand: vec![demand; 2],
        output_pressure: vec![out; 3],
        price: (0..2).map(|_| rng.gen_range(0.0..2.0)).collect(),
        alpha: (0..2).map(|_| (0..3).map(|_| rng.gen_range(0.0..2.0)).collect()).collect(),
        initial_pressure: vec![x1, x2],
        cells: vec![c1, c2],
    }
}

/// Linear program in two bounded variables, solved by visiting vertices.
fn lp2_vertices(c: [f64; 2], rows: &[([f64; 2], f64)]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, (a, b)) in rows.iter().enumerate() {
        for (e, f) in &rows[i + 1..] {
            let det = a[0] * e[1] - a[1] * e[0];
            if det.abs() < 1e-14 {
                continue;
            }
            let p = [(b * e[1] - a[1] * f) / det, (a[0] * f - b * e[0]) / det];
            let ok = rows
                .iter()
                .all(|(r, s)| r[0] * p[0] + r[1] * p[1] <= s + 1e-10 * (1.0 + s.abs()));
            if ok {
                let v = c[0] * p[0] + c[1] * p[1];
                best = Some(best.map_or(v, |w: f64| w.min(v)));
            }
        }
    }
    best
}

/// Exact cost of a two-cell, two-step instance after fixing the first
/// control `(u_0^0, u_1^0)`, or `None` if no feasible continuation exists.
pub fn gas2_cost_given_first(gas: &GasLineNetwork, a0: f64, b0: f64) -> Option<f64> {
    let tol = 1e-10;
    let [c1, c2] = [&gas.cells[0], &gas.cells[1]];
    let x = &gas.initial_pressure;
    let (x1, x2) = (x[0], x[1]);
    let out = &gas.output_pressure;
    let d = &gas.demand;
    let drop_cost = |k: usize, y1: f64, y2: f64| gas.alpha[0][k] * (y1 - y2) + gas.alpha[1][k] * (y2 - out[k]);
    let within = |v: f64, lo: f64, hi: f64| v >= lo - tol && v <= hi + tol;

    if !within(a0, gas.inlet.u_min, gas.inlet.u_max) || !within(b0, c1.u_min, c1.u_max) {
        return None;
    }
    if b0 * b0 > c1.kappa.powi(2) * (x1 * x1 - x2 * x2) + tol
        || d[0] * d[0] > c2.kappa.powi(2) * (x2 * x2 - out[0] * out[0]) + tol
    {
        return None;
    }
    let y1 = x1 + c1.tau * (a0 - b0);
    let y2 = x2 + c2.tau * (b0 - d[0]);
    let states_ok = |y1: f64, y2: f64, k: usize| {
        within(y1, c1.x_min, c1.x_max)
            && within(y2, c2.x_min, c2.x_max)
            && within(y1 - y2, 0.0, c1.delta)
            && within(y2 - out[k], 0.0, c2.delta)
    };
    if !states_ok(y1, y2, 1) || d[1] * d[1] > c2.kappa.powi(2) * (y2 * y2 - out[1] * out[1]) + tol {
        return None;
    }
    let b_cap = c1.u_max.min(c1.kappa * (y1 * y1 - y2 * y2).max(0.0).sqrt());
    // Inner variables (a1, b1); next pressures z1 = y1 + τ1 (a1 - b1),
    // z2 = y2 + τ2 (b1 - d1).
    let (t1, t2) = (c1.tau, c2.tau);
    let z1 = ([t1, -t1], y1);
    let z2 = ([0.0, t2], y2 - t2 * d[1]);
    let mut rows: Vec<([f64; 2], f64)> = vec![
        ([-1.0, 0.0], -gas.inlet.u_min),
        ([1.0, 0.0], gas.inlet.u_max),
        ([0.0, -1.0], -c1.u_min),
        ([0.0, 1.0], b_cap),
    ];
    let mut bound = |coef: [f64; 2], cst: f64, lo: f64, hi: f64| {
        rows.push((coef, hi - cst));
        rows.push(([-coef[0], -coef[1]], cst - lo));
    };
    bound(z1.0, z1.1, c1.x_min, c1.x_max);
    bound(z2.0, z2.1, c2.x_min, c2.x_max);
    let diff = [z1.0[0] - z2.0[0], z1.0[1] - z2.0[1]];
    bound(diff, z1.1 - z2.1, 0.0, c1.delta);
    bound(z2.0, z2.1 - out[2], 0.0, c2.delta);
    // Terminal drop cost: α1 (z1 - z2) + α2 (z2 - x3).
    let (g1, g2) = (gas.alpha[0][2], gas.alpha[1][2]);
    let lin = [
        gas.price[1] + g1 * diff[0] + g2 * z2.0[0],
        g1 * diff[1] + g2 * z2.0[1],
    ];
    let cst = g1 * (z1.1 - z2.1) + g2 * (z2.1 - out[2]);
    let inner = lp2_vertices(lin, &rows)?;
    Some(gas.price[0] * a0 + drop_cost(0, x1, x2) + drop_cost(1, y1, y2) + inner + cst)
}

/// Brute-force optimum of a two-cell, two-step instance: a zooming grid over
/// the first control plus any supplied candidates, each completed exactly.
pub fn gas2_oracle(gas: &GasLineNetwork, candidates: &[[f64; 2]]) -> Option<f64> {
    let c1 = &gas.cells[0];
    let x = &gas.initial_pressure;
    let b_hi = c1.u_max.min(c1.kappa * (x[0] * x[0] - x[1] * x[1]).max(0.0).sqrt());
    let mut lo = [gas.inlet.u_min, c1.u_min];
    let mut hi = [gas.inlet.u_max, b_hi];
    let mut best: Option<(f64, [f64; 2])> = None;
    let consider = |p: [f64; 2], best: &mut Option<(f64, [f64; 2])>| {
        if let Some(v) = gas2_cost_given_first(gas, p[0], p[1]) {
            if best.is_none_or(|(w, _)| v < w) {
                *best = Some((v, p));
            }
        }
    };
    for &p in candidates {
        consider(p, &mut best);
    }
    let g = 41;
    for _ in 0..14 {
        for i in 0..g {
            for j in 0..g {
                let p = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / (g - 1) as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / (g - 1) as f64,
                ];
                consider(p, &mut best);
            }
        }
        let (_, p) = best?;
        for t in 0..2 {
            let half = (hi[t] - lo[t]) / 6.0;
            let (a, b) = if t == 0 { (gas.inlet.u_min, gas.inlet.u_max) } else { (c1.u_min, b_hi) };
            lo[t] = (p[t] - half).max(a);
            hi[t] = (p[t] + half).min(b);
        }
    }
    best.map(|(v, _)| v)
}

pub fn random_plp(rng: &mut TestRng, d: usize, p: usize, rows: usize) -> ParametricLp {
    let mut plp = ParametricLp::new(
        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        Polyhedron::from_box(&vec![-1.0; p], &vec![1.0; p]),
    );
    for t in 0..d {
        let mut w = vec![0.0; d];
        w[t] = 1.0;
        plp.add_row(w.clone(), rng.gen_range(1.0..3.0), vec![0.0; p]);
        w[t] = -1.0;
        plp.add_row(w, rng.gen_range(1.0..3.0), vec![0.0; p]);
    }
    for _ in 0..rows {
        plp.add_row(
            (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            rng.gen_range(0.3..1.5),
            (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
    }
    plp
}
