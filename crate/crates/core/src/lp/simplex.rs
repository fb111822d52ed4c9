use super::{LinearProgram, LpError};
use crate::tol::TOL;

pub(super) struct Raw {
    pub values: Vec<f64>,
    pub iterations: usize,
}

/// How an original variable maps onto nonnegative internal columns.
#[derive(Clone, Copy)]
enum Map {
    /// x = offset + sign * col
    Single { col: usize, sign: f64, offset: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;
/// Reduced costs are recomputed from scratch this often.
const REFRESH_EVERY: usize = 200;

struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    banned: Vec<bool>,
    is_basic: Vec<bool>,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

pub(super) fn solve(lp: &LinearProgram) -> Result<Raw, LpError> {
    let n = lp.num_vars();
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] + TOL.feasibility * (1.0 + lp.lower[j].abs()) {
            return Err(LpError::Infeasible);
        }
    }

    // Internal structural columns.
    let mut maps = Vec::with_capacity(n);
    let mut col_upper = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let col = col_upper.len();
        if l.is_finite() {
            maps.push(Map::Single {
                col,
                sign: 1.0,
                offset: l,
            });
            col_upper.push((u - l).max(0.0));
        } else if u.is_finite() {
            maps.push(Map::Single {
                col,
                sign: -1.0,
                offset: u,
            });
            col_upper.push(f64::INFINITY);
        } else {
            maps.push(Map::Split { pos: col, neg: col + 1 });
            col_upper.push(f64::INFINITY);
            col_upper.push(f64::INFINITY);
        }
    }
    let nstruct = col_upper.len();
    let m_ub = lp.a_ub.len();
    let m_eq = lp.a_eq.len();
    let m = m_ub + m_eq;

    // Rows in internal coordinates with shifted right-hand sides.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (row, &b) in lp.a_ub.iter().chain(&lp.a_eq).zip(lp.b_ub.iter().chain(&lp.b_eq)) {
        let mut r = vec![0.0; nstruct];
        let mut shift = 0.0;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                Map::Single { col, sign, offset } => {
                    r[col] += a * sign;
                    shift += a * offset;
                }
                Map::Split { pos, neg } => {
                    r[pos] += a;
                    r[neg] -= a;
                }
            }
        }
        rows.push(r);
        rhs.push(b - shift);
    }
    let mut cost = vec![0.0; nstruct];
    for (j, &c) in lp.cost.iter().enumerate() {
        match maps[j] {
            Map::Single { col, sign, .. } => cost[col] += c * sign,
            Map::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    // Column layout: structural | slacks | artificials.
    let mut needs_artificial = Vec::with_capacity(m);
    let mut row_sign = Vec::with_capacity(m);
    for i in 0..m {
        let flip = rhs[i] < 0.0;
        row_sign.push(if flip { -1.0 } else { 1.0 });
        needs_artificial.push(i >= m_ub || flip);
    }
    let n_art = needs_artificial.iter().filter(|&&a| a).count();
    let cols = nstruct + m_ub + n_art;
    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![0.0; m * cols],
        beta: vec![0.0; m],
        basis: vec![0; m],
        upper: vec![f64::INFINITY; cols],
        at_upper: vec![false; cols],
        banned: vec![false; cols],
        is_basic: vec![false; cols],
        d: vec![0.0; cols],
        iterations: 0,
        max_iterations: 50_000 + 20 * (m + cols),
    };
    tab.upper[..nstruct].copy_from_slice(&col_upper);
    let mut art = nstruct + m_ub;
    let mut artificial_cols = Vec::with_capacity(n_art);
    for i in 0..m {
        let s = row_sign[i];
        let base = i * cols;
        for (c, &a) in rows[i].iter().enumerate() {
            tab.t[base + c] = s * a;
        }
        tab.beta[i] = s * rhs[i];
        if i < m_ub {
            tab.t[base + nstruct + i] = s;
        }
        if needs_artificial[i] {
            tab.t[base + art] = 1.0;
            tab.basis[i] = art;
            artificial_cols.push(art);
            art += 1;
        } else {
            tab.basis[i] = nstruct + i;
        }
        tab.is_basic[tab.basis[i]] = true;
    }

    // Phase 1.
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for &a in &artificial_cols {
            phase1[a] = 1.0;
        }
        tab.run(&phase1)?;
        let infeas: f64 = artificial_cols
            .iter()
            .filter(|&&a| tab.is_basic[a])
            .map(|&a| tab.value_of(a))
            .sum();
        let scale = 1.0 + tab.beta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > TOL.feasibility * scale {
            return Err(LpError::Infeasible);
        }
        for &a in &artificial_cols {
            tab.banned[a] = true;
        }
        tab.drive_out_artificials(nstruct + m_ub);
    }

    // Phase 2.
    let mut phase2 = vec![0.0; cols];
    phase2[..nstruct].copy_from_slice(&cost);
    tab.run(&phase2)?;

    let internal = tab.primal();
    let values = maps
        .iter()
        .map(|m| match *m {
            Map::Single { col, sign, offset } => offset + sign * internal[col],
            Map::Split { pos, neg } => internal[pos] - internal[neg],
        })
        .collect();
    Ok(Raw {
        values,
        iterations: tab.iterations,
    })
}

impl Tableau {
    fn value_of(&self, col: usize) -> f64 {
        if self.is_basic[col] {
            let r = self.basis.iter().position(|&b| b == col).unwrap();
            self.beta[r]
        } else if self.at_upper[col] {
            self.upper[col]
        } else {
            0.0
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.cols)
            .map(|c| if self.at_upper[c] { self.upper[c] } else { 0.0 })
            .collect();
        for (r, &b) in self.basis.iter().enumerate() {
            x[b] = self.beta[r].clamp(0.0, self.upper[b]);
        }
        x
    }

    fn refresh_reduced_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            for (d, &a) in self.d.iter_mut().zip(row) {
                *d -= cb * a;
            }
        }
        for r in 0..self.rows {
            self.d[self.basis[r]] = 0.0;
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<(), LpError> {
        self.refresh_reduced_costs(cost);
        let mut streak = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::MaxIterations(self.max_iterations));
            }
            if since_refresh >= REFRESH_EVERY {
                self.refresh_reduced_costs(cost);
                since_refresh = 0;
            }
            let bland = streak >= DEGENERATE_STREAK;
            match self.iterate(bland, &mut streak) {
                Step::Continue => {
                    self.iterations += 1;
                    since_refresh += 1;
                }
                Step::Unbounded => return Err(LpError::Unbounded),
                Step::Optimal => {
                    if since_refresh == 0 {
                        return Ok(());
                    }
                    // Confirm optimality against freshly computed reduced costs.
                    self.refresh_reduced_costs(cost);
                    since_refresh = 0;
                    if self.entering(true).is_none() {
                        return Ok(());
                    }
                }
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.cols {
            if self.is_basic[c] || self.banned[c] {
                continue;
            }
            let d = self.d[c];
            let gain = if self.at_upper[c] { d } else { -d };
            if gain <= TOL.optimality {
                continue;
            }
            // A fixed column (upper bound zero) cannot move.
            if self.upper[c] <= 0.0 {
                continue;
            }
            if bland {
                return Some(c);
            }
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((c, gain));
            }
        }
        best.map(|(c, _)| c)
    }

    fn iterate(&mut self, bland: bool, streak: &mut usize) -> Step {
        let q = match self.entering(bland) {
            Some(q) => q,
            None => return Step::Optimal,
        };
        let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

        // Ratio test.
        let mut limit = self.upper[q];
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_alpha = 0.0f64;
        for r in 0..self.rows {
            let alpha = self.t[r * self.cols + q] * dir;
            if alpha.abs() <= TOL.pivot {
                continue;
            }
            let b = self.basis[r];
            let (ratio, to_upper) = if alpha > 0.0 {
                (self.beta[r].max(0.0) / alpha, false)
            } else if self.upper[b].is_finite() {
                ((self.upper[b] - self.beta[r]).max(0.0) / -alpha, true)
            } else {
                continue;
            };
            let better = match leave {
                None => ratio < limit,
                Some((lr, _)) => {
                    if ratio < limit - 1e-12 {
                        true
                    } else if ratio <= limit + 1e-12 {
                        if bland {
                            b < self.basis[lr]
                        } else {
                            alpha.abs() > leave_alpha
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                limit = limit.min(ratio);
                if leave.is_none() || ratio < limit + 1e-12 {
                    limit = ratio;
                }
                leave = Some((r, to_upper));
                leave_alpha = alpha.abs();
            }
        }
        if limit.is_infinite() {
            return Step::Unbounded;
        }
        if limit <= 1e-12 {
            *streak += 1;
        } else {
            *streak = 0;
        }

        // Move basic values.
        let step = dir * limit;
        if step != 0.0 {
            for r in 0..self.rows {
                let a = self.t[r * self.cols + q];
                if a != 0.0 {
                    self.beta[r] -= a * step;
                }
            }
        }
        let entering_value = if self.at_upper[q] { self.upper[q] } else { 0.0 } + step;

        match leave {
            None => {
                // Bound flip.
                self.at_upper[q] = !self.at_upper[q];
            }
            Some((r, to_upper)) => {
                let old = self.basis[r];
                self.pivot(r, q);
                self.is_basic[old] = false;
                self.at_upper[old] = to_upper;
                self.is_basic[q] = true;
                self.at_upper[q] = false;
                self.basis[r] = q;
                self.beta[r] = entering_value;
            }
        }
        Step::Continue
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        let inv = 1.0 / p;
        let mut nz: Vec<(usize, f64)> = Vec::new();
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for (c, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    nz.push((c, *v));
                }
            }
            row[q] = 1.0;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for &(c, v) in &nz {
                row[c] -= f * v;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(c, v) in &nz {
                self.d[c] -= f * v;
            }
            self.d[q] = 0.0;
        }
    }

    /// Pivots zero-valued artificial columns out of the basis after phase 1,
    /// deleting rows that turn out to be linearly dependent.
    fn drive_out_artificials(&mut self, first_artificial: usize) {
        let mut r = 0;
        while r < self.rows {
            let b = self.basis[r];
            if b < first_artificial {
                r += 1;
                continue;
            }
            let base = r * self.cols;
            let mut best: Option<(usize, f64)> = None;
            for c in 0..first_artificial {
                if self.is_basic[c] {
                    continue;
                }
                let a = self.t[base + c].abs();
                if a > TOL.pivot && best.is_none_or(|(_, v)| a > v) {
                    best = Some((c, a));
                }
            }
            match best {
                Some((c, _)) => {
                    let value = if self.at_upper[c] { self.upper[c] } else { 0.0 };
                    self.pivot(r, c);
                    self.is_basic[b] = false;
                    self.is_basic[c] = true;
                    self.at_upper[c] = false;
                    self.basis[r] = c;
                    self.beta[r] = value;
                    r += 1;
                }
                None => self.remove_row(r),
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let b = self.basis[r];
        self.is_basic[b] = false;
        let cols = self.cols;
        self.t.drain(r * cols..(r + 1) * cols);
        self.beta.remove(r);
        self.basis.remove(r);
        self.rows -= 1;
    }
}
