use nalgebra::{DMatrix, DVector};

use super::{dot, solve_lp, AffineMap, CriticalRegion, LinearProgram, Polyhedron, PwaFeedbackLaw};
use crate::error::{Error, Result};

/// `min c'z  s.t.  W z <= G + S θ,  W_eq z = G_eq + S_eq θ,  θ ∈ Ω`, with `z` free.
#[derive(Clone, Debug)]
pub struct ParametricLp {
    pub cost: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub s: Vec<Vec<f64>>,
    pub w_eq: Vec<Vec<f64>>,
    pub g_eq: Vec<f64>,
    pub s_eq: Vec<Vec<f64>>,
    pub domain: Polyhedron,
}

impl ParametricLp {
    pub fn new(cost: Vec<f64>, domain: Polyhedron) -> Self {
        Self {
            cost,
            w: Vec::new(),
            g: Vec::new(),
            s: Vec::new(),
            w_eq: Vec::new(),
            g_eq: Vec::new(),
            s_eq: Vec::new(),
            domain,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_params(&self) -> usize {
        self.domain.dim
    }

    pub fn add_row(&mut self, w: Vec<f64>, g: f64, s: Vec<f64>) {
        self.w.push(w);
        self.g.push(g);
        self.s.push(s);
    }

    pub fn add_eq(&mut self, w: Vec<f64>, g: f64, s: Vec<f64>) {
        self.w_eq.push(w);
        self.g_eq.push(g);
        self.s_eq.push(s);
    }

    pub fn validate(&self) -> Result<()> {
        let (d, p) = (self.n_vars(), self.n_params());
        let mismatch = |what, expected, got| Error::DimensionMismatch {
            what,
            expected,
            got,
        };
        for (w, s) in self.w.iter().zip(&self.s).chain(self.w_eq.iter().zip(&self.s_eq)) {
            if w.len() != d {
                return Err(mismatch("constraint row", d, w.len()));
            }
            if s.len() != p {
                return Err(mismatch("parameter row", p, s.len()));
            }
        }
        if self.w.len() != self.g.len() || self.w.len() != self.s.len() {
            return Err(mismatch("inequality rhs", self.w.len(), self.g.len()));
        }
        if self.w_eq.len() != self.g_eq.len() || self.w_eq.len() != self.s_eq.len() {
            return Err(mismatch("equality rhs", self.w_eq.len(), self.g_eq.len()));
        }
        if self.domain.a.iter().any(|r| r.len() != p) {
            return Err(mismatch("parameter domain", p, 0));
        }
        Ok(())
    }

    /// The ordinary LP obtained by fixing the parameter. Rows on a single
    /// variable become bounds.
    pub fn instantiate(&self, theta: &[f64]) -> LinearProgram {
        let mut lp = LinearProgram::new(self.cost.clone()).free();
        for ((w, &g), s) in self.w.iter().zip(&self.g).zip(&self.s) {
            let rhs = g + dot(s, theta);
            let mut nz = w.iter().enumerate().filter(|(_, &v)| v != 0.0);
            if let (Some((j, &a)), None) = (nz.next(), nz.next()) {
                let limit = rhs / a;
                if a > 0.0 {
                    lp.upper[j] = lp.upper[j].min(limit);
                } else {
                    lp.lower[j] = lp.lower[j].max(limit);
                }
                continue;
            }
            lp.add_le(w.clone(), rhs);
        }
        for ((w, &g), s) in self.w_eq.iter().zip(&self.g_eq).zip(&self.s_eq) {
            lp.add_eq(w.clone(), g + dot(s, theta));
        }
        lp
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MplpStrategy {
    /// Enumerate bases when their count is within `max_bases`, explore
    /// otherwise.
    #[default]
    Auto,
    Enumerate,
    Explore,
}

#[derive(Clone, Copy, Debug)]
pub struct MplpLimits {
    pub strategy: MplpStrategy,
    pub max_params: usize,
    pub max_bases: u128,
    /// Regions whose inscribed ball is smaller than this are discarded.
    pub min_radius: f64,
}

impl Default for MplpLimits {
    fn default() -> Self {
        Self {
            strategy: MplpStrategy::Auto,
            max_params: 3,
            max_bases: 5_000_000,
            min_radius: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MplpDiagnostics {
    pub bases_checked: usize,
    pub singular: usize,
    pub dual_feasible: usize,
    /// Active sets whose critical region had empty interior.
    pub dropped_lower_dimensional: Vec<Vec<usize>>,
    /// Active sets whose region was entirely covered by earlier regions.
    pub dropped_covered: Vec<Vec<usize>>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Returns the optimizer as a piecewise-affine law on pairwise
/// interior-disjoint regions. Enumeration visits bases in lexicographic order
/// of their active sets; earlier regions win on overlaps.
pub fn solve_mplp(
    plp: &ParametricLp,
    limits: &MplpLimits,
) -> Result<(PwaFeedbackLaw, MplpDiagnostics)> {
    plp.validate()?;
    let d = plp.n_vars();
    let p = plp.n_params();
    let mut diag = MplpDiagnostics::default();
    if p > limits.max_params {
        return Err(Error::ScaleExceeded(format!(
            "{p} parameters exceed the limit of {}",
            limits.max_params
        )));
    }

    // Rows without decision variables only restrict the parameter.
    let mut domain = plp.domain.clone();
    let mut rows = Vec::new();
    for i in 0..plp.w.len() {
        if plp.w[i].iter().all(|&v| v == 0.0) {
            domain.push(plp.s[i].iter().map(|v| -v).collect(), plp.g[i]);
        } else {
            rows.push(i);
        }
    }
    if !domain.is_full_dimensional(limits.min_radius) {
        return Ok((PwaFeedbackLaw::empty(plp.domain.clone(), d), diag));
    }
    let m_eq = plp.w_eq.len();
    if d == 0 {
        let law = PwaFeedbackLaw {
            n_params: p,
            n_outputs: 0,
            domain: plp.domain.clone(),
            regions: vec![CriticalRegion {
                polyhedron: domain,
                law: AffineMap {
                    gain: Vec::new(),
                    offset: Vec::new(),
                },
                value_gain: vec![0.0; p],
                value_offset: 0.0,
                active: Vec::new(),
            }],
        };
        return Ok((law, diag));
    }
    if m_eq > d {
        return Err(Error::InvalidInput(
            "more equality rows than decision variables".into(),
        ));
    }
    let r = d - m_eq;
    let m = rows.len();
    let count = binomial(m, r);
    let ctx = Context {
        plp,
        rows: &rows,
        domain: &domain,
        r,
        min_radius: limits.min_radius,
        cnorm: 1.0 + plp.cost.iter().map(|v| v.abs()).fold(0.0, f64::max),
    };
    let mut regions: Vec<CriticalRegion> = Vec::new();
    let enumerate = match limits.strategy {
        MplpStrategy::Auto => count <= limits.max_bases,
        MplpStrategy::Enumerate if count > limits.max_bases => {
            return Err(Error::ScaleExceeded(format!(
                "{count} candidate bases ({m} rows choose {r}) exceed the limit of {}",
                limits.max_bases
            )))
        }
        MplpStrategy::Enumerate => true,
        MplpStrategy::Explore => false,
    };
    if !enumerate {
        explore(&ctx, limits, &mut regions, &mut diag)?;
    } else if r <= m {
        let mut idx: Vec<usize> = (0..r).collect();
        loop {
            let active: Vec<usize> = idx.iter().map(|&k| rows[k]).collect();
            if let Some(c) = ctx.basis_region(&active, &mut diag) {
                add_pieces(c, &mut regions, limits.min_radius, &mut diag);
            }
            if !next_combination(&mut idx, m) {
                break;
            }
        }
    }

    let law = PwaFeedbackLaw {
        n_params: p,
        n_outputs: d,
        domain: plp.domain.clone(),
        regions,
    };
    Ok((law, diag))
}

struct Context<'a> {
    plp: &'a ParametricLp,
    /// Inequality rows that involve decision variables.
    rows: &'a [usize],
    domain: &'a Polyhedron,
    r: usize,
    min_radius: f64,
    cnorm: f64,
}

impl Context<'_> {
    /// Critical region and affine optimizer of an active set, if the set is
    /// a nonsingular, dual-feasible basis with a full-dimensional region.
    fn basis_region(&self, active: &[usize], diag: &mut MplpDiagnostics) -> Option<CriticalRegion> {
        let plp = self.plp;
        let (d, p, r) = (plp.n_vars(), plp.n_params(), self.r);
        diag.bases_checked += 1;
        let mut mat = DMatrix::<f64>::zeros(d, d);
        let mut rhs_g = DVector::<f64>::zeros(d);
        let mut rhs_s = DMatrix::<f64>::zeros(d, p);
        for (row, &i) in active.iter().enumerate() {
            fill(&mut mat, &mut rhs_g, &mut rhs_s, row, &plp.w[i], plp.g[i], &plp.s[i]);
        }
        for e in 0..plp.w_eq.len() {
            fill(&mut mat, &mut rhs_g, &mut rhs_s, r + e, &plp.w_eq[e], plp.g_eq[e], &plp.s_eq[e]);
        }
        let lu = mat.clone().full_piv_lu();
        let u = lu.u();
        let diag_max = u.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let diag_min = u.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if diag_max == 0.0 || diag_min <= 1e-11 * diag_max {
            diag.singular += 1;
            return None;
        }

        // Stationarity: c + M' y = 0 with y >= 0 on the inequality part.
        let c = DVector::from_column_slice(&plp.cost);
        let Some(y) = mat.transpose().full_piv_lu().solve(&(-&c)) else {
            diag.singular += 1;
            return None;
        };
        if y.iter().take(r).any(|&v| v < -1e-9 * self.cnorm) {
            return None;
        }
        diag.dual_feasible += 1;
        let offset = lu.solve(&rhs_g)?;
        let gain = lu.solve(&rhs_s)?;

        let mut region = self.domain.clone();
        for &i in self.rows {
            if active.contains(&i) {
                continue;
            }
            let w = &plp.w[i];
            let mut h = plp.s[i].iter().map(|v| -v).collect::<Vec<_>>();
            for (j, hj) in h.iter_mut().enumerate() {
                for (t, &wt) in w.iter().enumerate() {
                    *hj += wt * gain[(t, j)];
                }
            }
            let wl: f64 = w.iter().zip(offset.iter()).map(|(a, b)| a * b).sum();
            region.push(h, plp.g[i] - wl);
        }
        if !region.is_full_dimensional(self.min_radius) {
            diag.dropped_lower_dimensional.push(active.to_vec());
            return None;
        }
        Some(CriticalRegion {
            polyhedron: region,
            law: AffineMap {
                gain: (0..d).map(|t| gain.row(t).iter().copied().collect()).collect(),
                offset: offset.iter().copied().collect(),
            },
            value_gain: (0..p)
                .map(|j| (0..d).map(|t| plp.cost[t] * gain[(t, j)]).sum())
                .collect(),
            value_offset: dot(&plp.cost, offset.as_slice()),
            active: active.to_vec(),
        })
    }
}

/// Appends the part of `cand` not covered by earlier regions. Returns the
/// number of pieces added.
fn add_pieces(
    cand: CriticalRegion,
    regions: &mut Vec<CriticalRegion>,
    min_radius: f64,
    diag: &mut MplpDiagnostics,
) -> usize {
    let mut pieces = vec![cand.polyhedron.clone()];
    for prior in regions.iter() {
        let mut next = Vec::new();
        for piece in pieces {
            if piece.intersect(&prior.polyhedron).is_full_dimensional(min_radius) {
                next.extend(piece.subtract(&prior.polyhedron, min_radius));
            } else {
                next.push(piece);
            }
        }
        pieces = next;
        if pieces.is_empty() {
            break;
        }
    }
    if pieces.is_empty() {
        diag.dropped_covered.push(cand.active);
        return 0;
    }
    let added = pieces.len();
    for piece in pieces {
        regions.push(CriticalRegion {
            polyhedron: piece,
            ..cand.clone()
        });
    }
    added
}

/// Geometric exploration for problems too large to enumerate: solve at a
/// parameter, take the region of an optimal basis drawn from the tight rows,
/// and probe just outside each of its facets.
fn explore(
    ctx: &Context,
    limits: &MplpLimits,
    regions: &mut Vec<CriticalRegion>,
    diag: &mut MplpDiagnostics,
) -> Result<()> {
    let plp = ctx.plp;
    let Some((center, _)) = ctx.domain.chebyshev() else {
        return Ok(());
    };
    let mut queue = vec![center];
    let mut solves = 0usize;
    while let Some(theta) = queue.pop() {
        if !ctx.domain.contains(&theta, 0.0) || regions.iter().any(|r| r.polyhedron.contains(&theta, 0.0)) {
            continue;
        }
        solves += 1;
        if solves > 100_000 {
            return Err(Error::ScaleExceeded("parameter-space exploration did not terminate".into()));
        }
        let Ok(sol) = solve_lp(&plp.instantiate(&theta)) else {
            continue;
        };
        let tight: Vec<usize> = ctx
            .rows
            .iter()
            .copied()
            .filter(|&i| {
                let rhs = plp.g[i] + dot(&plp.s[i], &theta);
                let lhs = dot(&plp.w[i], &sol.x);
                (lhs - rhs).abs() <= 1e-7 * (1.0 + rhs.abs())
            })
            .collect();
        if tight.len() < ctx.r {
            continue;
        }
        let budget = binomial(tight.len(), ctx.r).min(limits.max_bases);
        let mut idx: Vec<usize> = (0..ctx.r).collect();
        let mut found = None;
        let mut tried = 0u128;
        loop {
            tried += 1;
            let active: Vec<usize> = idx.iter().map(|&k| tight[k]).collect();
            if let Some(c) = ctx.basis_region(&active, diag) {
                if c.polyhedron.contains(&theta, 1e-7) {
                    found = Some(c);
                    break;
                }
            }
            if tried >= budget || !next_combination(&mut idx, tight.len()) {
                break;
            }
        }
        let Some(cand) = found else {
            continue;
        };
        let probes = facet_probes(&cand.polyhedron, limits.min_radius);
        if add_pieces(cand, regions, limits.min_radius, diag) > 0 {
            queue.extend(probes);
        }
    }
    Ok(())
}

/// Points just outside each facet, at the center of the largest ball
/// inscribed in the facet.
fn facet_probes(poly: &Polyhedron, min_radius: f64) -> Vec<Vec<f64>> {
    let p = poly.dim;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let a = &poly.a[i];
        let an = dot(a, a).sqrt();
        if an == 0.0 {
            continue;
        }
        // max ρ over (θ, ρ): a_i θ = b_i, a_j θ + ρ |P a_j| <= b_j.
        let mut cost = vec![0.0; p + 1];
        cost[p] = -1.0;
        let mut lp = LinearProgram::new(cost).free();
        lp.set_bounds(p, 0.0, 1e6);
        let mut eq = a.clone();
        eq.push(0.0);
        lp.add_eq(eq, poly.b[i]);
        for j in 0..poly.len() {
            if j == i {
                continue;
            }
            let aj = &poly.a[j];
            let proj = dot(aj, a) / (an * an);
            let perp: f64 = aj.iter().zip(a).map(|(x, y)| (x - proj * y).powi(2)).sum::<f64>().sqrt();
            let mut row = aj.clone();
            row.push(perp);
            lp.add_le(row, poly.b[j]);
        }
        let Ok(sol) = solve_lp(&lp) else {
            continue;
        };
        if p > 1 && sol.x[p] < min_radius {
            continue;
        }
        let step = 1e-6 * (1.0 + sol.x[..p].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        out.push((0..p).map(|t| sol.x[t] + step * a[t] / an).collect());
    }
    out
}

fn fill(
    mat: &mut DMatrix<f64>,
    rhs_g: &mut DVector<f64>,
    rhs_s: &mut DMatrix<f64>,
    row: usize,
    w: &[f64],
    g: f64,
    s: &[f64],
) {
    for (t, &v) in w.iter().enumerate() {
        mat[(row, t)] = v;
    }
    rhs_g[row] = g;
    for (j, &v) in s.iter().enumerate() {
        rhs_s[(row, j)] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{eval_pwa, solve_lp};

    fn ramp() -> ParametricLp {
        // min z  s.t. z >= θ, z >= 0, θ ∈ [-1, 1]
        let mut plp = ParametricLp::new(vec![1.0], Polyhedron::from_box(&[-1.0], &[1.0]));
        plp.add_row(vec![-1.0], 0.0, vec![-1.0]);
        plp.add_row(vec![-1.0], 0.0, vec![0.0]);
        plp
    }

    #[test]
    fn ramp_has_two_regions() {
        let (law, _) = solve_mplp(&ramp(), &MplpLimits::default()).unwrap();
        assert_eq!(law.regions.len(), 2);
        assert!((eval_pwa(&law, &[-0.5]).unwrap()[0]).abs() < 1e-12);
        assert!((eval_pwa(&law, &[0.5]).unwrap()[0] - 0.5).abs() < 1e-12);
        assert!(eval_pwa(&law, &[0.0]).unwrap()[0].abs() < 1e-12);
        assert!(matches!(eval_pwa(&law, &[1.5]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn infeasible_domain_gives_empty_law() {
        let mut plp = ramp();
        plp.add_row(vec![1.0], -5.0, vec![0.0]);
        let (law, _) = solve_mplp(&plp, &MplpLimits::default()).unwrap();
        assert!(law.regions.is_empty());
    }

    #[test]
    fn too_many_parameters() {
        let plp = ParametricLp::new(vec![1.0], Polyhedron::from_box(&[0.0; 4], &[1.0; 4]));
        assert!(matches!(
            solve_mplp(&plp, &MplpLimits::default()),
            Err(Error::ScaleExceeded(_))
        ));
    }

    #[test]
    fn equality_rows() {
        // min z1 + 2 z2 s.t. z1 + z2 = θ, z >= 0, θ ∈ [0, 2]
        let mut plp = ParametricLp::new(vec![1.0, 2.0], Polyhedron::from_box(&[0.0], &[2.0]));
        plp.add_eq(vec![1.0, 1.0], 0.0, vec![1.0]);
        plp.add_row(vec![-1.0, 0.0], 0.0, vec![0.0]);
        plp.add_row(vec![0.0, -1.0], 0.0, vec![0.0]);
        let (law, _) = solve_mplp(&plp, &MplpLimits::default()).unwrap();
        for t in [0.0, 0.3, 1.7, 2.0] {
            let z = eval_pwa(&law, &[t]).unwrap();
            let direct = solve_lp(&plp.instantiate(&[t])).unwrap();
            assert!((z[0] - t).abs() < 1e-10 && z[1].abs() < 1e-10);
            assert!((law.value(&[t]).unwrap() - direct.objective).abs() < 1e-10);
        }
    }

    #[test]
    fn combination_order() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[5], vec![2, 3]);
        assert_eq!(binomial(22, 6), 74613);
    }

    #[test]
    fn exploration_matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..15 {
            let (d, p, rows) = (3, 2, 9);
            let mut plp = ParametricLp::new(
                (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                Polyhedron::from_box(&[-1.0; 2], &[1.0; 2]),
            );
            for t in 0..d {
                let mut w = vec![0.0; d];
                w[t] = 1.0;
                plp.add_row(w.clone(), 3.0, vec![0.0; p]);
                w[t] = -1.0;
                plp.add_row(w, 3.0, vec![0.0; p]);
            }
            for _ in 0..rows {
                plp.add_row(
                    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    rng.gen_range(0.5..1.5),
                    (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                );
            }
            let (full, _) = solve_mplp(&plp, &MplpLimits::default()).unwrap();
            let limits = MplpLimits {
                strategy: MplpStrategy::Explore,
                ..Default::default()
            };
            let (law, _) = solve_mplp(&plp, &limits).unwrap();
            for _ in 0..200 {
                let th = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                match (full.value(&th), solve_lp(&plp.instantiate(&th))) {
                    (Ok(v), Ok(sol)) => {
                        assert!((v - sol.objective).abs() < 1e-6);
                        let e = law.value(&th).expect("explored law covers the feasible set");
                        assert!((e - sol.objective).abs() < 1e-6, "{e} vs {}", sol.objective);
                    }
                    (_, Err(_)) => assert!(law.value(&th).is_err()),
                    (Err(_), Ok(_)) => {}
                }
            }
        }
    }
}
