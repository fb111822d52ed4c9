use serde::{Deserialize, Serialize};

use super::{dot, solve_lp, LinearProgram};

/// Halfspace representation `{θ : H θ <= h}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub dim: usize,
    #[serde(rename = "H")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "h")]
    pub b: Vec<f64>,
}

/// Cap on the Chebyshev radius so that unbounded sets still give a finite LP.
const RADIUS_CAP: f64 = 1e6;

impl Polyhedron {
    pub fn universe(dim: usize) -> Self {
        Self {
            dim,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        let dim = a.first().map_or(0, Vec::len);
        Self { dim, a, b }
    }

    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        let dim = lo.len();
        let mut p = Self::universe(dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            p.push(e.clone(), hi[i]);
            e[i] = -1.0;
            p.push(e, -lo[i]);
        }
        p
    }

    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.a.push(row);
        self.b.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn intersect(&self, other: &Polyhedron) -> Polyhedron {
        let mut p = self.clone();
        p.a.extend(other.a.iter().cloned());
        p.b.extend(other.b.iter().copied());
        p
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        self.a
            .iter()
            .zip(&self.b)
            .all(|(row, &b)| dot(row, theta) <= b + tol)
    }

    /// Center and radius of the largest inscribed ball, or `None` when the
    /// set is empty. The radius is capped for unbounded sets.
    pub fn chebyshev(&self) -> Option<(Vec<f64>, f64)> {
        let d = self.dim;
        let mut cost = vec![0.0; d + 1];
        cost[d] = -1.0;
        let mut lp = LinearProgram::new(cost).free();
        lp.set_bounds(d, 0.0, RADIUS_CAP);
        for (row, &b) in self.a.iter().zip(&self.b) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                if b < 0.0 {
                    return None;
                }
                continue;
            }
            let mut r = row.clone();
            r.push(norm);
            lp.add_le(r, b);
        }
        let sol = solve_lp(&lp).ok()?;
        let radius = sol.x[d];
        let mut center = sol.x;
        center.truncate(d);
        Some((center, radius))
    }

    pub fn is_full_dimensional(&self, min_radius: f64) -> bool {
        self.chebyshev().is_some_and(|(_, r)| r > min_radius)
    }

    /// Pieces of `self \ other`, obtained by flipping one facet of `other`
    /// at a time. Pieces thinner than `min_radius` are discarded.
    pub fn subtract(&self, other: &Polyhedron, min_radius: f64) -> Vec<Polyhedron> {
        let mut pieces = Vec::new();
        let mut acc = self.clone();
        for (row, &b) in other.a.iter().zip(&other.b) {
            let mut piece = acc.clone();
            piece.push(row.iter().map(|v| -v).collect(), -b);
            if piece.is_full_dimensional(min_radius) {
                pieces.push(piece);
            }
            acc.push(row.clone(), b);
            if !acc.is_full_dimensional(min_radius) {
                break;
            }
        }
        pieces
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_center() {
        let p = Polyhedron::from_box(&[0.0, 0.0], &[2.0, 1.0]);
        let (c, r) = p.chebyshev().unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        assert!((c[1] - 0.5).abs() < 1e-12);
        assert!(p.contains(&[2.0, 1.0], 0.0));
        assert!(!p.contains(&[2.1, 1.0], 1e-9));
    }

    #[test]
    fn empty_set() {
        let mut p = Polyhedron::from_box(&[0.0], &[1.0]);
        p.push(vec![1.0], -1.0);
        assert!(p.chebyshev().is_none());
    }

    #[test]
    fn subtraction_covers_difference() {
        let outer = Polyhedron::from_box(&[0.0, 0.0], &[2.0, 2.0]);
        let inner = Polyhedron::from_box(&[0.5, 0.5], &[1.0, 1.0]);
        let pieces = outer.subtract(&inner, 1e-9);
        for t in [[0.1, 0.1], [1.5, 0.7], [0.7, 1.9], [0.2, 0.7]] {
            let hits = pieces.iter().filter(|p| p.contains(&t, -1e-12)).count();
            assert_eq!(hits, 1, "{t:?}");
        }
        assert!(pieces.iter().all(|p| !p.contains(&[0.75, 0.75], -1e-9)));
    }
}
