//! Cell-transmission network model.
//!
//! Cells are indexed from zero in memory and from one in network files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol::TOL;

/// Jam density; on-ramps may be unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JamDensity {
    Finite(f64),
    Infinite,
}

impl JamDensity {
    pub fn finite(self) -> Option<f64> {
        match self {
            JamDensity::Finite(g) => Some(g),
            JamDensity::Infinite => None,
        }
    }
}

impl Serialize for JamDensity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            JamDensity::Finite(g) => s.serialize_f64(*g),
            JamDensity::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for JamDensity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(g) => Ok(JamDensity::Finite(g)),
            Repr::Text(t) if t.eq_ignore_ascii_case("inf") => Ok(JamDensity::Infinite),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "jam density must be a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub length: f64,
    #[serde(rename = "v")]
    pub free_flow_speed: f64,
    #[serde(rename = "w")]
    pub backward_wave_speed: f64,
    pub gamma: JamDensity,
    pub capacity: f64,
}

impl CellParams {
    pub fn new(length: f64, v: f64, w: f64, gamma: JamDensity, capacity: f64) -> Self {
        Self {
            length,
            free_flow_speed: v,
            backward_wave_speed: w,
            gamma,
            capacity,
        }
    }

    /// Largest admissible mass `γℓ`, infinite for unbounded cells.
    pub fn max_mass(&self) -> f64 {
        self.gamma
            .finite()
            .map_or(f64::INFINITY, |g| g * self.length)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGraph {
    pub cells: Vec<CellParams>,
    /// Dense split-ratio matrix `R[i][j]`.
    pub split: Vec<Vec<f64>>,
    pub on_ramps: Vec<usize>,
    pub off_ramps: Vec<usize>,
    pub sampling_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JunctionType {
    Ordinary,
    Merge,
    Diverge,
}

impl fmt::Display for JunctionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JunctionType::Ordinary => "ordinary",
            JunctionType::Merge => "merge",
            JunctionType::Diverge => "diverge",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Junction {
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
}

pub fn junction_type(j: &Junction) -> Result<JunctionType> {
    match (j.incoming.len(), j.outgoing.len()) {
        (1, 1) => Ok(JunctionType::Ordinary),
        (a, 1) if a > 1 => Ok(JunctionType::Merge),
        (1, b) if b > 1 => Ok(JunctionType::Diverge),
        _ => Err(Error::UnsupportedTopology {
            incoming: j.incoming.clone(),
            outgoing: j.outgoing.clone(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub predecessors: Vec<usize>,
    pub successors: Vec<usize>,
    /// Cells other than `i` at the downstream junction of `i`.
    pub one_hop: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    EmptyNetwork,
    NonPositiveParameter { cell: usize, field: &'static str, value: f64 },
    UnboundedJamDensity { cell: usize },
    Cfl { cell: usize, speed: &'static str, ratio: f64 },
    SplitOutOfRange { from: usize, to: usize, value: f64 },
    SelfLoop { cell: usize },
    SplitRowSum { cell: usize, sum: f64 },
    OffRampWithSuccessors { cell: usize },
    OnRampWithPredecessors { cell: usize },
    RampIndexOutOfRange { index: usize },
    NonPositiveSamplingTime { value: f64 },
    UnsupportedJunction { incoming: Vec<usize>, outgoing: Vec<usize> },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Cell numbers are printed one-based, as in network files.
        use ValidationIssue::*;
        let one = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
        match self {
            EmptyNetwork => write!(f, "network has no cells"),
            NonPositiveParameter { cell, field, value } => {
                write!(f, "cell {}: {field} = {value} must be positive", cell + 1)
            }
            UnboundedJamDensity { cell } => {
                write!(f, "cell {}: infinite jam density on a non-source cell", cell + 1)
            }
            Cfl { cell, speed, ratio } => write!(
                f,
                "cell {}: {speed} speed times sampling time is {ratio:.4} cell lengths (must be <= 1)",
                cell + 1
            ),
            SplitOutOfRange { from, to, value } => write!(
                f,
                "split ratio {} -> {} = {value} outside [0, 1]",
                from + 1,
                to + 1
            ),
            SelfLoop { cell } => write!(f, "cell {} feeds itself", cell + 1),
            SplitRowSum { cell, sum } => {
                write!(f, "cell {}: split ratios sum to {sum}, expected 1", cell + 1)
            }
            OffRampWithSuccessors { cell } => {
                write!(f, "cell {}: sink cell has downstream cells", cell + 1)
            }
            OnRampWithPredecessors { cell } => {
                write!(f, "cell {}: source cell has upstream cells", cell + 1)
            }
            RampIndexOutOfRange { index } => write!(f, "ramp index {} out of range", index + 1),
            NonPositiveSamplingTime { value } => {
                write!(f, "sampling time {value} must be positive")
            }
            UnsupportedJunction { incoming, outgoing } => write!(
                f,
                "junction with incoming {:?} and outgoing {:?} is both a merge and a diverge",
                one(incoming),
                one(outgoing)
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let text: Vec<String> = self.issues.iter().map(ToString::to_string).collect();
        Err(Error::InvalidInput(text.join("; ")))
    }
}

/// One linear flow constraint `Σ a_q u_q <= constant + Σ b_i x_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRow {
    pub kind: RowKind,
    pub controls: Vec<(usize, f64)>,
    pub states: Vec<(usize, f64)>,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowKind {
    Nonnegative(usize),
    Demand(usize),
    Capacity(usize),
    /// Supply of the downstream cell `to` limits flow out of `from`.
    Supply { from: usize, to: usize },
    DownstreamCapacity { from: usize, to: usize },
    MergeSupply(usize),
    MergeCapacity(usize),
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use RowKind::*;
        match *self {
            Nonnegative(i) => write!(f, "u_{} >= 0", i + 1),
            Demand(i) => write!(f, "demand of cell {}", i + 1),
            Capacity(i) => write!(f, "capacity of cell {}", i + 1),
            Supply { from, to } => write!(f, "supply of cell {} for cell {}", to + 1, from + 1),
            DownstreamCapacity { from, to } => {
                write!(f, "capacity of cell {} for cell {}", to + 1, from + 1)
            }
            MergeSupply(q) => write!(f, "merge supply of cell {}", q + 1),
            MergeCapacity(q) => write!(f, "merge capacity of cell {}", q + 1),
        }
    }
}

impl FlowRow {
    pub fn lhs(&self, u: &[f64]) -> f64 {
        self.controls.iter().map(|&(q, a)| a * u[q]).sum()
    }

    pub fn rhs(&self, x: &[f64]) -> f64 {
        self.constant + self.states.iter().map(|&(i, b)| b * x[i]).sum::<f64>()
    }

    pub fn violation(&self, x: &[f64], u: &[f64]) -> f64 {
        self.lhs(u) - self.rhs(x)
    }
}

/// Per-control upper limits at a given state.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowBounds {
    /// `ū_i`: for merge-incoming cells, only the cell's own demand and capacity.
    pub upper: Vec<f64>,
    /// `(incoming cells, shared limit)` for every merge junction.
    pub merges: Vec<(Vec<usize>, f64)>,
}

impl NetworkGraph {
    /// Builds a network from zero-based sparse split ratios. Row sums within
    /// tolerance of one are renormalized; nothing else is validated here.
    pub fn new(
        cells: Vec<CellParams>,
        splits: &[(usize, usize, f64)],
        on_ramps: Vec<usize>,
        off_ramps: Vec<usize>,
        sampling_time: f64,
    ) -> Result<Self> {
        let n = cells.len();
        let mut split = vec![vec![0.0; n]; n];
        for &(i, j, r) in splits {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "split ratio {} -> {} refers to a missing cell",
                    i + 1,
                    j + 1
                )));
            }
            split[i][j] += r;
        }
        let mut net = Self {
            cells,
            split,
            on_ramps,
            off_ramps,
            sampling_time,
        };
        net.on_ramps.sort_unstable();
        net.on_ramps.dedup();
        net.off_ramps.sort_unstable();
        net.off_ramps.dedup();
        net.renormalize();
        Ok(net)
    }

    /// Splits every diverge evenly along the given edges.
    pub fn with_uniform_splits(
        cells: Vec<CellParams>,
        edges: &[(usize, usize)],
        on_ramps: Vec<usize>,
        off_ramps: Vec<usize>,
        sampling_time: f64,
    ) -> Result<Self> {
        let mut out_degree: BTreeMap<usize, usize> = BTreeMap::new();
        for &(i, _) in edges {
            *out_degree.entry(i).or_default() += 1;
        }
        let splits: Vec<_> = edges
            .iter()
            .map(|&(i, j)| (i, j, 1.0 / out_degree[&i] as f64))
            .collect();
        Self::new(cells, &splits, on_ramps, off_ramps, sampling_time)
    }

    fn renormalize(&mut self) {
        for row in &mut self.split {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 && (sum - 1.0).abs() <= TOL.split_sum {
                row.iter_mut().for_each(|r| *r /= sum);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_on_ramp(&self, i: usize) -> bool {
        self.on_ramps.binary_search(&i).is_ok()
    }

    pub fn is_off_ramp(&self, i: usize) -> bool {
        self.off_ramps.binary_search(&i).is_ok()
    }

    pub fn successors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.split[i][j] > 0.0).collect()
    }

    pub fn predecessors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.split[q][i] > 0.0).collect()
    }

    /// Junctions with at least one incoming and one outgoing cell, derived
    /// from the split-ratio sparsity pattern. Sorted by smallest incoming cell.
    pub fn junctions(&self) -> Vec<Junction> {
        let n = self.len();
        // Node 2i is the tail of cell i, node 2i+1 its head.
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(p: &mut [usize], mut a: usize) -> usize {
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        for i in 0..n {
            for j in self.successors(i) {
                let (a, b) = (find(&mut parent, 2 * i + 1), find(&mut parent, 2 * j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: BTreeMap<usize, Junction> = BTreeMap::new();
        for i in 0..n {
            let head = find(&mut parent, 2 * i + 1);
            let tail = find(&mut parent, 2 * i);
            groups
                .entry(head)
                .or_insert_with(|| Junction {
                    incoming: Vec::new(),
                    outgoing: Vec::new(),
                })
                .incoming
                .push(i);
            groups
                .entry(tail)
                .or_insert_with(|| Junction {
                    incoming: Vec::new(),
                    outgoing: Vec::new(),
                })
                .outgoing
                .push(i);
        }
        let mut out: Vec<Junction> = groups
            .into_values()
            .filter(|j| !j.incoming.is_empty() && !j.outgoing.is_empty())
            .collect();
        out.sort_by_key(|j| j.incoming[0]);
        out
    }

    /// The junction at the downstream end of cell `i`, if it has one.
    pub fn head_junction(&self, i: usize) -> Option<Junction> {
        self.junctions().into_iter().find(|j| j.incoming.contains(&i))
    }

    pub fn neighborhoods(&self, i: usize) -> Neighborhood {
        let one_hop = match self.head_junction(i) {
            Some(j) if !self.is_off_ramp(i) => {
                let mut d: Vec<usize> = j
                    .incoming
                    .iter()
                    .chain(&j.outgoing)
                    .copied()
                    .filter(|&c| c != i)
                    .collect();
                d.sort_unstable();
                d.dedup();
                d
            }
            _ => Vec::new(),
        };
        Neighborhood {
            predecessors: self.predecessors(i),
            successors: self.successors(i),
            one_hop,
        }
    }

    /// Structural constraint rows on one control block, ordered by cell.
    pub fn flow_rows(&self) -> Vec<FlowRow> {
        let n = self.len();
        let mut rows = Vec::new();
        let junctions = self.junctions();
        let merge_of = |i: usize| {
            junctions
                .iter()
                .find(|j| j.incoming.contains(&i) && j.incoming.len() > 1)
        };
        for i in 0..n {
            let c = &self.cells[i];
            rows.push(FlowRow {
                kind: RowKind::Nonnegative(i),
                controls: vec![(i, -1.0)],
                states: Vec::new(),
                constant: 0.0,
            });
            rows.push(FlowRow {
                kind: RowKind::Demand(i),
                controls: vec![(i, 1.0)],
                states: vec![(i, c.free_flow_speed / c.length)],
                constant: 0.0,
            });
            rows.push(FlowRow {
                kind: RowKind::Capacity(i),
                controls: vec![(i, 1.0)],
                states: Vec::new(),
                constant: c.capacity,
            });
            if merge_of(i).is_some() {
                continue;
            }
            for j in self.successors(i) {
                let r = self.split[i][j];
                let d = &self.cells[j];
                if let Some(gamma) = d.gamma.finite() {
                    rows.push(FlowRow {
                        kind: RowKind::Supply { from: i, to: j },
                        controls: vec![(i, r)],
                        states: vec![(j, -d.backward_wave_speed / d.length)],
                        constant: d.backward_wave_speed * gamma,
                    });
                }
                rows.push(FlowRow {
                    kind: RowKind::DownstreamCapacity { from: i, to: j },
                    controls: vec![(i, r)],
                    states: Vec::new(),
                    constant: d.capacity,
                });
            }
        }
        for j in &junctions {
            if j.incoming.len() < 2 || j.outgoing.len() != 1 {
                continue;
            }
            let q = j.outgoing[0];
            let d = &self.cells[q];
            let controls: Vec<(usize, f64)> = j.incoming.iter().map(|&i| (i, 1.0)).collect();
            if let Some(gamma) = d.gamma.finite() {
                rows.push(FlowRow {
                    kind: RowKind::MergeSupply(q),
                    controls: controls.clone(),
                    states: vec![(q, -d.backward_wave_speed / d.length)],
                    constant: d.backward_wave_speed * gamma,
                });
            }
            rows.push(FlowRow {
                kind: RowKind::MergeCapacity(q),
                controls,
                states: Vec::new(),
                constant: d.capacity,
            });
        }
        rows
    }

    pub fn flow_bounds(&self, x: &[f64]) -> FlowBounds {
        let n = self.len();
        let mut upper = vec![f64::INFINITY; n];
        let mut merges = Vec::new();
        for row in self.flow_rows() {
            match row.kind {
                RowKind::Nonnegative(_) => {}
                RowKind::MergeSupply(_) | RowKind::MergeCapacity(_) => {
                    let cells: Vec<usize> = row.controls.iter().map(|&(q, _)| q).collect();
                    let rhs = row.rhs(x).max(0.0);
                    match merges.iter_mut().find(|(c, _)| *c == cells) {
                        Some((_, lim)) => *lim = f64::min(*lim, rhs),
                        None => merges.push((cells, rhs)),
                    }
                }
                _ => {
                    let (q, a) = row.controls[0];
                    upper[q] = upper[q].min(row.rhs(x).max(0.0) / a);
                }
            }
        }
        FlowBounds { upper, merges }
    }

    /// `y_i = λ_i` on sources, `Σ_q R_qi u_q` elsewhere.
    pub fn inflow_rates(&self, u: &[f64], lambda: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                if self.is_on_ramp(i) {
                    lambda.get(i).copied().unwrap_or(0.0)
                } else {
                    (0..n).map(|q| self.split[q][i] * u[q]).sum()
                }
            })
            .collect()
    }

    /// First flow row violated beyond the feasibility tolerance.
    pub fn check_flows(&self, x: &[f64], u: &[f64]) -> Result<()> {
        for row in self.flow_rows() {
            let scale = 1.0 + row.rhs(x).abs();
            let v = row.violation(x, u);
            if v > TOL.feasibility * scale {
                return Err(Error::ConstraintViolation {
                    step: None,
                    constraint: row.kind.to_string(),
                    amount: v,
                });
            }
        }
        Ok(())
    }

    pub fn step_dynamics(&self, x: &[f64], u: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        for (what, v) in [("state", x.len()), ("control", u.len())] {
            if v != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: v,
                });
            }
        }
        self.check_flows(x, u)?;
        let y = self.inflow_rates(u, lambda);
        Ok((0..n)
            .map(|i| x[i] + self.sampling_time * (y[i] - u[i]))
            .collect())
    }

    pub fn validate(&self) -> ValidationReport {
        use ValidationIssue::*;
        let n = self.len();
        let mut issues = Vec::new();
        if n == 0 {
            issues.push(EmptyNetwork);
        }
        if !(self.sampling_time > 0.0) {
            issues.push(NonPositiveSamplingTime {
                value: self.sampling_time,
            });
        }
        for &r in self.on_ramps.iter().chain(&self.off_ramps) {
            if r >= n {
                issues.push(RampIndexOutOfRange { index: r });
            }
        }
        for (i, c) in self.cells.iter().enumerate() {
            let gamma = c.gamma.finite();
            for (field, value) in [
                ("length", c.length),
                ("free-flow speed", c.free_flow_speed),
                ("backward wave speed", c.backward_wave_speed),
                ("capacity", c.capacity),
                ("jam density", gamma.unwrap_or(1.0)),
            ] {
                if !(value > 0.0) {
                    issues.push(NonPositiveParameter {
                        cell: i,
                        field,
                        value,
                    });
                }
            }
            if gamma.is_none() && !self.is_on_ramp(i) {
                issues.push(UnboundedJamDensity { cell: i });
            }
            if c.length > 0.0 && self.sampling_time > 0.0 {
                for (speed, v) in [
                    ("free-flow", c.free_flow_speed),
                    ("backward wave", c.backward_wave_speed),
                ] {
                    let ratio = v * self.sampling_time / c.length;
                    if ratio > 1.0 + 1e-12 {
                        issues.push(Cfl {
                            cell: i,
                            speed,
                            ratio,
                        });
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let r = self.split[i][j];
                if !(0.0..=1.0).contains(&r) {
                    issues.push(SplitOutOfRange {
                        from: i,
                        to: j,
                        value: r,
                    });
                }
            }
            if self.split[i][i] != 0.0 {
                issues.push(SelfLoop { cell: i });
            }
            let sum: f64 = self.split[i].iter().sum();
            if self.is_off_ramp(i) {
                if sum != 0.0 {
                    issues.push(OffRampWithSuccessors { cell: i });
                }
            } else if (sum - 1.0).abs() > TOL.split_sum {
                issues.push(SplitRowSum { cell: i, sum });
            }
            if self.is_on_ramp(i) && !self.predecessors(i).is_empty() {
                issues.push(OnRampWithPredecessors { cell: i });
            }
        }
        for j in self.junctions() {
            if junction_type(&j).is_err() {
                issues.push(UnsupportedJunction {
                    incoming: j.incoming,
                    outgoing: j.outgoing,
                });
            }
        }
        ValidationReport { issues }
    }

    /// Checks `0 <= x_i <= γ_i ℓ_i` up to the feasibility tolerance.
    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.len(),
                got: x.len(),
            });
        }
        for (i, (&xi, c)) in x.iter().zip(&self.cells).enumerate() {
            let cap = c.max_mass();
            let tol = TOL.feasibility * (1.0 + cap.min(xi.abs().max(1.0)));
            if xi < -tol || xi > cap + tol || !xi.is_finite() {
                return Err(Error::ConstraintViolation {
                    step: None,
                    constraint: format!("mass bounds of cell {}", i + 1),
                    amount: if xi < 0.0 { -xi } else { xi - cap },
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.into_network()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from(self))?)
    }

    /// Reads and validates a network file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let net = Self::from_json(&std::fs::read_to_string(path)?)?;
        net.validate().into_result()?;
        Ok(net)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkFile {
    pub cells: Vec<CellParams>,
    pub split_ratios: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub on_ramps: Vec<usize>,
    #[serde(default)]
    pub off_ramps: Vec<usize>,
    pub sampling_time: f64,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<NetworkGraph> {
        let zero = |v: usize, what: &str| {
            v.checked_sub(1)
                .ok_or_else(|| Error::InvalidInput(format!("{what} indices are one-based")))
        };
        let splits = self
            .split_ratios
            .iter()
            .map(|&(i, j, r)| Ok((zero(i, "cell")?, zero(j, "cell")?, r)))
            .collect::<Result<Vec<_>>>()?;
        let on = self
            .on_ramps
            .iter()
            .map(|&i| zero(i, "on-ramp"))
            .collect::<Result<Vec<_>>>()?;
        let off = self
            .off_ramps
            .iter()
            .map(|&i| zero(i, "off-ramp"))
            .collect::<Result<Vec<_>>>()?;
        NetworkGraph::new(self.cells, &splits, on, off, self.sampling_time)
    }
}

impl From<&NetworkGraph> for NetworkFile {
    fn from(net: &NetworkGraph) -> Self {
        let n = net.len();
        let mut split_ratios = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if net.split[i][j] != 0.0 {
                    split_ratios.push((i + 1, j + 1, net.split[i][j]));
                }
            }
        }
        Self {
            cells: net.cells.clone(),
            split_ratios,
            on_ramps: net.on_ramps.iter().map(|i| i + 1).collect(),
            off_ramps: net.off_ramps.iter().map(|i| i + 1).collect(),
            sampling_time: net.sampling_time,
        }
    }
}

/// Exogenous inflow rates, one series per cell (zero for non-sources and
/// past the end of a series).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InflowProfile {
    pub rates: BTreeMap<usize, Vec<f64>>,
}

#[derive(Deserialize, Serialize)]
struct InflowEntry {
    cell: usize,
    values: Vec<f64>,
}

impl InflowProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn at(&self, k: usize, n: usize) -> Vec<f64> {
        let mut lam = vec![0.0; n];
        for (&i, series) in &self.rates {
            if i < n {
                lam[i] = series.get(k).copied().unwrap_or(0.0);
            }
        }
        lam
    }

    pub fn is_zero(&self) -> bool {
        self.rates.values().all(|s| s.iter().all(|&v| v == 0.0))
    }

    pub fn validate(&self, net: &NetworkGraph) -> Result<()> {
        for (&i, series) in &self.rates {
            if !net.is_on_ramp(i) {
                if series.iter().any(|&v| v != 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "inflow given for cell {}, which is not a source",
                        i + 1
                    )));
                }
                continue;
            }
            let cap = net.cells[i].capacity;
            if let Some(v) = series.iter().find(|&&v| !(0.0..=cap).contains(&v)) {
                return Err(Error::InvalidInput(format!(
                    "inflow {v} into cell {} outside [0, {cap}]",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<InflowEntry> = serde_json::from_str(text)?;
        let mut rates = BTreeMap::new();
        for e in entries {
            let i = e
                .cell
                .checked_sub(1)
                .ok_or_else(|| Error::InvalidInput("inflow cell indices are one-based".into()))?;
            rates.insert(i, e.values);
        }
        Ok(Self { rates })
    }

    pub fn to_json(&self) -> Result<String> {
        let entries: Vec<InflowEntry> = self
            .rates
            .iter()
            .map(|(&i, v)| InflowEntry {
                cell: i + 1,
                values: v.clone(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&entries)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(v: f64) -> CellParams {
        CellParams::new(1.0, v, 0.3, JamDensity::Finite(1.0 / 0.3), 100.0)
    }

    pub(crate) fn line3() -> NetworkGraph {
        NetworkGraph::new(
            vec![cell(0.9); 3],
            &[(0, 1, 1.0), (1, 2, 1.0)],
            vec![],
            vec![2],
            1.0,
        )
        .unwrap()
    }

    // Cells 1,2 merge into 3; 3 -> 4; 4 diverges to 5 (0.3) and 6 (0.7).
    fn fig5() -> NetworkGraph {
        NetworkGraph::new(
            vec![cell(0.9); 6],
            &[(0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 0.3), (3, 5, 0.7)],
            vec![],
            vec![4, 5],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn line_is_valid() {
        assert!(line3().validate().is_valid());
    }

    #[test]
    fn cfl_violation_reported() {
        let net = NetworkGraph::new(
            vec![CellParams::new(1.0, 2.0, 0.5, JamDensity::Finite(5.0), 1.0)],
            &[],
            vec![],
            vec![0],
            1.0,
        )
        .unwrap();
        let report = net.validate();
        assert!(matches!(report.issues[..], [ValidationIssue::Cfl { cell: 0, .. }]));
    }

    #[test]
    fn junction_classification() {
        let net = fig5();
        assert!(net.validate().is_valid());
        let types: Vec<_> = net
            .junctions()
            .iter()
            .map(|j| junction_type(j).unwrap())
            .collect();
        assert_eq!(
            types,
            vec![JunctionType::Merge, JunctionType::Ordinary, JunctionType::Diverge]
        );
        let d4 = net.neighborhoods(3);
        assert_eq!(d4.predecessors, vec![2]);
        assert_eq!(d4.successors, vec![4, 5]);
        assert_eq!(d4.one_hop, vec![4, 5]);
        assert_eq!(net.neighborhoods(0).one_hop, vec![1, 2]);
        assert!(net.neighborhoods(5).one_hop.is_empty());
    }

    #[test]
    fn mixed_junction_rejected() {
        let net = NetworkGraph::new(
            vec![cell(0.9); 4],
            &[(0, 2, 0.5), (0, 3, 0.5), (1, 2, 1.0)],
            vec![],
            vec![2, 3],
            1.0,
        )
        .unwrap();
        let j = net.junctions();
        assert_eq!(j.len(), 1);
        assert!(matches!(
            junction_type(&j[0]),
            Err(Error::UnsupportedTopology { .. })
        ));
        assert!(!net.validate().is_valid());
    }

    #[test]
    fn split_rows_renormalized() {
        let net = NetworkGraph::new(
            vec![cell(0.9); 3],
            &[(0, 1, 0.3 + 5e-10), (0, 2, 0.7)],
            vec![],
            vec![1, 2],
            1.0,
        )
        .unwrap();
        assert!((net.split[0].iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(net.validate().is_valid());
    }

    #[test]
    fn bounds_at_reference_state() {
        let b = line3().flow_bounds(&[1.0, 0.5, 0.1]);
        assert!((b.upper[0] - 0.85).abs() < 1e-12);
        assert!((b.upper[1] - 0.45).abs() < 1e-12);
        assert!((b.upper[2] - 0.09).abs() < 1e-12);
        let jam = line3().flow_bounds(&[1.0, 1.0 / 0.3, 0.0]);
        assert!(jam.upper[0].abs() < 1e-12);
    }

    #[test]
    fn merge_inflow_and_bounds() {
        let net = fig5();
        let y = net.inflow_rates(&[0.2, 0.3, 0.0, 1.0, 0.0, 0.0], &[]);
        assert!((y[2] - 0.5).abs() < 1e-15);
        assert!((y[4] - 0.3).abs() < 1e-15 && (y[5] - 0.7).abs() < 1e-15);
        let b = net.flow_bounds(&[1.0, 1.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.merges.len(), 1);
        assert!((b.merges[0].1 - 0.1).abs() < 1e-12);
        assert!((b.upper[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn step_and_violation() {
        let net = line3();
        let x = net.step_dynamics(&[1.0, 0.5, 0.1], &[0.85, 0.45, 0.09], &[]).unwrap();
        assert!((x[0] - 0.15).abs() < 1e-12);
        assert!((x[1] - 0.9).abs() < 1e-12);
        assert!((x[2] - 0.46).abs() < 1e-12);
        let err = net
            .step_dynamics(&[1.0, 0.5, 0.1], &[0.95, 0.0, 0.0], &[])
            .unwrap_err();
        assert!(err.to_string().contains("demand of cell 1"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let net = fig5();
        let text = net.to_json().unwrap();
        assert_eq!(NetworkGraph::from_json(&text).unwrap(), net);
        let on = r#"{"cells":[{"length":1,"v":0.5,"w":0.5,"gamma":"inf","capacity":1},
            {"length":1,"v":0.5,"w":0.5,"gamma":2,"capacity":1}],
            "split_ratios":[[1,2,1.0]],"on_ramps":[1],"off_ramps":[2],"sampling_time":1}"#;
        let net = NetworkGraph::from_json(on).unwrap();
        assert_eq!(net.cells[0].gamma, JamDensity::Infinite);
        assert!(net.validate().is_valid());
        assert!(net.to_json().unwrap().contains("\"inf\""));
    }

    #[test]
    fn inflow_profile_file() {
        let p = InflowProfile::from_json(r#"[{"cell": 1, "values": [0.5, 0.25]}]"#).unwrap();
        assert_eq!(p.at(1, 2), vec![0.25, 0.0]);
        assert_eq!(p.at(5, 2), vec![0.0, 0.0]);
    }
}
