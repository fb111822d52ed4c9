//! Batch runs over the bundled instances.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data;
use crate::error::{Error, Result};
use crate::gas::{
    build_lp1, solve_lp2, solve_nlp_reference, suboptimality_gap, BreakpointGrid, GasLineNetwork,
    GasScheme,
};
use crate::network::{InflowProfile, NetworkGraph};
use crate::sim::{relative_loss, simulate, Scheme};
use crate::traffic::LinearCost;

/// Configuration of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub trials: usize,
    pub seed: u64,
    pub weight_range: (u32, u32),
    pub horizons: Vec<usize>,
    pub breakpoints: Vec<usize>,
}

impl ExperimentSpec {
    pub fn sim1() -> Self {
        Self {
            id: "sim1".into(),
            trials: 1,
            seed: 0,
            weight_range: (0, 0),
            horizons: (1..=10).collect(),
            breakpoints: Vec::new(),
        }
    }

    pub fn random_loss(trials: usize, seed: u64) -> Self {
        Self {
            id: "random-loss".into(),
            trials,
            seed,
            weight_range: (1, 6),
            horizons: vec![20],
            breakpoints: Vec::new(),
        }
    }

    pub fn gas_demo() -> Self {
        Self {
            id: "gas-demo".into(),
            trials: 1,
            seed: 0,
            weight_range: (0, 0),
            horizons: Vec::new(),
            breakpoints: vec![3, 5, 9, 17],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be at least 1".into()));
        }
        if self.weight_range.0 > self.weight_range.1 {
            return Err(Error::InvalidInput("empty weight range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sim1Row {
    pub horizon: usize,
    pub uncontrolled: f64,
    pub decentralized: f64,
    pub centralized: f64,
    /// Relative loss of the decentralized scheme, percent.
    pub loss_decentralized: f64,
    pub loss_uncontrolled: f64,
    /// Total mass left at the end under the centralized scheme.
    pub final_mass: f64,
}

/// Sweeps the horizon over `1..=10` on the 3-cell line.
pub fn run_sim1() -> Result<Vec<Sim1Row>> {
    run_sim1_with(&ExperimentSpec::sim1().horizons)
}

pub fn run_sim1_with(horizons: &[usize]) -> Result<Vec<Sim1Row>> {
    let net = data::example1();
    let x0 = data::EXAMPLE1_X0;
    let lambda = InflowProfile::zero();
    horizons
        .iter()
        .map(|&n| {
            let cost = data::example1_cost(n);
            let run = |s| simulate(&net, &cost, s, &x0, &lambda);
            let cen = run(Scheme::Centralized)?;
            let dec = run(Scheme::Decentralized)?;
            let triv = run(Scheme::Trivial)?;
            Ok(Sim1Row {
                horizon: n,
                uncontrolled: triv.total_cost,
                decentralized: dec.total_cost,
                centralized: cen.total_cost,
                loss_decentralized: relative_loss(dec.total_cost, cen.total_cost)?,
                loss_uncontrolled: relative_loss(triv.total_cost, cen.total_cost)?,
                final_mass: cen.final_state().iter().sum(),
            })
        })
        .collect()
}

pub fn write_sim1_csv<W: Write>(out: W, rows: &[Sim1Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossTrial {
    pub trial: usize,
    pub alpha: Vec<f64>,
    pub centralized: f64,
    pub decentralized: f64,
    /// Percent.
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomLossReport {
    pub spec: ExperimentSpec,
    pub trials: Vec<LossTrial>,
    pub histogram: Vec<HistogramBin>,
    /// Share of trials with loss below 2 percent.
    pub share_below_2: f64,
}

/// Draws integer state weights in `weight_range` per trial and compares the
/// centralized and decentralized rollouts from `x0` with zero inflow.
pub fn run_random_loss(
    net: &NetworkGraph,
    x0: &[f64],
    spec: &ExperimentSpec,
) -> Result<RandomLossReport> {
    spec.validate()?;
    let horizon = *spec.horizons.first().unwrap_or(&20);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.weight_range;
    let alphas: Vec<Vec<f64>> = (0..spec.trials)
        .map(|_| (0..net.len()).map(|_| rng.gen_range(lo..=hi) as f64).collect())
        .collect();
    let lambda = InflowProfile::zero();
    let trials = alphas
        .into_par_iter()
        .enumerate()
        .map(|(t, alpha)| {
            let cost = LinearCost::state_only(&alpha, horizon);
            let cen = simulate(net, &cost, Scheme::Centralized, x0, &lambda)?;
            let dec = simulate(net, &cost, Scheme::Decentralized, x0, &lambda)?;
            Ok(LossTrial {
                trial: t,
                alpha,
                centralized: cen.total_cost,
                decentralized: dec.total_cost,
                loss: relative_loss(dec.total_cost, cen.total_cost)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let losses: Vec<f64> = trials.iter().map(|t| t.loss).collect();
    let share_below_2 = losses.iter().filter(|&&e| e < 2.0).count() as f64 / losses.len() as f64;
    Ok(RandomLossReport {
        spec: spec.clone(),
        histogram: histogram(&losses, 0.5),
        trials,
        share_below_2,
    })
}

/// Bins of fixed `width` starting at the multiple of `width` at or below the
/// smallest value.
pub fn histogram(values: &[f64], width: f64) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (min / width).floor() * width;
    let bins = (((max - start) / width).floor() as usize) + 1;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: start + b as f64 * width,
            hi: start + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let b = (((v - start) / width).floor() as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

pub fn write_loss_csv<W: Write>(out: W, report: &RandomLossReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "alpha", "centralized", "decentralized", "loss"])?;
    for t in &report.trials {
        let alpha: Vec<String> = t.alpha.iter().map(|a| a.to_string()).collect();
        w.write_record([
            t.trial.to_string(),
            alpha.join(" "),
            t.centralized.to_string(),
            t.decentralized.to_string(),
            t.loss.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(out: W, bins: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lp2Entry {
    pub breakpoints: usize,
    pub objective: f64,
    pub delta: f64,
    /// Gap of the LP1 value relative to this entry.
    pub gap: f64,
    /// `|objective - reference|`.
    pub error: f64,
}

/// Outcome of one method; failures are kept as messages.
pub type Outcome<T> = std::result::Result<T, String>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RolloutSummary {
    pub cost: f64,
    pub feasible: bool,
    pub worst_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GasDemoReport {
    pub spec: ExperimentSpec,
    pub lp1: Outcome<f64>,
    pub reference: Outcome<f64>,
    pub lp2: Vec<Outcome<Lp2Entry>>,
    pub centralized: Outcome<RolloutSummary>,
    pub decentralized: Outcome<RolloutSummary>,
}

pub fn run_gas_demo(gas: &GasLineNetwork, spec: &ExperimentSpec) -> Result<GasDemoReport> {
    gas.validate()?;
    let x = &gas.initial_pressure;
    let lp1 = build_lp1(gas, 0)
        .and_then(|lp| lp.solve(x))
        .map(|(_, j)| j)
        .map_err(|e| e.to_string());
    let reference = solve_nlp_reference(gas, 0, x, 1e-9, 500)
        .map(|r| r.objective)
        .map_err(|e| e.to_string());
    let lp2 = spec
        .breakpoints
        .iter()
        .map(|&m| {
            let s = solve_lp2(gas, 0, x, &BreakpointGrid::uniform(m)).map_err(|e| e.to_string())?;
            Ok(Lp2Entry {
                breakpoints: m,
                objective: s.objective,
                delta: s.delta,
                gap: lp1.as_ref().map_or(f64::NAN, |&j| suboptimality_gap(j, s.objective)),
                error: reference.as_ref().map_or(f64::NAN, |&r| (s.objective - r).abs()),
            })
        })
        .collect();
    let rollout = |scheme| {
        gas.simulate(scheme)
            .map(|traj| {
                let report = gas.check_feasibility_nonconvex(&traj);
                RolloutSummary {
                    cost: traj.cost,
                    feasible: report.is_feasible(),
                    worst_violation: report.worst(),
                }
            })
            .map_err(|e| e.to_string())
    };
    Ok(GasDemoReport {
        spec: spec.clone(),
        lp1,
        reference,
        lp2,
        centralized: rollout(GasScheme::Centralized),
        decentralized: rollout(GasScheme::Decentralized),
    })
}

pub fn write_gas_csv<W: Write>(out: W, report: &GasDemoReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "breakpoints", "objective", "delta", "gap", "error", "status"])?;
    let num = |v: f64| v.to_string();
    let row = |name: &str, o: &Outcome<f64>| match o {
        Ok(j) => [name.into(), String::new(), num(*j), String::new(), String::new(), String::new(), "ok".into()],
        Err(e) => [name.into(), String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()],
    };
    w.write_record(row("lp1", &report.lp1))?;
    w.write_record(row("reference", &report.reference))?;
    for (m, e) in report.spec.breakpoints.iter().zip(&report.lp2) {
        match e {
            Ok(e) => w.write_record([
                "lp2".into(),
                m.to_string(),
                num(e.objective),
                num(e.delta),
                num(e.gap),
                num(e.error),
                "ok".to_string(),
            ])?,
            Err(msg) => w.write_record([
                "lp2".into(),
                m.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                msg.clone(),
            ])?,
        }
    }
    for (name, r) in [("centralized", &report.centralized), ("decentralized", &report.decentralized)] {
        let o = r.as_ref().map(|s| s.cost).map_err(Clone::clone);
        let mut rec = row(name, &o);
        if let Ok(s) = r {
            rec[6] = if s.feasible { "feasible".into() } else { format!("violation {}", s.worst_violation) };
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sim1_summary(rows: &[Sim1Row]) -> String {
    let mut s = String::from("   N   uncontrolled  decentralized    centralized   loss_dec%   final_mass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>4} {:>14.6} {:>14.6} {:>14.6} {:>11.4} {:>12.3e}",
            r.horizon, r.uncontrolled, r.decentralized, r.centralized, r.loss_decentralized, r.final_mass
        );
    }
    s
}

pub fn random_loss_summary(report: &RandomLossReport) -> String {
    let mut losses: Vec<f64> = report.trials.iter().map(|t| t.loss).collect();
    losses.sort_by(f64::total_cmp);
    let q = |p: f64| losses[((p * (losses.len() - 1) as f64).round()) as usize];
    let mut s = format!(
        "trials {} seed {} weights {}..={}\nmin {:.4}% median {:.4}% p95 {:.4}% max {:.4}%\nshare below 2%: {:.2}\n",
        report.trials.len(),
        report.spec.seed,
        report.spec.weight_range.0,
        report.spec.weight_range.1,
        q(0.0),
        q(0.5),
        q(0.95),
        q(1.0),
        report.share_below_2
    );
    for b in &report.histogram {
        let _ = writeln!(s, "[{:>6.2}, {:>6.2}) {}", b.lo, b.hi, b.count);
    }
    s
}

pub fn gas_summary(report: &GasDemoReport) -> String {
    let show = |o: &Outcome<f64>| match o {
        Ok(v) => format!("{v:.6}"),
        Err(e) => format!("failed: {e}"),
    };
    let mut s = format!("lp1 {}\nreference {}\n", show(&report.lp1), show(&report.reference));
    for (m, e) in report.spec.breakpoints.iter().zip(&report.lp2) {
        match e {
            Ok(e) => {
                let _ = writeln!(
                    s,
                    "lp2 m={m:<3} {:.6} delta {:.3e} gap {:.4} error {:.3e}",
                    e.objective, e.delta, e.gap, e.error
                );
            }
            Err(msg) => {
                let _ = writeln!(s, "lp2 m={m:<3} failed: {msg}");
            }
        }
    }
    for (name, r) in [("centralized", &report.centralized), ("decentralized", &report.decentralized)] {
        let _ = match r {
            Ok(r) => writeln!(s, "{name} rollout {:.6} feasible {}", r.cost, r.feasible),
            Err(e) => writeln!(s, "{name} rollout failed: {e}"),
        };
    }
    s
}
