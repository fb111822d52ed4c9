use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use flownet::experiments::{self, ExperimentSpec};
use flownet::gas::{solve_lp2, BreakpointGrid, GasLineNetwork, GasScheme, GasTrajectory};
use flownet::lp::MplpLimits;
use flownet::sim::write_trace_csv;
use flownet::traffic::{check_thm3_conditions, synthesize_explicit};
use flownet::{simulate, Error, InflowProfile, LinearCost, NetworkGraph, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "flownet", version, about = "Optimal feedback flow control for traffic and gas networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and list every problem found.
    Validate { file: PathBuf },
    /// Closed-loop rollout; writes a per-cell trace as CSV.
    Simulate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long, default_value = "centralized")]
        scheme: String,
        /// Comma-separated initial masses. Drawn at random from `--seed` when absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Overrides the horizon of the cost file.
        #[arg(long)]
        horizon: Option<usize>,
        /// Inflow profile file; zero inflow when absent.
        #[arg(long)]
        lambda: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explicit piecewise-affine feedback laws for every step, as JSON.
    Synthesize {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long)]
        lambda: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a gas scenario with the conservative (lp1) or gridded (lp2) program.
    GasSolve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = GasMethod::Lp1)]
        method: GasMethod,
        #[arg(long, default_value_t = 9)]
        breakpoints: usize,
        /// Pressure and flow trace of the lp1 rollout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report whether all-open control is optimal for a network and cost.
    CheckThm3 {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        cost: PathBuf,
    },
    /// Run a bundled experiment; writes CSV files and a summary.
    Experiment {
        #[arg(value_enum)]
        which: Which,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gas scenario for gas-demo; the bundled 4-cell pipeline when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GasMethod {
    Lp1,
    Lp2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Sim1,
    RandomLoss,
    GasDemo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_infeasible));
            ExitCode::from(if infeasible { 1 } else { 2 })
        }
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_lambda(path: Option<&Path>) -> anyhow::Result<InflowProfile> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(InflowProfile::from_json(&text)?)
        }
        None => Ok(InflowProfile::zero()),
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Validate { file } => {
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let net = NetworkGraph::from_json(&text)?;
            let report = net.validate();
            if report.is_valid() {
                println!("{}: {} cells, valid", file.display(), net.len());
                Ok(())
            } else {
                for issue in &report.issues {
                    println!("{issue}");
                }
                Err(report.into_result().unwrap_err().into())
            }
        }
        Command::Simulate { net, cost, scheme, x0, horizon, lambda, seed, out } => {
            let net = NetworkGraph::load(&net)?;
            let mut cost = LinearCost::load(&cost, net.len())?;
            if let Some(h) = horizon {
                cost = cost.with_horizon(h);
            }
            let scheme: Scheme = scheme.parse()?;
            let lambda = load_lambda(lambda.as_deref())?;
            let x0 = match x0 {
                Some(x) => x,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    net.cells.iter().map(|c| rng.gen_range(0.0..=c.max_mass())).collect()
                }
            };
            let traj = simulate(&net, &cost, scheme, &x0, &lambda)?;
            write_trace_csv(output(out.as_deref())?, &traj, &cost)?;
            eprintln!("{scheme} cost {}", traj.total_cost);
            Ok(())
        }
        Command::Synthesize { net, cost, lambda, out } => {
            let net = NetworkGraph::load(&net)?;
            let cost = LinearCost::load(&cost, net.len())?;
            let lambda = load_lambda(lambda.as_deref())?;
            let laws = synthesize_explicit(&net, &cost, &lambda, &MplpLimits::default())?;
            fs::write(&out, serde_json::to_string_pretty(&laws)?)?;
            let regions: Vec<usize> = laws.iter().map(|l| l.regions.len()).collect();
            eprintln!("regions per step {regions:?}");
            Ok(())
        }
        Command::GasSolve { scenario, method, breakpoints, out } => {
            let gas = GasLineNetwork::load(&scenario)?;
            match method {
                GasMethod::Lp1 => {
                    let traj = gas.simulate(GasScheme::Centralized)?;
                    let report = gas.check_feasibility_nonconvex(&traj);
                    println!("lp1 cost {}", traj.cost);
                    println!("nonconvex feasible {}", report.is_feasible());
                    if let Some(p) = out {
                        write_gas_trace(File::create(&p)?, &traj)?;
                    }
                }
                GasMethod::Lp2 => {
                    let grid = BreakpointGrid::uniform(breakpoints);
                    let s = solve_lp2(&gas, 0, &gas.initial_pressure, &grid)?;
                    println!("lp2 objective {}", s.objective);
                    println!("delta {}", s.delta);
                    println!("lower bound {}", s.objective - s.delta);
                }
            }
            Ok(())
        }
        Command::CheckThm3 { net, cost } => {
            let net = NetworkGraph::load(&net)?;
            let cost = LinearCost::load(&cost, net.len())?;
            let report = check_thm3_conditions(&net, &cost);
            println!("{}", serde_json::to_string_pretty(&report)?);
            println!("conditions hold: {}", report.passes());
            Ok(())
        }
        Command::Experiment { which, trials, seed, scenario, out_dir } => {
            fs::create_dir_all(&out_dir)?;
            let path = |name: &str| out_dir.join(name);
            let summary = match which {
                Which::Sim1 => {
                    let rows = experiments::run_sim1()?;
                    experiments::write_sim1_csv(File::create(path("sim1.csv"))?, &rows)?;
                    experiments::sim1_summary(&rows)
                }
                Which::RandomLoss => {
                    let net = flownet::data::synthetic32();
                    let x0 = flownet::data::synthetic32_x0(&net);
                    let report = experiments::run_random_loss(&net, &x0, &ExperimentSpec::random_loss(trials, seed))?;
                    experiments::write_loss_csv(File::create(path("random_loss.csv"))?, &report)?;
                    experiments::write_histogram_csv(File::create(path("random_loss_histogram.csv"))?, &report.histogram)?;
                    experiments::random_loss_summary(&report)
                }
                Which::GasDemo => {
                    let gas = match scenario {
                        Some(p) => GasLineNetwork::load(&p)?,
                        None => flownet::data::gas4(),
                    };
                    let report = experiments::run_gas_demo(&gas, &ExperimentSpec::gas_demo())?;
                    experiments::write_gas_csv(File::create(path("gas_demo.csv"))?, &report)?;
                    experiments::gas_summary(&report)
                }
            };
            fs::write(path("summary.txt"), &summary)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn write_gas_trace<W: Write>(mut w: W, traj: &GasTrajectory) -> anyhow::Result<()> {
    writeln!(w, "k,cell,x,u")?;
    for (k, x) in traj.states.iter().enumerate() {
        for (c, xc) in x.iter().enumerate() {
            let u = traj.controls.get(k).map(|u| u[c].to_string()).unwrap_or_default();
            writeln!(w, "{k},{},{xc},{u}", c + 1)?;
        }
    }
    Ok(())
}
