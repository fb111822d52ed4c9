//! Fixtures shared by the benchmarks.

use flownet::data;
use flownet::traffic::{build_horizon_lp, HorizonLp};
use flownet::{InflowProfile, LinearCost, NetworkGraph};

pub fn example1_lp(horizon: usize) -> HorizonLp {
    build_horizon_lp(&data::example1(), &data::example1_cost(horizon), 0, &InflowProfile::zero())
        .expect("bundled instance builds")
}

pub fn synthetic32_setup(horizon: usize) -> (NetworkGraph, LinearCost, Vec<f64>) {
    let net = data::synthetic32();
    let alpha: Vec<f64> = (0..net.len()).map(|i| 1.0 + (i % 6) as f64).collect();
    let cost = LinearCost::state_only(&alpha, horizon);
    let x0 = data::synthetic32_x0(&net);
    (net, cost, x0)
}
