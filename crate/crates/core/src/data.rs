//! Bundled instances.

use crate::network::NetworkGraph;
use crate::traffic::LinearCost;

pub const EXAMPLE1_NETWORK: &str = include_str!("../data/example1_network.json");
pub const EXAMPLE1_COST: &str = include_str!("../data/example1_cost.json");

/// Initial state used with the 3-cell line.
pub const EXAMPLE1_X0: [f64; 3] = [1.0, 0.5, 0.1];

pub fn example1() -> NetworkGraph {
    NetworkGraph::from_json(EXAMPLE1_NETWORK).expect("bundled network parses")
}

/// Example cost over horizon `n`.
pub fn example1_cost(horizon: usize) -> LinearCost {
    LinearCost::from_json(EXAMPLE1_COST, 3)
        .expect("bundled cost parses")
        .with_horizon(horizon)
}

pub const SYNTHETIC32_NETWORK: &str = include_str!("../data/synthetic32_network.json");

/// 32-cell network with nine sources and six sinks.
pub fn synthetic32() -> NetworkGraph {
    NetworkGraph::from_json(SYNTHETIC32_NETWORK).expect("bundled network parses")
}

/// Half of each cell's jam mass; sources use the jam density of ordinary
/// cells.
pub fn synthetic32_x0(net: &NetworkGraph) -> Vec<f64> {
    net.cells
        .iter()
        .map(|c| 0.5 * c.gamma.finite().unwrap_or(200.0) * c.length)
        .collect()
}

pub const GAS4_SCENARIO: &str = include_str!("../data/gas4_scenario.json");

/// Four-cell pipeline with a time-varying demand and price.
pub fn gas4() -> crate::gas::GasLineNetwork {
    crate::gas::GasLineNetwork::from_json(GAS4_SCENARIO).expect("bundled scenario parses")
}
