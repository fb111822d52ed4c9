mod common;

use std::collections::BTreeMap;

use flownet::lp::MplpLimits;
use flownet::sim::{simulate_with, Forecast};
use flownet::traffic::{
    build_horizon_lp, centralized_action, check_thm3_conditions, decentralized_onehop_action,
    synthesize_explicit,
};
use flownet::{data, eval_pwa, evaluate_cost, simulate, InflowProfile, Scheme};
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn rollout_matches_horizon_value() {
    let mut rng = common::rng(1);
    for _ in 0..20 {
        let net = common::merge_diverge_network(&mut rng, 7);
        let n_steps: usize = rng.gen_range(1..=5);
        let cost = common::random_cost(&mut rng, net.len(), n_steps);
        let x0 = common::random_state(&mut rng, &net);
        let traj = simulate(&net, &cost, Scheme::Centralized, &x0, &InflowProfile::zero()).unwrap();
        let (_, value) = build_horizon_lp(&net, &cost, 0, &InflowProfile::zero())
            .unwrap()
            .solve(&x0)
            .unwrap();
        assert!(close(traj.total_cost, value, 1e-6), "{} vs {value}", traj.total_cost);
        assert!(close(evaluate_cost(&traj, &cost), traj.total_cost, 1e-12));
    }
}

#[test]
fn centralized_is_never_worse() {
    let mut rng = common::rng(2);
    for _ in 0..30 {
        let net = common::merge_diverge_network(&mut rng, 8);
        let horizon = rng.gen_range(2..=6);
        let cost = common::random_cost(&mut rng, net.len(), horizon);
        let x0 = common::random_state(&mut rng, &net);
        let run = |s| simulate(&net, &cost, s, &x0, &InflowProfile::zero()).unwrap().total_cost;
        let cen = run(Scheme::Centralized);
        let tol = 1e-8 * cen.abs().max(1.0);
        assert!(cen <= run(Scheme::Decentralized) + tol);
        assert!(cen <= run(Scheme::Trivial) + tol);
    }
}

#[test]
fn every_scheme_respects_the_flow_rows() {
    let mut rng = common::rng(3);
    for _ in 0..20 {
        let net = common::merge_diverge_network(&mut rng, 9);
        let cost = common::random_cost(&mut rng, net.len(), 4);
        let x0 = common::random_state(&mut rng, &net);
        for s in Scheme::ALL {
            let traj = simulate(&net, &cost, s, &x0, &InflowProfile::zero()).unwrap();
            for (x, u) in traj.states.iter().zip(&traj.controls) {
                net.check_flows(x, u).unwrap();
            }
        }
    }
}

#[test]
fn all_open_is_optimal_under_ordered_weights() {
    let mut rng = common::rng(4);
    let mut checked = 0;
    while checked < 15 {
        let (n, ramp) = (rng.gen_range(2..=6), rng.gen_bool(0.5));
        let net = common::merge_free_network(&mut rng, n, ramp);
        let horizon = rng.gen_range(1..=5);
        let cost = common::ordered_cost(&mut rng, &net, horizon);
        if !check_thm3_conditions(&net, &cost).passes() {
            continue;
        }
        checked += 1;
        let x0 = common::random_state(&mut rng, &net);
        let cen = simulate(&net, &cost, Scheme::Centralized, &x0, &InflowProfile::zero()).unwrap();
        let triv = simulate(&net, &cost, Scheme::Trivial, &x0, &InflowProfile::zero()).unwrap();
        assert!(close(triv.total_cost, cen.total_cost, 1e-6));
    }
}

#[test]
fn example_line_fails_the_weight_ordering() {
    let report = check_thm3_conditions(&data::example1(), &data::example1_cost(3));
    assert!(report.no_merges);
    assert!(!report.alpha_ordered());
    assert!(report.alpha_violations.iter().all(|&(_, i, j)| (i, j) == (0, 1)));
}

#[test]
fn zero_forecast_controller_tolerates_bounded_inflow() {
    let mut rng = common::rng(5);
    for _ in 0..20 {
        let n = rng.gen_range(3..=6);
        let net = common::merge_free_network(&mut rng, n, true);
        let horizon = 5;
        let cost = common::random_cost(&mut rng, net.len(), horizon);
        let x0 = common::random_state(&mut rng, &net);
        let mut rates = BTreeMap::new();
        for &i in &net.on_ramps {
            let cap = net.cells[i].capacity;
            rates.insert(i, (0..horizon).map(|_| rng.gen_range(0.0..=cap)).collect());
        }
        let lambda = InflowProfile { rates };
        let traj = simulate_with(&net, &cost, Scheme::Centralized, &x0, &lambda, Forecast::Zero).unwrap();
        for (x, u) in traj.states.iter().zip(&traj.controls) {
            net.check_flows(x, u).unwrap();
            net.check_state(x).unwrap();
        }
    }
}

#[test]
fn explicit_laws_reproduce_online_actions() {
    let net = data::example1();
    let cost = data::example1_cost(3);
    let laws = synthesize_explicit(&net, &cost, &InflowProfile::zero(), &MplpLimits::default()).unwrap();
    let mut rng = common::rng(6);
    for k in 0..3 {
        for _ in 0..30 {
            let x = common::random_state(&mut rng, &net);
            let u = eval_pwa(&laws[k], &x).unwrap();
            let online = centralized_action(&net, &cost, k, &x, &InflowProfile::zero()).unwrap();
            // Optimizers can differ on degenerate instances; compare the cost to go.
            let lp = build_horizon_lp(&net, &cost, k, &InflowProfile::zero()).unwrap();
            let (_, v) = lp.solve(&x).unwrap();
            let next = net.step_dynamics(&x, &u, &[0.0; 3]).unwrap();
            let stage = cost.stage_cost(k, &x, &u);
            let rest = if k + 1 < 3 {
                build_horizon_lp(&net, &cost, k + 1, &InflowProfile::zero()).unwrap().solve(&next).unwrap().1
            } else {
                cost.terminal_cost(&next)
            };
            assert!(close(stage + rest, v, 1e-6), "k={k} explicit {u:?} online {online:?}");
        }
    }
}

#[test]
fn decentralized_control_is_one_hop() {
    let mut rng = common::rng(7);
    for _ in 0..15 {
        let net = common::merge_diverge_network(&mut rng, 8);
        let cost = common::random_cost(&mut rng, net.len(), 3);
        let x = common::random_state(&mut rng, &net);
        let u = decentralized_onehop_action(&net, &cost, 0, &x).unwrap();
        for i in 0..net.len() {
            let local: Vec<usize> = match net.head_junction(i) {
                Some(j) => j.incoming.iter().chain(&j.outgoing).copied().collect(),
                None => vec![i],
            };
            let mut y = x.clone();
            for j in 0..net.len() {
                if !local.contains(&j) {
                    let cap = net.cells[j].gamma.finite().unwrap_or(3.0) * net.cells[j].length;
                    y[j] = rng.gen_range(0.0..=cap);
                }
            }
            let v = decentralized_onehop_action(&net, &cost, 0, &y).unwrap();
            assert!((u[i] - v[i]).abs() < 1e-9, "cell {i}: {} vs {}", u[i], v[i]);
        }
    }
}

#[test]
fn state_only_cost_example_line() {
    // One step from [1, 0.5, 0.1] under terminal weights [1, 4, 2]: moving
    // mass into cell 2 costs 3 per unit, out of it saves 2, and the sink
    // saves 2. Cells 2 and 3 release their demand v x / ℓ.
    let net = data::example1();
    let cost = data::example1_cost(1);
    let u = centralized_action(&net, &cost, 0, &data::EXAMPLE1_X0, &InflowProfile::zero()).unwrap();
    assert!(u[0].abs() < 1e-12);
    assert!((u[1] - 0.45).abs() < 1e-12);
    assert!((u[2] - 0.09).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rollouts_are_deterministic(seed in 0u64..1000) {
        let mut rng = common::rng(seed);
        let net = common::merge_diverge_network(&mut rng, 6);
        let cost = common::random_cost(&mut rng, net.len(), 3);
        let x0 = common::random_state(&mut rng, &net);
        for s in Scheme::ALL {
            let a = simulate(&net, &cost, s, &x0, &InflowProfile::zero()).unwrap();
            let b = simulate(&net, &cost, s, &x0, &InflowProfile::zero()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn mass_is_conserved_without_sinks_or_sources(seed in 0u64..1000) {
        // Total mass changes only through off-ramp outflow.
        let mut rng = common::rng(seed);
        let net = common::merge_diverge_network(&mut rng, 7);
        let cost = common::random_cost(&mut rng, net.len(), 3);
        let x0 = common::random_state(&mut rng, &net);
        let traj = simulate(&net, &cost, Scheme::Centralized, &x0, &InflowProfile::zero()).unwrap();
        for k in 0..traj.steps() {
            let before: f64 = traj.states[k].iter().sum();
            let after: f64 = traj.states[k + 1].iter().sum();
            let left: f64 = net.off_ramps.iter().map(|&i| traj.controls[k][i]).sum();
            prop_assert!((before - left * net.sampling_time - after).abs() < 1e-9);
        }
    }
}
