// Temporary diagnostic; removed before finalizing.
use rsma_core::solver::{solve_with_assignment, SolveOptions};
use rsma_core::{assign, SystemConfig};
use rsma_sim::scenario::{generate_scenario, GenParams};

#[test]
#[ignore]
fn inspect_dynamics() {
    let config = SystemConfig::default();
    let gen = GenParams::default();
    let channels = generate_scenario(&config, &gen, 1003).unwrap();
    let assignment = assign::greedy_assign(&channels, 5, 5, 10).unwrap();
    for (m, k, users) in assignment.active_slots() {
        let gains: Vec<f64> = users.iter().map(|&u| channels.h[m][u][k]).collect();
        println!(
            "slot ({m},{k}) users {users:?} h={gains:?} f={} box={}",
            channels.f[m][k],
            config.interference_threshold / channels.f[m][k]
        );
    }
    let mut options = SolveOptions::default();
    options.record_trace = true;
    options.early_stop = false;
    options.outer_max = 3;
    options.inner_max = 40;
    options.debug_power = true;
    let report = solve_with_assignment(&config, &channels, assignment, &options, true).unwrap();
    println!("outer trace (Mbps): {:?}", report.outer_trace.iter().map(|v| v * 1e-6).collect::<Vec<_>>());
    for (i, rec) in report.inner_trace.iter().enumerate() {
        if i % 100 == 0 || i + 1 == report.inner_trace.len() {
            println!(
                "t={:4} sr={:8.2} viol={:9.2e} d={:?} n={:?}",
                i + 1,
                rec.sum_rate * 1e-6,
                rec.max_violation,
                rec.dual_delta.map(|v| (v * 1e6).round() / 1e6),
                rec.dual_norm.map(|v| (v * 100.0).round() / 100.0)
            );
        }
    }
    println!("final p: {:?}", report.state.p);
    println!("final eta0: {:?}", report.state.eta0);
    println!(
        "per-user: {:?}",
        report.rates.per_user_total.iter().map(|v| (v * 1e-6 * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
}
