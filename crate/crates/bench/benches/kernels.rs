use criterion::{criterion_group, criterion_main, Criterion};

use selfgrid_core::decomposition::decompose_for_grid;
use selfgrid_core::fixtures;
use selfgrid_core::grid::DgMode;
use selfgrid_core::lp::{solve, Constraint, LpProblem, Objective, Relation};
use selfgrid_core::powerflow::{compute_sensitivity, solve_power_flow, Init};
use selfgrid_core::regulation::VoltageLimits;
use selfgrid_core::scenario::{run_scenario, EventKind, Method, ScenarioEvent, SimConfig};

fn bench_power_flow(c: &mut Criterion) {
    let grid = fixtures::grid30();
    c.bench_function("power_flow_grid30_flat", |b| {
        b.iter(|| solve_power_flow(&grid, Init::Flat, 1e-8, 30).unwrap())
    });
    let sol = solve_power_flow(&grid, Init::Flat, 1e-8, 30).unwrap();
    c.bench_function("power_flow_grid30_warm", |b| {
        b.iter(|| solve_power_flow(&grid, Init::Warm(&sol), 1e-8, 30).unwrap())
    });
}

fn bench_sensitivity(c: &mut Criterion) {
    let grid = fixtures::grid30();
    let sol = solve_power_flow(&grid, Init::Flat, 1e-8, 30).unwrap();
    let dg_buses = grid.dg_buses();
    let monitored = grid.monitored_buses();
    c.bench_function("sensitivity_grid30", |b| {
        b.iter(|| compute_sensitivity(&grid, &sol, &dg_buses, &monitored).unwrap())
    });
}

fn bench_decomposition(c: &mut Criterion) {
    let grid = fixtures::grid30();
    let sol = solve_power_flow(&grid, Init::Flat, 1e-8, 30).unwrap();
    let sens =
        compute_sensitivity(&grid, &sol, &grid.dg_buses(), &grid.monitored_buses()).unwrap();
    c.bench_function("decompose_grid30_eps_0p2", |b| {
        b.iter(|| decompose_for_grid(&grid, &sens, DgMode::Pfc, 0.2).unwrap())
    });
}

fn bench_lp(c: &mut Criterion) {
    // Shape taken from the case-study LP: 2 variables, 42 voltage rows.
    let n_rows = 21;
    let mut constraints = Vec::with_capacity(2 * n_rows);
    for i in 0..n_rows {
        let coeffs = vec![0.05 + 0.001 * i as f64, 0.04 + 0.0015 * i as f64];
        constraints.push(Constraint {
            coeffs: coeffs.clone(),
            relation: Relation::Ge,
            rhs: -0.02,
        });
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: 0.08,
        });
    }
    let problem = LpProblem {
        n_vars: 2,
        objective: Objective::MinimizeMax,
        var_bounds: vec![(0.0, 0.3), (0.0, 0.3)],
        constraints,
    };
    c.bench_function("lp_2_vars_42_rows", |b| b.iter(|| solve(&problem)));
}

fn bench_scenario(c: &mut Criterion) {
    let grid = fixtures::grid30();
    let config = SimConfig {
        mode: DgMode::Pfc,
        ladder: vec![0.45],
        limits: VoltageLimits::new(0.95, 1.05),
        max_rounds: 8,
        pf_tol: 1e-8,
        method: Method::Proposed,
    };
    let events = vec![
        ScenarioEvent {
            round: 0,
            kind: EventKind::DgTrip { dg: 2 },
        },
        ScenarioEvent {
            round: 0,
            kind: EventKind::DgTrip { dg: 4 },
        },
    ];
    c.bench_function("scenario_two_trips", |b| {
        b.iter(|| run_scenario(&grid, &config, &events).unwrap())
    });
}

criterion_group!(
    benches,
    bench_power_flow,
    bench_sensitivity,
    bench_decomposition,
    bench_lp,
    bench_scenario
);
criterion_main!(benches);
