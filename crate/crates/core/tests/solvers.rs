mod common;

use std::f64::consts::PI;

use nlsgraph::energy::{energy, multiplier, EnergyParams};
use nlsgraph::graph::StandardKind;
use nlsgraph::solvers::newton::bordered_residual;
use nlsgraph::solvers::*;
use nlsgraph::spectral::{lambda2_on, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{benchmark, disc, graph};

fn params(p: f64, rho: f64, mu: f64) -> EnergyParams {
    EnergyParams::new(p, rho, mu).unwrap()
}

#[test]
fn constant_states() {
    let d = disc(StandardKind::Interval, 1.0 / 64.0);
    let k = constant_state(&d, params(8.0, 1.0, 1.0), None).unwrap();
    assert!(k.values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
    assert!((k.lambda - 1.0).abs() < 1e-14);

    let g2 = nlsgraph::graph::standard_graph(StandardKind::Interval, &[2.0]).unwrap();
    let d2 = nlsgraph::discretize::Discretization::uniform(&g2, 1.0 / 64.0).unwrap();
    for p in [7.0, 8.0, 10.0] {
        let k = constant_state(&d2, params(p, 1.0, 2.0), None).unwrap();
        assert!(k.values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!((k.lambda - 1.0).abs() < 1e-14);
        let r = verify_solution(&d2, &k);
        assert!(r.all_pass());
        assert!(r.checks.iter().all(|c| c.value <= 1e-12 || c.name == "lambda_positive"), "{r}");
    }
    let k = constant_state(&d2, params(8.0, 1.0, 2.0), None).unwrap();
    assert!((k.energy + 0.25).abs() < 1e-14);
}

#[test]
fn threshold_values() {
    let cases = [(StandardKind::Interval, PI * PI), (StandardKind::Cycle, 4.0 * PI * PI)];
    for (kind, l2) in cases {
        let t = mass_threshold(&graph(kind), 8.0, 1.0 / 128.0).unwrap();
        let exact = (l2 / 6.0f64).powf(1.0 / 3.0);
        assert!(((t.mu1 - exact) / exact).abs() < 1e-3, "{} {exact}", t.mu1);
        assert!(t.bound_holds);
    }
    assert!(mass_threshold(&graph(StandardKind::Interval), 6.0, 0.1).is_err());
}

/// `κ_μ + a φ₂`, with the mass restored.
fn perturbed_constant(d: &nlsgraph::discretize::Discretization, mu: f64, a: f64) -> Vec<f64> {
    let l2 = lambda2_on(&d.mesh, &d.ops, DEFAULT_TOL, 0).unwrap();
    let kappa = (mu / d.graph().total_length()).sqrt();
    let mut u: Vec<f64> = l2.eigenfunction.values().iter().map(|x| kappa + a * x).collect();
    let s = (mu / d.mass(&u)).sqrt();
    u.iter_mut().for_each(|x| *x *= s);
    u
}

#[test]
fn flow_returns_to_the_constant_below_threshold() {
    let d = disc(StandardKind::Star(3), 1.0 / 64.0);
    let mu1 = mass_threshold_on(&d, 8.0).unwrap().mu1;
    let pr = params(8.0, 1.0, 0.5 * mu1);
    let u0 = perturbed_constant(&d, pr.mu, 1e-3);
    let s = normalized_gradient_flow(&d, &u0, &pr, &FlowConfig::default(), None).unwrap();
    let kappa = (pr.mu / 3.0).sqrt();
    assert!(s.values().iter().all(|&x| (x - kappa).abs() < 1e-6));
}

#[test]
fn flow_leaves_the_constant_above_threshold() {
    let d = disc(StandardKind::Interval, 1.0 / 64.0);
    let mu1 = mass_threshold_on(&d, 8.0).unwrap().mu1;
    let pr = params(8.0, 1.0, 2.0 * mu1);
    let u0 = perturbed_constant(&d, pr.mu, 1e-2);
    // E is unbounded below here: the flow concentrates until the mesh stops it
    let out = flow_iterate(&d, &u0, &pr, &FlowConfig::default()).unwrap();
    let k = constant_state(&d, pr, None).unwrap();
    let kappa = k.values()[0];
    assert!(out.u.iter().fold(0.0f64, |m, x| m.max((x - kappa).abs())) > 0.1 * kappa);
    assert!(out.energy < k.energy);
    assert!(!out.converged);
}

#[test]
fn flow_without_nonlinearity_flattens() {
    let d = disc(StandardKind::Dumbbell, 1.0 / 32.0);
    // ρ = 0 lies outside the validated range and is built by hand
    let pr = EnergyParams {
        p: 8.0,
        rho: 0.0,
        mu: 1.3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u0: Vec<f64> = (0..d.num_dofs()).map(|_| rng.gen_range(0.1..2.0)).collect();
    let s = normalized_gradient_flow(&d, &u0, &pr, &FlowConfig::default(), None).unwrap();
    let kappa = (1.3 / d.graph().total_length()).sqrt();
    assert!(s.values().iter().all(|&x| (x - kappa).abs() < 1e-6));
}

#[test]
fn bump_drops_below_the_constant_energy() {
    let d = disc(StandardKind::Interval, 1.0 / 128.0);
    let b = build_bump(&d, &params(8.0, 1.0, 0.5)).unwrap();
    assert!(b.t.is_finite() && b.doublings <= 60);
    assert!(b.energy_half < b.constant_energy);
    assert!((d.mass(b.w.values()) - 0.5).abs() < 1e-10);
    assert!(b.w.values().iter().all(|&x| x >= 0.0));
}

#[test]
fn newton_at_an_exact_root() {
    let d = disc(StandardKind::Cycle, 1.0 / 64.0);
    let k = constant_state(&d, params(8.0, 1.0, 1.0), None).unwrap();
    let out = newton_solve(&d, k.values(), k.lambda, &k.params, &NewtonConfig::default()).unwrap();
    assert!(out.iterations <= 1);
}

#[test]
fn newton_returns_to_the_constant_from_a_tangent_kick() {
    let d = disc(StandardKind::Star(3), 1.0 / 64.0);
    let mu1 = mass_threshold_on(&d, 8.0).unwrap().mu1;
    let k = constant_state(&d, params(8.0, 1.0, 0.5 * mu1), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut t: Vec<f64> = (0..d.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // project onto the tangent space {φ : φᵀMκ = 0}
    let mk = d.ops.mass.mul_vec(k.values());
    let c = t.iter().zip(&mk).map(|(a, b)| a * b).sum::<f64>() / k.values().iter().zip(&mk).map(|(a, b)| a * b).sum::<f64>();
    t.iter_mut().zip(k.values()).for_each(|(x, kv)| *x -= c * kv);
    let mut u: Vec<f64> = k.values().iter().zip(&t).map(|(a, b)| a + 1e-3 * b).collect();
    let s = (k.params.mu / d.mass(&u)).sqrt();
    u.iter_mut().for_each(|x| *x *= s);
    let r = newton_refine(&d, &u, multiplier(&d, &u, &k.params), &k.params, 1e-10, None).unwrap();
    assert!(r.deviation_from(k.values()[0]) < 1e-9);
}

#[test]
fn mountain_pass_pipeline_on_benchmarks() {
    for kind in [StandardKind::Star(3), StandardKind::Dumbbell] {
        let (d, mp) = benchmark(kind, 1.0);
        let s = &mp.candidate;
        let report = verify_solution(&d, s);
        assert!(report.all_pass(), "{report}");
        let k = constant_state(&d, s.params, None).unwrap();
        assert!(s.energy > k.energy);
        assert!(s.deviation_from(k.values()[0]) > 0.1);
        let m = s.morse.as_ref().unwrap();
        assert!(m.constrained <= 1 && m.unconstrained <= 2);
        // path invariants
        assert!(mp.level_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(mp.level >= mp.endpoint_energies.0.max(mp.endpoint_energies.1));
        let first = mp.path.first().unwrap().values();
        assert!(first.iter().all(|&x| (x - k.values()[0]).abs() < 1e-12));
        let path_max = mp
            .path
            .iter()
            .map(|u| energy(&d, u.values(), &s.params))
            .fold(f64::MIN, f64::max);
        assert!((path_max - mp.level).abs() <= 1e-12 * mp.level.abs().max(1.0));
        assert!(bordered_residual(&d, s.values(), s.lambda, &s.params) < 1e-10);
    }
}

#[test]
fn rho_continuation_on_the_star() {
    let (d, mp) = benchmark(StandardKind::Star(3), 0.5);
    let mu = mp.candidate.params.mu;
    let trace = continuation(&d, mp.candidate, &Schedule::rho_grid(0.5, 1.0, 0.1), &ContinuationConfig::default()).unwrap();
    let last = trace.last();
    assert_eq!(last.state.params.rho, 1.0);
    assert!(trace.entries.len() == 6 && trace.accepted_steps <= 40);
    let lambdas: Vec<f64> = trace.entries.iter().map(|e| e.state.lambda).collect();
    let (lo, hi) = lambdas.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 10.0);
    for e in &trace.entries {
        assert!(e.report.all_pass(), "{}", e.report);
        assert!(((d.mass(e.state.values()) - mu) / mu).abs() <= 1e-8);
    }
    let rhos: Vec<f64> = trace.entries.iter().map(|e| e.parameter).collect();
    assert!(rhos.windows(2).all(|w| w[1] > w[0]));
    let k = constant_state(&d, last.state.params, None).unwrap();
    assert!(last.state.deviation_from(k.values()[0]) > 0.1);
}

#[test]
fn empty_schedule_keeps_the_initial_state() {
    let d = disc(StandardKind::Interval, 1.0 / 32.0);
    let k = constant_state(&d, params(8.0, 1.0, 1.0), None).unwrap();
    let empty = Schedule {
        parameter: Parameter::Rho,
        values: Vec::new(),
    };
    let t = continuation(&d, k.clone(), &empty, &ContinuationConfig::default()).unwrap();
    assert_eq!(t.entries.len(), 1);
    assert_eq!(t.last().state.values(), k.values());
}

#[test]
fn non_monotone_schedule_is_rejected() {
    let d = disc(StandardKind::Interval, 1.0 / 32.0);
    let k = constant_state(&d, params(8.0, 0.5, 1.0), None).unwrap();
    let bad = Schedule {
        parameter: Parameter::Rho,
        values: vec![0.7, 0.6],
    };
    assert!(continuation(&d, k, &bad, &ContinuationConfig::default()).is_err());
}

#[test]
fn corrupted_node_fails_verification() {
    let d = disc(StandardKind::Star(3), 1.0 / 64.0);
    let k = constant_state(&d, params(8.0, 1.0, 1.0), None).unwrap();
    let mut u = k.values().to_vec();
    u[d.num_dofs() / 2] *= 1.1;
    let bad = BoundState::evaluate(&d, d.function(u).unwrap(), k.lambda, k.params, None, Origin::Refined).unwrap();
    let failures = verify_solution(&d, &bad).failures();
    for name in ["strong_residual", "l1_identity", "nehari_identity"] {
        assert!(failures.contains(&name), "{failures:?}");
    }
}

#[test]
fn trace_directory_roundtrip() {
    let (d, mp) = benchmark(StandardKind::Star(3), 0.8);
    let trace = continuation(&d, mp.candidate, &Schedule::rho_grid(0.8, 1.0, 0.1), &ContinuationConfig::default()).unwrap();
    let dir = std::env::temp_dir().join(format!("nlsgraph-trace-{}", std::process::id()));
    write_trace_dir(&dir, &trace).unwrap();
    let (g, records) = read_trace_dir(&dir).unwrap();
    assert_eq!(g.num_edges(), 3);
    assert_eq!(records.len(), trace.entries.len());
    for (r, e) in records.iter().zip(&trace.entries) {
        assert_eq!(r.lambda, e.state.lambda);
        assert_eq!(r.params, e.state.params);
        assert_eq!(r.u.values(), e.state.values());
    }
    let again = std::env::temp_dir().join(format!("nlsgraph-trace-{}-b", std::process::id()));
    write_trace_dir(&again, &trace).unwrap();
    for f in ["trace.csv", "graph.txt", "states/step_000.csv"] {
        assert_eq!(std::fs::read(dir.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap());
    }
    std::fs::remove_dir_all(&dir).unwrap();
    std::fs::remove_dir_all(&again).unwrap();
}
