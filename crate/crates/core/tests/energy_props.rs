mod common;

use nlsgraph::energy::*;
use nlsgraph::graph::StandardKind;
use nlsgraph::solvers::{constant_state, mass_threshold_on, BoundState};
use nlsgraph::discretize::integrate_power;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{benchmark, disc};

#[test]
fn gradient_matches_central_differences_at_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let kinds = [StandardKind::Interval, StandardKind::Star(3), StandardKind::Dumbbell];
    for k in 0..20 {
        let d = disc(kinds[k % 3], 1.0 / 16.0);
        let params = EnergyParams::new(rng.gen_range(6.5..10.0), rng.gen_range(0.5..=1.0), 1.0).unwrap();
        let n = d.num_dofs();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = gradient(&d, &u, &params);
        let exact: f64 = g.iter().zip(&phi).map(|(a, b)| a * b).sum();
        let fd = |eps: f64| {
            let plus: Vec<f64> = u.iter().zip(&phi).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = u.iter().zip(&phi).map(|(a, b)| a - eps * b).collect();
            (energy(&d, &plus, &params) - energy(&d, &minus, &params)) / (2.0 * eps)
        };
        let e1 = (fd(1e-2) - exact).abs();
        let e2 = (fd(5e-3) - exact).abs();
        let ratio = e1 / e2;
        assert!((3.6..4.4).contains(&ratio), "pair {k}: {e1:e} {e2:e}");
    }
}

#[test]
fn hessian_form_is_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = disc(StandardKind::Star(3), 1.0 / 32.0);
    let params = EnergyParams::new(8.0, 0.7, 1.0).unwrap();
    let u: Vec<f64> = (0..d.num_dofs()).map(|_| rng.gen_range(0.0..2.0)).collect();
    let phi: Vec<f64> = (0..d.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let q = hessian_form(&d, &phi, &u, 1.3, &params);
    for a in [2.0, 0.5, -1.0, -4.0] {
        let scaled: Vec<f64> = phi.iter().map(|x| a * x).collect();
        assert_eq!(hessian_form(&d, &scaled, &u, 1.3, &params), a * a * q);
    }
    let a = 0.3;
    let scaled: Vec<f64> = phi.iter().map(|x| a * x).collect();
    let qa = hessian_form(&d, &scaled, &u, 1.3, &params);
    assert!((qa - a * a * q).abs() <= 1e-14 * q.abs());
}

fn pohozaev_defect(d: &nlsgraph::discretize::Discretization, s: &BoundState) -> f64 {
    let u = s.values();
    let q = hessian_form(d, u, u, s.lambda, &s.params);
    let rhs = (2.0 - s.params.p) * s.params.rho * integrate_power(&d.mesh, u, s.params.p);
    ((q - rhs) / rhs).abs()
}

#[test]
fn second_variation_along_solutions() {
    let d = disc(StandardKind::Star(3), 1.0 / 64.0);
    for p in [7.0, 8.0, 10.0] {
        let k = constant_state(&d, EnergyParams::new(p, 0.8, 2.0).unwrap(), None).unwrap();
        assert!(pohozaev_defect(&d, &k) <= 1e-8);
    }
    for kind in [StandardKind::Star(3), StandardKind::Dumbbell] {
        let (d, mp) = benchmark(kind, 1.0);
        assert!(pohozaev_defect(&d, &mp.candidate) <= 1e-8);
    }
}

#[test]
fn constant_index_changes_at_the_threshold() {
    for kind in [StandardKind::Interval, StandardKind::Cycle, StandardKind::Star(3)] {
        let d = disc(kind, 1.0 / 64.0);
        let mu1 = mass_threshold_on(&d, 8.0).unwrap().mu1;
        let index = |mu: f64| {
            let k = constant_state(&d, EnergyParams::new(8.0, 1.0, mu).unwrap(), None).unwrap();
            morse_index(&d, k.values(), k.lambda, &k.params, &MorseConfig::default())
                .unwrap()
                .constrained
        };
        let (mut lo, mut hi) = (0.5 * mu1, 2.0 * mu1);
        assert_eq!(index(lo), 0);
        assert!(index(hi) >= 1);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if index(mid) == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.5 * (lo + hi) - mu1).abs() < 0.01 * mu1, "{lo} {hi} {mu1}");
    }
}

#[test]
fn index_is_insensitive_to_the_threshold() {
    let sharp = MorseConfig {
        theta: 0.0,
        ..MorseConfig::default()
    };
    let mut cases = Vec::new();
    for kind in [StandardKind::Star(3), StandardKind::Dumbbell] {
        let (d, mp) = benchmark(kind, 1.0);
        cases.push((d, mp.candidate));
    }
    let d = disc(StandardKind::Cycle, 1.0 / 64.0);
    let mu1 = mass_threshold_on(&d, 8.0).unwrap().mu1;
    for f in [0.5, 2.0] {
        let k = constant_state(&d, EnergyParams::new(8.0, 1.0, f * mu1).unwrap(), None).unwrap();
        cases.push((d.clone(), k));
    }
    for (d, s) in &cases {
        let a = morse_index(d, s.values(), s.lambda, &s.params, &MorseConfig::default()).unwrap();
        let b = morse_index(d, s.values(), s.lambda, &s.params, &sharp).unwrap();
        assert_eq!((a.constrained, a.unconstrained), (b.constrained, b.unconstrained));
    }
}
