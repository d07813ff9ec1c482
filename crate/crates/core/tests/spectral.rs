mod common;

use std::f64::consts::PI;

use nlsgraph::graph::{standard_graph, StandardKind};
use nlsgraph::spectral::{lambda2, DEFAULT_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::random_graph;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn golden_values() {
    let pi2 = PI * PI;
    let cases = [
        (standard_graph(StandardKind::Interval, &[1.0]).unwrap(), pi2, 1),
        (standard_graph(StandardKind::Cycle, &[1.0]).unwrap(), 4.0 * pi2, 2),
        (standard_graph(StandardKind::Star(3), &[1.0]).unwrap(), pi2 / 4.0, 2),
        (standard_graph(StandardKind::Interval, &[2.0]).unwrap(), pi2 / 4.0, 1),
    ];
    for (g, exact, mult) in cases {
        let l2 = lambda2(&g, 1.0 / 128.0, DEFAULT_TOL).unwrap();
        assert!(rel(l2.value, exact) < 1e-3, "{} vs {exact}", l2.value);
        assert_eq!(l2.multiplicity, mult);
        assert!(l2.bound_holds);
    }
}

#[test]
fn lower_bound_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let g = random_graph(&mut rng);
        let l2 = lambda2(&g, g.min_edge_length() / 32.0, DEFAULT_TOL).unwrap();
        let bound = PI * PI / g.total_length().powi(2);
        assert!(l2.value >= bound - 1e-6, "{} < {bound}", l2.value);
    }
}
