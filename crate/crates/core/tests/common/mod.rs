#![allow(dead_code)]

use nlsgraph::discretize::Discretization;
use nlsgraph::energy::EnergyParams;
use nlsgraph::graph::{standard_graph, GraphSpec, MetricGraph, StandardKind};
use nlsgraph::solvers::{mass_threshold_on, mountain_pass, MountainPassConfig, MountainPassResult};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn graph(kind: StandardKind) -> MetricGraph {
    match kind {
        StandardKind::Dumbbell => standard_graph(kind, &[1.0, 0.5, 1.0]).unwrap(),
        _ => standard_graph(kind, &[1.0]).unwrap(),
    }
}

pub fn disc(kind: StandardKind, h: f64) -> Discretization {
    Discretization::uniform(&graph(kind), h).unwrap()
}

/// Mountain pass at half the threshold mass, `p = 8`.
pub fn benchmark(kind: StandardKind, rho: f64) -> (Discretization, MountainPassResult) {
    let d = disc(kind, 1.0 / 128.0);
    let mu1 = mass_threshold_on(&d, 8.0).unwrap().mu1;
    let params = EnergyParams::new(8.0, rho, 0.5 * mu1).unwrap();
    let mp = mountain_pass(&d, &params, &MountainPassConfig::default()).unwrap();
    (d, mp)
}

/// Random connected graph: a spanning tree plus extra edges, loops allowed.
pub fn random_graph(rng: &mut ChaCha8Rng) -> MetricGraph {
    let n_edges = rng.gen_range(3..=8);
    let n_vertices = rng.gen_range(2..=n_edges + 1);
    let mut spec = GraphSpec::default();
    for v in 0..n_vertices {
        spec = spec.vertex(format!("v{v}"));
    }
    for k in 0..n_edges {
        let len = rng.gen_range(0.3..=3.0);
        let (a, b) = if k + 1 < n_vertices {
            (rng.gen_range(0..=k), k + 1)
        } else {
            (rng.gen_range(0..n_vertices), rng.gen_range(0..n_vertices))
        };
        spec = spec.edge(format!("e{k}"), format!("v{a}"), format!("v{b}"), len);
    }
    MetricGraph::new(&spec).unwrap()
}
