use nlsgraph::graph::{standard_graph, EdgeCoordinate, GraphSpec, MetricGraph, StandardKind};
use proptest::prelude::*;

fn benchmark_graphs() -> Vec<MetricGraph> {
    let spec = GraphSpec::default()
        .vertex("a")
        .vertex("b")
        .vertex("c")
        .vertex("d")
        .edge("e0", "a", "b", 1.3)
        .edge("e1", "b", "c", 0.4)
        .edge("e2", "c", "a", 2.1)
        .edge("e3", "c", "d", 0.9)
        .edge("e4", "d", "d", 1.7)
        .edge("e5", "a", "b", 0.6);
    vec![
        standard_graph(StandardKind::Interval, &[1.0]).unwrap(),
        standard_graph(StandardKind::Cycle, &[1.0]).unwrap(),
        standard_graph(StandardKind::Star(3), &[1.0]).unwrap(),
        standard_graph(StandardKind::Star(5), &[0.5, 1.0, 1.5, 2.0, 2.5]).unwrap(),
        standard_graph(StandardKind::Dumbbell, &[1.0, 0.5, 1.0]).unwrap(),
        MetricGraph::new(&spec).unwrap(),
    ]
}

fn point(g: &MetricGraph, e: usize, t: f64) -> EdgeCoordinate {
    let e = e % g.num_edges();
    EdgeCoordinate {
        edge: e,
        s: t * g.edges()[e].length,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn distance_is_a_metric(gi in 0usize..6, e in prop::array::uniform3(0usize..16), t in prop::array::uniform3(0.0f64..=1.0)) {
        let graphs = benchmark_graphs();
        let g = &graphs[gi];
        let (x, y, z) = (point(g, e[0], t[0]), point(g, e[1], t[1]), point(g, e[2], t[2]));
        let dxy = g.distance(x, y).unwrap();
        prop_assert_eq!(g.distance(x, x).unwrap(), 0.0);
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy, g.distance(y, x).unwrap());
        let dxz = g.distance(x, z).unwrap();
        let dzy = g.distance(z, y).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-14 * g.total_length());
        // nothing is farther apart than the whole graph
        prop_assert!(dxy <= g.total_length());
    }

    #[test]
    fn unit_star_length_is_exact(m in 1usize..40) {
        let g = standard_graph(StandardKind::Star(m), &[1.0]).unwrap();
        prop_assert_eq!(g.total_length(), m as f64);
    }
}

#[test]
fn vertex_coordinates_agree_across_edges() {
    for g in benchmark_graphs() {
        for (k, e) in g.edges().iter().enumerate() {
            let tail = EdgeCoordinate { edge: k, s: 0.0 };
            let head = EdgeCoordinate { edge: k, s: e.length };
            let vt = g.vertex_coordinate(e.tail);
            let vh = g.vertex_coordinate(e.head);
            assert_eq!(g.distance(tail, vt).unwrap(), 0.0);
            assert_eq!(g.distance(head, vh).unwrap(), 0.0);
        }
    }
}
