//! Compact metric graphs: construction, the text format, standard shapes and
//! the path metric.
//!
//! Every edge is identified with `[0, ℓ_e]`; coordinate `s = 0` sits at the
//! edge's `tail` vertex and `s = ℓ_e` at its `head`. Self-loops and parallel
//! edges are allowed.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// Unvalidated graph description, as read from a file or built in code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    /// `(id, tail vertex id, head vertex id, length)`
    pub edges: Vec<(String, String, String, f64)>,
}

impl GraphSpec {
    pub fn vertex(mut self, id: impl Into<String>) -> Self {
        self.vertices.push(id.into());
        self
    }

    pub fn edge(
        mut self,
        id: impl Into<String>,
        tail: impl Into<String>,
        head: impl Into<String>,
        length: f64,
    ) -> Self {
        self.edges.push((id.into(), tail.into(), head.into(), length));
        self
    }

    /// Parses the line-oriented graph format:
    ///
    /// ```text
    /// # comment
    /// [vertices]
    /// a
    /// b
    /// [edges]
    /// e1 a b 1.5
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Vertices,
            Edges,
        }
        let mut section = Section::None;
        let mut spec = GraphSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[vertices]" => {
                    section = Section::Vertices;
                    continue;
                }
                "[edges]" => {
                    section = Section::Edges;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::None => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("content outside a section: {line:?}"),
                    })
                }
                Section::Vertices => {
                    if fields.len() != 1 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "expected a single vertex id".into(),
                        });
                    }
                    spec.vertices.push(fields[0].to_string());
                }
                Section::Edges => {
                    if fields.len() != 4 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "expected `id v_a v_b length`".into(),
                        });
                    }
                    let length: f64 = fields[3].parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("invalid length {:?}", fields[3]),
                    })?;
                    spec.edges.push((
                        fields[0].to_string(),
                        fields[1].to_string(),
                        fields[2].to_string(),
                        length,
                    ));
                }
            }
        }
        Ok(spec)
    }
}

/// A validated, connected, compact metric graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    total_length: f64,
    /// All-pairs shortest vertex distances.
    vertex_dist: Vec<Vec<f64>>,
}

/// A point of the graph: arclength `s` along `edge`, measured from its tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCoordinate {
    pub edge: usize,
    pub s: f64,
}

impl MetricGraph {
    pub fn new(spec: &GraphSpec) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, v) in spec.vertices.iter().enumerate() {
            if index.insert(v.as_str(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate vertex id {v}")));
            }
        }
        if spec.edges.is_empty() {
            return Err(Error::InvalidParameter("graph has no edges".into()));
        }
        let mut edges = Vec::with_capacity(spec.edges.len());
        let mut seen_edge: HashMap<&str, ()> = HashMap::new();
        for (id, a, b, length) in &spec.edges {
            if seen_edge.insert(id.as_str(), ()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate edge id {id}")));
            }
            if !(length.is_finite() && *length > 0.0) {
                return Err(Error::NonPositiveLength {
                    edge: id.clone(),
                    length: *length,
                });
            }
            let lookup = |v: &String| {
                index
                    .get(v.as_str())
                    .copied()
                    .ok_or_else(|| Error::DanglingVertexReference {
                        edge: id.clone(),
                        vertex: v.clone(),
                    })
            };
            edges.push(Edge {
                id: id.clone(),
                tail: lookup(a)?,
                head: lookup(b)?,
                length: *length,
            });
        }

        let n = spec.vertices.len();
        let components = count_components(n, &edges);
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }

        let total_length = edges.iter().map(|e| e.length).sum();
        let vertex_dist = all_pairs(n, &edges);
        Ok(Self {
            vertices: spec.vertices.clone(),
            edges,
            total_length,
            vertex_dist,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(&GraphSpec::parse(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[vertices]\n");
        for v in &self.vertices {
            let _ = writeln!(out, "{v}");
        }
        out.push_str("[edges]\n");
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                e.id, self.vertices[e.tail], self.vertices[e.head], e.length
            );
        }
        out
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Number of edge endpoints at `v`; a self-loop counts twice.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.tail == v) + usize::from(e.head == v))
            .sum()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    /// Index of the longest edge (first one on ties).
    pub fn longest_edge(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.edges.iter().enumerate() {
            if e.length > self.edges[best].length {
                best = i;
            }
        }
        best
    }

    pub fn coordinate(&self, edge: usize, s: f64) -> Result<EdgeCoordinate> {
        let e = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::InvalidCoordinate(format!("no edge with index {edge}")))?;
        if !(s.is_finite() && (0.0..=e.length).contains(&s)) {
            return Err(Error::InvalidCoordinate(format!(
                "s = {s} outside [0, {}] on edge {}",
                e.length, e.id
            )));
        }
        Ok(EdgeCoordinate { edge, s })
    }

    /// Coordinate of vertex `v` on one of its incident edges.
    pub fn vertex_coordinate(&self, v: usize) -> EdgeCoordinate {
        let (edge, e) = self
            .edges
            .iter()
            .enumerate()
            .find(|(_, e)| e.tail == v || e.head == v)
            .expect("validated graphs have no isolated vertices");
        let s = if e.tail == v { 0.0 } else { e.length };
        EdgeCoordinate { edge, s }
    }

    pub fn vertex_distance(&self, a: usize, b: usize) -> f64 {
        self.vertex_dist[a][b]
    }

    /// Shortest-path distance between two points of the graph.
    pub fn distance(&self, x: EdgeCoordinate, y: EdgeCoordinate) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: EdgeCoordinate, y: EdgeCoordinate) -> f64 {
        let ex = &self.edges[x.edge];
        let ey = &self.edges[y.edge];
        let mut best = f64::INFINITY;
        if x.edge == y.edge {
            best = (x.s - y.s).abs();
        }
        let xs = [(ex.tail, x.s), (ex.head, ex.length - x.s)];
        let ys = [(ey.tail, y.s), (ey.head, ey.length - y.s)];
        for &(a, da) in &xs {
            for &(b, db) in &ys {
                // summed in an order independent of the argument order
                best = best.min((da + db) + self.vertex_dist[a.min(b)][a.max(b)]);
            }
        }
        best
    }

    /// Distance from a point to the nearest vertex.
    pub fn distance_to_vertices(&self, x: EdgeCoordinate) -> f64 {
        let e = &self.edges[x.edge];
        x.s.min(e.length - x.s)
    }

    /// Distance from a point to vertex `v`.
    pub fn distance_to_vertex(&self, x: EdgeCoordinate, v: usize) -> f64 {
        let e = &self.edges[x.edge];
        (x.s + self.vertex_dist[e.tail][v]).min(e.length - x.s + self.vertex_dist[e.head][v])
    }

    fn check(&self, x: EdgeCoordinate) -> Result<()> {
        self.coordinate(x.edge, x.s).map(|_| ())
    }
}

fn count_components(n: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.tail), find(&mut parent, e.head));
        if a != b {
            parent[a] = b;
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

fn all_pairs(n: usize, edges: &[Edge]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in edges {
        if e.length < d[e.tail][e.head] {
            d[e.tail][e.head] = e.length;
            d[e.head][e.tail] = e.length;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Canonical graph shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardKind {
    Interval,
    Cycle,
    /// `m` edges glued at a common center vertex.
    Star(usize),
    /// Two loops joined by a bridge; lengths are `[loop_a, bridge, loop_b]`.
    Dumbbell,
}

/// Builds a standard graph. A single length is broadcast to every edge.
///
/// Star edges run from the center (`s = 0`) to the tips.
pub fn standard_graph(kind: StandardKind, lengths: &[f64]) -> Result<MetricGraph> {
    let expected = match kind {
        StandardKind::Interval | StandardKind::Cycle => 1,
        StandardKind::Star(m) => {
            if m == 0 {
                return Err(Error::InvalidParameter("star needs m >= 1".into()));
            }
            m
        }
        StandardKind::Dumbbell => 3,
    };
    let lengths: Vec<f64> = match lengths.len() {
        1 => vec![lengths[0]; expected],
        n if n == expected => lengths.to_vec(),
        n => {
            return Err(Error::InvalidParameter(format!(
                "{kind:?} takes 1 or {expected} lengths, got {n}"
            )))
        }
    };
    if let Some(&bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidParameter(format!("non-positive length {bad}")));
    }
    let spec = match kind {
        StandardKind::Interval => GraphSpec::default()
            .vertex("v0")
            .vertex("v1")
            .edge("e0", "v0", "v1", lengths[0]),
        StandardKind::Cycle => GraphSpec::default()
            .vertex("v0")
            .edge("e0", "v0", "v0", lengths[0]),
        StandardKind::Star(m) => {
            let mut spec = GraphSpec::default().vertex("c");
            for i in 1..=m {
                spec = spec.vertex(format!("t{i}"));
            }
            for (i, &l) in lengths.iter().enumerate() {
                spec = spec.edge(format!("e{}", i + 1), "c", format!("t{}", i + 1), l);
            }
            spec
        }
        StandardKind::Dumbbell => GraphSpec::default()
            .vertex("a")
            .vertex("b")
            .edge("loop_a", "a", "a", lengths[0])
            .edge("bridge", "a", "b", lengths[1])
            .edge("loop_b", "b", "b", lengths[2]),
    };
    MetricGraph::new(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_total_length() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        assert_eq!(g.num_vertices(), 2);
        assert_eq!(g.total_length(), 1.0);
    }

    #[test]
    fn star_total_length_is_m() {
        for m in 1..=7 {
            let g = standard_graph(StandardKind::Star(m), &[1.0]).unwrap();
            assert_eq!(g.total_length(), m as f64);
            assert_eq!(g.degree(0), m);
        }
    }

    #[test]
    fn disconnected_rejected() {
        let spec = GraphSpec::default()
            .vertex("a")
            .vertex("b")
            .vertex("c")
            .vertex("d")
            .edge("e1", "a", "b", 1.0)
            .edge("e2", "c", "d", 1.0);
        assert_eq!(
            MetricGraph::new(&spec),
            Err(Error::DisconnectedGraph { components: 2 })
        );
    }

    #[test]
    fn isolated_vertex_is_disconnected() {
        let spec = GraphSpec::default()
            .vertex("a")
            .vertex("b")
            .vertex("lonely")
            .edge("e1", "a", "b", 1.0);
        assert!(matches!(
            MetricGraph::new(&spec),
            Err(Error::DisconnectedGraph { .. })
        ));
    }

    #[test]
    fn bad_lengths_and_references() {
        let spec = GraphSpec::default().vertex("a").vertex("b").edge("e", "a", "b", 0.0);
        assert!(matches!(MetricGraph::new(&spec), Err(Error::NonPositiveLength { .. })));
        let spec = GraphSpec::default().vertex("a").edge("e", "a", "zz", 1.0);
        assert!(matches!(
            MetricGraph::new(&spec),
            Err(Error::DanglingVertexReference { .. })
        ));
        assert!(standard_graph(StandardKind::Star(0), &[1.0]).is_err());
    }

    #[test]
    fn standard_shapes() {
        let c = standard_graph(StandardKind::Cycle, &[1.0]).unwrap();
        assert_eq!((c.num_vertices(), c.num_edges()), (1, 1));
        assert!(c.edges()[0].is_loop());
        assert_eq!(c.degree(0), 2);
        let d = standard_graph(StandardKind::Dumbbell, &[1.0]).unwrap();
        assert_eq!((d.num_vertices(), d.num_edges()), (2, 3));
        assert_eq!(d.degree(0), 3);
    }

    #[test]
    fn star2_is_an_interval_of_length_two() {
        let g = standard_graph(StandardKind::Star(2), &[1.0]).unwrap();
        let tip1 = g.coordinate(0, 1.0).unwrap();
        let tip2 = g.coordinate(1, 1.0).unwrap();
        assert_eq!(g.distance(tip1, tip2).unwrap(), 2.0);
        let a = g.coordinate(0, 0.3).unwrap();
        let b = g.coordinate(1, 0.6).unwrap();
        assert!((g.distance(a, b).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let i = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let d = i
            .distance(i.coordinate(0, 0.2).unwrap(), i.coordinate(0, 0.7).unwrap())
            .unwrap();
        assert!((d - 0.5).abs() < 1e-15);

        let c = standard_graph(StandardKind::Cycle, &[1.0]).unwrap();
        let d = c
            .distance(c.coordinate(0, 0.1).unwrap(), c.coordinate(0, 0.9).unwrap())
            .unwrap();
        assert!((d - 0.2).abs() < 1e-12);

        let s = standard_graph(StandardKind::Star(3), &[1.0]).unwrap();
        let d = s
            .distance(s.coordinate(0, 1.0).unwrap(), s.coordinate(2, 1.0).unwrap())
            .unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn invalid_coordinates() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        assert!(g.coordinate(0, 1.5).is_err());
        assert!(g.coordinate(3, 0.5).is_err());
        assert!(g.coordinate(0, f64::NAN).is_err());
    }

    #[test]
    fn parse_roundtrip_and_comments() {
        let text = "# a graph\n[vertices]\na\nb # trailing\n\n[edges]\ne1 a b 2.5\ne2 b b 0.75\n";
        let g = MetricGraph::parse(text).unwrap();
        assert_eq!(g.total_length(), 3.25);
        let again = MetricGraph::parse(&g.to_text()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            GraphSpec::parse("a\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            GraphSpec::parse("[edges]\ne a b\n"),
            Err(Error::Parse { line: 2, .. }) | Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            GraphSpec::parse("[vertices]\na\n[edges]\ne a a x1\n"),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn parallel_edges_take_shortest() {
        let spec = GraphSpec::default()
            .vertex("a")
            .vertex("b")
            .edge("long", "a", "b", 3.0)
            .edge("short", "a", "b", 1.0);
        let g = MetricGraph::new(&spec).unwrap();
        let x = g.coordinate(0, 1.5).unwrap();
        let y = g.coordinate(1, 0.5).unwrap();
        // a->x is 1.5, b->x is 1.5; y is 0.5 from a
        assert!((g.distance(x, y).unwrap() - 2.0).abs() < 1e-15);
    }
}
