use crate::error::{Error, Result};
use crate::graph::{EdgeCoordinate, MetricGraph};

/// One P1 element: global DOFs of its two nodes and its length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub a: usize,
    pub b: usize,
    pub h: f64,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMesh {
    /// Element lengths, tail to head.
    pub lengths: Vec<f64>,
    /// Node offsets from the tail (prefix sums of `lengths`).
    pub from_tail: Vec<f64>,
    /// Node offsets from the head (suffix sums of `lengths`), kept separately
    /// so that nodes clustered near the head keep full relative precision.
    pub from_head: Vec<f64>,
    /// Global DOF of every node; first is the tail vertex, last the head.
    pub dofs: Vec<usize>,
}

impl EdgeMesh {
    pub fn num_elements(&self) -> usize {
        self.lengths.len()
    }
}

/// Where a DOF lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSite {
    Vertex(usize),
    /// `(edge, local node index)`
    Interior(usize, usize),
}

/// Per-edge P1 grids with one shared DOF per vertex. Vertex `v` owns DOF
/// `v`; interior nodes follow edge by edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    graph: MetricGraph,
    edges: Vec<EdgeMesh>,
    elements: Vec<Element>,
    sites: Vec<NodeSite>,
}

/// Grading of element sizes toward chosen vertices. At distance `d` from a
/// graded vertex the element size is `clamp(rate · d · (d/ℓ_e)^exponent,
/// h_min, h_max)`, so the relative resolution `h/d` keeps improving as
/// `d → 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGrading {
    pub vertices: Vec<usize>,
    pub h_min: f64,
    pub rate: f64,
    pub exponent: f64,
}

impl Mesh {
    /// Uniform mesh with `n_e = max(2, ceil(ℓ_e / h_target))` elements per edge.
    pub fn uniform(graph: &MetricGraph, h_target: f64) -> Result<Self> {
        if !(h_target.is_finite() && h_target > 0.0) {
            return Err(Error::InvalidParameter(format!("h_target must be positive, got {h_target}")));
        }
        let lengths = graph
            .edges()
            .iter()
            .map(|e| {
                let n = elements_for(e.length, h_target);
                vec![e.length / n as f64; n]
            })
            .collect();
        Self::from_element_lengths(graph, lengths)
    }

    /// Default mesh: `h_target = min_e ℓ_e / 64`.
    pub fn default_for(graph: &MetricGraph) -> Self {
        Self::uniform(graph, graph.min_edge_length() / 64.0).expect("positive edge lengths")
    }

    /// Mesh graded toward the vertices listed in `grading`; edges not touching
    /// them are uniform with spacing `h_max`.
    pub fn graded(graph: &MetricGraph, h_max: f64, grading: &MeshGrading) -> Result<Self> {
        if !(h_max > 0.0 && grading.h_min > 0.0 && grading.h_min <= h_max && grading.rate > 0.0) {
            return Err(Error::InvalidParameter("invalid grading parameters".into()));
        }
        if grading.exponent < 0.0 || grading.vertices.iter().any(|&v| v >= graph.num_vertices()) {
            return Err(Error::InvalidParameter("invalid grading vertices or exponent".into()));
        }
        let graded = |v: usize| grading.vertices.contains(&v);
        let lengths = graph
            .edges()
            .iter()
            .map(|e| {
                let (t, h) = (graded(e.tail), graded(e.head));
                let march = |span: f64| graded_steps(span, e.length, h_max, grading);
                match (t, h) {
                    (false, false) => {
                        let n = elements_for(e.length, h_max);
                        vec![e.length / n as f64; n]
                    }
                    (true, false) => march(e.length),
                    (false, true) => {
                        let mut s = march(e.length);
                        s.reverse();
                        s
                    }
                    (true, true) => {
                        let half = march(e.length / 2.0);
                        let mut all = half.clone();
                        all.extend(half.iter().rev());
                        all
                    }
                }
            })
            .collect();
        Self::from_element_lengths(graph, lengths)
    }

    /// Mesh with a node at `x` and sizes graded toward it from both sides
    /// (`grading.vertices` is ignored); other edges are uniform with spacing
    /// `h_max`.
    pub fn graded_at(graph: &MetricGraph, x: EdgeCoordinate, h_max: f64, grading: &MeshGrading) -> Result<Self> {
        if !(h_max > 0.0 && grading.h_min > 0.0 && grading.h_min <= h_max && grading.rate > 0.0) {
            return Err(Error::InvalidParameter("invalid grading parameters".into()));
        }
        let len = graph
            .edges()
            .get(x.edge)
            .map(|e| e.length)
            .ok_or_else(|| Error::InvalidCoordinate(format!("edge {}", x.edge)))?;
        if !(x.s > 0.0 && x.s < len) {
            return Err(Error::InvalidCoordinate(format!("s = {} is not interior", x.s)));
        }
        let lengths = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(ei, e)| {
                if ei != x.edge {
                    let n = elements_for(e.length, h_max);
                    return vec![e.length / n as f64; n];
                }
                let mut left = graded_steps(x.s, e.length, h_max, grading);
                left.reverse();
                left.extend(graded_steps(e.length - x.s, e.length, h_max, grading));
                left
            })
            .collect();
        Self::from_element_lengths(graph, lengths)
    }

    /// Mesh from per-edge element lengths (rescaled to sum to `ℓ_e`).
    pub fn from_element_lengths(graph: &MetricGraph, lengths: Vec<Vec<f64>>) -> Result<Self> {
        if lengths.len() != graph.num_edges() {
            return Err(Error::Dimension(format!(
                "{} edge grids for {} edges",
                lengths.len(),
                graph.num_edges()
            )));
        }
        let mut next_dof = graph.num_vertices();
        let mut sites: Vec<NodeSite> = (0..graph.num_vertices()).map(NodeSite::Vertex).collect();
        let mut edges = Vec::with_capacity(lengths.len());
        let mut elements = Vec::new();
        for (ei, (e, mut hs)) in graph.edges().iter().zip(lengths).enumerate() {
            if hs.len() < 2 || hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "edge {} needs at least 2 elements of positive length",
                    e.id
                )));
            }
            let total: f64 = hs.iter().sum();
            if ((total - e.length) / e.length).abs() > 1e-12 {
                let scale = e.length / total;
                hs.iter_mut().for_each(|h| *h *= scale);
            }
            let n = hs.len();
            let mut from_tail = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            from_tail.push(0.0);
            for h in &hs[..n - 1] {
                acc += h;
                from_tail.push(acc);
            }
            from_tail.push(e.length);
            let mut from_head = vec![0.0; n + 1];
            let mut acc = 0.0;
            from_head[n] = 0.0;
            for i in (1..n).rev() {
                acc += hs[i];
                from_head[i] = acc;
            }
            from_head[0] = e.length;
            let mut dofs = Vec::with_capacity(n + 1);
            dofs.push(e.tail);
            for i in 1..n {
                dofs.push(next_dof);
                sites.push(NodeSite::Interior(ei, i));
                next_dof += 1;
            }
            dofs.push(e.head);
            for (k, &h) in hs.iter().enumerate() {
                elements.push(Element {
                    a: dofs[k],
                    b: dofs[k + 1],
                    h,
                    edge: ei,
                });
            }
            edges.push(EdgeMesh {
                lengths: hs,
                from_tail,
                from_head,
                dofs,
            });
        }
        Ok(Self {
            graph: graph.clone(),
            edges,
            elements,
            sites,
        })
    }

    /// Rebuilds a mesh from per-edge node offsets (as stored in function CSVs).
    pub fn from_edge_nodes(graph: &MetricGraph, nodes: &[Vec<f64>]) -> Result<Self> {
        let lengths = nodes
            .iter()
            .map(|s| s.windows(2).map(|w| w[1] - w[0]).collect())
            .collect();
        Self::from_element_lengths(graph, lengths)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn num_dofs(&self) -> usize {
        self.sites.len()
    }

    pub fn edge_meshes(&self) -> &[EdgeMesh] {
        &self.edges
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn site(&self, dof: usize) -> NodeSite {
        self.sites[dof]
    }

    pub fn max_spacing(&self) -> f64 {
        self.elements.iter().map(|e| e.h).fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.elements.iter().map(|e| e.h).fold(f64::INFINITY, f64::min)
    }

    /// A coordinate of the node carrying `dof`.
    pub fn coordinate(&self, dof: usize) -> EdgeCoordinate {
        match self.sites[dof] {
            NodeSite::Vertex(v) => self.graph.vertex_coordinate(v),
            NodeSite::Interior(e, i) => EdgeCoordinate {
                edge: e,
                s: self.edges[e].from_tail[i],
            },
        }
    }

    /// Offsets of `dof` from the tail and head of an edge it lies on.
    fn offsets(&self, dof: usize) -> (usize, f64, f64) {
        match self.sites[dof] {
            NodeSite::Vertex(v) => {
                let c = self.graph.vertex_coordinate(v);
                let len = self.graph.edges()[c.edge].length;
                (c.edge, c.s, len - c.s)
            }
            NodeSite::Interior(e, i) => (e, self.edges[e].from_tail[i], self.edges[e].from_head[i]),
        }
    }

    /// Signed arclength from interior node `k` of edge `e` to every node of
    /// that edge, summed over element lengths. Offsets of nodes far from both
    /// ends lose precision when taken as differences of `from_tail`.
    pub fn along_edge_from(&self, e: usize, k: usize) -> Vec<f64> {
        let hs = &self.edges[e].lengths;
        let mut out = vec![0.0; hs.len() + 1];
        for i in k + 1..out.len() {
            out[i] = out[i - 1] + hs[i - 1];
        }
        for i in (0..k).rev() {
            out[i] = out[i + 1] - hs[i];
        }
        out
    }

    /// Graph distance between two nodes, using tail and head offsets so that
    /// nodes clustered at either end of an edge keep full precision.
    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let g = &self.graph;
        let (ea, ta, ha) = self.offsets(a);
        let (eb, tb, hb) = self.offsets(b);
        let mut best = f64::INFINITY;
        if ea == eb {
            best = if ta < tb { (tb - ta).min(ha - hb) } else { (ta - tb).min(hb - ha) };
        }
        let xa = [(g.edges()[ea].tail, ta), (g.edges()[ea].head, ha)];
        let xb = [(g.edges()[eb].tail, tb), (g.edges()[eb].head, hb)];
        for &(va, da) in &xa {
            for &(vb, db) in &xb {
                best = best.min(da + g.vertex_distance(va, vb) + db);
            }
        }
        best
    }

    /// Distance from a node to vertex `v`.
    pub fn node_vertex_distance(&self, dof: usize, v: usize) -> f64 {
        let g = &self.graph;
        let (e, t, h) = self.offsets(dof);
        let edge = &g.edges()[e];
        (t + g.vertex_distance(edge.tail, v)).min(h + g.vertex_distance(edge.head, v))
    }

    /// Distance from a node to the nearest vertex.
    pub fn node_distance_to_vertices(&self, dof: usize) -> f64 {
        match self.sites[dof] {
            NodeSite::Vertex(_) => 0.0,
            NodeSite::Interior(e, i) => self.edges[e].from_tail[i].min(self.edges[e].from_head[i]),
        }
    }

    /// DOFs adjacent to `dof` through one element, with the element length.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_dofs()];
        for el in &self.elements {
            adj[el.a].push((el.b, el.h));
            adj[el.b].push((el.a, el.h));
        }
        adj
    }

    /// `∫ φ_i` for every DOF (the lumped mass).
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_dofs()];
        for el in &self.elements {
            m[el.a] += 0.5 * el.h;
            m[el.b] += 0.5 * el.h;
        }
        m
    }
}

/// Element sizes marching away from a graded point over `span`, stretched
/// to land exactly on it.
fn graded_steps(span: f64, ell: f64, h_max: f64, grading: &MeshGrading) -> Vec<f64> {
    let mut d = 0.0;
    let mut steps = Vec::new();
    while d < span {
        let size = (grading.rate * d * (d / ell).powf(grading.exponent)).clamp(grading.h_min, h_max);
        steps.push(size);
        d += size;
    }
    let scale = span / steps.iter().sum::<f64>();
    steps.iter_mut().for_each(|s| *s *= scale);
    if steps.len() < 2 {
        steps = vec![span / 2.0; 2];
    }
    steps
}

fn elements_for(length: f64, h: f64) -> usize {
    let ratio = length / h;
    // guard against 64.00000000000001-style rounding
    let n = (ratio * (1.0 - 1e-12)).ceil() as usize;
    n.max(2)
}
