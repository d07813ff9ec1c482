use std::fmt::Write as _;
use std::sync::Arc;

use super::mesh::{Mesh, NodeSite};
use crate::error::{Error, Result};
use crate::graph::{EdgeCoordinate, MetricGraph};

/// A P1 function on a meshed graph: one value per DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GraphFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_dofs() {
            return Err(Error::Dimension(format!(
                "{} values for {} DOFs",
                values.len(),
                mesh.num_dofs()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.num_dofs();
        Self {
            mesh,
            values: vec![c; n],
        }
    }

    /// Nodal interpolant of a pointwise function. Per-edge formulas that
    /// disagree at a shared vertex by more than `1e-12` are rejected.
    pub fn interpolate<F>(mesh: Arc<Mesh>, f: F) -> Result<Self>
    where
        F: Fn(EdgeCoordinate) -> f64,
    {
        let g = mesh.graph();
        let mut values = vec![f64::NAN; mesh.num_dofs()];
        for (ei, (edge, em)) in g.edges().iter().zip(mesh.edge_meshes()).enumerate() {
            let last = em.dofs.len() - 1;
            for (i, &dof) in em.dofs.iter().enumerate() {
                let s = if i == last { edge.length } else { em.from_tail[i] };
                let v = f(EdgeCoordinate { edge: ei, s });
                if i == 0 || i == last {
                    let prev = values[dof];
                    if prev.is_nan() {
                        values[dof] = v;
                    } else if (prev - v).abs() > 1e-12 * prev.abs().max(1.0) {
                        let vertex = if i == 0 { edge.tail } else { edge.head };
                        return Err(Error::ConflictingVertexValues {
                            vertex: g.vertices()[vertex].clone(),
                            a: prev,
                            b: v,
                        });
                    }
                } else {
                    values[dof] = v;
                }
            }
        }
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            mesh: Arc::clone(&self.mesh),
            values,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Point evaluation of the P1 interpolant.
    pub fn eval(&self, x: EdgeCoordinate) -> f64 {
        let em = &self.mesh.edge_meshes()[x.edge];
        let k = match em.from_tail.binary_search_by(|s| s.partial_cmp(&x.s).unwrap()) {
            Ok(i) => return self.values[em.dofs[i]],
            Err(i) => i.clamp(1, em.from_tail.len() - 1),
        };
        let (s0, s1) = (em.from_tail[k - 1], em.from_tail[k]);
        let t = (x.s - s0) / (s1 - s0);
        let (a, b) = (self.values[em.dofs[k - 1]], self.values[em.dofs[k]]);
        a + t * (b - a)
    }

    /// CSV with columns `edge,s,value`; vertex values repeat on every
    /// incident edge.
    pub fn to_csv(&self) -> String {
        let g = self.mesh.graph();
        let mut out = String::from("edge,s,value\n");
        for (edge, em) in g.edges().iter().zip(self.mesh.edge_meshes()) {
            let last = em.dofs.len() - 1;
            for (i, &dof) in em.dofs.iter().enumerate() {
                let s = if i == last { edge.length } else { em.from_tail[i] };
                let _ = writeln!(out, "{},{:e},{:e}", edge.id, s, self.values[dof]);
            }
        }
        out
    }

    /// Reads a function CSV, reconstructing the mesh from the node offsets.
    pub fn from_csv(graph: &MetricGraph, text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); graph.num_edges()];
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("edge")) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            if parts.len() != 3 {
                return Err(bad("expected `edge,s,value`".into()));
            }
            let e = graph
                .edge_index(parts[0].trim())
                .ok_or_else(|| bad(format!("unknown edge {}", parts[0])))?;
            let s: f64 = parts[1].trim().parse().map_err(|_| bad("bad s".into()))?;
            let v: f64 = parts[2].trim().parse().map_err(|_| bad("bad value".into()))?;
            rows[e].push((s, v));
        }
        let mut nodes = Vec::with_capacity(rows.len());
        for (edge, r) in graph.edges().iter().zip(rows.iter_mut()) {
            r.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            if r.len() < 3 || r[0].0 != 0.0 || (r[r.len() - 1].0 - edge.length).abs() > 1e-12 * edge.length {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("edge {} rows do not span [0, {}]", edge.id, edge.length),
                });
            }
            nodes.push(r.iter().map(|x| x.0).collect::<Vec<_>>());
        }
        let mesh = Arc::new(Mesh::from_edge_nodes(graph, &nodes)?);
        let mut values = vec![f64::NAN; mesh.num_dofs()];
        for (em, r) in mesh.edge_meshes().iter().zip(&rows) {
            for (&dof, &(_, v)) in em.dofs.iter().zip(r) {
                if !values[dof].is_nan() && (values[dof] - v).abs() > 1e-12 * v.abs().max(1.0) {
                    let vertex = match mesh.site(dof) {
                        NodeSite::Vertex(vx) => graph.vertices()[vx].clone(),
                        NodeSite::Interior(..) => format!("dof {dof}"),
                    };
                    return Err(Error::ConflictingVertexValues {
                        vertex,
                        a: values[dof],
                        b: v,
                    });
                }
                values[dof] = v;
            }
        }
        Self::new(mesh, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::assembly::assemble_operators;
    use crate::graph::{standard_graph, StandardKind};
    use std::f64::consts::PI;

    #[test]
    fn constant_interpolation() {
        let g = standard_graph(StandardKind::Dumbbell, &[1.0]).unwrap();
        let mesh = Arc::new(Mesh::uniform(&g, 0.1).unwrap());
        let f = GraphFunction::interpolate(mesh, |_| 2.5).unwrap();
        assert!(f.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn discontinuous_function_rejected() {
        let g = standard_graph(StandardKind::Star(3), &[1.0]).unwrap();
        let mesh = Arc::new(Mesh::uniform(&g, 0.25).unwrap());
        let r = GraphFunction::interpolate(mesh, |x| x.edge as f64);
        assert!(matches!(r, Err(Error::ConflictingVertexValues { .. })));
    }

    /// `‖cos(πx) − I_h cos(πx)‖_{L²}` drops by ≈ 4 when h halves.
    #[test]
    fn interpolation_error_is_second_order() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let err = |h: f64| {
            let mesh = Arc::new(Mesh::uniform(&g, h).unwrap());
            let f = GraphFunction::interpolate(Arc::clone(&mesh), |x| (PI * x.s).cos()).unwrap();
            // fine composite Simpson on each element
            let mut total = 0.0;
            for el in mesh.elements() {
                let (s0, s1) = (mesh.coordinate(el.a).s, mesh.coordinate(el.b).s);
                let m = 64;
                for k in 0..m {
                    let x0 = s0 + (s1 - s0) * k as f64 / m as f64;
                    let x1 = s0 + (s1 - s0) * (k + 1) as f64 / m as f64;
                    let e = |x: f64| {
                        let t = (x - s0) / (s1 - s0);
                        let uh = f.values()[el.a] * (1.0 - t) + f.values()[el.b] * t;
                        ((PI * x).cos() - uh).powi(2)
                    };
                    total += (x1 - x0) / 6.0 * (e(x0) + 4.0 * e(0.5 * (x0 + x1)) + e(x1));
                }
            }
            total.sqrt()
        };
        let (e1, e2, e3) = (err(1.0 / 16.0), err(1.0 / 32.0), err(1.0 / 64.0));
        assert!((e1 / e2 - 4.0).abs() < 0.1, "{}", e1 / e2);
        assert!((e2 / e3 - 4.0).abs() < 0.1, "{}", e2 / e3);
    }

    #[test]
    fn csv_roundtrip_preserves_mesh_and_values() {
        let g = standard_graph(StandardKind::Dumbbell, &[1.0, 0.3, 2.0]).unwrap();
        let mesh = Arc::new(Mesh::uniform(&g, 0.07).unwrap());
        let f = GraphFunction::interpolate(Arc::clone(&mesh), |x| {
            let len = g.edges()[x.edge].length;
            1.0 + 0.1 * (x.edge + 1) as f64 * x.s * (len - x.s)
        }).unwrap();
        let back = GraphFunction::from_csv(&g, &f.to_csv()).unwrap();
        assert_eq!(back.values(), f.values());
        let ops_a = assemble_operators(&mesh);
        let ops_b = assemble_operators(back.mesh());
        let diff = (ops_a.mass.quadratic(f.values()) - ops_b.mass.quadratic(back.values())).abs();
        assert!(diff < 1e-13);
    }

    #[test]
    fn point_evaluation() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let mesh = Arc::new(Mesh::uniform(&g, 0.25).unwrap());
        let f = GraphFunction::interpolate(mesh, |x| 2.0 * x.s).unwrap();
        assert!((f.eval(EdgeCoordinate { edge: 0, s: 0.3 }) - 0.6).abs() < 1e-15);
        assert_eq!(f.eval(EdgeCoordinate { edge: 0, s: 1.0 }), 2.0);
    }
}
