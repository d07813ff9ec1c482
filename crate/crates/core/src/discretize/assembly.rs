//! P1 operator assembly and Gauss quadrature of the power nonlinearity.
//!
//! Everything nonlinear is integrated with the same 3-point Gauss rule per
//! element, so the discrete energy, its gradient and its Hessian are exact
//! derivatives of one another.

use std::sync::Arc;

use super::function::GraphFunction;
use super::mesh::Mesh;
use crate::error::Result;
use crate::graph::MetricGraph;
use crate::linalg::CsrMatrix;

/// 3-point Gauss–Legendre rule on `[0, 1]`: `(ξ, weight)`.
pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Stiffness `K` (weak Kirchhoff Laplacian) and mass `M`.
#[derive(Debug, Clone)]
pub struct Operators {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

pub fn assemble_operators(mesh: &Mesh) -> Operators {
    let n = mesh.num_dofs();
    let mut kt = Vec::with_capacity(4 * mesh.elements().len());
    let mut mt = Vec::with_capacity(4 * mesh.elements().len());
    for el in mesh.elements() {
        let (a, b, h) = (el.a, el.b, el.h);
        let k = 1.0 / h;
        kt.extend_from_slice(&[(a, a, k), (a, b, -k), (b, a, -k), (b, b, k)]);
        let (d, o) = (h / 3.0, h / 6.0);
        mt.extend_from_slice(&[(a, a, d), (a, b, o), (b, a, o), (b, b, d)]);
    }
    Operators {
        stiffness: CsrMatrix::from_triplets(n, &kt),
        mass: CsrMatrix::from_triplets(n, &mt),
    }
}

/// A mesh together with its assembled operators and lumped mass.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub ops: Operators,
    pub lumped: Vec<f64>,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let ops = assemble_operators(&mesh);
        let lumped = mesh.lumped_mass();
        Self { mesh, ops, lumped }
    }

    pub fn uniform(graph: &MetricGraph, h_target: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(Mesh::uniform(graph, h_target)?)))
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    pub fn graph(&self) -> &MetricGraph {
        self.mesh.graph()
    }

    /// `∫ u²`
    pub fn mass(&self, u: &[f64]) -> f64 {
        self.ops.mass.quadratic(u)
    }

    /// `∫ |u'|²`
    pub fn kinetic(&self, u: &[f64]) -> f64 {
        self.ops.stiffness.quadratic(u)
    }

    pub fn function(&self, values: Vec<f64>) -> Result<GraphFunction> {
        GraphFunction::new(Arc::clone(&self.mesh), values)
    }
}

#[inline]
pub(crate) fn abs_pow(x: f64, q: f64) -> f64 {
    let a = x.abs();
    if q == 2.0 {
        a * a
    } else if q.fract() == 0.0 && (0.0..=64.0).contains(&q) {
        a.powi(q as i32)
    } else {
        a.powf(q)
    }
}

/// `Ku` summed element by element from the differences `(u_a − u_b)/h`.
/// On strongly graded meshes `u/h` is far larger than the result, and the
/// row-wise product loses those digits to cancellation.
pub fn stiffness_action(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_dofs()];
    for el in mesh.elements() {
        let f = (u[el.a] - u[el.b]) / el.h;
        out[el.a] += f;
        out[el.b] -= f;
    }
    out
}

/// `∫_G |u_h|^q` for the P1 interpolant `u_h`.
pub fn integrate_power(mesh: &Mesh, u: &[f64], q: f64) -> f64 {
    let mut total = 0.0;
    for el in mesh.elements() {
        let (ua, ub) = (u[el.a], u[el.b]);
        let mut s = 0.0;
        for &(xi, w) in &GAUSS3 {
            s += w * abs_pow(ua + xi * (ub - ua), q);
        }
        total += el.h * s;
    }
    total
}

/// `N(u)_i = ∫ |u_h|^{p-2} u_h φ_i`.
pub fn nonlinear_load(mesh: &Mesh, u: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_dofs()];
    for el in mesh.elements() {
        let (ua, ub) = (u[el.a], u[el.b]);
        let (mut fa, mut fb) = (0.0, 0.0);
        for &(xi, w) in &GAUSS3 {
            let ug = ua + xi * (ub - ua);
            let val = w * abs_pow(ug, p - 2.0) * ug;
            fa += val * (1.0 - xi);
            fb += val * xi;
        }
        out[el.a] += el.h * fa;
        out[el.b] += el.h * fb;
    }
    out
}

/// `W(u)_ij = ∫ |u_h|^{p-2} φ_i φ_j`, on the same pattern as `K` and `M`.
pub fn weighted_mass(mesh: &Mesh, u: &[f64], p: f64) -> CsrMatrix {
    let mut t = Vec::with_capacity(4 * mesh.elements().len());
    for el in mesh.elements() {
        let (ua, ub) = (u[el.a], u[el.b]);
        let (mut aa, mut ab, mut bb) = (0.0, 0.0, 0.0);
        for &(xi, w) in &GAUSS3 {
            let ug = ua + xi * (ub - ua);
            let wt = w * abs_pow(ug, p - 2.0);
            aa += wt * (1.0 - xi) * (1.0 - xi);
            ab += wt * (1.0 - xi) * xi;
            bb += wt * xi * xi;
        }
        let h = el.h;
        t.extend_from_slice(&[
            (el.a, el.a, h * aa),
            (el.a, el.b, h * ab),
            (el.b, el.a, h * ab),
            (el.b, el.b, h * bb),
        ]);
    }
    CsrMatrix::from_triplets(mesh.num_dofs(), &t)
}

/// Largest value of `|u_h|^{p-2}` over the quadrature points.
pub fn max_weight(mesh: &Mesh, u: &[f64], p: f64) -> f64 {
    let mut m: f64 = 0.0;
    for el in mesh.elements() {
        let (ua, ub) = (u[el.a], u[el.b]);
        for &(xi, _) in &GAUSS3 {
            m = m.max(abs_pow(ua + xi * (ub - ua), p - 2.0));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{standard_graph, StandardKind};
    use crate::linalg::norm_inf;

    #[test]
    fn interval_two_elements_stiffness() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let mesh = Mesh::uniform(&g, 0.5).unwrap();
        let ops = assemble_operators(&mesh);
        // DOFs: v0 = 0, v1 = 1, interior = 2
        let dense = ops.stiffness.to_dense();
        let expected = [[2.0, 0.0, -2.0], [0.0, 2.0, -2.0], [-2.0, -2.0, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(dense[i][j], expected[i][j]);
            }
        }
    }

    #[test]
    fn constants_in_kernel_and_partition_of_unity() {
        for g in [
            standard_graph(StandardKind::Star(3), &[1.0, 0.4, 2.2]).unwrap(),
            standard_graph(StandardKind::Dumbbell, &[1.0, 0.5, 1.5]).unwrap(),
            standard_graph(StandardKind::Cycle, &[2.0]).unwrap(),
        ] {
            let mesh = Mesh::uniform(&g, 0.03).unwrap();
            let ops = assemble_operators(&mesh);
            let ones = vec![1.0; mesh.num_dofs()];
            assert!(norm_inf(&ops.stiffness.mul_vec(&ones)) < 1e-10);
            let l = ops.mass.quadratic(&ones);
            assert!(((l - g.total_length()) / g.total_length()).abs() < 1e-14);
            assert_eq!(ops.stiffness.asymmetry(), 0.0);
            assert_eq!(ops.mass.asymmetry(), 0.0);
        }
    }

    #[test]
    fn power_integrals_of_linear_function() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let u: Vec<f64> = (0..mesh.num_dofs()).map(|d| mesh.coordinate(d).s).collect();
        assert!((integrate_power(&mesh, &u, 1.0) - 0.5).abs() < 1e-15);
        assert!((integrate_power(&mesh, &u, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        let ones = vec![1.0; mesh.num_dofs()];
        assert!((integrate_power(&mesh, &ones, 7.3) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn load_and_weighted_mass_consistency() {
        let g = standard_graph(StandardKind::Star(3), &[1.0]).unwrap();
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let u: Vec<f64> = (0..mesh.num_dofs()).map(|i| 0.5 + 0.3 * (i as f64).sin()).collect();
        let p = 8.0;
        // uᵀN(u) = ∫|u|^p, uᵀW(u)u = ∫|u|^p
        let n = nonlinear_load(&mesh, &u, p);
        let ip = integrate_power(&mesh, &u, p);
        assert!((crate::linalg::dot(&u, &n) - ip).abs() < 1e-13 * ip);
        let w = weighted_mass(&mesh, &u, p);
        assert!((w.quadratic(&u) - ip).abs() < 1e-13 * ip);
        let ops = assemble_operators(&mesh);
        assert!(w.same_pattern(&ops.mass));
    }
}
