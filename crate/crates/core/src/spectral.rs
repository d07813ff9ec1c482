//! Low eigenpairs of the Kirchhoff Laplacian and `λ₂(G)`.

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;

use crate::discretize::{assemble_operators, GraphFunction, Mesh, Operators};
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{axpy, lowest_eigenpairs, norm2, EigenOptions};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Relative gap under which eigenvalues are treated as one cluster.
pub const CLUSTER_RTOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Ascending; the first entry is the zero mode.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenfunctions.
    pub eigenfunctions: Vec<GraphFunction>,
    pub residuals: Vec<f64>,
}

/// The `k` smallest eigenpairs of `K φ = λ M φ`. The constant mode is
/// returned exactly and deflated from the iteration by M-orthogonal
/// projection.
pub fn eigenpairs(mesh: &Arc<Mesh>, ops: &Operators, k: usize, tol: f64, seed: u64) -> Result<SpectralResult> {
    if k < 2 {
        return Err(Error::InvalidParameter("eigenpairs needs k >= 2".into()));
    }
    let n = mesh.num_dofs();
    let ell = mesh.graph().total_length();
    let ones = vec![1.0; n];
    let constant: Vec<f64> = vec![1.0 / ell.sqrt(); n];
    let mut residual0 = ops.stiffness.mul_vec(&constant);
    let scale0 = norm2(&ops.mass.mul_vec(&constant));
    let res0 = norm2(&residual0) / scale0;
    residual0.clear();

    let shift = -0.25 * PI * PI / (ell * ell);
    let pairs = lowest_eigenpairs(
        &ops.stiffness,
        &ops.mass,
        &EigenOptions {
            count: k - 1,
            shift,
            tol,
            max_iters: 2000,
            seed,
            constraints: vec![ones],
        },
    )?;
    let mut eigenvalues = vec![0.0];
    let mut eigenfunctions = vec![GraphFunction::new(Arc::clone(mesh), constant)?];
    let mut residuals = vec![res0];
    for ((v, x), r) in pairs.values.into_iter().zip(pairs.vectors).zip(pairs.residuals) {
        eigenvalues.push(v);
        eigenfunctions.push(GraphFunction::new(Arc::clone(mesh), x)?);
        residuals.push(r);
    }
    Ok(SpectralResult {
        eigenvalues,
        eigenfunctions,
        residuals,
    })
}

#[derive(Debug, Clone)]
pub struct Lambda2 {
    pub value: f64,
    pub multiplicity: usize,
    /// An M-normalized, mean-zero eigenfunction for `λ₂`.
    pub eigenfunction: GraphFunction,
    /// `π² / ℓ²`
    pub lower_bound: f64,
    pub bound_holds: bool,
}

/// First positive Kirchhoff eigenvalue on a uniform mesh of spacing
/// `h_target`, with the lower bound `λ₂ ≥ π²/ℓ²` checked.
pub fn lambda2(g: &MetricGraph, h_target: f64, tol: f64) -> Result<Lambda2> {
    let mesh = Arc::new(Mesh::uniform(g, h_target)?);
    let ops = assemble_operators(&mesh);
    lambda2_on(&mesh, &ops, tol, 0)
}

pub fn lambda2_on(mesh: &Arc<Mesh>, ops: &Operators, tol: f64, seed: u64) -> Result<Lambda2> {
    let k = 5.min(mesh.num_dofs());
    let spec = eigenpairs(mesh, ops, k, tol, seed)?;
    let ell = mesh.graph().total_length();
    let zero_tol = tol.max(1e-12) / (ell * ell);
    let first = spec
        .eigenvalues
        .iter()
        .position(|&v| v > zero_tol)
        .ok_or(Error::NoConvergence {
            max_iters: 0,
            residual: f64::NAN,
        })?;
    let value = spec.eigenvalues[first];
    let multiplicity = spec.eigenvalues[first..]
        .iter()
        .take_while(|&&v| (v - value).abs() <= CLUSTER_RTOL * value)
        .count();
    let lower_bound = PI * PI / (ell * ell);
    let bound_holds = value >= lower_bound - tol;
    if !bound_holds {
        warn!(
            "λ₂ = {value} violates the lower bound π²/ℓ² = {lower_bound}; discretization error is suspect"
        );
    }
    Ok(Lambda2 {
        value,
        multiplicity,
        eigenfunction: spec.eigenfunctions[first].clone(),
        lower_bound,
        bound_holds,
    })
}

/// Rayleigh quotient `φᵀKφ / φᵀMφ`.
pub fn rayleigh_quotient(ops: &Operators, phi: &[f64]) -> f64 {
    ops.stiffness.quadratic(phi) / ops.mass.quadratic(phi)
}

/// Removes the mean of `phi` (M-orthogonal projection against constants).
pub fn remove_mean(ops: &Operators, phi: &mut [f64]) {
    let ones = vec![1.0; phi.len()];
    let m1 = ops.mass.mul_vec(&ones);
    let mean = crate::linalg::dot(&m1, phi) / crate::linalg::dot(&m1, &ones);
    axpy(-mean, &ones, phi);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{standard_graph, StandardKind};
    use crate::linalg::dot;

    #[test]
    fn interval_lambda2() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let l2 = lambda2(&g, 1.0 / 128.0, DEFAULT_TOL).unwrap();
        assert!(((l2.value - PI * PI) / (PI * PI)).abs() < 1e-3);
        assert_eq!(l2.multiplicity, 1);
        assert!(l2.bound_holds);
    }

    #[test]
    fn cycle_lambda2_is_double() {
        let g = standard_graph(StandardKind::Cycle, &[1.0]).unwrap();
        let l2 = lambda2(&g, 1.0 / 128.0, DEFAULT_TOL).unwrap();
        let exact = 4.0 * PI * PI;
        assert!(((l2.value - exact) / exact).abs() < 1e-3);
        assert_eq!(l2.multiplicity, 2);
    }

    #[test]
    fn zero_mode_and_orthonormality() {
        let g = standard_graph(StandardKind::Star(3), &[1.0, 0.7, 1.6]).unwrap();
        let mesh = Arc::new(Mesh::uniform(&g, 0.02).unwrap());
        let ops = assemble_operators(&mesh);
        let spec = eigenpairs(&mesh, &ops, 4, DEFAULT_TOL, 3).unwrap();
        assert_eq!(spec.eigenvalues[0], 0.0);
        assert!(spec.residuals[0] < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                let mij = ops.mass.bilinear(spec.eigenfunctions[i].values(), spec.eigenfunctions[j].values());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((mij - expect).abs() < 1e-9, "({i},{j}) {mij}");
            }
        }
        for w in spec.eigenvalues.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn lambda2_eigenfunction_is_mean_zero_with_matching_rayleigh_quotient() {
        let g = standard_graph(StandardKind::Dumbbell, &[1.0, 0.5, 1.5]).unwrap();
        let mesh = Arc::new(Mesh::default_for(&g));
        let ops = assemble_operators(&mesh);
        let l2 = lambda2_on(&mesh, &ops, DEFAULT_TOL, 0).unwrap();
        let phi = l2.eigenfunction.values();
        let mean = dot(&ops.mass.mul_vec(&vec![1.0; phi.len()]), phi);
        assert!(mean.abs() < 1e-10);
        assert!(((rayleigh_quotient(&ops, phi) - l2.value) / l2.value).abs() < 1e-10);
    }

    #[test]
    fn second_order_convergence_on_interval() {
        let g = standard_graph(StandardKind::Interval, &[1.0]).unwrap();
        let err = |h: f64| (lambda2(&g, h, DEFAULT_TOL).unwrap().value - PI * PI).abs();
        let ratio = err(1.0 / 16.0) / err(1.0 / 32.0);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}
