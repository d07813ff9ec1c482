//! The weighted energy on the mass sphere and its first and second
//! variations.

use crate::discretize::{integrate_power, max_weight, nonlinear_load, stiffness_action, weighted_mass, Discretization};
use crate::error::{Error, Result};
use crate::linalg::{dot, lowest_eigenpairs, CsrMatrix, EigenOptions};

/// Relative mass tolerance for states on the constraint.
pub const MASS_RTOL: f64 = 1e-8;

/// Eigenvalues within this distance of `−θ` count as non-negative.
pub const DEGENERATE_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub p: f64,
    pub rho: f64,
    pub mu: f64,
}

impl EnergyParams {
    pub fn new(p: f64, rho: f64, mu: f64) -> Result<Self> {
        let s = Self { p, rho, mu };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 6.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 6, got {}", self.p)));
        }
        if !(0.5..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [1/2, 1], got {}", self.rho)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Self { rho, ..self }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    /// `(μ/ℓ)^{1/2}`
    pub fn kappa(&self, total_length: f64) -> f64 {
        (self.mu / total_length).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseConfig {
    pub theta: f64,
    pub tol: f64,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for MorseConfig {
    fn default() -> Self {
        Self {
            theta: 1e-8,
            tol: 1e-10,
            k_max: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseIndex {
    pub unconstrained: usize,
    pub constrained: usize,
    /// Lowest computed eigenvalues of each pencil, ascending.
    pub unconstrained_spectrum: Vec<f64>,
    pub constrained_spectrum: Vec<f64>,
}

/// `E_ρ(u) = ½∫|u'|² − (ρ/p)∫|u|^p`
pub fn energy(d: &Discretization, u: &[f64], params: &EnergyParams) -> f64 {
    0.5 * d.kinetic(u) - params.rho / params.p * integrate_power(&d.mesh, u, params.p)
}

/// `g = Ku − ρ N(u)`
pub fn gradient(d: &Discretization, u: &[f64], params: &EnergyParams) -> Vec<f64> {
    let mut g = stiffness_action(&d.mesh, u);
    let n = nonlinear_load(&d.mesh, u, params.p);
    for (gi, ni) in g.iter_mut().zip(&n) {
        *gi -= params.rho * ni;
    }
    g
}

/// `(ρ∫|u|^p − ∫|u'|²) / ∫u²` without the mass check.
pub fn multiplier(d: &Discretization, u: &[f64], params: &EnergyParams) -> f64 {
    let m = d.mass(u);
    if m == 0.0 {
        return 0.0;
    }
    (params.rho * integrate_power(&d.mesh, u, params.p) - d.kinetic(u)) / m
}

fn check_mass(d: &Discretization, u: &[f64], params: &EnergyParams) -> Result<()> {
    let actual = d.mass(u);
    if ((actual - params.mu) / params.mu).abs() > MASS_RTOL {
        return Err(Error::MassMismatch {
            expected: params.mu,
            actual,
        });
    }
    Ok(())
}

/// Best-fit Lagrange multiplier `λ(u)`.
pub fn lagrange_multiplier(d: &Discretization, u: &[f64], params: &EnergyParams) -> Result<f64> {
    check_mass(d, u, params)?;
    Ok(multiplier(d, u, params))
}

/// `g + λ(u) M u`; orthogonal to `u` by construction.
pub fn constrained_gradient(d: &Discretization, u: &[f64], params: &EnergyParams) -> Result<Vec<f64>> {
    check_mass(d, u, params)?;
    Ok(constrained_gradient_unchecked(d, u, params))
}

pub fn constrained_gradient_unchecked(d: &Discretization, u: &[f64], params: &EnergyParams) -> Vec<f64> {
    let lambda = multiplier(d, u, params);
    let mut g = gradient(d, u, params);
    let mu = d.ops.mass.mul_vec(u);
    for (gi, mi) in g.iter_mut().zip(&mu) {
        *gi += lambda * mi;
    }
    g
}

/// `H = K + λM − (p−1)ρ W(u)`
pub fn hessian_matrix(d: &Discretization, u: &[f64], lambda: f64, params: &EnergyParams) -> CsrMatrix {
    let w = weighted_mass(&d.mesh, u, params.p);
    CsrMatrix::combine(&[
        (1.0, &d.ops.stiffness),
        (lambda, &d.ops.mass),
        (-(params.p - 1.0) * params.rho, &w),
    ])
}

/// `Q(φ; u) = ∫|φ'|² + λ∫φ² − (p−1)ρ∫|u|^{p−2}φ²`
pub fn hessian_form(d: &Discretization, phi: &[f64], u: &[f64], lambda: f64, params: &EnergyParams) -> f64 {
    let w = weighted_mass(&d.mesh, u, params.p);
    d.kinetic(phi) + lambda * d.mass(phi) - (params.p - 1.0) * params.rho * w.quadratic(phi)
}

/// A shift safely below the spectrum of `(H, M)`.
pub(crate) fn lower_shift(d: &Discretization, u: &[f64], lambda: f64, params: &EnergyParams) -> f64 {
    let floor = lambda - (params.p - 1.0) * params.rho * max_weight(&d.mesh, u, params.p);
    floor - 0.05 * floor.abs().max(1.0)
}

fn lowest_of_hessian(
    d: &Discretization,
    h: &CsrMatrix,
    shift: f64,
    count: usize,
    constraints: Vec<Vec<f64>>,
    tol: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let avail = d.num_dofs() - constraints.len();
    let pairs = lowest_eigenpairs(
        h,
        &d.ops.mass,
        &EigenOptions {
            count: count.min(avail),
            shift,
            tol,
            max_iters: 3000,
            seed,
            constraints,
        },
    )?;
    Ok(pairs.values)
}

/// Counts eigenvalues `ν < −θ` of `Hφ = νMφ`, on the whole space and on
/// `{φ : φᵀMu = 0}`. At most `cfg.k_max` eigenvalues are probed.
pub fn morse_index(
    d: &Discretization,
    u: &[f64],
    lambda: f64,
    params: &EnergyParams,
    cfg: &MorseConfig,
) -> Result<MorseIndex> {
    if cfg.theta < 0.0 {
        return Err(Error::InvalidParameter(format!("theta must be >= 0, got {}", cfg.theta)));
    }
    let h = hessian_matrix(d, u, lambda, params);
    let shift = lower_shift(d, u, lambda, params);
    let full = lowest_of_hessian(d, &h, shift, cfg.k_max, Vec::new(), cfg.tol, cfg.seed)?;
    let constrained = lowest_of_hessian(d, &h, shift, cfg.k_max, vec![u.to_vec()], cfg.tol, cfg.seed)?;
    let cut = -cfg.theta - DEGENERATE_MARGIN;
    let count = |v: &[f64]| v.iter().filter(|&&x| x < cut).count();
    Ok(MorseIndex {
        unconstrained: count(&full),
        constrained: count(&constrained),
        unconstrained_spectrum: full,
        constrained_spectrum: constrained,
    })
}

/// Smallest eigenvalue of the Hessian pencil restricted to `{φ : φᵀMu = 0}`.
pub fn constrained_hessian_min_eig(d: &Discretization, u: &[f64], lambda: f64, params: &EnergyParams) -> Result<f64> {
    let h = hessian_matrix(d, u, lambda, params);
    let shift = lower_shift(d, u, lambda, params);
    let v = lowest_of_hessian(d, &h, shift, 1, vec![u.to_vec()], 1e-10, 0)?;
    Ok(v[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongResidual {
    /// Max over interior nodes of `|−u'' + λu − ρ|u|^{p−2}u|`, relative to
    /// `max(|λu|, ρ|u|^{p−1})`.
    pub interior: f64,
    /// Per vertex: sum of outgoing derivatives.
    pub kirchhoff: Vec<f64>,
    /// Per vertex defect relative to the same scale as `interior`.
    pub kirchhoff_relative: Vec<f64>,
    pub scale: f64,
}

impl StrongResidual {
    pub fn max_kirchhoff(&self) -> f64 {
        self.kirchhoff.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Worst of the interior and relative vertex residuals.
    pub fn combined(&self) -> f64 {
        self.kirchhoff_relative.iter().fold(self.interior, |m, v| m.max(*v))
    }
}

/// Nodal residual rows `Ku + λMu − ρN(u)`.
pub fn residual_rows(d: &Discretization, u: &[f64], lambda: f64, params: &EnergyParams) -> Vec<f64> {
    let mut r = gradient(d, u, params);
    let mu = d.ops.mass.mul_vec(u);
    for (ri, mi) in r.iter_mut().zip(&mu) {
        *ri += lambda * mi;
    }
    r
}

/// Residual scale `max_i max(|λu_i|, ρ|u_i|^{p−1})`.
pub fn residual_scale(u: &[f64], lambda: f64, params: &EnergyParams) -> f64 {
    u.iter().fold(0.0, |m: f64, &x| {
        m.max((lambda * x).abs()).max(params.rho * x.abs().powf(params.p - 1.0))
    })
}

/// Strong form residual. Each residual row divided by `∫φ_i` is the three
/// point second difference of `u` plus the equation's zero order terms; at
/// a vertex the same row is the flux balance of one sided differences.
pub fn strong_residual(d: &Discretization, u: &[f64], lambda: f64, params: &EnergyParams) -> StrongResidual {
    let r = residual_rows(d, u, lambda, params);
    let scale = residual_scale(u, lambda, params);
    let rel = |x: f64| if scale > 0.0 { x / scale } else { x };
    let nv = d.graph().num_vertices();
    let interior = (nv..r.len()).fold(0.0, |m: f64, i| m.max(rel((r[i] / d.lumped[i]).abs())));
    let kirchhoff: Vec<f64> = (0..nv).map(|v| -r[v]).collect();
    let kirchhoff_relative = (0..nv).map(|v| rel((r[v] / d.lumped[v]).abs())).collect();
    StrongResidual {
        interior,
        kirchhoff,
        kirchhoff_relative,
        scale,
    }
}

/// `∫ u`
pub fn integral(d: &Discretization, u: &[f64]) -> f64 {
    dot(&d.lumped, u)
}
