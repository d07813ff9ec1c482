use log::debug;

use super::state::{BoundState, Origin};
use crate::discretize::{nonlinear_load, Discretization};
use crate::energy::{hessian_matrix, residual_rows, residual_scale, EnergyParams, MorseConfig};
use crate::error::{Error, Result};
use crate::linalg::{axpy, BorderedSolver};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Smallest damping factor tried before giving up.
    pub min_damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 60,
            min_damping: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub history: Vec<f64>,
}

/// Scaled residual of the bordered system: nodal rows over `∫φ_i`
/// relative to the equation's own scale, and the relative mass defect.
pub fn bordered_residual(d: &Discretization, u: &[f64], lambda: f64, params: &EnergyParams) -> f64 {
    let r = residual_rows(d, u, lambda, params);
    let scale = residual_scale(u, lambda, params);
    let rows = (0..r.len()).fold(0.0f64, |m, i| m.max((r[i] / d.lumped[i]).abs()));
    let rows = if scale > 0.0 { rows / scale } else { rows };
    let mass = ((d.mass(u) - params.mu) / params.mu).abs();
    rows.max(mass)
}

/// Newton's method on `F(u, λ) = (Ku + λMu − ρN(u), ½(uᵀMu − μ))` with the
/// bordered Jacobian, damped by backtracking on the scaled residual.
pub fn newton_solve(
    d: &Discretization,
    u0: &[f64],
    lambda0: f64,
    params: &EnergyParams,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    let mut u = u0.to_vec();
    let mut lambda = lambda0;
    let mut res = bordered_residual(d, &u, lambda, params);
    let mut history = vec![res];
    for it in 0..cfg.max_iters {
        if res <= cfg.tol {
            return Ok(NewtonOutcome {
                u,
                lambda,
                iterations: it,
                history,
            });
        }
        let h = hessian_matrix(d, &u, lambda, params);
        let mu_vec = d.ops.mass.mul_vec(&u);
        let solver = BorderedSolver::new(&h, vec![mu_vec])?;
        let mut f = residual_rows(d, &u, lambda, params);
        f.iter_mut().for_each(|x| *x = -*x);
        let g = [-0.5 * (d.mass(&u) - params.mu)];
        let (du, dl) = solver.solve(&f, &g);
        let mut t = 1.0;
        loop {
            let mut trial = u.clone();
            axpy(t, &du, &mut trial);
            let trial_lambda = lambda + t * dl[0];
            let trial_res = bordered_residual(d, &trial, trial_lambda, params);
            if trial_res.is_finite() && (trial_res < res || trial_res <= cfg.tol) {
                u = trial;
                lambda = trial_lambda;
                res = trial_res;
                break;
            }
            t *= 0.5;
            if t < cfg.min_damping {
                // stagnation at roundoff level counts as convergence when
                // already close to the tolerance
                if res <= 10.0 * cfg.tol {
                    return Ok(NewtonOutcome {
                        u,
                        lambda,
                        iterations: it + 1,
                        history,
                    });
                }
                return Err(Error::Diverged {
                    iterations: it + 1,
                    residual: res,
                });
            }
        }
        debug!("newton it {} residual {:e} damping {}", it + 1, res, t);
        history.push(res);
    }
    if res <= cfg.tol {
        return Ok(NewtonOutcome {
            u,
            lambda,
            iterations: cfg.max_iters,
            history,
        });
    }
    Err(Error::Diverged {
        iterations: cfg.max_iters,
        residual: res,
    })
}

/// Refines an approximate state into a solution of the constrained problem.
pub fn newton_refine(
    d: &Discretization,
    u0: &[f64],
    lambda0: f64,
    params: &EnergyParams,
    tol: f64,
    morse: Option<&MorseConfig>,
) -> Result<BoundState> {
    let cfg = NewtonConfig {
        tol,
        ..NewtonConfig::default()
    };
    let out = newton_solve(d, u0, lambda0, params, &cfg)?;
    let u = d.function(out.u)?;
    BoundState::evaluate(d, u, out.lambda, *params, morse, Origin::Refined)
}

/// Tangent of the solution branch with respect to a parameter, from
/// `J (u̇, λ̇) = −∂F/∂t`.
pub(crate) fn branch_tangent(
    d: &Discretization,
    u: &[f64],
    lambda: f64,
    params: &EnergyParams,
    wrt: super::continuation::Parameter,
) -> Result<(Vec<f64>, f64)> {
    let h = hessian_matrix(d, u, lambda, params);
    let mu_vec = d.ops.mass.mul_vec(u);
    let solver = BorderedSolver::new(&h, vec![mu_vec])?;
    let n = u.len();
    let (f, g) = match wrt {
        super::continuation::Parameter::Rho => (nonlinear_load(&d.mesh, u, params.p), 0.0),
        super::continuation::Parameter::Mu => (vec![0.0; n], 0.5),
    };
    let (du, dl) = solver.solve(&f, &[g]);
    Ok((du, dl[0]))
}
