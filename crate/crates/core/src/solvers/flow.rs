use std::f64::consts::PI;

use log::debug;

use super::state::{BoundState, Origin};
use crate::discretize::{Discretization, GraphFunction};
use crate::energy::{energy, gradient, multiplier, residual_rows, residual_scale, EnergyParams, MorseConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot, BandLu, CsrMatrix};

/// Sobolev gradient on the mass sphere: `(K + αM)⁻¹ g`, projected onto
/// the tangent space `{φ : φᵀMu = 0}`.
pub struct SobolevGradient {
    a: CsrMatrix,
    lu: BandLu,
}

impl SobolevGradient {
    pub fn new(d: &Discretization, alpha: f64) -> Result<Self> {
        let a = CsrMatrix::combine(&[(1.0, &d.ops.stiffness), (alpha, &d.ops.mass)]);
        Ok(Self {
            lu: BandLu::factor(&a)?,
            a,
        })
    }

    /// Inner product `xᵀ(K + αM)y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.a.bilinear(x, y)
    }

    /// A reasonable `α` for states near `u`.
    pub fn default_alpha(d: &Discretization, u: &[f64], params: &EnergyParams) -> f64 {
        let ell = d.graph().total_length();
        multiplier(d, u, params).abs().max(PI * PI / (ell * ell))
    }

    /// Tangent descent direction `−P g` at `u`.
    pub fn direction(&self, d: &Discretization, u: &[f64], g: &[f64]) -> Vec<f64> {
        let mu = d.ops.mass.mul_vec(u);
        let z = self.lu.solve(g);
        let w = self.lu.solve(&mu);
        let beta = dot(&mu, &z) / dot(&mu, &w);
        z.iter().zip(&w).map(|(zi, wi)| -(zi - beta * wi)).collect()
    }
}

/// `|u|` rescaled to mass `μ`.
pub fn renormalize_abs(d: &Discretization, u: &mut [f64], mu: f64) {
    u.iter_mut().for_each(|x| *x = x.abs());
    let m = d.mass(u);
    if m > 0.0 {
        let c = (mu / m).sqrt();
        u.iter_mut().for_each(|x| *x *= c);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            tol: 1e-9,
            max_iters: 20_000,
        }
    }
}

/// Relative size, against the terms of `E`, of energy increases still
/// accepted by the line search.
pub const ENERGY_SLACK: f64 = 1e-12;

/// `½ Σ|K_ij||u_i||u_j| + |½uᵀKu − E|`, the size of the sums rounded in `E`.
fn energy_magnitude(d: &Discretization, u: &[f64], e: f64) -> f64 {
    let k = &d.ops.stiffness;
    let abs: f64 = (0..k.dim())
        .map(|i| u[i].abs() * k.row(i).map(|(j, v)| v.abs() * u[j].abs()).sum::<f64>())
        .sum();
    0.5 * abs + (0.5 * d.kinetic(u) - e).abs()
}

/// One energy-decreasing step `u ← |u + σ d| / ‖·‖` with halving of `σ`
/// until the energy does not increase by more than `ENERGY_SLACK`.
/// Returns the new state and energy, or `None` when the step collapsed
/// below `1e-14`.
pub(crate) fn descent_step(
    d: &Discretization,
    u: &[f64],
    e0: f64,
    dir: &[f64],
    sigma: &mut f64,
    params: &EnergyParams,
) -> Option<(Vec<f64>, f64)> {
    while *sigma > 1e-14 {
        let mut trial: Vec<f64> = u.iter().zip(dir).map(|(a, b)| a + *sigma * b).collect();
        renormalize_abs(d, &mut trial, params.mu);
        let e = energy(d, &trial, params);
        // near a critical point the decrease drops below the rounding of E,
        // so increases at that level are accepted
        let slack = ENERGY_SLACK * energy_magnitude(d, &trial, e);
        if e <= e0 + slack {
            return Some((trial, e));
        }
        *sigma *= 0.5;
    }
    None
}

/// Constrained residual of `u` at its best-fit multiplier. Rows are
/// measured against `max(|λu|, ρ|u|^{p−1}, π²/ℓ² |u|)`; the last term keeps
/// the scale away from zero when `ρ = 0` and `λ → 0`.
pub fn gradient_residual(d: &Discretization, u: &[f64], params: &EnergyParams) -> f64 {
    let lambda = multiplier(d, u, params);
    let ell = d.graph().total_length();
    let floor = PI * PI / (ell * ell) * u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = residual_scale(u, lambda, params).max(floor);
    let r = residual_rows(d, u, lambda, params);
    let rows = (0..r.len()).fold(0.0f64, |m, i| m.max((r[i] / d.lumped[i]).abs()));
    let rows = if scale > 0.0 { rows / scale } else { rows };
    rows.max(((d.mass(u) - params.mu) / params.mu).abs())
}

/// Where a flow run ended.
#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub u: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The line search collapsed before convergence. Above the threshold
    /// this is how concentration at mesh scale shows up.
    pub stalled: bool,
}

/// Runs the flow and returns the last iterate whether or not it converged.
pub fn flow_iterate(d: &Discretization, u0: &[f64], params: &EnergyParams, cfg: &FlowConfig) -> Result<FlowOutcome> {
    let mut u = u0.to_vec();
    renormalize_abs(d, &mut u, params.mu);
    let pre = SobolevGradient::new(d, SobolevGradient::default_alpha(d, &u, params))?;
    let mut e = energy(d, &u, params);
    let mut sigma = cfg.step;
    let mut res = gradient_residual(d, &u, params);
    let mut iterations = 0;
    let mut stalled = false;
    while res > cfg.tol && iterations < cfg.max_iters {
        let g = gradient(d, &u, params);
        let dir = pre.direction(d, &u, &g);
        match descent_step(d, &u, e, &dir, &mut sigma, params) {
            Some((next, en)) => {
                u = next;
                e = en;
                sigma = (sigma * 1.5).min(4.0 * cfg.step);
            }
            None => {
                stalled = true;
                break;
            }
        }
        iterations += 1;
        res = gradient_residual(d, &u, params);
    }
    debug!("flow stopped after {iterations} steps, residual {res:e}");
    Ok(FlowOutcome {
        u,
        energy: e,
        residual: res,
        iterations,
        converged: res <= cfg.tol,
        stalled,
    })
}

/// Normalized gradient flow with Sobolev preconditioning and energy
/// backtracking. Stops when the constrained residual reaches `cfg.tol`.
pub fn normalized_gradient_flow(
    d: &Discretization,
    u0: &[f64],
    params: &EnergyParams,
    cfg: &FlowConfig,
    morse: Option<&MorseConfig>,
) -> Result<BoundState> {
    let out = flow_iterate(d, u0, params, cfg)?;
    if !out.converged {
        return Err(Error::MaxItersExceeded {
            max_iters: cfg.max_iters,
            residual: out.residual,
        });
    }
    let lambda = multiplier(d, &out.u, params);
    let f = d.function(out.u)?;
    BoundState::evaluate(d, f, lambda, *params, morse, Origin::Minimizer)
}

#[derive(Debug, Clone)]
pub struct Bump {
    pub w: GraphFunction,
    pub t: f64,
    pub doublings: usize,
    /// `E_{1/2}(w)`
    pub energy_half: f64,
    /// `E_1(κ_μ)`
    pub constant_energy: f64,
}

pub const MAX_DOUBLINGS: usize = 60;

/// A `cos²` cap of mass `μ` on the longest edge, concentrated by doubling
/// `t` until its energy at `ρ = 1/2` falls below `E_1(κ_μ)`. The cap is
/// centred at a degree-one endpoint of the edge when there is one (and then
/// truncated to the edge), otherwise at the edge midpoint.
pub fn build_bump(d: &Discretization, params: &EnergyParams) -> Result<Bump> {
    let g = d.graph();
    let e = g.longest_edge();
    let edge = &g.edges()[e];
    let len = edge.length;
    // a bump pressed against a leaf sits lower on the energy landscape than
    // one in the middle of the edge, and a mid-edge bump drifts there anyway
    let centre = if g.degree(edge.tail) == 1 {
        0.0
    } else if g.degree(edge.head) == 1 {
        len
    } else {
        0.5 * len
    };
    let kappa = params.kappa(g.total_length());
    let one = params.with_rho(1.0);
    let half = params.with_rho(0.5);
    let constant_energy = energy(d, &vec![kappa; d.num_dofs()], &one);
    let em = &d.mesh.edge_meshes()[e];
    let mut t = 1.0;
    for doublings in 0..=MAX_DOUBLINGS {
        let support = len.min(1.0) / t;
        let inside = em
            .from_tail
            .iter()
            .filter(|&&s| (s - centre).abs() < 0.5 * support)
            .count();
        if inside < 3 {
            return Err(Error::EdgeTooShort {
                edge: g.edges()[e].id.clone(),
                message: format!("bump support {support:e} covers {inside} mesh nodes at t = {t}"),
            });
        }
        let w = GraphFunction::interpolate(d.mesh.clone(), |x| {
            if x.edge != e {
                return 0.0;
            }
            let y = (x.s - centre) / support;
            if y.abs() < 0.5 {
                (PI * y).cos().powi(2)
            } else {
                0.0
            }
        })?;
        let mut vals = w.into_values();
        renormalize_abs(d, &mut vals, params.mu);
        let energy_half = energy(d, &vals, &half);
        if energy_half < constant_energy {
            return Ok(Bump {
                w: d.function(vals)?,
                t,
                doublings,
                energy_half,
                constant_energy,
            });
        }
        t *= 2.0;
    }
    Err(Error::EdgeTooShort {
        edge: g.edges()[e].id.clone(),
        message: format!("no admissible bump within {MAX_DOUBLINGS} doublings"),
    })
}
