//! Mass descent toward blow-up on meshes that follow the concentrating peak.
//!
//! A single mesh cannot serve the whole descent: each halving of the mass
//! multiplies `λ` by `2^{2(p−2)/(p−6)}` (64 for `p = 8`), and
//! elements small enough for the final width put the nodal roundoff of the
//! early, wide states far above the strong residual tolerance. Every step
//! therefore gets its own mesh graded toward the peak, with a smallest
//! element proportional to the predicted width `λ^{−1/2}`.

use std::sync::Arc;

use log::debug;

use super::soliton::soliton_line;
use crate::discretize::{Discretization, Mesh, MeshGrading};
use crate::energy::{EnergyParams, MorseConfig};
use crate::error::{Error, Result};
use crate::graph::{standard_graph, EdgeCoordinate, MetricGraph, StandardKind};
use crate::solvers::{
    newton_solve, verify_solution, BoundState, ContinuationConfig, ContinuationTrace, Origin, Parameter, TraceEntry,
};

/// Mesh family for descent runs. With `ε = λ^{−1/2}` and `ℓ` the length of
/// the peak's edge, the element size at distance `d` from the peak is
/// `clamp(rate · d · (d/ℓ)^γ, h_min_rel · ε · (ε/ℓ)^γ, h_max)`: in units of
/// `ε` the near-peak mesh shrinks by `(ε/ℓ)^γ`, so the resolution of the
/// rescaled profile improves slowly as `λ` grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSetup {
    /// Length of the interval used by [`DescentSetup::graph`].
    pub length: f64,
    pub h_max: f64,
    pub h_min_rel: f64,
    pub rate: f64,
    pub exponent: f64,
}

impl Default for DescentSetup {
    fn default() -> Self {
        Self {
            length: 20.0,
            h_max: 20.0 / 256.0,
            // finer relative resolution at the last halvings would put the
            // second differences of u below float64 precision
            h_min_rel: 2e-2,
            rate: 8.7e-3,
            exponent: 0.1,
        }
    }
}

impl DescentSetup {
    pub fn graph(&self) -> Result<MetricGraph> {
        standard_graph(StandardKind::Interval, &[self.length])
    }

    /// Mesh graded toward the interior point `at` for a peak of width `eps`.
    pub fn discretization(&self, g: &MetricGraph, at: EdgeCoordinate, eps: f64) -> Result<Discretization> {
        let ell = g
            .edges()
            .get(at.edge)
            .ok_or_else(|| Error::InvalidCoordinate(format!("edge {}", at.edge)))?
            .length;
        let grading = MeshGrading {
            vertices: Vec::new(),
            h_min: (self.h_min_rel * eps * (eps / ell).powf(self.exponent)).min(self.h_max),
            rate: self.rate,
            exponent: self.exponent,
        };
        Ok(Discretization::new(Arc::new(Mesh::graded_at(g, at, self.h_max, &grading)?)))
    }
}

/// Midpoint of the longest edge.
pub fn midpoint(g: &MetricGraph) -> EdgeCoordinate {
    let e = g.longest_edge();
    EdgeCoordinate {
        edge: e,
        s: 0.5 * g.edges()[e].length,
    }
}

fn nearest_node(d: &Discretization, at: EdgeCoordinate) -> usize {
    let em = &d.mesh.edge_meshes()[at.edge];
    let k = (0..em.dofs.len())
        .min_by(|&a, &b| {
            (em.from_tail[a] - at.s)
                .abs()
                .partial_cmp(&(em.from_tail[b] - at.s).abs())
                .unwrap()
        })
        .expect("edge has nodes");
    em.dofs[k]
}

/// Bound state of mass `params.mu` by Newton from the line soliton of that
/// mass centred at the node nearest `at`.
pub fn centred_soliton_state(
    d: &Discretization,
    at: EdgeCoordinate,
    params: &EnergyParams,
    tol: f64,
    morse: Option<&MorseConfig>,
) -> Result<BoundState> {
    params.validate()?;
    let p = params.p;
    let line = soliton_line(p)?;
    let centre = nearest_node(d, at);
    // −u'' + λu = ρu^{p−1} is solved by ρ^{−1/(p−2)} times the ρ = 1 soliton
    let rho_scale = params.rho.powf(-1.0 / (p - 2.0));
    let omega = line.frequency_for_mass(params.mu / (rho_scale * rho_scale));
    let mut u: Vec<f64> = (0..d.num_dofs())
        .map(|i| rho_scale * line.scaled(omega, d.mesh.node_distance(centre, i)))
        .collect();
    let scale = (params.mu / d.mass(&u)).sqrt();
    u.iter_mut().for_each(|x| *x *= scale);
    crate::solvers::newton_refine(d, &u, omega, params, tol, morse)
}

/// Width a soliton of mass `mu` would have, `λ^{−1/2}`.
pub fn soliton_width(params: &EnergyParams) -> Result<f64> {
    let line = soliton_line(params.p)?;
    let rho_scale = params.rho.powf(-1.0 / (params.p - 2.0));
    Ok(line.frequency_for_mass(params.mu / (rho_scale * rho_scale)).powf(-0.5))
}

/// Halves the mass `halvings` times starting from `params.mu`, from a
/// soliton centred at `at` (an interior point of `g`). Each step is
/// predicted by the exact line scaling `u ↦ a·u(P + b(x − P))` of the
/// previous state about its peak, interpolated onto a fresh mesh and
/// corrected by bordered Newton. The trace entries carry their own meshes.
pub fn mass_descent(
    setup: &DescentSetup,
    g: &MetricGraph,
    at: EdgeCoordinate,
    params: &EnergyParams,
    halvings: usize,
    cfg: &ContinuationConfig,
) -> Result<ContinuationTrace> {
    let p = params.p;
    let q = 2.0 / (p - 2.0) - 0.5;
    let d0 = setup.discretization(g, at, soliton_width(params)?)?;
    let first = centred_soliton_state(&d0, at, params, cfg.newton.tol, cfg.morse.as_ref())?;
    let report = verify_solution(&d0, &first);
    let mut entries = vec![TraceEntry {
        parameter: params.mu,
        state: first,
        report,
        substeps: 0,
        newton_iterations: 0,
    }];
    let mut rejected = 0;
    for k in 1..=halvings {
        let prev = &entries[k - 1].state;
        let next = prev.params.with_mu(0.5 * prev.params.mu);
        let ratio = 0.5f64.powf(1.0 / q);
        let lambda_pred = prev.lambda * ratio;
        let vals = prev.values();
        let imax = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
        let peak = prev.u.mesh().coordinate(imax);
        if prev.u.mesh().node_distance_to_vertices(imax) == 0.0 {
            return Err(Error::InvalidParameter("descent needs an interior peak".into()));
        }
        let d = setup.discretization(g, peak, lambda_pred.powf(-0.5))?;
        let (a, b) = (ratio.powf(1.0 / (p - 2.0)), ratio.sqrt());
        let len = g.edges()[peak.edge].length;
        let mut u: Vec<f64> = (0..d.num_dofs())
            .map(|i| {
                let x = d.mesh.coordinate(i);
                if x.edge != peak.edge {
                    return 0.0;
                }
                let s = peak.s + b * (x.s - peak.s);
                if (0.0..=len).contains(&s) {
                    a * prev.u.eval(EdgeCoordinate { edge: peak.edge, s })
                } else {
                    0.0
                }
            })
            .collect();
        let scale = (next.mu / d.mass(&u)).sqrt();
        u.iter_mut().for_each(|x| *x *= scale);
        let out = newton_solve(&d, &u, lambda_pred, &next, &cfg.newton).inspect_err(|_| rejected += 1)?;
        debug!("descent step {k}: λ = {:e} after {} Newton iterations", out.lambda, out.iterations);
        let f = d.function(out.u)?;
        let state = BoundState::evaluate(&d, f, out.lambda, next, cfg.morse.as_ref(), Origin::Continuation)?;
        let report = verify_solution(&d, &state);
        entries.push(TraceEntry {
            parameter: next.mu,
            state,
            report,
            substeps: 1,
            newton_iterations: out.iterations,
        });
    }
    Ok(ContinuationTrace {
        parameter: Parameter::Mu,
        accepted_steps: halvings,
        rejected_steps: rejected,
        entries,
    })
}
