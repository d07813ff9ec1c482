use log::debug;

use super::newton::{branch_tangent, newton_solve, NewtonConfig};
use super::state::{verify_solution, BoundState, Origin, VerifyReport};
use crate::discretize::Discretization;
use crate::energy::{EnergyParams, MorseConfig};
use crate::error::{Error, Result};
use crate::linalg::norm_inf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Rho,
    Mu,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Rho => "rho",
            Parameter::Mu => "mu",
        }
    }

    fn get(self, p: &EnergyParams) -> f64 {
        match self {
            Parameter::Rho => p.rho,
            Parameter::Mu => p.mu,
        }
    }

    fn set(self, p: &EnergyParams, v: f64) -> EnergyParams {
        match self {
            Parameter::Rho => p.with_rho(v),
            Parameter::Mu => p.with_mu(v),
        }
    }

    /// Stepping variable: `ρ` itself, `log μ` for the mass.
    fn to_step(self, v: f64) -> f64 {
        match self {
            Parameter::Rho => v,
            Parameter::Mu => v.ln(),
        }
    }

    fn from_step(self, s: f64) -> f64 {
        match self {
            Parameter::Rho => s,
            Parameter::Mu => s.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub parameter: Parameter,
    /// Grid values after the initial state, strictly monotone.
    pub values: Vec<f64>,
}

impl Schedule {
    /// `from + step, from + 2·step, …` up to and including `to`.
    pub fn rho_grid(from: f64, to: f64, step: f64) -> Self {
        let n = ((to - from) / step).round() as usize;
        let values = (1..=n)
            .map(|k| if k == n { to } else { from + step * k as f64 })
            .collect();
        Self {
            parameter: Parameter::Rho,
            values,
        }
    }

    /// `μ₀ 2^{−k}` for `k = 1..=halvings`.
    pub fn mu_halvings(mu0: f64, halvings: usize) -> Self {
        Self {
            parameter: Parameter::Mu,
            values: (1..=halvings).map(|k| mu0 * 0.5f64.powi(k as i32)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationConfig {
    pub newton: NewtonConfig,
    /// Smallest step in the stepping variable before giving up.
    pub step_floor: f64,
    /// Largest accepted change `‖u_new − u_pred‖_∞ / ‖u_pred‖_∞`.
    pub max_jump: f64,
    pub morse: Option<MorseConfig>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            step_floor: 1e-6,
            max_jump: 0.5,
            morse: Some(MorseConfig::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub parameter: f64,
    pub state: BoundState,
    pub report: VerifyReport,
    /// Sub-steps taken to reach this grid point.
    pub substeps: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ContinuationTrace {
    pub parameter: Parameter,
    pub entries: Vec<TraceEntry>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl ContinuationTrace {
    pub fn last(&self) -> &TraceEntry {
        self.entries.last().expect("trace holds the initial state")
    }
}

/// One predictor-corrector attempt from `(u, λ)` at `params` to `target`.
fn attempt(
    d: &Discretization,
    u: &[f64],
    lambda: f64,
    params: &EnergyParams,
    parameter: Parameter,
    target: f64,
    cfg: &ContinuationConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    let (du, dl) = branch_tangent(d, u, lambda, params, parameter)?;
    let cur = parameter.get(params);
    let delta = target - cur;
    let pred_u: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + delta * b).collect();
    let pred_l = lambda + delta * dl;
    let next = parameter.set(params, target);
    let out = newton_solve(d, &pred_u, pred_l, &next, &cfg.newton)?;
    let jump = out.u.iter().zip(&pred_u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / norm_inf(&pred_u);
    if jump > cfg.max_jump {
        return Err(Error::Diverged {
            iterations: out.iterations,
            residual: jump,
        });
    }
    Ok((out.u, out.lambda, out.iterations))
}

/// Natural-parameter continuation with a tangent predictor and Newton
/// corrector. Steps that fail are halved down to `cfg.step_floor`.
pub fn continuation(
    d: &Discretization,
    initial: BoundState,
    schedule: &Schedule,
    cfg: &ContinuationConfig,
) -> Result<ContinuationTrace> {
    let parameter = schedule.parameter;
    let mut params = initial.params;
    let start = parameter.get(&params);
    let mut prev = start;
    for &v in &schedule.values {
        if (v - prev) * (schedule.values[0] - start) <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{} schedule is not strictly monotone at {v}",
                parameter.name()
            )));
        }
        prev = v;
    }
    let report = verify_solution(d, &initial);
    let mut entries = vec![TraceEntry {
        parameter: start,
        report,
        state: initial.clone(),
        substeps: 0,
        newton_iterations: 0,
    }];
    let mut u = initial.values().to_vec();
    let mut lambda = initial.lambda;
    let (mut accepted, mut rejected) = (0, 0);
    let mut step: Option<f64> = None;
    for &goal in &schedule.values {
        let goal_s = parameter.to_step(goal);
        let mut substeps = 0;
        let mut iters = 0;
        loop {
            let cur_s = parameter.to_step(parameter.get(&params));
            let remaining = goal_s - cur_s;
            let mut h = step.map_or(remaining, |s| s.abs().min(remaining.abs()) * remaining.signum());
            let at_goal = |h: f64| (h - remaining).abs() <= 1e-14 * remaining.abs().max(1.0);
            loop {
                let target = if at_goal(h) { goal } else { parameter.from_step(cur_s + h) };
                let result = attempt(d, &u, lambda, &params, parameter, target, cfg).and_then(|(nu, nl, it)| {
                    if at_goal(h) {
                        let f = d.function(nu.clone())?;
                        let s = BoundState::evaluate(d, f, nl, parameter.set(&params, target), None, Origin::Continuation)?;
                        let rep = verify_solution(d, &s);
                        if !rep.all_pass() {
                            return Err(Error::Diverged {
                                iterations: it,
                                residual: s.residuals.combined,
                            });
                        }
                    }
                    Ok((nu, nl, it))
                });
                match result {
                    Ok((nu, nl, it)) => {
                        debug!("{} step to {target:e} accepted ({it} Newton iterations)", parameter.name());
                        u = nu;
                        lambda = nl;
                        params = parameter.set(&params, target);
                        accepted += 1;
                        substeps += 1;
                        iters += it;
                        step = Some(if it <= 4 { 2.0 * h } else { h });
                        break;
                    }
                    Err(e) => {
                        debug!("{} step to {target:e} rejected: {e}", parameter.name());
                        rejected += 1;
                        h *= 0.5;
                        if h.abs() < cfg.step_floor {
                            return Err(Error::StepFloorReached {
                                floor: cfg.step_floor,
                                parameter: parameter.from_step(cur_s),
                            });
                        }
                    }
                }
            }
            if parameter.get(&params) == goal {
                break;
            }
        }
        let f = d.function(u.clone())?;
        let state = BoundState::evaluate(d, f, lambda, params, cfg.morse.as_ref(), Origin::Continuation)?;
        let report = verify_solution(d, &state);
        entries.push(TraceEntry {
            parameter: goal,
            state,
            report,
            substeps,
            newton_iterations: iters,
        });
    }
    Ok(ContinuationTrace {
        parameter,
        entries,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}
