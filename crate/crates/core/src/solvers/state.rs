use std::fmt;

use crate::discretize::{integrate_power, Discretization, GraphFunction};
use crate::energy::{
    constrained_gradient_unchecked, energy, integral, morse_index, multiplier, residual_scale, strong_residual,
    EnergyParams, MorseConfig, MorseIndex, MASS_RTOL,
};
use crate::error::Result;

/// Nodes may dip this far below zero, relative to the maximum, and still
/// count as a positive solution.
pub const POSITIVITY_RTOL: f64 = 1e-10;

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const IDENTITY_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Nodal residual of the constrained gradient at the best-fit multiplier.
    pub constrained_gradient: f64,
    /// Relative interior strong residual at the state's own `λ`.
    pub interior: f64,
    /// Largest absolute Kirchhoff defect.
    pub max_kirchhoff: f64,
    /// Worst relative residual over interior nodes and vertices.
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Constant,
    Minimizer,
    MountainPass,
    Refined,
    Continuation,
}

#[derive(Debug, Clone)]
pub struct BoundState {
    pub u: GraphFunction,
    pub lambda: f64,
    pub params: EnergyParams,
    pub energy: f64,
    pub mass: f64,
    pub residuals: Residuals,
    pub morse: Option<MorseIndex>,
    pub origin: Origin,
}

impl BoundState {
    /// Evaluates all derived quantities of `(u, λ)`. The Morse index is
    /// computed only when a config is given.
    pub fn evaluate(
        d: &Discretization,
        u: GraphFunction,
        lambda: f64,
        params: EnergyParams,
        morse: Option<&MorseConfig>,
        origin: Origin,
    ) -> Result<Self> {
        let vals = u.values();
        let sr = strong_residual(d, vals, lambda, &params);
        let gc = constrained_gradient_unchecked(d, vals, &params);
        let lam_fit = multiplier(d, vals, &params);
        let scale = residual_scale(vals, lam_fit, &params);
        let cg = (0..gc.len()).fold(0.0f64, |m, i| m.max((gc[i] / d.lumped[i]).abs()));
        let residuals = Residuals {
            constrained_gradient: if scale > 0.0 { cg / scale } else { cg },
            interior: sr.interior,
            max_kirchhoff: sr.max_kirchhoff(),
            combined: sr.combined(),
        };
        let morse = match morse {
            Some(cfg) => Some(morse_index(d, vals, lambda, &params, cfg)?),
            None => None,
        };
        Ok(Self {
            energy: energy(d, vals, &params),
            mass: d.mass(vals),
            lambda,
            params,
            residuals,
            morse,
            origin,
            u,
        })
    }

    pub fn values(&self) -> &[f64] {
        self.u.values()
    }

    pub fn is_positive(&self) -> bool {
        let max = self.u.max();
        max > 0.0 && self.u.min() >= -POSITIVITY_RTOL * max
    }

    /// `max |u − c| / c` for a constant `c`.
    pub fn deviation_from(&self, c: f64) -> f64 {
        self.values().iter().fold(0.0f64, |m, v| m.max((v - c).abs())) / c.abs()
    }
}

/// Constant solution `κ_μ` with `λ = ρ κ^{p−2}`.
pub fn constant_state(d: &Discretization, params: EnergyParams, morse: Option<&MorseConfig>) -> Result<BoundState> {
    params.validate()?;
    let kappa = params.kappa(d.graph().total_length());
    let lambda = params.rho * kappa.powf(params.p - 2.0);
    let u = d.function(vec![kappa; d.num_dofs()])?;
    BoundState::evaluate(d, u, lambda, params, morse, Origin::Constant)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:e} {:e} {}",
                c.name,
                c.value,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Checks a claimed solution against the mass constraint, the strong
/// residual, positivity of `λ` and the three integral identities. Morse
/// bounds are checked for mountain-pass states when an index is attached.
pub fn verify_solution(d: &Discretization, s: &BoundState) -> VerifyReport {
    let u = s.values();
    let pr = &s.params;
    let lambda = s.lambda;
    let mut checks = Vec::new();

    let mass = d.mass(u);
    let v = ((mass - pr.mu) / pr.mu).abs();
    checks.push(Check {
        name: "mass",
        value: v,
        tolerance: MASS_RTOL,
        pass: v <= MASS_RTOL,
    });

    let sr = strong_residual(d, u, lambda, pr).combined();
    checks.push(Check {
        name: "strong_residual",
        value: sr,
        tolerance: RESIDUAL_TOL,
        pass: sr <= RESIDUAL_TOL,
    });

    let positive = s.is_positive();
    checks.push(Check {
        name: "lambda_positive",
        value: lambda,
        tolerance: 0.0,
        pass: !positive || lambda > 0.0,
    });

    let lhs = lambda * integral(d, u);
    let rhs = pr.rho * integrate_power(&d.mesh, u, pr.p - 1.0);
    let v = if positive {
        rel(lhs, rhs, lhs.abs().max(rhs.abs()))
    } else {
        0.0
    };
    checks.push(Check {
        name: "l1_identity",
        value: v,
        tolerance: IDENTITY_RTOL,
        pass: v <= IDENTITY_RTOL,
    });

    let kin = d.kinetic(u);
    let pot = pr.rho * integrate_power(&d.mesh, u, pr.p);
    let lhs = kin + lambda * mass;
    let v = rel(lhs, pot, lhs.abs().max(pot.abs()));
    checks.push(Check {
        name: "nehari_identity",
        value: v,
        tolerance: IDENTITY_RTOL,
        pass: v <= IDENTITY_RTOL,
    });

    let e = energy(d, u, pr);
    let a = (0.5 - 1.0 / pr.p) * kin;
    let b = lambda * mass / pr.p;
    let scale = a.abs().max(b.abs()).max(e.abs());
    let v = rel(a - b, e, scale);
    checks.push(Check {
        name: "energy_identity",
        value: v,
        tolerance: IDENTITY_RTOL,
        pass: v <= IDENTITY_RTOL,
    });

    if s.origin == Origin::MountainPass {
        if let Some(m) = &s.morse {
            checks.push(Check {
                name: "morse_constrained",
                value: m.constrained as f64,
                tolerance: 1.0,
                pass: m.constrained <= 1,
            });
            checks.push(Check {
                name: "morse_unconstrained",
                value: m.unconstrained as f64,
                tolerance: 2.0,
                pass: m.unconstrained <= 2,
            });
        }
    }
    VerifyReport { checks }
}
