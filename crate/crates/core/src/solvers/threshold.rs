use std::f64::consts::PI;

use log::warn;

use crate::discretize::Discretization;
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::spectral::{lambda2_on, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// `ℓ (λ₂/(p−2))^{2/(p−2)}`
    pub mu1: f64,
    pub lambda2: f64,
    /// `ℓ^{(p−6)/(p−2)} (π²/(p−2))^{2/(p−2)}`
    pub lower_bound: f64,
    pub bound_holds: bool,
}

pub fn threshold_from_lambda2(total_length: f64, lambda2: f64, p: f64) -> f64 {
    total_length * (lambda2 / (p - 2.0)).powf(2.0 / (p - 2.0))
}

pub fn threshold_lower_bound(total_length: f64, p: f64) -> f64 {
    total_length.powf((p - 6.0) / (p - 2.0)) * (PI * PI / (p - 2.0)).powf(2.0 / (p - 2.0))
}

/// Mass threshold `μ₁` on a uniform mesh of spacing `h_target`.
pub fn mass_threshold(g: &MetricGraph, p: f64, h_target: f64) -> Result<Threshold> {
    mass_threshold_on(&Discretization::uniform(g, h_target)?, p)
}

pub fn mass_threshold_on(d: &Discretization, p: f64) -> Result<Threshold> {
    if !(p.is_finite() && p > 6.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 6, got {p}")));
    }
    let l2 = lambda2_on(&d.mesh, &d.ops, DEFAULT_TOL, 0)?;
    let ell = d.graph().total_length();
    let mu1 = threshold_from_lambda2(ell, l2.value, p);
    let lower_bound = threshold_lower_bound(ell, p);
    let bound_holds = mu1 >= lower_bound * (1.0 - 1e-12);
    if !bound_holds {
        warn!("mu1 = {mu1} falls below its lower bound {lower_bound}");
    }
    Ok(Threshold {
        mu1,
        lambda2: l2.value,
        lower_bound,
        bound_holds,
    })
}
