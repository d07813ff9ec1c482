//! Blow-up diagnostics for large `λ`: peaks, rescaled profiles against the
//! line and star solitons, peak separation and the exponential envelope.

pub mod descent;
pub mod peaks;
pub mod soliton;

use std::fmt::Write as _;

pub use descent::{centred_soliton_state, mass_descent, midpoint, soliton_width, DescentSetup};
pub use peaks::{
    decay_envelope_check, detect_peaks, rescale_at_peak, EnvelopeCheck, EnvelopeData, Peak, PeakSet, ProfileSample,
    Regime, RescaleConfig, RescaledProfile, PEAK_SLACK,
};
pub use soliton::{soliton_line, star_soliton, LineSoliton, StarSoliton};

use crate::error::Result;
use crate::solvers::BoundState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupConfig {
    pub rescale: RescaleConfig,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            rescale: RescaleConfig::default(),
            c1: 2.0,
            c2: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub lambda: f64,
    pub p: f64,
    pub window: f64,
    pub degenerate: bool,
    pub profiles: Vec<RescaledProfile>,
    /// `(i, j, λ^{1/2} dist(P_i, P_j))`
    pub separations: Vec<(usize, usize, f64)>,
    pub envelope: EnvelopeCheck,
    /// Largest `C₂` passing with the configured `C₁`.
    pub fitted_c2: f64,
}

impl BlowupReport {
    /// Sup-error of the first interior-regime peak.
    pub fn interior_sup_error(&self) -> Option<f64> {
        self.profiles.iter().find(|p| p.regime == Regime::Interior).map(|p| p.sup_error)
    }
}

pub fn blowup_report(s: &BoundState, cfg: &BlowupConfig) -> Result<BlowupReport> {
    let window = cfg.rescale.window;
    let set = detect_peaks(s, window)?;
    let profiles = set
        .peaks
        .iter()
        .map(|pk| rescale_at_peak(s, pk, &cfg.rescale))
        .collect::<Result<Vec<_>>>()?;
    let data = EnvelopeData::new(s, &set.peaks, window)?;
    Ok(BlowupReport {
        lambda: s.lambda,
        p: s.params.p,
        window,
        degenerate: set.degenerate,
        profiles,
        separations: set.separations,
        envelope: data.check(cfg.c1, cfg.c2),
        fitted_c2: data.fit_rate(cfg.c1),
    })
}

pub const BLOWUP_HEADER: &str = "step,lambda,peak,edge,s,u_peak,epsilon,epsilon_tilde,ratio,vertex_distance_over_epsilon,regime,sup_error,min_separation,c1,c2,envelope_pass,worst_margin,fitted_c2";

/// One row per peak and step; a degenerate state gets one row with empty
/// peak fields.
pub fn blowup_csv(graph: &crate::graph::MetricGraph, reports: &[(usize, BlowupReport)]) -> String {
    let mut out = String::from(BLOWUP_HEADER);
    out.push('\n');
    for (step, r) in reports {
        let sep = r
            .separations
            .iter()
            .map(|s| s.2)
            .reduce(f64::min)
            .map_or(String::new(), |v| format!("{v:e}"));
        let tail = format!(
            "{sep},{:e},{:e},{},{:e},{:e}",
            r.envelope.c1, r.envelope.c2, r.envelope.pass, r.envelope.worst_margin, r.fitted_c2
        );
        if r.profiles.is_empty() {
            let _ = writeln!(out, "{step},{:e},,,,,,,,,,,{tail}", r.lambda);
        }
        for (k, pr) in r.profiles.iter().enumerate() {
            let _ = writeln!(
                out,
                "{step},{:e},{k},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{tail}",
                r.lambda,
                graph.edges()[pr.peak.coordinate.edge].id,
                pr.peak.coordinate.s,
                pr.peak.value,
                pr.epsilon,
                pr.epsilon_tilde,
                pr.ratio(),
                pr.vertex_distance_ratio(),
                pr.regime.name(),
                pr.sup_error
            );
        }
    }
    out
}

/// Rescaled samples of every peak: `peak,y,v,reference`.
pub fn profile_csv(r: &BlowupReport) -> String {
    let mut out = String::from("peak,y,v,reference\n");
    for (k, pr) in r.profiles.iter().enumerate() {
        for sm in &pr.samples {
            let _ = writeln!(out, "{k},{:e},{:e},{:e}", sm.y, sm.v, sm.reference);
        }
    }
    out
}

/// `u` against the envelope at every node: `distance,u,envelope`, with the
/// distance to the nearest peak in units of `λ^{−1/2}`.
pub fn envelope_csv(s: &BoundState, r: &BlowupReport) -> String {
    let mesh = s.u.mesh();
    let nv = mesh.graph().num_vertices();
    let sq = r.lambda.sqrt();
    let base = r.envelope.c1 * r.lambda.powf(1.0 / (r.p - 2.0));
    let mut rows: Vec<(f64, f64, f64)> = (0..s.values().len())
        .map(|i| {
            let dp: Vec<f64> = r.profiles.iter().map(|pr| mesh.node_distance(pr.peak.dof, i)).collect();
            let near = dp.iter().cloned().fold(f64::INFINITY, f64::min);
            let sum: f64 = dp
                .iter()
                .cloned()
                .chain((0..nv).map(|v| mesh.node_vertex_distance(i, v)))
                .map(|d| (-r.envelope.c2 * sq * d).exp())
                .sum();
            (near * sq, s.values()[i], base * sum)
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let mut out = String::from("distance,u,envelope\n");
    for (d, u, e) in rows {
        let _ = writeln!(out, "{d:e},{u:e},{e:e}");
    }
    out
}

/// Gnuplot script for the files written next to it: rescaled profiles
/// against their limits and `u` against the envelope, one page per step.
pub fn gnuplot_script(steps: &[usize]) -> String {
    let mut out = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 1200,500\n",
    );
    for &k in steps {
        let _ = writeln!(out, "set output 'blowup_step_{k:03}.png'");
        out.push_str("set multiplot layout 1,2\n");
        out.push_str("set xlabel 'y'\nunset logscale y\n");
        let _ = writeln!(
            out,
            "plot 'profiles/step_{k:03}.csv' using 2:3 with points pt 7 ps 0.4 title 'v', '' using 2:4 with lines title 'limit'"
        );
        out.push_str("set xlabel 'distance to peak (units of 1/sqrt(lambda))'\nset logscale y\n");
        let _ = writeln!(
            out,
            "plot 'envelope/step_{k:03}.csv' using 1:2 with points pt 7 ps 0.4 title 'u', '' using 1:3 with lines title 'envelope'"
        );
        out.push_str("unset multiplot\n");
    }
    out
}
