//! Peaks, rescaled profiles and the exponential decay envelope.

use crate::discretize::NodeSite;
use crate::error::{Error, Result};
use crate::graph::EdgeCoordinate;
use crate::solvers::BoundState;

use super::soliton::{soliton_line, star_soliton};

/// Relative slack on the peak lower bound `λ^{1/(p−2)}`.
pub const PEAK_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub dof: usize,
    pub coordinate: EdgeCoordinate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    /// Sorted by decreasing value.
    pub peaks: Vec<Peak>,
    /// All nodes tie: a plateau, not a peak list.
    pub degenerate: bool,
    /// `λ^{1/(p−2)}`
    pub bound: f64,
    /// `(i, j, λ^{1/2} dist(P_i, P_j))` for `i < j`.
    pub separations: Vec<(usize, usize, f64)>,
}

impl PeakSet {
    pub fn min_separation(&self) -> Option<f64> {
        self.separations.iter().map(|s| s.2).reduce(f64::min)
    }
}

fn check_lambda(s: &BoundState) -> Result<()> {
    if s.lambda > 0.0 && s.lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("blow-up diagnostics need λ > 0, got {}", s.lambda)))
    }
}

/// Nodal local maxima clearing `λ^{1/(p−2)}`, merged within `window·λ^{−1/2}`
/// (the larger survives).
pub fn detect_peaks(s: &BoundState, window: f64) -> Result<PeakSet> {
    check_lambda(s)?;
    let u = s.values();
    let mesh = s.u.mesh();
    let p = s.params.p;
    let bound = s.lambda.powf(1.0 / (p - 2.0));
    let (lo, hi) = (s.u.min(), s.u.max());
    if hi - lo <= 1e-12 * hi.abs() {
        return Ok(PeakSet {
            peaks: Vec::new(),
            degenerate: true,
            bound,
            separations: Vec::new(),
        });
    }
    let adj = mesh.neighbors();
    let mut cand: Vec<usize> = (0..u.len())
        .filter(|&i| {
            let nb = &adj[i];
            u[i] >= bound * (1.0 - PEAK_SLACK)
                && nb.iter().all(|&(j, _)| u[i] >= u[j])
                && nb.iter().any(|&(j, _)| u[i] > u[j])
        })
        .collect();
    if cand.is_empty() {
        return Err(Error::NoPeaks { bound });
    }
    cand.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap().then(a.cmp(&b)));
    let radius = window / s.lambda.sqrt();
    let mut kept: Vec<usize> = Vec::new();
    for c in cand {
        if kept.iter().all(|&k| mesh.node_distance(k, c) >= radius) {
            kept.push(c);
        }
    }
    let sq = s.lambda.sqrt();
    let mut separations = Vec::new();
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            separations.push((i, j, sq * mesh.node_distance(kept[i], kept[j])));
        }
    }
    Ok(PeakSet {
        peaks: kept
            .into_iter()
            .map(|dof| Peak {
                dof,
                coordinate: mesh.coordinate(dof),
                value: u[dof],
            })
            .collect(),
        degenerate: false,
        bound,
        separations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Interior,
    Vertex,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Interior => "interior",
            Regime::Vertex => "vertex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleConfig {
    /// Window radius `R` in rescaled units.
    pub window: f64,
    /// Interior iff `dist(P, V)/ε` exceeds this.
    pub cutoff: f64,
    /// Edge length and mesh spacing of the star solitons used as vertex
    /// limits.
    pub star_length: f64,
    pub star_h: f64,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        Self {
            window: 15.0,
            cutoff: 10.0,
            star_length: 20.0,
            star_h: 20.0 / 2048.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub dof: usize,
    /// Signed rescaled offset: negative toward the tail of the peak's edge.
    pub y: f64,
    pub v: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledProfile {
    pub peak: Peak,
    /// `λ^{−1/2}`
    pub epsilon: f64,
    /// `u(P)^{−(p−2)/2}`
    pub epsilon_tilde: f64,
    pub vertex_distance: f64,
    pub regime: Regime,
    /// Degree of the nearest vertex (the star used as limit in the vertex
    /// regime).
    pub vertex_degree: usize,
    /// Sorted by `y`.
    pub samples: Vec<ProfileSample>,
    /// `max |v − reference| / V(0)` over the window.
    pub sup_error: f64,
}

impl RescaledProfile {
    pub fn ratio(&self) -> f64 {
        self.epsilon_tilde / self.epsilon
    }

    pub fn vertex_distance_ratio(&self) -> f64 {
        self.vertex_distance / self.epsilon
    }
}

/// `v(y) = ε^{2/(p−2)} u(P + εy)` on the nodes within `window` rescaled
/// units of `P`, compared against the line soliton (interior regime, or a
/// degree-2 vertex) or the soliton of the star with the nearest vertex's
/// degree, centred at that vertex.
pub fn rescale_at_peak(s: &BoundState, peak: &Peak, cfg: &RescaleConfig) -> Result<RescaledProfile> {
    check_lambda(s)?;
    let mesh = s.u.mesh();
    let g = mesh.graph();
    let u = s.values();
    let p = s.params.p;
    let eps = s.lambda.powf(-0.5);
    let eps_t = peak.value.powf(-(p - 2.0) / 2.0);
    let amp = eps.powf(2.0 / (p - 2.0));
    let radius = cfg.window * eps;

    let (nearest, vertex_distance) = (0..g.num_vertices())
        .map(|v| (v, mesh.node_vertex_distance(peak.dof, v)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let regime = if vertex_distance / eps > cfg.cutoff {
        Regime::Interior
    } else {
        Regime::Vertex
    };
    let degree = g.degree(nearest);
    let line = soliton_line(p)?;
    let star = if regime == Regime::Vertex && degree != 2 {
        Some(star_soliton(degree, p, cfg.star_length, cfg.star_h)?)
    } else {
        None
    };

    let edge = &g.edges()[peak.coordinate.edge];
    // exact offsets along the peak's edge when the peak is an interior node
    let along = match mesh.site(peak.dof) {
        NodeSite::Interior(e, k) => Some(mesh.along_edge_from(e, k)),
        NodeSite::Vertex(_) => None,
    };
    let mut reach = 0.0f64;
    let mut samples = Vec::new();
    for i in 0..u.len() {
        let on_edge = match (mesh.site(i), &along) {
            (NodeSite::Interior(e, k), Some(off)) if e == peak.coordinate.edge => Some(off[k]),
            _ => None,
        };
        let d = match on_edge {
            // a shorter route around a cycle still wins
            Some(off) => {
                let other = mesh.node_distance(peak.dof, i);
                if other < off.abs() * (1.0 - 1e-9) {
                    other
                } else {
                    off.abs()
                }
            }
            None => mesh.node_distance(peak.dof, i),
        };
        reach = reach.max(d);
        if d > radius {
            continue;
        }
        let behind = match (mesh.site(i), on_edge) {
            (_, Some(off)) => off < 0.0,
            (NodeSite::Interior(e, k), None) if e == peak.coordinate.edge => {
                mesh.edge_meshes()[e].from_tail[k] < peak.coordinate.s
            }
            _ => {
                let via_tail = peak.coordinate.s + mesh.node_vertex_distance(i, edge.tail);
                let via_head = (edge.length - peak.coordinate.s) + mesh.node_vertex_distance(i, edge.head);
                via_tail <= via_head
            }
        };
        let y = if behind && i != peak.dof { -d / eps } else { d / eps };
        let reference = match &star {
            Some(st) => st.radial(mesh.node_vertex_distance(i, nearest) / eps),
            None => line.value(d / eps),
        };
        samples.push(ProfileSample {
            dof: i,
            y,
            v: amp * u[i],
            reference,
        });
    }
    if reach < radius {
        return Err(Error::WindowExceedsGraph {
            requested: cfg.window,
            reached: reach / eps,
        });
    }
    samples.sort_by(|a, b| a.y.partial_cmp(&b.y).unwrap().then(a.dof.cmp(&b.dof)));
    let sup_error = samples
        .iter()
        .fold(0.0f64, |m, x| m.max((x.v - x.reference).abs()))
        / line.max();
    Ok(RescaledProfile {
        peak: peak.clone(),
        epsilon: eps,
        epsilon_tilde: eps_t,
        vertex_distance,
        regime,
        vertex_degree: degree,
        samples,
        sup_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeCheck {
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
    /// `max u(x)/envelope(x)` over the checked nodes (0 when none).
    pub worst_margin: f64,
    pub checked: usize,
}

/// Distances and values of the nodes outside the peak balls, reused across
/// envelope evaluations.
#[derive(Debug, Clone)]
pub struct EnvelopeData {
    lambda: f64,
    p: f64,
    /// `(ln u, distances to every peak and vertex)`
    nodes: Vec<(f64, Vec<f64>)>,
}

impl EnvelopeData {
    pub fn new(s: &BoundState, peaks: &[Peak], window: f64) -> Result<Self> {
        check_lambda(s)?;
        let mesh = s.u.mesh();
        let nv = mesh.graph().num_vertices();
        let radius = window / s.lambda.sqrt();
        let u = s.values();
        let mut nodes = Vec::new();
        for i in 0..u.len() {
            let dp: Vec<f64> = peaks.iter().map(|pk| mesh.node_distance(pk.dof, i)).collect();
            if dp.iter().any(|&d| d < radius) {
                continue;
            }
            let mut dists = dp;
            dists.extend((0..nv).map(|v| mesh.node_vertex_distance(i, v)));
            let lu = if u[i] > 0.0 { u[i].ln() } else { f64::NEG_INFINITY };
            nodes.push((lu, dists));
        }
        Ok(Self {
            lambda: s.lambda,
            p: s.params.p,
            nodes,
        })
    }

    /// Worst `ln(u/envelope)`, computed in logs so that far-away nodes do
    /// not underflow.
    fn worst_log(&self, c1: f64, c2: f64) -> f64 {
        let base = c1.ln() + self.lambda.ln() / (self.p - 2.0);
        let rate = c2 * self.lambda.sqrt();
        let mut worst = f64::NEG_INFINITY;
        for (lu, dists) in &self.nodes {
            if *lu == f64::NEG_INFINITY {
                continue;
            }
            let top = dists.iter().map(|d| -rate * d).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = dists.iter().map(|d| (-rate * d - top).exp()).sum();
            worst = worst.max(lu - (base + top + sum.ln()));
        }
        worst
    }

    pub fn check(&self, c1: f64, c2: f64) -> EnvelopeCheck {
        let w = self.worst_log(c1, c2);
        EnvelopeCheck {
            c1,
            c2,
            pass: w <= 0.0,
            worst_margin: if w == f64::NEG_INFINITY { 0.0 } else { w.exp() },
            checked: self.nodes.len(),
        }
    }

    /// Largest `C₂` for which the envelope with `C₁ = c1` holds, by
    /// bisection (`0` if it fails for every rate, capped at `2^20`).
    pub fn fit_rate(&self, c1: f64) -> f64 {
        let pass = |c2: f64| self.worst_log(c1, c2) <= 0.0;
        if !pass(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while pass(hi) {
            hi *= 2.0;
            if hi > 1048576.0 {
                return hi;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pass(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Checks `u(x) ≤ C₁λ^{1/(p−2)}[Σ_i e^{−C₂λ^{1/2}d(x,P_i)} + Σ_v e^{−C₂λ^{1/2}d(x,v)}]`
/// at every node outside the `window·λ^{−1/2}` balls around the peaks.
pub fn decay_envelope_check(s: &BoundState, peaks: &[Peak], c1: f64, c2: f64, window: f64) -> Result<EnvelopeCheck> {
    Ok(EnvelopeData::new(s, peaks, window)?.check(c1, c2))
}
