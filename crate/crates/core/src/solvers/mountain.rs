use log::{debug, warn};

use super::flow::{build_bump, descent_step, gradient_residual, renormalize_abs, SobolevGradient};
use super::newton::newton_refine;
use super::state::{BoundState, Origin};
use super::threshold::mass_threshold_on;
use crate::discretize::{Discretization, GraphFunction};
use super::newton::bordered_residual;
use crate::energy::{energy, gradient, hessian_matrix, lower_shift, multiplier, residual_rows, EnergyParams, MorseConfig};
use crate::linalg::{axpy, dot, lowest_eigenpairs, norm_inf, BorderedSolver, CsrMatrix, EigenOptions};

const SADDLE_HANDOFF: f64 = 1e-6;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainPassConfig {
    /// Number of path nodes, endpoints included.
    pub nodes: usize,
    /// Residual at the max node below which the path stage stops.
    pub tol_mp: f64,
    /// Sweeps without a new best residual after which the path stage hands
    /// over to the saddle search anyway.
    pub stall_sweeps: usize,
    pub max_iters: usize,
    pub redistribute_every: usize,
    /// Step length of the string update in the Sobolev metric.
    pub step: f64,
    pub newton_tol: f64,
    /// Iteration budget of the eigenvector-following stage.
    pub saddle_iters: usize,
    pub morse: MorseConfig,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        Self {
            nodes: 33,
            tol_mp: 5e-2,
            stall_sweeps: 500,
            max_iters: 20_000,
            redistribute_every: 5,
            step: 0.2,
            newton_tol: 1e-10,
            saddle_iters: 500,
            morse: MorseConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MountainPassResult {
    pub candidate: BoundState,
    /// Max energy over `path`.
    pub level: f64,
    /// The path with the lowest maximum met during the deformation.
    pub path: Vec<GraphFunction>,
    pub iterations: usize,
    pub endpoint_energies: (f64, f64),
    /// Lowest path maximum met so far, after every sweep.
    pub level_history: Vec<f64>,
}

#[derive(Clone)]
struct Path {
    nodes: Vec<Vec<f64>>,
    energies: Vec<f64>,
}

impl Path {
    fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.energies.iter().enumerate() {
            if e > self.energies[best] {
                best = i;
            }
        }
        best
    }

    fn max(&self) -> f64 {
        self.energies[self.argmax()]
    }
}

fn h1_dist(d: &Discretization, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (d.kinetic(&diff) + d.mass(&diff)).sqrt()
}

/// Re-spaces the nodes at equal energy-arclength along the polygon, where a
/// segment has length `(‖Δu‖²_{H¹} + w ΔE²)^{1/2}` with `w` balancing the
/// two totals. A pinned node keeps its place and index; the two sides are
/// re-spaced separately. New nodes are linear interpolants projected back
/// onto the mass sphere.
fn redistributed(d: &Discretization, path: &Path, params: &EnergyParams, pin: Option<usize>) -> Path {
    let n = path.nodes.len();
    let h1: Vec<f64> = (1..n).map(|i| h1_dist(d, &path.nodes[i - 1], &path.nodes[i])).collect();
    let de: Vec<f64> = (1..n).map(|i| (path.energies[i] - path.energies[i - 1]).abs()).collect();
    let (sh, se): (f64, f64) = (h1.iter().sum(), de.iter().sum());
    let w = if se > 0.0 { (sh / se).powi(2) } else { 0.0 };
    let mut cum = vec![0.0; n];
    for i in 1..n {
        cum[i] = cum[i - 1] + (h1[i - 1].powi(2) + w * de[i - 1].powi(2)).sqrt();
    }
    let mut nodes = path.nodes.clone();
    let mut energies = path.energies.clone();
    let mut respace = |lo: usize, hi: usize| {
        let mut seg = lo;
        for k in lo + 1..hi {
            let target = cum[lo] + (cum[hi] - cum[lo]) * (k - lo) as f64 / (hi - lo) as f64;
            while seg < hi - 1 && cum[seg + 1] < target {
                seg += 1;
            }
            let span = cum[seg + 1] - cum[seg];
            let t = if span > 0.0 { ((target - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
            let mut v: Vec<f64> = path.nodes[seg]
                .iter()
                .zip(&path.nodes[seg + 1])
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect();
            renormalize_abs(d, &mut v, params.mu);
            energies[k] = energy(d, &v, params);
            nodes[k] = v;
        }
    };
    match pin {
        Some(i) if i > 0 && i < n - 1 => {
            respace(0, i);
            respace(i, n - 1);
        }
        _ => respace(0, n - 1),
    }
    Path { nodes, energies }
}

/// Mesh spacing around the largest nodal value of `u`.
fn spacing_at_peak(d: &Discretization, u: &[f64]) -> f64 {
    let peak = (0..u.len()).fold(0, |b, i| if u[i] > u[b] { i } else { b });
    d.mesh
        .elements()
        .iter()
        .filter(|e| e.a == peak || e.b == peak)
        .map(|e| e.h)
        .fold(0.0, f64::max)
}

/// Eigenvector following from a point near the ridge: the step rises along
/// the lowest constrained Hessian mode and descends (shifted Newton) on its
/// complement, within a trust radius. Stops once the residual reaches
/// `SADDLE_HANDOFF`, where plain Newton takes over.
fn saddle_search(d: &Discretization, u0: &[f64], params: &EnergyParams, cfg: &MountainPassConfig) -> Result<(Vec<f64>, f64)> {
    let mut u = u0.to_vec();
    let mut radius: f64 = 0.05;
    let mut last = f64::INFINITY;
    for it in 0..cfg.saddle_iters {
        let lambda = multiplier(d, &u, params);
        let res = bordered_residual(d, &u, lambda, params);
        debug!("saddle search {it}: residual {res:e}, radius {radius}");
        if res <= SADDLE_HANDOFF {
            return Ok((u, lambda));
        }
        if lambda > 0.0 && lambda.powf(-0.5) < 2.0 * spacing_at_peak(d, &u) {
            // collapsed onto a single node: a grid artefact, not a bound state
            return Err(Error::Diverged { iterations: it, residual: res });
        }
        let h = hessian_matrix(d, &u, lambda, params);
        let pairs = lowest_eigenpairs(
            &h,
            &d.ops.mass,
            &EigenOptions {
                count: 3,
                shift: lower_shift(d, &u, lambda, params),
                tol: 1e-8,
                max_iters: 3000,
                seed: cfg.morse.seed,
                constraints: vec![u.clone()],
            },
        )?;
        let nu = &pairs.values;
        if res < last {
            radius = (radius * 1.5).min(0.25);
        } else {
            radius = (radius * 0.5).max(0.01);
        }
        last = res;
        let mut r = residual_rows(d, &u, lambda, params);
        let mut coeffs = [0.0; 2];
        let mut border = vec![d.ops.mass.mul_vec(&u)];
        for k in 0..2 {
            let v = &pairs.vectors[k];
            let g = dot(v, &r);
            let mv = d.ops.mass.mul_vec(v);
            axpy(-g, &mv, &mut r);
            border.push(mv);
            // ascent along the lowest mode, descent along the second,
            // Newton-sized in both
            let curv = nu[k].abs().max(1e-12);
            coeffs[k] = if k == 0 { g / curv } else { -g / curv };
        }
        let shift = if nu[2] > 0.0 { 0.0 } else { nu[2] - 0.5 * nu[2].abs().max(lambda.abs()).max(1.0) };
        let a = CsrMatrix::combine(&[(1.0, &h), (-shift, &d.ops.mass)]);
        let solver = BorderedSolver::new(&a, border)?;
        r.iter_mut().for_each(|x| *x = -*x);
        let (mut step, _) = solver.solve(&r, &[0.0; 3]);
        for k in 0..2 {
            axpy(coeffs[k], &pairs.vectors[k], &mut step);
        }
        let len = norm_inf(&step) / norm_inf(&u);
        let t = if len > radius { radius / len } else { 1.0 };
        axpy(t, &step, &mut u);
        renormalize_abs(d, &mut u, params.mu);
    }
    let lambda = multiplier(d, &u, params);
    Err(Error::MaxItersExceeded {
        max_iters: cfg.saddle_iters,
        residual: bordered_residual(d, &u, lambda, params),
    })
}

/// Min-max over paths on the mass sphere from `κ_μ` to a concentrated bump.
///
/// The highest node of a polygonal path is pushed down by backtracked
/// Sobolev gradient steps, and every `cfg.redistribute_every` sweeps the
/// other nodes are re-spaced in energy-arclength on either side of it (a
/// re-spacing that would raise the path maximum is discarded). When the
/// residual at the highest node reaches `cfg.tol_mp`, or stops improving,
/// that node seeds an eigenvector-following saddle search and then Newton.
pub fn mountain_pass(d: &Discretization, params: &EnergyParams, cfg: &MountainPassConfig) -> Result<MountainPassResult> {
    params.validate()?;
    if cfg.nodes < 3 {
        return Err(Error::InvalidParameter("a path needs at least 3 nodes".into()));
    }
    if let Ok(th) = mass_threshold_on(d, params.p) {
        if params.mu >= th.mu1 {
            warn!(
                "mu = {} is not below the threshold {}; the mountain-pass geometry is not guaranteed",
                params.mu, th.mu1
            );
        }
    }
    let kappa = params.kappa(d.graph().total_length());
    let start = vec![kappa; d.num_dofs()];
    let bump = build_bump(d, params)?;
    let end = bump.w.values().to_vec();

    let p = cfg.nodes;
    let mut nodes = Vec::with_capacity(p);
    for k in 0..p {
        let t = k as f64 / (p - 1) as f64;
        let mut v: Vec<f64> = start.iter().zip(&end).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        if k > 0 && k < p - 1 {
            renormalize_abs(d, &mut v, params.mu);
        }
        nodes.push(v);
    }
    let energies = nodes.iter().map(|v| energy(d, v, params)).collect();
    let mut path = redistributed(d, &Path { nodes, energies }, params, None);
    let endpoint_energies = (path.energies[0], path.energies[p - 1]);

    let pre = SobolevGradient::new(d, SobolevGradient::default_alpha(d, &end, params))?;
    let mut sigma = cfg.step;
    let mut best = path.clone();
    let mut level_history = vec![path.max()];
    let mut best_res = f64::INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    loop {
        let top = path.argmax();
        if top == 0 || top == p - 1 {
            return Err(Error::PathCollapse { endpoint: top });
        }
        let res = gradient_residual(d, &path.nodes[top], params);
        if res <= cfg.tol_mp {
            debug!("path stage converged after {iterations} sweeps, residual {res:e}");
            break;
        }
        if res < best_res {
            best_res = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.stall_sweeps {
                debug!("path stage stalled at residual {res:e} after {iterations} sweeps");
                break;
            }
        }
        if iterations >= cfg.max_iters {
            return Err(Error::MaxItersExceeded {
                max_iters: cfg.max_iters,
                residual: res,
            });
        }
        let g = gradient(d, &path.nodes[top], params);
        let dir = pre.direction(d, &path.nodes[top], &g);
        match descent_step(d, &path.nodes[top], path.energies[top], &dir, &mut sigma, params) {
            Some((next, e)) => {
                path.nodes[top] = next;
                path.energies[top] = e;
                sigma = (sigma * 1.5).min(4.0 * cfg.step);
            }
            None => sigma = cfg.step,
        }
        iterations += 1;
        if iterations % cfg.redistribute_every == 0 {
            let top = path.argmax();
            path = redistributed(d, &path, params, Some(top));
        }
        if path.max() < best.max() {
            best = path.clone();
        }
        level_history.push(best.max());
    }

    let top = path.argmax();
    let u0 = &path.nodes[top];
    let (u1, l1) = saddle_search(d, u0, params, cfg)?;
    let candidate = newton_refine(d, &u1, l1, params, cfg.newton_tol, Some(&cfg.morse))?;
    let candidate = BoundState {
        origin: Origin::MountainPass,
        ..candidate
    };
    let level = best.max();
    let path = best
        .nodes
        .into_iter()
        .map(|v| d.function(v))
        .collect::<Result<Vec<_>>>()?;
    Ok(MountainPassResult {
        candidate,
        level,
        path,
        iterations,
        endpoint_energies,
        level_history,
    })
}
