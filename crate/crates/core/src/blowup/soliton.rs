//! Limit profiles: the line soliton in closed form and the star-graph
//! soliton by Newton's method.

use std::sync::Arc;

use log::debug;

use crate::discretize::{Discretization, Mesh};
use crate::energy::{hessian_matrix, residual_rows, residual_scale, EnergyParams};
use crate::error::{Error, Result};
use crate::graph::{standard_graph, EdgeCoordinate, StandardKind};
use crate::linalg::{BandLu, CsrMatrix};
use crate::solvers::{BoundState, Origin};

/// Positive decaying solution of `−V'' + V = |V|^{p−2}V` on the line,
/// `V(x) = (p/2)^{1/(p−2)} sech^{2/(p−2)}((p−2)x/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSoliton {
    pub p: f64,
    amplitude: f64,
    a: f64,
    b: f64,
}

pub fn soliton_line(p: f64) -> Result<LineSoliton> {
    if !(p.is_finite() && p > 2.0) {
        return Err(Error::InvalidParameter(format!("soliton needs p > 2, got {p}")));
    }
    Ok(LineSoliton {
        p,
        amplitude: (p / 2.0).powf(1.0 / (p - 2.0)),
        a: 2.0 / (p - 2.0),
        b: (p - 2.0) / 2.0,
    })
}

fn sech(x: f64) -> f64 {
    // stable for large |x|
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

impl LineSoliton {
    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * sech(self.b * x).powf(self.a)
    }

    pub fn max(&self) -> f64 {
        self.amplitude
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -self.a * self.b * self.value(x) * (self.b * x).tanh()
    }

    /// `V''` from differentiating `A sech^a(bx)` twice.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let s = sech(b * x);
        let t = (b * x).tanh();
        self.amplitude * a * b * b * s.powf(a) * (a * t * t - s * s)
    }

    /// `−V'' + V − V^{p−1}` at `x`.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let v = self.value(x);
        -self.second_derivative(x) + v - v.powf(self.p - 1.0)
    }

    /// `∫_ℝ V²` by composite Simpson on `[−x_max, x_max]`.
    pub fn mass(&self) -> f64 {
        let x_max = 40.0 / self.b.min(1.0);
        let n = 20_000;
        let h = 2.0 * x_max / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = -x_max + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * self.value(x).powi(2);
        }
        s * h / 3.0
    }

    /// `λ^{1/(p−2)} V(λ^{1/2} x)`, the soliton at frequency `λ`.
    pub fn scaled(&self, lambda: f64, x: f64) -> f64 {
        lambda.powf(1.0 / (self.p - 2.0)) * self.value(lambda.sqrt() * x)
    }

    /// Frequency whose scaled soliton has mass `mu`.
    pub fn frequency_for_mass(&self, mu: f64) -> f64 {
        // mass(λ) = λ^{2/(p−2) − 1/2} · mass(1)
        let q = 2.0 / (self.p - 2.0) - 0.5;
        (mu / self.mass()).powf(1.0 / q)
    }
}

/// Soliton on the truncated star with `m` equal edges.
#[derive(Debug, Clone)]
pub struct StarSoliton {
    pub m: usize,
    pub disc: Discretization,
    pub state: BoundState,
    pub iterations: usize,
}

impl StarSoliton {
    /// Value at distance `r` from the centre along the first edge.
    pub fn radial(&self, r: f64) -> f64 {
        let len = self.disc.graph().edges()[0].length;
        if r >= len {
            return 0.0;
        }
        self.state.u.eval(EdgeCoordinate { edge: 0, s: r.max(0.0) })
    }

    /// Sum of outgoing derivatives at the centre.
    pub fn kirchhoff_defect(&self) -> f64 {
        self.state.residuals.max_kirchhoff
    }
}

/// Solves `−V'' + V = |V|^{p−2}V` on the star with `m` edges of length
/// `length`, Kirchhoff at the centre and natural conditions at the tips,
/// with `λ = 1` and no mass constraint.
///
/// The discrete problem is invariant under permutations of the edges and
/// the iterates are kept in the symmetric subspace, where the linearization
/// has no translation kernel (for `m ≥ 2` the translation modes of the
/// truncated star are antisymmetric and only exponentially far from zero).
pub fn star_soliton(m: usize, p: f64, length: f64, h: f64) -> Result<StarSoliton> {
    if m == 0 || !(length > 0.0 && h > 0.0 && h < length) {
        return Err(Error::InvalidParameter(format!("star soliton: m = {m}, L = {length}, h = {h}")));
    }
    let line = soliton_line(p)?;
    let g = standard_graph(StandardKind::Star(m), &[length])?;
    let d = Discretization::new(Arc::new(Mesh::uniform(&g, h)?));
    let mesh = Arc::clone(&d.mesh);
    let n_el = mesh.edge_meshes()[0].num_elements();
    let mut radial = vec![0usize; d.num_dofs()];
    for em in mesh.edge_meshes() {
        for (k, &dof) in em.dofs.iter().enumerate() {
            radial[dof] = k;
        }
    }
    let params = EnergyParams { p, rho: 1.0, mu: 1.0 };
    let mut u: Vec<f64> = (0..d.num_dofs())
        .map(|i| line.value(mesh.node_vertex_distance(i, 0)))
        .collect();
    let scaled = |u: &[f64], r: &[f64]| {
        let scale = residual_scale(u, 1.0, &params);
        (0..r.len()).fold(0.0f64, |acc, i| acc.max((r[i] / d.lumped[i]).abs())) / scale
    };
    let tol = 1e-12;
    let mut r = residual_rows(&d, &u, 1.0, &params);
    let mut res = scaled(&u, &r);
    let mut iterations = 0;
    while res > tol {
        if iterations == 50 {
            return Err(Error::Diverged { iterations, residual: res });
        }
        iterations += 1;
        let jac = hessian_matrix(&d, &u, 1.0, &params);
        let mut trip = Vec::with_capacity(jac.nnz());
        for i in 0..jac.dim() {
            for (j, v) in jac.row(i) {
                trip.push((radial[i], radial[j], v));
            }
        }
        let reduced = CsrMatrix::from_triplets(n_el + 1, &trip);
        let mut rhs = vec![0.0; n_el + 1];
        for (i, ri) in r.iter().enumerate() {
            rhs[radial[i]] -= ri;
        }
        let step = BandLu::factor(&reduced)?.solve(&rhs);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&radial).map(|(ui, &k)| ui + t * step[k]).collect();
            let tr = residual_rows(&d, &trial, 1.0, &params);
            let tres = scaled(&trial, &tr);
            if tres.is_finite() && tres < res {
                u = trial;
                r = tr;
                res = tres;
                break;
            }
            t *= 0.5;
            if t < 1e-3 {
                if res < 1e3 * tol {
                    res = 0.0;
                    break;
                }
                return Err(Error::Diverged { iterations, residual: res });
            }
        }
        debug!("star soliton m={m} it {iterations} residual {res:e}");
    }
    if u.iter().any(|&x| x <= 0.0) {
        return Err(Error::Diverged { iterations, residual: res });
    }
    let mu = d.mass(&u);
    let f = d.function(u)?;
    let state = BoundState::evaluate(&d, f, 1.0, EnergyParams { mu, ..params }, None, Origin::Refined)?;
    Ok(StarSoliton {
        m,
        disc: d,
        state,
        iterations,
    })
}
