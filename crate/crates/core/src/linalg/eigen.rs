//! Lowest eigenpairs of a symmetric pencil `A x = ν M x` by shift-inverted
//! subspace iteration with Rayleigh–Ritz, optionally restricted to the
//! subspace `{x : zᵀ M x = 0}` for a set of constraint vectors `z`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::banded::BorderedSolver;
use super::sparse::CsrMatrix;
use super::{axpy, dot, norm2};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub count: usize,
    /// Shift; the iteration converges to the eigenvalues nearest to it, so
    /// callers pass a value at or below the bottom of the spectrum.
    pub shift: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Primal constraint vectors `z`; iterates stay M-orthogonal to them.
    pub constraints: Vec<Vec<f64>>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            count: 2,
            shift: 0.0,
            tol: 1e-10,
            max_iters: 500,
            seed: 0,
            constraints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// Backward errors `‖A x − ν M x‖ / ((‖A‖ + |ν| ‖M‖) ‖x‖)`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

struct Projector {
    z: Vec<Vec<f64>>,
    mz: Vec<Vec<f64>>,
    gram_inv: DMatrix<f64>,
}

impl Projector {
    fn new(m: &CsrMatrix, z: &[Vec<f64>]) -> Self {
        let mz: Vec<Vec<f64>> = z.iter().map(|v| m.mul_vec(v)).collect();
        let k = z.len();
        let gram = DMatrix::from_fn(k, k, |i, j| dot(&z[i], &mz[j]));
        let gram_inv = gram.try_inverse().unwrap_or_else(|| DMatrix::zeros(k, k));
        Self {
            z: z.to_vec(),
            mz,
            gram_inv,
        }
    }

    /// M-orthogonal projection onto the complement of span(z).
    fn apply(&self, x: &mut [f64]) {
        let k = self.z.len();
        if k == 0 {
            return;
        }
        let coeffs: Vec<f64> = self.mz.iter().map(|c| dot(c, x)).collect();
        for i in 0..k {
            let a: f64 = (0..k).map(|j| self.gram_inv[(i, j)] * coeffs[j]).sum();
            axpy(-a, &self.z[i], x);
        }
    }

    /// Dual projection: removes the span of `M z` from a residual.
    fn apply_dual(&self, r: &mut [f64]) {
        let k = self.z.len();
        if k == 0 {
            return;
        }
        let coeffs: Vec<f64> = self.z.iter().map(|z| dot(z, r)).collect();
        for i in 0..k {
            let a: f64 = (0..k).map(|j| self.gram_inv[(i, j)] * coeffs[j]).sum();
            axpy(-a, &self.mz[i], r);
        }
    }
}

fn m_orthonormalize(m: &CsrMatrix, basis: &mut [Vec<f64>], rng: &mut ChaCha8Rng, proj: &Projector) {
    for i in 0..basis.len() {
        for attempt in 0..3 {
            let original = {
                let mv = m.mul_vec(&basis[i]);
                dot(&basis[i], &mv).max(0.0).sqrt()
            };
            for _ in 0..2 {
                for j in 0..i {
                    let mb = m.mul_vec(&basis[j]);
                    let c = dot(&mb, &basis[i]);
                    let (head, tail) = basis.split_at_mut(i);
                    axpy(-c, &head[j], &mut tail[0]);
                }
            }
            let mv = m.mul_vec(&basis[i]);
            let nrm = dot(&basis[i], &mv).max(0.0).sqrt();
            if nrm > 1e-10 * original.max(f64::MIN_POSITIVE) && nrm > 0.0 {
                basis[i].iter_mut().for_each(|v| *v /= nrm);
                break;
            }
            // lost rank: replace with a fresh random direction
            basis[i].iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            proj.apply(&mut basis[i]);
            if attempt == 2 {
                basis[i].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

/// Computes the lowest `count` eigenpairs of `(A, M)`. `opts.shift` must
/// lie at or below the bottom of the spectrum. Converged pairs are locked
/// and deflated, and the shift then moves up under the remaining Ritz
/// values, so clustered spectra far above the initial shift still converge.
pub fn lowest_eigenpairs(a: &CsrMatrix, m: &CsrMatrix, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = a.dim();
    let nc0 = opts.constraints.len();
    if opts.count == 0 || opts.count + nc0 > n {
        return Err(Error::InvalidParameter(format!(
            "requested {} eigenpairs of a {}-dimensional pencil with {} constraints",
            opts.count, n, nc0
        )));
    }
    let (a_norm, m_norm) = (a.norm_inf(), m.norm_inf());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut locked_res: Vec<f64> = Vec::new();
    let mut shift = opts.shift;
    let mut carry: Vec<Vec<f64>> = Vec::new();
    let mut iter = 0;
    let mut worst = f64::INFINITY;
    while locked_vals.len() < opts.count {
        let want = opts.count - locked_vals.len();
        let mut cons = opts.constraints.clone();
        cons.extend(locked_vecs.iter().cloned());
        let nc = cons.len();
        let block = (2 * want + 6).min(n - nc);
        let proj = Projector::new(m, &cons);
        let shifted = CsrMatrix::combine(&[(1.0, a), (-shift, m)]);
        let solver = match BorderedSolver::new(&shifted, proj.mz.clone()) {
            Ok(s) => s,
            Err(_) => {
                // shift landed on an eigenvalue
                shift -= 1e-6 * shift.abs().max(1.0);
                continue;
            }
        };
        let zero_g = vec![0.0; nc];
        let mut basis: Vec<Vec<f64>> = carry.drain(..).take(block).collect();
        while basis.len() < block {
            basis.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
        basis.iter_mut().for_each(|v| proj.apply(v));
        m_orthonormalize(m, &mut basis, &mut rng, &proj);

        let mut since_shift = 0;
        let mut next_round = false;
        while !next_round {
            if iter >= opts.max_iters {
                return Err(Error::NoConvergence {
                    max_iters: opts.max_iters,
                    residual: worst,
                });
            }
            iter += 1;
            since_shift += 1;
            let mut next: Vec<Vec<f64>> = basis
                .iter()
                .map(|x| {
                    let (mut y, _) = solver.solve(&m.mul_vec(x), &zero_g);
                    proj.apply(&mut y);
                    y
                })
                .collect();
            m_orthonormalize(m, &mut next, &mut rng, &proj);

            let ay: Vec<Vec<f64>> = next.iter().map(|y| a.mul_vec(y)).collect();
            let reduced = DMatrix::from_fn(block, block, |i, j| 0.5 * (dot(&next[i], &ay[j]) + dot(&next[j], &ay[i])));
            let eig = SymmetricEigen::new(reduced);
            let mut order: Vec<usize> = (0..block).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap().then(i.cmp(&j)));
            basis = order
                .iter()
                .map(|&c| {
                    let mut v = vec![0.0; n];
                    for (r, y) in next.iter().enumerate() {
                        axpy(eig.eigenvectors[(r, c)], y, &mut v);
                    }
                    v
                })
                .collect();
            let values: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
            let residuals: Vec<f64> = basis
                .iter()
                .zip(&values)
                .take(want)
                .map(|(x, &v)| {
                    let ax = a.mul_vec(x);
                    let mx = m.mul_vec(x);
                    let mut r = ax.clone();
                    axpy(-v, &mx, &mut r);
                    proj.apply_dual(&mut r);
                    let scale = (a_norm + v.abs() * m_norm) * norm2(x);
                    if scale > 0.0 {
                        norm2(&r) / scale
                    } else {
                        norm2(&r)
                    }
                })
                .collect();
            worst = residuals.iter().cloned().fold(0.0, f64::max);

            let done = residuals.iter().take_while(|&&r| r <= opts.tol).count();
            if done > 0 {
                for k in 0..done {
                    locked_vals.push(values[k]);
                    locked_vecs.push(basis[k].clone());
                    locked_res.push(residuals[k]);
                }
                carry = basis.split_off(done);
                next_round = true;
            } else if since_shift >= 20 && residuals[0] < 1e-3 {
                carry = std::mem::take(&mut basis);
                next_round = true;
            }
            if next_round && locked_vals.len() < opts.count {
                let rest = &values[done.min(values.len() - 1)..];
                let low = rest[0];
                let hi = rest[(want - done).min(rest.len() - 1)];
                let gap = (hi - low).max(1e-3 * low.abs().max(1.0));
                let cand = low - 0.5 * gap;
                if cand > shift {
                    shift = cand;
                }
            }
        }
    }
    Ok(finish(locked_vals, locked_vecs, locked_res, opts.count, iter))
}

fn finish(
    values: Vec<f64>,
    basis: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    count: usize,
    iterations: usize,
) -> EigenPairs {
    let mut idx: Vec<usize> = (0..count).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    EigenPairs {
        values: idx.iter().map(|&i| values[i]).collect(),
        vectors: idx.iter().map(|&i| basis[i].clone()).collect(),
        residuals: idx.iter().map(|&i| residuals[i]).collect(),
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Dirichlet Laplacian stiffness with identity mass: eigenvalues
    /// `2 − 2 cos(kπ/(n+1))`.
    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 80;
        let a = laplacian(n);
        let m = CsrMatrix::identity(n);
        let pairs = lowest_eigenpairs(
            &a,
            &m,
            &EigenOptions {
                count: 4,
                shift: -0.01,
                ..Default::default()
            },
        )
        .unwrap();
        for (k, v) in pairs.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-10, "k={k}: {v} vs {exact}");
        }
    }

    #[test]
    fn constraint_removes_direction() {
        let n = 40;
        let a = laplacian(n);
        let m = CsrMatrix::identity(n);
        let free = lowest_eigenpairs(&a, &m, &EigenOptions { count: 2, shift: -0.01, ..Default::default() }).unwrap();
        let constrained = lowest_eigenpairs(
            &a,
            &m,
            &EigenOptions {
                count: 1,
                shift: -0.01,
                constraints: vec![free.vectors[0].clone()],
                ..Default::default()
            },
        )
        .unwrap();
        assert!((constrained.values[0] - free.values[1]).abs() < 1e-10);
    }
}
