//! Dense complex Hermitian linear algebra sized for space-time problems
//! (NM on the order of 64). Factorizations are written out directly rather
//! than pulled from a LAPACK binding; at this dimension a few hand-rolled
//! kernels are simpler to ship and plenty fast.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} has value {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Lower-triangular Cholesky factor `L` of a Hermitian positive-definite
/// matrix, `A = L L^H`. Solves reuse the factor; the matrix is never
/// explicitly inverted.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Array2<Complex64>,
}

impl CholeskyFactor {
    /// Factor a Hermitian positive-definite matrix. Only the lower triangle
    /// of `a` is read.
    pub fn new(a: &Array2<Complex64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut l = Array2::<Complex64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[(j, j)].re;
            for k in 0..j {
                diag -= l[(j, k)].norm_sqr();
            }
            if !diag.is_finite() || diag <= 0.0 {
                return Err(LinalgError::NotPositiveDefinite {
                    pivot: j,
                    value: diag,
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = sum / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve `A x = b` by forward/back substitution.
    pub fn solve_vec(&self, b: ArrayView1<Complex64>) -> Array1<Complex64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut y = b.to_owned();
        // L y = b
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[(i, k)] * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)].conj() * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        y
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = Array2::<Complex64>::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(col));
        }
        out
    }

    /// One-shot 2-norm condition estimate of the factored matrix: a fixed
    /// number of power iterations for the largest eigenvalue and inverse
    /// iterations (through this factor) for the smallest.
    pub fn condition_estimate(&self, a: &Array2<Complex64>) -> f64 {
        let n = self.dim();
        let mut v = Array1::from_shape_fn(n, |i| Complex64::new(1.0 + (i as f64) * 1e-3, 0.0));
        normalize(&mut v);
        let mut lambda_max = 0.0;
        for _ in 0..32 {
            let mut w = a.dot(&v);
            lambda_max = norm2(w.view());
            if lambda_max == 0.0 {
                return f64::INFINITY;
            }
            normalize(&mut w);
            v = w;
        }
        let mut u = Array1::from_shape_fn(n, |i| Complex64::new(1.0, (i as f64) * 1e-3));
        normalize(&mut u);
        let mut inv_lambda_min = 0.0;
        for _ in 0..32 {
            let mut w = self.solve_vec(u.view());
            inv_lambda_min = norm2(w.view());
            if inv_lambda_min == 0.0 {
                return f64::INFINITY;
            }
            normalize(&mut w);
            u = w;
        }
        lambda_max * inv_lambda_min
    }
}

fn norm2(v: ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut Array1<Complex64>) {
    let n = norm2(v.view());
    if n > 0.0 {
        v.mapv_inplace(|z| z / n);
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the matching unitary
/// eigenvector matrix (columns). Only the Hermitian part of `a` is used.
pub fn eigh(a: &Array2<Complex64>) -> (Array1<f64>, Array2<Complex64>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "eigh expects a square matrix");
    // Work on the explicit Hermitian average so tiny asymmetries cannot bias
    // the rotations.
    let mut m = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)].conj());
        }
    }
    let mut v = Array2::<Complex64>::eye(n);
    let fro: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let tol = (fro.max(f64::MIN_POSITIVE)) * 1e-14;

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= tol * 1e-2 {
                    continue;
                }
                let phase = apq / mag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = 0.5 * (2.0 * mag).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                let sp = phase * s; // s * e^{i phi}
                let spc = phase.conj() * s; // s * e^{-i phi}

                // column rotation: A <- A J with J = [[c, -sp], [spc, c]]
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c + akq * spc;
                    m[(k, q)] = akq * c - akp * sp;
                }
                // row rotation: A <- J^H A
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c + aqk * sp;
                    m[(q, k)] = aqk * c - apk * spc;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * spc;
                    v[(k, q)] = vkq * c - vkp * sp;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
    let eigvals = Array1::from_iter(order.iter().map(|&i| m[(i, i)].re));
    let mut eigvecs = Array2::<Complex64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        eigvecs.column_mut(dst).assign(&v.column(src));
    }
    (eigvals, eigvecs)
}

/// Largest relative deviation from Hermitian symmetry, `max |A - A^H| / max |A|`.
pub fn hermitian_deviation(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
            scale = scale.max(a[(i, j)].norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_hermitian_pd(n: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = StdRng::seed_from_u64(seed);
        let b = Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut a = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += b[(i, k)] * b[(j, k)].conj();
                }
                a[(i, j)] = s;
            }
            a[(i, i)] += Complex64::new(0.5, 0.0);
        }
        a
    }

    #[test]
    fn cholesky_round_trip() {
        let a = random_hermitian_pd(12, 7);
        let f = CholeskyFactor::new(&a).unwrap();
        let mut rng = StdRng::seed_from_u64(8);
        let b = Array1::from_shape_fn(12, |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let x = f.solve_vec(b.view());
        let r = a.dot(&x) - &b;
        let err: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10, "residual {err}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Array2::<Complex64>::eye(4);
        a[(2, 2)] = Complex64::new(-1.0, 0.0);
        match CholeskyFactor::new(&a) {
            Err(LinalgError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        let a = random_hermitian_pd(10, 3);
        let (w, v) = eigh(&a);
        // A V = V diag(w)
        for j in 0..10 {
            let av = a.dot(&v.column(j).to_owned());
            let err: f64 = av
                .iter()
                .zip(v.column(j).iter())
                .map(|(l, r)| (l - r * w[j]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-9, "column {j} residual {err}");
        }
        // eigenvalues sorted ascending
        for j in 1..10 {
            assert!(w[j] >= w[j - 1]);
        }
        // V unitary
        for i in 0..10 {
            for j in 0..10 {
                let dot: Complex64 = (0..10).map(|k| v[(k, i)].conj() * v[(k, j)]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigh_diagonal_is_identity_case() {
        let mut a = Array2::<Complex64>::zeros((3, 3));
        a[(0, 0)] = Complex64::new(3.0, 0.0);
        a[(1, 1)] = Complex64::new(1.0, 0.0);
        a[(2, 2)] = Complex64::new(2.0, 0.0);
        let (w, _) = eigh(&a);
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 2.0).abs() < 1e-12);
        assert!((w[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn condition_estimate_tracks_spectrum() {
        let mut a = Array2::<Complex64>::eye(6);
        a[(0, 0)] = Complex64::new(1e4, 0.0);
        let f = CholeskyFactor::new(&a).unwrap();
        let cond = f.condition_estimate(&a);
        assert!(cond > 1e3 && cond < 1e5, "cond {cond}");
    }
}
