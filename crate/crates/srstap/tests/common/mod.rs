//! Shared test support: an independent BPDN oracle (complex coordinate
//! descent on the penalized form plus bisection on the residual curve),
//! a brute-force sparse-fit reference, and the clutter-ridge cell mask.
//!
//! Nothing here touches the library's solver path; agreement between the
//! two routes is the point.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use srstap::dictionary::Dictionary;
use srstap::model::clutter_doppler;
use srstap::scenario::ClutterScenario;

fn shrink(c: Complex64, kappa: f64) -> Complex64 {
    let mag = c.norm();
    if mag <= kappa {
        Complex64::new(0.0, 0.0)
    } else {
        c * ((mag - kappa) / mag)
    }
}

fn norm2(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Complex LASSO `min ½‖x − Ψα‖² + κ Σ|α_i|` by cyclic coordinate descent,
/// warm-startable. Returns the coefficient vector.
pub fn cd_lasso(
    psi: &Array2<Complex64>,
    x: ArrayView1<Complex64>,
    kappa: f64,
    warm: Option<Array1<Complex64>>,
    max_sweeps: usize,
) -> Array1<Complex64> {
    let n = psi.ncols();
    let col_norm_sq: Vec<f64> = (0..n)
        .map(|j| psi.column(j).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let mut alpha = warm.unwrap_or_else(|| Array1::zeros(n));
    // residual = x - Ψ alpha
    let mut residual = x.to_owned();
    for j in 0..n {
        if alpha[j] != Complex64::new(0.0, 0.0) {
            let aj = alpha[j];
            residual.zip_mut_with(&psi.column(j), |r, p| *r -= aj * p);
        }
    }
    let scale = norm2(&x.to_owned()).max(1e-300);
    for _sweep in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..n {
            let cn = col_norm_sq[j];
            if cn == 0.0 {
                continue;
            }
            let corr: Complex64 = psi
                .column(j)
                .iter()
                .zip(residual.iter())
                .map(|(p, r)| p.conj() * r)
                .sum();
            let c = corr + alpha[j] * cn;
            let new = shrink(c, kappa) / cn;
            let delta = new - alpha[j];
            if delta.norm() > 0.0 {
                residual.zip_mut_with(&psi.column(j), |r, p| *r -= delta * p);
                alpha[j] = new;
                max_delta = max_delta.max(delta.norm());
            }
        }
        if max_delta <= 1e-12 * scale {
            break;
        }
    }
    alpha
}

/// Independent oracle for `min ‖α‖₁ s.t. ‖x − Ψα‖ ≤ ε`: bisect the penalty
/// of the LASSO form until the residual lands on ε (the residual norm is
/// monotone in the penalty), keeping the feasible side.
pub fn bpdn_oracle(
    psi: &Array2<Complex64>,
    x: ArrayView1<Complex64>,
    epsilon: f64,
) -> Array1<Complex64> {
    let x_owned = x.to_owned();
    let x_norm = norm2(&x_owned);
    if x_norm == 0.0 || epsilon >= x_norm {
        return Array1::zeros(psi.ncols());
    }
    // penalty at alpha = 0
    let mut kappa_hi = (0..psi.ncols())
        .map(|j| {
            psi.column(j)
                .iter()
                .zip(x.iter())
                .map(|(p, v)| p.conj() * v)
                .sum::<Complex64>()
                .norm()
        })
        .fold(0.0, f64::max);
    let mut kappa_lo = 0.0f64;
    let mut warm: Option<Array1<Complex64>> = None;
    let mut best_feasible: Option<Array1<Complex64>> = None;
    for _ in 0..200 {
        let kappa = if kappa_lo == 0.0 {
            0.5 * kappa_hi
        } else {
            (kappa_lo * kappa_hi).sqrt()
        };
        let alpha = cd_lasso(psi, x, kappa, warm.take(), 50_000);
        let mut residual = x.to_owned();
        for j in 0..psi.ncols() {
            if alpha[j] != Complex64::new(0.0, 0.0) {
                let aj = alpha[j];
                residual.zip_mut_with(&psi.column(j), |r, p| *r -= aj * p);
            }
        }
        let res = norm2(&residual);
        if res <= epsilon {
            best_feasible = Some(alpha.clone());
            kappa_lo = kappa;
        } else {
            kappa_hi = kappa;
        }
        warm = Some(alpha);
        if res != 0.0 && (res - epsilon).abs() <= 1e-9 * epsilon {
            break;
        }
        if kappa_lo > 0.0 && kappa_hi / kappa_lo < 1.0 + 1e-12 {
            break;
        }
    }
    best_feasible.expect("the problem is feasible, bisection must find a point")
}

pub fn l1_norm(alpha: &Array1<Complex64>) -> f64 {
    alpha.iter().map(|z| z.norm()).sum()
}

pub fn fit_residual_norm(
    psi: &Array2<Complex64>,
    x: ArrayView1<Complex64>,
    alpha: &Array1<Complex64>,
) -> f64 {
    let fit = psi.dot(alpha);
    x.iter()
        .zip(fit.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Exhaustive best two-column least-squares fit: returns the support of the
/// subset (size one or two) with the smallest residual.
pub fn brute_force_best_two(psi: &Array2<Complex64>, x: ArrayView1<Complex64>) -> Vec<usize> {
    let n = psi.ncols();
    let mut best: (f64, Vec<usize>) = (f64::INFINITY, vec![]);
    let mut consider = |support: &[usize]| {
        let res = subset_ls_residual(psi, x, support);
        if res < best.0 {
            best = (res, support.to_vec());
        }
    };
    for i in 0..n {
        consider(&[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            consider(&[i, j]);
        }
    }
    best.1
}

fn subset_ls_residual(
    psi: &Array2<Complex64>,
    x: ArrayView1<Complex64>,
    support: &[usize],
) -> f64 {
    let s = support.len();
    let mut gram = Array2::<Complex64>::zeros((s, s));
    let mut rhs = Array1::<Complex64>::zeros(s);
    for (a, &ia) in support.iter().enumerate() {
        for (b, &ib) in support.iter().enumerate() {
            gram[(a, b)] = psi
                .column(ia)
                .iter()
                .zip(psi.column(ib).iter())
                .map(|(p, q)| p.conj() * q)
                .sum();
        }
        rhs[a] = psi
            .column(ia)
            .iter()
            .zip(x.iter())
            .map(|(p, v)| p.conj() * v)
            .sum();
    }
    // tiny Hermitian solve by Gaussian elimination with partial pivoting
    let mut aug = gram.clone();
    let mut b = rhs.clone();
    for col in 0..s {
        let mut piv = col;
        for row in (col + 1)..s {
            if aug[(row, col)].norm() > aug[(piv, col)].norm() {
                piv = row;
            }
        }
        if aug[(piv, col)].norm() < 1e-12 {
            return f64::INFINITY;
        }
        if piv != col {
            for k in 0..s {
                let tmp = aug[(col, k)];
                aug[(col, k)] = aug[(piv, k)];
                aug[(piv, k)] = tmp;
            }
            let tmp = b[col];
            b[col] = b[piv];
            b[piv] = tmp;
        }
        for row in (col + 1)..s {
            let f = aug[(row, col)] / aug[(col, col)];
            for k in col..s {
                let v = aug[(col, k)];
                aug[(row, k)] -= f * v;
            }
            let bc = b[col];
            b[row] -= f * bc;
        }
    }
    let mut coef = Array1::<Complex64>::zeros(s);
    for row in (0..s).rev() {
        let mut v = b[row];
        for k in (row + 1)..s {
            v -= aug[(row, k)] * coef[k];
        }
        coef[row] = v / aug[(row, row)];
    }
    let mut residual = x.to_owned();
    for (a, &ia) in support.iter().enumerate() {
        let ca = coef[a];
        residual.zip_mut_with(&psi.column(ia), |r, p| *r -= ca * p);
    }
    norm2(&residual)
}

/// Mask of grid cells within one cell (Chebyshev) of the true clutter ridge
/// over the scenario's azimuth extent (extent widened by one angle cell).
pub fn ridge_mask(dict: &Dictionary, sc: &ClutterScenario) -> Vec<bool> {
    let g = &dict.grid;
    let p = &sc.params;
    let n_a = g.n_angle();
    let n_d = g.n_doppler();
    let mut mask = vec![false; g.n_cells()];
    let (lo, hi) = sc.azimuth_extent_deg;
    let (slo, shi) = (lo.to_radians().sin(), hi.to_radians().sin());
    let ds = 2.0 / n_a as f64;
    let fstep = g.prf / n_d as f64;
    for a in 0..n_a {
        let sin_a = g.angle_nodes_deg[a].to_radians().sin();
        if sin_a < slo - ds || sin_a > shi + ds {
            continue;
        }
        let fd = clutter_doppler(p, g.angle_nodes_deg[a]);
        let d_star = ((fd + 0.5 * g.prf) / fstep).round() as isize;
        for da in -1isize..=1 {
            for dd in -1isize..=1 {
                let aa = a as isize + da;
                let dd2 = d_star + dd;
                if aa >= 0 && (aa as usize) < n_a && dd2 >= 0 && (dd2 as usize) < n_d {
                    mask[g.column_index(aa as usize, dd2 as usize)] = true;
                }
            }
        }
    }
    mask
}

/// Fraction of spectrum power lying outside the ridge mask.
pub fn off_ridge_fraction(power: &Array1<f64>, mask: &[bool]) -> f64 {
    let total: f64 = power.sum();
    if total == 0.0 {
        return 0.0;
    }
    let off: f64 = power
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| !m)
        .map(|(&p, _)| p)
        .sum();
    off / total
}
