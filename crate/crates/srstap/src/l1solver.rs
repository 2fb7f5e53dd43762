//! Complex basis-pursuit denoising: minimize `‖α‖₁` subject to
//! `‖x − Ψα‖₂ ≤ ε`, where the L1 norm sums coefficient moduli.
//!
//! The solver is an alternating-direction splitting with three primal
//! blocks: the free coefficient vector `α`, a shrinkage copy `z` (complex
//! soft-thresholding, magnitude shrinkage preserving phase), and a residual
//! copy `r` projected onto the ε-ball. The coupled quadratic α-step is
//! solved exactly through the matrix-inversion identity: with
//! `M = I + Ψ Ψ^H` (small, NM x NM, factored once per dictionary)
//!
//! ```text
//! b = (z − u) + Ψ^H (x − r − v)
//! y = M⁻¹ Ψ b            so that  α = b − Ψ^H y   and   Ψ α = y
//! ```
//!
//! which keeps each iteration at three thin matrix-vector products against
//! the dictionary. Inputs are normalized to unit L2 internally; the solve is
//! positively homogeneous so results are scaled back exactly.

use crate::dictionary::{Dictionary, GridSpec};
use crate::linalg::CholeskyFactor;
use crate::model::RadarParams;
use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("BPDN did not converge within {iterations} iterations (residual {residual:.6e} vs allowance {epsilon:.6e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        epsilon: f64,
        /// Last iterate, for diagnosis or downstream salvage.
        last: Box<SparseSpectrum>,
    },
    #[error("dimension mismatch: snapshot has {got} entries, dictionary rows {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Tuning for one BPDN solve.
#[derive(Debug, Clone)]
pub struct BpdnConfig {
    /// Residual allowance ε, in the L2 units of the snapshot.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative convergence tolerance (also the feasibility slack on the
    /// returned iterate: `‖x − Ψα̂‖ ≤ ε (1 + tol)`).
    pub tol: f64,
    /// Initial penalty parameter of the splitting scheme; adapted online by
    /// residual balancing.
    pub rho: f64,
}

impl BpdnConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iters: 6000,
            tol: 3e-4,
            rho: 1000.0,
        }
    }

    /// Allowance matched to the expected noise norm, `ε = sqrt(NM δ²)`.
    pub fn noise_scaled(p: &RadarParams) -> Self {
        Self::new((p.dim() as f64 * p.noise_power).sqrt())
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(SolverError::InvalidConfig(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if self.max_iters < 1 {
            return Err(SolverError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(SolverError::InvalidConfig("tol must be positive".into()));
        }
        if !self.rho.is_finite() || self.rho <= 0.0 {
            return Err(SolverError::InvalidConfig("rho must be positive".into()));
        }
        Ok(())
    }
}

/// Complex coefficient vector over the angle-Doppler grid.
#[derive(Debug, Clone)]
pub struct SparseSpectrum {
    pub coeffs: Array1<Complex64>,
    pub grid: GridSpec,
}

impl SparseSpectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).sum()
    }

    /// Per-cell power `|α_i|²`.
    pub fn power(&self) -> Array1<f64> {
        self.coeffs.mapv(|z| z.norm_sqr())
    }

    pub fn magnitudes(&self) -> Array1<f64> {
        self.coeffs.mapv(|z| z.norm())
    }
}

/// Per-dictionary precomputation shared by every solve: split re/im storage
/// of Ψ (column-major) and the Cholesky factor of `M = I + Ψ Ψ^H`.
#[derive(Debug)]
pub struct SolverCache {
    nm: usize,
    n_cells: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    m_chol: CholeskyFactor,
}

impl SolverCache {
    pub(crate) fn build(d: &Dictionary) -> Self {
        let nm = d.nm();
        let n_cells = d.n_cells();
        let mut re = vec![0.0; nm * n_cells];
        let mut im = vec![0.0; nm * n_cells];
        for j in 0..n_cells {
            let col = d.psi.column(j);
            for k in 0..nm {
                re[j * nm + k] = col[k].re;
                im[j * nm + k] = col[k].im;
            }
        }
        // M = I + Ψ Ψ^H, accumulated column by column on the lower triangle.
        let mut m = ndarray::Array2::<Complex64>::eye(nm);
        for j in 0..n_cells {
            let cre = &re[j * nm..(j + 1) * nm];
            let cim = &im[j * nm..(j + 1) * nm];
            for a in 0..nm {
                let ca = Complex64::new(cre[a], cim[a]);
                for b in 0..=a {
                    let cb = Complex64::new(cre[b], -cim[b]);
                    m[(a, b)] += ca * cb;
                }
            }
        }
        for a in 0..nm {
            for b in (a + 1)..nm {
                m[(a, b)] = m[(b, a)].conj();
            }
        }
        let m_chol = CholeskyFactor::new(&m).expect("I + ΨΨ^H is positive definite");
        SolverCache {
            nm,
            n_cells,
            re,
            im,
            m_chol,
        }
    }

    /// out[j] = Σ_k conj(Ψ[k, j]) w[k]
    fn adjoint_into(&self, w: &SplitVec, out: &mut SplitVec) {
        let nm = self.nm;
        let w_re = &w.re[..nm];
        let w_im = &w.im[..nm];
        for j in 0..self.n_cells {
            let cre = &self.re[j * nm..(j + 1) * nm];
            let cim = &self.im[j * nm..(j + 1) * nm];
            // blocked accumulators break the serial FP-add chain so the
            // reduction can pipeline/vectorize
            let mut acc_re = [0.0f64; 4];
            let mut acc_im = [0.0f64; 4];
            let chunks = nm / 4;
            for c in 0..chunks {
                let base = c * 4;
                for l in 0..4 {
                    let k = base + l;
                    acc_re[l] += cre[k] * w_re[k] + cim[k] * w_im[k];
                    acc_im[l] += cre[k] * w_im[k] - cim[k] * w_re[k];
                }
            }
            let mut rr = acc_re[0] + acc_re[1] + acc_re[2] + acc_re[3];
            let mut ii = acc_im[0] + acc_im[1] + acc_im[2] + acc_im[3];
            for k in chunks * 4..nm {
                rr += cre[k] * w_re[k] + cim[k] * w_im[k];
                ii += cre[k] * w_im[k] - cim[k] * w_re[k];
            }
            out.re[j] = rr;
            out.im[j] = ii;
        }
    }

    /// out = Ψ b (dense accumulation over columns)
    fn forward_into(&self, b: &SplitVec, out: &mut SplitVec) {
        let nm = self.nm;
        out.fill_zero();
        let out_re = &mut out.re[..nm];
        let out_im = &mut out.im[..nm];
        for j in 0..self.n_cells {
            let br = b.re[j];
            let bi = b.im[j];
            if br == 0.0 && bi == 0.0 {
                continue;
            }
            let cre = &self.re[j * nm..(j + 1) * nm];
            let cim = &self.im[j * nm..(j + 1) * nm];
            for k in 0..nm {
                out_re[k] += br * cre[k] - bi * cim[k];
                out_im[k] += br * cim[k] + bi * cre[k];
            }
        }
    }

    /// Dual residual of the splitting after a (z, r) update:
    /// `ρ ‖Δz − Ψ^H Δr‖₂` (one thin product, used at checkpoints only).
    fn dual_residual(
        &self,
        rho: f64,
        z: &SplitVec,
        z_prev: &SplitVec,
        dr: &SplitVec,
        scratch: &mut SplitVec,
    ) -> f64 {
        self.adjoint_into(dr, scratch);
        let mut acc = 0.0;
        for j in 0..self.n_cells {
            let re = z.re[j] - z_prev.re[j] - scratch.re[j];
            let im = z.im[j] - z_prev.im[j] - scratch.im[j];
            acc += re * re + im * im;
        }
        rho * acc.sqrt()
    }

    /// `‖x − Ψ z‖₂` exploiting the sparsity of z.
    fn residual_norm(&self, x: &SplitVec, z: &SplitVec) -> f64 {
        let nm = self.nm;
        let mut acc = SplitVec {
            re: x.re.clone(),
            im: x.im.clone(),
        };
        for j in 0..self.n_cells {
            let br = z.re[j];
            let bi = z.im[j];
            if br == 0.0 && bi == 0.0 {
                continue;
            }
            let cre = &self.re[j * nm..(j + 1) * nm];
            let cim = &self.im[j * nm..(j + 1) * nm];
            for k in 0..nm {
                acc.re[k] -= br * cre[k] - bi * cim[k];
                acc.im[k] -= br * cim[k] + bi * cre[k];
            }
        }
        acc.norm()
    }
}

/// Split-complex working vector.
#[derive(Debug, Clone)]
struct SplitVec {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitVec {
    fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    fn from_complex(v: ArrayView1<Complex64>) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    fn len(&self) -> usize {
        self.re.len()
    }

    fn fill_zero(&mut self) {
        self.re.iter_mut().for_each(|v| *v = 0.0);
        self.im.iter_mut().for_each(|v| *v = 0.0);
    }

    fn copy_from(&mut self, other: &SplitVec) {
        self.re.copy_from_slice(&other.re);
        self.im.copy_from_slice(&other.im);
    }

    fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len() {
            acc += self.re[k] * self.re[k] + self.im[k] * self.im[k];
        }
        acc
    }

    fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn dist(&self, other: &SplitVec) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len() {
            let dr = self.re[k] - other.re[k];
            let di = self.im[k] - other.im[k];
            acc += dr * dr + di * di;
        }
        acc.sqrt()
    }

    fn scale(&mut self, c: f64) {
        self.re.iter_mut().for_each(|v| *v *= c);
        self.im.iter_mut().for_each(|v| *v *= c);
    }
}

/// A reusable BPDN solver bound to one dictionary. Construction touches the
/// per-dictionary cache; individual solves are then cheap and independent,
/// so one solver can serve many snapshots (in parallel via shared reference).
pub struct BpdnSolver<'d> {
    dict: &'d Dictionary,
    cache: std::sync::Arc<SolverCache>,
    cfg: BpdnConfig,
}

// over-relaxation factor for the splitting iteration
const RELAXATION: f64 = 1.6;

impl<'d> BpdnSolver<'d> {
    pub fn new(dict: &'d Dictionary, cfg: BpdnConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        Ok(Self {
            dict,
            cache: dict.solver_cache(),
            cfg,
        })
    }

    pub fn config(&self) -> &BpdnConfig {
        &self.cfg
    }

    fn zero_spectrum(&self) -> SparseSpectrum {
        SparseSpectrum {
            coeffs: Array1::zeros(self.cache.n_cells),
            grid: self.dict.grid.clone(),
        }
    }

    /// Solve one snapshot. Returns the sparse iterate; the error branch
    /// carries the last iterate and its residual.
    pub fn solve(&self, x: ArrayView1<Complex64>) -> Result<SparseSpectrum, SolverError> {
        let cache = &self.cache;
        if x.len() != cache.nm {
            return Err(SolverError::DimensionMismatch {
                got: x.len(),
                expected: cache.nm,
            });
        }
        let x_norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if x_norm == 0.0 || self.cfg.epsilon >= x_norm {
            // the origin is feasible, and it is the L1 minimum
            return Ok(self.zero_spectrum());
        }

        let scale = x_norm;
        let eps = self.cfg.epsilon / scale;
        let tol = self.cfg.tol;
        let n = cache.n_cells;
        let m = cache.nm;

        let mut xs = SplitVec::from_complex(x);
        xs.scale(1.0 / scale);

        let mut z = SplitVec::zeros(n);
        let mut u = SplitVec::zeros(n);
        let mut alpha = SplitVec::zeros(n);
        let mut b = SplitVec::zeros(n);
        let mut psih_w = SplitVec::zeros(n);

        // residual-ball block starts at the projection of x itself
        let mut r = xs.clone();
        if eps < 1.0 {
            r.scale(eps);
        }
        let mut v = SplitVec::zeros(m);
        let mut w1 = SplitVec::zeros(m);
        let mut t = SplitVec::zeros(m);
        let mut y = SplitVec::zeros(m);

        let mut rho = self.cfg.rho;
        let mut z_prev = z.clone();
        let mut r_prev = r.clone();
        let mut best_residual = f64::INFINITY;
        let mut best_z = z.clone();
        let mut iterations = 0;

        for iter in 1..=self.cfg.max_iters {
            iterations = iter;
            // α-update through the small factored system
            for k in 0..m {
                w1.re[k] = xs.re[k] - r.re[k] - v.re[k];
                w1.im[k] = xs.im[k] - r.im[k] - v.im[k];
            }
            cache.adjoint_into(&w1, &mut psih_w);
            for j in 0..n {
                b.re[j] = z.re[j] - u.re[j] + psih_w.re[j];
                b.im[j] = z.im[j] - u.im[j] + psih_w.im[j];
            }
            cache.forward_into(&b, &mut t);
            solve_small(&cache.m_chol, &t, &mut y);
            cache.adjoint_into(&y, &mut psih_w);
            for j in 0..n {
                alpha.re[j] = b.re[j] - psih_w.re[j];
                alpha.im[j] = b.im[j] - psih_w.im[j];
            }

            std::mem::swap(&mut z_prev, &mut z);
            std::mem::swap(&mut r_prev, &mut r);

            // z-update: complex soft-threshold of the relaxed point + dual
            let kappa = 1.0 / rho;
            let g = RELAXATION;
            for j in 0..n {
                let ez_re = g * alpha.re[j] + (1.0 - g) * z_prev.re[j];
                let ez_im = g * alpha.im[j] + (1.0 - g) * z_prev.im[j];
                let wr = ez_re + u.re[j];
                let wi = ez_im + u.im[j];
                let mag = (wr * wr + wi * wi).sqrt();
                if mag > kappa {
                    let shrink = 1.0 - kappa / mag;
                    z.re[j] = shrink * wr;
                    z.im[j] = shrink * wi;
                } else {
                    z.re[j] = 0.0;
                    z.im[j] = 0.0;
                }
                u.re[j] += ez_re - z.re[j];
                u.im[j] += ez_im - z.im[j];
            }

            // r-update: project the relaxed residual point onto the ε-ball
            let mut q_norm_sqr = 0.0;
            for k in 0..m {
                let ey_re = g * y.re[k] + (1.0 - g) * (xs.re[k] - r_prev.re[k]);
                let ey_im = g * y.im[k] + (1.0 - g) * (xs.im[k] - r_prev.im[k]);
                // reuse w1 as the pre-projection point q = x − ŷ − v
                w1.re[k] = xs.re[k] - ey_re - v.re[k];
                w1.im[k] = xs.im[k] - ey_im - v.im[k];
                q_norm_sqr += w1.re[k] * w1.re[k] + w1.im[k] * w1.im[k];
                // stash ŷ in t for the dual update
                t.re[k] = ey_re;
                t.im[k] = ey_im;
            }
            let q_norm = q_norm_sqr.sqrt();
            let proj = if q_norm > eps { eps / q_norm } else { 1.0 };
            for k in 0..m {
                r.re[k] = proj * w1.re[k];
                r.im[k] = proj * w1.im[k];
                v.re[k] += t.re[k] + r.re[k] - xs.re[k];
                v.im[k] += t.im[k] + r.im[k] - xs.im[k];
            }

            // convergence bookkeeping on the unrelaxed iterates
            let pri_z = alpha.dist(&z);
            let mut pri_r_sqr = 0.0;
            for k in 0..m {
                let dr = y.re[k] + r.re[k] - xs.re[k];
                let di = y.im[k] + r.im[k] - xs.im[k];
                pri_r_sqr += dr * dr + di * di;
            }
            let pri_r = pri_r_sqr.sqrt();
            let scale_z = z.norm().max(alpha.norm()).max(1.0);
            let pri_ok = pri_z <= tol * scale_z && pri_r <= tol;

            // exact dual residual and returned-iterate feasibility are worth
            // a thin product each, so they run at checkpoints only
            let checkpoint = pri_ok || iter.is_multiple_of(8) || iter == self.cfg.max_iters;
            if checkpoint {
                for k in 0..m {
                    w1.re[k] = r.re[k] - r_prev.re[k];
                    w1.im[k] = r.im[k] - r_prev.im[k];
                }
                let dual = cache.dual_residual(rho, &z, &z_prev, &w1, &mut psih_w);
                let scale_dual = (u.norm() + v.norm()).max(1.0) * rho;
                let dual_ok = dual <= tol * scale_dual;

                let res = cache.residual_norm(&xs, &z);
                if res < best_residual {
                    best_residual = res;
                    best_z.copy_from(&z);
                }
                if pri_ok && dual_ok && res <= eps * (1.0 + tol) {
                    return Ok(self.spectrum_from(&z, scale));
                }

                // residual balancing keeps the penalty in a useful range
                if iter.is_multiple_of(32) {
                    let pri_max = pri_z.max(pri_r);
                    if pri_max * scale_dual > 10.0 * dual * scale_z && rho < self.cfg.rho * 1e4 {
                        rho *= 2.0;
                        u.scale(0.5);
                        v.scale(0.5);
                    } else if dual * scale_z > 10.0 * pri_max * scale_dual
                        && rho > self.cfg.rho * 1e-4
                    {
                        rho *= 0.5;
                        u.scale(2.0);
                        v.scale(2.0);
                    }
                }
            }
        }

        Err(SolverError::NonConvergence {
            iterations,
            residual: best_residual * scale,
            epsilon: self.cfg.epsilon,
            last: Box::new(self.spectrum_from(&best_z, scale)),
        })
    }

    fn spectrum_from(&self, z: &SplitVec, scale: f64) -> SparseSpectrum {
        let coeffs = Array1::from_iter(
            z.re.iter()
                .zip(z.im.iter())
                .map(|(&re, &im)| Complex64::new(re * scale, im * scale)),
        );
        SparseSpectrum {
            coeffs,
            grid: self.dict.grid.clone(),
        }
    }
}

fn solve_small(chol: &CholeskyFactor, rhs: &SplitVec, out: &mut SplitVec) {
    let n = rhs.len();
    let b = Array1::from_iter((0..n).map(|k| Complex64::new(rhs.re[k], rhs.im[k])));
    let sol = chol.solve_vec(b.view());
    for k in 0..n {
        out.re[k] = sol[k].re;
        out.im[k] = sol[k].im;
    }
}

/// One-shot convenience wrapper around [`BpdnSolver`].
pub fn solve_bpdn(
    d: &Dictionary,
    x: ArrayView1<Complex64>,
    cfg: &BpdnConfig,
) -> Result<SparseSpectrum, SolverError> {
    BpdnSolver::new(d, cfg.clone())?.solve(x)
}

/// Optimality audit for a candidate solution of the ε-ball problem.
#[derive(Debug, Clone)]
pub struct KktCertificate {
    /// `max(0, ‖x − Ψα‖₂ − ε)`.
    pub feasibility_gap: f64,
    /// Largest deviation of the scaled dual from unit magnitude with phase
    /// alignment, over the support of α.
    pub support_deviation: f64,
    pub epsilon: f64,
    pub x_norm: f64,
}

impl KktCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.feasibility_gap <= tol * self.x_norm.max(f64::MIN_POSITIVE)
            && self.support_deviation <= tol
    }
}

/// Evaluate primal feasibility and the dual stationarity condition at a
/// candidate `alpha`: with `r = x − Ψα` and the dual scaled so that
/// `‖Ψ^H r λ‖_∞ = 1`, every support entry must sit at unit magnitude with
/// its phase aligned to the coefficient's.
pub fn check_kkt(
    d: &Dictionary,
    x: ArrayView1<Complex64>,
    cfg: &BpdnConfig,
    alpha: &SparseSpectrum,
) -> KktCertificate {
    let resid = {
        let mut r = x.to_owned();
        let fit = d.psi.dot(&alpha.coeffs);
        r.zip_mut_with(&fit, |a, b| *a -= b);
        r
    };
    let resid_norm = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let x_norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let feasibility_gap = (resid_norm - cfg.epsilon).max(0.0);

    let max_alpha = alpha.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max_alpha == 0.0 {
        // the origin is optimal iff it is feasible; stationarity is vacuous
        return KktCertificate {
            feasibility_gap,
            support_deviation: 0.0,
            epsilon: cfg.epsilon,
            x_norm,
        };
    }

    // g = Ψ^H r
    let n_cells = d.n_cells();
    let mut g = Array1::<Complex64>::zeros(n_cells);
    for j in 0..n_cells {
        let col = d.psi.column(j);
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, w) in col.iter().zip(resid.iter()) {
            acc += c.conj() * w;
        }
        g[j] = acc;
    }
    let g_max = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let support_floor = 1e-6 * max_alpha;
    let support_deviation = if g_max == 0.0 {
        1.0
    } else {
        let inv = 1.0 / g_max;
        alpha
            .coeffs
            .iter()
            .zip(g.iter())
            .filter(|(a, _)| a.norm() > support_floor)
            .map(|(a, gi)| {
                let phase = a / a.norm();
                (gi * inv * phase.conj() - Complex64::new(1.0, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    };

    KktCertificate {
        feasibility_gap,
        support_deviation,
        epsilon: cfg.epsilon,
        x_norm,
    }
}
