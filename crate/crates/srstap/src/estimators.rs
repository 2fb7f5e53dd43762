//! Clutter covariance estimators and adaptive filter construction.
//!
//! All estimators produce a [`CovarianceEstimate`] tagged with its
//! provenance. Filters solve the Hermitian system through a Cholesky factor;
//! no estimator path ever forms an explicit inverse.

use crate::dictionary::Dictionary;
use crate::jointsr::PowerSpectrum;
use crate::linalg::{eigh, hermitian_deviation, CholeskyFactor, LinalgError};
use crate::model::{clutter_doppler, steering_vector, RadarParams, SteeringVector};
use crate::scenario::{scatter_angles_deg, SnapshotSet};
use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("covariance is too ill-conditioned to invert (condition estimate {condition:.3e}); add diagonal loading")]
    IllConditioned { condition: f64 },
    #[error("covariance factorization failed: {0}; add diagonal loading")]
    Factorization(#[from] LinalgError),
    #[error("filter weights degenerate: {0}")]
    DegenerateWeights(String),
    #[error("no training snapshots supplied")]
    EmptyTrainingSet,
}

/// Which estimator produced a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    GroundTruth,
    Identity,
    Smi,
    Lsmi,
    ColoredLoading,
    AssumedPrior,
    SrStap,
}

/// An NM x NM Hermitian PSD covariance matrix tagged with the estimator that
/// built it and the loading factors used.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: Array2<Complex64>,
    pub kind: EstimatorKind,
    /// Diagonal loading added, if any.
    pub beta_l: f64,
    /// Colored loading factor applied to a prior, if any.
    pub beta_d: f64,
}

impl CovarianceEstimate {
    pub fn new(matrix: Array2<Complex64>, kind: EstimatorKind) -> Self {
        Self {
            matrix,
            kind,
            beta_l: 0.0,
            beta_d: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    /// Check the Hermitian and PSD invariants (eigendecomposition based, so
    /// intended for tests and audits rather than hot loops).
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let dev = hermitian_deviation(&self.matrix);
        if dev > 1e-12 {
            return Err(EstimatorError::DegenerateWeights(format!(
                "matrix deviates from Hermitian by {dev:.3e}"
            )));
        }
        let (w, _) = eigh(&self.matrix);
        let floor = -1e-10 * self.trace() / self.dim() as f64;
        if w[0] < floor {
            return Err(EstimatorError::DegenerateWeights(format!(
                "minimum eigenvalue {:.3e} below PSD floor {:.3e}",
                w[0], floor
            )));
        }
        Ok(())
    }
}

/// Space-time filter weights `w = R^{-1} s` (scale constant fixed to one;
/// every downstream metric is invariant to it).
#[derive(Debug, Clone)]
pub struct FilterWeights {
    pub w: Array1<Complex64>,
    pub target: SteeringVector,
}

/// Sample matrix inversion estimate `(1/L) Σ x_i x_i^H`.
///
/// Panics if the training set is empty; use [`colored_loading`] when a pure
/// prior is wanted.
pub fn smi(xs: &SnapshotSet) -> CovarianceEstimate {
    let l = xs.n_snapshots();
    assert!(l >= 1, "SMI needs at least one snapshot");
    let nm = xs.dim();
    let mut r = Array2::<Complex64>::zeros((nm, nm));
    for col in xs.data.columns() {
        accumulate_outer(&mut r, col, 1.0 / l as f64);
    }
    CovarianceEstimate::new(r, EstimatorKind::Smi)
}

/// Diagonally loaded SMI: `SMI + β_L I`.
pub fn lsmi(xs: &SnapshotSet, beta_l: f64) -> CovarianceEstimate {
    assert!(beta_l >= 0.0, "loading must be non-negative");
    let mut est = smi(xs);
    add_scaled_identity(&mut est.matrix, beta_l);
    est.kind = EstimatorKind::Lsmi;
    est.beta_l = beta_l;
    est
}

/// Knowledge-based prior covariance: unit-power scatters placed uniformly in
/// sin(angle) across the assumed extent, Doppler taken from the assumed
/// clutter ridge. No noise term.
pub fn assumed_ccm(
    p_assumed: &RadarParams,
    extent_assumed_deg: (f64, f64),
    n_assumed: usize,
) -> CovarianceEstimate {
    let nm = p_assumed.dim();
    let mut r = Array2::<Complex64>::zeros((nm, nm));
    for angle in scatter_angles_deg(extent_assumed_deg, n_assumed) {
        let doppler = clutter_doppler(p_assumed, angle);
        let phi = steering_vector(p_assumed, angle, doppler);
        accumulate_outer(&mut r, phi.values.view(), 1.0);
    }
    CovarianceEstimate::new(r, EstimatorKind::AssumedPrior)
}

/// Colored loading: `SMI + β_d R_c + β_L I`. An empty training set is
/// allowed and yields the pure prior `β_d R_c + β_L I`.
pub fn colored_loading(
    xs: &SnapshotSet,
    r_c: &CovarianceEstimate,
    beta_d: f64,
    beta_l: f64,
) -> CovarianceEstimate {
    assert!(beta_d >= 0.0 && beta_l >= 0.0, "loading must be non-negative");
    let nm = r_c.dim();
    let mut est = if xs.n_snapshots() >= 1 {
        assert_eq!(xs.dim(), nm, "snapshot/prior dimension mismatch");
        smi(xs)
    } else {
        CovarianceEstimate::new(Array2::zeros((nm, nm)), EstimatorKind::Smi)
    };
    est.matrix
        .zip_mut_with(&r_c.matrix, |a, b| *a += b * beta_d);
    add_scaled_identity(&mut est.matrix, beta_l);
    est.kind = EstimatorKind::ColoredLoading;
    est.beta_d = beta_d;
    est.beta_l = beta_l;
    est
}

/// Covariance from an estimated space-time power spectrum:
/// `Σ_i p_i φ_i φ_i^H + β_L I`, summing only strictly positive cells.
pub fn sr_ccm(spec: &PowerSpectrum, d: &Dictionary, beta_l: f64) -> CovarianceEstimate {
    assert_eq!(
        spec.power.len(),
        d.n_cells(),
        "spectrum/dictionary grid mismatch"
    );
    let nm = d.nm();
    let mut r = Array2::<Complex64>::zeros((nm, nm));
    for (i, &p) in spec.power.iter().enumerate() {
        if p > 0.0 {
            accumulate_outer(&mut r, d.column(i), p);
        }
    }
    add_scaled_identity(&mut r, beta_l);
    let mut est = CovarianceEstimate::new(r, EstimatorKind::SrStap);
    est.beta_l = beta_l;
    est
}

/// Adaptive filter weights `w = R^{-1} s` via a Hermitian solve. Fails with
/// advice when the covariance is singular or the one-shot condition estimate
/// exceeds 1e14.
pub fn filter_weights(
    r: &CovarianceEstimate,
    s: &SteeringVector,
) -> Result<FilterWeights, EstimatorError> {
    let chol = CholeskyFactor::new(&r.matrix)?;
    let condition = chol.condition_estimate(&r.matrix);
    if condition > 1e14 {
        return Err(EstimatorError::IllConditioned { condition });
    }
    let w = chol.solve_vec(s.values.view());
    let gain: Complex64 = w
        .iter()
        .zip(s.values.iter())
        .map(|(wi, si)| wi.conj() * si)
        .sum();
    if !gain.norm().is_finite() || gain.norm() == 0.0 {
        return Err(EstimatorError::DegenerateWeights(
            "w^H s vanished".to_string(),
        ));
    }
    Ok(FilterWeights {
        w,
        target: s.clone(),
    })
}

/// Capon (minimum-variance) reference spectrum: per grid cell,
/// `1 / (φ_i^H R^{-1} φ_i)`.
pub fn capon_spectrum(
    r: &CovarianceEstimate,
    d: &Dictionary,
) -> Result<PowerSpectrum, EstimatorError> {
    let chol = CholeskyFactor::new(&r.matrix)?;
    let mut power = Array1::<f64>::zeros(d.n_cells());
    for i in 0..d.n_cells() {
        let phi = d.column(i);
        let rinv_phi = chol.solve_vec(phi);
        let denom: f64 = phi
            .iter()
            .zip(rinv_phi.iter())
            .map(|(p, q)| (p.conj() * q).re)
            .sum();
        power[i] = 1.0 / denom;
    }
    Ok(PowerSpectrum {
        power,
        grid: d.grid.clone(),
        n_snapshots: 0,
    })
}

fn accumulate_outer(r: &mut Array2<Complex64>, v: ArrayView1<Complex64>, weight: f64) {
    let n = v.len();
    for i in 0..n {
        let vi = v[i] * weight;
        for j in 0..n {
            r[(i, j)] += vi * v[j].conj();
        }
    }
}

fn add_scaled_identity(r: &mut Array2<Complex64>, beta: f64) {
    for i in 0..r.nrows() {
        r[(i, i)] += Complex64::new(beta, 0.0);
    }
}
