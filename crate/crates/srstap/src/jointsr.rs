//! Multi-snapshot spectrum estimation.
//!
//! Two routes: per-snapshot recovery with power averaging, and the joint
//! procedure that decomposes into per-snapshot solves, votes on the support
//! positions (position information is more stable across snapshots than
//! amplitude), refits amplitudes by least squares on the joint support, and
//! averages per-cell power.

use crate::dictionary::{Dictionary, GridSpec};
use crate::l1solver::{BpdnConfig, BpdnSolver, SolverError, SparseSpectrum};
use crate::linalg::{eigh, CholeskyFactor};
use crate::scenario::SnapshotSet;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JointError {
    #[error("sparse recovery failed on snapshot {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: SolverError,
    },
    #[error("solver setup failed: {0}")]
    Setup(#[from] SolverError),
    #[error("need at least one snapshot")]
    EmptyTrainingSet,
    #[error("support size {s} outside [1, {cells}]")]
    InvalidSupportSize { s: usize, cells: usize },
}

/// Sorted set of grid-cell indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.indices.binary_search(&cell).is_ok()
    }
}

/// Non-negative per-cell power over the grid.
#[derive(Debug, Clone)]
pub struct PowerSpectrum {
    pub power: Array1<f64>,
    pub grid: GridSpec,
    pub n_snapshots: usize,
}

impl PowerSpectrum {
    pub fn total_power(&self) -> f64 {
        self.power.sum()
    }

    /// Peak-normalized dB value per cell; empty cells map to `None`.
    pub fn db_rel_peak(&self) -> Vec<Option<f64>> {
        let peak = self.power.iter().cloned().fold(0.0, f64::max);
        self.power
            .iter()
            .map(|&p| {
                if p > 0.0 && peak > 0.0 {
                    Some(10.0 * (p / peak).log10())
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Solve every snapshot independently. Failures carry the column index.
pub fn per_column_spectra(
    d: &Dictionary,
    xs: &SnapshotSet,
    cfg: &BpdnConfig,
) -> Result<Vec<SparseSpectrum>, JointError> {
    if xs.n_snapshots() == 0 {
        return Err(JointError::EmptyTrainingSet);
    }
    let solver = BpdnSolver::new(d, cfg.clone())?;
    let results: Vec<Result<SparseSpectrum, SolverError>> = (0..xs.n_snapshots())
        .into_par_iter()
        .map(|k| solver.solve(xs.data.column(k)))
        .collect();
    let mut spectra = Vec::with_capacity(results.len());
    for (k, r) in results.into_iter().enumerate() {
        spectra.push(r.map_err(|source| JointError::Column { column: k, source })?);
    }
    Ok(spectra)
}

/// Per-snapshot recovery followed by per-cell power averaging:
/// `(1/L) Σ_k |α̂_i^(k)|²`.
pub fn simple_average(
    d: &Dictionary,
    xs: &SnapshotSet,
    cfg: &BpdnConfig,
) -> Result<PowerSpectrum, JointError> {
    let spectra = per_column_spectra(d, xs, cfg)?;
    let l = spectra.len();
    let mut power = Array1::<f64>::zeros(d.n_cells());
    for sp in &spectra {
        power += &sp.power();
    }
    power /= l as f64;
    Ok(PowerSpectrum {
        power,
        grid: d.grid.clone(),
        n_snapshots: l,
    })
}

/// Positions of the `s` largest-magnitude coefficients; ties break toward
/// the lower index.
pub fn extract_support(alpha: &SparseSpectrum, s: usize) -> SupportSet {
    assert!(
        s >= 1 && s <= alpha.len(),
        "support size {s} outside [1, {}]",
        alpha.len()
    );
    let mags = alpha.magnitudes();
    let mut order: Vec<usize> = (0..mags.len()).collect();
    order.sort_by(|&i, &j| {
        mags[j]
            .partial_cmp(&mags[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    SupportSet::new(order[..s].to_vec())
}

/// Combine per-snapshot supports by occurrence count. The `s` cells with the
/// most votes win; ties at the cutoff break toward larger summed magnitude
/// `Σ_k |α̂_i^(k)|`, then toward the lower index. When fewer than `s` cells
/// receive any vote, the remainder fill in by magnitude rank.
pub fn vote_supports(
    supports: &[SupportSet],
    s: usize,
    magnitudes: &[Array1<f64>],
) -> SupportSet {
    assert!(!supports.is_empty(), "need at least one support");
    assert_eq!(
        supports.len(),
        magnitudes.len(),
        "one magnitude vector per support"
    );
    let n_cells = magnitudes[0].len();
    let mut votes = vec![0usize; n_cells];
    for sup in supports {
        for &i in sup.indices() {
            votes[i] += 1;
        }
    }
    let mut summed = vec![0.0f64; n_cells];
    for mags in magnitudes {
        for (i, &m) in mags.iter().enumerate() {
            summed[i] += m;
        }
    }
    let mut order: Vec<usize> = (0..n_cells).collect();
    order.sort_by(|&i, &j| {
        votes[j]
            .cmp(&votes[i])
            .then(summed[j].partial_cmp(&summed[i]).unwrap())
            .then(i.cmp(&j))
    });
    SupportSet::new(order[..s.min(n_cells)].to_vec())
}

/// Result of the least-squares amplitude refit on a fixed support.
#[derive(Debug, Clone)]
pub struct LsRefit {
    /// s x L coefficient matrix over the support rows.
    pub coeffs: Array2<Complex64>,
    pub support: SupportSet,
    /// Condition number of the support Gram matrix.
    pub gram_condition: f64,
    /// Ridge term added when the Gram is near-singular (0 when none).
    pub ridge: f64,
    /// True when the support is larger than the snapshot dimension, so the
    /// normal equations are rank-deficient by construction.
    pub support_exceeds_dim: bool,
}

/// Least-squares refit `S_Γ = (Ψ_Γ^H Ψ_Γ + λI)⁻¹ Ψ_Γ^H X`; λ is zero unless
/// the Gram condition number exceeds 1e10, in which case a small
/// trace-relative ridge stabilizes the solve (adjacent super-resolved grid
/// columns are highly coherent).
pub fn ls_refit(d: &Dictionary, xs: &SnapshotSet, gamma: &SupportSet) -> LsRefit {
    let s = gamma.len();
    let l = xs.n_snapshots();
    if s == 0 {
        return LsRefit {
            coeffs: Array2::zeros((0, l)),
            support: gamma.clone(),
            gram_condition: 1.0,
            ridge: 0.0,
            support_exceeds_dim: false,
        };
    }
    let nm = d.nm();
    let support_exceeds_dim = s > nm;

    let mut gram = Array2::<Complex64>::zeros((s, s));
    for (a, &ia) in gamma.indices().iter().enumerate() {
        for (b, &ib) in gamma.indices().iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, y) in d.column(ia).iter().zip(d.column(ib).iter()) {
                acc += x.conj() * y;
            }
            gram[(a, b)] = acc;
        }
    }
    let (eigs, _) = eigh(&gram);
    let lambda_max = eigs[s - 1].max(0.0);
    let lambda_min = eigs[0];
    let gram_condition = if lambda_min <= 0.0 {
        f64::INFINITY
    } else {
        lambda_max / lambda_min
    };

    let trace: f64 = (0..s).map(|i| gram[(i, i)].re).sum();
    let mut ridge = 0.0;
    if gram_condition > 1e10 {
        ridge = 1e-8 * trace / s as f64;
    }

    // Ψ_Γ^H X
    let mut rhs = Array2::<Complex64>::zeros((s, l));
    for (a, &ia) in gamma.indices().iter().enumerate() {
        let col = d.column(ia);
        for k in 0..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, y) in col.iter().zip(xs.data.column(k).iter()) {
                acc += x.conj() * y;
            }
            rhs[(a, k)] = acc;
        }
    }

    let mut coeffs = None;
    for _attempt in 0..24 {
        let mut g = gram.clone();
        for i in 0..s {
            g[(i, i)] += Complex64::new(ridge, 0.0);
        }
        match CholeskyFactor::new(&g) {
            Ok(chol) => {
                coeffs = Some(chol.solve_mat(&rhs));
                break;
            }
            Err(_) => {
                // escalate until the factorization goes through
                ridge = if ridge == 0.0 {
                    1e-12 * trace / s as f64
                } else {
                    ridge * 100.0
                };
            }
        }
    }
    let coeffs = coeffs.expect("support Gram must factor once ridged (non-finite data?)");

    LsRefit {
        coeffs,
        support: gamma.clone(),
        gram_condition,
        ridge,
        support_exceeds_dim,
    }
}

/// Steps 2-7 of the joint procedure given the per-snapshot solves: extract
/// supports, vote, refit, and average per-cell power over the support.
pub fn joint_from_spectra(
    d: &Dictionary,
    xs: &SnapshotSet,
    spectra: &[SparseSpectrum],
    s: usize,
) -> Result<PowerSpectrum, JointError> {
    let l = spectra.len();
    if l == 0 {
        return Err(JointError::EmptyTrainingSet);
    }
    let cells = d.n_cells();
    if s < 1 || s > cells {
        return Err(JointError::InvalidSupportSize { s, cells });
    }
    let mut power = Array1::<f64>::zeros(cells);
    let all_zero = spectra.iter().all(|sp| sp.l1_norm() == 0.0);
    if !all_zero {
        let supports: Vec<SupportSet> =
            spectra.iter().map(|sp| extract_support(sp, s)).collect();
        let magnitudes: Vec<Array1<f64>> = spectra.iter().map(|sp| sp.magnitudes()).collect();
        let joint = vote_supports(&supports, s, &magnitudes);
        let refit = ls_refit(d, xs, &joint);
        for (row, &cell) in joint.indices().iter().enumerate() {
            let mean_power: f64 = (0..l)
                .map(|k| refit.coeffs[(row, k)].norm_sqr())
                .sum::<f64>()
                / l as f64;
            power[cell] = mean_power;
        }
    }
    Ok(PowerSpectrum {
        power,
        grid: d.grid.clone(),
        n_snapshots: l,
    })
}

/// The full joint recovery pipeline: per-snapshot BPDN, support vote,
/// least-squares refit, per-cell power averaging on the joint support.
pub fn joint_recover(
    d: &Dictionary,
    xs: &SnapshotSet,
    s: usize,
    cfg: &BpdnConfig,
) -> Result<PowerSpectrum, JointError> {
    let spectra = per_column_spectra(d, xs, cfg)?;
    joint_from_spectra(d, xs, &spectra, s)
}
