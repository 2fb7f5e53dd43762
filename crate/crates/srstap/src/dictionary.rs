//! Discretization of the angle-Doppler plane and the overcomplete steering
//! basis built on it, plus the prior-knowledge sparsity estimate.
//!
//! The grid is uniform in sin(angle) (steering phase is linear in sin, so
//! coherence is uniform across nodes) and uniform in normalized Doppler.

use crate::l1solver::SolverCache;
use crate::model::{steering_vector, RadarParams};
use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("resolution scales must be at least 1 (got rho_s={rho_s}, rho_d={rho_d})")]
    InvalidScales { rho_s: usize, rho_d: usize },
    #[error("invalid azimuth extent: min {min} exceeds max {max}")]
    InvalidExtent { min: f64, max: f64 },
}

/// Angle-Doppler grid: `N_s = ρ_s N` angle nodes uniform in sin over
/// `[-1, 1)` and `N_d = ρ_d M` Doppler nodes uniform in `f/PRF` over
/// `[-0.5, 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rho_s: usize,
    pub rho_d: usize,
    pub angle_nodes_deg: Vec<f64>,
    pub doppler_nodes_hz: Vec<f64>,
    pub prf: f64,
}

impl GridSpec {
    pub fn n_angle(&self) -> usize {
        self.angle_nodes_deg.len()
    }

    pub fn n_doppler(&self) -> usize {
        self.doppler_nodes_hz.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_angle() * self.n_doppler()
    }

    /// Flat cell index for angle node `a` and Doppler node `d`
    /// (angle-fastest ordering).
    pub fn column_index(&self, a: usize, d: usize) -> usize {
        debug_assert!(a < self.n_angle() && d < self.n_doppler());
        d * self.n_angle() + a
    }

    /// Inverse of [`Self::column_index`].
    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.n_angle(), cell / self.n_angle())
    }
}

/// Build the grid for a radar geometry. Angle spacing in sin is `2/N_s`,
/// Doppler spacing `PRF/N_d`.
pub fn build_grid(p: &RadarParams, rho_s: usize, rho_d: usize) -> Result<GridSpec, DictionaryError> {
    if rho_s < 1 || rho_d < 1 {
        return Err(DictionaryError::InvalidScales { rho_s, rho_d });
    }
    let n_s = rho_s * p.n_sensors;
    let n_d = rho_d * p.n_pulses;
    let angle_nodes_deg = (0..n_s)
        .map(|a| (-1.0 + 2.0 * a as f64 / n_s as f64).asin().to_degrees())
        .collect();
    let prf = p.prf();
    let doppler_nodes_hz = (0..n_d)
        .map(|d| (-0.5 + d as f64 / n_d as f64) * prf)
        .collect();
    Ok(GridSpec {
        rho_s,
        rho_d,
        angle_nodes_deg,
        doppler_nodes_hz,
        prf,
    })
}

/// The overcomplete basis: one steering vector per grid cell, columns
/// ordered angle-fastest (all angles at the first Doppler node, then the
/// second, ...).
#[derive(Debug)]
pub struct Dictionary {
    /// NM x (N_s N_d) steering matrix.
    pub psi: Array2<Complex64>,
    pub grid: GridSpec,
    nm: usize,
    cache: OnceLock<Arc<SolverCache>>,
}

impl Clone for Dictionary {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(c) = self.cache.get() {
            let _ = cache.set(Arc::clone(c));
        }
        Self {
            psi: self.psi.clone(),
            grid: self.grid.clone(),
            nm: self.nm,
            cache,
        }
    }
}

impl Dictionary {
    pub fn nm(&self) -> usize {
        self.nm
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn column(&self, cell: usize) -> ArrayView1<'_, Complex64> {
        self.psi.column(cell)
    }

    /// (angle degrees, Doppler Hz) of a grid cell.
    pub fn cell_params(&self, cell: usize) -> (f64, f64) {
        let (a, d) = self.grid.cell_coords(cell);
        (self.grid.angle_nodes_deg[a], self.grid.doppler_nodes_hz[d])
    }

    /// Solver-side precomputation (split storage and the small Gram factor),
    /// built once per dictionary and shared across threads.
    pub(crate) fn solver_cache(&self) -> Arc<SolverCache> {
        Arc::clone(self.cache.get_or_init(|| Arc::new(SolverCache::build(self))))
    }
}

/// Materialize the steering basis on a grid.
pub fn build_dictionary(p: &RadarParams, g: &GridSpec) -> Dictionary {
    let nm = p.dim();
    let mut psi = Array2::<Complex64>::zeros((nm, g.n_cells()));
    for d in 0..g.n_doppler() {
        for a in 0..g.n_angle() {
            let col = g.column_index(a, d);
            let sv = steering_vector(p, g.angle_nodes_deg[a], g.doppler_nodes_hz[d]);
            psi.column_mut(col).assign(&sv.values);
        }
    }
    Dictionary {
        psi,
        grid: g.clone(),
        nm,
        cache: OnceLock::new(),
    }
}

/// Estimate the clutter sparsity from prior knowledge of the mainlobe
/// extent: the angle-cell count, the Doppler-cell count spanned by the ridge
/// (crab-aware), and their Euclidean combination, each rounded up.
pub fn estimate_sparsity(
    p: &RadarParams,
    mainlobe_deg: (f64, f64),
    g: &GridSpec,
) -> Result<usize, DictionaryError> {
    let (theta_min, theta_max) = mainlobe_deg;
    if theta_min > theta_max {
        return Err(DictionaryError::InvalidExtent {
            min: theta_min,
            max: theta_max,
        });
    }
    let (dn, dm) = sparsity_cells(p, mainlobe_deg, g);
    let s = ((dn * dn + dm * dm) as f64).sqrt().ceil() as usize;
    Ok(s.max(1))
}

/// The (ΔN, ΔM) cell counts behind [`estimate_sparsity`], exposed for the
/// range check `max(ΔM, ΔN) ≤ ŝ ≤ ΔM + ΔN`.
pub fn sparsity_cells(p: &RadarParams, mainlobe_deg: (f64, f64), g: &GridSpec) -> (usize, usize) {
    let (theta_min, theta_max) = mainlobe_deg;
    let width = theta_max - theta_min;
    let dn = (width / 180.0 * (g.rho_s * p.n_sensors) as f64).ceil() as usize;
    let crab = p.crab_angle_deg;
    let sin_span =
        ((theta_max + crab).to_radians().sin() - (theta_min + crab).to_radians().sin()).abs();
    let dm = (2.0 * p.velocity * sin_span / (p.wavelength * p.prf())
        * (g.rho_d * p.n_pulses) as f64)
        .ceil() as usize;
    (dn, dm)
}
