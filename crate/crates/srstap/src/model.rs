//! Radar geometry: platform/array/waveform constants, space-time steering
//! vectors, and the clutter-ridge angle-Doppler mapping.
//!
//! Angles are degrees at the API surface and converted to radians in exactly
//! one place (here). Doppler is carried in Hz internally; normalized Doppler
//! (`f_d / PRF`) appears only in file and CLI output.

use ndarray::Array1;
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid radar parameters: {0}")]
    InvalidParams(String),
}

/// Platform, array, and waveform constants that fix the geometry and the
/// clutter ridge.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarParams {
    /// Number of array channels N.
    pub n_sensors: usize,
    /// Number of pulses M per coherent processing interval.
    pub n_pulses: usize,
    /// Platform velocity in m/s.
    pub velocity: f64,
    /// Pulse repetition interval in seconds (PRF = 1/PRI).
    pub pri: f64,
    /// Radar wavelength in meters.
    pub wavelength: f64,
    /// Inter-sensor spacing in meters.
    pub spacing: f64,
    /// Crab angle in degrees: misalignment between platform velocity and the
    /// array axis, which skews the clutter ridge.
    pub crab_angle_deg: f64,
    /// Noise power per space-time sample (linear).
    pub noise_power: f64,
}

impl Default for RadarParams {
    /// The simulated-experiment constants: 8 sensors, 8 pulses, 300 m/s,
    /// PRI 0.25 ms, wavelength 0.3 m, half-wavelength spacing, unit noise.
    fn default() -> Self {
        Self {
            n_sensors: 8,
            n_pulses: 8,
            velocity: 300.0,
            pri: 0.25e-3,
            wavelength: 0.3,
            spacing: 0.15,
            crab_angle_deg: 0.0,
            noise_power: 1.0,
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_sensors < 1 || self.n_pulses < 1 {
            return Err(ModelError::InvalidParams(
                "need at least one sensor and one pulse".into(),
            ));
        }
        if !self.pri.is_finite() || self.pri <= 0.0 {
            return Err(ModelError::InvalidParams("PRI must be positive".into()));
        }
        if !self.wavelength.is_finite() || self.wavelength <= 0.0 {
            return Err(ModelError::InvalidParams(
                "wavelength must be positive".into(),
            ));
        }
        if !self.spacing.is_finite() || self.spacing <= 0.0 {
            return Err(ModelError::InvalidParams("spacing must be positive".into()));
        }
        if !self.noise_power.is_finite() || self.noise_power <= 0.0 {
            return Err(ModelError::InvalidParams(
                "noise power must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Pulse repetition frequency in Hz.
    pub fn prf(&self) -> f64 {
        1.0 / self.pri
    }

    /// Space-time dimension NM.
    pub fn dim(&self) -> usize {
        self.n_sensors * self.n_pulses
    }
}

/// Space-time steering vector: temporal phase ramp Kronecker spatial phase
/// ramp, length NM, unit-modulus entries, first entry 1.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    pub values: Array1<Complex64>,
    pub angle_deg: f64,
    pub doppler_hz: f64,
}

/// Build the steering vector for a spatial angle (degrees) and Doppler (Hz).
///
/// Entry `m*N + n` carries phase `2π (m f_d/PRF + n (d/λ) sin θ)` for pulse
/// index `m` and sensor index `n`.
pub fn steering_vector(p: &RadarParams, angle_deg: f64, doppler_hz: f64) -> SteeringVector {
    let n = p.n_sensors;
    let m = p.n_pulses;
    let spatial_step = TAU * (p.spacing / p.wavelength) * angle_deg.to_radians().sin();
    let temporal_step = TAU * doppler_hz / p.prf();
    let mut values = Array1::<Complex64>::zeros(n * m);
    for mi in 0..m {
        let tphase = temporal_step * mi as f64;
        for ni in 0..n {
            let phase = tphase + spatial_step * ni as f64;
            values[mi * n + ni] = Complex64::new(phase.cos(), phase.sin());
        }
    }
    SteeringVector {
        values,
        angle_deg,
        doppler_hz,
    }
}

/// Doppler frequency of stationary clutter seen at a spatial angle:
/// `f_d = (2v/λ) sin(θ + φ_a)` with crab angle `φ_a`.
pub fn clutter_doppler(p: &RadarParams, angle_deg: f64) -> f64 {
    2.0 * p.velocity / p.wavelength * (angle_deg + p.crab_angle_deg).to_radians().sin()
}
