//! The driving fields: a traveling wave (TW) and a standing wave (SW) with
//! Gaussian temporal envelopes, plus the beam geometry that fixes their
//! temporal separation for an atomic beam crossing them in flight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian-envelope TW/SW pulse pair.
///
/// Envelopes are `exp(-(t - t0)^2 / sigma^2)`; the SW additionally carries
/// the spatial factor `sin(k x)`. All frequencies are angular (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    /// Peak TW Rabi frequency, rad/s.
    pub omega_tw0: f64,
    /// Peak SW Rabi frequency (at an anti-node), rad/s.
    pub omega_sw0: f64,
    /// TW envelope width, s.
    pub sigma_tw: f64,
    /// SW envelope width, s.
    pub sigma_sw: f64,
    /// TW envelope center, s.
    pub t_tw: f64,
    /// SW envelope center, s.
    pub t_sw: f64,
    /// TW single-photon detuning, rad/s.
    pub delta_tw: f64,
    /// SW single-photon detuning, rad/s.
    pub delta_sw: f64,
    /// SW wave number, rad/m.
    pub k_sw: f64,
}

impl PulsePair {
    /// Validate the type invariants: non-negative amplitudes, positive
    /// widths and wave number.
    pub fn validate(&self) -> Result<()> {
        if self.omega_tw0 < 0.0 || self.omega_sw0 < 0.0 {
            return Err(Error::Domain("Rabi amplitudes must be >= 0".into()));
        }
        if self.sigma_tw <= 0.0 || self.sigma_sw <= 0.0 {
            return Err(Error::Domain("envelope widths must be > 0".into()));
        }
        if self.k_sw <= 0.0 {
            return Err(Error::Domain("SW wave number must be > 0".into()));
        }
        Ok(())
    }

    /// Pulse delay `T = t_sw - t_tw`. Positive for the counterintuitive
    /// adiabatic-passage ordering, zero for the dark-state pumping mode.
    pub fn delay(&self) -> f64 {
        self.t_sw - self.t_tw
    }

    /// Intensity ratio `R = (omega_sw0 / omega_tw0)^2`.
    pub fn intensity_ratio(&self) -> f64 {
        let r = self.omega_sw0 / self.omega_tw0;
        r * r
    }

    /// TW Rabi frequency at time `t`.
    pub fn rabi_tw(&self, t: f64) -> f64 {
        let u = (t - self.t_tw) / self.sigma_tw;
        self.omega_tw0 * (-u * u).exp()
    }

    /// Signed SW Rabi frequency at position `x` and time `t`. Vanishes
    /// exactly at the nodes `x = n pi / k`.
    pub fn rabi_sw(&self, x: f64, t: f64) -> f64 {
        let u = (t - self.t_sw) / self.sigma_sw;
        self.omega_sw0 * (self.k_sw * x).sin() * (-u * u).exp()
    }

    /// Spatial period of the SW intensity pattern, `pi / k` (half the
    /// optical wavelength).
    pub fn sw_period(&self) -> f64 {
        std::f64::consts::PI / self.k_sw
    }

    /// Default integration window `[t_tw - 4 sigma_tw, t_sw + 4 sigma_sw]`;
    /// outside it the Gaussian envelopes are below 1e-7 of peak.
    pub fn default_window(&self) -> (f64, f64) {
        (self.t_tw - 4.0 * self.sigma_tw, self.t_sw + 4.0 * self.sigma_sw)
    }

    /// Copy with both Rabi amplitudes rescaled so that `omega_tw0 = value`
    /// at fixed intensity ratio.
    pub fn with_tw_amplitude(&self, value: f64) -> Self {
        let ratio = self.omega_sw0 / self.omega_tw0;
        Self { omega_tw0: value, omega_sw0: ratio * value, ..self.clone() }
    }

    /// Copy collapsed to the dark-state pumping mode: both pulses centered
    /// at `t_tw` with the TW width.
    pub fn cpt_counterpart(&self) -> Self {
        Self { t_sw: self.t_tw, sigma_sw: self.sigma_tw, ..self.clone() }
    }
}

/// Atomic-beam geometry connecting the spatial and temporal pictures
/// through `t = z / v_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// Longitudinal velocity, m/s.
    pub v_z: f64,
    /// Separation between the two beam centers, m.
    pub d: f64,
    /// Rms transverse velocity spread, m/s.
    pub dv_x: f64,
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.v_z <= 0.0 {
            return Err(Error::Domain("longitudinal velocity must be > 0".into()));
        }
        if self.d < 0.0 || self.dv_x < 0.0 {
            return Err(Error::Domain("beam separation and velocity spread must be >= 0".into()));
        }
        Ok(())
    }
}
