//! Metastable-neon lithography scenario: an open five-state scheme where
//! the passage removes the 16.6 eV internal energy everywhere except at
//! the SW nodes, leaving nanometer-scale energy features.
//!
//! Modeled states: the initial metastable 3s(3P0), the excited 3p(3P1),
//! the fast-decaying 3s(3P1) and the metastable trap state 3s(3P2); the
//! true ground state is outside the modeled space (EXTERNAL). The excited
//! state branches radiatively into the three 3s states; 3s(3P1) drains to
//! the ground state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master_eq::{Coupling, Decay, DecayTarget, FieldId, LevelScheme};
use crate::profiles::{cpt_profile, slap_profile, GridSpec, LocalizationProfile};
use crate::pulse::PulsePair;

/// Index of 3s(3P0), the initial metastable state.
pub const P0: usize = 0;
/// Index of the excited 3p(3P1) state.
pub const EXCITED: usize = 1;
/// Index of 3s(3P1), fast-decaying to the true ground state.
pub const P1: usize = 2;
/// Index of 3s(3P2), the metastable trap state.
pub const P2: usize = 3;

/// TW wavelength: 3s(3P1) <-> 3p(3P1).
pub const LAMBDA_TW: f64 = 603.0e-9;
/// SW wavelength: 3s(3P0) <-> 3p(3P1).
pub const LAMBDA_SW: f64 = 616.4e-9;

/// 3s(3P1) -> ground decay rate, 2 pi x 7.58e6 1/s.
pub const GAMMA_P1_GROUND: f64 = 2.0 * std::f64::consts::PI * 7.58e6;

/// Internal energy of the initial metastable state, eV.
pub const ENERGY_P0_EV: f64 = 16.6;

/// Einstein A coefficients of the excited 3p(3P1) state into the three
/// 3s states, 1/s.
///
/// These are figure-only data in the source material; the shipped
/// defaults below are taken from the NIST Atomic Spectra Database for the
/// corresponding Ne I lines and should be re-checked against it. The
/// 3s(3P2) lifetime (14.73 s) is so long that its decay is zero on pulse
/// timescales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingRates {
    /// A(3p 3P1 -> 3s 3P0), the 616.4 nm line.
    pub to_p0: f64,
    /// A(3p 3P1 -> 3s 3P1), the 603.0 nm line.
    pub to_p1: f64,
    /// A(3p 3P1 -> 3s 3P2), the 588.2 nm line.
    pub to_p2: f64,
}

impl BranchingRates {
    /// NIST ASD values for the Ne I 616.4 / 603.0 / 588.2 nm lines
    /// (externally sourced; see module docs).
    pub fn nist_defaults() -> Self {
        Self { to_p0: 15.1e6, to_p1: 5.61e6, to_p2: 11.5e6 }
    }

    pub fn total(&self) -> f64 {
        self.to_p0 + self.to_p1 + self.to_p2
    }
}

/// Full configuration of the lithography scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeStarParams {
    pub branching: BranchingRates,
    /// 3s(3P1) -> ground rate, 1/s.
    pub gamma_p1_ground: f64,
    /// Internal energies, eV. The trap state defaults to the initial
    /// state's value (both are 3s metastables within 1%).
    pub energy_p0_ev: f64,
    pub energy_p1_ev: f64,
    pub energy_p2_ev: f64,
    pub energy_excited_ev: f64,
    /// Remove the trap-state population after the passage (ideal
    /// depumping to the ground state with an extra field).
    pub depump: bool,
}

impl NeStarParams {
    pub fn new(branching: BranchingRates, depump: bool) -> Result<Self> {
        if branching.to_p0 <= 0.0 || branching.to_p1 <= 0.0 || branching.to_p2 < 0.0 {
            return Err(Error::IncompleteConfig(
                "Ne* scenario needs the three branching A coefficients (figure-only \
                 data; source them from the NIST ASD)"
                    .into(),
            ));
        }
        Ok(Self {
            branching,
            gamma_p1_ground: GAMMA_P1_GROUND,
            energy_p0_ev: ENERGY_P0_EV,
            // the 3s states sit ~2 eV below the excited state
            energy_p1_ev: ENERGY_P0_EV,
            energy_p2_ev: ENERGY_P0_EV,
            energy_excited_ev: ENERGY_P0_EV + 2.01,
            depump,
        })
    }

    /// The modeled level scheme.
    pub fn scheme(&self) -> Result<LevelScheme> {
        LevelScheme::new(
            vec!["3s3P0".into(), "3p3P1".into(), "3s3P1".into(), "3s3P2".into()],
            vec![
                Coupling { lower: P0, upper: EXCITED, field: FieldId::Sw },
                Coupling { lower: P1, upper: EXCITED, field: FieldId::Tw },
            ],
            vec![
                Decay { upper: EXCITED, target: DecayTarget::Internal(P0), rate: self.branching.to_p0 },
                Decay { upper: EXCITED, target: DecayTarget::Internal(P1), rate: self.branching.to_p1 },
                Decay { upper: EXCITED, target: DecayTarget::Internal(P2), rate: self.branching.to_p2 },
                Decay { upper: P1, target: DecayTarget::External, rate: self.gamma_p1_ground },
                // 3s(3P2): tau = 14.73 s, zero on microsecond pulses
            ],
            Some(vec![
                self.energy_p0_ev,
                self.energy_excited_ev,
                self.energy_p1_ev,
                self.energy_p2_ev,
            ]),
        )
    }

    pub fn state_energy_ev(&self, state: usize) -> f64 {
        match state {
            P0 => self.energy_p0_ev,
            EXCITED => self.energy_excited_ev,
            P1 => self.energy_p1_ev,
            P2 => self.energy_p2_ev,
            _ => 0.0,
        }
    }

    /// Beam-crossing pulse pair with the reference parameters:
    /// v_z = 500 m/s, d = 100 um (T = 200 ns), sigma = 100 ns,
    /// intensity ratio 400 at omega_tw0 = 2 pi x 1.6e7 1/s, resonant
    /// fields, SW period 308.2 nm.
    pub fn reference_pulse() -> PulsePair {
        let omega_tw0 = 2.0 * std::f64::consts::PI * 1.6e7;
        PulsePair {
            omega_tw0,
            omega_sw0: 20.0 * omega_tw0, // R = 400
            sigma_tw: 100e-9,
            sigma_sw: 100e-9,
            t_tw: 0.0,
            t_sw: 200e-9,
            delta_tw: 0.0,
            delta_sw: 0.0,
            k_sw: 2.0 * std::f64::consts::PI / LAMBDA_SW,
        }
    }
}

/// Deposited internal energy per atom vs position.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyProfile {
    pub x: Vec<f64>,
    pub energy_ev: Vec<f64>,
    /// SW intensity period, for the contrast's mid-period reference.
    pub period: f64,
}

impl EnergyProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x_m,energy_ev")?;
        for (x, e) in self.x.iter().zip(self.energy_ev.iter()) {
            writeln!(w, "{x},{e}")?;
        }
        Ok(())
    }
}

/// Energy profile of a population profile: `E(x) = sum_s pop_s(x) E_s`
/// (escaped population carries no internal energy).
pub fn energy_profile(profile: &LocalizationProfile, params: &NeStarParams) -> EnergyProfile {
    let n = profile.n_points();
    let mut energy = vec![0.0; n];
    for s in 0..profile.n_states() {
        let e_s = params.state_energy_ev(s);
        for i in 0..n {
            energy[i] += profile.populations[s][i] * e_s;
        }
    }
    EnergyProfile { x: profile.x.clone(), energy_ev: energy, period: profile.period() }
}

/// Ideal depumping: the whole trap-state population is transferred to the
/// ground state (outside the modeled space) as a post-processing step.
pub fn apply_depump(profile: &LocalizationProfile) -> LocalizationProfile {
    let mut out = profile.clone();
    for i in 0..out.n_points() {
        let moved = out.populations[P2][i];
        out.populations[P2][i] = 0.0;
        out.escaped[P2][i] += moved;
    }
    out
}

/// Run the lithography scan: population profile plus the energy profile
/// (depumped if configured).
pub fn nestar_profile(
    params: &NeStarParams,
    p: &PulsePair,
    grid: &GridSpec,
    tol: f64,
) -> Result<(LocalizationProfile, EnergyProfile)> {
    let scheme = params.scheme()?;
    let profile = if p.delay() > 0.0 {
        slap_profile(&scheme, p, grid, tol)?
    } else {
        cpt_profile(&scheme, p, grid, tol)?
    };
    let energy = if params.depump {
        energy_profile(&apply_depump(&profile), params)
    } else {
        energy_profile(&profile, params)
    };
    Ok((profile, energy))
}

/// Peak-to-background contrast of an energy profile:
/// `(E_peak - E_background) / E_peak`, with the peak at the central node
/// and the background the median over the mid-period region (positions
/// at least a quarter period from the node).
pub fn contrast(e: &EnergyProfile) -> Result<f64> {
    let node_idx = e
        .x
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.abs().total_cmp(&b.abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Domain("empty profile".into()))?;
    let e_peak = e.energy_ev[node_idx];
    if e_peak <= 0.0 {
        return Err(Error::Domain(format!("peak energy {e_peak} must be > 0")));
    }
    let mut mid: Vec<f64> = e
        .x
        .iter()
        .zip(e.energy_ev.iter())
        .filter(|(&x, _)| x.abs() >= 0.25 * e.period && x.abs() <= 0.5 * e.period)
        .map(|(_, &v)| v)
        .collect();
    if mid.is_empty() {
        return Err(Error::Domain(
            "profile does not cover the mid-period region (span at least one period)".into(),
        ));
    }
    mid.sort_by(f64::total_cmp);
    let e_bg = if mid.len() % 2 == 1 {
        mid[mid.len() / 2]
    } else {
        0.5 * (mid[mid.len() / 2 - 1] + mid[mid.len() / 2])
    };
    Ok((e_peak - e_bg) / e_peak)
}
