//! Lindblad master-equation integrator for driven N-level schemes at a
//! fixed transverse position.
//!
//! The Hamiltonian is the rotating-wave, rotating-frame form: coherent
//! couplings enter as `(1/2) omega` on the off-diagonal, and per-state
//! frame shifts derived from the field detunings sit on the diagonal
//! (for the three-level scheme: `delta_sw` on the excited state and
//! `delta_sw - delta_tw` on the TW-coupled ground state). Spontaneous
//! decay channels are standard Lindblad dissipators; channels that leave
//! the modeled space keep only the anti-commutator part, and the flux they
//! carry is accumulated per state of origin as an "escaped" fraction.
//!
//! Everything works in angular-frequency units: rates in 1/s against
//! times in s, with hbar folded in.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, AdaptiveOptions, OdeSystem};
use crate::pulse::PulsePair;
use crate::C64;

/// Which driving field a coherent coupling belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldId {
    Tw,
    Sw,
}

/// Coherent coupling between a lower and an upper state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub lower: usize,
    pub upper: usize,
    pub field: FieldId,
}

/// Destination of a radiative decay channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayTarget {
    /// Another state of the modeled space (population is refilled there).
    Internal(usize),
    /// Outside the modeled space; population leaves the density matrix and
    /// is tracked as an escaped fraction.
    External,
}

/// One spontaneous decay channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub upper: usize,
    pub target: DecayTarget,
    pub rate: f64,
}

/// Discrete internal states with their couplings and decay channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    labels: Vec<String>,
    couplings: Vec<Coupling>,
    decays: Vec<Decay>,
    /// Internal energy carried by each state (eV); purely diagnostic.
    energies_ev: Vec<f64>,
}

impl LevelScheme {
    pub fn new(
        labels: Vec<String>,
        couplings: Vec<Coupling>,
        decays: Vec<Decay>,
        energies_ev: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidScheme("scheme needs at least one state".into()));
        }
        for c in &couplings {
            if c.lower >= n || c.upper >= n {
                return Err(Error::InvalidScheme(format!(
                    "coupling ({}, {}) out of range for {n} states",
                    c.lower, c.upper
                )));
            }
            if c.lower == c.upper {
                return Err(Error::InvalidScheme("coupling must join distinct states".into()));
            }
        }
        for d in &decays {
            if d.rate < 0.0 {
                return Err(Error::InvalidScheme("decay rates must be >= 0".into()));
            }
            if d.upper >= n {
                return Err(Error::InvalidScheme("decay source out of range".into()));
            }
            if let DecayTarget::Internal(l) = d.target {
                if l >= n {
                    return Err(Error::InvalidScheme("decay target out of range".into()));
                }
                if l == d.upper {
                    return Err(Error::InvalidScheme("decay cannot refill its own source".into()));
                }
            }
        }
        let energies_ev = energies_ev.unwrap_or_else(|| vec![0.0; n]);
        if energies_ev.len() != n {
            return Err(Error::InvalidScheme("one energy per state required".into()));
        }
        Ok(Self { labels, couplings, decays, energies_ev })
    }

    /// Canonical closed three-level scheme: states `a`, `b`, `c` with the
    /// SW driving a-c, the TW driving b-c, and radiative decay from `c`
    /// into both ground states.
    pub fn lambda(gamma_a: f64, gamma_b: f64) -> Self {
        Self::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                Coupling { lower: LAMBDA_A, upper: LAMBDA_C, field: FieldId::Sw },
                Coupling { lower: LAMBDA_B, upper: LAMBDA_C, field: FieldId::Tw },
            ],
            vec![
                Decay { upper: LAMBDA_C, target: DecayTarget::Internal(LAMBDA_A), rate: gamma_a },
                Decay { upper: LAMBDA_C, target: DecayTarget::Internal(LAMBDA_B), rate: gamma_b },
            ],
            None,
        )
        .expect("static scheme is valid")
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn decays(&self) -> &[Decay] {
        &self.decays
    }

    pub fn energies_ev(&self) -> &[f64] {
        &self.energies_ev
    }

    /// True when no channel leaves the modeled space (trace-preserving).
    pub fn is_closed(&self) -> bool {
        self.decays.iter().all(|d| matches!(d.target, DecayTarget::Internal(_)))
    }

    /// Total decay rate out of `state`.
    pub fn total_decay_rate(&self, state: usize) -> f64 {
        self.decays.iter().filter(|d| d.upper == state).map(|d| d.rate).sum()
    }

    /// Largest total decay rate of any state; the pumping timescale.
    pub fn max_decay_rate(&self) -> f64 {
        (0..self.n_states()).map(|s| self.total_decay_rate(s)).fold(0.0, f64::max)
    }

    /// Rotating-frame diagonal shifts, propagated from state 0 through the
    /// coupling graph: crossing a coupling upward adds that field's
    /// detuning. States not connected to state 0 sit at zero (they carry
    /// no coherence with the driven manifold).
    fn frame_shifts(&self, delta_tw: f64, delta_sw: f64) -> Result<Vec<f64>> {
        let n = self.n_states();
        let mut shift = vec![0.0_f64; n];
        let mut known = vec![false; n];
        known[0] = true;
        let delta = |f: FieldId| match f {
            FieldId::Tw => delta_tw,
            FieldId::Sw => delta_sw,
        };
        // relaxation pass; the graph is tiny
        for _ in 0..n {
            for c in &self.couplings {
                let d = delta(c.field);
                if known[c.lower] && !known[c.upper] {
                    shift[c.upper] = shift[c.lower] + d;
                    known[c.upper] = true;
                } else if known[c.upper] && !known[c.lower] {
                    shift[c.lower] = shift[c.upper] - d;
                    known[c.lower] = true;
                } else if known[c.lower] && known[c.upper] {
                    let want = shift[c.lower] + d;
                    if (shift[c.upper] - want).abs() > 1e-9 * want.abs().max(1.0) {
                        return Err(Error::InvalidScheme(format!(
                            "conflicting frame shifts for state {}: coupling loop is \
                             inconsistent with the detunings",
                            c.upper
                        )));
                    }
                }
            }
        }
        Ok(shift)
    }

    /// The field amplitudes must drive at least one transition each when
    /// nonzero, otherwise the scheme/pulse pairing is inconsistent.
    fn check_drive(&self, p: &PulsePair) -> Result<()> {
        for (field, amp, name) in [
            (FieldId::Tw, p.omega_tw0, "TW"),
            (FieldId::Sw, p.omega_sw0, "SW"),
        ] {
            if amp != 0.0 && !self.couplings.iter().any(|c| c.field == field) {
                return Err(Error::InvalidScheme(format!(
                    "{name} amplitude is nonzero but the scheme has no {name} coupling"
                )));
            }
        }
        Ok(())
    }
}

/// Index of state `a` (SW-coupled ground state) in [`LevelScheme::lambda`].
pub const LAMBDA_A: usize = 0;
/// Index of state `b` (TW-coupled ground state).
pub const LAMBDA_B: usize = 1;
/// Index of the excited state `c`.
pub const LAMBDA_C: usize = 2;

/// Hermiticity tolerance of a valid density matrix (relative to max entry).
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Eigenvalue floor: positivity within numerical error.
pub const EIGENVALUE_FLOOR: f64 = -1e-8;
/// Allowed trace excess over 1.
pub const TRACE_CEILING: f64 = 1e-8;

/// N x N complex density matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// Pure state `|state><state|`.
    pub fn pure(n: usize, state: usize) -> Self {
        assert!(state < n);
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        data[state * n + state] = C64::new(1.0, 0.0);
        Self { n, data }
    }

    pub fn from_elements(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Domain(format!(
                "density matrix needs {} elements, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn population(&self, state: usize) -> f64 {
        self.data[state * self.n + state].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.n).map(|s| self.population(s)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|s| self.data[s * self.n + s].re).sum()
    }

    /// Largest deviation from Hermiticity, `max |rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i..self.n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue (the matrix is symmetrized first).
    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_fn(self.n, self.n, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i).conj())
        });
        let eig = m.symmetric_eigenvalues();
        eig.iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    /// Replace by the Hermitian part `(rho + rho^dagger) / 2`.
    pub fn symmetrize(&mut self) {
        symmetrize_flat(&mut self.data, self.n);
    }

    /// Check the state invariants: Hermiticity, positivity within
    /// tolerance, populations in [0, 1], trace not above 1.
    pub fn validate(&self) -> Result<()> {
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if self.hermiticity_error() > HERMITICITY_TOL * scale {
            return Err(Error::Domain(format!(
                "density matrix not Hermitian: error {:.3e} (scale {scale:.3e})",
                self.hermiticity_error()
            )));
        }
        if self.trace() > 1.0 + TRACE_CEILING {
            return Err(Error::Domain(format!("trace {} exceeds 1", self.trace())));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < EIGENVALUE_FLOOR {
            return Err(Error::Domain(format!("negative eigenvalue {min_eig:.3e}")));
        }
        for s in 0..self.n {
            let p = self.population(s);
            if !(-1e-8..=1.0 + 1e-8).contains(&p) {
                return Err(Error::Domain(format!("population of state {s} is {p}")));
            }
        }
        Ok(())
    }
}

fn symmetrize_flat(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (data[i * n + j] + data[j * n + i].conj());
            data[i * n + j] = m;
            data[j * n + i] = m.conj();
        }
        // diagonal entries must be real
        data[i * n + i] = C64::new(data[i * n + i].re, 0.0);
    }
}

/// Final state of an [`evolve`] run.
#[derive(Debug, Clone)]
pub struct EvolvedState {
    pub rho: DensityMatrix,
    /// Population that left the modeled space, per state of origin.
    pub escaped: Vec<f64>,
}

impl EvolvedState {
    /// Trace plus all escaped fractions; 1 up to integration error.
    pub fn total(&self) -> f64 {
        self.rho.trace() + self.escaped.iter().sum::<f64>()
    }
}

/// Time derivative of the master-equation state.
#[derive(Debug, Clone)]
pub struct RhoDerivative {
    /// d rho / dt, row-major n x n.
    pub drho: Vec<C64>,
    /// d escaped_s / dt, per state of origin.
    pub escape_rates: Vec<f64>,
}

impl RhoDerivative {
    pub fn get(&self, i: usize, j: usize, n: usize) -> C64 {
        self.drho[i * n + j]
    }

    pub fn trace_rate(&self, n: usize) -> f64 {
        (0..n).map(|s| self.drho[s * n + s].re).sum()
    }
}

enum Drive<'a> {
    Pulsed { pulse: &'a PulsePair, x: f64 },
    Fixed { omega_sw: f64, omega_tw: f64 },
}

impl Drive<'_> {
    fn amplitude(&self, field: FieldId, t: f64) -> f64 {
        match self {
            Drive::Pulsed { pulse, x } => match field {
                FieldId::Tw => pulse.rabi_tw(t),
                FieldId::Sw => pulse.rabi_sw(*x, t),
            },
            Drive::Fixed { omega_sw, omega_tw } => match field {
                FieldId::Tw => *omega_tw,
                FieldId::Sw => *omega_sw,
            },
        }
    }
}

/// The vectorized master equation as an ODE system. State layout: the
/// n^2 density-matrix entries (row-major) followed by n escaped fractions.
struct MasterSystem<'a> {
    scheme: &'a LevelScheme,
    drive: Drive<'a>,
    shifts: Vec<f64>,
}

impl MasterSystem<'_> {
    fn n(&self) -> usize {
        self.scheme.n_states()
    }
}

impl OdeSystem for MasterSystem<'_> {
    fn dim(&self) -> usize {
        let n = self.n();
        n * n + n
    }

    fn rhs(&self, t: f64, y: &[C64], dydt: &mut [C64]) {
        let n = self.n();
        let rho = &y[..n * n];
        let (drho, desc) = dydt.split_at_mut(n * n);

        // -i [H, rho], diagonal part
        for i in 0..n {
            for j in 0..n {
                let w = self.shifts[i] - self.shifts[j];
                drho[i * n + j] = C64::new(0.0, -w) * rho[i * n + j];
            }
        }
        // -i [H, rho], coupling part (H_lu = H_ul = omega/2, real)
        for c in self.scheme.couplings() {
            let g = 0.5 * self.drive.amplitude(c.field, t);
            if g == 0.0 {
                continue;
            }
            let (l, u) = (c.lower, c.upper);
            let ig = C64::new(0.0, g);
            for j in 0..n {
                // rows of H rho
                drho[l * n + j] -= ig * rho[u * n + j];
                drho[u * n + j] -= ig * rho[l * n + j];
                // columns of rho H
                drho[j * n + l] += ig * rho[j * n + u];
                drho[j * n + u] += ig * rho[j * n + l];
            }
        }
        // dissipators
        for s in desc.iter_mut() {
            *s = C64::new(0.0, 0.0);
        }
        for d in self.scheme.decays() {
            if d.rate == 0.0 {
                continue;
            }
            let u = d.upper;
            let half = 0.5 * d.rate;
            for j in 0..n {
                drho[u * n + j] -= half * rho[u * n + j];
                drho[j * n + u] -= half * rho[j * n + u];
            }
            // the diagonal (u,u) element correctly loses rate * rho_uu:
            // half from its row and half from its column
            match d.target {
                DecayTarget::Internal(l) => {
                    drho[l * n + l] += d.rate * rho[u * n + u];
                }
                DecayTarget::External => {
                    desc[u] += d.rate * C64::new(rho[u * n + u].re, 0.0);
                }
            }
        }
    }
}

/// Apply the Liouvillian once: `d rho / dt` at `(x, t)` plus the escape
/// rates feeding the per-origin loss tallies.
pub fn liouvillian_apply(
    scheme: &LevelScheme,
    p: &PulsePair,
    x: f64,
    t: f64,
    rho: &DensityMatrix,
) -> Result<RhoDerivative> {
    p.validate()?;
    if rho.n() != scheme.n_states() {
        return Err(Error::Domain("density matrix size does not match the scheme".into()));
    }
    let shifts = scheme.frame_shifts(p.delta_tw, p.delta_sw)?;
    let sys = MasterSystem { scheme, drive: Drive::Pulsed { pulse: p, x }, shifts };
    let n = scheme.n_states();
    let mut y = vec![C64::new(0.0, 0.0); n * n + n];
    y[..n * n].copy_from_slice(rho.as_slice());
    let mut dydt = vec![C64::new(0.0, 0.0); n * n + n];
    sys.rhs(t, &y, &mut dydt);
    Ok(RhoDerivative {
        drho: dydt[..n * n].to_vec(),
        escape_rates: dydt[n * n..].iter().map(|z| z.re).collect(),
    })
}

/// Integrate the master equation from `t0` to `t1` at fixed position `x`.
///
/// Adaptive steps keep the local error under `tol`; Hermiticity is
/// re-enforced by symmetrization after every accepted step.
pub fn evolve(
    scheme: &LevelScheme,
    p: &PulsePair,
    x: f64,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<EvolvedState> {
    p.validate()?;
    scheme.check_drive(p)?;
    if rho0.n() != scheme.n_states() {
        return Err(Error::Domain("initial state size does not match the scheme".into()));
    }
    if rho0.hermiticity_error() > 1e-9 || rho0.trace() > 1.0 + 1e-8 {
        return Err(Error::Domain("initial state is not a valid density matrix".into()));
    }
    let n = scheme.n_states();
    let shifts = scheme.frame_shifts(p.delta_tw, p.delta_sw)?;
    let sys = MasterSystem { scheme, drive: Drive::Pulsed { pulse: p, x }, shifts };

    let mut y = vec![C64::new(0.0, 0.0); n * n + n];
    y[..n * n].copy_from_slice(rho0.as_slice());

    let opts = AdaptiveOptions {
        rtol: tol,
        atol: tol * 1e-4,
        h_max: Some(0.25 * p.sigma_tw.min(p.sigma_sw)),
        ..Default::default()
    };
    integrate_adaptive(&sys, t0, t1, &mut y, &opts, |state| {
        symmetrize_flat(&mut state[..n * n], n);
    })?;

    let rho = DensityMatrix::from_elements(n, y[..n * n].to_vec())?;
    let escaped = y[n * n..].iter().map(|z| z.re).collect();
    Ok(EvolvedState { rho, escaped })
}

/// Evolve over the pulse pair's default window.
pub fn evolve_over_pulse(
    scheme: &LevelScheme,
    p: &PulsePair,
    x: f64,
    rho0: &DensityMatrix,
    tol: f64,
) -> Result<EvolvedState> {
    let (t0, t1) = p.default_window();
    evolve(scheme, p, x, rho0, t0, t1, tol)
}

/// Residual bound used by [`steady_state`].
pub const STEADY_STATE_RESIDUAL: f64 = 1e-9;

/// Steady state of the scheme under fixed drive amplitudes, from the null
/// space of the vectorized Liouvillian. Requires a closed scheme; a null
/// space of dimension > 1 (e.g. both fields off) is reported as an error.
pub fn steady_state(
    scheme: &LevelScheme,
    omega_sw: f64,
    omega_tw: f64,
    delta_tw: f64,
    delta_sw: f64,
) -> Result<DensityMatrix> {
    if !scheme.is_closed() {
        return Err(Error::InvalidScheme(
            "steady_state needs a closed (trace-preserving) scheme".into(),
        ));
    }
    let n = scheme.n_states();
    let m = n * n;
    let shifts = scheme.frame_shifts(delta_tw, delta_sw)?;
    let sys = MasterSystem { scheme, drive: Drive::Fixed { omega_sw, omega_tw }, shifts };

    // Column k of L is the Liouvillian applied to the k-th basis matrix.
    let mut l = DMatrix::<C64>::zeros(m, m);
    let mut y = vec![C64::new(0.0, 0.0); m + n];
    let mut dydt = vec![C64::new(0.0, 0.0); m + n];
    for k in 0..m {
        y.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        y[k] = C64::new(1.0, 0.0);
        sys.rhs(0.0, &y, &mut dydt);
        for r in 0..m {
            l[(r, k)] = dydt[r];
        }
    }

    let svd = l.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let null_tol = smax.max(1.0) * 1e-12;
    let null_dim = svd.singular_values.iter().filter(|&&s| s < null_tol).count();
    if null_dim == 0 {
        return Err(Error::Convergence(
            "no Liouvillian null vector found at the working precision".into(),
        ));
    }
    if null_dim > 1 {
        return Err(Error::NonUniqueSteadyState(null_dim));
    }

    // smallest singular value is last in nalgebra's ordering
    let idx = svd.singular_values.len() - 1;
    let v: DVector<C64> = v_t.row(idx).map(|z| z.conj()).transpose();

    let mut data: Vec<C64> = v.iter().copied().collect();
    symmetrize_flat(&mut data, n);
    let tr: f64 = (0..n).map(|s| data[s * n + s].re).sum();
    if tr.abs() < 1e-10 {
        return Err(Error::NonUniqueSteadyState(null_dim.max(2)));
    }
    for z in &mut data {
        *z /= tr;
    }

    // residual check against the generator itself
    y.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    y[..m].copy_from_slice(&data);
    sys.rhs(0.0, &y, &mut dydt);
    let rate_scale = scheme
        .max_decay_rate()
        .max(omega_sw.abs())
        .max(omega_tw.abs())
        .max(1.0);
    let resid = dydt[..m].iter().map(|z| z.norm()).fold(0.0, f64::max);
    if resid > STEADY_STATE_RESIDUAL * rate_scale {
        return Err(Error::Convergence(format!(
            "steady-state residual {resid:.3e} exceeds {:.1e}",
            STEADY_STATE_RESIDUAL * rate_scale
        )));
    }

    DensityMatrix::from_elements(n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    pub(crate) fn fig2_pulse(omega_tw0: f64, t_delay: f64) -> PulsePair {
        PulsePair {
            omega_tw0,
            omega_sw0: 10.0 * omega_tw0,
            sigma_tw: 5.0,
            sigma_sw: 5.0,
            t_tw: 0.0,
            t_sw: t_delay,
            delta_tw: 0.0,
            delta_sw: 0.0,
            k_sw: 2.0 * PI,
        }
    }

    fn random_density(n: usize, seed: u64) -> DensityMatrix {
        // simple LCG; exact randomness quality is irrelevant here
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        // rho = A A^dagger / tr
        let a: Vec<C64> =
            (0..n * n).map(|_| C64::new(next() - 0.5, next() - 0.5)).collect();
        let mut rho = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += a[i * n + k] * a[j * n + k].conj();
                }
                rho[i * n + j] = acc;
            }
        }
        let tr: f64 = (0..n).map(|i| rho[i * n + i].re).sum();
        for z in &mut rho {
            *z /= tr;
        }
        DensityMatrix::from_elements(n, rho).unwrap()
    }

    #[test]
    fn stationary_ground_manifold() {
        // all fields zero, diagonal rho with no excited population
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let mut p = fig2_pulse(1.0, 10.0);
        p.omega_tw0 = 0.0;
        p.omega_sw0 = 0.0;
        let rho = DensityMatrix::from_elements(
            3,
            vec![
                C64::new(0.3, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.7, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let d = liouvillian_apply(&scheme, &p, 0.1, 0.0, &rho).unwrap();
        assert!(d.drho.iter().all(|z| z.norm() == 0.0));
        assert!(d.escape_rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn rate_equation_limit() {
        // rho = |c><c| with a single decay c -> a
        let scheme = LevelScheme::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![Coupling { lower: 0, upper: 2, field: FieldId::Sw }],
            vec![Decay { upper: 2, target: DecayTarget::Internal(0), rate: 0.7 }],
            None,
        )
        .unwrap();
        let mut p = fig2_pulse(0.0, 10.0);
        p.omega_sw0 = 0.0;
        let rho = DensityMatrix::pure(3, 2);
        let d = liouvillian_apply(&scheme, &p, 0.0, 0.0, &rho).unwrap();
        assert_relative_eq!(d.get(2, 2, 3).re, -0.7, max_relative = 1e-14);
        assert_relative_eq!(d.get(0, 0, 3).re, 0.7, max_relative = 1e-14);
    }

    #[test]
    fn closed_scheme_preserves_trace_rate() {
        let scheme = LevelScheme::lambda(0.8, 1.3);
        let p = fig2_pulse(0.9, 10.0);
        for seed in 1..6 {
            let rho = random_density(3, seed);
            let d = liouvillian_apply(&scheme, &p, 0.07, 3.0, &rho).unwrap();
            assert!(d.trace_rate(3).abs() < 1e-12, "trace rate {}", d.trace_rate(3));
        }
    }

    #[test]
    fn node_decouples_initial_state() {
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let p = fig2_pulse(1.0, 10.0);
        let rho0 = DensityMatrix::pure(3, LAMBDA_A);
        let out = evolve_over_pulse(&scheme, &p, 0.0, &rho0, 1e-8).unwrap();
        assert!(out.rho.population(LAMBDA_A) >= 1.0 - 1e-6);
        assert!(out.rho.validate().is_ok());
    }

    #[test]
    fn antinode_transfer_is_nearly_complete() {
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let p = fig2_pulse(1.0, 10.0);
        let anti = PI / (2.0 * p.k_sw);
        let rho0 = DensityMatrix::pure(3, LAMBDA_A);
        let out = evolve_over_pulse(&scheme, &p, anti, &rho0, 1e-8).unwrap();
        assert!(
            out.rho.population(LAMBDA_B) > 0.98,
            "transfer = {}",
            out.rho.population(LAMBDA_B)
        );
        assert!((out.rho.trace() - 1.0).abs() < 1e-8);
        assert!(out.rho.validate().is_ok());
    }

    #[test]
    fn trace_monotone_with_external_decay() {
        let scheme = LevelScheme::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                Coupling { lower: 0, upper: 2, field: FieldId::Sw },
                Coupling { lower: 1, upper: 2, field: FieldId::Tw },
            ],
            vec![
                Decay { upper: 2, target: DecayTarget::Internal(0), rate: 0.5 },
                Decay { upper: 1, target: DecayTarget::External, rate: 0.8 },
            ],
            None,
        )
        .unwrap();
        let p = fig2_pulse(1.0, 10.0);
        let rho0 = DensityMatrix::pure(3, 0);
        let anti = PI / (2.0 * p.k_sw);
        // watch the trace at a few intermediate times
        let mut last = 1.0;
        let (t0, t1) = p.default_window();
        for step in 1..=6 {
            let t = t0 + (t1 - t0) * step as f64 / 6.0;
            let out = evolve(&scheme, &p, anti, &rho0, t0, t, 1e-9).unwrap();
            let tr = out.rho.trace();
            assert!(tr <= last + 1e-9, "trace grew: {last} -> {tr}");
            assert_relative_eq!(out.total(), 1.0, epsilon = 1e-7);
            last = tr;
        }
    }

    #[test]
    fn pumped_to_sw_dark_state() {
        // omega_sw = 0, omega_tw > 0: everything is pumped into |a>
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let rho = steady_state(&scheme, 0.0, 2.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(rho.population(LAMBDA_A), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn balanced_dark_state() {
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let rho = steady_state(&scheme, 1.5, 1.5, 0.0, 0.0).unwrap();
        assert_relative_eq!(rho.population(LAMBDA_A), 0.5, epsilon = 1e-9);
        assert_relative_eq!(rho.population(LAMBDA_B), 0.5, epsilon = 1e-9);
        // coherence of the pure dark state (|a> - |b>)/sqrt(2)
        assert_relative_eq!(rho.get(0, 1).re, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn dark_state_projection_matches_mixing_angle() {
        // general amplitude ratio: rho_aa = cos^2(theta)
        let scheme = LevelScheme::lambda(1.0, 1.0);
        for ratio in [0.3, 1.7, 6.0] {
            let rho = steady_state(&scheme, ratio, 1.0, 0.0, 0.0).unwrap();
            let theta = crate::analytic::mixing_angle(ratio, 1.0).unwrap();
            assert_relative_eq!(rho.population(LAMBDA_A), theta.cos().powi(2), epsilon = 1e-9);
            assert_relative_eq!(rho.population(LAMBDA_B), theta.sin().powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn undriven_steady_state_degenerate() {
        let scheme = LevelScheme::lambda(1.0, 1.0);
        assert!(matches!(
            steady_state(&scheme, 0.0, 0.0, 0.0, 0.0),
            Err(Error::NonUniqueSteadyState(_))
        ));
    }

    #[test]
    fn open_scheme_rejected_by_steady_state() {
        let scheme = LevelScheme::new(
            vec!["a".into(), "c".into()],
            vec![Coupling { lower: 0, upper: 1, field: FieldId::Sw }],
            vec![Decay { upper: 1, target: DecayTarget::External, rate: 1.0 }],
            None,
        )
        .unwrap();
        assert!(steady_state(&scheme, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn drive_without_coupling_rejected() {
        let scheme = LevelScheme::new(
            vec!["a".into(), "c".into()],
            vec![Coupling { lower: 0, upper: 1, field: FieldId::Sw }],
            vec![],
            None,
        )
        .unwrap();
        let p = fig2_pulse(1.0, 10.0); // nonzero TW amplitude, no TW coupling
        let rho0 = DensityMatrix::pure(2, 0);
        assert!(matches!(
            evolve_over_pulse(&scheme, &p, 0.1, &rho0, 1e-8),
            Err(Error::InvalidScheme(_))
        ));
    }

    #[test]
    fn invariants_hold_through_a_pulse() {
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let p = fig2_pulse(0.7, 10.0);
        let rho0 = DensityMatrix::pure(3, LAMBDA_A);
        let x = 0.11;
        let out = evolve_over_pulse(&scheme, &p, x, &rho0, 1e-8).unwrap();
        assert!((out.rho.trace() - 1.0).abs() < 1e-8);
        assert!(out.rho.hermiticity_error() < 1e-10);
        assert!(out.rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn detuned_frame_shifts() {
        let scheme = LevelScheme::lambda(1.0, 1.0);
        let shifts = scheme.frame_shifts(0.3, 0.5).unwrap();
        // a = 0, c = delta_sw, b = delta_sw - delta_tw
        assert_relative_eq!(shifts[LAMBDA_A], 0.0);
        assert_relative_eq!(shifts[LAMBDA_C], 0.5);
        assert_relative_eq!(shifts[LAMBDA_B], 0.2, max_relative = 1e-12);
    }
}
