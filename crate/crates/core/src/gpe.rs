//! Coupled 1D Gross–Pitaevskii solver for a two-component trapped
//! condensate with a lossy, untrapped excited field.
//!
//! The equations of motion are (hbar = 1 units shown; the code carries SI):
//!
//! ```text
//! i d psi_a/dt = [-(1/2m) d^2/dx^2 + V + g_aa |psi_a|^2 + g_ab |psi_b|^2] psi_a
//!                + (1/2) omega_sw(x,t) psi_c
//! i d psi_b/dt = [-(1/2m) d^2/dx^2 + V + g_bb |psi_b|^2 + g_ab |psi_a|^2] psi_b
//!                + (1/2) omega_tw(t) psi_c + (delta_sw - delta_tw) psi_b
//! i d psi_c/dt = (1/2) omega_sw psi_a + (1/2) omega_tw psi_b
//!                + (delta_sw - i Gamma/2) psi_c
//! ```
//!
//! with the effective 1D nonlinearities `g_ij = 2 hbar a_ij omega_t`. The
//! excited field has no kinetic or trap term; it is fed by the couplings
//! and drained by the loss rate Gamma.
//!
//! Propagation is symmetric operator splitting: a spectral kinetic
//! half-step on the trapped components (periodic grid), then the pointwise
//! stage — half a diagonal phase (trap + mean field + two-photon detuning),
//! the exactly-exponentiated coupling/loss block in the local bright/dark
//! basis, half a diagonal phase — then the second kinetic half-step.
//! Ground states come from the same machinery run in imaginary time with
//! per-step renormalization.

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::exec;
use crate::fwhm::peak_width;
use crate::pulse::PulsePair;
use crate::C64;

/// Condensate component, for diagnostics that pick one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    A,
    B,
    C,
}

/// Physical and numerical parameters of a condensate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensateConfig {
    /// Atomic mass, kg.
    pub mass: f64,
    /// Atom number (sets the field normalization).
    pub atom_number: f64,
    /// s-wave scattering lengths, m.
    pub a_aa: f64,
    pub a_ab: f64,
    pub a_bb: f64,
    /// Axial trap frequency, rad/s.
    pub omega_x: f64,
    /// Transverse trap frequency, rad/s (enters only through g_ij).
    pub omega_t: f64,
    /// Loss rate of the untrapped excited component, 1/s.
    pub gamma_c: f64,
    /// Total grid length, m.
    pub grid_extent: f64,
    /// Number of grid points (power of two recommended).
    pub grid_points: usize,
}

impl CondensateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mass <= 0.0 || self.atom_number <= 0.0 {
            return Err(Error::Domain("mass and atom number must be > 0".into()));
        }
        if self.omega_x <= 0.0 || self.omega_t <= 0.0 {
            return Err(Error::Domain("trap frequencies must be > 0".into()));
        }
        if self.a_aa < 0.0 || self.a_ab < 0.0 || self.a_bb < 0.0 {
            return Err(Error::Domain("scattering lengths must be >= 0 here".into()));
        }
        if self.gamma_c < 0.0 {
            return Err(Error::Domain("loss rate must be >= 0".into()));
        }
        if self.grid_points < 8 || self.grid_extent <= 0.0 {
            return Err(Error::Domain("grid needs >= 8 points and positive extent".into()));
        }
        Ok(())
    }

    /// Effective 1D nonlinearity `g_ij = 2 hbar a_ij omega_t`, J m.
    pub fn g_aa(&self) -> f64 {
        2.0 * HBAR * self.a_aa * self.omega_t
    }

    pub fn g_ab(&self) -> f64 {
        2.0 * HBAR * self.a_ab * self.omega_t
    }

    pub fn g_bb(&self) -> f64 {
        2.0 * HBAR * self.a_bb * self.omega_t
    }

    /// Axial trap `V(x) = m omega_x^2 x^2 / 2`, J.
    pub fn potential(&self, x: f64) -> f64 {
        0.5 * self.mass * self.omega_x * self.omega_x * x * x
    }

    /// Harmonic-oscillator length `sqrt(hbar / (m omega_x))`.
    pub fn oscillator_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_x)).sqrt()
    }

    /// Thomas–Fermi chemical potential of a single component with `g_aa`,
    /// from the closed-form 1D normalization.
    pub fn thomas_fermi_mu(&self) -> f64 {
        let g = self.g_aa();
        let mw2 = self.mass * self.omega_x * self.omega_x;
        (3.0 * g * self.atom_number * mw2.sqrt() / (4.0 * 2.0_f64.sqrt())).powf(2.0 / 3.0)
    }

    /// Thomas–Fermi radius `sqrt(2 mu / (m omega_x^2))`.
    pub fn thomas_fermi_radius(&self) -> f64 {
        (2.0 * self.thomas_fermi_mu() / (self.mass * self.omega_x * self.omega_x)).sqrt()
    }

    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.grid_extent, self.grid_points)
    }
}

/// Uniform periodic grid and its spectral wave numbers.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub dx: f64,
}

impl Grid1D {
    pub fn new(extent: f64, n: usize) -> Self {
        let dx = extent / n as f64;
        let x = (0..n).map(|i| (i as f64 - 0.5 * n as f64) * dx).collect();
        let dk = 2.0 * std::f64::consts::PI / extent;
        let k = (0..n)
            .map(|i| {
                let j = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                j * dk
            })
            .collect();
        Self { x, k, dx }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Three complex fields on the grid, normalized so that the summed
/// |psi|^2 integral is the atom number.
#[derive(Debug, Clone)]
pub struct CondensateState {
    pub psi_a: Vec<C64>,
    pub psi_b: Vec<C64>,
    pub psi_c: Vec<C64>,
    pub t: f64,
}

impl CondensateState {
    pub fn zero(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self { psi_a: z.clone(), psi_b: z.clone(), psi_c: z, t: 0.0 }
    }

    pub fn component(&self, c: Component) -> &[C64] {
        match c {
            Component::A => &self.psi_a,
            Component::B => &self.psi_b,
            Component::C => &self.psi_c,
        }
    }

    pub fn norm(&self, c: Component, dx: f64) -> f64 {
        self.component(c).iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
    }

    pub fn total_atoms(&self, dx: f64) -> f64 {
        self.norm(Component::A, dx) + self.norm(Component::B, dx) + self.norm(Component::C, dx)
    }

    pub fn density(&self, c: Component) -> Vec<f64> {
        self.component(c).iter().map(|z| z.norm_sqr()).collect()
    }
}

// ---------------------------------------------------------------------
// split-step machinery
// ---------------------------------------------------------------------

struct Spectral {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// exp(-i (hbar k^2 / 2m) dt / 2), with the 1/n inverse-FFT
    /// normalization folded in. In imaginary time the exponent is real.
    kin_half: Vec<C64>,
}

impl Spectral {
    fn new(grid: &Grid1D, mass: f64, half_step: C64) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scale = 1.0 / n as f64;
        let kin_half = grid
            .k
            .iter()
            .map(|&k| {
                let rate = HBAR * k * k / (2.0 * mass); // rad/s
                (-C64::i() * half_step * rate).exp() * scale
            })
            .collect();
        Self { fft, ifft, kin_half }
    }

    /// One kinetic half step on a field.
    fn kinetic_half(&self, psi: &mut [C64]) {
        self.fft.process(psi);
        for (p, k) in psi.iter_mut().zip(self.kin_half.iter()) {
            *p *= *k;
        }
        self.ifft.process(psi);
    }
}

/// Exact propagator of the 2x2 coupling/loss block
/// `H2 = [[0, om], [om, dc]]` (dc complex) applied to `(u, v)`:
/// `(u, v) <- exp(-i H2 dt) (u, v)`.
fn coupling_block(u: C64, v: C64, om: f64, dc: C64, dt: f64) -> (C64, C64) {
    let mu = -C64::i() * dc * (0.5 * dt);
    // q = i dt sqrt(dc^2/4 + om^2)
    let q = C64::i() * dt * (dc * dc * 0.25 + om * om).sqrt();
    let (cosh_q, sinhc_q) = if q.norm() < 1e-4 {
        let q2 = q * q;
        (1.0 + q2 * 0.5 + q2 * q2 / 24.0, 1.0 + q2 / 6.0 + q2 * q2 / 120.0)
    } else {
        (q.cosh(), q.sinh() / q)
    };
    let e = mu.exp();
    // M - mu I = -i dt [[-dc/2, om], [om, dc/2]]
    let idt = -C64::i() * dt;
    let m00 = idt * (-0.5 * dc);
    let m01 = idt * om;
    let m11 = idt * (0.5 * dc);
    let u_new = e * ((cosh_q + sinhc_q * m00) * u + sinhc_q * m01 * v);
    let v_new = e * (sinhc_q * m01 * u + (cosh_q + sinhc_q * m11) * v);
    (u_new, v_new)
}

struct PointwiseParams {
    /// V(x)/hbar per grid point, rad/s.
    v_over_hbar: Vec<f64>,
    /// g_ij / hbar, (rad/s) per unit density.
    gaa: f64,
    gab: f64,
    gbb: f64,
    /// two-photon term on psi_b, rad/s.
    delta_b: f64,
    /// complex diagonal of psi_c: delta_sw - i Gamma/2, rad/s.
    dc: C64,
}

/// The pointwise stage over the whole grid: D/2, coupling block, D/2 at
/// every point. `s_of_x` are the local SW half-Rabi couplings, `w` the TW
/// half-Rabi; `dt` may be complex (imaginary time).
#[allow(clippy::too_many_arguments)]
fn pointwise_stage(
    params: &PointwiseParams,
    psi_a: &mut [C64],
    psi_b: &mut [C64],
    psi_c: &mut [C64],
    s_of_x: &[f64],
    w: f64,
    dt: f64,
) {
    let gaa = params.gaa;
    let gab = params.gab;
    let gbb = params.gbb;
    let work = |i: usize, a: &mut C64, b: &mut C64, c: &mut C64| {
        let na = a.norm_sqr();
        let nb = b.norm_sqr();
        let v = params.v_over_hbar[i];
        let da = v + gaa * na + gab * nb;
        let db = v + gbb * nb + gab * na + params.delta_b;
        let pa = (-C64::i() * (da * 0.5 * dt)).exp();
        let pb = (-C64::i() * (db * 0.5 * dt)).exp();
        *a *= pa;
        *b *= pb;
        let s = s_of_x[i];
        let om = (s * s + w * w).sqrt();
        if om > 0.0 {
            let bright = (*a * s + *b * w) / om;
            let dark = (*a * w - *b * s) / om;
            let (bright, c_new) = coupling_block(bright, *c, om, params.dc, dt);
            *c = c_new;
            *a = (bright * s + dark * w) / om;
            *b = (bright * w - dark * s) / om;
        } else {
            *c *= (-C64::i() * params.dc * dt).exp();
        }
        *a *= pa;
        *b *= pb;
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        psi_a
            .par_iter_mut()
            .zip_eq(psi_b.par_iter_mut())
            .zip_eq(psi_c.par_iter_mut())
            .enumerate()
            .for_each(|(i, ((a, b), c))| work(i, a, b, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, ((a, b), c)) in
            psi_a.iter_mut().zip(psi_b.iter_mut()).zip(psi_c.iter_mut()).enumerate()
        {
            work(i, a, b, c);
        }
    }
}

// ---------------------------------------------------------------------
// ground state (imaginary time)
// ---------------------------------------------------------------------

/// Relative energy change per step that counts as converged.
pub const ITP_ENERGY_TOL: f64 = 1e-10;
/// Relative stationarity residual target, `max|H psi - mu psi|` scaled.
pub const ITP_RESIDUAL_TOL: f64 = 3e-7;
const ITP_MAX_STEPS: usize = 400_000;

/// Single-component ground state by imaginary-time propagation: psi_a is
/// relaxed under the g_aa functional and renormalized to the atom number
/// every step; psi_b = psi_c = 0.
///
/// The split fixed point at a given imaginary step carries an O(dtau^2)
/// bias, so after the energy settles the step is halved until the
/// stationarity residual drops under [`ITP_RESIDUAL_TOL`].
pub fn ground_state(cfg: &CondensateConfig) -> Result<CondensateState> {
    cfg.validate()?;
    let grid = cfg.grid();
    let n = grid.n();

    // start from the Thomas-Fermi shape when interactions dominate,
    // otherwise from the oscillator Gaussian
    let a_ho = cfg.oscillator_length();
    let mu_tf = cfg.thomas_fermi_mu();
    let g = cfg.g_aa();
    let mut psi: Vec<C64> = if mu_tf > HBAR * cfg.omega_x && g > 0.0 {
        grid.x
            .iter()
            .map(|&x| C64::new(((mu_tf - cfg.potential(x)).max(0.0) / g).sqrt(), 0.0))
            .collect()
    } else {
        grid.x
            .iter()
            .map(|&x| C64::new((-x * x / (2.0 * a_ho * a_ho)).exp(), 0.0))
            .collect()
    };
    normalize(&mut psi, grid.dx, cfg.atom_number);

    let v_over_hbar: Vec<f64> = grid.x.iter().map(|&x| cfg.potential(x) / HBAR).collect();
    let gaa = cfg.g_aa() / HBAR;

    // the step must resolve both the trap and the interaction scale,
    // otherwise the relaxation map oscillates around the fixed point
    let rate_scale = cfg.omega_x.max(mu_tf / HBAR);
    let mut dtau = 0.02 / rate_scale;
    let dtau_floor = dtau / 1024.0;
    let mut spectral = Spectral::new(&grid, cfg.mass, C64::new(0.0, -dtau / 2.0));
    let mut energy = gp_energy_single(cfg, &grid, &psi);
    let mut stage_settled = false;
    let mut stage_best = f64::INFINITY;
    let mut last_residual = f64::INFINITY;
    const CHECK_EVERY: usize = 100;

    for step in 1..=ITP_MAX_STEPS {
        spectral.kinetic_half(&mut psi);
        for (p, &v) in psi.iter_mut().zip(v_over_hbar.iter()) {
            let rate = v + gaa * p.norm_sqr();
            *p *= (-rate * dtau).exp();
        }
        spectral.kinetic_half(&mut psi);
        normalize(&mut psi, grid.dx, cfg.atom_number);

        let e_new = gp_energy_single(cfg, &grid, &psi);
        let de = ((e_new - energy) / e_new.abs().max(1e-300)).abs();
        energy = e_new;
        stage_settled = stage_settled || de < ITP_ENERGY_TOL;

        if step % CHECK_EVERY != 0 {
            continue;
        }
        last_residual = stationarity_residual(cfg, &grid, &psi);
        if std::env::var("SLAP_ITP_TRACE").is_ok() {
            eprintln!(
                "itp step {step}: dtau = {dtau:.3e}, E = {energy:.9e}, de = {de:.2e}, \
                 res = {last_residual:.3e}, settled = {stage_settled}"
            );
        }
        if stage_settled && last_residual < ITP_RESIDUAL_TOL {
            let mut state = CondensateState::zero(n);
            state.psi_a = psi;
            state.t = 0.0;
            return Ok(state);
        }
        // once the energy has settled and the residual stops improving,
        // the remaining error is the splitting bias: refine dtau
        if stage_settled && last_residual > 0.99 * stage_best {
            if dtau <= dtau_floor {
                break;
            }
            dtau *= 0.5;
            spectral = Spectral::new(&grid, cfg.mass, C64::new(0.0, -dtau / 2.0));
            stage_best = f64::INFINITY;
            stage_settled = false;
        } else {
            stage_best = stage_best.min(last_residual);
        }
    }
    Err(Error::Convergence(format!(
        "imaginary-time relaxation stalled (residual {last_residual:.3e} \
         vs {ITP_RESIDUAL_TOL:.1e})"
    )))
}

fn normalize(psi: &mut [C64], dx: f64, atoms: f64) {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
    let s = (atoms / norm).sqrt();
    for p in psi.iter_mut() {
        *p *= s;
    }
}

/// Total GP energy of a single component with g_aa, J.
fn gp_energy_single(cfg: &CondensateConfig, grid: &Grid1D, psi: &[C64]) -> f64 {
    let n = grid.n();
    let mut spec = psi.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spec);
    let parseval = grid.dx / n as f64;
    let kin: f64 = spec
        .iter()
        .zip(grid.k.iter())
        .map(|(z, &k)| HBAR * HBAR * k * k / (2.0 * cfg.mass) * z.norm_sqr())
        .sum::<f64>()
        * parseval;
    let g = cfg.g_aa();
    let pot_int: f64 = psi
        .iter()
        .zip(grid.x.iter())
        .map(|(z, &x)| {
            let d = z.norm_sqr();
            cfg.potential(x) * d + 0.5 * g * d * d
        })
        .sum::<f64>()
        * grid.dx;
    kin + pot_int
}

/// Chemical potential of a single-component state, J.
fn chemical_potential(cfg: &CondensateConfig, grid: &Grid1D, psi: &[C64]) -> f64 {
    let n = grid.n();
    let mut spec = psi.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spec);
    let parseval = grid.dx / n as f64;
    let kin: f64 = spec
        .iter()
        .zip(grid.k.iter())
        .map(|(z, &k)| HBAR * HBAR * k * k / (2.0 * cfg.mass) * z.norm_sqr())
        .sum::<f64>()
        * parseval;
    let g = cfg.g_aa();
    let pot_int: f64 = psi
        .iter()
        .zip(grid.x.iter())
        .map(|(z, &x)| {
            let d = z.norm_sqr();
            cfg.potential(x) * d + g * d * d
        })
        .sum::<f64>()
        * grid.dx;
    (kin + pot_int) / cfg.atom_number
}

/// Density-weighted stationarity residual
/// `max |(H_GP - mu) psi| |psi| / (|mu| max|psi|^2)`.
///
/// The weighting ties the residual to the density wobble the leftover
/// excitation would cause in real time, and keeps the empty far tails
/// (density ~ 1e-12 of peak) from dominating the measure.
fn stationarity_residual(cfg: &CondensateConfig, grid: &Grid1D, psi: &[C64]) -> f64 {
    let n = grid.n();
    let mu = chemical_potential(cfg, grid, psi);
    let mut planner = FftPlanner::new();
    let mut spec = psi.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    for (z, &k) in spec.iter_mut().zip(grid.k.iter()) {
        *z *= HBAR * HBAR * k * k / (2.0 * cfg.mass) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let g = cfg.g_aa();
    let psi_max_sq = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let mut worst = 0.0_f64;
    for ((h_psi, z), &x) in spec.iter().zip(psi.iter()).zip(grid.x.iter()) {
        let local = *h_psi + *z * (cfg.potential(x) + g * z.norm_sqr() - mu);
        worst = worst.max(local.norm() * z.norm());
    }
    worst / (mu.abs() * psi_max_sq).max(1e-300)
}

// ---------------------------------------------------------------------
// real-time evolution
// ---------------------------------------------------------------------

/// Real-time propagation options.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Final time, s.
    pub t_end: f64,
    /// Time step, s. Must resolve the fastest Rabi coupling
    /// (`dt * omega_max < 0.1`) and the grid's kinetic bandwidth.
    pub dt: f64,
    /// Observer cadence, s.
    pub sample_every: f64,
    /// Keep the complex fields in each snapshot (needed for the beam
    /// quality factor), not just the densities.
    pub store_fields: bool,
}

/// One observed instant of a trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_c: f64,
    pub density_a: Vec<f64>,
    pub fields: Option<CondensateState>,
}

/// Observer samples of a run, plus grid metadata to interpret them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub x: Vec<f64>,
    pub dx: f64,
    /// Set when any field grew past 1e-6 of its peak at the grid edges.
    pub boundary_warning: bool,
}

/// Advance the coupled equations from `state.t` to `t_end`.
pub fn evolve_gpe(
    state: &CondensateState,
    cfg: &CondensateConfig,
    p: &PulsePair,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    cfg.validate()?;
    p.validate()?;
    let grid = cfg.grid();
    let n = grid.n();
    if state.psi_a.len() != n {
        return Err(Error::Domain("state does not match the configured grid".into()));
    }
    let dt = opts.dt;
    if dt <= 0.0 || opts.t_end <= state.t {
        return Err(Error::Domain("need dt > 0 and t_end past the state time".into()));
    }
    let omega_max = p.omega_tw0.max(p.omega_sw0);
    if dt * omega_max >= 0.1 {
        return Err(Error::StepSize(format!(
            "dt * omega_max = {:.3} must stay below 0.1 to resolve the coupling",
            dt * omega_max
        )));
    }
    let k_max = grid.k.iter().fold(0.0_f64, |a, &k| a.max(k.abs()));
    let kin_max = HBAR * k_max * k_max / (2.0 * cfg.mass);
    if dt * kin_max > std::f64::consts::PI {
        return Err(Error::StepSize(format!(
            "dt * (hbar k_max^2 / 2m) = {:.3} exceeds pi: the kinetic bandwidth is \
             not resolved",
            dt * kin_max
        )));
    }

    let spectral = Spectral::new(&grid, cfg.mass, C64::new(dt / 2.0, 0.0));
    let params = PointwiseParams {
        v_over_hbar: grid.x.iter().map(|&x| cfg.potential(x) / HBAR).collect(),
        gaa: cfg.g_aa() / HBAR,
        gab: cfg.g_ab() / HBAR,
        gbb: cfg.g_bb() / HBAR,
        delta_b: p.delta_sw - p.delta_tw,
        dc: C64::new(p.delta_sw, -0.5 * cfg.gamma_c),
    };
    let sin_kx: Vec<f64> = grid.x.iter().map(|&x| (p.k_sw * x).sin()).collect();

    let mut psi_a = state.psi_a.clone();
    let mut psi_b = state.psi_b.clone();
    let mut psi_c = state.psi_c.clone();
    let mut t = state.t;

    let steps = ((opts.t_end - t) / dt).ceil() as usize;
    let sample_stride = (opts.sample_every / dt).round().max(1.0) as usize;
    let mut snapshots = Vec::with_capacity(steps / sample_stride + 2);
    let mut boundary_warning = false;
    let mut s_of_x = vec![0.0; n];

    let take = |t: f64, a: &[C64], b: &[C64], c: &[C64]| Snapshot {
        t,
        norm_a: a.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx,
        norm_b: b.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx,
        norm_c: c.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx,
        density_a: a.iter().map(|z| z.norm_sqr()).collect(),
        fields: opts.store_fields.then(|| CondensateState {
            psi_a: a.to_vec(),
            psi_b: b.to_vec(),
            psi_c: c.to_vec(),
            t,
        }),
    };
    snapshots.push(take(t, &psi_a, &psi_b, &psi_c));

    for step in 0..steps {
        let t_mid = t + 0.5 * dt;
        let env_sw = {
            let u = (t_mid - p.t_sw) / p.sigma_sw;
            0.5 * p.omega_sw0 * (-u * u).exp()
        };
        for (s, &sk) in s_of_x.iter_mut().zip(sin_kx.iter()) {
            *s = env_sw * sk;
        }
        let w = 0.5 * p.rabi_tw(t_mid);

        let (_, _) = exec::join(
            || spectral.kinetic_half(&mut psi_a),
            || spectral.kinetic_half(&mut psi_b),
        );
        pointwise_stage(&params, &mut psi_a, &mut psi_b, &mut psi_c, &s_of_x, w, dt);
        let (_, _) = exec::join(
            || spectral.kinetic_half(&mut psi_a),
            || spectral.kinetic_half(&mut psi_b),
        );

        t = state.t + (step + 1) as f64 * dt;

        if (step + 1) % sample_stride == 0 || step + 1 == steps {
            snapshots.push(take(t, &psi_a, &psi_b, &psi_c));
            if !boundary_warning && edge_contaminated(&psi_a, &psi_b) {
                boundary_warning = true;
                log::warn!("field amplitude at the grid edges exceeded 1e-6 of peak");
            }
        }
    }

    Ok(Trajectory { snapshots, x: grid.x, dx: grid.dx, boundary_warning })
}

fn edge_contaminated(psi_a: &[C64], psi_b: &[C64]) -> bool {
    let n = psi_a.len();
    let zone = (n / 50).max(2);
    let peak = psi_a
        .iter()
        .chain(psi_b.iter())
        .map(|z| z.norm_sqr())
        .fold(0.0, f64::max);
    let edge = psi_a[..zone]
        .iter()
        .chain(psi_a[n - zone..].iter())
        .chain(psi_b[..zone].iter())
        .chain(psi_b[n - zone..].iter())
        .map(|z| z.norm_sqr())
        .fold(0.0, f64::max);
    edge > 1e-6 * peak
}

/// Total GP energy of the trapped components (kinetic + trap + mean
/// field), J. This is the conserved quantity when the drives are off and
/// the loss is zero.
pub fn gp_energy(cfg: &CondensateConfig, state: &CondensateState) -> f64 {
    let grid = cfg.grid();
    let n = grid.n();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let parseval = grid.dx / n as f64;
    let mut kin = 0.0;
    for psi in [&state.psi_a, &state.psi_b] {
        let mut spec = psi.clone();
        fft.process(&mut spec);
        kin += spec
            .iter()
            .zip(grid.k.iter())
            .map(|(z, &k)| HBAR * HBAR * k * k / (2.0 * cfg.mass) * z.norm_sqr())
            .sum::<f64>()
            * parseval;
    }
    let (gaa, gab, gbb) = (cfg.g_aa(), cfg.g_ab(), cfg.g_bb());
    let rest: f64 = (0..n)
        .map(|i| {
            let na = state.psi_a[i].norm_sqr();
            let nb = state.psi_b[i].norm_sqr();
            cfg.potential(grid.x[i]) * (na + nb)
                + 0.5 * gaa * na * na
                + 0.5 * gbb * nb * nb
                + gab * na * nb
        })
        .sum::<f64>()
        * grid.dx;
    kin + rest
}

// ---------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------

/// Mixing angle vs time at fixed `x`, from the analytic envelope ratio in
/// log space (well-defined even where both envelopes underflow).
pub fn mixing_angle_trace(p: &PulsePair, x: f64, times: &[f64]) -> Vec<f64> {
    let sin_abs = (p.k_sw * x).sin().abs();
    times
        .iter()
        .map(|&t| {
            if p.omega_sw0 == 0.0 || sin_abs == 0.0 {
                return 0.0;
            }
            if p.omega_tw0 == 0.0 {
                return std::f64::consts::FRAC_PI_2;
            }
            let u_sw = (t - p.t_sw) / p.sigma_sw;
            let u_tw = (t - p.t_tw) / p.sigma_tw;
            let log_ratio =
                (p.omega_sw0 * sin_abs / p.omega_tw0).ln() + u_tw * u_tw - u_sw * u_sw;
            if log_ratio > 40.0 {
                std::f64::consts::FRAC_PI_2
            } else if log_ratio < -40.0 {
                0.0
            } else {
                log_ratio.exp().atan()
            }
        })
        .collect()
}

/// Width of the component-a structure at `node_x` for every snapshot.
/// Entries are `None` before a distinguishable structure forms (or after
/// it decays), never zero.
pub fn fwhm_vs_time(traj: &Trajectory, node_x: f64, period: f64) -> Vec<(f64, Option<f64>)> {
    traj.snapshots
        .iter()
        .map(|snap| (snap.t, node_fwhm(&traj.x, &snap.density_a, node_x, period)))
        .collect()
}

fn node_fwhm(x: &[f64], density: &[f64], node_x: f64, period: f64) -> Option<f64> {
    let lo = node_x - 0.5 * period;
    let hi = node_x + 0.5 * period;
    let mut baseline = f64::INFINITY;
    let mut peak_idx = None;
    let mut best = -1.0;
    for (i, (&xi, &d)) in x.iter().zip(density.iter()).enumerate() {
        if xi < lo || xi > hi {
            continue;
        }
        baseline = baseline.min(d);
        if (xi - node_x).abs() <= 2.0 * (x[1] - x[0]) && d > best {
            best = d;
            peak_idx = Some(i);
        }
    }
    let peak_idx = peak_idx?;
    let peak = density[peak_idx];
    if peak <= 0.0 || (peak - baseline) < 0.01 * peak {
        return None;
    }
    peak_width(x, density, peak_idx, baseline, 0.01 * peak)
        .ok()
        .map(|w| w.fwhm)
}

/// The time of minimum width in a [`fwhm_vs_time`] series.
pub fn min_fwhm_time(series: &[(f64, Option<f64>)]) -> Option<(f64, f64)> {
    series
        .iter()
        .filter_map(|&(t, w)| w.map(|w| (t, w)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Beam quality factor `M^2 = (2/hbar) dx dp` of a localized structure.
///
/// The structure is the global density maximum of the chosen component;
/// `dx` is the rms width of the baseline-subtracted density under a Hann
/// window of total width 3 FWHM centered on the peak, and `dp` the rms
/// width of the momentum distribution of the windowed field.
pub fn beam_quality(
    state: &CondensateState,
    component: Component,
    grid: &Grid1D,
) -> Result<f64> {
    let psi = state.component(component);
    let density: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let n = density.len();
    let peak_idx = (0..n)
        .max_by(|&i, &j| density[i].total_cmp(&density[j]))
        .ok_or_else(|| Error::Domain("empty field".into()))?;
    let baseline = density.iter().cloned().fold(f64::INFINITY, f64::min);
    let width = peak_width(&grid.x, &density, peak_idx, baseline, 0.01 * density[peak_idx])?;

    // Hann window, total width 3 FWHM, centered on the structure
    let x0 = 0.5 * (width.x_left + width.x_right);
    let w_full = 3.0 * width.fwhm;
    let mut windowed: Vec<C64> = psi
        .iter()
        .zip(grid.x.iter())
        .map(|(z, &x)| {
            let u = (x - x0) / w_full;
            if u.abs() < 0.5 {
                let h = (std::f64::consts::PI * u).cos();
                *z * (h * h)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();

    // position spread of the baseline-subtracted density in the window
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (z, &x) in windowed.iter().zip(grid.x.iter()) {
        let d = (z.norm_sqr() - baseline).max(0.0);
        m0 += d;
        m1 += d * x;
        m2 += d * x * x;
    }
    if m0 <= 0.0 {
        return Err(Error::NoPeak { contrast: 0.0, min_contrast: 0.0 });
    }
    let mean = m1 / m0;
    let dx_rms = (m2 / m0 - mean * mean).max(0.0).sqrt();

    // momentum spread of the windowed field
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut windowed);
    let mut p0 = 0.0;
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for (z, &k) in windowed.iter().zip(grid.k.iter()) {
        let d = z.norm_sqr();
        p0 += d;
        p1 += d * k;
        p2 += d * k * k;
    }
    let k_mean = p1 / p0;
    let dk_rms = (p2 / p0 - k_mean * k_mean).max(0.0).sqrt();

    // dp = hbar dk, so M^2 = (2/hbar) dx (hbar dk) = 2 dx dk
    Ok(2.0 * dx_rms * dk_rms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::M_RB87;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn small_cfg() -> CondensateConfig {
        CondensateConfig {
            mass: M_RB87,
            atom_number: 5e4,
            a_aa: 1.03 * 55e-10,
            a_ab: 55e-10,
            a_bb: 0.97 * 55e-10,
            omega_x: 2.0 * PI * 14.0,
            omega_t: 2.0 * PI * 715.0,
            gamma_c: 2.0 * PI * 5.41e6,
            grid_extent: 60e-6,
            grid_points: 512,
        }
    }

    #[test]
    fn nonlinearity_definition() {
        let cfg = small_cfg();
        assert_relative_eq!(
            cfg.g_aa(),
            2.0 * HBAR * cfg.a_aa * cfg.omega_t,
            max_relative = 1e-15
        );
    }

    #[test]
    fn harmonic_oscillator_ground_state() {
        // g = 0: Gaussian of width a_ho, energy N hbar omega / 2
        let mut cfg = small_cfg();
        cfg.a_aa = 0.0;
        cfg.a_ab = 0.0;
        cfg.a_bb = 0.0;
        cfg.grid_extent = 30e-6;
        cfg.grid_points = 512;
        let st = ground_state(&cfg).unwrap();
        let grid = cfg.grid();
        let e = gp_energy(&cfg, &st);
        assert_relative_eq!(
            e / cfg.atom_number,
            0.5 * HBAR * cfg.omega_x,
            max_relative = 1e-8
        );
        // density rms = a_ho / sqrt(2)
        let d = st.density(Component::A);
        let m0: f64 = d.iter().sum();
        let m2: f64 = d.iter().zip(grid.x.iter()).map(|(&di, &x)| di * x * x).sum();
        let rms = (m2 / m0).sqrt();
        assert_relative_eq!(rms, cfg.oscillator_length() / 2.0_f64.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn thomas_fermi_bulk_profile() {
        // strong interaction: mu / (hbar omega_x) ~ 22
        let mut cfg = small_cfg();
        cfg.atom_number = 1e6;
        cfg.grid_extent = 8.0 * cfg.thomas_fermi_radius();
        cfg.grid_points = 1024;
        let st = ground_state(&cfg).unwrap();
        let grid = cfg.grid();
        let mu = cfg.thomas_fermi_mu();
        let g = cfg.g_aa();
        let r_tf = cfg.thomas_fermi_radius();
        let d = st.density(Component::A);
        for (&x, &n) in grid.x.iter().zip(d.iter()) {
            if x.abs() <= 0.5 * r_tf {
                let n_tf = (mu - cfg.potential(x)) / g;
                assert!(
                    (n - n_tf).abs() / n_tf < 0.02,
                    "TF mismatch at x = {x:e}: {n:e} vs {n_tf:e}"
                );
            }
        }
    }

    #[test]
    fn mixing_angle_trace_limits() {
        let p = PulsePair {
            omega_tw0: 2.0 * PI * 1e7,
            omega_sw0: 2.0 * PI * 1e8,
            sigma_tw: 8e-6,
            sigma_sw: 8e-6,
            t_tw: 22e-6,
            t_sw: 36e-6,
            delta_tw: 0.0,
            delta_sw: 0.0,
            k_sw: PI / 15e-6,
        };
        let anti = PI / (2.0 * p.k_sw);
        let th = mixing_angle_trace(&p, anti, &[-20e-6, 120e-6]);
        assert_relative_eq!(th[0], 0.0, epsilon = 1e-6);
        assert_relative_eq!(th[1], PI / 2.0, epsilon = 1e-6);
        // equal instantaneous envelopes: the crossing sits where the
        // envelope ratio cancels the amplitude ratio
        let t_cross = 0.5 * (p.t_tw + p.t_sw)
            + (p.sigma_tw * p.sigma_tw) / (2.0 * (p.t_sw - p.t_tw))
                * (p.omega_tw0 / p.omega_sw0).ln();
        let th = mixing_angle_trace(&p, anti, &[t_cross]);
        assert_relative_eq!(th[0], PI / 4.0, epsilon = 1e-9);
        // at a node theta stays zero
        let th = mixing_angle_trace(&p, 0.0, &[30e-6]);
        assert_eq!(th[0], 0.0);
    }

    #[test]
    fn beam_quality_of_gaussian_is_one() {
        let cfg = small_cfg();
        let grid = cfg.grid();
        let sx = 2e-6;
        let mut st = CondensateState::zero(grid.n());
        for (p, &x) in st.psi_a.iter_mut().zip(grid.x.iter()) {
            *p = C64::new((-x * x / (4.0 * sx * sx)).exp(), 0.0);
        }
        let m2 = beam_quality(&st, Component::A, &grid).unwrap();
        assert!((m2 - 1.0).abs() < 0.02, "M^2 = {m2}");
    }

    #[test]
    fn beam_quality_rejects_flat_field() {
        let cfg = small_cfg();
        let grid = cfg.grid();
        let mut st = CondensateState::zero(grid.n());
        for p in st.psi_a.iter_mut() {
            *p = C64::new(1.0, 0.0);
        }
        assert!(beam_quality(&st, Component::A, &grid).is_err());
    }

    #[test]
    fn fwhm_series_flags_flat_clouds_absent() {
        let traj = Trajectory {
            snapshots: vec![Snapshot {
                t: 0.0,
                norm_a: 1.0,
                norm_b: 0.0,
                norm_c: 0.0,
                density_a: vec![1.0; 64],
                fields: None,
            }],
            x: (0..64).map(|i| i as f64).collect(),
            dx: 1.0,
            boundary_warning: false,
        };
        let series = fwhm_vs_time(&traj, 32.0, 40.0);
        assert_eq!(series[0].1, None);
    }

    #[test]
    fn step_size_preconditions() {
        let cfg = small_cfg();
        let st = CondensateState::zero(cfg.grid_points);
        let p = PulsePair {
            omega_tw0: 1e8,
            omega_sw0: 1e9,
            sigma_tw: 8e-6,
            sigma_sw: 8e-6,
            t_tw: 22e-6,
            t_sw: 36e-6,
            delta_tw: 0.0,
            delta_sw: 0.0,
            k_sw: PI / 15e-6,
        };
        let opts = EvolveOptions {
            t_end: 1e-6,
            dt: 1e-9, // dt * omega_max = 1.0
            sample_every: 1e-7,
            store_fields: false,
        };
        assert!(matches!(
            evolve_gpe(&st, &cfg, &p, &opts),
            Err(Error::StepSize(_))
        ));
    }
}
