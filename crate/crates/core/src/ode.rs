//! Adaptive embedded Runge–Kutta integration (Dormand–Prince 5(4)) over
//! complex state vectors.
//!
//! Pulse timescales vary by orders of magnitude across scenarios, so the
//! driver controls the local error per step against a mixed
//! absolute/relative tolerance and grows or shrinks the step accordingly.
//! A step-size cap keeps trial steps from leaping over a pulse that has
//! not risen yet.

use crate::error::{Error, Result};
use crate::C64;

/// Right-hand side of `dy/dt = f(t, y)` over a flat complex state.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dydt: &mut [C64]);
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// Relative tolerance per step.
    pub rtol: f64,
    /// Absolute tolerance per step.
    pub atol: f64,
    /// Hard cap on the step size (e.g. a fraction of the pulse width).
    pub h_max: Option<f64>,
    /// Abort after this many accepted + rejected steps.
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-12, h_max: None, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// b - b* (5th order minus embedded 4th order), for the error estimate.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrate `sys` from `t0` to `t1` starting at `y` (updated in place).
///
/// `post_step` runs after every accepted step; the master-equation driver
/// uses it to re-symmetrize the density matrix.
pub fn integrate_adaptive<S, F>(
    sys: &S,
    t0: f64,
    t1: f64,
    y: &mut [C64],
    opts: &AdaptiveOptions,
    mut post_step: F,
) -> Result<IntegrationStats>
where
    S: OdeSystem,
    F: FnMut(&mut [C64]),
{
    assert_eq!(y.len(), sys.dim());
    if !(t1 > t0) {
        return Err(Error::Domain(format!("integration needs t1 > t0, got [{t0:e}, {t1:e}]")));
    }
    let n = y.len();
    let span = t1 - t0;
    let mut stats = IntegrationStats::default();

    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut y_trial = vec![C64::new(0.0, 0.0); n];
    let mut y_stage = vec![C64::new(0.0, 0.0); n];

    sys.rhs(t0, y, &mut k[0]);
    stats.rhs_evals += 1;

    let h_cap = opts.h_max.unwrap_or(span).min(span);
    let mut h = initial_step(t0, y, &k[0], opts).min(h_cap);
    let h_floor = span * 1e-15;
    let mut t = t0;

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Convergence(format!(
                "adaptive integrator exceeded {} steps at t = {t:e}",
                opts.max_steps
            )));
        }
        h = h.min(t1 - t).min(h_cap);

        // stages 2..7
        stage(&mut y_stage, y, &[(&k[0], A2[0])], h);
        sys.rhs(t + C[1] * h, &y_stage, &mut k[1]);
        stage(&mut y_stage, y, &[(&k[0], A3[0]), (&k[1], A3[1])], h);
        sys.rhs(t + C[2] * h, &y_stage, &mut k[2]);
        stage(&mut y_stage, y, &[(&k[0], A4[0]), (&k[1], A4[1]), (&k[2], A4[2])], h);
        sys.rhs(t + C[3] * h, &y_stage, &mut k[3]);
        stage(
            &mut y_stage,
            y,
            &[(&k[0], A5[0]), (&k[1], A5[1]), (&k[2], A5[2]), (&k[3], A5[3])],
            h,
        );
        sys.rhs(t + C[4] * h, &y_stage, &mut k[4]);
        stage(
            &mut y_stage,
            y,
            &[(&k[0], A6[0]), (&k[1], A6[1]), (&k[2], A6[2]), (&k[3], A6[3]), (&k[4], A6[4])],
            h,
        );
        sys.rhs(t + C[5] * h, &y_stage, &mut k[5]);

        // 5th-order solution
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (kj, bj) in k.iter().take(6).zip(B.iter()) {
                if *bj != 0.0 {
                    acc += kj[i] * *bj;
                }
            }
            y_trial[i] = y[i] + acc * h;
        }
        sys.rhs(t + h, &y_trial, &mut k[6]);
        stats.rhs_evals += 6;

        // weighted rms error over the embedded pair
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = C64::new(0.0, 0.0);
            for (kj, ej) in k.iter().zip(E.iter()) {
                if *ej != 0.0 {
                    e += kj[i] * *ej;
                }
            }
            let scale = opts.atol + opts.rtol * y[i].norm().max(y_trial[i].norm());
            let r = e.norm() * h / scale;
            err_sq += r * r;
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Convergence(format!(
                "non-finite state or derivative at t = {t:e}; check the problem inputs"
            )));
        }

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_trial);
            post_step(y);
            if *y != y_trial[..] {
                // state was adjusted; FSAL derivative is stale
                sys.rhs(t, y, &mut k[6]);
                stats.rhs_evals += 1;
            }
            k.swap(0, 6);
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }

        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if (h < h_floor || t + h == t) && t < t1 {
            return Err(Error::Stiffness {
                t,
                h,
                tol: opts.rtol,
                suggested_tol: opts.rtol * 100.0,
            });
        }
    }
    Ok(stats)
}

fn stage(out: &mut [C64], y: &[C64], terms: &[(&Vec<C64>, f64)], h: f64) {
    out.copy_from_slice(y);
    for (kj, a) in terms {
        if *a != 0.0 {
            for (o, kv) in out.iter_mut().zip(kj.iter()) {
                *o += *kv * (*a * h);
            }
        }
    }
}

/// Conservative first-step guess from the initial derivative scale.
fn initial_step(_t0: f64, y: &[C64], dy: &[C64], opts: &AdaptiveOptions) -> f64 {
    let y_norm = weighted_norm(y, y, opts);
    let dy_norm = weighted_norm(dy, y, opts);
    if dy_norm <= 1e-300 {
        return 1e-6;
    }
    0.01 * (y_norm.max(1e-6) / dy_norm)
}

fn weighted_norm(v: &[C64], reference: &[C64], opts: &AdaptiveOptions) -> f64 {
    let mut s = 0.0;
    for (vi, ri) in v.iter().zip(reference.iter()) {
        let scale = opts.atol + opts.rtol * ri.norm();
        let r = vi.norm() / scale;
        s += r * r;
    }
    (s / v.len() as f64).sqrt()
}
