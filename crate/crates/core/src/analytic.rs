//! Closed-form localization quantities: mixing angle, adiabaticity margin,
//! dark-state (CPT) and adiabatic-passage (SLAP) peak widths, the
//! super-localization threshold, geometry-to-time conversion and the
//! Raman–Nath resolution bound.
//!
//! Everything here is a pure function; the heavy numerics live in
//! [`crate::master_eq`] and [`crate::gpe`].

use crate::error::{Error, Result};
use crate::pulse::{BeamGeometry, PulsePair};

/// Dark-state mixing angle `theta = atan(|omega_sw| / omega_tw)` in
/// `[0, pi/2]`.
///
/// The magnitude of the SW coupling is used: its sign flip across a node
/// flips the dark-state phase, not the population mapping.
pub fn mixing_angle(omega_sw: f64, omega_tw: f64) -> Result<f64> {
    if omega_sw == 0.0 && omega_tw == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok(omega_sw.abs().atan2(omega_tw))
}

/// Global adiabaticity margin at position `x`:
/// `(omega_sw0^2 sin^2(kx) + omega_tw0^2) (T/A)^2 - 1`.
///
/// Positive means the passage criterion is satisfied at `x`. Requires the
/// counterintuitive ordering `T = t_sw - t_tw > 0`.
pub fn adiabaticity_margin(p: &PulsePair, x: f64, a: f64) -> Result<f64> {
    let t = p.delay();
    if t <= 0.0 {
        return Err(Error::InvalidSequence(format!(
            "adiabaticity margin needs t_sw > t_tw, got T = {t:e}"
        )));
    }
    if a <= 0.0 {
        return Err(Error::Domain("adiabaticity constant must be > 0".into()));
    }
    let s = (p.k_sw * x).sin();
    let omega_sq = p.omega_sw0 * p.omega_sw0 * s * s + p.omega_tw0 * p.omega_tw0;
    Ok(omega_sq * (t / a) * (t / a) - 1.0)
}

/// Dark-state localization width `2 / (k sqrt(R))`, the FWHM of the
/// Fabry–Perot-like peaks of the pumping technique.
pub fn fwhm_cpt(k: f64, intensity_ratio: f64) -> Result<f64> {
    if k <= 0.0 || intensity_ratio <= 0.0 {
        return Err(Error::Domain(format!(
            "fwhm_cpt needs k > 0 and R > 0, got k = {k:e}, R = {intensity_ratio:e}"
        )));
    }
    Ok(2.0 / (k * intensity_ratio.sqrt()))
}

/// Adiabatic-passage localization width
/// `fwhm_cpt(k, R) * (1/2) sqrt((A / (T omega_tw0))^2 - 1)`.
///
/// Only valid for `A > T omega_tw0`; beyond that the width is set by
/// physics outside this expression and must come from the simulation.
pub fn fwhm_slap(k: f64, intensity_ratio: f64, a: f64, t: f64, omega_tw0: f64) -> Result<f64> {
    let cpt = fwhm_cpt(k, intensity_ratio)?;
    let t_omega = t * omega_tw0;
    if t_omega <= 0.0 {
        return Err(Error::Domain(format!(
            "fwhm_slap needs T omega_tw0 > 0, got {t_omega:e}"
        )));
    }
    if a <= t_omega {
        return Err(Error::OutOfValidity(format!(
            "fwhm_slap assumes A > T omega_tw0, got A = {a:e}, T omega_tw0 = {t_omega:e}"
        )));
    }
    let ratio = a / t_omega;
    Ok(cpt * 0.5 * (ratio * ratio - 1.0).sqrt())
}

/// Pulse-area threshold `A / sqrt(5)`: the passage width drops below the
/// dark-state width exactly when `T omega_tw0` exceeds this.
pub fn super_localization_threshold(a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::Domain("adiabaticity constant must be > 0".into()));
    }
    Ok(a / 5.0_f64.sqrt())
}

/// Characteristic passage time `T = d / v_z` of an atomic beam crossing
/// two displaced light sheets.
pub fn stirap_time(g: &BeamGeometry) -> Result<f64> {
    if g.v_z <= 0.0 {
        return Err(Error::Domain(format!(
            "stirap_time needs v_z > 0, got {:e}",
            g.v_z
        )));
    }
    Ok(g.d / g.v_z)
}

/// Raman–Nath resolution check: the transverse thermal drift during the
/// passage must stay well below the localized width,
/// `T dv_x * margin < dx_slap`. The multiplicative `margin` (> 1)
/// operationalizes "much less than"; 10 is the default choice.
pub fn raman_nath_resolution_ok(
    g: &BeamGeometry,
    t: f64,
    dx_slap: f64,
    margin: f64,
) -> Result<bool> {
    if dx_slap <= 0.0 {
        return Err(Error::Domain("dx_slap must be > 0".into()));
    }
    if margin <= 1.0 {
        return Err(Error::Domain("margin must be > 1".into()));
    }
    Ok(t * g.dv_x * margin < dx_slap)
}

/// Default adiabaticity constant for optimal Gaussian pulse profiles and
/// overlap; configurable wherever it enters.
pub const DEFAULT_ADIABATICITY_CONSTANT: f64 = 10.0;

/// Default "much less than" margin for the Raman–Nath check.
pub const DEFAULT_RAMAN_NATH_MARGIN: f64 = 10.0;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const FRAC_PI_2: f64 = PI / 2.0;

    fn fig2_pulse(omega_tw0: f64) -> PulsePair {
        // gamma = 1 units: R = 100, sigma = 5, T = 10
        PulsePair {
            omega_tw0,
            omega_sw0: 10.0 * omega_tw0,
            sigma_tw: 5.0,
            sigma_sw: 5.0,
            t_tw: 0.0,
            t_sw: 10.0,
            delta_tw: 0.0,
            delta_sw: 0.0,
            k_sw: 2.0 * PI,
        }
    }

    #[test]
    fn mixing_angle_limits() {
        assert_relative_eq!(mixing_angle(0.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(mixing_angle(2.0, 0.0).unwrap(), FRAC_PI_2);
        assert_relative_eq!(mixing_angle(1.5, 1.5).unwrap(), PI / 4.0);
        assert!(matches!(mixing_angle(0.0, 0.0), Err(Error::UndefinedAngle)));
    }

    #[test]
    fn margin_boundary_and_antinode() {
        // omega_sw0 = 0, omega_tw0 = A / T: exactly marginal
        let mut p = fig2_pulse(1.0);
        p.omega_sw0 = 0.0;
        p.omega_tw0 = 10.0 / p.delay();
        assert_relative_eq!(adiabaticity_margin(&p, 0.123, 10.0).unwrap(), 0.0, epsilon = 1e-12);

        // omega_sw0 = 10 omega_tw0 at an anti-node, omega_tw0 = A / T
        let mut p = fig2_pulse(1.0);
        p.omega_tw0 = 10.0 / p.delay();
        p.omega_sw0 = 10.0 * p.omega_tw0;
        let anti = PI / (2.0 * p.k_sw);
        assert_relative_eq!(
            adiabaticity_margin(&p, anti, 10.0).unwrap(),
            100.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn margin_at_node_marginal_at_the_threshold_amplitude() {
        // The quoted 0.45 gamma threshold is the super-localization
        // boundary: at a node the margin against A / sqrt(5) sits at ~0.
        let p = fig2_pulse(0.45);
        let a_node = super_localization_threshold(10.0).unwrap();
        let m = adiabaticity_margin(&p, 0.0, a_node).unwrap();
        assert!(m.abs() < 3e-2, "margin at node = {m}");
    }

    #[test]
    fn margin_requires_positive_delay() {
        let mut p = fig2_pulse(1.0);
        p.t_sw = p.t_tw;
        assert!(matches!(
            adiabaticity_margin(&p, 0.0, 10.0),
            Err(Error::InvalidSequence(_))
        ));
    }

    #[test]
    fn cpt_width_values() {
        let lambda = 1.0;
        let k = 2.0 * PI / lambda;
        assert_relative_eq!(fwhm_cpt(k, 100.0).unwrap(), 0.2 / (2.0 * PI), max_relative = 1e-15);
        // 0.0318 lambda
        assert!((fwhm_cpt(k, 100.0).unwrap() / lambda - 0.0318).abs() < 1e-4);
        assert_relative_eq!(fwhm_cpt(k, 1.0).unwrap(), lambda / PI, max_relative = 1e-15);
        assert_relative_eq!(fwhm_cpt(k, 400.0).unwrap() / lambda, 0.0159, epsilon = 2e-5);
        assert!(fwhm_cpt(-1.0, 4.0).is_err());
        assert!(fwhm_cpt(1.0, 0.0).is_err());
    }

    #[test]
    fn slap_width_boundary_cases() {
        let k = 2.0 * PI;
        let a = 10.0;
        // T omega = A / sqrt(5): widths coincide
        let t_omega = a / 5.0_f64.sqrt();
        let w = fwhm_slap(k, 100.0, a, 1.0, t_omega).unwrap();
        assert_relative_eq!(w, fwhm_cpt(k, 100.0).unwrap(), max_relative = 1e-12);
        // T omega -> A^-: width vanishes
        let w = fwhm_slap(k, 100.0, a, 1.0, a * (1.0 - 1e-12)).unwrap();
        assert!(w < 1e-5 * fwhm_cpt(k, 100.0).unwrap());
        // beyond validity: error
        assert!(matches!(
            fwhm_slap(k, 100.0, a, 1.0, a),
            Err(Error::OutOfValidity(_))
        ));
    }

    #[test]
    fn slap_width_fig2_point() {
        // A = 10, T = 10, omega_tw0 = 0.9: bracket = 0.5 sqrt(100/81 - 1)
        let k = 2.0 * PI;
        let w = fwhm_slap(k, 100.0, 10.0, 10.0, 0.9).unwrap();
        let cpt = fwhm_cpt(k, 100.0).unwrap();
        assert_relative_eq!(w / cpt, 0.242_161, epsilon = 1e-6);
        assert_relative_eq!(w, 7.708e-3, max_relative = 1e-3);
    }

    #[test]
    fn threshold_values() {
        assert_relative_eq!(super_localization_threshold(10.0).unwrap(), 4.4721, epsilon = 1e-4);
        assert_relative_eq!(super_localization_threshold(5.0_f64.sqrt()).unwrap(), 1.0);
        // T omega_tw0 > 4.5 at gamma T = 10 maps to omega_tw0 > ~0.45 gamma
        let thr = super_localization_threshold(10.0).unwrap() / 10.0;
        assert!((thr - 0.45).abs() < 5e-3);
    }

    #[test]
    fn stirap_time_values() {
        let g = BeamGeometry { v_z: 500.0, d: 100e-6, dv_x: 0.0 };
        assert_relative_eq!(stirap_time(&g).unwrap(), 200e-9, max_relative = 1e-12);
        let g = BeamGeometry { v_z: 500.0, d: 0.0, dv_x: 0.0 };
        assert_eq!(stirap_time(&g).unwrap(), 0.0);
        let g = BeamGeometry { v_z: 500.0, d: 2e-6, dv_x: 0.0 };
        assert_relative_eq!(stirap_time(&g).unwrap(), 4e-9, max_relative = 1e-12);
        let g = BeamGeometry { v_z: 0.0, d: 1.0, dv_x: 0.0 };
        assert!(stirap_time(&g).is_err());
    }

    #[test]
    fn raman_nath_check() {
        // v_z = 500 m/s, dv_x = 5 cm/s, d = 2 um: T dv_x = 0.2 nm
        let g = BeamGeometry { v_z: 500.0, d: 2e-6, dv_x: 0.05 };
        let t = stirap_time(&g).unwrap();
        assert!(raman_nath_resolution_ok(&g, t, 1e-9, 2.0).unwrap());
        let still = BeamGeometry { dv_x: 0.0, ..g };
        assert!(raman_nath_resolution_ok(&still, t, 1e-12, 100.0).unwrap());
        let hot = BeamGeometry { dv_x: 1e3, ..g };
        assert!(!raman_nath_resolution_ok(&hot, t, 1e-9, 2.0).unwrap());
        assert!(raman_nath_resolution_ok(&g, t, 0.0, 2.0).is_err());
        assert!(raman_nath_resolution_ok(&g, t, 1e-9, 1.0).is_err());
    }

    proptest! {
        // Super-localization equivalence: width ordering flips exactly at
        // T omega = A / sqrt(5), on the validity domain T omega < A.
        #[test]
        fn slap_below_cpt_iff_above_threshold(
            k in 1e3f64..1e8,
            r in 0.1f64..1e4,
            a in 1.0f64..30.0,
            frac in 1e-3f64..0.999,
        ) {
            let t_omega = frac * a; // inside the validity domain
            let slap = fwhm_slap(k, r, a, 1.0, t_omega).unwrap();
            let cpt = fwhm_cpt(k, r).unwrap();
            let threshold = super_localization_threshold(a).unwrap();
            prop_assert_eq!(slap < cpt, t_omega > threshold);
        }

        #[test]
        fn cpt_width_monotone(
            k in 1e3f64..1e8,
            r in 0.1f64..1e4,
            up in 1.01f64..10.0,
        ) {
            let w = fwhm_cpt(k, r).unwrap();
            prop_assert!(fwhm_cpt(k * up, r).unwrap() < w);
            prop_assert!(fwhm_cpt(k, r * up).unwrap() < w);
        }

        #[test]
        fn slap_width_monotone_in_pulse_area(
            a in 1.0f64..30.0,
            frac in 1e-3f64..0.99,
            up in 1.001f64..1.5,
        ) {
            let t_omega = frac * a;
            prop_assume!(t_omega * up < a);
            let w0 = fwhm_slap(1.0, 100.0, a, 1.0, t_omega).unwrap();
            let w1 = fwhm_slap(1.0, 100.0, a, 1.0, t_omega * up).unwrap();
            prop_assert!(w1 < w0);
        }

        #[test]
        fn mixing_angle_monotone_in_sw(
            tw in 1e-3f64..1e3,
            sw in 0.0f64..1e3,
            up in 1e-3f64..1e3,
        ) {
            let t0 = mixing_angle(sw, tw).unwrap();
            let t1 = mixing_angle(sw + up, tw).unwrap();
            prop_assert!(t1 > t0);
            prop_assert!((0.0..=FRAC_PI_2).contains(&t1));
        }

        #[test]
        fn margin_at_node_reduces_to_tw_term(
            tw in 1e-3f64..1e2,
            t in 1e-3f64..1e2,
            a in 1.0f64..30.0,
        ) {
            let p = PulsePair {
                omega_tw0: tw,
                omega_sw0: 17.0 * tw,
                sigma_tw: 1.0,
                sigma_sw: 1.0,
                t_tw: 0.0,
                t_sw: t,
                delta_tw: 0.0,
                delta_sw: 0.0,
                k_sw: 2.0 * PI,
            };
            let m = adiabaticity_margin(&p, 0.0, a).unwrap();
            let expect = (tw * t / a).powi(2) - 1.0;
            prop_assert!((m - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }
}
