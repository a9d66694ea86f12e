//! Full-width-at-half-maximum extraction from sampled profiles.
//!
//! The half-maximum level is referenced to a baseline (the floor of the
//! peak's surroundings), and the crossings are located by linear
//! interpolation between grid samples.

use crate::error::{Error, Result};

/// Result of a peak-width measurement.
#[derive(Debug, Clone, Copy)]
pub struct PeakWidth {
    pub fwhm: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub peak: f64,
    pub baseline: f64,
}

impl PeakWidth {
    pub fn contrast(&self) -> f64 {
        self.peak - self.baseline
    }
}

/// Measure the width of the peak around sample `peak_idx`.
///
/// `baseline` is supplied by the caller (e.g. the minimum over the
/// adjacent half-periods); the half-maximum level is
/// `baseline + (peak - baseline) / 2`. Fails with a no-peak error when
/// the contrast is below `min_contrast`, or when a half-maximum crossing
/// lies outside the sampled range.
pub fn peak_width(
    x: &[f64],
    y: &[f64],
    peak_idx: usize,
    baseline: f64,
    min_contrast: f64,
) -> Result<PeakWidth> {
    assert_eq!(x.len(), y.len());
    assert!(peak_idx < y.len());
    let peak = y[peak_idx];
    let contrast = peak - baseline;
    if contrast < min_contrast {
        return Err(Error::NoPeak { contrast, min_contrast });
    }
    let half = baseline + 0.5 * contrast;

    let x_right = cross_down(x, y, peak_idx, half, true)?;
    let x_left = cross_down(x, y, peak_idx, half, false)?;
    Ok(PeakWidth { fwhm: x_right - x_left, x_left, x_right, peak, baseline })
}

/// Walk outward from `start` until `y` drops through `level`; interpolate
/// the crossing position.
fn cross_down(x: &[f64], y: &[f64], start: usize, level: f64, rightward: bool) -> Result<f64> {
    let n = y.len();
    let mut i = start;
    loop {
        let next = if rightward { i + 1 } else { i.wrapping_sub(1) };
        if next >= n {
            return Err(Error::NoPeak { contrast: y[start] - level, min_contrast: 0.0 });
        }
        if y[next] <= level {
            let f = (y[i] - level) / (y[i] - y[next]);
            return Ok(x[i] + f * (x[next] - x[i]));
        }
        i = next;
    }
}
