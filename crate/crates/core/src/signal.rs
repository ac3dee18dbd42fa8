//! Shared 1-D signal helpers: boxcar smoothing, half-maximum widths and
//! one-sided DFT spectra of uniformly sampled series.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft;
use crate::math;
use crate::model::Complex;

/// Window placement for [`moving_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Mean of the current sample and the `n - 1` before it.
    #[default]
    Trailing,
    /// Window centred on the sample (for even `n` it reaches one further back).
    Centered,
}

/// Boxcar mean with edge truncation: near the ends the window shrinks to the
/// samples that exist.
pub fn moving_average(values: &[f64], n: usize, align: Alignment) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "window must be >= 1",
        });
    }
    if n > values.len() {
        return Err(Error::WindowTooLong {
            window: n,
            len: values.len(),
        });
    }
    let len = values.len();
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in values {
        acc += v;
        prefix.push(acc);
    }
    let (back, fwd) = match align {
        Alignment::Trailing => (n - 1, 0),
        Alignment::Centered => (n / 2, (n - 1) / 2),
    };
    Ok((0..len)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(len - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect())
}

/// How to choose the half-maximum crossings around the global peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossingRule {
    /// First sample below half on each side of the peak (main lobe).
    #[default]
    Innermost,
    /// Last transition through half on each side: the outer envelope, robust
    /// to noise dips inside a plateau.
    Outermost,
}

/// Half-maximum crossing positions in fractional sample indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfMax {
    pub peak_index: usize,
    pub left: f64,
    pub right: f64,
}

impl HalfMax {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

/// Locate the half-maximum crossings of `values` above `baseline`.
///
/// `peak_level`, when given, replaces the sample maximum as the reference
/// height (the peak index is still the sample maximum). Crossings are linearly
/// interpolated between adjacent samples.
pub fn half_max(
    values: &[f64],
    baseline: f64,
    peak_level: Option<f64>,
    rule: CrossingRule,
) -> Result<HalfMax> {
    let (peak_index, &max) = values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, v)| match best {
            Some((_, b)) if *b >= *v => best,
            _ => Some((i, v)),
        })
        .ok_or(Error::NoPeak)?;
    if !max.is_finite() {
        return Err(Error::NonFinite("half-maximum search"));
    }
    let top = peak_level.unwrap_or(max);
    if top <= baseline || values.iter().all(|&v| v == max) {
        return Err(Error::NoPeak);
    }
    let half = baseline + 0.5 * (top - baseline);
    let interp = |i: usize, j: usize| {
        // crossing between samples i (above) and j (below), as index
        let (a, b) = (values[i], values[j]);
        let frac = if a == b { 0.0 } else { (a - half) / (a - b) };
        i as f64 + frac * (j as f64 - i as f64)
    };
    let (left, right) = match rule {
        CrossingRule::Innermost => {
            let l = (0..peak_index)
                .rev()
                .find(|&i| values[i] < half)
                .ok_or(Error::EdgePeak)?;
            let r = (peak_index + 1..values.len())
                .find(|&i| values[i] < half)
                .ok_or(Error::EdgePeak)?;
            (interp(l + 1, l), interp(r - 1, r))
        }
        CrossingRule::Outermost => {
            let l = (0..peak_index)
                .find(|&i| values[i] >= half)
                .unwrap_or(peak_index);
            if l == 0 && values[0] >= half {
                return Err(Error::EdgePeak);
            }
            let r = (peak_index..values.len())
                .rev()
                .find(|&i| values[i] >= half)
                .unwrap_or(peak_index);
            if r + 1 >= values.len() {
                return Err(Error::EdgePeak);
            }
            (interp(l, l - 1), interp(r, r + 1))
        }
    };
    Ok(HalfMax {
        peak_index,
        left,
        right,
    })
}

/// FWHM in the units of `step`.
pub fn fwhm(values: &[f64], step: f64, baseline: f64, rule: CrossingRule) -> Result<f64> {
    Ok(half_max(values, baseline, None, rule)?.width() * step)
}

/// What is transformed by [`one_sided_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    /// `|DFT{x}|` of the samples themselves.
    Magnitude,
    /// `|DFT{sqrt(max(x, 0))}|^2`: power spectrum of the field amplitude whose
    /// modulus squared is the sampled intensity-like series.
    AmplitudePower,
}

/// One-sided DFT spectrum (bins `0..=N/2`) of `values` zero-padded to at least
/// `min_len` points. Returns `(frequency_step, spectrum)`, frequency step in
/// the reciprocal units of `step`.
pub fn one_sided_spectrum(
    values: &[f64],
    step: f64,
    mode: SpectrumMode,
    min_len: usize,
) -> (f64, Vec<f64>) {
    let n = fft::padded_len(values.len().max(min_len));
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (b, &v) in buf.iter_mut().zip(values) {
        let x = match mode {
            SpectrumMode::Magnitude => v,
            SpectrumMode::AmplitudePower => math::sqrt(v.max(0.0)),
        };
        *b = Complex::new(x, 0.0);
    }
    fft::fft(&mut buf);
    let spec = buf[..=n / 2]
        .iter()
        .map(|c| match mode {
            SpectrumMode::Magnitude => c.norm(),
            SpectrumMode::AmplitudePower => c.norm_sqr(),
        })
        .collect();
    (1.0 / (n as f64 * step), spec)
}

/// Full width at half maximum of a one-sided spectrum symmetric about zero
/// frequency and peaked there: twice the first half-crossing frequency.
pub fn one_sided_fwhm(spectrum: &[f64], df: f64) -> Result<f64> {
    let peak = *spectrum.first().ok_or(Error::NoPeak)?;
    if !(peak > 0.0) {
        return Err(Error::NoPeak);
    }
    let half = 0.5 * peak;
    let k = spectrum
        .iter()
        .position(|&v| v < half)
        .ok_or(Error::EdgePeak)?;
    let (a, b) = (spectrum[k - 1], spectrum[k]);
    let f = (k - 1) as f64 + (a - half) / (a - b);
    Ok(2.0 * f * df)
}

/// Indices of local maxima of at least `min_height` that are followed by a
/// drop of at least `hysteresis` before the series rises again.
///
/// Rises and falls smaller than `hysteresis` are ignored, so ripple and
/// sampling noise do not split one lobe into several.
pub fn prominent_maxima(values: &[f64], min_height: f64, hysteresis: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let Some(&first) = values.first() else {
        return out;
    };
    let mut rising = true;
    let (mut best, mut best_i) = (first, 0);
    let mut low = first;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if rising {
            if v > best {
                best = v;
                best_i = i;
            } else if v < best - hysteresis {
                if best >= min_height {
                    out.push(best_i);
                }
                rising = false;
                low = v;
            }
        } else if v < low {
            low = v;
        } else if v > low + hysteresis {
            rising = true;
            best = v;
            best_i = i;
        }
    }
    out
}
