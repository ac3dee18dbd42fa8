//! Histogram analysis: exposure correction, baseline, SBR and correlation
//! metrics, pair-rate recovery, widths and brightness.

use alloc::vec::Vec;

use rand_distr::{Distribution, Poisson};

use crate::error::{ensure, Error, Result};
use crate::math;
use crate::signal::{self, Alignment, SpectrumMode};
use crate::sim::{trial_rng, CoincidenceHistogram, DetectorChain};
use crate::wavepacket::{self, FrequencyAxis, Spectrum, SpectrumKind, WavePacket};

pub use crate::signal::moving_average;

/// Tail share used for the baseline unless overridden.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// Counts divided by the share of triggers that could see a stop at that
/// delay, `1 - tau / window` at the bin centre.
pub fn exposure_corrected(hist: &CoincidenceHistogram) -> Vec<f64> {
    hist.counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / exposure(hist, k))
        .collect()
}

fn exposure(hist: &CoincidenceHistogram, k: usize) -> f64 {
    (1.0 - hist.bin_center(k) / hist.window).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    /// Counts per bin.
    pub value: f64,
    /// Standard error of the mean.
    pub sigma: f64,
    /// Mean over half the tail, used for the stability check.
    pub half_tail_value: f64,
    /// Half-tail mean within 10% of the full-tail mean.
    pub stable: bool,
    /// First bin of the tail region.
    pub tail_start: usize,
}

/// Mean of the last `tail_fraction` of the bins.
pub fn baseline_estimate(values: &[f64], tail_fraction: f64) -> Result<Baseline> {
    ensure(
        tail_fraction > 0.0 && tail_fraction <= 0.5,
        "tail_fraction",
        "must be in (0, 0.5]",
    )?;
    ensure(values.len() >= 2, "values", "need at least two bins")?;
    let n = values.len();
    let tail_len = |f: f64| ((math::ceil(f * n as f64)) as usize).clamp(1, n - 1);
    let mean = |len: usize| values[n - len..].iter().sum::<f64>() / len as f64;
    let len = tail_len(tail_fraction);
    let value = mean(len);
    let half_tail_value = mean(tail_len(0.5 * tail_fraction));
    let var = values[n - len..]
        .iter()
        .map(|v| (v - value) * (v - value))
        .sum::<f64>()
        / (len.max(2) - 1) as f64;
    let stable = if value == 0.0 {
        half_tail_value == 0.0
    } else {
        (half_tail_value - value).abs() <= 0.1 * value.abs()
    };
    Ok(Baseline {
        value,
        sigma: math::sqrt(var / len as f64),
        half_tail_value,
        stable,
        tail_start: n - len,
    })
}

/// Signal-to-background ratio; unbounded when the baseline is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sbr {
    Finite(f64),
    Unbounded,
}

impl Sbr {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Sbr::Finite(v) => Some(v),
            Sbr::Unbounded => None,
        }
    }
}

/// `(peak - baseline) / baseline`, clamped at zero.
pub fn sbr(peak: f64, baseline: f64) -> Sbr {
    if baseline > 0.0 {
        Sbr::Finite(((peak - baseline) / baseline).max(0.0))
    } else {
        Sbr::Unbounded
    }
}

/// `g2_s,as(0) = SBR + 1`.
pub fn g2_cross_zero(sbr_value: f64) -> Result<f64> {
    ensure(sbr_value >= 0.0, "sbr", "must be >= 0")?;
    Ok(sbr_value + 1.0)
}

/// `g2_cross^2 / (g2_ss g2_asas)`; above 1 the pair is nonclassical.
pub fn cauchy_schwarz_factor(g2_cross: f64, g2_ss: f64, g2_asas: f64) -> Result<f64> {
    ensure(
        g2_cross >= 0.0 && g2_ss >= 0.0 && g2_asas >= 0.0,
        "g2",
        "must be >= 0",
    )?;
    let den = g2_ss * g2_asas;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("g2_ss * g2_asas"));
    }
    Ok(g2_cross * g2_cross / den)
}

/// Generated pairs/s from a true-coincidence count.
pub fn detected_to_generated_rate(
    true_coincidences: f64,
    chain: &DetectorChain,
    n_trials: u64,
    window: f64,
) -> Result<f64> {
    let den = chain.eta_s * chain.eta_as * n_trials as f64 * window;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator("eta_s * eta_as * n_trials * window"));
    }
    Ok(true_coincidences / den)
}

/// Pairs/(s mW) from pairs/s and pump power in W.
pub fn brightness(rate: f64, pump_power: f64) -> Result<f64> {
    ensure(pump_power > 0.0, "pump_power", "must be > 0")?;
    Ok(rate / (pump_power * 1e3))
}

/// Pairs/(s mW MHz) from pairs/(s mW) and a linewidth in Hz.
pub fn spectral_brightness(brightness: f64, linewidth: f64) -> Result<f64> {
    ensure(linewidth > 0.0, "linewidth", "must be > 0")?;
    Ok(brightness / (linewidth * 1e-6))
}

/// One-sided `|DFT|` of baseline-removed counts, frequency in Hz.
pub fn dft_spectrum(values: &[f64], bin_width: f64) -> Spectrum {
    let (df, v) = signal::one_sided_spectrum(values, bin_width, SpectrumMode::Magnitude, 0);
    Spectrum {
        kind: SpectrumKind::WavepacketTransform,
        axis: FrequencyAxis::Hertz,
        start: 0.0,
        step: df,
        values: v,
    }
}

/// Model packet scaled onto a histogram: `counts ~ amplitude * T + baseline`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateFit {
    pub amplitude: f64,
    pub baseline: f64,
    /// Template averaged over the histogram bins.
    pub template: Vec<f64>,
    /// `amplitude * max(smoothed template)`: the fitted peak above baseline.
    pub peak_above_baseline: f64,
}

/// Linear least squares for amplitude and baseline against a fixed template.
pub fn template_fit(values: &[f64], template: &[f64], smoothing: usize) -> Result<TemplateFit> {
    ensure(
        values.len() == template.len(),
        "template",
        "length must match histogram",
    )?;
    let n = values.len() as f64;
    let (sx, sy) = (template.iter().sum::<f64>(), values.iter().sum::<f64>());
    let sxx: f64 = template.iter().map(|x| x * x).sum();
    let sxy: f64 = template.iter().zip(values).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if !(det.abs() > 0.0) {
        return Err(Error::ZeroDenominator("template variance"));
    }
    let amplitude = (n * sxy - sx * sy) / det;
    let baseline = (sy - amplitude * sx) / n;
    let smooth = moving_average(template, smoothing.min(template.len()), Alignment::Trailing)?;
    let peak = smooth.iter().copied().fold(0.0, f64::max);
    Ok(TemplateFit {
        amplitude,
        baseline,
        template: template.to_vec(),
        peak_above_baseline: amplitude * peak,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub smoothing: usize,
    pub alignment: Alignment,
    pub tail_fraction: f64,
    /// Autocorrelations assumed for the Cauchy-Schwarz test.
    pub g2_ss: f64,
    pub g2_asas: f64,
    pub chain: DetectorChain,
    /// Pump power in W, for brightness values.
    pub pump_power: Option<f64>,
    pub bootstrap_samples: usize,
    pub bootstrap_seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            smoothing: wavepacket::SMOOTHING_POINTS,
            alignment: Alignment::Trailing,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            g2_ss: 2.0,
            g2_asas: 2.0,
            chain: DetectorChain::default(),
            pump_power: None,
            bootstrap_samples: 200,
            bootstrap_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub bin_width: f64,
    pub n_bins: usize,
    pub baseline: Baseline,
    /// Data-derived temporal FWHM (s) and its bootstrap standard deviation.
    pub temporal_fwhm: f64,
    pub temporal_fwhm_sigma: f64,
    /// Width of the model curve at the histogram resolution.
    pub model_temporal_fwhm: Option<f64>,
    /// Data-derived spectral FWHM (Hz).
    pub spectral_fwhm: f64,
    pub model_spectral_fwhm: Option<f64>,
    /// From the template fit when a model is supplied, else the smoothed peak.
    pub sbr: Sbr,
    pub sbr_smoothed: Sbr,
    pub sbr_raw: Sbr,
    pub g2_cross_zero: Option<f64>,
    pub cs_violation_factor: Option<f64>,
    pub true_coincidences: f64,
    pub true_coincidences_sigma: f64,
    pub generated_pair_rate: f64,
    pub generated_pair_rate_sigma: f64,
    /// Pairs/(s mW).
    pub brightness: Option<f64>,
    /// Pairs/(s mW MHz), using the model linewidth when available.
    pub spectral_brightness: Option<f64>,
    pub template: Option<TemplateFit>,
}

/// Half-maximum crossings of a noisy packet, as fractional indices.
///
/// Each side is the changepoint that best splits the samples between the
/// peak and the series end into "above half" and "below half" (fewest
/// misclassified samples); ties go to the point nearest the peak. Isolated
/// noise excursions on either side cost the same wherever the split falls,
/// so they do not drag the crossing outward or inward.
pub(crate) fn changepoint_crossings(values: &[f64], half: f64) -> Result<(f64, f64)> {
    let peak = (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .ok_or(Error::NoPeak)?;
    if !(values[peak] > half) {
        return Err(Error::NoPeak);
    }
    let above = |i: usize| values[i] >= half;
    let locate = |inner: usize, outer: usize| -> f64 {
        // boundary between samples `inner` (above side) and `outer`
        let (a, b) = (values[inner], values[outer]);
        if a >= half && b < half && a != b {
            let f = (a - half) / (a - b);
            inner as f64 + f * (outer as f64 - inner as f64)
        } else {
            0.5 * (inner as f64 + outer as f64)
        }
    };
    // right: split after index j (peak <= j < len - 1)
    let n = values.len();
    if peak + 1 >= n || peak == 0 {
        return Err(Error::EdgePeak);
    }
    let mut cost: i64 = (peak + 1..n).filter(|&i| above(i)).count() as i64;
    let (mut best, mut best_j) = (cost, peak);
    for j in peak + 1..n - 1 {
        cost += if above(j) { -1 } else { 1 };
        if cost < best {
            best = cost;
            best_j = j;
        }
    }
    let right = locate(best_j, best_j + 1);
    let mut cost: i64 = (0..peak).filter(|&i| above(i)).count() as i64;
    let (mut best, mut best_j) = (cost, peak);
    for j in (1..peak).rev() {
        cost += if above(j) { -1 } else { 1 };
        if cost < best {
            best = cost;
            best_j = j;
        }
    }
    let left = locate(best_j, best_j - 1);
    Ok((left, right))
}

/// Baseline-removed, smoothed counts with `smoothing` empty bins in front so
/// the leading edge has a crossing.
fn smoothed_signal(corrected: &[f64], baseline: f64, opts: &AnalysisOptions) -> Result<Vec<f64>> {
    let pad = opts.smoothing;
    let mut v = Vec::with_capacity(corrected.len() + pad);
    v.resize(pad, 0.0);
    v.extend(corrected.iter().map(|c| c - baseline));
    moving_average(&v, opts.smoothing, opts.alignment)
}

fn data_fwhm(
    corrected: &[f64],
    baseline: f64,
    peak_above: Option<f64>,
    opts: &AnalysisOptions,
    bin_width: f64,
) -> Result<f64> {
    let s = smoothed_signal(corrected, baseline, opts)?;
    let top = match peak_above {
        Some(p) => p,
        None => s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let (l, r) = changepoint_crossings(&s, 0.5 * top)?;
    Ok((r - l) * bin_width)
}

/// Level, relative to the peak, that bounds the packet for the spectral width.
pub const SUPPORT_LEVEL: f64 = 0.1;

/// Spectral FWHM of baseline-removed counts over the packet support.
///
/// The support ends where the smoothed signal settles below
/// [`SUPPORT_LEVEL`] of its peak; bins past it are left out so that the
/// square root of pure background noise does not add a narrow
/// low-frequency pedestal.
fn data_spectral_fwhm(
    corrected: &[f64],
    baseline: f64,
    peak_above: Option<f64>,
    opts: &AnalysisOptions,
    bin_width: f64,
) -> Result<f64> {
    let s = smoothed_signal(corrected, baseline, opts)?;
    let top = match peak_above {
        Some(p) => p,
        None => s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let (_, right) = changepoint_crossings(&s, SUPPORT_LEVEL * top)?;
    let end = (math::ceil(right) as usize)
        .saturating_sub(opts.smoothing)
        .clamp(1, corrected.len());
    let values = corrected[..end].iter().map(|c| c - baseline).collect();
    wavepacket::spectral_fwhm_of_wavepacket(&WavePacket {
        start: 0.0,
        bin_width,
        values,
        model: None,
    })
}

/// Full analysis chain. `model`, when given, is the model packet (any
/// native resolution) used as the fit template and for the model widths.
pub fn analyze(
    hist: &CoincidenceHistogram,
    model: Option<&WavePacket>,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    hist.validate()?;
    ensure(opts.smoothing >= 1, "smoothing", "must be >= 1")?;
    if hist.total() == 0 {
        return Err(Error::NoPeak);
    }
    let bw = hist.bin_width;
    let n = hist.len();
    let corrected = exposure_corrected(hist);
    let baseline = baseline_estimate(&corrected, opts.tail_fraction)?;
    let b = baseline.value;

    let smooth = moving_average(&corrected, opts.smoothing.min(n), opts.alignment)?;
    let smooth_peak = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw_peak = corrected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sbr_smoothed = sbr(smooth_peak, b);
    let sbr_raw = sbr(raw_peak, b);

    let template = match model {
        Some(wp) => {
            let t = wp.rebin_range(bw, 0, n).values;
            Some(template_fit(&corrected, &t, opts.smoothing)?)
        }
        None => None,
    };
    let sbr_main = match &template {
        Some(t) => sbr(b + t.peak_above_baseline, b),
        None => sbr_smoothed,
    };
    let peak_above = template.as_ref().map(|t| t.peak_above_baseline);

    let temporal_fwhm = data_fwhm(&corrected, b, peak_above, opts, bw)?;
    let temporal_fwhm_sigma = bootstrap_fwhm_sigma(hist, model, opts)?;

    // packet support: everything before the baseline tail
    let support = &corrected[..baseline.tail_start];
    let true_coincidences: f64 = support.iter().map(|c| c - b).sum();
    let var_counts: f64 = hist.counts[..baseline.tail_start]
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / (exposure(hist, k) * exposure(hist, k)))
        .sum();
    let m = support.len() as f64;
    let true_coincidences_sigma = math::sqrt(var_counts + m * m * baseline.sigma * baseline.sigma);
    let rate_scale = detected_to_generated_rate(1.0, &opts.chain, hist.n_trials, hist.window)?;

    let spectral_fwhm = data_spectral_fwhm(&corrected, b, peak_above, opts, bw)?;

    let (model_temporal_fwhm, model_spectral_fwhm) = match model {
        Some(wp) => (
            Some(wavepacket::temporal_fwhm_at_resolution(wp, bw)?),
            Some(wavepacket::spectral_fwhm_of_wavepacket(wp)?),
        ),
        None => (None, None),
    };

    let g2 = sbr_main.value().map(g2_cross_zero).transpose()?;
    let cs = g2
        .map(|g| cauchy_schwarz_factor(g, opts.g2_ss, opts.g2_asas))
        .transpose()?;
    let generated_pair_rate = true_coincidences * rate_scale;
    let bright = opts
        .pump_power
        .map(|p| brightness(generated_pair_rate, p))
        .transpose()?;
    let linewidth = model_spectral_fwhm.unwrap_or(spectral_fwhm);
    let spectral = bright
        .map(|br| spectral_brightness(br, linewidth))
        .transpose()?;

    Ok(AnalysisReport {
        bin_width: bw,
        n_bins: n,
        baseline,
        temporal_fwhm,
        temporal_fwhm_sigma,
        model_temporal_fwhm,
        spectral_fwhm,
        model_spectral_fwhm,
        sbr: sbr_main,
        sbr_smoothed,
        sbr_raw,
        g2_cross_zero: g2,
        cs_violation_factor: cs,
        true_coincidences,
        true_coincidences_sigma,
        generated_pair_rate,
        generated_pair_rate_sigma: true_coincidences_sigma * rate_scale,
        brightness: bright,
        spectral_brightness: spectral,
        template,
    })
}

/// Standard deviation of the data-derived FWHM over Poisson resamplings of
/// the counts. Zero when fewer than two resamplings yield a width.
pub fn bootstrap_fwhm_sigma(
    hist: &CoincidenceHistogram,
    model: Option<&WavePacket>,
    opts: &AnalysisOptions,
) -> Result<f64> {
    let n = hist.len();
    let template = model.map(|wp| wp.rebin_range(hist.bin_width, 0, n).values);
    let mut widths = Vec::with_capacity(opts.bootstrap_samples);
    let mut resampled = hist.clone();
    for rep in 0..opts.bootstrap_samples {
        let mut rng = trial_rng(opts.bootstrap_seed, rep as u64);
        for (r, &c) in resampled.counts.iter_mut().zip(&hist.counts) {
            *r = if c == 0 {
                0
            } else {
                Poisson::new(c as f64).map_or(c, |p| p.sample(&mut rng) as u64)
            };
        }
        let corrected = exposure_corrected(&resampled);
        let b = baseline_estimate(&corrected, opts.tail_fraction)?.value;
        let peak = match &template {
            Some(t) => Some(template_fit(&corrected, t, opts.smoothing)?.peak_above_baseline),
            None => None,
        };
        if let Ok(w) = data_fwhm(&corrected, b, peak, opts, hist.bin_width) {
            widths.push(w);
        }
    }
    if widths.len() < 2 {
        return Ok(0.0);
    }
    let mean = widths.iter().sum::<f64>() / widths.len() as f64;
    let var =
        widths.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (widths.len() - 1) as f64;
    Ok(math::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nonclassicality_chain() {
        let g = g2_cross_zero(3.4).unwrap();
        assert!((g - 4.4).abs() < 1e-15);
        let cs = cauchy_schwarz_factor(g, 2.0, 2.0).unwrap();
        assert!((cs - 4.84).abs() < 1e-12);
        assert_eq!(cauchy_schwarz_factor(2.0, 2.0, 2.0).unwrap(), 1.0);
        assert!((cauchy_schwarz_factor(41.0, 2.0, 2.0).unwrap() - 420.25).abs() < 1e-12);
        assert_eq!(g2_cross_zero(0.0).unwrap(), 1.0);
        assert_eq!(g2_cross_zero(39.0).unwrap(), 40.0);
        assert!(cauchy_schwarz_factor(4.4, 0.0, 2.0).is_err());
        assert!(g2_cross_zero(-0.1).is_err());
    }

    #[test]
    fn sbr_markers() {
        assert_eq!(sbr(5.0, 5.0), Sbr::Finite(0.0));
        assert_eq!(
            sbr(4.4, 1.0).value().map(|v| (v - 3.4).abs() < 1e-12),
            Some(true)
        );
        assert_eq!(sbr(3.0, 0.0), Sbr::Unbounded);
    }

    #[test]
    fn brightness_units() {
        let b = brightness(3340.0, 56e-6).unwrap();
        assert!((b - 59642.857).abs() < 1e-3);
        let sb = spectral_brightness(b, 50e3).unwrap();
        assert!((sb - 1.19286e6).abs() / 1.19286e6 < 1e-5);
        assert!((brightness(3340.0, 112e-6).unwrap() - b / 2.0).abs() < 1e-9);
        let sb_a = spectral_brightness(brightness(3460.0, 56e-6).unwrap(), 1.2e6).unwrap();
        assert!((sb_a - 5.149e4).abs() < 5.0);
        assert!(brightness(1.0, 0.0).is_err());
        assert!(spectral_brightness(1.0, -1.0).is_err());
    }

    #[test]
    fn rate_recovery_ideal() {
        let r = detected_to_generated_rate(840.0, &DetectorChain::IDEAL, 1000, 240e-6).unwrap();
        assert!((r - 840.0 / 0.24).abs() < 1e-9);
        let dead = DetectorChain {
            eta_as: 0.0,
            ..DetectorChain::IDEAL
        };
        assert!(detected_to_generated_rate(1.0, &dead, 1, 1.0).is_err());
    }

    #[test]
    fn baseline_of_constant_floor_and_packet() {
        let mut v = vec![3.0; 100];
        for (i, x) in v.iter_mut().take(30).enumerate() {
            *x += 50.0 * math::exp(-(i as f64) / 5.0);
        }
        let b = baseline_estimate(&v, 0.2).unwrap();
        assert_eq!(b.value, 3.0);
        assert!(b.stable);
        assert_eq!(b.tail_start, 80);
        assert_eq!(baseline_estimate(&[0.0; 10], 0.2).unwrap().value, 0.0);
        assert!(baseline_estimate(&v, 0.6).is_err());
    }

    #[test]
    fn template_fit_exact() {
        let t: Vec<f64> = (0..50).map(|i| math::exp(-(i as f64) / 8.0)).collect();
        let y: Vec<f64> = t.iter().map(|x| 7.0 * x + 2.0).collect();
        let f = template_fit(&y, &t, 1).unwrap();
        assert!((f.amplitude - 7.0).abs() < 1e-9);
        assert!((f.baseline - 2.0).abs() < 1e-9);
        assert!((f.peak_above_baseline - 7.0).abs() < 1e-9);
    }

    #[test]
    fn changepoint_width_ignores_isolated_excursions() {
        let mut v = vec![0.0; 200];
        for x in v.iter_mut().skip(10).take(40) {
            *x = 10.0;
        }
        v[25] = 1.0;
        v[150] = 9.0;
        let (l, r) = changepoint_crossings(&v, 5.0).unwrap();
        assert!((r - l - 40.0).abs() < 1e-12);
    }

    #[test]
    fn dft_of_zero() {
        let s = dft_spectrum(&[0.0; 64], 1e-9);
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exposure_correction() {
        let h = CoincidenceHistogram {
            bin_width: 1.0,
            counts: vec![10, 10],
            n_triggers: 1,
            n_trials: 1,
            window: 4.0,
            meta: None,
        };
        let c = exposure_corrected(&h);
        assert!((c[0] - 10.0 / 0.875).abs() < 1e-12);
        assert!((c[1] - 10.0 / 0.625).abs() < 1e-12);
    }
}
