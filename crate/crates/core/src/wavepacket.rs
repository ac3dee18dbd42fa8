//! Sampled biphoton wave packets and spectra.
//!
//! `G2(tau) = |(1/2pi) int d(delta) exp(-i delta tau) A(delta)|^2` is evaluated
//! with one FFT over a uniform detuning grid; the reciprocal grid gives every
//! delay at once. Inside this module times are in units of `1/Gamma` until they
//! are converted to seconds on output.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Error, GridCheck, Result};
use crate::fft;
use crate::math;
use crate::model::{self, Complex, DriveParams, MediumParams, PhysicalConstants};
use crate::signal::{self, Alignment, CrossingRule, SpectrumMode};

/// Smallest accepted FFT length.
pub const MIN_POINTS: usize = 1 << 10;
/// Default FFT length.
pub const DEFAULT_POINTS: usize = 1 << 18;
/// Largest length the automatic grid will grow to.
pub const MAX_POINTS: usize = 1 << 22;
/// Detuning samples required across the EIT window.
pub const MIN_WINDOW_POINTS: f64 = 32.0;
/// Edge amplitude allowed relative to the peak amplitude.
pub const EDGE_TOLERANCE: f64 = 1e-4;
/// Moving-average length used when measuring widths at detection resolution.
pub const SMOOTHING_POINTS: usize = 4;

/// Global factor putting the approximate generation rate in the units of
/// [`pair_rate_integral`]; fixed by matching the two at the 13.4 us packet
/// point `(alpha, omega_c, gamma) = (110, 0.42, 3e-4)`, pump `(0.32, 33.3)`.
pub const RATE_APPROX_SCALE: f64 = 1.431689545;

/// EIT transparency window `omega_c^2 / sqrt(alpha)` in units of `Gamma`.
pub fn eit_window(medium: &MediumParams, drive: &DriveParams) -> f64 {
    drive.omega_c * drive.omega_c / math::sqrt(medium.alpha)
}

/// Uniform detuning grid `delta_k = -span + k * (2 span / n)`, `k < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_points: usize,
    /// Half-width of the detuning grid in units of `Gamma`.
    pub delta_span: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, delta_span: f64) -> Self {
        Self {
            n_points,
            delta_span,
        }
    }

    /// Grid wide enough for both the EIT window and the `Gamma`-wide wings.
    ///
    /// Starts from `max(8 omega_c, 4, 64 w_EIT)` and doubles the span until
    /// the amplitude at the edge is below [`EDGE_TOLERANCE`] of its peak,
    /// then doubles the point count until the EIT window is resolved.
    pub fn auto(medium: &MediumParams, drive: &DriveParams) -> Result<Self> {
        medium.validate()?;
        drive.validate()?;
        let window = eit_window(medium, drive);
        let mut span = (8.0 * drive.omega_c).max(4.0).max(64.0 * window);
        let peak = peak_amplitude_estimate(medium, drive, span);
        if peak > 0.0 {
            while edge_amplitude(medium, drive, span) > EDGE_TOLERANCE * peak && span < 1e6 {
                span *= 2.0;
            }
        }
        let mut n = DEFAULT_POINTS;
        while window / (2.0 * span / n as f64) < MIN_WINDOW_POINTS && n < MAX_POINTS {
            n *= 2;
        }
        Ok(Self::new(n, span))
    }

    pub fn delta_step(&self) -> f64 {
        2.0 * self.delta_span / self.n_points as f64
    }

    /// Delay step in units of `1/Gamma`.
    pub fn tau_step(&self) -> f64 {
        math::TAU / (self.n_points as f64 * self.delta_step())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_points.is_power_of_two() || self.n_points < MIN_POINTS {
            return Err(Error::GridInadequate {
                check: GridCheck::PointCount,
                measured: self.n_points as f64,
                required: MIN_POINTS as f64,
            });
        }
        ensure(
            self.delta_span.is_finite() && self.delta_span > 0.0,
            "delta_span",
            "must be finite and > 0",
        )
    }

    /// Pre-evaluation check: EIT window resolution.
    pub fn check_resolution(&self, medium: &MediumParams, drive: &DriveParams) -> Result<()> {
        self.validate()?;
        let points = eit_window(medium, drive) / self.delta_step();
        if points < MIN_WINDOW_POINTS {
            return Err(Error::GridInadequate {
                check: GridCheck::Resolution,
                measured: points,
                required: MIN_WINDOW_POINTS,
            });
        }
        Ok(())
    }
}

fn peak_amplitude_estimate(medium: &MediumParams, drive: &DriveParams, span: f64) -> f64 {
    let n = 8192;
    let step = 2.0 * span / n as f64;
    (0..=n)
        .map(|k| -span + k as f64 * step)
        .chain([0.0, 0.5 * drive.omega_c, -0.5 * drive.omega_c])
        .map(|d| model::amplitude_unchecked(d, medium, drive).norm())
        .fold(0.0, f64::max)
}

fn edge_amplitude(medium: &MediumParams, drive: &DriveParams, span: f64) -> f64 {
    model::amplitude_unchecked(-span, medium, drive)
        .norm()
        .max(model::amplitude_unchecked(span, medium, drive).norm())
}

/// Parameters a model packet was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub medium: MediumParams,
    pub drive: DriveParams,
    pub grid: GridSpec,
}

/// `G2(tau)` on a uniform delay grid.
///
/// Model packets are dimensionless (`G2` with delays measured in `1/Gamma`);
/// measured packets hold counts per bin. Sample `i` sits at
/// `start + i * bin_width` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub start: f64,
    pub bin_width: f64,
    pub values: Vec<f64>,
    pub model: Option<ModelPoint>,
}

impl WavePacket {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.start + i as f64 * self.bin_width
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.tau(i))
    }

    /// Share of the total weight sitting at negative delay.
    pub fn negative_time_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let neg: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.tau(*i) < 0.0)
            .map(|(_, v)| v)
            .sum();
        neg / total
    }

    /// Average onto bins `[k w, (k+1) w)` for `k = first_bin .. first_bin + n_bins`.
    ///
    /// Each native sample is treated as constant over a cell of one native
    /// step centred on it, and shared between bins by overlap. Output samples
    /// sit at bin left edges, so bin `k` of a start-stop histogram lines up
    /// with sample `k - first_bin`.
    pub fn rebin_range(&self, bin_width: f64, first_bin: i64, n_bins: usize) -> WavePacket {
        let mut sums = vec![0.0; n_bins];
        let h = self.bin_width;
        let origin = first_bin as f64 * bin_width;
        for (i, &v) in self.values.iter().enumerate() {
            let lo = self.tau(i) - 0.5 * h - origin;
            let hi = lo + h;
            let b0 = math::floor(lo / bin_width).max(0.0) as i64;
            let b1 = (math::ceil(hi / bin_width) as i64).min(n_bins as i64);
            for b in b0..b1 {
                let e0 = b as f64 * bin_width;
                let overlap = hi.min(e0 + bin_width) - lo.max(e0);
                if overlap > 0.0 {
                    sums[b as usize] += v * overlap;
                }
            }
        }
        for s in &mut sums {
            *s /= bin_width;
        }
        WavePacket {
            start: origin,
            bin_width,
            values: sums,
            model: self.model,
        }
    }

    /// Rebin over the full delay range of the packet.
    pub fn rebin(&self, bin_width: f64) -> WavePacket {
        let first = math::floor(self.start / bin_width) as i64;
        let end = self.tau(self.len().saturating_sub(1)) + self.bin_width;
        let last = math::ceil(end / bin_width) as i64;
        self.rebin_range(bin_width, first, (last - first).max(0) as usize)
    }

    /// Trapezoidal integral with the delay in units of `1/Gamma`.
    fn integral_gamma_units(&self, gamma_e: f64) -> f64 {
        let h = self.bin_width * gamma_e;
        trapezoid(&self.values) * h
    }
}

fn trapezoid(v: &[f64]) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]),
    }
}

/// Evaluate `G2(tau)` for one parameter set.
pub fn compute_wavepacket(
    medium: &MediumParams,
    drive: &DriveParams,
    grid: &GridSpec,
    consts: &PhysicalConstants,
) -> Result<WavePacket> {
    medium.validate()?;
    drive.validate()?;
    consts.validate()?;
    grid.check_resolution(medium, drive)?;

    let n = grid.n_points;
    let dd = grid.delta_step();
    let mut buf: Vec<Complex> = (0..n)
        .map(|k| model::amplitude_unchecked(-grid.delta_span + k as f64 * dd, medium, drive))
        .collect();
    if buf.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NonFinite("spectral amplitude"));
    }
    let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        let edge = buf[0].norm().max(buf[n - 1].norm()) / peak;
        if edge > EDGE_TOLERANCE {
            return Err(Error::GridInadequate {
                check: GridCheck::Span,
                measured: edge,
                required: EDGE_TOLERANCE,
            });
        }
    }

    fft::fft(&mut buf);
    // |sum_k A_k e^{-i delta_k tau_j}| = |FFT_j| since the grid offset only adds a phase
    let scale = dd / math::TAU;
    let dt = grid.tau_step();
    let half = n / 2;
    // reorder so delays run from -n/2 dt to (n/2 - 1) dt
    let values = buf[half..]
        .iter()
        .chain(&buf[..half])
        .map(|c| (c * scale).norm_sqr())
        .collect();
    Ok(WavePacket {
        start: -(half as f64) * dt / consts.gamma_e,
        bin_width: dt / consts.gamma_e,
        values,
        model: Some(ModelPoint {
            medium: *medium,
            drive: *drive,
            grid: *grid,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// `|A(delta)|^2` on the detuning grid.
    OpticalDensity,
    /// Transform of a sampled wave packet.
    WavepacketTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyAxis {
    /// Ordinary frequency in Hz.
    Hertz,
    /// Two-photon detuning in units of `Gamma`.
    DetuningGamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub axis: FrequencyAxis,
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn coordinate(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Innermost-crossing FWHM in axis units.
    pub fn fwhm(&self) -> Result<f64> {
        match self.kind {
            SpectrumKind::OpticalDensity => {
                signal::fwhm(&self.values, self.step, 0.0, CrossingRule::Innermost)
            }
            SpectrumKind::WavepacketTransform => signal::one_sided_fwhm(&self.values, self.step),
        }
    }

    /// FWHM converted to Hz.
    pub fn fwhm_hz(&self, consts: &PhysicalConstants) -> Result<f64> {
        let w = self.fwhm()?;
        Ok(match self.axis {
            FrequencyAxis::Hertz => w,
            FrequencyAxis::DetuningGamma => w * consts.gamma_e / math::TAU,
        })
    }
}

/// `|A(delta)|^2` sampled on the grid.
pub fn compute_optical_spectrum(
    medium: &MediumParams,
    drive: &DriveParams,
    grid: &GridSpec,
) -> Result<Spectrum> {
    medium.validate()?;
    drive.validate()?;
    grid.check_resolution(medium, drive)?;
    let dd = grid.delta_step();
    let values: Vec<f64> = (0..grid.n_points)
        .map(|k| {
            model::amplitude_unchecked(-grid.delta_span + k as f64 * dd, medium, drive).norm_sqr()
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("optical spectrum"));
    }
    Ok(Spectrum {
        kind: SpectrumKind::OpticalDensity,
        axis: FrequencyAxis::DetuningGamma,
        start: -grid.delta_span,
        step: dd,
        values,
    })
}

/// FWHM (s) of the packet as sampled, baseline zero, main-lobe crossings.
pub fn temporal_fwhm(wp: &WavePacket) -> Result<f64> {
    signal::fwhm(&wp.values, wp.bin_width, 0.0, CrossingRule::Innermost)
}

/// FWHM (s) the packet shows when recorded with `bin_width` bins and then
/// smoothed by the four-point moving average.
///
/// This is the width a detector chain resolves: the sub-`Gamma` precursor at
/// the leading edge is averaged into the first bins instead of setting the
/// half-maximum level.
pub fn temporal_fwhm_at_resolution(wp: &WavePacket, bin_width: f64) -> Result<f64> {
    ensure(
        bin_width.is_finite() && bin_width > 0.0,
        "bin_width",
        "must be finite and > 0",
    )?;
    let binned = wp.rebin(bin_width);
    let n = SMOOTHING_POINTS.min(binned.len().max(1));
    let smooth = signal::moving_average(&binned.values, n, Alignment::Trailing)?;
    signal::fwhm(&smooth, bin_width, 0.0, CrossingRule::Innermost)
}

/// Time-tagger bin (6.4 ns times a power of two, up to 51.2 ns) giving at
/// least 256 bins per propagation delay.
pub fn suggested_bin_width(
    medium: &MediumParams,
    drive: &DriveParams,
    consts: &PhysicalConstants,
) -> f64 {
    let td = delay_time(medium, drive, consts).unwrap_or(0.0);
    let mut bw = 6.4e-9;
    while bw < 51.2e-9 && td / (2.0 * bw) >= 256.0 {
        bw *= 2.0;
    }
    bw
}

/// Spectral FWHM (Hz) of a baseline-free packet.
///
/// The packet is read as the intensity `|psi(tau)|^2` of a two-photon
/// amplitude; the width is that of `|DFT{sqrt(G2)}|^2`, i.e. the biphoton
/// power spectrum. Negative samples (noise after baseline removal) are
/// clipped to zero.
pub fn spectral_fwhm_of_wavepacket(wp: &WavePacket) -> Result<f64> {
    wavepacket_spectrum(wp, SpectrumMode::AmplitudePower).fwhm()
}

/// FWHM (Hz) of `|DFT{G2}|`, the transform of the packet itself.
pub fn g2_transform_fwhm(wp: &WavePacket) -> Result<f64> {
    wavepacket_spectrum(wp, SpectrumMode::Magnitude).fwhm()
}

/// Zero-padded length used for packet transforms.
const TRANSFORM_MIN_LEN: usize = 1 << 16;

/// One-sided transform of a packet, frequency in Hz.
pub fn wavepacket_spectrum(wp: &WavePacket, mode: SpectrumMode) -> Spectrum {
    let (df, values) =
        signal::one_sided_spectrum(&wp.values, wp.bin_width, mode, TRANSFORM_MIN_LEN);
    Spectrum {
        kind: SpectrumKind::WavepacketTransform,
        axis: FrequencyAxis::Hertz,
        start: 0.0,
        step: df,
        values,
    }
}

/// Propagation delay `alpha Gamma / Omega_c^2` in seconds.
pub fn delay_time(
    medium: &MediumParams,
    drive: &DriveParams,
    consts: &PhysicalConstants,
) -> Result<f64> {
    medium.validate()?;
    drive.validate()?;
    Ok(medium.alpha / (consts.gamma_e * drive.omega_c * drive.omega_c))
}

/// Inverse EIT bandwidth `sqrt(alpha) Gamma / Omega_c^2` in seconds.
pub fn eit_bandwidth_time(
    medium: &MediumParams,
    drive: &DriveParams,
    consts: &PhysicalConstants,
) -> Result<f64> {
    medium.validate()?;
    drive.validate()?;
    Ok(math::sqrt(medium.alpha) / (consts.gamma_e * drive.omega_c * drive.omega_c))
}

/// Ground-state coherence time `1/gamma` in seconds; `None` when `gamma = 0`
/// (unbounded).
pub fn coherence_time(medium: &MediumParams, consts: &PhysicalConstants) -> Result<Option<f64>> {
    medium.validate()?;
    Ok(if medium.gamma > 0.0 {
        Some(1.0 / (medium.gamma * consts.gamma_e))
    } else {
        None
    })
}

/// Approximate spectral FWHM `0.88 / tau_d` in Hz.
pub fn linewidth_approx(
    medium: &MediumParams,
    drive: &DriveParams,
    consts: &PhysicalConstants,
) -> Result<f64> {
    Ok(0.88 / delay_time(medium, drive, consts)?)
}

/// `int G2(tau) d(Gamma tau)` of the computed packet.
pub fn pair_rate_integral(
    medium: &MediumParams,
    drive: &DriveParams,
    grid: &GridSpec,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let wp = compute_wavepacket(medium, drive, grid, consts)?;
    Ok(wp.integral_gamma_units(consts.gamma_e))
}

/// Same integral for an already computed model packet.
pub fn packet_rate_integral(wp: &WavePacket, consts: &PhysicalConstants) -> f64 {
    wp.integral_gamma_units(consts.gamma_e)
}

/// Large-OD, small-decoherence generation rate
/// `(alpha / 2pi) Omega_p^2 / (4 Delta_p^2 + 1) exp(-alpha gamma / Omega_c^2)`,
/// times [`RATE_APPROX_SCALE`].
pub fn pair_rate_approx(medium: &MediumParams, drive: &DriveParams) -> Result<f64> {
    Ok(RATE_APPROX_SCALE * pair_rate_approx_unscaled(medium, drive)?)
}

pub(crate) fn pair_rate_approx_unscaled(medium: &MediumParams, drive: &DriveParams) -> Result<f64> {
    medium.validate()?;
    drive.validate()?;
    let pump = drive.omega_p * drive.omega_p / (4.0 * drive.delta_p * drive.delta_p + 1.0);
    let loss = math::exp(-medium.alpha * medium.gamma / (drive.omega_c * drive.omega_c));
    Ok(medium.alpha / math::TAU * pump * loss)
}

/// Time scales behind the closed-form approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub tau_d: f64,
    pub tau_b: f64,
    /// `None` when the coherence time is unbounded.
    pub tau_c: Option<f64>,
    /// `tau_c / tau_d` (infinite when `tau_c` is unbounded).
    pub coherence_ratio: f64,
    /// `tau_d / tau_b`, always `sqrt(alpha)`.
    pub od_ratio: f64,
    pub large_od: bool,
    pub negligible_decoherence: bool,
}

impl RegimeReport {
    pub fn holds(&self) -> bool {
        self.large_od && self.negligible_decoherence
    }
}

pub const DEFAULT_REGIME_THRESHOLD: f64 = 3.0;

/// Check `tau_c >> tau_d >> tau_b`, with `>>` meaning a ratio of at least
/// `threshold`.
pub fn regime_check(
    medium: &MediumParams,
    drive: &DriveParams,
    consts: &PhysicalConstants,
    threshold: f64,
) -> Result<RegimeReport> {
    let tau_d = delay_time(medium, drive, consts)?;
    let tau_b = eit_bandwidth_time(medium, drive, consts)?;
    let tau_c = coherence_time(medium, consts)?;
    let coherence_ratio = tau_c.map_or(f64::INFINITY, |t| t / tau_d);
    let od_ratio = tau_d / tau_b;
    Ok(RegimeReport {
        tau_d,
        tau_b,
        tau_c,
        coherence_ratio,
        od_ratio,
        large_od: od_ratio >= threshold,
        negligible_decoherence: coherence_ratio >= threshold,
    })
}
