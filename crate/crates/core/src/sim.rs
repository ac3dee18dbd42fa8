//! Detector-chain Monte Carlo: pair emission, per-arm losses, dark counts and
//! leakage, time tags, and start-stop coincidence histograms.
//!
//! Every trial draws from its own ChaCha8 stream, `(rng_seed, trial)`, so the
//! output does not depend on the order trials are generated in.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{ensure, Error, Result};
use crate::math;
use crate::model::{DriveParams, MediumParams, PhysicalConstants};
use crate::wavepacket::{self, GridSpec, WavePacket};

/// Collection efficiencies and background count rates of the two arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorChain {
    pub eta_s: f64,
    pub eta_as: f64,
    /// Dark counts per second.
    pub dark_s: f64,
    pub dark_as: f64,
    /// Pump (Stokes arm) and coupling (anti-Stokes arm) leakage per second.
    pub leak_s: f64,
    pub leak_as: f64,
}

impl Default for DetectorChain {
    fn default() -> Self {
        Self {
            eta_s: 0.13,
            eta_as: 0.077,
            dark_s: 140.0,
            dark_as: 220.0,
            leak_s: 350.0,
            leak_as: 600.0,
        }
    }
}

impl DetectorChain {
    /// Lossless, background-free chain.
    pub const IDEAL: DetectorChain = DetectorChain {
        eta_s: 1.0,
        eta_as: 1.0,
        dark_s: 0.0,
        dark_as: 0.0,
        leak_s: 0.0,
        leak_as: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.eta_s, "eta_s"), (self.eta_as, "eta_as")] {
            ensure((0.0..=1.0).contains(&v), name, "must be in [0, 1]")?;
        }
        for (v, name) in [
            (self.dark_s, "dark_s"),
            (self.dark_as, "dark_as"),
            (self.leak_s, "leak_s"),
            (self.leak_as, "leak_as"),
        ] {
            ensure(v.is_finite() && v >= 0.0, name, "must be finite and >= 0")?;
        }
        Ok(())
    }

    /// Stokes background (dark + leakage) per second.
    pub fn background_s(&self) -> f64 {
        self.dark_s + self.leak_s
    }

    pub fn background_as(&self) -> f64 {
        self.dark_as + self.leak_as
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    /// Trial window in seconds.
    pub window: f64,
    pub bin_width: f64,
    pub n_trials: u64,
    /// Fraction of wall-clock time spent generating; only used to convert
    /// in-window rates to averaged ones.
    pub duty_cycle: f64,
    pub rng_seed: u64,
    /// Longest start-stop delay histogrammed, seconds.
    pub hist_span: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            window: 240e-6,
            bin_width: 51.2e-9,
            n_trials: 105_000,
            duty_cycle: 0.008,
            rng_seed: 0,
            hist_span: 60e-6,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.window.is_finite() && self.window > 0.0,
            "window",
            "must be finite and > 0",
        )?;
        ensure(
            self.bin_width > 0.0 && self.bin_width < self.window,
            "bin_width",
            "must be in (0, window)",
        )?;
        ensure(self.n_trials >= 1, "n_trials", "must be >= 1")?;
        ensure(
            self.duty_cycle > 0.0 && self.duty_cycle <= 1.0,
            "duty_cycle",
            "must be in (0, 1]",
        )?;
        ensure(
            self.hist_span >= self.bin_width && self.hist_span <= self.window,
            "hist_span",
            "must be in [bin_width, window]",
        )
    }

    pub fn n_bins(&self) -> usize {
        math::floor(self.hist_span / self.bin_width + 1e-9) as usize
    }

    /// Total integration time inside the windows, seconds.
    pub fn live_time(&self) -> f64 {
        self.n_trials as f64 * self.window
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Stokes,
    AntiStokes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTagRecord {
    pub trial: u64,
    pub channel: Channel,
    /// Seconds from the start of the trial window.
    pub t: f64,
}

/// Parameters a synthetic histogram was generated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationMeta {
    pub medium: MediumParams,
    pub drive: DriveParams,
    pub chain: DetectorChain,
    pub pair_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub bin_width: f64,
    /// Bin `k` counts delays in `[k w, (k+1) w)`.
    pub counts: Vec<u64>,
    pub n_triggers: u64,
    pub n_trials: u64,
    pub window: f64,
    pub meta: Option<SimulationMeta>,
}

impl CoincidenceHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|k| k as f64 * self.bin_width)
            .collect()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.bin_width.is_finite() && self.bin_width > 0.0,
            "bin_width",
            "must be finite and > 0",
        )?;
        ensure(!self.counts.is_empty(), "counts", "must not be empty")?;
        ensure(
            self.window.is_finite() && self.window > 0.0,
            "window",
            "must be finite and > 0",
        )?;
        ensure(self.n_trials >= 1, "n_trials", "must be >= 1")
    }
}

/// Inverse-CDF sampler for the delay density `G2(tau) / int G2` over `tau >= 0`.
///
/// Sample `i` of the packet is taken as constant over `[tau_i, tau_i + h)`;
/// within a cell the draw is linear in the uniform variate.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    origin: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl DelaySampler {
    pub fn new(wp: &WavePacket) -> Result<Self> {
        let first = (0..wp.len()).find(|&i| wp.tau(i) >= -1e-12 * wp.bin_width.abs());
        let first = first.ok_or(Error::ZeroDensity)?;
        let mut cdf = Vec::with_capacity(wp.len() - first + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for &v in &wp.values[first..] {
            if !v.is_finite() {
                return Err(Error::NonFinite("delay density"));
            }
            acc += v.max(0.0);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::ZeroDensity);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self {
            origin: wp.tau(first).max(0.0),
            step: wp.bin_width,
            cdf,
        })
    }

    /// Delay for a uniform variate `u` in `[0, 1)`.
    pub fn delay(&self, u: f64) -> f64 {
        // first cell whose upper CDF edge exceeds u
        let i = self.cdf[1..]
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 2);
        let (lo, hi) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
        self.origin + (i as f64 + frac.clamp(0.0, 1.0)) * self.step
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.delay(rng.random::<f64>())
    }
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// RNG for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Time tags for all trials, sorted by `(trial, t)`.
///
/// `pair_rate` is the in-window generation rate in pairs/s. Pairs whose
/// anti-Stokes photon would arrive after the window closes are lost.
pub fn synthesize_time_tags(
    sampler: &DelaySampler,
    pair_rate: f64,
    chain: &DetectorChain,
    acq: &AcquisitionConfig,
) -> Result<Vec<TimeTagRecord>> {
    ensure(
        pair_rate.is_finite() && pair_rate >= 0.0,
        "pair_rate",
        "must be finite and >= 0",
    )?;
    chain.validate()?;
    acq.validate()?;
    let w = acq.window;
    let mut out = Vec::new();
    let mut trial_events = Vec::new();
    for trial in 0..acq.n_trials {
        let mut rng = trial_rng(acq.rng_seed, trial);
        trial_events.clear();
        for _ in 0..poisson(&mut rng, pair_rate * w) {
            let ts = rng.random::<f64>() * w;
            let tau = sampler.sample(&mut rng);
            let keep_s = rng.random::<f64>() < chain.eta_s;
            let keep_as = rng.random::<f64>() < chain.eta_as;
            if keep_s {
                trial_events.push((ts, Channel::Stokes));
            }
            let tas = ts + tau;
            if keep_as && tas < w {
                trial_events.push((tas, Channel::AntiStokes));
            }
        }
        for (rate, ch) in [
            (chain.background_s(), Channel::Stokes),
            (chain.background_as(), Channel::AntiStokes),
        ] {
            for _ in 0..poisson(&mut rng, rate * w) {
                trial_events.push((rng.random::<f64>() * w, ch));
            }
        }
        trial_events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.extend(
            trial_events
                .iter()
                .map(|&(t, channel)| TimeTagRecord { trial, channel, t }),
        );
    }
    Ok(out)
}

/// Compute the model packet and synthesize tags from it.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_from_model(
    medium: &MediumParams,
    drive: &DriveParams,
    grid: &GridSpec,
    consts: &PhysicalConstants,
    pair_rate: f64,
    chain: &DetectorChain,
    acq: &AcquisitionConfig,
) -> Result<Vec<TimeTagRecord>> {
    let wp = wavepacket::compute_wavepacket(medium, drive, grid, consts)?;
    synthesize_time_tags(&DelaySampler::new(&wp)?, pair_rate, chain, acq)
}

/// Multi-stop start-stop histogram: every anti-Stokes tag within
/// `[0, hist_span)` after each Stokes tag of the same trial is counted.
pub fn histogram_coincidences(
    records: &[TimeTagRecord],
    acq: &AcquisitionConfig,
) -> Result<CoincidenceHistogram> {
    acq.validate()?;
    for (i, pair) in records.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if (b.trial, b.t) < (a.trial, a.t) || b.t.is_nan() {
            return Err(Error::Unsorted(i + 1));
        }
    }
    let n_bins = acq.n_bins();
    let span = n_bins as f64 * acq.bin_width;
    let mut counts = vec![0u64; n_bins];
    let mut n_triggers = 0;
    let mut stops: Vec<f64> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let trial = records[start].trial;
        let end = start + records[start..].partition_point(|r| r.trial == trial);
        let group = &records[start..end];
        stops.clear();
        stops.extend(
            group
                .iter()
                .filter(|r| r.channel == Channel::AntiStokes)
                .map(|r| r.t),
        );
        let mut first_stop = 0;
        for r in group.iter().filter(|r| r.channel == Channel::Stokes) {
            n_triggers += 1;
            while first_stop < stops.len() && stops[first_stop] < r.t {
                first_stop += 1;
            }
            for &t in &stops[first_stop..] {
                let d = t - r.t;
                if d >= span {
                    break;
                }
                let k = (d / acq.bin_width) as usize;
                if k < n_bins {
                    counts[k] += 1;
                }
            }
        }
        start = end;
    }
    Ok(CoincidenceHistogram {
        bin_width: acq.bin_width,
        counts,
        n_triggers,
        n_trials: acq.n_trials,
        window: acq.window,
        meta: None,
    })
}

/// Expected triggers over the whole acquisition.
pub fn expected_triggers(pair_rate: f64, chain: &DetectorChain, acq: &AcquisitionConfig) -> f64 {
    acq.live_time() * (pair_rate * chain.eta_s + chain.background_s())
}

/// Accidental-coincidence level per bin at zero delay:
/// `N_trig * r_as,uncorr * bin_width` with
/// `r_as,uncorr = dark_as + leak_as + pair_rate * eta_as`.
///
/// At delay `tau` the level is lower by `1 - tau / window`, the share of
/// triggers early enough to see a stop that late.
pub fn expected_background_floor(
    pair_rate: f64,
    chain: &DetectorChain,
    acq: &AcquisitionConfig,
) -> f64 {
    let r_as = chain.background_as() + pair_rate * chain.eta_as;
    expected_triggers(pair_rate, chain, acq) * r_as * acq.bin_width
}

/// Expected true (same-pair) coincidences over the whole acquisition,
/// ignoring window truncation.
pub fn expected_true_coincidences(
    pair_rate: f64,
    chain: &DetectorChain,
    acq: &AcquisitionConfig,
) -> f64 {
    acq.live_time() * pair_rate * chain.eta_s * chain.eta_as
}
