//! The five subcommands. Each has a pure part returning data (used by the
//! tests) and a `cmd_*` wrapper that writes files.

use std::path::{Path, PathBuf};

use biphoton_core::analysis::{self, AnalysisOptions, Sbr};
use biphoton_core::fit::{self, Bounds, FitOptions, FitParam, FitParams, ModelContext};
use biphoton_core::signal::{self, Alignment};
use biphoton_core::sim::{self, CoincidenceHistogram, DelaySampler, TimeTagRecord};
use biphoton_core::wavepacket::{self, WavePacket};
use biphoton_core::{model, Error as ModelError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, GridConfig, SweepConfig};
use crate::error::CliError;
use crate::io::{self, HistogramFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub tau_d_s: f64,
    pub tau_b_s: f64,
    pub tau_c_s: Option<f64>,
    pub coherence_ratio: Option<f64>,
    pub od_ratio: f64,
    pub large_od: bool,
    pub negligible_decoherence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavepacketSummary {
    pub config_sha256: String,
    /// Width at the configured detection bin, after four-point smoothing.
    pub temporal_fwhm_s: f64,
    /// Width of the packet at full model resolution.
    pub temporal_fwhm_raw_s: f64,
    pub detection_bin_width_s: f64,
    /// Width of the biphoton power spectrum `|DFT sqrt(G2)|^2`.
    pub spectral_fwhm_hz: f64,
    /// Width of `|DFT G2|`.
    pub g2_transform_fwhm_hz: f64,
    /// Width of `|A(delta)|^2`.
    pub optical_spectrum_fwhm_hz: f64,
    pub linewidth_approx_hz: f64,
    pub pair_rate_integral: f64,
    pub pair_rate_approx: f64,
    pub negative_time_fraction: f64,
    /// Lobes of the detection-resolution packet above 5% of its peak.
    pub local_maxima: usize,
    pub phase_mismatch_rad: f64,
    pub regime: RegimeSummary,
    pub grid: GridConfig,
}

fn regime_summary(r: &wavepacket::RegimeReport) -> RegimeSummary {
    RegimeSummary {
        tau_d_s: r.tau_d,
        tau_b_s: r.tau_b,
        tau_c_s: r.tau_c,
        coherence_ratio: r.coherence_ratio.is_finite().then_some(r.coherence_ratio),
        od_ratio: r.od_ratio,
        large_od: r.large_od,
        negligible_decoherence: r.negligible_decoherence,
    }
}

/// Packet at the detection bin width, smoothed as the measured data are.
pub fn detection_view(wp: &WavePacket, bin_width: f64) -> Result<Vec<f64>, CliError> {
    let binned = wp.rebin(bin_width);
    let n = wavepacket::SMOOTHING_POINTS.min(binned.len().max(1));
    Ok(signal::moving_average(
        &binned.values,
        n,
        Alignment::Trailing,
    )?)
}

pub fn compute_packet(cfg: &ExperimentConfig) -> Result<WavePacket, CliError> {
    let (m, d) = (cfg.medium(), cfg.drive());
    let grid = cfg.grid_for(&m, &d)?;
    Ok(wavepacket::compute_wavepacket(
        &m,
        &d,
        &grid,
        &cfg.constants(),
    )?)
}

pub fn wavepacket_summary(
    cfg: &ExperimentConfig,
) -> Result<(WavePacket, WavepacketSummary), CliError> {
    let (m, d, c) = (cfg.medium(), cfg.drive(), cfg.constants());
    let wp = compute_packet(cfg)?;
    let grid = wp.model.expect("model packet").grid;
    let bw = cfg.acquisition().bin_width;
    let zero = wp.values.iter().all(|&v| v == 0.0);
    // an undriven medium has no packet; widths are reported as zero
    let width = |r: Result<f64, ModelError>| match r {
        Err(ModelError::NoPeak) if zero => Ok(0.0),
        other => other,
    };
    let view = detection_view(&wp, bw)?;
    let top = view.iter().copied().fold(0.0, f64::max);
    let local_maxima = if top > 0.0 {
        signal::prominent_maxima(&view, 0.05 * top, 0.05 * top).len()
    } else {
        0
    };
    let optical = wavepacket::compute_optical_spectrum(&m, &d, &grid)?;
    let summary = WavepacketSummary {
        config_sha256: cfg.sha256(),
        temporal_fwhm_s: width(wavepacket::temporal_fwhm_at_resolution(&wp, bw))?,
        temporal_fwhm_raw_s: width(wavepacket::temporal_fwhm(&wp))?,
        detection_bin_width_s: bw,
        spectral_fwhm_hz: width(wavepacket::spectral_fwhm_of_wavepacket(&wp))?,
        g2_transform_fwhm_hz: width(wavepacket::g2_transform_fwhm(&wp))?,
        optical_spectrum_fwhm_hz: width(optical.fwhm_hz(&c))?,
        linewidth_approx_hz: wavepacket::linewidth_approx(&m, &d, &c)?,
        pair_rate_integral: wavepacket::packet_rate_integral(&wp, &c),
        pair_rate_approx: wavepacket::pair_rate_approx(&m, &d)?,
        negative_time_fraction: wp.negative_time_fraction(),
        local_maxima,
        phase_mismatch_rad: model::phase_mismatch(&cfg.geometry())?,
        regime: regime_summary(&wavepacket::regime_check(
            &m,
            &d,
            &c,
            wavepacket::DEFAULT_REGIME_THRESHOLD,
        )?),
        grid: GridConfig {
            n_points: grid.n_points,
            delta_span_per_gamma: grid.delta_span,
        },
    };
    Ok((wp, summary))
}

/// Sidecar path for a CSV output: same stem, `.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Write `tau_us,g2` over `[-span/16, span)` with `span` the histogram span.
pub fn cmd_wavepacket(
    cfg: &ExperimentConfig,
    out: &Path,
    format: Format,
) -> Result<WavepacketSummary, CliError> {
    let (wp, summary) = wavepacket_summary(cfg)?;
    let span = cfg.acquisition().hist_span;
    let idx: Vec<usize> = (0..wp.len())
        .filter(|&i| {
            let t = wp.tau(i);
            t >= -span / 16.0 && t < span
        })
        .collect();
    match format {
        Format::Csv => {
            let header = io::csv_header(cfg, &[]);
            io::write_table(
                out,
                &header,
                &["tau_us", "g2"],
                idx.iter().map(|&i| vec![wp.tau(i) * 1e6, wp.values[i]]),
            )?;
            io::write_json(&sidecar_path(out), &summary)?;
        }
        Format::Json => {
            let first = idx.first().copied().unwrap_or(0);
            let doc = json!({
                "summary": summary,
                "tau_start_us": wp.tau(first) * 1e6,
                "tau_step_us": wp.bin_width * 1e6,
                "g2": idx.iter().map(|&i| wp.values[i]).collect::<Vec<_>>(),
            });
            io::write_json(out, &doc)?;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter_value: f64,
    pub omega_c_sq: f64,
    pub decoherence_per_gamma: f64,
    pub bin_width_ns: f64,
    pub temporal_fwhm_s: f64,
    pub spectral_fwhm_hz: f64,
    pub pair_rate_integral: f64,
    pub linewidth_approx_hz: f64,
    pub pair_rate_approx: f64,
    pub rate_pairs_per_s: f64,
    #[serde(rename = "brightness_pairs_per_s_mW")]
    pub brightness: f64,
    #[serde(rename = "spectral_brightness_pairs_per_s_mW_MHz")]
    pub spectral_brightness: f64,
    pub regime_holds: bool,
}

impl SweepRow {
    pub const COLUMNS: [&'static str; 13] = [
        "parameter_value",
        "omega_c_sq",
        "decoherence_per_gamma",
        "bin_width_ns",
        "temporal_fwhm_s",
        "spectral_fwhm_hz",
        "pair_rate_integral",
        "linewidth_approx_hz",
        "pair_rate_approx",
        "rate_pairs_per_s",
        "brightness_pairs_per_s_mW",
        "spectral_brightness_pairs_per_s_mW_MHz",
        "regime_holds",
    ];

    fn values(&self) -> Vec<f64> {
        vec![
            self.parameter_value,
            self.omega_c_sq,
            self.decoherence_per_gamma,
            self.bin_width_ns,
            self.temporal_fwhm_s,
            self.spectral_fwhm_hz,
            self.pair_rate_integral,
            self.linewidth_approx_hz,
            self.pair_rate_approx,
            self.rate_pairs_per_s,
            self.brightness,
            self.spectral_brightness,
            if self.regime_holds { 1.0 } else { 0.0 },
        ]
    }
}

/// One row per sweep value. Sweeping `omega_c_per_gamma` takes the
/// decoherence rate from the configured decoherence law at each point; the
/// absolute rate column scales the configured pair rate by the packet
/// integral relative to the configured point.
pub fn sweep_rows(cfg: &ExperimentConfig, sweep: &SweepConfig) -> Result<Vec<SweepRow>, CliError> {
    let base_integral = {
        let (m, d, c) = (cfg.medium(), cfg.drive(), cfg.constants());
        let g = cfg.grid_for(&m, &d)?;
        wavepacket::pair_rate_integral(&m, &d, &g, &c)?
    };
    sweep
        .values
        .iter()
        .map(|&v| {
            let mut point = cfg.with_parameter(&sweep.parameter, v)?;
            if sweep.parameter == "omega_c_per_gamma" {
                point.medium.decoherence_per_gamma =
                    model::decoherence_rate(v, &cfg.decoherence())?;
            }
            point.validate()?;
            let (m, d, c) = (point.medium(), point.drive(), point.constants());
            let grid = point.grid_for(&m, &d)?;
            let wp = wavepacket::compute_wavepacket(&m, &d, &grid, &c)?;
            let bw = wavepacket::suggested_bin_width(&m, &d, &c);
            let integral = wavepacket::packet_rate_integral(&wp, &c);
            let spectral = wavepacket::spectral_fwhm_of_wavepacket(&wp)?;
            let rate = if base_integral > 0.0 {
                cfg.pair_rate_per_s * integral / base_integral
            } else {
                0.0
            };
            let bright = analysis::brightness(rate, d.pump_power)?;
            let regime =
                wavepacket::regime_check(&m, &d, &c, wavepacket::DEFAULT_REGIME_THRESHOLD)?;
            Ok(SweepRow {
                parameter_value: v,
                omega_c_sq: d.omega_c * d.omega_c,
                decoherence_per_gamma: m.gamma,
                bin_width_ns: bw * 1e9,
                temporal_fwhm_s: wavepacket::temporal_fwhm_at_resolution(&wp, bw)?,
                spectral_fwhm_hz: spectral,
                pair_rate_integral: integral,
                linewidth_approx_hz: wavepacket::linewidth_approx(&m, &d, &c)?,
                pair_rate_approx: wavepacket::pair_rate_approx(&m, &d)?,
                rate_pairs_per_s: rate,
                brightness: bright,
                spectral_brightness: analysis::spectral_brightness(bright, spectral)?,
                regime_holds: regime.holds(),
            })
        })
        .collect()
}

pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    sweep: &SweepConfig,
    out: &Path,
    format: Format,
) -> Result<Vec<SweepRow>, CliError> {
    let rows = sweep_rows(cfg, sweep)?;
    match format {
        Format::Csv => {
            let header = io::csv_header(cfg, &[("sweep_parameter", sweep.parameter.clone())]);
            io::write_table(
                out,
                &header,
                &SweepRow::COLUMNS,
                rows.iter().map(SweepRow::values),
            )?;
        }
        Format::Json => io::write_json(
            out,
            &json!({
                "config_sha256": cfg.sha256(),
                "sweep_parameter": sweep.parameter,
                "rows": rows,
            }),
        )?,
    }
    Ok(rows)
}

/// Synthesize tags and histogram them with the configured acquisition.
pub fn simulate(
    cfg: &ExperimentConfig,
) -> Result<(Vec<TimeTagRecord>, CoincidenceHistogram), CliError> {
    let wp = compute_packet(cfg)?;
    let sampler = DelaySampler::new(&wp)?;
    let acq = cfg.acquisition();
    let tags = sim::synthesize_time_tags(&sampler, cfg.pair_rate_per_s, &cfg.chain(), &acq)?;
    let hist = sim::histogram_coincidences(&tags, &acq)?;
    Ok((tags, hist))
}

/// Tag file written next to a histogram: `<stem>.tags.csv`.
pub fn tags_path(hist_out: &Path) -> PathBuf {
    hist_out.with_extension("tags.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub n_records: usize,
    pub n_triggers: u64,
    pub total_coincidences: u64,
    pub expected_triggers: f64,
    pub expected_true_coincidences: f64,
    pub expected_background_floor: f64,
}

pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    hist_out: &Path,
    tags_out: &Path,
) -> Result<SimulateSummary, CliError> {
    let (tags, hist) = simulate(cfg)?;
    io::write_tags(tags_out, &io::csv_header(cfg, &[]), &tags)?;
    io::write_json(hist_out, &HistogramFile::from_histogram(&hist, Some(cfg)))?;
    let (rate, chain, acq) = (cfg.pair_rate_per_s, cfg.chain(), cfg.acquisition());
    Ok(SimulateSummary {
        n_records: tags.len(),
        n_triggers: hist.n_triggers,
        total_coincidences: hist.total(),
        expected_triggers: sim::expected_triggers(rate, &chain, &acq),
        expected_true_coincidences: sim::expected_true_coincidences(rate, &chain, &acq),
        expected_background_floor: sim::expected_background_floor(rate, &chain, &acq),
    })
}

/// Histogram and the config it was produced with, from either a histogram
/// JSON file or a time-tag CSV. `cfg_override` wins over embedded metadata.
pub fn load_input(
    path: &Path,
    cfg_override: Option<&ExperimentConfig>,
) -> Result<(CoincidenceHistogram, Option<ExperimentConfig>), CliError> {
    let is_csv = path.extension().is_some_and(|e| e == "csv");
    if is_csv {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let embedded = match io::header_value(&text, "config") {
            Some(c) => Some(ExperimentConfig::from_json(&c)?),
            None => None,
        };
        let cfg = cfg_override.cloned().or(embedded).ok_or_else(|| {
            CliError::format(path, "time tags need a config for the acquisition settings")
        })?;
        let tags = io::read_tags(path)?;
        let hist = sim::histogram_coincidences(&tags, &cfg.acquisition())?;
        Ok((hist, Some(cfg)))
    } else {
        let file = HistogramFile::load(path)?;
        let cfg = cfg_override
            .cloned()
            .or_else(|| file.metadata.as_ref().map(|m| m.config.clone()));
        Ok((file.to_histogram(), cfg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub smoothing: usize,
    pub tail_fraction: f64,
    /// Use the configured model as the fit template.
    pub use_model: bool,
    pub bootstrap_samples: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            smoothing: wavepacket::SMOOTHING_POINTS,
            tail_fraction: analysis::DEFAULT_TAIL_FRACTION,
            use_model: true,
            bootstrap_samples: 200,
        }
    }
}

fn sbr_json(s: Sbr) -> Value {
    match s {
        Sbr::Finite(v) => json!(v),
        Sbr::Unbounded => json!("unbounded"),
    }
}

/// Run the analysis chain and build the report document.
pub fn analyze(
    hist: &CoincidenceHistogram,
    cfg: Option<&ExperimentConfig>,
    opts: &AnalyzeOptions,
) -> Result<Value, CliError> {
    let model = match (cfg, opts.use_model) {
        (Some(c), true) => Some(compute_packet(c)?),
        _ => None,
    };
    let mut aopts = AnalysisOptions {
        smoothing: opts.smoothing,
        tail_fraction: opts.tail_fraction,
        bootstrap_samples: opts.bootstrap_samples,
        ..Default::default()
    };
    if let Some(c) = cfg {
        aopts.chain = c.chain();
        aopts.pump_power = Some(c.drive().pump_power);
        aopts.bootstrap_seed = c.acquisition.rng_seed;
    }
    let r = analysis::analyze(hist, model.as_ref(), &aopts)?;
    let floor = cfg
        .map(|c| sim::expected_background_floor(c.pair_rate_per_s, &c.chain(), &c.acquisition()));
    Ok(json!({
        "config_sha256": cfg.map(|c| c.sha256()),
        "bin_width_ns": r.bin_width * 1e9,
        "n_bins": r.n_bins,
        "n_triggers": hist.n_triggers,
        "total_counts": hist.total(),
        "baseline_counts_per_bin": r.baseline.value,
        "baseline_sigma": r.baseline.sigma,
        "baseline_stable": r.baseline.stable,
        "expected_background_floor": floor,
        "temporal_fwhm_s": r.temporal_fwhm,
        "temporal_fwhm_sigma_s": r.temporal_fwhm_sigma,
        "model_temporal_fwhm_s": r.model_temporal_fwhm,
        "spectral_fwhm_hz": r.spectral_fwhm,
        "model_spectral_fwhm_hz": r.model_spectral_fwhm,
        "sbr": sbr_json(r.sbr),
        "sbr_smoothed_peak": sbr_json(r.sbr_smoothed),
        "sbr_raw_peak": sbr_json(r.sbr_raw),
        "g2_cross_zero": r.g2_cross_zero,
        "cs_violation_factor": r.cs_violation_factor,
        "true_coincidences": r.true_coincidences,
        "true_coincidences_sigma": r.true_coincidences_sigma,
        "generated_pair_rate_per_s": r.generated_pair_rate,
        "generated_pair_rate_sigma_per_s": r.generated_pair_rate_sigma,
        "brightness_pairs_per_s_mW": r.brightness,
        "spectral_brightness_pairs_per_s_mW_MHz": r.spectral_brightness,
        "template_amplitude": r.template.as_ref().map(|t| t.amplitude),
        "template_baseline": r.template.as_ref().map(|t| t.baseline),
    }))
}

pub fn error_report(e: &CliError) -> Value {
    json!({ "error": { "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() } })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitRequest {
    pub free: Vec<FitParam>,
    pub init: Vec<(FitParam, f64)>,
    pub bounds: Vec<(FitParam, f64, f64)>,
    pub options: FitOptions,
}

/// Parse `name=value,...` for `--init`.
pub fn parse_assignments(arg: &str) -> Result<Vec<(FitParam, f64)>, CliError> {
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("expected name=value, got `{item}`")))?;
            let p = parse_param(k)?;
            let v = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad number `{v}`")))?;
            Ok((p, v))
        })
        .collect()
}

/// Parse `name=lo:hi,...` for `--bounds`.
pub fn parse_bounds(arg: &str) -> Result<Vec<(FitParam, f64, f64)>, CliError> {
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let bad = || CliError::Config(format!("expected name=lo:hi, got `{item}`"));
            let (k, v) = item.split_once('=').ok_or_else(bad)?;
            let (lo, hi) = v.split_once(':').ok_or_else(bad)?;
            let lo = lo.trim().parse().map_err(|_| bad())?;
            let hi = hi.trim().parse().map_err(|_| bad())?;
            Ok((parse_param(k)?, lo, hi))
        })
        .collect()
}

/// Parse `p1,p2` for `--free`; an empty string is the empty set.
pub fn parse_free(arg: &str) -> Result<Vec<FitParam>, CliError> {
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_param)
        .collect()
}

fn parse_param(s: &str) -> Result<FitParam, CliError> {
    FitParam::from_name(s.trim()).ok_or_else(|| {
        CliError::Config(format!(
            "unknown fit parameter `{s}` (expected omega_c, gamma, alpha, amplitude or baseline)"
        ))
    })
}

/// Fit and build the report. Amplitude and baseline start from a linear
/// fit of the starting model unless given explicitly.
pub fn fit(
    hist: &CoincidenceHistogram,
    cfg: &ExperimentConfig,
    req: &FitRequest,
) -> Result<(fit::FitResult, Value), CliError> {
    let ctx = ModelContext {
        medium: cfg.medium(),
        drive: cfg.drive(),
        consts: cfg.constants(),
    };
    let mut initial = FitParams {
        omega_c: ctx.drive.omega_c,
        gamma: ctx.medium.gamma,
        alpha: ctx.medium.alpha,
        amplitude: 0.0,
        baseline: 0.0,
    };
    for &(p, v) in &req.init {
        initial.set(p, v);
    }
    let explicit = |p: FitParam| req.init.iter().any(|(q, _)| *q == p);
    if !explicit(FitParam::Amplitude) || !explicit(FitParam::Baseline) {
        let m = model::MediumParams {
            alpha: initial.alpha,
            gamma: initial.gamma,
            ..ctx.medium
        };
        let d = ctx.drive.with_omega_c(initial.omega_c);
        let g = wavepacket::GridSpec::auto(&m, &d)?;
        let wp = wavepacket::compute_wavepacket(&m, &d, &g, &ctx.consts)?;
        let data = analysis::exposure_corrected(hist);
        let t = wp.rebin_range(hist.bin_width, 0, hist.len()).values;
        let lin = analysis::template_fit(&data, &t, 1)?;
        if !explicit(FitParam::Amplitude) {
            initial.amplitude = lin.amplitude.max(0.0);
        }
        if !explicit(FitParam::Baseline) {
            initial.baseline = lin.baseline.max(0.0);
        }
    }
    let mut bounds = Bounds::around(&initial);
    for &(p, lo, hi) in &req.bounds {
        bounds.lower.set(p, lo);
        bounds.upper.set(p, hi);
    }
    let res = fit::fit_wavepacket(hist, &ctx, initial, &req.free, &bounds, &req.options)?;

    let p = res.params;
    let m = model::MediumParams {
        alpha: p.alpha,
        gamma: p.gamma,
        ..ctx.medium
    };
    let d = ctx.drive.with_omega_c(p.omega_c);
    let wp = wavepacket::compute_wavepacket(&m, &d, &res.grid, &ctx.consts)?;
    let sigma: Value = match &res.sigma {
        Some(s) => res
            .free
            .iter()
            .zip(s)
            .map(|(f, v)| (f.name().to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>()
            .into(),
        None => Value::Null,
    };
    let doc = json!({
        "config_sha256": cfg.sha256(),
        "free": res.free.iter().map(|f| f.name()).collect::<Vec<_>>(),
        "params": {
            "omega_c_per_gamma": p.omega_c,
            "decoherence_per_gamma": p.gamma,
            "alpha": p.alpha,
            "amplitude": p.amplitude,
            "baseline_counts_per_bin": p.baseline,
        },
        "sigma": sigma,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "temporal_fwhm_s": wavepacket::temporal_fwhm_at_resolution(&wp, hist.bin_width).ok(),
        "spectral_fwhm_hz": wavepacket::spectral_fwhm_of_wavepacket(&wp).ok(),
    });
    Ok((res, doc))
}
