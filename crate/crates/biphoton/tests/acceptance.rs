//! One line per acceptance criterion; exits nonzero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use biphoton::commands::{self, AnalyzeOptions};
use biphoton::config::{ExperimentConfig, SweepConfig};
use biphoton_core::analysis;
use biphoton_core::fit::{self, Bounds, FitOptions, FitParam, FitParams, ModelContext};
use biphoton_core::model;
use biphoton_core::wavepacket::{self, GridSpec};
use biphoton_core::{DriveParams, MediumParams};

type Outcome = Result<String, String>;

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name);
    ExperimentConfig::load(&path).expect("shipped config")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol * target.abs()
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn slow_packet() -> Outcome {
    let (_, s) = commands::wavepacket_summary(&config("narrowband.json")).map_err(e)?;
    let (t, f) = (s.temporal_fwhm_s, s.spectral_fwhm_hz);
    check(
        within(t, 13.4e-6, 0.10) && within(f, 50e3, 0.15),
        format!(
            "temporal {:.3} us (13.4 +-10%), spectral {:.2} kHz (50 +-15%)",
            t * 1e6,
            f / 1e3
        ),
    )
}

fn fast_packet() -> Outcome {
    let (_, s) = commands::wavepacket_summary(&config("broadband.json")).map_err(e)?;
    let (t, f) = (s.temporal_fwhm_s, s.spectral_fwhm_hz);
    check(
        within(t, 0.57e-6, 0.10) && within(f, 1.20e6, 0.15) && s.local_maxima >= 2,
        format!(
            "temporal {:.3} us (0.57 +-10%), spectral {:.3} MHz (1.20 +-15%), {} maxima (>= 2)",
            t * 1e6,
            f / 1e6,
            s.local_maxima
        ),
    )
}

fn sweep() -> Result<Vec<commands::SweepRow>, String> {
    let cfg = config("coupling_sweep.json");
    let s: SweepConfig = cfg.sweep.clone().ok_or("sweep config has no sweep")?;
    commands::sweep_rows(&cfg, &s).map_err(e)
}

fn linewidth_scaling(rows: &[commands::SweepRow]) -> Outcome {
    let sxy: f64 = rows.iter().map(|r| r.omega_c_sq * r.spectral_fwhm_hz).sum();
    let sxx: f64 = rows.iter().map(|r| r.omega_c_sq * r.omega_c_sq).sum();
    let slope = sxy / sxx;
    let worst = rows
        .iter()
        .filter(|r| r.regime_holds)
        .map(|r| (r.linewidth_approx_hz - r.spectral_fwhm_hz).abs() / r.spectral_fwhm_hz)
        .fold(0.0, f64::max);
    let n_regime = rows.iter().filter(|r| r.regime_holds).count();
    check(
        (260e3..=320e3).contains(&slope) && worst < 0.25 && n_regime > 0,
        format!(
            "slope {:.1} kHz per (Omega_c/Gamma)^2 (260..320), worst closed-form error {:.1}% over {n_regime} regime points (< 25%)",
            slope / 1e3,
            worst * 100.0
        ),
    )
}

fn rate_stability(rows: &[commands::SweepRow]) -> Outcome {
    let hi = rows
        .iter()
        .map(|r| r.pair_rate_integral)
        .fold(f64::MIN, f64::max);
    let lo = rows
        .iter()
        .map(|r| r.pair_rate_integral)
        .fold(f64::MAX, f64::min);
    // least squares for y = b / x
    let num: f64 = rows
        .iter()
        .map(|r| r.spectral_brightness / r.omega_c_sq)
        .sum();
    let den: f64 = rows
        .iter()
        .map(|r| 1.0 / (r.omega_c_sq * r.omega_c_sq))
        .sum();
    let b = num / den;
    let worst = rows
        .iter()
        .map(|r| (r.spectral_brightness - b / r.omega_c_sq).abs() / r.spectral_brightness)
        .fold(0.0, f64::max);
    check(
        hi / lo <= 1.15 && worst < 0.20,
        format!(
            "rate max/min {:.3} (<= 1.15), spectral brightness b/x worst residual {:.1}% (< 20%)",
            hi / lo,
            worst * 100.0
        ),
    )
}

fn rate_closed_form(rows: &[commands::SweepRow]) -> Outcome {
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.regime_holds)
        .map(|r| r.pair_rate_integral / r.pair_rate_approx)
        .collect();
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    check(
        !ratios.is_empty() && hi / lo <= 1.20,
        format!(
            "integral/approx in [{lo:.4}, {hi:.4}] over {} points, spread {:.3} (<= 1.20)",
            ratios.len(),
            hi / lo
        ),
    )
}

fn analyzed_narrowband() -> Result<serde_json::Value, String> {
    let cfg = config("narrowband.json");
    let (_, hist) = commands::simulate(&cfg).map_err(e)?;
    commands::analyze(&hist, Some(&cfg), &AnalyzeOptions::default()).map_err(e)
}

fn nonclassicality(report: &serde_json::Value) -> Outcome {
    let g = analysis::g2_cross_zero(3.4).map_err(e)?;
    let r = analysis::cauchy_schwarz_factor(g, 2.0, 2.0).map_err(e)?;
    let mc = report["cs_violation_factor"]
        .as_f64()
        .ok_or("no CS factor in report")?;
    check(
        (g - 4.4).abs() < 1e-12 && (r - 4.84).abs() < 1e-12 && mc > 1.0,
        format!("SBR 3.4 -> g2 {g} -> factor {r:.4}; simulated factor {mc:.2} (> 1)"),
    )
}

fn monte_carlo(report: &serde_json::Value) -> Outcome {
    let num = |k: &str| {
        report[k]
            .as_f64()
            .ok_or_else(|| format!("no `{k}` in report"))
    };
    let (rate, rate_sd) = (
        num("generated_pair_rate_per_s")?,
        num("generated_pair_rate_sigma_per_s")?,
    );
    let (t, t_sd, t_model) = (
        num("temporal_fwhm_s")?,
        num("temporal_fwhm_sigma_s")?,
        num("model_temporal_fwhm_s")?,
    );
    let sbr = num("sbr")?;
    let rate_ok = (rate - 3340.0).abs() <= 3.0 * rate_sd;
    let fwhm_ok = (t - t_model).abs() <= 2.0 * t_sd;
    let sbr_ok = within(sbr, 3.4, 0.30);
    check(
        rate_ok && fwhm_ok && sbr_ok,
        format!(
            "rate {rate:.0} +- {rate_sd:.0} (3340 within 3 sigma: {rate_ok}), FWHM {:.2} +- {:.2} us vs model {:.2} (2 sigma: {fwhm_ok}), SBR {sbr:.2} (3.4 +-30%: {sbr_ok})",
            t * 1e6,
            t_sd * 1e6,
            t_model * 1e6
        ),
    )
}

fn property_suite() -> Outcome {
    let cfg = config("narrowband.json");
    let (m, d, c) = (cfg.medium(), cfg.drive(), cfg.constants());
    let mut notes = Vec::new();

    let g = GridSpec::auto(&m, &d).map_err(e)?;
    let wp = wavepacket::compute_wavepacket(&m, &d, &g, &c).map_err(e)?;
    let neg = wp.negative_time_fraction();
    notes.push(format!("negative-time {neg:.1e}"));
    let causal = neg < 0.01;

    let fine = GridSpec::new(2 * g.n_points, 2.0 * g.delta_span);
    let wf = wavepacket::compute_wavepacket(&m, &d, &fine, &c).map_err(e)?;
    let bw = cfg.acquisition().bin_width;
    let ta = wavepacket::temporal_fwhm_at_resolution(&wp, bw).map_err(e)?;
    let tb = wavepacket::temporal_fwhm_at_resolution(&wf, bw).map_err(e)?;
    let (ia, ib) = (
        wavepacket::packet_rate_integral(&wp, &c),
        wavepacket::packet_rate_integral(&wf, &c),
    );
    let refine = ((ta - tb) / tb).abs().max(((ia - ib) / ib).abs());
    notes.push(format!("refinement change {:.2e}", refine));

    let d2 = DriveParams {
        omega_p: 3.0 * d.omega_p,
        ..d
    };
    let w2 = wavepacket::compute_wavepacket(&m, &d2, &g, &c).map_err(e)?;
    let peak = wp.values.iter().copied().fold(0.0, f64::max);
    let scaling = wp
        .values
        .iter()
        .zip(&w2.values)
        .map(|(a, b)| (9.0 * a - b).abs())
        .fold(0.0, f64::max)
        / (9.0 * peak);
    notes.push(format!("pump scaling error {scaling:.1e}"));

    let ideal = MediumParams::new(110.0, 0.0);
    let chi_self = model::self_susceptibility(0.0, &ideal, &d).map_err(e)?;
    let trans = model::eit_transmission(0.0, &ideal, &d).map_err(e)?;
    notes.push(format!("|self(0)| {:.0e}, T(0) {trans}", chi_self.norm()));

    let ctx = ModelContext {
        medium: m,
        drive: d,
        consts: c,
    };
    let data: Vec<f64> = wp
        .rebin_range(bw, 0, cfg.acquisition().n_bins())
        .values
        .iter()
        .map(|v| 3.3e6 * v + 1.3)
        .collect();
    let start = FitParams {
        omega_c: 0.5,
        gamma: m.gamma,
        alpha: m.alpha,
        amplitude: 3.0e6,
        baseline: 1.0,
    };
    let free = [FitParam::OmegaC, FitParam::Amplitude, FitParam::Baseline];
    let ctx_start = ModelContext {
        drive: d.with_omega_c(0.5),
        ..ctx
    };
    let r = fit::fit_series(
        &data,
        bw,
        &ctx_start,
        start,
        &free,
        &Bounds::around(&start),
        &FitOptions::default(),
    )
    .map_err(e)?;
    let fit_err = (r.params.omega_c - d.omega_c).abs() / d.omega_c;
    notes.push(format!("fit Omega_c {:.5}", r.params.omega_c));

    let mut small = cfg.clone();
    small.acquisition.n_trials = 5000;
    let dir = tempfile::tempdir().map_err(e)?;
    let mut files = Vec::new();
    for k in 0..2 {
        let (h, t) = (
            dir.path().join(format!("h{k}.json")),
            dir.path().join(format!("t{k}.csv")),
        );
        commands::cmd_simulate(&small, &h, &t).map_err(e)?;
        files.push((std::fs::read(&h).map_err(e)?, std::fs::read(&t).map_err(e)?));
    }
    let deterministic = files[0] == files[1];
    notes.push(format!("simulator byte-identical {deterministic}"));

    check(
        causal
            && refine < 0.01
            && scaling < 1e-12
            && chi_self.norm() == 0.0
            && (trans - 1.0).abs() < 1e-12
            && fit_err < 0.01
            && deterministic,
        notes.join(", "),
    )
}

fn brightness_units() -> Outcome {
    let b = analysis::brightness(3340.0, 56e-6).map_err(e)?;
    let sb = analysis::spectral_brightness(b, 50e3).map_err(e)?;
    check(
        within(sb, 1.2e6, 0.05),
        format!("{sb:.4e} pairs/(s mW MHz) (1.2e6 +-5%)"),
    )
}

fn phase_mismatch() -> Outcome {
    let cfg = config("narrowband.json");
    let phi = model::phase_mismatch(&cfg.geometry()).map_err(e)?;
    check(
        within(phi, 0.23, 0.05),
        format!(
            "{phi:.4} rad at L = {} cm (0.23 +-5%)",
            cfg.geometry.length_cm
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let r = f();
        let dt = t0.elapsed().as_secs_f64();
        match r {
            Ok(m) => println!("PASS criterion {n:>2} [{name}] {m} ({dt:.1} s)"),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {n:>2} [{name}] {m} ({dt:.1} s)");
            }
        }
    };
    report(1, "slow-light packet", &mut slow_packet);
    report(2, "fast packet", &mut fast_packet);
    let rows = sweep();
    let with_rows = |f: fn(&[commands::SweepRow]) -> Outcome| -> Outcome {
        match &rows {
            Ok(r) => f(r),
            Err(m) => Err(format!("sweep failed: {m}")),
        }
    };
    report(3, "linewidth scaling", &mut || with_rows(linewidth_scaling));
    report(4, "rate stability", &mut || with_rows(rate_stability));
    report(5, "rate closed form", &mut || with_rows(rate_closed_form));
    let analyzed = analyzed_narrowband();
    let with_report = |f: fn(&serde_json::Value) -> Outcome| -> Outcome {
        match &analyzed {
            Ok(r) => f(r),
            Err(m) => Err(format!("simulation/analysis failed: {m}")),
        }
    };
    report(6, "nonclassicality", &mut || with_report(nonclassicality));
    report(7, "monte carlo round trip", &mut || {
        with_report(monte_carlo)
    });
    report(8, "property suite", &mut property_suite);
    report(9, "spectral brightness units", &mut brightness_units);
    report(10, "phase mismatch", &mut phase_mismatch);
    if failed == 0 {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 10 criteria fail");
        ExitCode::FAILURE
    }
}
