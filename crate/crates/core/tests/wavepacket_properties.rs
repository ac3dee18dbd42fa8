use biphoton_core::signal::{self, Alignment};
use biphoton_core::wavepacket::{self, GridSpec, WavePacket};
use biphoton_core::{DriveParams, MediumParams, PhysicalConstants};

fn narrowband() -> (MediumParams, DriveParams) {
    (
        MediumParams::new(110.0, 3.0e-4),
        DriveParams {
            omega_c: 0.42,
            omega_p: 0.32,
            delta_p: 33.3,
            pump_power: 56e-6,
        },
    )
}

fn broadband() -> (MediumParams, DriveParams) {
    let (_, d) = narrowband();
    (MediumParams::new(115.0, 4.0e-3), d.with_omega_c(2.1))
}

fn packet(m: &MediumParams, d: &DriveParams) -> WavePacket {
    let g = GridSpec::auto(m, d).unwrap();
    wavepacket::compute_wavepacket(m, d, &g, &PhysicalConstants::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn slow_light_packet_widths() {
    let (m, d) = narrowband();
    let wp = packet(&m, &d);
    let t = wavepacket::temporal_fwhm_at_resolution(&wp, 51.2e-9).unwrap();
    let f = wavepacket::spectral_fwhm_of_wavepacket(&wp).unwrap();
    assert!(rel(t, 13.4e-6) < 0.10, "temporal {t}");
    assert!(rel(f, 50e3) < 0.15, "spectral {f}");
    // frozen values of this implementation
    assert!(rel(t, 13.571e-6) < 1e-3, "{t}");
    assert!(rel(f, 49.70e3) < 1e-3, "{f}");
}

#[test]
fn fast_packet_widths_and_oscillation() {
    let (m, d) = broadband();
    let wp = packet(&m, &d);
    let t = wavepacket::temporal_fwhm_at_resolution(&wp, 6.4e-9).unwrap();
    let f = wavepacket::spectral_fwhm_of_wavepacket(&wp).unwrap();
    assert!(rel(t, 0.57e-6) < 0.10, "temporal {t}");
    assert!(rel(f, 1.20e6) < 0.15, "spectral {f}");

    let binned = wp.rebin(6.4e-9);
    let view = signal::moving_average(&binned.values, 4, Alignment::Trailing).unwrap();
    let top = view.iter().copied().fold(0.0, f64::max);
    let peaks = signal::prominent_maxima(&view, 0.05 * top, 0.05 * top);
    assert!(peaks.len() >= 2, "{peaks:?}");
}

#[test]
fn causality() {
    for (m, d) in [narrowband(), broadband()] {
        let wp = packet(&m, &d);
        assert!(wp.negative_time_fraction() < 0.01);
    }
}

#[test]
fn grid_refinement_changes_little() {
    let c = PhysicalConstants::default();
    for (m, d) in [narrowband(), broadband()] {
        let g = GridSpec::auto(&m, &d).unwrap();
        let fine = GridSpec::new(2 * g.n_points, 2.0 * g.delta_span);
        let a = wavepacket::compute_wavepacket(&m, &d, &g, &c).unwrap();
        let b = wavepacket::compute_wavepacket(&m, &d, &fine, &c).unwrap();
        let bw = wavepacket::suggested_bin_width(&m, &d, &c);
        let (ta, tb) = (
            wavepacket::temporal_fwhm_at_resolution(&a, bw).unwrap(),
            wavepacket::temporal_fwhm_at_resolution(&b, bw).unwrap(),
        );
        let (ia, ib) = (
            wavepacket::packet_rate_integral(&a, &c),
            wavepacket::packet_rate_integral(&b, &c),
        );
        let (fa, fb) = (
            wavepacket::spectral_fwhm_of_wavepacket(&a).unwrap(),
            wavepacket::spectral_fwhm_of_wavepacket(&b).unwrap(),
        );
        assert!(rel(ta, tb) < 0.01, "{ta} {tb}");
        assert!(rel(ia, ib) < 0.01, "{ia} {ib}");
        assert!(rel(fa, fb) < 0.01, "{fa} {fb}");
    }
}

#[test]
fn packet_scales_with_pump_squared() {
    let (m, d) = narrowband();
    let g = GridSpec::auto(&m, &d).unwrap();
    let c = PhysicalConstants::default();
    let a = wavepacket::compute_wavepacket(&m, &d, &g, &c).unwrap();
    let d2 = DriveParams {
        omega_p: 2.0 * d.omega_p,
        ..d
    };
    let b = wavepacket::compute_wavepacket(&m, &d2, &g, &c).unwrap();
    let peak = a.values.iter().copied().fold(0.0, f64::max);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((4.0 * x - y).abs() <= 1e-12 * peak, "{x} {y}");
    }
}

#[test]
fn rate_integral_tracks_closed_form() {
    let c = PhysicalConstants::default();
    let (m, d) = narrowband();
    let mut ratios = Vec::new();
    for oc in [0.4, 0.6, 0.8, 1.0, 1.4, 2.0] {
        let d = d.with_omega_c(oc);
        let g = GridSpec::auto(&m, &d).unwrap();
        let exact = wavepacket::pair_rate_integral(&m, &d, &g, &c).unwrap();
        ratios.push(exact / wavepacket::pair_rate_approx(&m, &d).unwrap());
    }
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    assert!(hi / lo < 1.2, "{ratios:?}");
}
