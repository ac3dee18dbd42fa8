use biphoton_core::analysis;
use biphoton_core::sim::{self, AcquisitionConfig, Channel, DelaySampler, DetectorChain};
use biphoton_core::wavepacket::{self, GridSpec, WavePacket};
use biphoton_core::{DriveParams, MediumParams, PhysicalConstants};

fn model() -> WavePacket {
    let m = MediumParams::new(110.0, 3.0e-4);
    let d = DriveParams {
        omega_c: 0.42,
        omega_p: 0.32,
        delta_p: 33.3,
        pump_power: 56e-6,
    };
    let g = GridSpec::auto(&m, &d).unwrap();
    wavepacket::compute_wavepacket(&m, &d, &g, &PhysicalConstants::default()).unwrap()
}

fn small_acq(n_trials: u64, seed: u64) -> AcquisitionConfig {
    AcquisitionConfig {
        n_trials,
        rng_seed: seed,
        ..Default::default()
    }
}

#[test]
fn same_seed_same_stream() {
    let s = DelaySampler::new(&model()).unwrap();
    let chain = DetectorChain::default();
    let a = sim::synthesize_time_tags(&s, 3340.0, &chain, &small_acq(2000, 9)).unwrap();
    let b = sim::synthesize_time_tags(&s, 3340.0, &chain, &small_acq(2000, 9)).unwrap();
    let c = sim::synthesize_time_tags(&s, 3340.0, &chain, &small_acq(2000, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn singles_match_poisson_expectation() {
    let s = DelaySampler::new(&model()).unwrap();
    let chain = DetectorChain::default();
    let acq = small_acq(20_000, 1);
    let tags = sim::synthesize_time_tags(&s, 3340.0, &chain, &acq).unwrap();
    let n_s = tags.iter().filter(|r| r.channel == Channel::Stokes).count() as f64;
    let expected = sim::expected_triggers(3340.0, &chain, &acq);
    assert!(
        (n_s - expected).abs() < 5.0 * expected.sqrt(),
        "{n_s} vs {expected}"
    );
    for r in &tags {
        assert!(r.t >= 0.0 && r.t < acq.window);
    }
}

#[test]
fn perfect_detectors_and_no_pairs_give_nothing() {
    let s = DelaySampler::new(&model()).unwrap();
    let tags =
        sim::synthesize_time_tags(&s, 0.0, &DetectorChain::IDEAL, &small_acq(1000, 3)).unwrap();
    assert!(tags.is_empty());
}

#[test]
fn ideal_chain_delays_are_causal() {
    let s = DelaySampler::new(&model()).unwrap();
    let acq = small_acq(200, 4);
    let tags = sim::synthesize_time_tags(&s, 3340.0, &DetectorChain::IDEAL, &acq).unwrap();
    let h = sim::histogram_coincidences(&tags, &acq).unwrap();
    assert!(h.n_triggers > 0 && h.total() > 0);
    // no anti-Stokes photon precedes its Stokes partner; some are lost past
    // the window end
    for group in tags.chunk_by(|a, b| a.trial == b.trial) {
        let mut open = 0i64;
        for r in group {
            open += if r.channel == Channel::Stokes { 1 } else { -1 };
            assert!(open >= 0, "trial {}", r.trial);
        }
    }
}

#[test]
fn histogram_floor_matches_expectation() {
    let s = DelaySampler::new(&model()).unwrap();
    let chain = DetectorChain::default();
    let acq = small_acq(105_000, 5);
    let tags = sim::synthesize_time_tags(&s, 3340.0, &chain, &acq).unwrap();
    let h = sim::histogram_coincidences(&tags, &acq).unwrap();
    let base = analysis::baseline_estimate(&analysis::exposure_corrected(&h), 0.2).unwrap();
    let floor = sim::expected_background_floor(3340.0, &chain, &acq);
    assert!(
        (base.value - floor).abs() < 5.0 * base.sigma.max(floor.sqrt() / 10.0),
        "{base:?} {floor}"
    );
    let tc = sim::expected_true_coincidences(3340.0, &chain, &acq);
    assert!((tc - 840.0).abs() / 840.0 < 0.05, "{tc}");
}
