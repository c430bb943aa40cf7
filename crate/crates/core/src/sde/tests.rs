use std::f64::consts::PI;

use super::*;
use crate::duffing::{steady_amplitudes, ResonatorParams};

fn small(q: f64, alpha: f64) -> ResonatorParams {
    // 1 MHz, 10 N/m
    let omega0 = 2.0 * PI * 1e6;
    let m_eff = 10.0 / (omega0 * omega0);
    ResonatorParams::from_stiffness(2.0 * m_eff, m_eff, 10.0, q, alpha, 1.0).unwrap()
}

#[test]
fn thermal_noise_of_reference_device() {
    let omega0 = 2.0 * PI * 1.58e6;
    let p = ResonatorParams::new(2e-13, 1e-13, omega0, 3100.0, 0.0, 0.83).unwrap();
    let n = thermal_noise_for(&p, 6.0).unwrap();
    assert!(n.seed.is_none());
    assert!((n.s_f.sqrt() / 3.3e-16 - 1.0).abs() < 0.05, "{:e}", n.s_f.sqrt());
    let x_noise = n.s_f.sqrt() * p.q() / p.k();
    assert!((x_noise / 1.0e-13 - 1.0).abs() < 0.05, "{x_noise:e}");
    assert_eq!(thermal_noise_for(&p, 0.0).unwrap().s_f, 0.0);
    let doubled = thermal_noise_for(&p, 12.0).unwrap().s_f;
    assert!((doubled / n.s_f - 2.0).abs() < 1e-12);
    assert!(thermal_noise_for(&p, -1.0).is_err());
}

#[test]
fn preconditions() {
    let p = small(50.0, 0.0);
    let d = DriveSpec::unmodulated(1e-9, p.omega0());
    let period = 2.0 * PI / p.omega0();
    let coarse = simulate_full(&p, &d, &NoiseSpec::silent(), period / 40.0, 1000.0 * period);
    assert!(matches!(coarse, Err(Error::Argument(_))));
    let short = simulate_full(&p, &d, &NoiseSpec::silent(), period / 100.0, 50.0 * period / 100.0);
    assert!(matches!(short, Err(Error::Argument(_))));
    let unseeded = NoiseSpec { s_f: 1e-30, seed: None };
    assert!(simulate_full(&p, &d, &unseeded, period / 100.0, period).is_err());
    let far = DriveSpec::unmodulated(1e-9, 2.0 * p.omega0());
    assert!(matches!(
        simulate_envelope(&p, &far, &NoiseSpec::silent(), 1e-7, 1e-4),
        Err(Error::Domain(_))
    ));
    let slow_limit = 0.1 * p.q() / p.omega0();
    assert!(simulate_envelope(&p, &d, &NoiseSpec::silent(), 2.0 * slow_limit, 1000.0 * slow_limit).is_err());
}

#[test]
fn modulation_warning() {
    let p = small(50.0, 0.0);
    let mut d = DriveSpec::unmodulated(1e-9, p.omega0());
    assert!(d.warnings(&p).is_empty());
    d.mod_depth = 1e-11;
    d.mod_omega = 2.0 * p.omega0() / p.q();
    assert_eq!(d.warnings(&p).len(), 1);
    d.mod_omega = 0.1 * p.omega0() / p.q();
    assert!(d.warnings(&p).is_empty());
}

#[test]
fn divergence_is_reported() {
    let p = small(50.0, 1e30);
    let d = DriveSpec::unmodulated(0.0, p.omega0());
    let period = 2.0 * PI / p.omega0();
    let c = SimConfig::new(period / 100.0, 100.0 * period).initial([1e-3, 0.0]);
    match simulate_full_with(&p, &d, &NoiseSpec::silent(), &c) {
        Err(Error::Divergence { last_finite_time }) => assert!(last_finite_time < 100.0 * period),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn linear_driven_amplitude() {
    let p = small(50.0, 0.0);
    let period = 2.0 * PI / p.omega0();
    for detune in [0.0, 0.5, -1.0] {
        let omega = p.omega0() * (1.0 + detune / p.q());
        let d = DriveSpec::unmodulated(1e-9, omega);
        let c = SimConfig::new(period / 1000.0, 5.0 * period).settle(10.0 * p.q() * period);
        let s = simulate_full_with(&p, &d, &NoiseSpec::silent(), &c).unwrap();
        let peak = s.channels[0].iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let m = p.m_eff();
        let want = 1e-9 / (m * ((p.omega0().powi(2) - omega * omega).powi(2) + (p.omega0() * omega / p.q()).powi(2)).sqrt());
        assert!((peak / want - 1.0).abs() < 0.005, "detune {detune}: {peak:e} vs {want:e}");
    }
}

#[test]
fn deterministic_part_converges_at_second_order() {
    let p = small(20.0, 3e18);
    let d = DriveSpec { force: 2e-8, omega: p.omega0() * 0.98, mod_depth: 5e-9, mod_omega: 1e5, phase0: 0.3 };
    let period = 2.0 * PI / p.omega0();
    let end = |steps: f64| {
        let c = SimConfig::new(period / steps, 20.0 * period).initial([1e-10, 0.0]);
        let s = simulate_full_with(&p, &d, &NoiseSpec::silent(), &c).unwrap();
        s.channels[0][19 * steps as usize]
    };
    let (a, b, c) = (end(100.0), end(200.0), end(400.0));
    let ratio = (a - b) / (b - c);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn identical_inputs_are_bit_identical() {
    let p = small(50.0, -1e18);
    let d = DriveSpec { force: 1e-9, omega: p.omega0(), mod_depth: 1e-11, mod_omega: 1e3, phase0: 0.0 };
    let n = NoiseSpec::new(1e-28, 42);
    let period = 2.0 * PI / p.omega0();
    let a = simulate_full(&p, &d, &n, period / 64.0, 200.0 * period).unwrap();
    let b = simulate_full(&p, &d, &n, period / 64.0, 200.0 * period).unwrap();
    assert_eq!(a, b);
    let c = simulate_full(&p, &d, &n.with_seed(43), period / 64.0, 200.0 * period).unwrap();
    assert_ne!(a.channels, c.channels);
    let dt = 0.01 * p.q() / p.omega0();
    let e1 = simulate_envelope(&p, &d, &n, dt, 1e4 * dt).unwrap();
    let e2 = simulate_envelope(&p, &d, &n, dt, 1e4 * dt).unwrap();
    assert_eq!(e1, e2);
}

#[test]
fn ensemble_order_is_independent_of_workers() {
    let p = small(50.0, 0.0);
    let d = DriveSpec::unmodulated(0.0, p.omega0());
    let n = NoiseSpec::new(1e-28, 5);
    let dt = 0.01 * p.q() / p.omega0();
    let c = SimConfig::new(dt, 500.0 * dt);
    let last = |s: TrajectorySeries| Ok(s.channels[0][s.len() - 1]);
    let one = ensemble(TrajectoryKind::Envelope, &p, &d, &n, &c, 8, 1, last).unwrap();
    let four = ensemble(TrajectoryKind::Envelope, &p, &d, &n, &c, 8, 4, last).unwrap();
    assert_eq!(one, four);
    let mut sorted = one.clone();
    sorted.dedup();
    assert_eq!(sorted.len(), 8);
}

#[test]
fn envelope_settles_on_steady_root() {
    let p = small(200.0, -2e18);
    let cp = crate::duffing::critical_point(&p).unwrap();
    let f = 3.0 * cp.force;
    for omega in [p.omega0() * (1.0 - 2.0 / p.q()), p.omega0() * (1.0 + 1.0 / p.q()), cp.omega] {
        let d = DriveSpec::unmodulated(f, omega);
        let roots = steady_amplitudes(&p, f, omega).unwrap();
        let dt = 0.02 / p.decay_rate();
        for start in [[0.0, 0.0], [0.0, 2.0 * roots.last().unwrap().amplitude]] {
            let c = SimConfig::new(dt, 200.0 * dt).settle(4000.0 * dt).initial(start);
            let s = simulate_envelope_with(&p, &d, &NoiseSpec::silent(), &c).unwrap();
            let a = *s.amplitude().unwrap().last().unwrap();
            let hit = roots.iter().filter(|r| r.stable).any(|r| (a / r.amplitude - 1.0).abs() < 1e-6);
            assert!(hit, "amplitude {a:e} not among {roots:?}");
        }
    }
}

#[test]
fn envelope_equipartition() {
    let p = small(50.0, 0.0);
    let n = thermal_noise_for(&p, 6.0).unwrap().with_seed(11);
    let d = DriveSpec::unmodulated(0.0, p.omega0());
    let tau = 1.0 / p.decay_rate();
    let dt = 0.02 * tau;
    let c = SimConfig::new(dt, 2000.0 * tau).settle(10.0 * tau).stride(10);
    let means = ensemble(TrajectoryKind::Envelope, &p, &d, &n, &c, 16, 4, |s| {
        let a = s.amplitude()?;
        Ok(a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64)
    })
    .unwrap();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    // ⟨x²⟩ = k_B T / k, so the squared envelope averages to twice that
    let want = 2.0 * K_B * 6.0 / p.k();
    assert!((mean / want - 1.0).abs() < 0.03, "{mean:e} vs {want:e}");
}

#[test]
fn bsim_round_trip() {
    let p = small(50.0, -1e18);
    let d = DriveSpec::unmodulated(1e-9, p.omega0());
    let n = NoiseSpec::new(1e-28, 1);
    let dt = 0.01 * p.q() / p.omega0();
    let s = simulate_envelope(&p, &d, &n, dt, 300.0 * dt).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.bsim");
    write_bsim(&path, &s).unwrap();
    let back = read_bsim(&path).unwrap();
    assert_eq!(back.channels, s.channels);
    assert_eq!((back.dt, back.t0, back.kind), (s.dt, s.t0, s.kind));
    assert_eq!(back.names, s.names);
    assert_eq!(back.metadata.get("seed"), s.metadata.get("seed"));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..5], b"BSIM1");
    std::fs::write(&path, b"nope").unwrap();
    assert!(read_bsim(&path).is_err());
    write_csv(dir.path().join("run.csv"), &s).unwrap();
}
