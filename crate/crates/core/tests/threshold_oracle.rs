//! Closed-form bifurcation onset against an independent brute-force search.

use chemduff::duffing::{critical_point, critical_point_leading_order, steady_amplitudes, ResonatorParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How far the amplitude cubic is inside its three-root region at `(F, ω)`.
///
/// In units where the damping term is one the cubic is
/// `p(ζ) = ζ³ + Bζ² + Cζ − f`; three positive roots exist exactly when the
/// local maximum is above zero and the local minimum below. Returns the
/// smaller of the two margins, negative outside the region. Evaluating the
/// margins directly avoids the cancellation in the textbook discriminant.
fn discriminant(p: &ResonatorParams, force: f64, omega: f64) -> f64 {
    let d = p.m_eff() * (p.omega0().powi(2) - omega * omega);
    let c = 0.75 * p.alpha();
    let g = p.gamma() * omega;
    let delta = d / g;
    let b = 2.0 * c.signum() * delta;
    let cc = delta * delta + 1.0;
    let f = force * force * c.abs() / g.powi(3);
    let disc = b * b - 3.0 * cc;
    if disc < 0.0 || b > 0.0 {
        return -1.0;
    }
    let poly = |z: f64| ((z + b) * z + cc) * z - f;
    let z1 = (-b - disc.sqrt()) / 3.0;
    let z2 = (-b + disc.sqrt()) / 3.0;
    poly(z1).min(-poly(z2))
}

/// Largest discriminant over frequency: dense scan then golden section.
fn best_discriminant(p: &ResonatorParams, force: f64) -> (f64, f64) {
    let w0 = p.omega0();
    let span = (12.0 / p.q()).min(0.9) * w0;
    let n = 2000;
    let h = span / n as f64;
    let at = |i: usize| w0 - span / 2.0 + h * i as f64;
    let (mut best_i, mut best) = (0, f64::MIN);
    for i in 0..=n {
        let v = discriminant(p, force, at(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut a, mut b) = (at(best_i) - h, at(best_i) + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..120 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if discriminant(p, force, x1) > discriminant(p, force, x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let w = 0.5 * (a + b);
    (w, discriminant(p, force, w))
}

/// Smallest drive with a bistable frequency, by bisection on the sign of the
/// largest discriminant.
fn brute_force_onset(p: &ResonatorParams) -> (f64, f64) {
    let guess = critical_point_leading_order(p).unwrap().force;
    let (mut lo, mut hi) = (0.5 * guess, 2.0 * guess);
    assert!(best_discriminant(p, lo).1 < 0.0 && best_discriminant(p, hi).1 > 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if best_discriminant(p, mid).1 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let f = 0.5 * (lo + hi);
    (f, best_discriminant(p, hi).0)
}

fn random_params(rng: &mut ChaCha8Rng) -> ResonatorParams {
    let k = 10f64.powf(rng.random_range(-1.0..2.0));
    let omega0 = 10f64.powf(rng.random_range(4.0..8.0));
    let q = 10f64.powf(rng.random_range(1.0..4.0));
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let alpha = sign * 10f64.powf(rng.random_range(10.0..24.0));
    let m_eff = k / (omega0 * omega0);
    ResonatorParams::from_stiffness(2.0 * m_eff, m_eff, k, q, alpha, 1.0).unwrap()
}

#[test]
fn closed_form_matches_bisection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let cp = critical_point(&p).unwrap();
        let (f, w) = brute_force_onset(&p);
        worst = worst.max((cp.force / f - 1.0).abs());
        assert!(((w - cp.omega) / p.omega0()).abs() < 1e-3 / p.q());
    }
    assert!(worst < 1e-6, "worst relative gap {worst:e}");
}

#[test]
fn root_count_changes_at_onset() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let cp = critical_point(&p).unwrap();
        let (w, _) = best_discriminant(&p, cp.force * (1.0 + 1e-4));
        assert_eq!(steady_amplitudes(&p, cp.force * (1.0 + 1e-4), w).unwrap().len(), 3);
        let below = cp.force * (1.0 - 1e-4);
        assert!(best_discriminant(&p, below).1 < 0.0);
        assert_eq!(steady_amplitudes(&p, below, cp.omega).unwrap().len(), 1);
    }
}
