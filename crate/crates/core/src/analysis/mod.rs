//! Measurement pipeline for switching experiments: lock-in demodulation,
//! Welch spectra, two-state detection, SNR, the stochastic-resonance
//! inversion for the total force noise, and amplitude histograms.

mod demod;
mod spectrum;
mod sr;
mod telegraph;

pub use demod::{decimate, demodulate, lockin_run, LowPass};
pub use spectrum::{snr_at, snr_in_bandwidth, welch_psd, SpectrumResult, WindowKind};
pub use sr::{two_state_clamped, OperatingPoint, SrExperiment, SrOutcome, DEFAULT_THRESHOLD_FRACTIONS};
pub use telegraph::{schmitt_thresholds, thresholds_at, two_state, TelegraphResult};

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Everything in the stochastic-resonance relation except the noise and SNR.
///
/// `SNR = π (γ_k/δω) x_m² (δF m ω / S)²`, with `m` the effective mass,
/// `x_m` half the separation of the two amplitude plateaus, `δω` the
/// nonlinear shift of the response peak from the linear resonance and
/// `γ_k` the unmodulated switching rate. `SNR` is referenced to the
/// bandwidth of [`SrInputs::reference_bandwidth`] (see [`snr_in_bandwidth`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SrInputs {
    /// Modulation depth, N.
    pub d_f: f64,
    pub m_eff: f64,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
    pub x_m: f64,
    pub delta_omega: f64,
    /// s⁻¹.
    pub gamma_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SrInversion {
    pub snr: f64,
    /// N²/Hz.
    pub s_total: f64,
    pub inputs: SrInputs,
}

impl SrInputs {
    fn check(&self) -> Result<()> {
        let all = [self.d_f, self.m_eff, self.omega, self.x_m, self.delta_omega, self.gamma_k];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::arg("stochastic-resonance inputs must be positive and finite"))
        }
    }

    /// Reference bandwidth `B = 4δω/π` in Hz (δω taken numerically) for the
    /// spectral SNR `P_peak / (S_background B)`.
    ///
    /// Two-state linear response for a symmetric telegraph with per-state
    /// escape rate `γ_k` and rates `γ_k exp(±η cos Ωt)` gives
    /// `P_peak / S_background = γ_k η² / 4`, independent of `Ω`. Reducing the
    /// slow quadrature to one coordinate, the modulation tilts it by
    /// `δF/(2mω)`, the force noise gives it intensity `D = S/(8m²ω²)`, and
    /// the wells are `2x_m` apart, so `η = x_m δF/(2mωD) = 4x_m δF mω/S`.
    /// The spectral SNR is then `4γ_k x_m²(δF mω/S)²/B`, which is the
    /// relation above exactly when `B = 4δω/π`.
    pub fn reference_bandwidth(&self) -> f64 {
        4.0 * self.delta_omega / PI
    }

    /// SNR produced by a total force noise `s_total` (N²/Hz).
    pub fn snr_for(&self, s_total: f64) -> Result<f64> {
        self.check()?;
        if !(s_total > 0.0) {
            return Err(Error::arg("noise power must be positive"));
        }
        let r = self.d_f * self.m_eff * self.omega / s_total;
        Ok(PI * self.gamma_k / self.delta_omega * self.x_m * self.x_m * r * r)
    }
}

/// Inverts the stochastic-resonance relation:
/// `S = δF m ω x_m √(π γ_k / (δω SNR))`.
pub fn infer_total_noise(snr: f64, inputs: &SrInputs) -> Result<SrInversion> {
    inputs.check()?;
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::arg(format!("SNR must be positive and finite, got {snr:e}")));
    }
    let s_total = inputs.d_f * inputs.m_eff * inputs.omega * inputs.x_m
        * (PI * inputs.gamma_k / (inputs.delta_omega * snr)).sqrt();
    Ok(SrInversion { snr, s_total, inputs: *inputs })
}

/// Equal-width histogram over `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts below and at-or-above `threshold`, splitting bins by their
    /// centres.
    pub fn mass_split(&self, threshold: f64) -> (u64, u64) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, c) in self.counts.iter().enumerate() {
            if 0.5 * (self.edges[i] + self.edges[i + 1]) < threshold {
                lo += c;
            } else {
                hi += c;
            }
        }
        (lo, hi)
    }

    /// Number of well-separated peaks of the 3-bin smoothed histogram. Two
    /// maxima count separately when the valley between them falls below half
    /// of the smaller one; maxima under `floor` times the tallest are noise.
    pub fn modes(&self, floor: f64) -> usize {
        let n = self.counts.len();
        let c: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                self.counts[lo..=hi].iter().sum::<u64>() as f64 / (hi - lo + 1) as f64
            })
            .collect();
        let top = c.iter().cloned().fold(0.0, f64::max);
        let mut peaks: Vec<f64> = Vec::new();
        let mut valley = f64::INFINITY;
        for i in 0..n {
            let left = if i == 0 { f64::NEG_INFINITY } else { c[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { c[i + 1] };
            valley = valley.min(c[i]);
            if c[i] > left && c[i] >= right && c[i] >= floor * top {
                match peaks.last_mut() {
                    Some(last) if valley >= 0.5 * last.min(c[i]) => *last = last.max(c[i]),
                    _ => peaks.push(c[i]),
                }
                valley = c[i];
            }
        }
        peaks.len()
    }

    /// Columns `bin_lo, bin_hi, count`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.counts.len();
        let counts: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        crate::csvio::write_columns(path, &["bin_lo", "bin_hi", "count"], &[&self.edges[..n], &self.edges[1..], &counts])
    }
}

pub fn amplitude_histogram(series: &[f64], n_bins: usize) -> Result<Histogram> {
    if n_bins < 8 {
        return Err(Error::arg("need at least 8 bins"));
    }
    if series.is_empty() || series.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("series must be non-empty and finite"));
    }
    let (min, max) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (lo, width) = if max > min {
        (min, (max - min) / n_bins as f64)
    } else {
        // constant data: everything lands in the first bin
        let w = if min == 0.0 { 1.0 } else { min.abs() * 1e-9 };
        (min, w)
    };
    let mut counts = vec![0u64; n_bins];
    for &x in series {
        let k = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let mut edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    if max > min {
        edges[n_bins] = max;
    }
    Ok(Histogram { edges, counts })
}

/// Number of effectively independent samples of the occupancy of a random
/// telegraph signal observed for `duration`: `T/(2τ_c)` with
/// `1/τ_c = 1/dwell_low + 1/dwell_high`.
pub fn effective_samples(duration: f64, dwell_low: f64, dwell_high: f64) -> Result<f64> {
    if !(duration > 0.0 && dwell_low > 0.0 && dwell_high > 0.0) {
        return Err(Error::arg("duration and dwell times must be positive"));
    }
    let tau_c = 1.0 / (1.0 / dwell_low + 1.0 / dwell_high);
    Ok(duration / (2.0 * tau_c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionTest {
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Pooled two-proportion z-test of `p1` (from `n1` samples) against `p2`.
pub fn two_proportion_test(p1: f64, n1: f64, p2: f64, n2: f64) -> Result<ProportionTest> {
    if !((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2) && n1 > 0.0 && n2 > 0.0) {
        return Err(Error::arg("proportions must lie in [0, 1] with positive sample counts"));
    }
    let pooled = (p1 * n1 + p2 * n2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    if se == 0.0 {
        let same = p1 == p2;
        return Ok(ProportionTest {
            z: if same { 0.0 } else { f64::INFINITY },
            p_value: if same { 1.0 } else { 0.0 },
        });
    }
    let z = (p1 - p2) / se;
    let normal = Normal::standard();
    Ok(ProportionTest { z, p_value: 2.0 * normal.sf(z.abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample() -> SrInputs {
        SrInputs { d_f: 1.8e-13, m_eff: 1e-13, omega: 2.0 * PI * 1.58e6, x_m: 3e-9, delta_omega: 2.0 * PI * 40.0, gamma_k: 2.0 }
    }

    #[test]
    fn inversion_is_exact_inverse() {
        let inputs = sample();
        for s in [1e-33, 1.09e-31, 4.7e-29] {
            let snr = inputs.snr_for(s).unwrap();
            let back = infer_total_noise(snr, &inputs).unwrap();
            assert!((back.s_total / s - 1.0).abs() < 1e-12);
            assert_eq!(back.snr, snr);
        }
        assert!(infer_total_noise(0.0, &inputs).is_err());
        assert!(infer_total_noise(f64::NAN, &inputs).is_err());
        let bad = SrInputs { x_m: -1.0, ..inputs };
        assert!(infer_total_noise(1.0, &bad).is_err());
        assert!(inputs.snr_for(0.0).is_err());
    }

    #[test]
    fn snr_scales_inverse_square_in_noise() {
        let i = sample();
        let a = i.snr_for(1e-31).unwrap();
        let b = i.snr_for(2e-31).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_and_edges() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let h = amplitude_histogram(&x, 10).unwrap();
        assert_eq!(h.total(), 1000);
        assert_eq!(h.counts, vec![100; 10]);
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(h.edges[10], 1.0);
        assert!(amplitude_histogram(&x, 7).is_err());
        let c = amplitude_histogram(&[2.0; 50], 8).unwrap();
        assert_eq!(c.counts[0], 50);
        assert_eq!(c.counts.iter().filter(|&&k| k > 0).count(), 1);
    }

    #[test]
    fn histogram_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let bimodal: Vec<f64> = (0..20_000).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 } + 0.1 * g()).collect();
        let h = amplitude_histogram(&bimodal, 60).unwrap();
        assert_eq!(h.modes(0.05), 2);
        let (lo, hi) = h.mass_split(1.5);
        assert!((lo as f64 / hi as f64 - 1.0).abs() < 0.05);
        let unimodal: Vec<f64> = (0..20_000).map(|_| 1.0 + 0.1 * g()).collect();
        assert_eq!(amplitude_histogram(&unimodal, 60).unwrap().modes(0.05), 1);
    }

    #[test]
    fn histogram_csv() {
        let dir = tempfile::tempdir().unwrap();
        let h = amplitude_histogram(&[0.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 8).unwrap();
        h.write_csv(dir.path().join("h.csv")).unwrap();
        let (head, cols) = crate::csvio::read_columns(dir.path().join("h.csv")).unwrap();
        assert_eq!(head, ["bin_lo", "bin_hi", "count"]);
        assert_eq!(cols[2].iter().sum::<f64>(), 10.0);
    }

    #[test]
    fn proportion_test() {
        let same = two_proportion_test(0.5, 1000.0, 0.5, 1000.0).unwrap();
        assert_eq!(same.z, 0.0);
        assert!((same.p_value - 1.0).abs() < 1e-12);
        // textbook: 0.55 vs 0.45 with 500 each, z = 0.1/sqrt(0.25·0.004) = 3.1623
        let t = two_proportion_test(0.55, 500.0, 0.45, 500.0).unwrap();
        assert!((t.z - 3.16228).abs() < 1e-4);
        assert!((t.p_value - 0.001565).abs() < 1e-5);
        assert!(two_proportion_test(1.2, 1.0, 0.5, 1.0).is_err());
        let n = effective_samples(100.0, 1.0, 1.0).unwrap();
        assert!((n - 100.0).abs() < 1e-12);
    }
}
