use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Rect,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rect => vec![1.0; n],
            WindowKind::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hann => "hann",
            WindowKind::Rect => "rect",
        }
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Hz, ascending from 0.
    pub f_grid: Vec<f64>,
    /// units²/Hz.
    pub psd: Vec<f64>,
    /// Bin spacing, Hz.
    pub resolution: f64,
    pub window: WindowKind,
    pub segments: usize,
    /// Equivalent noise bandwidth of one bin, Hz.
    pub enbw: f64,
}

impl SpectrumResult {
    /// Rectangle-rule integral of the PSD; equals the mean windowed power.
    pub fn integral(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    /// Index of the bin nearest `f` (Hz) if `f` lies on the grid.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        if !(f >= 0.0) {
            return None;
        }
        let k = (f / self.resolution).round() as usize;
        (k < self.psd.len()).then_some(k)
    }

    /// Columns `f_Hz, psd`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::csvio::write_columns(path, &["f_Hz", "psd"], &[&self.f_grid, &self.psd])
    }
}

/// Segments per parallel work unit. Fixed so the summation order, and with
/// it every output bit, does not depend on the thread count.
const CHUNK: usize = 8;

/// Welch average of windowed periodograms with per-segment mean removal.
///
/// Scaling is one-sided, `2 dt |X_k|² / Σw²` away from DC and Nyquist, so a
/// white unit-variance input gives a flat PSD of `2 dt` that integrates to 1.
pub fn welch_psd(series: &[f64], dt: f64, segment_length: usize, overlap: f64, window: WindowKind) -> Result<SpectrumResult> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::arg("dt must be positive"));
    }
    if segment_length < 2 {
        return Err(Error::arg("segment length must be at least 2"));
    }
    if segment_length > series.len() {
        return Err(Error::arg(format!(
            "segment length {segment_length} exceeds series length {}",
            series.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::arg("overlap must lie in [0, 1)"));
    }
    let n = segment_length;
    let step = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let segments = (series.len() - n) / step + 1;
    let w = window.coefficients(n);
    let wsum: f64 = w.iter().sum();
    let wpow: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;

    let chunks: Vec<Vec<f64>> = (0..segments.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; bins];
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            for s in c * CHUNK..((c + 1) * CHUNK).min(segments) {
                let seg = &series[s * step..s * step + n];
                let mean = seg.iter().sum::<f64>() / n as f64;
                for ((b, &x), &wi) in buf.iter_mut().zip(seg).zip(&w) {
                    *b = Complex::new((x - mean) * wi, 0.0);
                }
                fft.process(&mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            acc
        })
        .collect();

    let mut psd = vec![0.0; bins];
    for chunk in &chunks {
        for (p, a) in psd.iter_mut().zip(chunk) {
            *p += a;
        }
    }
    let scale = dt / (wpow * segments as f64);
    for (k, p) in psd.iter_mut().enumerate() {
        let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
        *p *= scale * one_sided;
    }
    let resolution = 1.0 / (n as f64 * dt);
    Ok(SpectrumResult {
        f_grid: (0..bins).map(|k| k as f64 * resolution).collect(),
        psd,
        resolution,
        window,
        segments,
        enbw: wpow / (wsum * wsum) / dt,
    })
}

/// Peak bin over background at `omega` (rad/s). The background is the
/// median of the bins 4 to 11 away on either side.
pub fn snr_at(spec: &SpectrumResult, omega: f64) -> Result<f64> {
    let f = omega / (2.0 * PI);
    let k = spec
        .bin_of(f)
        .filter(|&k| (f - spec.f_grid[k]).abs() <= spec.resolution)
        .ok_or_else(|| Error::arg(format!("{f:e} Hz is not on the frequency grid")))?;
    if k < 11 || k + 11 >= spec.psd.len() {
        return Err(Error::arg(format!("{f:e} Hz is too close to the grid edge for a background estimate")));
    }
    let mut bg: Vec<f64> = spec.psd[k - 11..=k - 4].iter().chain(&spec.psd[k + 4..=k + 11]).copied().collect();
    bg.sort_by(f64::total_cmp);
    let median = 0.5 * (bg[7] + bg[8]);
    if median <= 0.0 {
        return Err(Error::arg("background is zero near the requested frequency"));
    }
    Ok(spec.psd[k] / median)
}

/// Peak power above background divided by the background power in
/// `bandwidth` Hz: `(snr_at − 1)·ENBW/bandwidth`.
pub fn snr_in_bandwidth(spec: &SpectrumResult, omega: f64, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::arg("bandwidth must be positive"));
    }
    Ok((snr_at(spec, omega)? - 1.0) * spec.enbw / bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_is_flat_at_two() {
        let x = white(1 << 18, 1);
        for window in [WindowKind::Hann, WindowKind::Rect] {
            let s = welch_psd(&x, 1.0, 1024, 0.5, window).unwrap();
            assert!((s.integral() - 1.0).abs() < 0.05, "{}", s.integral());
            let interior = &s.psd[1..s.psd.len() - 1];
            let mean = interior.iter().sum::<f64>() / interior.len() as f64;
            assert!((mean - 2.0).abs() < 0.05, "{mean}");
            assert_eq!(s.f_grid[0], 0.0);
            assert!((s.f_grid.last().unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_power_is_half_amplitude_squared() {
        let dt = 1e-3;
        let amp = 3.0;
        let x: Vec<f64> = (0..100_000).map(|i| amp * (2.0 * PI * 37.3 * i as f64 * dt + 0.4).cos()).collect();
        let s = welch_psd(&x, dt, 4096, 0.5, WindowKind::Hann).unwrap();
        let k = s.bin_of(37.3).unwrap();
        let peak: f64 = s.psd[k - 6..=k + 6].iter().sum::<f64>() * s.resolution;
        assert!((peak / (amp * amp / 2.0) - 1.0).abs() < 0.03, "{peak}");
    }

    #[test]
    fn parseval_within_two_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // AR(1) coloured noise
        let mut y = 0.0;
        let x: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                y = 0.9 * y + z;
                y
            })
            .collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        for window in [WindowKind::Hann, WindowKind::Rect] {
            let s = welch_psd(&x, 0.01, 2048, 0.5, window).unwrap();
            assert!((s.integral() / var - 1.0).abs() < 0.02, "{} vs {var}", s.integral());
        }
    }

    #[test]
    fn rect_parseval_is_exact_for_one_segment() {
        let x = white(512, 3);
        let s = welch_psd(&x, 0.5, 512, 0.0, WindowKind::Rect).unwrap();
        let mean = x.iter().sum::<f64>() / 512.0;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 512.0;
        assert!((s.integral() / var - 1.0).abs() < 1e-12);
        assert_eq!(s.segments, 1);
        assert_eq!(s.enbw, 1.0 / (512.0 * 0.5));
    }

    #[test]
    fn hann_enbw_is_one_and_a_half_bins() {
        let s = welch_psd(&white(4096, 1), 1e-3, 1000, 0.5, WindowKind::Hann).unwrap();
        assert!((s.enbw / s.resolution - 1.5).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        let x = white(100, 1);
        assert!(welch_psd(&x, 1.0, 101, 0.5, WindowKind::Hann).is_err());
        assert!(welch_psd(&x, 1.0, 50, 1.0, WindowKind::Hann).is_err());
        assert!(welch_psd(&x, 1.0, 50, -0.1, WindowKind::Hann).is_err());
        assert!(welch_psd(&x, 0.0, 50, 0.0, WindowKind::Hann).is_err());
    }

    #[test]
    fn snr_of_flat_and_peaked_spectra() {
        let mut s = SpectrumResult {
            f_grid: (0..100).map(|k| k as f64).collect(),
            psd: vec![1.0; 100],
            resolution: 1.0,
            window: WindowKind::Rect,
            segments: 1,
            enbw: 1.0,
        };
        assert_eq!(snr_at(&s, 2.0 * PI * 50.0).unwrap(), 1.0);
        s.psd[50] = 100.0;
        s.psd[51] = 30.0;
        s.psd[49] = 30.0;
        assert_eq!(snr_at(&s, 2.0 * PI * 50.2).unwrap(), 100.0);
        assert_eq!(snr_in_bandwidth(&s, 2.0 * PI * 50.0, 3.0).unwrap(), 33.0);
        assert!(snr_at(&s, 2.0 * PI * 5.0).is_err());
        assert!(snr_at(&s, 2.0 * PI * 150.0).is_err());
        assert!(snr_at(&s, -1.0).is_err());
    }

    #[test]
    fn snr_of_tone_in_noise() {
        let dt = 1e-2;
        let mut x = white(1 << 17, 4);
        let f0 = 5.0;
        for (i, v) in x.iter_mut().enumerate() {
            *v += 0.2 * (2.0 * PI * f0 * i as f64 * dt).cos();
        }
        let s = welch_psd(&x, dt, 2000, 0.5, WindowKind::Hann).unwrap();
        // Tone power A²/2 concentrated over the window's noise bandwidth
        let want = 1.0 + 0.02 / (2.0 * dt * s.enbw);
        let snr = snr_at(&s, 2.0 * PI * f0).unwrap();
        assert!((snr / want - 1.0).abs() < 0.15, "{snr} vs {want}");
        assert!((snr_at(&s, 2.0 * PI * 17.0).unwrap() - 1.0).abs() < 0.3);
    }
}
