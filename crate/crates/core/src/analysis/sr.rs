//! End-to-end stochastic-resonance experiment: pick the operating point,
//! measure the unmodulated switching rate, add a slow drive modulation and
//! invert the spectral SNR for the total force noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{infer_total_noise, lockin_run, snr_at, snr_in_bandwidth, thresholds_at, two_state, welch_psd};
use super::{SpectrumResult, SrInputs, SrInversion, TelegraphResult, WindowKind};
use crate::duffing::{bistable_interval, peak_response, steady_amplitudes};
use crate::sde::{simulate_envelope_with, SimConfig};
use crate::{DriveSpec, Error, NoiseSpec, ResonatorParams, Result, TrajectoryKind, TrajectorySeries};

/// Where inside the bistable interval the drive frequency sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OperatingPoint {
    /// Centre of the bistable frequency interval.
    #[default]
    Midpoint,
    /// Frequency at which both states are equally occupied, found by
    /// bisection on simulated occupancy.
    Balanced,
}

pub const DEFAULT_THRESHOLD_FRACTIONS: (f64, f64) = (0.1, 0.9);

#[derive(Debug, Clone, PartialEq)]
pub struct SrExperiment {
    pub params: ResonatorParams,
    pub kind: TrajectoryKind,
    /// Drive amplitude, N.
    pub force: f64,
    pub operating_point: OperatingPoint,
    /// Fixed drive angular frequency; overrides the operating point.
    pub drive_omega: Option<f64>,
    /// Injected force noise, N²/Hz.
    pub s_f: f64,
    /// Schmitt thresholds as fractions of the plateau separation. Amplitude
    /// alone does not separate the two basins of the quadrature plane, so
    /// thresholds near the middle also count excursions that fall back;
    /// thresholds near the plateaus register completed transitions only.
    pub threshold_fractions: (f64, f64),
    pub seed: u64,
    /// Modulation depth relative to the drive, `δF/F`.
    pub mod_depth_rel: f64,
    /// Modulation angular frequency; `None` picks a quarter of the measured
    /// switching rate, `Ω = 2π γ_k / 4`.
    pub mod_omega: Option<f64>,
    /// Integration step and recording stride.
    pub dt: f64,
    pub stride: usize,
    /// Recorded duration of each of the two main runs, s.
    pub duration: f64,
    /// Duration of each occupancy estimate during balancing, s.
    pub balance_duration: f64,
    pub balance_iterations: usize,
    /// Welch segment length in modulation periods.
    pub segment_periods: f64,
    /// Lock-in bandwidth for full-coordinate runs, Hz.
    pub lockin_bandwidth: f64,
}

impl SrExperiment {
    /// Envelope-model defaults: step `Γ⁻¹/50`, one sample per `Γ⁻¹`.
    pub fn envelope(params: ResonatorParams, force: f64, s_f: f64, seed: u64, duration: f64) -> Self {
        let decay = params.decay_rate();
        Self {
            params,
            kind: TrajectoryKind::Envelope,
            force,
            operating_point: OperatingPoint::Midpoint,
            drive_omega: None,
            s_f,
            threshold_fractions: DEFAULT_THRESHOLD_FRACTIONS,
            seed,
            mod_depth_rel: 0.03,
            mod_omega: None,
            dt: 0.02 / decay,
            stride: 50,
            duration,
            balance_duration: duration / 40.0,
            balance_iterations: 14,
            segment_periods: 20.0,
            lockin_bandwidth: 5.0 * decay / (2.0 * PI),
        }
    }

    fn config(&self, duration: f64, stream: u64) -> SimConfig {
        SimConfig::new(self.dt, duration).stride(self.stride).settle(20.0 / self.params.decay_rate()).stream(stream)
    }

    /// Amplitude record of one run.
    pub fn amplitude_run(&self, drive: &DriveSpec, duration: f64, stream: u64) -> Result<TrajectorySeries> {
        let noise = NoiseSpec::new(self.s_f, self.seed);
        let config = self.config(duration, stream);
        let env = match self.kind {
            TrajectoryKind::Envelope => simulate_envelope_with(&self.params, drive, &noise, &config)?,
            TrajectoryKind::Full => lockin_run(&self.params, drive, &noise, &config, self.lockin_bandwidth)?,
        };
        let mut out = env.clone();
        out.names = vec!["amplitude".into()];
        out.channels = vec![env.amplitude()?];
        Ok(out)
    }

    /// Schmitt thresholds between the plateaus `low` and `high`.
    pub fn thresholds(&self, low: f64, high: f64) -> (f64, f64) {
        thresholds_at(low, high, self.threshold_fractions)
    }

    fn occupancy(&self, omega: f64, thresholds: (f64, f64), stream: u64) -> Result<f64> {
        let run = self.amplitude_run(&DriveSpec::unmodulated(self.force, omega), self.balance_duration, stream)?;
        Ok(two_state_clamped(&run, thresholds)?.fraction_high)
    }

    /// Drive frequency for the configured operating point.
    pub fn drive_frequency(&self) -> Result<f64> {
        if let Some(w) = self.drive_omega {
            return Ok(w);
        }
        let (lo, hi) = bistable_interval(&self.params, self.force)?
            .ok_or_else(|| Error::domain("drive amplitude is below the bifurcation onset"))?;
        let mid = 0.5 * (lo + hi);
        if self.operating_point == OperatingPoint::Midpoint {
            return Ok(mid);
        }
        let margin = 0.02 * (hi - lo);
        let (mut a, mut b) = (lo + margin, hi - margin);
        let thresholds_at = |w: f64| -> Result<(f64, f64)> {
            let r = steady_amplitudes(&self.params, self.force, w)?;
            Ok(self.thresholds(r[0].amplitude, r[r.len() - 1].amplitude))
        };
        let fa = self.occupancy(a, thresholds_at(a)?, 1000)?;
        let fb = self.occupancy(b, thresholds_at(b)?, 1001)?;
        if (fa - 0.5).signum() == (fb - 0.5).signum() {
            return Err(Error::NotFound("occupancy does not cross one half inside the bistable interval".into()));
        }
        let rising = fb > fa;
        for i in 0..self.balance_iterations {
            let m = 0.5 * (a + b);
            let f = self.occupancy(m, thresholds_at(m)?, 1002 + i as u64)?;
            if (f > 0.5) == rising {
                b = m;
            } else {
                a = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    pub fn run(&self) -> Result<SrOutcome> {
        if !(self.mod_depth_rel > 0.0) {
            return Err(Error::arg("modulation depth must be positive"));
        }
        let (lo, hi) = self.threshold_fractions;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::arg("threshold fractions must satisfy 0 < low < high < 1"));
        }
        let omega = self.drive_frequency()?;
        let roots = steady_amplitudes(&self.params, self.force, omega)?;
        if roots.len() != 3 {
            return Err(Error::domain("operating point is not bistable"));
        }
        let (low, high) = (roots[0].amplitude, roots[2].amplitude);
        let thresholds = self.thresholds(low, high);
        let x_m = 0.5 * (high - low);

        let plain = DriveSpec::unmodulated(self.force, omega);
        let unmod = self.amplitude_run(&plain, self.duration, 0)?;
        let telegraph = two_state_clamped(&unmod, thresholds)?;
        if telegraph.n_switches < 2 {
            return Err(Error::domain("no switching in the unmodulated run"));
        }
        let mod_omega = self.mod_omega.unwrap_or(2.0 * PI * telegraph.gamma_k / 4.0);
        let drive = DriveSpec {
            mod_depth: self.mod_depth_rel * self.force,
            mod_omega,
            ..plain
        };
        let warnings = drive.warnings(&self.params);
        let modulated = self.amplitude_run(&drive, self.duration, 1)?;

        let seg = ((self.segment_periods * 2.0 * PI / mod_omega / unmod.dt).round() as usize).min(unmod.len());
        let spec_unmod = welch_psd(&unmod.channels[0], unmod.dt, seg, 0.5, WindowKind::Hann)?;
        let spec_mod = welch_psd(&modulated.channels[0], modulated.dt, seg, 0.5, WindowKind::Hann)?;
        let snr_bin = snr_at(&spec_mod, mod_omega)?;
        let snr_bin_unmod = snr_at(&spec_unmod, mod_omega)?;
        let (peak, _) = peak_response(&self.params, self.force)?;
        let inputs = SrInputs {
            d_f: drive.mod_depth,
            m_eff: self.params.m_eff(),
            omega,
            x_m,
            delta_omega: (peak - self.params.omega0()).abs(),
            gamma_k: telegraph.gamma_k,
        };
        let snr = snr_in_bandwidth(&spec_mod, mod_omega, inputs.reference_bandwidth())?;
        let inversion = infer_total_noise(snr, &inputs)?;
        Ok(SrOutcome {
            omega,
            mod_omega,
            mod_depth: drive.mod_depth,
            plateaus: (low, high),
            thresholds,
            telegraph,
            spec_unmod,
            spec_mod,
            snr_bin,
            snr_bin_unmod,
            inversion,
            injected: self.s_f,
            unmodulated: unmod,
            modulated,
            warnings,
        })
    }
}

/// Two-state analysis with thresholds clipped into the data range, so a
/// run that never reaches a plateau reports zero switches instead of an
/// error.
pub fn two_state_clamped(run: &TrajectorySeries, (lo, hi): (f64, f64)) -> Result<TelegraphResult> {
    let a = &run.channels[0];
    let (min, max) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(x, y), &v| (x.min(v), y.max(v)));
    let lo = lo.clamp(min, max);
    let hi = hi.clamp(min, max);
    if lo < hi {
        two_state(a, run.dt, lo, hi)
    } else {
        // all samples on one side of both thresholds
        let state = u8::from(min >= hi);
        Ok(TelegraphResult {
            states: vec![state; a.len()],
            gamma_k: 0.0,
            dwell_low: if state == 0 { run.duration() } else { 0.0 },
            dwell_high: if state == 1 { run.duration() } else { 0.0 },
            n_switches: 0,
            duration: a.len() as f64 * run.dt,
            fraction_high: f64::from(state),
            switch_times: Vec::new(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SrOutcome {
    /// Drive angular frequency used, rad/s.
    pub omega: f64,
    pub mod_omega: f64,
    pub mod_depth: f64,
    /// Low and high stable amplitudes at the operating point, m.
    pub plateaus: (f64, f64),
    pub thresholds: (f64, f64),
    pub telegraph: TelegraphResult,
    pub spec_unmod: SpectrumResult,
    pub spec_mod: SpectrumResult,
    /// Peak-bin SNR at `Ω` with and without modulation.
    pub snr_bin: f64,
    pub snr_bin_unmod: f64,
    pub inversion: SrInversion,
    pub injected: f64,
    pub unmodulated: TrajectorySeries,
    pub modulated: TrajectorySeries,
    pub warnings: Vec<String>,
}

impl SrOutcome {
    /// `√(S_inferred / S_injected)`.
    pub fn amplitude_ratio(&self) -> f64 {
        (self.inversion.s_total / self.injected).sqrt()
    }
}
