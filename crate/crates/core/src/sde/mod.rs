//! Stochastic time-domain simulation of the driven Duffing resonator.
//!
//! Two integrators share one scheme, the stochastic Heun predictor-corrector
//! for additive noise:
//!
//! * [`simulate_full`] integrates the displacement
//!   `m ẍ + γ ẋ + k x + α x³ = F_d(t) cos(ωt + φ0) + ξ(t)`.
//! * [`simulate_envelope`] integrates the slow quadratures of
//!   `x = u cos ωt + v sin ωt`:
//!   `du = [−Γu − (δ − Λa²)v + F_d sin φ0 /(2mω)] dt + dW_u`,
//!   `dv = [−Γv + (δ − Λa²)u + F_d cos φ0 /(2mω)] dt + dW_v`,
//!   with `Γ = ω0/(2Q)`, `δ = (ω² − ω0²)/(2ω)`, `Λ = 3α/(8mω)`, `a² = u² + v²`.
//!
//! `F_d(t) = F + δF cos(Ωt)`. The force noise `ξ` is white with one-sided
//! PSD `S_F`, so each quadrature receives white noise of one-sided PSD
//! `S_F/(2m²ω²)`, i.e. increment variance `S_F dt/(4m²ω²)`. The fixed points
//! of the quadrature equations are exactly the roots of the amplitude cubic.
//!
//! Random numbers come from ChaCha8 seeded with `seed_from_u64(seed)`;
//! ensemble member `i` uses stream `i`. Gaussian deviates use the ziggurat
//! sampler of `rand_distr::StandardNormal`.

mod io;

pub use io::{read_bsim, write_bsim, write_csv};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duffing::ResonatorParams;
use crate::{Error, Result, K_B};

pub const RNG_NAME: &str = "ChaCha8 (seed_from_u64, stream = ensemble member)";
pub const GAUSSIAN_NAME: &str = "ziggurat (rand_distr StandardNormal)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    /// Drive amplitude `F`, N.
    pub force: f64,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
    /// Modulation depth `δF`, N.
    #[serde(default)]
    pub mod_depth: f64,
    /// Modulation angular frequency `Ω`, rad/s.
    #[serde(default)]
    pub mod_omega: f64,
    #[serde(default)]
    pub phase0: f64,
}

impl DriveSpec {
    pub fn unmodulated(force: f64, omega: f64) -> Self {
        Self { force, omega, mod_depth: 0.0, mod_omega: 0.0, phase0: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        let fields = [self.force, self.omega, self.mod_depth, self.mod_omega, self.phase0];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("drive parameters must be finite"));
        }
        if self.force < 0.0 || self.mod_depth < 0.0 || self.mod_omega < 0.0 {
            return Err(Error::arg("drive amplitude, modulation depth and modulation frequency must be non-negative"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::arg("drive frequency must be positive"));
        }
        Ok(())
    }

    /// Violations of the slow-modulation regime `Ω < ω0/(2Q)`. These do not
    /// stop a simulation.
    pub fn warnings(&self, p: &ResonatorParams) -> Vec<String> {
        let limit = p.decay_rate();
        if self.mod_depth > 0.0 && self.mod_omega >= limit {
            vec![format!(
                "modulation frequency {:e} rad/s is not below the decay rate omega0/(2Q) = {limit:e} 1/s; \
                 the slow-modulation regime does not hold",
                self.mod_omega
            )]
        } else {
            Vec::new()
        }
    }

    fn amplitude_at(&self, t: f64) -> f64 {
        if self.mod_depth == 0.0 {
            self.force
        } else {
            self.force + self.mod_depth * (self.mod_omega * t).cos()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// One-sided force-noise PSD, N²/Hz.
    pub s_f: f64,
    pub seed: Option<u64>,
}

impl NoiseSpec {
    pub fn new(s_f: f64, seed: u64) -> Self {
        Self { s_f, seed: Some(seed) }
    }

    pub fn silent() -> Self {
        Self { s_f: 0.0, seed: Some(0) }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed: Some(seed), ..self }
    }

    fn check(&self) -> Result<u64> {
        if !(self.s_f >= 0.0 && self.s_f.is_finite()) {
            return Err(Error::arg(format!("S_F must be non-negative, got {}", self.s_f)));
        }
        match self.seed {
            Some(s) => Ok(s),
            None if self.s_f == 0.0 => Ok(0),
            None => Err(Error::arg("a seed is required when S_F > 0")),
        }
    }
}

/// Thermal force noise `S_F = 4 m_eff ω0 k_B T / Q` (one-sided); the seed is
/// left for the caller.
pub fn thermal_noise_for(p: &ResonatorParams, temperature: f64) -> Result<NoiseSpec> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::arg(format!("temperature must be non-negative, got {temperature}")));
    }
    Ok(NoiseSpec { s_f: 4.0 * p.m_eff() * p.omega0() * K_B * temperature / p.q(), seed: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Full,
    Envelope,
}

/// Uniformly sampled channels. Full runs carry `x`; envelope runs carry
/// `u` and `v` (or `amplitude` and `phase` after demodulation).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub t0: f64,
    pub dt: f64,
    pub kind: TrajectoryKind,
    pub names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    pub metadata: toml::Table,
}

impl TrajectorySeries {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len() as f64
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.channels[i].as_slice())
    }

    /// Envelope amplitude `√(u² + v²)`, or the `amplitude` channel if present.
    pub fn amplitude(&self) -> Result<Vec<f64>> {
        if let Some(a) = self.channel("amplitude") {
            return Ok(a.to_vec());
        }
        match (self.channel("u"), self.channel("v")) {
            (Some(u), Some(v)) => Ok(u.iter().zip(v).map(|(a, b)| a.hypot(*b)).collect()),
            _ => Err(Error::arg("series has no envelope channels")),
        }
    }
}

/// Integration controls beyond step and duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    /// Recorded duration, s.
    pub duration: f64,
    /// Keep every `stride`-th step.
    pub stride: usize,
    /// Unrecorded lead-in, s.
    pub settle: f64,
    /// Initial state `(x, ẋ)` or `(u, v)`.
    pub initial: [f64; 2],
    /// Random stream of the generator.
    pub stream: u64,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64) -> Self {
        Self { dt, duration, stride: 1, settle: 0.0, initial: [0.0, 0.0], stream: 0 }
    }

    pub fn stride(self, stride: usize) -> Self {
        Self { stride, ..self }
    }

    pub fn settle(self, settle: f64) -> Self {
        Self { settle, ..self }
    }

    pub fn initial(self, initial: [f64; 2]) -> Self {
        Self { initial, ..self }
    }

    pub fn stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::arg("dt must be positive"));
        }
        if !(self.duration >= 100.0 * self.dt) {
            return Err(Error::arg("duration must cover at least 100 steps"));
        }
        if self.stride == 0 {
            return Err(Error::arg("stride must be at least 1"));
        }
        if !(self.settle >= 0.0) {
            return Err(Error::arg("settle time must be non-negative"));
        }
        if self.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("initial state must be finite"));
        }
        Ok(())
    }
}

/// A stochastic Heun stepper. It owns its state and generator, so it can be
/// moved to another thread between steps.
#[derive(Debug, Clone)]
pub struct Integrator {
    kind: TrajectoryKind,
    params: ResonatorParams,
    drive: DriveSpec,
    dt: f64,
    noise_scale: f64,
    rng: ChaCha8Rng,
    t: f64,
    state: [f64; 2],
}

impl Integrator {
    pub fn new(
        kind: TrajectoryKind,
        params: &ResonatorParams,
        drive: &DriveSpec,
        noise: &NoiseSpec,
        config: &SimConfig,
    ) -> Result<Self> {
        drive.check()?;
        let seed = noise.check()?;
        config.check()?;
        let dt = config.dt;
        let m = params.m_eff();
        let noise_scale = match kind {
            TrajectoryKind::Full => {
                if dt > 2.0 * std::f64::consts::PI / (50.0 * drive.omega.max(params.omega0())) {
                    return Err(Error::arg(format!(
                        "dt = {dt:e} s is coarser than 1/50 of the oscillation period"
                    )));
                }
                // velocity kick of a force impulse with std √(S_F/(2dt))
                (noise.s_f / 2.0 * dt).sqrt() / m
            }
            TrajectoryKind::Envelope => {
                if (drive.omega - params.omega0()).abs() > 0.5 * params.omega0() {
                    return Err(Error::domain("drive frequency too far from resonance for the envelope model"));
                }
                if dt > 0.1 * params.q() / params.omega0() {
                    return Err(Error::arg(format!("dt = {dt:e} s exceeds 0.1 Q/omega0")));
                }
                (noise.s_f * dt / 4.0).sqrt() / (m * drive.omega)
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(config.stream);
        Ok(Self {
            kind,
            params: *params,
            drive: *drive,
            dt,
            noise_scale,
            rng,
            t: 0.0,
            state: config.initial,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> [f64; 2] {
        self.state
    }

    fn drift(&self, t: f64, s: [f64; 2]) -> [f64; 2] {
        let p = &self.params;
        let d = &self.drive;
        match self.kind {
            TrajectoryKind::Full => {
                let [x, v] = s;
                let m = p.m_eff();
                let force = d.amplitude_at(t) * (d.omega * t + d.phase0).cos();
                [v, (force - p.gamma() * v - p.k() * x - p.alpha() * x * x * x) / m]
            }
            TrajectoryKind::Envelope => {
                let [u, v] = s;
                let w = d.omega;
                let m = p.m_eff();
                let decay = p.decay_rate();
                let detune = (w * w - p.omega0() * p.omega0()) / (2.0 * w);
                let shift = detune - 3.0 * p.alpha() / (8.0 * m * w) * (u * u + v * v);
                let push = d.amplitude_at(t) / (2.0 * m * w);
                [
                    -decay * u - shift * v + push * d.phase0.sin(),
                    -decay * v + shift * u + push * d.phase0.cos(),
                ]
            }
        }
    }

    /// Advances one step.
    pub fn step(&mut self) {
        let dt = self.dt;
        let s = self.state;
        let (n0, n1) = match self.kind {
            TrajectoryKind::Full => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                (0.0, self.noise_scale * z)
            }
            TrajectoryKind::Envelope => {
                let z0: f64 = StandardNormal.sample(&mut self.rng);
                let z1: f64 = StandardNormal.sample(&mut self.rng);
                (self.noise_scale * z0, self.noise_scale * z1)
            }
        };
        let f0 = self.drift(self.t, s);
        let pred = [s[0] + f0[0] * dt + n0, s[1] + f0[1] * dt + n1];
        let f1 = self.drift(self.t + dt, pred);
        self.state = [
            s[0] + 0.5 * (f0[0] + f1[0]) * dt + n0,
            s[1] + 0.5 * (f0[1] + f1[1]) * dt + n1,
        ];
        self.t += dt;
    }

    fn advance_checked(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            let before = self.t;
            self.step();
            if !(self.state[0].is_finite() && self.state[1].is_finite()) {
                return Err(Error::Divergence { last_finite_time: before });
            }
        }
        Ok(())
    }
}

pub(crate) fn simulate_metadata(
    kind: TrajectoryKind,
    p: &ResonatorParams,
    d: &DriveSpec,
    n: &NoiseSpec,
    c: &SimConfig,
) -> toml::Table {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: toml::Value| {
        m.insert(k.to_string(), v);
    };
    put("kind", toml::Value::String(format!("{kind:?}").to_lowercase()));
    put("scheme", "stochastic Heun".into());
    put("rng", RNG_NAME.into());
    put("gaussian", GAUSSIAN_NAME.into());
    put("seed", toml::Value::Integer(n.seed.unwrap_or(0) as i64));
    put("stream", toml::Value::Integer(c.stream as i64));
    put("S_F", n.s_f.into());
    put("m", p.m().into());
    put("m_eff", p.m_eff().into());
    put("omega0", p.omega0().into());
    put("Q", p.q().into());
    put("k", p.k().into());
    put("alpha", p.alpha().into());
    put("F_drive", d.force.into());
    put("omega", d.omega.into());
    put("dF", d.mod_depth.into());
    put("Omega", d.mod_omega.into());
    put("phase0", d.phase0.into());
    put("dt_step", c.dt.into());
    put("stride", toml::Value::Integer(c.stride as i64));
    put("settle", c.settle.into());
    m.into_iter().collect()
}

fn run(kind: TrajectoryKind, p: &ResonatorParams, d: &DriveSpec, n: &NoiseSpec, c: &SimConfig) -> Result<TrajectorySeries> {
    let mut integ = Integrator::new(kind, p, d, n, c)?;
    let settle_steps = (c.settle / c.dt).round() as usize;
    integ.advance_checked(settle_steps)?;
    let total = (c.duration / c.dt).round() as usize;
    let records = total / c.stride;
    let mut ch = [Vec::with_capacity(records), Vec::with_capacity(records)];
    let t0 = integ.time();
    for _ in 0..records {
        ch[0].push(integ.state[0]);
        ch[1].push(integ.state[1]);
        integ.advance_checked(c.stride)?;
    }
    let [a, b] = ch;
    let (names, channels) = match kind {
        TrajectoryKind::Full => (vec!["x".to_string()], vec![a]),
        TrajectoryKind::Envelope => (vec!["u".to_string(), "v".to_string()], vec![a, b]),
    };
    if records < 2 {
        return Err(Error::arg("fewer than two samples recorded"));
    }
    Ok(TrajectorySeries {
        t0,
        dt: c.dt * c.stride as f64,
        kind,
        names,
        channels,
        metadata: simulate_metadata(kind, p, d, n, c),
    })
}

/// Full-coordinate run with default controls (start at rest, record every
/// step).
pub fn simulate_full(p: &ResonatorParams, d: &DriveSpec, n: &NoiseSpec, dt: f64, duration: f64) -> Result<TrajectorySeries> {
    run(TrajectoryKind::Full, p, d, n, &SimConfig::new(dt, duration))
}

pub fn simulate_full_with(p: &ResonatorParams, d: &DriveSpec, n: &NoiseSpec, c: &SimConfig) -> Result<TrajectorySeries> {
    run(TrajectoryKind::Full, p, d, n, c)
}

/// Rotating-frame quadrature run with default controls.
pub fn simulate_envelope(p: &ResonatorParams, d: &DriveSpec, n: &NoiseSpec, dt: f64, duration: f64) -> Result<TrajectorySeries> {
    run(TrajectoryKind::Envelope, p, d, n, &SimConfig::new(dt, duration))
}

pub fn simulate_envelope_with(p: &ResonatorParams, d: &DriveSpec, n: &NoiseSpec, c: &SimConfig) -> Result<TrajectorySeries> {
    run(TrajectoryKind::Envelope, p, d, n, c)
}

/// Runs `members` independent realizations (streams `0..members`) on
/// `workers` threads and maps each through `reduce`. Results are returned in
/// member order, independent of scheduling.
pub fn ensemble<T: Send>(
    kind: TrajectoryKind,
    p: &ResonatorParams,
    d: &DriveSpec,
    n: &NoiseSpec,
    c: &SimConfig,
    members: usize,
    workers: usize,
    reduce: impl Fn(TrajectorySeries) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..members)
            .into_par_iter()
            .map(|i| run(kind, p, d, n, &c.stream(i as u64)).and_then(&reduce))
            .collect()
    })
}

#[cfg(test)]
mod tests;
