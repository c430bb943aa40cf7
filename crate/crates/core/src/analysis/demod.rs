use std::f64::consts::PI;

use crate::sde::{Integrator, SimConfig, TrajectoryKind, TrajectorySeries};
use crate::{DriveSpec, Error, NoiseSpec, ResonatorParams, Result};

const POLES: i32 = 4;

/// Four identical single-pole low-pass stages with an overall −3 dB point
/// at `bandwidth` Hz.
#[derive(Debug, Clone)]
pub struct LowPass {
    gain: f64,
    state: [f64; POLES as usize],
}

impl LowPass {
    pub fn new(bandwidth: f64, dt: f64) -> Self {
        let stage = bandwidth / (2f64.powf(1.0 / POLES as f64) - 1.0).sqrt();
        Self { gain: 1.0 - (-2.0 * PI * stage * dt).exp(), state: [0.0; POLES as usize] }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let mut y = x;
        for s in &mut self.state {
            *s += self.gain * (y - *s);
            y = *s;
        }
        y
    }
}

/// Ideal lock-in: `u = 2·LPF(x cos ωt)`, `v = 2·LPF(x sin ωt)`, so that
/// `x = u cos ωt + v sin ωt` as in the envelope integrator.
///
/// Returns channels `u`, `v`, `amplitude` and `phase = atan2(v, u)`.
/// Envelope input is returned unchanged.
pub fn demodulate(traj: &TrajectorySeries, omega: f64, bandwidth: f64) -> Result<TrajectorySeries> {
    if traj.kind == TrajectoryKind::Envelope {
        return Ok(traj.clone());
    }
    check_bandwidth(omega, bandwidth)?;
    let x = traj.channel("x").ok_or_else(|| Error::arg("full trajectory lacks an x channel"))?;
    let mut lp_u = LowPass::new(bandwidth, traj.dt);
    let mut lp_v = LowPass::new(bandwidth, traj.dt);
    let n = x.len();
    let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (i, &xi) in x.iter().enumerate() {
        let phase = omega * (traj.t0 + traj.dt * i as f64);
        u.push(2.0 * lp_u.push(xi * phase.cos()));
        v.push(2.0 * lp_v.push(xi * phase.sin()));
    }
    let amplitude = u.iter().zip(&v).map(|(a, b)| a.hypot(*b)).collect();
    let phase = u.iter().zip(&v).map(|(a, b)| b.atan2(*a)).collect();
    let mut metadata = traj.metadata.clone();
    metadata.insert("demodulation_omega".into(), omega.into());
    metadata.insert("demodulation_bandwidth_Hz".into(), bandwidth.into());
    Ok(TrajectorySeries {
        t0: traj.t0,
        dt: traj.dt,
        kind: TrajectoryKind::Envelope,
        names: ["u", "v", "amplitude", "phase"].map(String::from).to_vec(),
        channels: vec![u, v, amplitude, phase],
        metadata,
    })
}

fn check_bandwidth(omega: f64, bandwidth: f64) -> Result<()> {
    if !(bandwidth > 0.0 && bandwidth < omega / (2.0 * PI) / 5.0) {
        return Err(Error::arg(format!(
            "bandwidth {bandwidth:e} Hz must be positive and below a fifth of the reference frequency"
        )));
    }
    Ok(())
}

/// Full-coordinate run demodulated on the fly at the drive frequency.
/// Equivalent to [`demodulate`] applied to the output of
/// `simulate_full_with`, then keeping every `config.stride`-th sample, but
/// without holding the fast record in memory.
pub fn lockin_run(
    p: &ResonatorParams,
    d: &DriveSpec,
    n: &NoiseSpec,
    config: &SimConfig,
    bandwidth: f64,
) -> Result<TrajectorySeries> {
    check_bandwidth(d.omega, bandwidth)?;
    let fast = SimConfig { stride: 1, ..*config };
    let mut integ = Integrator::new(TrajectoryKind::Full, p, d, n, &fast)?;
    let mut lp_u = LowPass::new(bandwidth, config.dt);
    let mut lp_v = LowPass::new(bandwidth, config.dt);
    let settle = (config.settle / config.dt).round() as usize;
    let records = (config.duration / config.dt).round() as usize / config.stride;
    let mut u = Vec::with_capacity(records);
    let mut v = Vec::with_capacity(records);
    let mut t0 = 0.0;
    let total = settle + records * config.stride;
    for i in 0..total {
        let t = integ.time();
        let x = integ.state()[0];
        if !x.is_finite() {
            return Err(Error::Divergence { last_finite_time: t - config.dt });
        }
        let phase = d.omega * t;
        let a = 2.0 * lp_u.push(x * phase.cos());
        let b = 2.0 * lp_v.push(x * phase.sin());
        if i >= settle && (i - settle) % config.stride == 0 {
            if i == settle {
                t0 = t;
            }
            u.push(a);
            v.push(b);
        }
        integ.step();
    }
    if u.len() < 2 {
        return Err(Error::arg("fewer than two samples recorded"));
    }
    let mut metadata = crate::sde::simulate_metadata(TrajectoryKind::Full, p, d, n, config);
    metadata.insert("demodulation_omega".into(), d.omega.into());
    metadata.insert("demodulation_bandwidth_Hz".into(), bandwidth.into());
    Ok(TrajectorySeries {
        t0,
        dt: config.dt * config.stride as f64,
        kind: TrajectoryKind::Envelope,
        names: vec!["u".into(), "v".into()],
        channels: vec![u, v],
        metadata,
    })
}

/// Keeps every `factor`-th sample of every channel.
pub fn decimate(series: &TrajectorySeries, factor: usize) -> Result<TrajectorySeries> {
    if factor == 0 {
        return Err(Error::arg("decimation factor must be positive"));
    }
    let mut out = series.clone();
    out.dt *= factor as f64;
    for ch in &mut out.channels {
        *ch = ch.iter().step_by(factor).copied().collect();
    }
    Ok(out)
}
