//! Steady-state response of the driven Duffing resonator
//! `m ẍ + γ ẋ + k x + α x³ = F cos ωt` in the secular approximation.
//!
//! With `z = a²`, `D = m(ω0² − ω²)`, `c = 3α/4` and `g = γω` the amplitude
//! equation is the cubic `c²z³ + 2Dc z² + (D² + g²) z − F² = 0`.

mod scaling;
mod sweep;

pub use scaling::{threshold_vs_mass, GeometryScaling, ThresholdCurve, ThresholdMode};
pub use sweep::{
    amplitude_sweep, bistable_interval, hysteresis_area, hysteresis_sweep, Jump, SweepBranch, SweepDirection, SweepPoint,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative detuning beyond which the secular approximation is refused.
pub const VALIDITY_GUARD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    m: f64,
    m_eff: f64,
    omega0: f64,
    q: f64,
    k: f64,
    alpha: f64,
    xi: f64,
}

impl ResonatorParams {
    /// Builds the parameter set from the modal mass and angular frequency;
    /// `k = m_eff ω0²`.
    pub fn new(m: f64, m_eff: f64, omega0: f64, q: f64, alpha: f64, xi: f64) -> Result<Self> {
        Self::checked(m, m_eff, omega0, q, m_eff * omega0 * omega0, alpha, xi)
    }

    /// Builds the parameter set from the stiffness; `ω0 = √(k/m_eff)`.
    pub fn from_stiffness(m: f64, m_eff: f64, k: f64, q: f64, alpha: f64, xi: f64) -> Result<Self> {
        Self::checked(m, m_eff, (k / m_eff).sqrt(), q, k, alpha, xi)
    }

    /// Accepts all fields and verifies `k = m_eff ω0²` to 1e-9 relative.
    pub fn checked(m: f64, m_eff: f64, omega0: f64, q: f64, k: f64, alpha: f64, xi: f64) -> Result<Self> {
        if !(m_eff > 0.0 && m_eff.is_finite()) {
            return Err(Error::arg(format!("m_eff must be positive, got {m_eff}")));
        }
        if !(m >= m_eff && m.is_finite()) {
            return Err(Error::arg(format!("total mass {m} must be at least m_eff {m_eff}")));
        }
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::arg(format!("omega0 must be positive, got {omega0}")));
        }
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::arg(format!("Q must exceed 1, got {q}")));
        }
        if !alpha.is_finite() {
            return Err(Error::arg("alpha must be finite"));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::arg(format!("xi must be in (0, 1], got {xi}")));
        }
        let k_expected = m_eff * omega0 * omega0;
        if !((k - k_expected).abs() <= 1e-9 * k_expected) {
            return Err(Error::arg(format!("k = {k} inconsistent with m_eff omega0^2 = {k_expected}")));
        }
        Ok(Self { m, m_eff, omega0, q, k, alpha, xi })
    }

    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn m_eff(&self) -> f64 {
        self.m_eff
    }
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Damping coefficient `γ = m_eff ω0 / Q`.
    pub fn gamma(&self) -> f64 {
        self.m_eff * self.omega0 / self.q
    }

    /// Amplitude decay rate `ω0 / (2Q)`.
    pub fn decay_rate(&self) -> f64 {
        self.omega0 / (2.0 * self.q)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::checked(self.m, self.m_eff, self.omega0, self.q, self.k, alpha, self.xi)
    }

    pub fn with_q(self, q: f64) -> Result<Self> {
        Self::checked(self.m, self.m_eff, self.omega0, q, self.k, self.alpha, self.xi)
    }

    fn guard(&self, omega: f64) -> Result<()> {
        if !((omega - self.omega0).abs() <= VALIDITY_GUARD * self.omega0) {
            return Err(Error::domain(format!(
                "omega = {omega:e} rad/s outside the secular validity band around omega0 = {:e}",
                self.omega0
            )));
        }
        Ok(())
    }
}

/// One steady-state solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Displacement amplitude, m.
    pub amplitude: f64,
    /// Lag of the response behind the drive, `x = a cos(ωt − φ)`, in [0, π].
    pub phase: f64,
    pub stable: bool,
    /// Part of a numerically coincident pair at a fold.
    pub degenerate: bool,
}

/// The amplitude cubic at fixed drive and frequency in units where the
/// damping term is one: `ζ = z|c|/g`, `p(ζ) = ζ³ + Bζ² + Cζ − f`.
struct Cubic {
    b: f64,
    c: f64,
    f: f64,
}

impl Cubic {
    fn eval(&self, z: f64) -> f64 {
        ((z + self.b) * z + self.c) * z - self.f
    }

    fn slope(&self, z: f64) -> f64 {
        (3.0 * z + 2.0 * self.b) * z + self.c
    }

    fn magnitude(&self, z: f64) -> f64 {
        z.abs().powi(3) + (self.b * z * z).abs() + (self.c * z).abs() + self.f.abs()
    }

    /// Root in `[lo, hi]` where `p(lo) ≤ 0 ≤ p(hi)` or the reverse.
    fn root_in(&self, mut lo: f64, mut hi: f64) -> f64 {
        let rising = self.eval(hi) >= self.eval(lo);
        let mut z = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = self.eval(z);
            if v == 0.0 {
                return z;
            }
            if (v < 0.0) == rising {
                lo = z;
            } else {
                hi = z;
            }
            let d = self.slope(z);
            let newton = z - v / d;
            let next = if d != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if next == z || hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
                return next;
            }
            z = next;
        }
        z
    }

    /// Real roots in ascending order with degeneracy flags.
    fn roots(&self) -> Vec<(f64, bool)> {
        let disc = self.b * self.b - 3.0 * self.c;
        // every root lies below the largest critical point plus cbrt(f)
        let mut hi = 1.0f64.max(self.f.cbrt()) + (-self.b).max(0.0);
        while self.eval(hi) <= 0.0 {
            hi *= 2.0;
        }
        if disc <= 0.0 || self.b >= 0.0 {
            return vec![(self.root_in(0.0, hi), false)];
        }
        let sq = disc.sqrt();
        let z1 = (-self.b - sq) / 3.0;
        let z2 = (-self.b + sq) / 3.0;
        let (p1, p2) = (self.eval(z1), self.eval(z2));
        let tol1 = 64.0 * f64::EPSILON * self.magnitude(z1);
        let tol2 = 64.0 * f64::EPSILON * self.magnitude(z2);
        if p1.abs() <= tol1 {
            return vec![(z1, true), (z1, true), (self.root_in(z2, hi), false)];
        }
        if p2.abs() <= tol2 {
            return vec![(self.root_in(0.0, z1), false), (z2, true), (z2, true)];
        }
        if p1 < 0.0 {
            return vec![(self.root_in(z2, hi), false)];
        }
        if p2 > 0.0 {
            return vec![(self.root_in(0.0, z1), false)];
        }
        vec![
            (self.root_in(0.0, z1), false),
            (self.root_in(z1, z2), false),
            (self.root_in(z2, hi), false),
        ]
    }
}

/// Coefficients of the dimensional cubic in `z = a²` at `(F, ω)`.
fn cubic_terms(p: &ResonatorParams, omega: f64) -> (f64, f64, f64) {
    let d = p.m_eff * (p.omega0 * p.omega0 - omega * omega);
    let c = 0.75 * p.alpha;
    let g = p.gamma() * omega;
    (d, c, g)
}

/// Residual of the amplitude equation relative to its largest term.
pub fn amplitude_residual(p: &ResonatorParams, force: f64, omega: f64, amplitude: f64) -> f64 {
    let (d, c, g) = cubic_terms(p, omega);
    let z = amplitude * amplitude;
    let terms = [c * c * z * z * z, 2.0 * d * c * z * z, (d * d + g * g) * z, -force * force];
    let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
    terms.iter().sum::<f64>().abs() / scale.max(f64::MIN_POSITIVE)
}

/// All steady-state amplitudes at drive `force` and frequency `omega`,
/// ascending. There are one or three; with three the middle one is unstable.
pub fn steady_amplitudes(p: &ResonatorParams, force: f64, omega: f64) -> Result<Vec<SteadyState>> {
    if !(force >= 0.0 && force.is_finite()) {
        return Err(Error::arg(format!("drive amplitude must be non-negative, got {force}")));
    }
    p.guard(omega)?;
    Ok(steady_unchecked(p, force, omega))
}

pub(crate) fn steady_unchecked(p: &ResonatorParams, force: f64, omega: f64) -> Vec<SteadyState> {
    let (d, c, g) = cubic_terms(p, omega);
    let phase_of = |z: f64| g.atan2(d + c * z);
    if force == 0.0 {
        return vec![SteadyState { amplitude: 0.0, phase: phase_of(0.0), stable: true, degenerate: false }];
    }
    if c == 0.0 {
        let z = force * force / (d * d + g * g);
        return vec![SteadyState { amplitude: z.sqrt(), phase: phase_of(z), stable: true, degenerate: false }];
    }
    let delta = d / g;
    let s = c.signum();
    let cubic = Cubic { b: 2.0 * s * delta, c: delta * delta + 1.0, f: force * force * c.abs() / (g * g * g) };
    let unit = g / c.abs();
    cubic
        .roots()
        .into_iter()
        .map(|(zeta, degenerate)| {
            let z = zeta * unit;
            SteadyState {
                amplitude: z.sqrt(),
                phase: phase_of(z),
                stable: !degenerate && cubic.slope(zeta) > 0.0,
                degenerate,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    /// Smallest drive amplitude with a bistable response, N.
    pub force: f64,
    /// Frequency at which bistability first appears, rad/s.
    pub omega: f64,
    /// Amplitude of the coincident roots at onset, m.
    pub amplitude: f64,
}

/// Onset of bistability: the cusp where both folds of the amplitude cubic
/// merge. Exact within the secular approximation.
pub fn critical_point(p: &ResonatorParams) -> Result<CriticalPoint> {
    if p.alpha == 0.0 {
        return Err(Error::arg("alpha = 0: the linear resonator has no bifurcation"));
    }
    let s = p.alpha.signum();
    let q = p.q;
    let omega = p.omega0 * (s * 3f64.sqrt() / (2.0 * q) + (1.0 + 0.75 / (q * q)).sqrt());
    let g = p.gamma() * omega;
    let a = p.alpha.abs();
    let force = (32.0 * 3f64.sqrt() / 27.0 * g * g * g / a).sqrt();
    let amplitude = (8.0 * 3f64.sqrt() * g / (9.0 * a)).sqrt();
    Ok(CriticalPoint { force, omega, amplitude })
}

/// Leading-order onset in `1/Q`:
/// `F_c = √(32/(9√3)) k^{3/2} / (Q^{3/2} |α|^{1/2})`, `ω_c = ω0(1 ± √3/(2Q))`.
pub fn critical_point_leading_order(p: &ResonatorParams) -> Result<CriticalPoint> {
    if p.alpha == 0.0 {
        return Err(Error::arg("alpha = 0: the linear resonator has no bifurcation"));
    }
    let s = p.alpha.signum();
    let force = (32.0 / (9.0 * 3f64.sqrt())).sqrt() * p.k.powf(1.5) / (p.q.powf(1.5) * p.alpha.abs().sqrt());
    let omega = p.omega0 * (1.0 + s * 3f64.sqrt() / (2.0 * p.q));
    let amplitude = (8.0 * 3f64.sqrt() * p.k / (9.0 * p.q * p.alpha.abs())).sqrt();
    Ok(CriticalPoint { force, omega, amplitude })
}

/// Maximum of the response curve at drive `force`: `(ω_peak, a_peak)`.
///
/// At the peak `D + cz = γ²/(2m)`, which fixes `z` for a given `ω`; the
/// frequency follows by fixed-point iteration.
pub fn peak_response(p: &ResonatorParams, force: f64) -> Result<(f64, f64)> {
    if !(force > 0.0) {
        return Err(Error::arg("drive amplitude must be positive"));
    }
    let gamma = p.gamma();
    let m = p.m_eff;
    let shift = gamma * gamma / (2.0 * m);
    let mut omega = p.omega0;
    let mut z = 0.0;
    for _ in 0..200 {
        z = force * force / (shift * shift + gamma * gamma * omega * omega);
        let w2 = p.omega0 * p.omega0 + 0.75 * p.alpha * z / m - shift / m;
        if !(w2 > 0.0) {
            return Err(Error::domain("peak frequency is not real"));
        }
        let next = w2.sqrt();
        if (next - omega).abs() <= 4.0 * f64::EPSILON * omega {
            omega = next;
            break;
        }
        omega = next;
    }
    p.guard(omega)?;
    Ok((omega, z.sqrt()))
}
