//! Quasi-static sweeps along the stable branch with jump detection.

use serde::{Deserialize, Serialize};

use super::{steady_amplitudes, steady_unchecked, ResonatorParams, SteadyState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Swept quantity: rad/s for frequency sweeps, N for drive sweeps.
    pub control: f64,
    #[serde(rename = "amplitude_m")]
    pub amplitude: f64,
    #[serde(rename = "phase_rad")]
    pub phase: f64,
    /// Three steady states coexist at this control value.
    #[serde(skip)]
    pub multivalued: bool,
}

/// A jump between branches at a fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jump {
    pub control: f64,
    #[serde(rename = "from_amplitude_m")]
    pub from: f64,
    #[serde(rename = "to_amplitude_m")]
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBranch {
    pub points: Vec<SweepPoint>,
    pub jumps: Vec<Jump>,
    pub direction: SweepDirection,
}

/// Frequency sweep at fixed drive amplitude.
pub fn hysteresis_sweep(
    p: &ResonatorParams,
    force: f64,
    omega_range: (f64, f64),
    direction: SweepDirection,
    n_points: usize,
) -> Result<SweepBranch> {
    if !(force > 0.0) {
        return Err(Error::arg("drive amplitude must be positive"));
    }
    let (lo, hi) = omega_range;
    if !(lo < hi) {
        return Err(Error::arg("frequency range must be increasing"));
    }
    steady_amplitudes(p, force, lo)?;
    steady_amplitudes(p, force, hi)?;
    continuation(|w| steady_unchecked(p, force, w), lo, hi, direction, n_points)
}

/// Drive-amplitude sweep at fixed frequency.
pub fn amplitude_sweep(
    p: &ResonatorParams,
    omega: f64,
    force_range: (f64, f64),
    direction: SweepDirection,
    n_points: usize,
) -> Result<SweepBranch> {
    let (lo, hi) = force_range;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::arg("drive range must be positive and increasing"));
    }
    steady_amplitudes(p, lo, omega)?;
    continuation(|f| steady_unchecked(p, f, omega), lo, hi, direction, n_points)
}

fn continuation(
    roots_at: impl Fn(f64) -> Vec<SteadyState>,
    lo: f64,
    hi: f64,
    direction: SweepDirection,
    n_points: usize,
) -> Result<SweepBranch> {
    if n_points < 16 {
        return Err(Error::arg(format!("need at least 16 sweep points, got {n_points}")));
    }
    let mut grid: Vec<f64> = (0..n_points).map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64).collect();
    if direction == SweepDirection::Down {
        grid.reverse();
    }

    let nearest_stable = |roots: &[SteadyState], target: f64| -> SteadyState {
        *roots
            .iter()
            .filter(|r| r.stable)
            .min_by(|a, b| (a.amplitude - target).abs().total_cmp(&(b.amplitude - target).abs()))
            .unwrap_or(&roots[0])
    };

    let mut points = Vec::with_capacity(n_points);
    let mut jumps = Vec::new();
    let mut prev_control = grid[0];
    let mut prev_count = 0;
    let mut tracked = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        let roots = roots_at(x);
        if i > 0 && prev_count == 3 && roots.len() == 1 {
            let (inside, at_fold) = locate_fold(&roots_at, prev_control, x);
            // the fold pair may already be flagged degenerate, so match any root
            let on_branch = at_fold
                .iter()
                .map(|r| r.amplitude)
                .min_by(|a, b| (a - tracked).abs().total_cmp(&(b - tracked).abs()))
                .unwrap_or(tracked);
            let low_gap = at_fold[1].amplitude - at_fold[0].amplitude;
            let high_gap = at_fold[2].amplitude - at_fold[1].amplitude;
            let (pair, other) = if low_gap < high_gap {
                ((at_fold[0].amplitude, at_fold[1].amplitude), at_fold[2].amplitude)
            } else {
                ((at_fold[1].amplitude, at_fold[2].amplitude), at_fold[0].amplitude)
            };
            let merging = (on_branch - pair.0).abs().min((on_branch - pair.1).abs())
                < (on_branch - other).abs();
            if merging {
                jumps.push(Jump { control: inside, from: 0.5 * (pair.0 + pair.1), to: other });
                tracked = other;
            }
        }
        let pick = if i == 0 {
            roots.iter().copied().find(|r| r.stable).unwrap_or(roots[0])
        } else {
            nearest_stable(&roots, tracked)
        };
        tracked = pick.amplitude;
        points.push(SweepPoint {
            control: x,
            amplitude: pick.amplitude,
            phase: pick.phase,
            multivalued: roots.len() == 3,
        });
        prev_control = x;
        prev_count = roots.len();
    }
    Ok(SweepBranch { points, jumps, direction })
}

/// Frequency interval `(ω_lo, ω_hi)` with three steady states at drive
/// `force`, or `None` below the bifurcation onset.
pub fn bistable_interval(p: &ResonatorParams, force: f64) -> Result<Option<(f64, f64)>> {
    if !(force > 0.0) {
        return Err(Error::arg("drive amplitude must be positive"));
    }
    if p.alpha() == 0.0 {
        return Ok(None);
    }
    let (peak, _) = super::peak_response(p, force)?;
    let half = (peak - p.omega0()).abs() + 10.0 * p.decay_rate();
    let (lo, hi) = (p.omega0() - half, p.omega0() + half);
    let roots_at = |w: f64| steady_unchecked(p, force, w);
    let n = 4000;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut inside = grid.iter().copied().filter(|&w| roots_at(w).len() == 3);
    let (first, last) = match inside.next() {
        Some(a) => (a, inside.last().unwrap_or(a)),
        None => {
            let cp = super::critical_point(p)?;
            if roots_at(cp.omega).len() != 3 {
                return Ok(None);
            }
            (cp.omega, cp.omega)
        }
    };
    let step = (hi - lo) / n as f64;
    let (a, _) = locate_fold(&roots_at, first, (first - step).max(lo));
    let (b, _) = locate_fold(&roots_at, last, (last + step).min(hi));
    p.guard(a)?;
    p.guard(b)?;
    Ok(Some((a, b)))
}

/// Bisects between a three-root control value and a one-root value.
/// Returns the last three-root control value and its roots.
fn locate_fold(roots_at: &impl Fn(f64) -> Vec<SteadyState>, three: f64, one: f64) -> (f64, Vec<SteadyState>) {
    let (mut a, mut b) = (three, one);
    let mut at_a = roots_at(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let r = roots_at(mid);
        if r.len() == 3 {
            a = mid;
            at_a = r;
        } else {
            b = mid;
        }
    }
    (a, at_a)
}

/// Area enclosed between an up and a down sweep over the same grid,
/// `∫|a_up − a_down| d(control)`.
pub fn hysteresis_area(up: &SweepBranch, down: &SweepBranch) -> Result<f64> {
    if up.points.len() != down.points.len() {
        return Err(Error::arg("sweeps must share a grid"));
    }
    let mut down_pts = down.points.clone();
    if down.direction != up.direction {
        down_pts.reverse();
    }
    let mut area = 0.0;
    for i in 1..up.points.len() {
        let (u0, u1) = (up.points[i - 1], up.points[i]);
        let (d0, d1) = (down_pts[i - 1], down_pts[i]);
        if u0.control != d0.control || u1.control != d1.control {
            return Err(Error::arg("sweeps must share a grid"));
        }
        let gap0 = (u0.amplitude - d0.amplitude).abs();
        let gap1 = (u1.amplitude - d1.amplitude).abs();
        area += 0.5 * (gap0 + gap1) * (u1.control - u0.control).abs();
    }
    Ok(area)
}
