//! Static control-force tuning of the beam against a contact potential.
//!
//! The beam mode coordinate `X` moves the contact by `ξX`, so the gap is
//! `x = x_free ∓ ξX`. The control force acts at the contact. Eliminating `X`
//! gives the equilibrium condition in gap coordinates
//!
//! `(k0/ξ²)(x − x_free) + U'(x) = s·F`
//!
//! with `s = +1` when positive `F` opens the gap and `s = −1` when it closes
//! it. Mode-level quantities follow from the chain rule: the stiffness shift
//! is `ξ²U''`, the cubic coefficient `ξ⁴U''''/6` and `k_eff = k0 + ξ²U''`.
//! For `ξ = 1` the gap and the mode coincide.

use serde::{Deserialize, Serialize};

use crate::potential::PotentialModel;
use crate::{Error, Result};

const FOLD_SCAN: usize = 8192;
const RESIDUAL_TOL: f64 = 1e-18;

/// Which way a positive control force moves the contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ForceDirection {
    /// Positive force closes the gap (pushes the contact toward the beam).
    #[default]
    Approach,
    /// Positive force opens the gap.
    Separate,
}

impl ForceDirection {
    fn sign(self) -> f64 {
        match self {
            ForceDirection::Approach => -1.0,
            ForceDirection::Separate => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamAnchor {
    /// Intrinsic spring constant, N/m.
    pub k0: f64,
    /// Shape constant relating mode and contact displacement.
    pub xi: f64,
    /// Spring rest gap, m.
    pub x_free: f64,
    #[serde(default)]
    pub direction: ForceDirection,
}

impl BeamAnchor {
    pub fn new(k0: f64, xi: f64, x_free: f64, direction: ForceDirection) -> Result<Self> {
        let a = Self { k0, xi, x_free, direction };
        a.check()?;
        Ok(a)
    }

    fn check(&self) -> Result<()> {
        if !(self.k0 > 0.0 && self.k0.is_finite()) {
            return Err(Error::arg(format!("k0 must be positive, got {}", self.k0)));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::arg(format!("xi must be in (0, 1], got {}", self.xi)));
        }
        if !self.x_free.is_finite() {
            return Err(Error::arg("x_free must be finite"));
        }
        Ok(())
    }

    /// Spring constant seen at the contact.
    fn k_gap(&self) -> f64 {
        self.k0 / (self.xi * self.xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunePoint {
    #[serde(rename = "F_N")]
    pub force: f64,
    #[serde(rename = "x_eq_m")]
    pub x_eq: f64,
    /// Mode stiffness shift `ξ²U''`, N/m.
    #[serde(rename = "dk_N_per_m")]
    pub dk: f64,
    /// Mode cubic coefficient `ξ⁴U''''/6`, N/m³.
    #[serde(rename = "alpha_N_per_m3")]
    pub alpha: f64,
    #[serde(rename = "k_eff_N_per_m")]
    pub k_eff: f64,
    pub stable: bool,
}

/// Why a tuning curve stopped before the end of its force grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// The equilibrium branch folded: the beam jumps to contact.
    JumpToContact { requested: f64, last_stable_force: f64 },
    /// The equilibrium left the potential's validity window.
    LeftWindow { requested: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneCurve {
    pub points: Vec<TunePoint>,
    pub truncation: Option<Truncation>,
}

/// The monotone stretch of the equilibrium relation that contains `x_free`.
#[derive(Debug, Clone, Copy)]
struct Branch {
    lo: f64,
    hi: f64,
    lo_is_fold: bool,
    hi_is_fold: bool,
}

struct Problem<'a> {
    model: &'a PotentialModel,
    anchor: BeamAnchor,
    branch: Branch,
}

impl<'a> Problem<'a> {
    fn new(model: &'a PotentialModel, anchor: &BeamAnchor) -> Result<Self> {
        anchor.check()?;
        if !model.contains(anchor.x_free) {
            return Err(Error::domain(format!(
                "x_free = {:e} m outside the potential window",
                anchor.x_free
            )));
        }
        let mut p = Self {
            model,
            anchor: *anchor,
            branch: Branch { lo: anchor.x_free, hi: anchor.x_free, lo_is_fold: false, hi_is_fold: false },
        };
        if p.slope(anchor.x_free) <= 0.0 {
            return Err(Error::Instability { requested: 0.0, last_stable_force: f64::NAN });
        }
        let (x_min, x_max) = model.window();
        let (lo, lo_fold) = p.walk(anchor.x_free, x_min);
        let (hi, hi_fold) = p.walk(anchor.x_free, x_max);
        p.branch = Branch { lo, hi, lo_is_fold: lo_fold, hi_is_fold: hi_fold };
        Ok(p)
    }

    /// Gap-side force balance `(k0/ξ²)(x − x_free) + U'(x)`.
    fn balance(&self, x: f64) -> f64 {
        self.anchor.k_gap() * (x - self.anchor.x_free) + self.model.eval_unchecked(x, 1)
    }

    fn slope(&self, x: f64) -> f64 {
        self.anchor.k_gap() + self.model.eval_unchecked(x, 2)
    }

    /// Walks from `start` toward `end` while the slope stays positive.
    /// Returns the stopping point and whether it is a fold.
    fn walk(&self, start: f64, end: f64) -> (f64, bool) {
        let (w0, w1) = self.model.window();
        let h = (w1 - w0) / FOLD_SCAN as f64;
        let n = ((end - start).abs() / h).ceil().max(1.0) as usize;
        let step = (end - start) / n as f64;
        let mut prev = start;
        for i in 1..=n {
            let x = if i == n { end } else { start + step * i as f64 };
            if self.slope(x) <= 0.0 {
                let (mut good, mut bad) = (prev, x);
                for _ in 0..200 {
                    let mid = 0.5 * (good + bad);
                    if mid == good || mid == bad {
                        break;
                    }
                    if self.slope(mid) > 0.0 {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                return (good, true);
            }
            prev = x;
        }
        (end, false)
    }

    fn force_at(&self, x: f64) -> f64 {
        self.anchor.direction.sign() * self.balance(x)
    }

    fn solve(&self, force: f64) -> Result<f64> {
        let target = self.anchor.direction.sign() * force;
        let Branch { lo, hi, lo_is_fold, hi_is_fold } = self.branch;
        let (g_lo, g_hi) = (self.balance(lo), self.balance(hi));
        if target < g_lo || target > g_hi {
            let (edge, fold) = if target < g_lo { (lo, lo_is_fold) } else { (hi, hi_is_fold) };
            return Err(if fold {
                Error::Instability { requested: force, last_stable_force: self.force_at(edge) }
            } else {
                Error::domain(format!("equilibrium for F = {force:e} N lies outside the potential window"))
            });
        }
        let (mut a, mut b) = (lo, hi);
        let mut x = self.anchor.x_free.clamp(lo, hi);
        for _ in 0..400 {
            let r = self.balance(x) - target;
            if r.abs() < RESIDUAL_TOL {
                return Ok(x);
            }
            if r < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = x - r / self.slope(x);
            x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        // bracket collapsed to adjacent floats: best representable root
        let r = self.balance(x) - target;
        if r.abs() < RESIDUAL_TOL || (b - a) <= 4.0 * f64::EPSILON * x.abs() {
            Ok(x)
        } else {
            Err(Error::NotFound(format!("equilibrium solve stalled with residual {r:e} N")))
        }
    }

    fn point(&self, force: f64, x: f64) -> TunePoint {
        let xi2 = self.anchor.xi * self.anchor.xi;
        let u2 = self.model.eval_unchecked(x, 2);
        let u4 = self.model.eval_unchecked(x, 4);
        let k_eff = self.anchor.k0 + xi2 * u2;
        TunePoint {
            force,
            x_eq: x,
            dk: xi2 * u2,
            alpha: xi2 * xi2 * u4 / 6.0,
            k_eff,
            stable: k_eff > 0.0,
        }
    }
}

/// Equilibrium gap under control force `force` on the branch connected to
/// `x_free`.
pub fn equilibrium(model: &PotentialModel, anchor: &BeamAnchor, force: f64) -> Result<f64> {
    if !force.is_finite() {
        return Err(Error::arg("force must be finite"));
    }
    Problem::new(model, anchor)?.solve(force)
}

/// The control forces at which the branch folds, `(toward smaller gap,
/// toward larger gap)`; `None` where the branch reaches the window edge.
pub fn fold_forces(model: &PotentialModel, anchor: &BeamAnchor) -> Result<(Option<f64>, Option<f64>)> {
    let p = Problem::new(model, anchor)?;
    let b = p.branch;
    Ok((
        b.lo_is_fold.then(|| p.force_at(b.lo)),
        b.hi_is_fold.then(|| p.force_at(b.hi)),
    ))
}

/// Evaluates the tuning curve along a monotone force grid, stopping at the
/// first force without a stable equilibrium.
pub fn tune_curve(model: &PotentialModel, anchor: &BeamAnchor, forces: &[f64]) -> Result<TuneCurve> {
    let increasing = forces.windows(2).all(|w| w[1] > w[0]);
    let decreasing = forces.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::arg("force grid must be strictly monotone"));
    }
    let p = Problem::new(model, anchor)?;
    let mut points = Vec::with_capacity(forces.len());
    let mut truncation = None;
    for &f in forces {
        match p.solve(f) {
            Ok(x) => points.push(p.point(f, x)),
            Err(Error::Instability { requested, last_stable_force }) => {
                truncation = Some(Truncation::JumpToContact { requested, last_stable_force });
                break;
            }
            Err(Error::Domain(_)) => {
                truncation = Some(Truncation::LeftWindow { requested: f });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TuneCurve { points, truncation })
}

/// Stiffness used as `k` in the inverse estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "k")]
pub enum StiffnessRef {
    /// A single constant `k` for every sample.
    Constant(f64),
    /// `k0 + dk` at each sample: the local effective stiffness.
    Local(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub force: f64,
    pub alpha: f64,
    /// Lower-confidence estimate near either end of the grid.
    pub edge: bool,
}

/// Points whose stencil touches a shortened smoothing window.
const EDGE: usize = 3;

/// Recovers the cubic coefficient from sampled `(F, dk)` data:
/// `α = [dk''·k² + dk'²·k] / (6ξ²)` after a 5-point running mean.
///
/// The first and last three estimates are flagged as edge values: their
/// stencils mix smoothing windows of different widths (and the outermost
/// use one-sided differences), so their error does not shrink with the
/// grid spacing.
pub fn estimate_alpha_from_dk(samples: &[(f64, f64)], k: StiffnessRef, xi: f64) -> Result<Vec<AlphaEstimate>> {
    if samples.len() < 7 {
        return Err(Error::arg(format!("need at least 7 samples, got {}", samples.len())));
    }
    let increasing = samples.windows(2).all(|w| w[1].0 > w[0].0);
    let decreasing = samples.windows(2).all(|w| w[1].0 < w[0].0);
    if !(increasing || decreasing) {
        return Err(Error::arg("forces must be strictly monotone without duplicates"));
    }
    let k_val = match k {
        StiffnessRef::Constant(v) | StiffnessRef::Local(v) => v,
    };
    if !(k_val > 0.0) {
        return Err(Error::arg("k must be positive"));
    }
    if !(xi > 0.0) {
        return Err(Error::arg("xi must be positive"));
    }
    let smooth = smooth_running_average(samples, 5)?;
    let n = smooth.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // three-point stencil, shifted inward at the ends
        let c = i.clamp(1, n - 2);
        let (f0, y0) = smooth[c - 1];
        let (f1, y1) = smooth[c];
        let (f2, y2) = smooth[c + 1];
        let (h1, h2) = (f1 - f0, f2 - f1);
        let d2 = 2.0 * (y0 / (h1 * (h1 + h2)) - y1 / (h1 * h2) + y2 / (h2 * (h1 + h2)));
        let slope_mid = -h2 / (h1 * (h1 + h2)) * y0 + (h2 - h1) / (h1 * h2) * y1 + h1 / (h2 * (h1 + h2)) * y2;
        // the quadratic through the stencil, differentiated at sample i
        let d1 = slope_mid + d2 * (smooth[i].0 - f1);
        let k_here = match k {
            StiffnessRef::Constant(v) => v,
            StiffnessRef::Local(v) => v + smooth[i].1,
        };
        out.push(AlphaEstimate {
            force: samples[i].0,
            alpha: (d2 * k_here * k_here + d1 * d1 * k_here) / (6.0 * xi * xi),
            edge: i < EDGE || i + EDGE >= n,
        });
    }
    Ok(out)
}

/// Centered moving mean. Near the ends the window shrinks symmetrically.
pub fn smooth_running_average(series: &[(f64, f64)], window: usize) -> Result<Vec<(f64, f64)>> {
    if window % 2 == 0 || window < 3 {
        return Err(Error::arg(format!("window must be odd and at least 3, got {window}")));
    }
    if window > series.len() {
        return Err(Error::arg(format!("window {window} longer than series ({})", series.len())));
    }
    let n = series.len();
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let sum: f64 = series[i - h..=i + h].iter().map(|s| s.1).sum();
            (series[i].0, sum / (2 * h + 1) as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    
    fn bare() -> PotentialModel {
        PotentialModel::gold_contact().scaled(0.0)
    }

    fn gold_anchor(xi: f64) -> BeamAnchor {
        BeamAnchor::new(10.0, xi, 2.0e-9, ForceDirection::Approach).unwrap()
    }

    #[test]
    fn bare_spring() {
        let a = BeamAnchor::new(10.0, 1.0, 1e-9, ForceDirection::Separate).unwrap();
        assert_eq!(equilibrium(&bare(), &a, 0.0).unwrap(), 1e-9);
        let x = equilibrium(&bare(), &a, 1e-9).unwrap();
        assert!((x - 1e-9 - 1e-10).abs() < 1e-22);
        let toward = BeamAnchor { direction: ForceDirection::Approach, ..a };
        let x = equilibrium(&bare(), &toward, 1e-9).unwrap();
        assert!((x - 1e-9 + 1e-10).abs() < 1e-22);
    }

    #[test]
    fn anchor_validation() {
        assert!(BeamAnchor::new(0.0, 0.8, 0.0, ForceDirection::Approach).is_err());
        assert!(BeamAnchor::new(10.0, 1.2, 0.0, ForceDirection::Approach).is_err());
        assert!(BeamAnchor::new(10.0, 0.0, 0.0, ForceDirection::Approach).is_err());
        let far = BeamAnchor { x_free: 1.0, ..gold_anchor(0.83) };
        assert!(matches!(equilibrium(&PotentialModel::gold_contact(), &far, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn residual_below_tolerance() {
        let m = PotentialModel::gold_contact();
        let a = gold_anchor(0.83);
        for f in [0.0, 1e-9, 3e-9, -2e-9] {
            let x = equilibrium(&m, &a, f).unwrap();
            let r = a.k_gap() * (x - a.x_free) + m.eval(x, 1).unwrap() + f;
            assert!(r.abs() < RESIDUAL_TOL, "F {f:e}: residual {r:e}");
        }
    }

    #[test]
    fn jump_to_contact_at_stiffness_zero() {
        let m = PotentialModel::gold_contact();
        let a = gold_anchor(0.83);
        // oracle: dense scan of k0/xi^2 + U'' from x_free toward contact
        let mut fold_x = None;
        let n = 200_000;
        for i in 0..n {
            let x = a.x_free - (a.x_free - m.window().0) * i as f64 / n as f64;
            if a.k_gap() + m.eval(x, 2).unwrap() <= 0.0 {
                fold_x = Some(x);
                break;
            }
        }
        let fold_x = fold_x.expect("tail is strong enough to fold");
        let fold_force = -(a.k_gap() * (fold_x - a.x_free) + m.eval(fold_x, 1).unwrap());
        let grid: Vec<f64> = (0..4000).map(|i| i as f64 * 2.0 * fold_force / 4000.0).collect();
        let curve = tune_curve(&m, &a, &grid).unwrap();
        let Some(Truncation::JumpToContact { requested, last_stable_force }) = curve.truncation else {
            panic!("expected jump to contact, got {:?}", curve.truncation);
        };
        assert!(((last_stable_force - fold_force) / fold_force).abs() < 1e-4);
        assert!(requested > last_stable_force);
        let last = curve.points.last().unwrap();
        assert!(last.force <= last_stable_force && last.k_eff > 0.0);
        assert!(curve.points.iter().all(|p| p.stable && p.k_eff > 0.0));
        assert!(matches!(equilibrium(&m, &a, requested), Err(Error::Instability { .. })));
    }

    #[test]
    fn zero_potential_curve() {
        let a = BeamAnchor::new(10.0, 1.0, 0.0, ForceDirection::Separate).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 1e-10).collect();
        let c = tune_curve(&bare(), &a, &grid).unwrap();
        assert!(c.truncation.is_none());
        for p in &c.points {
            assert_eq!((p.dk, p.alpha), (0.0, 0.0));
            assert!((p.x_eq - p.force / 10.0).abs() < 1e-24);
        }
    }

    #[test]
    fn anchor_point_of_default_model() {
        let m = PotentialModel::gold_contact();
        // rest position at the bond minimum: the inflection lies on this branch
        let a = BeamAnchor::new(10.0, 1.0, 0.0, ForceDirection::Approach).unwrap();
        let xs = m.max_attraction_point().unwrap();
        // force that places the equilibrium there, then solve forward
        let f = -(a.k_gap() * (xs - a.x_free) + m.eval(xs, 1).unwrap());
        let p = tune_curve(&m, &a, &[f]).unwrap().points[0];
        assert!((p.x_eq - xs).abs() < 1e-18, "{:e} vs {:e}", p.x_eq, xs);
        assert!(p.dk.abs() < 1e-6 * a.k0);
        assert!((p.alpha / 2e22 - 1.0).abs() < 1e-6);
        // forward map is exact: no smoothing hidden in it
        assert_eq!(p.dk, m.eval(p.x_eq, 2).unwrap());
        assert_eq!(p.alpha, m.eval(p.x_eq, 4).unwrap() / 6.0);
    }

    #[test]
    fn tail_regime_matches_measured_scale() {
        // with the shape constant, a few-percent stiffness shift comes with
        // a cubic coefficient near -2e18 N/m^3
        let m = PotentialModel::gold_contact();
        let a = gold_anchor(0.83);
        let (near, _) = fold_forces(&m, &a).unwrap();
        let near = near.unwrap();
        let grid: Vec<f64> = (0..3000).map(|i| i as f64 * near / 3000.0).collect();
        let c = tune_curve(&m, &a, &grid).unwrap();
        let p = c.points.iter().find(|p| p.dk <= -0.03 * a.k0).unwrap();
        assert!(p.alpha < 0.0 && (p.alpha.abs() / 2e18 - 1.0).abs() < 0.3, "{p:?}");
    }

    #[test]
    fn scaling_follows_chain_rule() {
        let m = PotentialModel::gold_contact();
        let a = gold_anchor(0.83);
        let c = 1.7;
        let ms = m.scaled(c);
        let grid: Vec<f64> = (0..10).map(|i| i as f64 * 5e-11).collect();
        for p in tune_curve(&m, &a, &grid).unwrap().points {
            // the force that holds the scaled model at the same gap
            let f = -(a.k_gap() * (p.x_eq - a.x_free) + ms.eval(p.x_eq, 1).unwrap());
            let q = tune_curve(&ms, &a, &[f]).unwrap().points[0];
            assert!(((q.x_eq - p.x_eq) / p.x_eq).abs() < 1e-8);
            assert!((q.dk - c * p.dk).abs() <= 1e-8 * (c * p.dk).abs());
            assert!((q.alpha - c * p.alpha).abs() <= 1e-8 * (c * p.alpha).abs());
        }
    }

    #[test]
    fn linear_dk_closed_form() {
        let beta = 1e3;
        let samples: Vec<_> = (0..21).map(|i| (i as f64 * 1e-10, beta * i as f64 * 1e-10)).collect();
        let est = estimate_alpha_from_dk(&samples, StiffnessRef::Constant(10.0), 0.83).unwrap();
        let expected = beta * beta * 10.0 / (6.0 * 0.83 * 0.83);
        assert!((expected - 2.419e6).abs() < 1e3);
        for e in est.iter().filter(|e| !e.edge) {
            assert!((e.alpha / expected - 1.0).abs() < 1e-6, "{e:?}");
        }
        let flat: Vec<_> = (0..10).map(|i| (i as f64, 0.3)).collect();
        assert!(estimate_alpha_from_dk(&flat, StiffnessRef::Constant(10.0), 0.83)
            .unwrap()
            .iter()
            .all(|e| e.alpha.abs() < 1e-12));
    }

    #[test]
    fn estimator_preconditions() {
        let few: Vec<_> = (0..6).map(|i| (i as f64, 0.0)).collect();
        assert!(estimate_alpha_from_dk(&few, StiffnessRef::Constant(10.0), 0.83).is_err());
        let mut dup: Vec<_> = (0..8).map(|i| (i as f64, 0.0)).collect();
        dup[4].0 = dup[3].0;
        assert!(estimate_alpha_from_dk(&dup, StiffnessRef::Constant(10.0), 0.83).is_err());
    }

    fn round_trip_error(n: usize, k: fn(&BeamAnchor) -> StiffnessRef, reach: f64) -> f64 {
        let m = PotentialModel::gold_contact();
        let a = gold_anchor(0.83);
        let (_, far) = fold_forces(&m, &a).unwrap();
        assert!(far.is_none());
        let (near, _) = fold_forces(&m, &a).unwrap();
        let f_end = reach * near.unwrap();
        let grid: Vec<f64> = (0..n).map(|i| f_end * i as f64 / (n - 1) as f64).collect();
        let curve = tune_curve(&m, &a, &grid).unwrap();
        assert!(curve.truncation.is_none());
        let samples: Vec<_> = curve.points.iter().map(|p| (p.force, p.dk)).collect();
        let est = estimate_alpha_from_dk(&samples, k(&a), a.xi).unwrap();
        let scale = curve.points.iter().map(|p| p.alpha.abs()).fold(0.0, f64::max);
        est.iter()
            .zip(&curve.points)
            .filter(|(e, _)| !e.edge)
            .map(|(e, p)| (e.alpha - p.alpha).abs() / p.alpha.abs().max(1e-3 * scale))
            .fold(0.0, f64::max)
    }

    #[test]
    fn round_trip_refines() {
        let local = |a: &BeamAnchor| StiffnessRef::Local(a.k0);
        let coarse = round_trip_error(200, local, 0.8);
        let fine = round_trip_error(400, local, 0.8);
        assert!(coarse < 0.05, "coarse error {coarse}");
        assert!(fine <= 0.5 * coarse, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn constant_stiffness_is_close_while_shift_is_small() {
        let constant = |a: &BeamAnchor| StiffnessRef::Constant(a.k0);
        let err = round_trip_error(300, constant, 0.3);
        assert!(err < 0.05, "error {err}");
    }

    #[test]
    fn smoothing_examples() {
        let flat: Vec<_> = (0..9).map(|i| (i as f64, 2.5)).collect();
        assert_eq!(smooth_running_average(&flat, 5).unwrap(), flat);
        let line: Vec<_> = (0..9).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let s = smooth_running_average(&line, 7).unwrap();
        for (p, q) in s.iter().zip(&line) {
            assert!((p.1 - q.1).abs() < 1e-12);
        }
        let mut imp: Vec<_> = (0..11).map(|i| (i as f64, 0.0)).collect();
        imp[5].1 = 1.0;
        let s = smooth_running_average(&imp, 5).unwrap();
        for (i, p) in s.iter().enumerate() {
            let want = if (3..=7).contains(&i) { 0.2 } else { 0.0 };
            assert!((p.1 - want).abs() < 1e-15);
        }
        assert!(smooth_running_average(&imp, 4).is_err());
        assert!(smooth_running_average(&imp[..3], 5).is_err());
    }
}
