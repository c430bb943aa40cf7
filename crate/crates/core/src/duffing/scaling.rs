//! Bifurcation threshold against resonator mass for geometrically similar
//! doubly clamped beams.
//!
//! With fixed aspect ratios `w/l`, `t/l` and density, the mass sets the
//! length, the stiffness grows as `k = κ l` and the intrinsic elongation
//! nonlinearity is `α₀ = λ k / t²`.

use serde::{Deserialize, Serialize};

use super::{critical_point, ResonatorParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryScaling {
    /// Material density, kg/m³.
    pub density: f64,
    pub width_over_length: f64,
    pub thickness_over_length: f64,
    /// Stiffness per unit length at fixed aspect ratios, N/m².
    pub stiffness_per_length: f64,
    /// Dimensionless elongation coefficient in `α₀ = λ k / t²`.
    pub lambda: f64,
    pub q: f64,
    /// Modal to total mass ratio.
    pub modal_mass_ratio: f64,
    /// Smallest admissible `t/l`.
    pub min_thickness_over_length: f64,
}

impl Default for GeometryScaling {
    /// Gold beam of 50 × 1.5 × 0.51 µm, 0.2 ng and 10 N/m, with
    /// `α₀ = 2.2e14 N/m³` and `Q = 3000`.
    fn default() -> Self {
        let (l, w, t) = (50e-6, 1.5e-6, 0.51e-6);
        let (mass, k, alpha0) = (2.0e-13, 10.0, 2.2e14);
        Self {
            density: mass / (l * w * t),
            width_over_length: w / l,
            thickness_over_length: t / l,
            stiffness_per_length: k / l,
            lambda: alpha0 * t * t / k,
            q: 3000.0,
            modal_mass_ratio: 0.5,
            min_thickness_over_length: 0.005,
        }
    }
}

impl GeometryScaling {
    fn check(&self) -> Result<()> {
        let positive = [
            self.density,
            self.width_over_length,
            self.thickness_over_length,
            self.stiffness_per_length,
            self.lambda,
            self.modal_mass_ratio,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::arg("geometry parameters must be positive and finite"));
        }
        if self.modal_mass_ratio > 1.0 {
            return Err(Error::arg("modal mass ratio cannot exceed 1"));
        }
        if self.thickness_over_length < self.min_thickness_over_length {
            return Err(Error::arg(format!(
                "t/l = {} below the admissible floor {}",
                self.thickness_over_length, self.min_thickness_over_length
            )));
        }
        Ok(())
    }

    /// Beam length for a given total mass.
    pub fn length(&self, mass: f64) -> f64 {
        (mass / (self.density * self.width_over_length * self.thickness_over_length)).cbrt()
    }

    pub fn intrinsic_alpha(&self, mass: f64) -> f64 {
        let l = self.length(mass);
        let t = self.thickness_over_length * l;
        self.lambda * self.stiffness_per_length * l / (t * t)
    }

    pub fn resonator(&self, mass: f64, alpha: f64) -> Result<ResonatorParams> {
        self.check()?;
        let k = self.stiffness_per_length * self.length(mass);
        ResonatorParams::from_stiffness(mass, self.modal_mass_ratio * mass, k, self.q, alpha, 1.0)
    }

    /// Exponent `n` in `F_c ∝ mᵑ` at fixed aspect ratios.
    pub fn scaling_exponent(mode: ThresholdMode) -> f64 {
        // k ∝ m^{1/3}; α₀ ∝ k/l² ∝ m^{-1/3}; F_c ∝ k^{3/2} |α|^{-1/2}
        match mode {
            ThresholdMode::Intrinsic => 2.0 / 3.0,
            ThresholdMode::Chemical => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Intrinsic,
    Chemical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    pub mode: ThresholdMode,
    /// `(mass kg, F_c N)`.
    pub points: Vec<(f64, f64)>,
    /// `log10(F_c intrinsic / F_c chemical)` at each mass.
    pub decades_below_intrinsic: Vec<f64>,
}

/// Threshold drive against mass with the nonlinearity either intrinsic to
/// the beam or set to `chem_alpha`.
pub fn threshold_vs_mass(
    masses: &[f64],
    mode: ThresholdMode,
    chem_alpha: f64,
    geometry: &GeometryScaling,
) -> Result<ThresholdCurve> {
    geometry.check()?;
    if masses.is_empty() || masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::arg("masses must be positive"));
    }
    if masses.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("mass grid must be ascending"));
    }
    if chem_alpha == 0.0 || !chem_alpha.is_finite() {
        return Err(Error::arg("chemical alpha must be finite and nonzero"));
    }
    let mut points = Vec::with_capacity(masses.len());
    let mut decades = Vec::with_capacity(masses.len());
    for &mass in masses {
        let intrinsic = critical_point(&geometry.resonator(mass, geometry.intrinsic_alpha(mass))?)?.force;
        let chemical = critical_point(&geometry.resonator(mass, chem_alpha)?)?.force;
        points.push((mass, if mode == ThresholdMode::Intrinsic { intrinsic } else { chemical }));
        decades.push((intrinsic / chemical).log10());
    }
    Ok(ThresholdCurve { mode, points, decades_below_intrinsic: decades })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masses() -> Vec<f64> {
        (0..25).map(|i| 1e-18 * 10f64.powf(i as f64 * 0.5)).collect()
    }

    #[test]
    fn calibration_reproduces_reference_beam() {
        let g = GeometryScaling::default();
        assert!((g.length(2e-13) / 50e-6 - 1.0).abs() < 1e-12);
        assert!((g.intrinsic_alpha(2e-13) / 2.2e14 - 1.0).abs() < 1e-12);
        assert!((g.lambda - 5.72).abs() < 0.01);
        assert!((g.resonator(2e-13, 1.0).unwrap().k() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn chemical_curve_lies_below() {
        let g = GeometryScaling::default();
        let intr = threshold_vs_mass(&masses(), ThresholdMode::Intrinsic, 2e22, &g).unwrap();
        let chem = threshold_vs_mass(&masses(), ThresholdMode::Chemical, 2e22, &g).unwrap();
        for ((a, b), d) in intr.points.iter().zip(&chem.points).zip(&chem.decades_below_intrinsic) {
            assert!(b.1 < a.1);
            assert!((d - (a.1 / b.1).log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_mass_follows_exponent() {
        let g = GeometryScaling::default();
        for mode in [ThresholdMode::Intrinsic, ThresholdMode::Chemical] {
            for m in [1e-17, 3e-15, 2e-13] {
                let a = threshold_vs_mass(&[m], mode, -1e17, &g).unwrap().points[0].1;
                let b = threshold_vs_mass(&[2.0 * m], mode, -1e17, &g).unwrap().points[0].1;
                let n = GeometryScaling::scaling_exponent(mode);
                assert!((b / a / 2f64.powf(n) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let thin = GeometryScaling { thickness_over_length: 0.004, ..Default::default() };
        assert!(threshold_vs_mass(&[1e-15], ThresholdMode::Intrinsic, 1e20, &thin).is_err());
        let g = GeometryScaling::default();
        assert!(threshold_vs_mass(&[2e-15, 1e-15], ThresholdMode::Intrinsic, 1e20, &g).is_err());
        assert!(threshold_vs_mass(&[-1.0], ThresholdMode::Intrinsic, 1e20, &g).is_err());
    }
}
