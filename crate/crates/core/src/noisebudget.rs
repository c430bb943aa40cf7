//! Force-noise budget: incoherent sums of one-sided force PSDs, dB
//! comparisons against the thermal floor and the parametric noise
//! temperature.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::duffing::ResonatorParams;
use crate::{Error, Result, K_B};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Thermal,
    Johnson,
    Backaction,
    Phase,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub name: String,
    /// N²/Hz.
    pub s_f: f64,
    pub provenance: Provenance,
    /// Bath temperature, recorded for thermal sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl NoiseSource {
    pub fn new(name: impl Into<String>, s_f: f64, provenance: Provenance) -> Result<Self> {
        if !(s_f >= 0.0 && s_f.is_finite()) {
            return Err(Error::arg("noise power must be non-negative and finite"));
        }
        Ok(Self { name: name.into(), s_f, provenance, temperature: None })
    }

    /// Source given as an amplitude density in N/√Hz.
    pub fn from_amplitude(name: impl Into<String>, sqrt_s_f: f64, provenance: Provenance) -> Result<Self> {
        Self::new(name, sqrt_s_f * sqrt_s_f, provenance)
    }

    pub fn amplitude(&self) -> f64 {
        self.s_f.sqrt()
    }
}

/// Current-to-force transduction of a beam carrying current in a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transduction {
    /// Magnetic field, T.
    pub b: f64,
    /// Beam length, m.
    pub l: f64,
    /// Circuit resistance, Ω.
    pub r: f64,
}

/// Brownian force noise `4 m_eff ω0 k_B T / Q`.
pub fn thermal_source(p: &ResonatorParams, temperature: f64) -> Result<NoiseSource> {
    let n = crate::sde::thermal_noise_for(p, temperature)?;
    Ok(NoiseSource { temperature: Some(temperature), ..NoiseSource::new("thermal", n.s_f, Provenance::Thermal)? })
}

/// Johnson noise of the circuit resistance, `(B l)² 4 k_B T / R`. An
/// infinite resistance gives zero.
pub fn johnson_source(t: &Transduction, temperature: f64) -> Result<NoiseSource> {
    if !(temperature > 0.0) {
        return Err(Error::arg("circuit temperature must be positive"));
    }
    if !(t.b > 0.0 && t.l > 0.0 && t.r > 0.0) {
        return Err(Error::arg("field, length and resistance must be positive"));
    }
    let bl = t.b * t.l;
    NoiseSource::new("johnson", bl * bl * 4.0 * K_B * temperature / t.r, Provenance::Johnson)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetLine {
    pub name: String,
    pub s_f: f64,
    pub fraction: f64,
    /// `10 log10(S/S_thermal)`; `None` without a thermal source.
    pub db_rel_thermal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budget {
    pub s_total: f64,
    pub lines: Vec<BudgetLine>,
    /// Sum of the non-thermal sources.
    pub s_para: f64,
    /// `T S_para / S_thermal`, when a thermal source with a temperature is
    /// present.
    pub t_para: Option<f64>,
}

pub fn db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}

/// Adds sources incoherently. Several thermal sources are pooled as the
/// thermal reference.
pub fn combine(sources: &[NoiseSource]) -> Result<Budget> {
    if sources.is_empty() {
        return Err(Error::arg("a budget needs at least one source"));
    }
    let s_total: f64 = sources.iter().map(|s| s.s_f).sum();
    let thermal: Vec<&NoiseSource> = sources.iter().filter(|s| s.provenance == Provenance::Thermal).collect();
    let s_th: f64 = thermal.iter().map(|s| s.s_f).sum();
    let s_para = s_total - s_th;
    let reference = (!thermal.is_empty() && s_th > 0.0).then_some(s_th);
    let lines = sources
        .iter()
        .map(|s| BudgetLine {
            name: s.name.clone(),
            s_f: s.s_f,
            fraction: if s_total > 0.0 { s.s_f / s_total } else { 0.0 },
            db_rel_thermal: reference.map(|r| db(s.s_f / r)),
        })
        .collect();
    let temperature = thermal.iter().find_map(|s| s.temperature);
    let t_para = match (reference, temperature) {
        (Some(r), Some(t)) => Some(t * s_para / r),
        _ => None,
    };
    Ok(Budget { s_total, lines, s_para, t_para })
}

impl Budget {
    /// Columns `name, S_F_N2_per_Hz, fraction, dB_rel_thermal`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["name", "S_F_N2_per_Hz", "fraction", "dB_rel_thermal"])?;
        for l in &self.lines {
            let rel = l.db_rel_thermal.map_or_else(String::new, |d| format!("{d:e}"));
            w.write_record([l.name.clone(), format!("{:e}", l.s_f), format!("{:e}", l.fraction), rel])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn report_toml(&self) -> String {
        toml::to_string(self).expect("budget fields are plain values")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consistency {
    /// Amplitude ratio `√(S_inferred/S_budget)`.
    pub ratio: f64,
    /// Power difference `10 log10(S_inferred/S_budget)`.
    pub db: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares an inferred total with the budget; passes when the amplitude
/// ratio is within `tolerance` (relative) of 1.
pub fn total_vs_measured(s_budget: f64, s_inferred: f64, tolerance: f64) -> Result<Consistency> {
    if !(s_budget > 0.0 && s_inferred > 0.0) {
        return Err(Error::arg("both noise powers must be positive"));
    }
    let ratio = (s_inferred / s_budget).sqrt();
    Ok(Consistency { ratio, db: db(s_inferred / s_budget), tolerance, pass: (ratio - 1.0).abs() <= tolerance })
}
