//! Scenario files: typed blocks, unknown-key detection and default
//! resolution.

use std::path::{Path, PathBuf};

use chemduff::analysis::OperatingPoint;
use chemduff::duffing::{GeometryScaling, SweepDirection};
use chemduff::noisebudget::{Provenance, Transduction};
use chemduff::tuning::ForceDirection;
use chemduff::TrajectoryKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PotentialScan,
    TuneSweep,
    Hysteresis,
    StochasticResonance,
    NoiseBudget,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PotentialScan => "potential-scan",
            Command::TuneSweep => "tune-sweep",
            Command::Hysteresis => "hysteresis",
            Command::StochasticResonance => "stochastic-resonance",
            Command::NoiseBudget => "noise-budget",
        }
    }

    /// Parameter blocks the command reads.
    fn blocks(self) -> &'static [&'static str] {
        match self {
            Command::PotentialScan => &["potential", "scan"],
            Command::TuneSweep => &["potential", "beam", "tune"],
            Command::Hysteresis => &["resonator", "drive", "sweep", "threshold_scan"],
            Command::StochasticResonance => &["resonator", "drive", "noise", "sr", "histogram"],
            Command::NoiseBudget => &["resonator", "budget"],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub command: Command,
    /// Output directory, relative to the working directory.
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam: Option<BeamBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonator: Option<ResonatorBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_scan: Option<ThresholdBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<SrBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetBlock>,
    /// Directory of the scenario file; input paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PotentialBlock {
    /// Model file; the calibrated gold-contact model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Factor applied to every coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScanBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Gap range, m; defaults to the model window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamBlock {
    /// Intrinsic spring constant, N/m.
    pub k0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// Rest gap of the spring, m.
    pub x_free: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<ForceDirection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneBlock {
    /// Control force grid, N.
    pub f_min: f64,
    pub f_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Run the inverse estimator on the computed curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonatorBlock {
    /// Total mass, kg.
    pub m: f64,
    /// Modal mass, kg; half the total mass when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_eff: Option<f64>,
    /// Natural frequency, Hz. Give this or `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    /// Spring constant, N/m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub q: f64,
    /// Cubic coefficient, N/m³.
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DriveBlock {
    /// Drive amplitude, N. Give this or `force_over_fc`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<f64>,
    /// Drive amplitude in units of the critical drive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_over_fc: Option<f64>,
    /// Fixed drive frequency, Hz; overrides the operating point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<OperatingPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Frequency,
    Amplitude,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<SweepVariable>,
    /// Frequency range, Hz, for frequency sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
    /// Drive range, N, for amplitude sweeps at `[drive] frequency`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Also sweep the resonator with the opposite sign of alpha.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdBlock {
    /// Total-mass range, kg, sampled logarithmically.
    pub mass_min: f64,
    pub mass_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Mass-independent chemical cubic coefficient, N/m³.
    pub chem_alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryScaling>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NoiseBlock {
    /// Bath temperature, K. Give this or `s_f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Force-noise PSD, N²/Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_f: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<TrajectoryKind>,
    /// Recorded duration of each run, s.
    pub duration: f64,
    /// Integration step, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Modulation depth relative to the drive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mod_depth_rel: Option<f64>,
    /// Modulation frequency, Hz; a quarter of the switching rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mod_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_iterations: Option<usize>,
    /// Lock-in bandwidth for full-coordinate runs, Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lockin_bandwidth: Option<f64>,
    /// Schmitt thresholds as fractions of the plateau separation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HistogramBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Relative drive step for a second unmodulated run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_step_rel: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceBlock {
    pub name: String,
    /// Power density, N²/Hz. Give this or `amplitude`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_f: Option<f64>,
    /// Amplitude density, N/√Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JohnsonBlock {
    /// Magnetic field, T.
    pub b: f64,
    /// Beam length, m.
    pub l: f64,
    /// Circuit resistance, Ω.
    pub r: f64,
    /// Circuit temperature, K.
    pub temperature: f64,
}

impl JohnsonBlock {
    pub fn transduction(&self) -> Transduction {
        Transduction { b: self.b, l: self.l, r: self.r }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasuredBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Allowed relative deviation of the amplitude ratio from 1.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BudgetBlock {
    /// Thermal line from `[resonator]` at this temperature, K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub johnson: Option<JohnsonBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredBlock>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Scenario {
    /// Parses scenario text, rejecting unknown keys and blocks the command
    /// does not read.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::validation(one_line(&e.to_string())))?;
        let mut unknown = Vec::new();
        let mut s: Scenario = serde_ignored::deserialize(de, |path| unknown.push(path.to_string().replace("?.", "")))
            .map_err(|e| CliError::validation(one_line(&e.to_string())))?;
        if !unknown.is_empty() {
            return Err(CliError::validation(format!("unknown keys: {}", unknown.join(", "))));
        }
        let allowed = s.command.blocks();
        let present = s.present_blocks();
        let unused: Vec<&str> = present.into_iter().filter(|b| !allowed.contains(b)).collect();
        if !unused.is_empty() {
            return Err(CliError::validation(format!(
                "blocks not read by command {}: {}",
                s.command.name(),
                unused.join(", ")
            )));
        }
        s.base_dir = base_dir.to_path_buf();
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read scenario {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn present_blocks(&self) -> Vec<&'static str> {
        let flags = [
            ("potential", self.potential.is_some()),
            ("scan", self.scan.is_some()),
            ("beam", self.beam.is_some()),
            ("tune", self.tune.is_some()),
            ("resonator", self.resonator.is_some()),
            ("drive", self.drive.is_some()),
            ("sweep", self.sweep.is_some()),
            ("threshold_scan", self.threshold_scan.is_some()),
            ("noise", self.noise.is_some()),
            ("sr", self.sr.is_some()),
            ("histogram", self.histogram.is_some()),
            ("budget", self.budget.is_some()),
        ];
        flags.into_iter().filter(|(_, p)| *p).map(|(n, _)| n).collect()
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Input path relative to the scenario file.
    pub fn input_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub(crate) fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn sweep_direction_name(d: SweepDirection) -> &'static str {
    match d {
        SweepDirection::Up => "up",
        SweepDirection::Down => "down",
    }
}

pub(crate) fn require<T: Clone>(block: &Option<T>, name: &str) -> Result<T, CliError> {
    block
        .clone()
        .ok_or_else(|| CliError::validation(format!("missing block [{name}]")))
}
