//! Validation and execution of the five commands.

use std::f64::consts::PI;

use chemduff::analysis::{
    amplitude_histogram, effective_samples, two_proportion_test, two_state_clamped, OperatingPoint, SrExperiment,
};
use chemduff::duffing::{
    amplitude_sweep, bistable_interval, critical_point, critical_point_leading_order, hysteresis_area,
    hysteresis_sweep, peak_response, threshold_vs_mass, GeometryScaling, SweepBranch, ThresholdMode,
};
use chemduff::noisebudget::{combine, johnson_source, thermal_source, total_vs_measured, NoiseSource, Provenance};
use chemduff::sde::{thermal_noise_for, write_bsim, Integrator, SimConfig};
use chemduff::tuning::{equilibrium, estimate_alpha_from_dk, fold_forces, tune_curve, StiffnessRef, Truncation};
use chemduff::{
    csvio, BeamAnchor, DriveSpec, NoiseSpec, PotentialModel, ResonatorParams, SweepDirection, TrajectoryKind,
};
use serde::Serialize;

use crate::manifest::Outputs;
use crate::scenario::{require, sweep_direction_name, Command, Scenario, SweepVariable};
use crate::CliError;

/// A validated scenario with every default filled in.
#[derive(Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
    /// Quantities computed during validation (critical drive, noise level).
    pub derived: toml::Table,
    plan: Plan,
}

#[derive(Debug)]
enum Plan {
    Potential { model: PotentialModel, xs: Vec<f64> },
    Tune { model: PotentialModel, anchor: BeamAnchor, forces: Vec<f64>, estimate: bool },
    Hysteresis { params: ResonatorParams, sweep: SweepPlan, mirror: bool, threshold: Option<ThresholdPlan> },
    Sr { exp: Box<SrExperiment>, bins: usize, step: Option<f64> },
    Budget { sources: Vec<NoiseSource>, measured: Option<(f64, f64)> },
}

#[derive(Debug)]
enum SweepPlan {
    Frequency { force: f64, lo: f64, hi: f64, n: usize },
    Amplitude { omega: f64, lo: f64, hi: f64, n: usize },
}

#[derive(Debug)]
struct ThresholdPlan {
    masses: Vec<f64>,
    chem_alpha: f64,
    geometry: GeometryScaling,
}

impl Prepared {
    /// Resolved scenario plus derived quantities, as TOML.
    pub fn echo(&self) -> String {
        let mut t = self.parameters();
        t.insert("derived".into(), toml::Value::Table(self.derived.clone()));
        toml::to_string(&t).expect("resolved scenario serializes")
    }

    pub fn parameters(&self) -> toml::Table {
        toml::Table::try_from(&self.scenario).expect("resolved scenario serializes")
    }
}

fn val<T: Serialize>(v: T) -> toml::Value {
    toml::Value::try_from(v).expect("plain value serializes")
}

fn invalid(e: chemduff::Error) -> CliError {
    CliError::invalid(e)
}

fn runtime(e: chemduff::Error) -> CliError {
    CliError::runtime(e)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::validation(format!("{name} must be positive and finite, got {v}")))
    }
}

fn one_of(name_a: &str, a: Option<f64>, name_b: &str, b: Option<f64>) -> Result<(bool, f64), CliError> {
    match (a, b) {
        (Some(x), None) => Ok((true, x)),
        (None, Some(y)) => Ok((false, y)),
        _ => Err(CliError::validation(format!("give exactly one of {name_a} and {name_b}"))),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1).max(1) as f64)).collect()
}

fn points(name: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::validation(format!("{name} must be at least {min}, got {v}")))
    }
}

/// Validates a scenario and resolves its defaults without running anything
/// expensive.
pub fn prepare(mut s: Scenario) -> Result<Prepared, CliError> {
    if s.workers == Some(0) {
        return Err(CliError::validation("workers must be at least 1"));
    }
    let mut derived = toml::Table::new();
    let mut warnings = Vec::new();
    let plan = match s.command {
        Command::PotentialScan => prepare_potential(&mut s, &mut derived)?,
        Command::TuneSweep => prepare_tune(&mut s, &mut derived)?,
        Command::Hysteresis => prepare_hysteresis(&mut s, &mut derived, &mut warnings)?,
        Command::StochasticResonance => prepare_sr(&mut s, &mut derived, &mut warnings)?,
        Command::NoiseBudget => prepare_budget(&mut s, &mut derived)?,
    };
    Ok(Prepared { scenario: s, warnings, derived, plan })
}

fn load_model(s: &mut Scenario, derived: &mut toml::Table) -> Result<PotentialModel, CliError> {
    let mut block = s.potential.clone().unwrap_or_default();
    let model = match &block.file {
        Some(f) => {
            let path = s.input_path(f);
            if !path.is_file() {
                return Err(CliError::validation(format!("potential.file not found: {}", path.display())));
            }
            PotentialModel::load(&path).map_err(invalid)?
        }
        None => PotentialModel::gold_contact(),
    };
    let scale = block.scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale != 0.0) {
        return Err(CliError::validation("potential.scale must be finite and nonzero"));
    }
    block.scale = Some(scale);
    s.potential = Some(block);
    let model = if scale == 1.0 { model } else { model.scaled(scale) };
    let doc: toml::Table = toml::from_str(&model.to_toml()).expect("model document round-trips");
    derived.insert("potential_model".into(), toml::Value::Table(doc));
    Ok(model)
}

fn prepare_potential(s: &mut Scenario, derived: &mut toml::Table) -> Result<Plan, CliError> {
    let model = load_model(s, derived)?;
    let (w_lo, w_hi) = model.window();
    let mut scan = s.scan.clone().unwrap_or_default();
    let n = points("scan.points", *scan.points.get_or_insert(2001), 2)?;
    let lo = *scan.x_min.get_or_insert(w_lo);
    let hi = *scan.x_max.get_or_insert(w_hi);
    if !(lo < hi && model.contains(lo) && model.contains(hi)) {
        return Err(CliError::validation(format!(
            "scan range [{lo:e}, {hi:e}] must be increasing and inside the model window [{w_lo:e}, {w_hi:e}]"
        )));
    }
    s.scan = Some(scan);
    Ok(Plan::Potential { model, xs: linspace(lo, hi, n) })
}

fn prepare_tune(s: &mut Scenario, derived: &mut toml::Table) -> Result<Plan, CliError> {
    let model = load_model(s, derived)?;
    let mut beam = require(&s.beam, "beam")?;
    let xi = *beam.xi.get_or_insert(1.0);
    let direction = *beam.direction.get_or_insert_with(Default::default);
    let anchor = BeamAnchor::new(beam.k0, xi, beam.x_free, direction).map_err(invalid)?;
    equilibrium(&model, &anchor, 0.0).map_err(invalid)?;
    s.beam = Some(beam);
    let mut tune = require(&s.tune, "tune")?;
    let estimate = *tune.estimate.get_or_insert(true);
    let n = points("tune.points", *tune.points.get_or_insert(201), if estimate { 7 } else { 2 })?;
    if !(tune.f_min < tune.f_max && tune.f_min.is_finite() && tune.f_max.is_finite()) {
        return Err(CliError::validation("tune.f_min must be below tune.f_max"));
    }
    let forces = linspace(tune.f_min, tune.f_max, n);
    s.tune = Some(tune);
    let (near, far) = fold_forces(&model, &anchor).map_err(invalid)?;
    if let Some(f) = near {
        derived.insert("fold_force_closing_N".into(), val(f));
    }
    if let Some(f) = far {
        derived.insert("fold_force_opening_N".into(), val(f));
    }
    Ok(Plan::Tune { model, anchor, forces, estimate })
}

fn resonator(s: &mut Scenario, derived: &mut toml::Table) -> Result<ResonatorParams, CliError> {
    let mut r = require(&s.resonator, "resonator")?;
    let m_eff = *r.m_eff.get_or_insert(0.5 * r.m);
    let xi = *r.xi.get_or_insert(1.0);
    let (by_freq, v) = one_of("resonator.f0", r.f0, "resonator.k", r.k)?;
    let p = if by_freq {
        ResonatorParams::new(r.m, m_eff, 2.0 * PI * v, r.q, r.alpha, xi)
    } else {
        ResonatorParams::from_stiffness(r.m, m_eff, v, r.q, r.alpha, xi)
    }
    .map_err(invalid)?;
    s.resonator = Some(r);
    derived.insert("f0_Hz".into(), val(p.omega0() / (2.0 * PI)));
    derived.insert("k_N_per_m".into(), val(p.k()));
    derived.insert("decay_rate_per_s".into(), val(p.decay_rate()));
    Ok(p)
}

/// Critical point, recorded when the resonator is nonlinear.
fn critical(p: &ResonatorParams, derived: &mut toml::Table) -> Result<Option<f64>, CliError> {
    if p.alpha() == 0.0 {
        return Ok(None);
    }
    let cp = critical_point(p).map_err(invalid)?;
    derived.insert("critical_force_N".into(), val(cp.force));
    derived.insert("critical_frequency_Hz".into(), val(cp.omega / (2.0 * PI)));
    derived.insert("critical_amplitude_m".into(), val(cp.amplitude));
    Ok(Some(cp.force))
}

fn drive_force(s: &mut Scenario, fc: Option<f64>, derived: &mut toml::Table) -> Result<f64, CliError> {
    let d = s.drive.clone().unwrap_or_default();
    let (absolute, v) = one_of("drive.force", d.force, "drive.force_over_fc", d.force_over_fc)?;
    let force = if absolute {
        v
    } else {
        v * fc.ok_or_else(|| CliError::validation("drive.force_over_fc needs a nonzero alpha"))?
    };
    positive("drive force", force)?;
    derived.insert("drive_force_N".into(), val(force));
    if let Some(fc) = fc {
        derived.insert("drive_over_critical".into(), val(force / fc));
    }
    Ok(force)
}

fn prepare_hysteresis(s: &mut Scenario, derived: &mut toml::Table, warnings: &mut Vec<String>) -> Result<Plan, CliError> {
    let p = resonator(s, derived)?;
    let fc = critical(&p, derived)?;
    let force = drive_force(s, fc, derived)?;
    if fc.is_some_and(|fc| force <= fc) {
        warnings.push("drive is at or below the critical drive; no hysteresis is expected".into());
    }
    let mut sw = s.sweep.clone().unwrap_or_default();
    let n = points("sweep.points", *sw.points.get_or_insert(2001), 2)?;
    let mirror = *sw.mirror.get_or_insert(false);
    let sweep = match *sw.variable.get_or_insert(SweepVariable::Frequency) {
        SweepVariable::Frequency => {
            let (peak, _) = peak_response(&p, force).map_err(invalid)?;
            let half = (peak - p.omega0()).abs() + 20.0 * p.decay_rate();
            let hz = |w: f64| w / (2.0 * PI);
            let lo = 2.0 * PI * *sw.f_min.get_or_insert(hz(p.omega0() - half));
            let hi = 2.0 * PI * *sw.f_max.get_or_insert(hz(p.omega0() + half));
            positive("sweep.f_min", lo)?;
            if !(lo < hi) {
                return Err(CliError::validation("sweep.f_min must be below sweep.f_max"));
            }
            SweepPlan::Frequency { force, lo, hi, n }
        }
        SweepVariable::Amplitude => {
            let f = s
                .drive
                .as_ref()
                .and_then(|d| d.frequency)
                .ok_or_else(|| CliError::validation("amplitude sweeps need drive.frequency"))?;
            let omega = 2.0 * PI * positive("drive.frequency", f)?;
            let lo = positive("sweep.force_min", *sw.force_min.get_or_insert(0.05 * force))?;
            let hi = *sw.force_max.get_or_insert(2.0 * force);
            if !(lo < hi) {
                return Err(CliError::validation("sweep.force_min must be below sweep.force_max"));
            }
            SweepPlan::Amplitude { omega, lo, hi, n }
        }
    };
    s.sweep = Some(sw);
    let threshold = match s.threshold_scan.clone() {
        Some(mut t) => {
            let n = points("threshold_scan.points", *t.points.get_or_insert(49), 1)?;
            positive("threshold_scan.mass_min", t.mass_min)?;
            if !(t.mass_min < t.mass_max) {
                return Err(CliError::validation("threshold_scan.mass_min must be below mass_max"));
            }
            let geometry = *t.geometry.get_or_insert_with(GeometryScaling::default);
            let plan = ThresholdPlan { masses: logspace(t.mass_min, t.mass_max, n), chem_alpha: t.chem_alpha, geometry };
            // cheap check of the geometry at both ends
            for &m in [plan.masses[0], plan.masses[n - 1]].iter() {
                geometry.resonator(m, plan.chem_alpha).map_err(invalid)?;
            }
            s.threshold_scan = Some(t);
            Some(plan)
        }
        None => None,
    };
    Ok(Plan::Hysteresis { params: p, sweep, mirror, threshold })
}

fn prepare_sr(s: &mut Scenario, derived: &mut toml::Table, warnings: &mut Vec<String>) -> Result<Plan, CliError> {
    let p = resonator(s, derived)?;
    let fc = critical(&p, derived)?.ok_or_else(|| CliError::validation("stochastic resonance needs a nonzero alpha"))?;
    let force = drive_force(s, Some(fc), derived)?;
    let interval = bistable_interval(&p, force)
        .map_err(invalid)?
        .ok_or_else(|| CliError::validation("drive is below the critical drive; the response is not bistable"))?;
    derived.insert("bistable_low_Hz".into(), val(interval.0 / (2.0 * PI)));
    derived.insert("bistable_high_Hz".into(), val(interval.1 / (2.0 * PI)));

    let mut noise = s.noise.clone().unwrap_or_default();
    let (thermal, v) = one_of("noise.temperature", noise.temperature, "noise.s_f", noise.s_f)?;
    let s_f = if thermal { thermal_noise_for(&p, v).map_err(invalid)?.s_f } else { v };
    positive("force noise", s_f)?;
    if thermal {
        noise.s_f = None;
    }
    s.noise = Some(noise);
    derived.insert("s_f_N2_per_Hz".into(), val(s_f));

    let mut sr = require(&s.sr, "sr")?;
    positive("sr.duration", sr.duration)?;
    let mut exp = SrExperiment::envelope(p, force, s_f, s.seed, sr.duration);
    let kind = *sr.integrator.get_or_insert(TrajectoryKind::Envelope);
    exp.kind = kind;
    if kind == TrajectoryKind::Full {
        exp.dt = 2.0 * PI / p.omega0() / 256.0;
        exp.stride = ((0.25 / p.decay_rate()) / exp.dt).round().max(1.0) as usize;
    }
    exp.dt = positive("sr.dt", *sr.dt.get_or_insert(exp.dt))?;
    exp.stride = *sr.stride.get_or_insert(exp.stride);
    if exp.stride == 0 {
        return Err(CliError::validation("sr.stride must be at least 1"));
    }
    exp.mod_depth_rel = positive("sr.mod_depth_rel", *sr.mod_depth_rel.get_or_insert(exp.mod_depth_rel))?;
    exp.mod_omega = sr.mod_frequency.map(|f| 2.0 * PI * f);
    exp.segment_periods = positive("sr.segment_periods", *sr.segment_periods.get_or_insert(exp.segment_periods))?;
    exp.balance_duration = positive("sr.balance_duration", *sr.balance_duration.get_or_insert(exp.balance_duration))?;
    exp.balance_iterations = *sr.balance_iterations.get_or_insert(exp.balance_iterations);
    exp.lockin_bandwidth = positive("sr.lockin_bandwidth", *sr.lockin_bandwidth.get_or_insert(exp.lockin_bandwidth))?;
    let [lo, hi] = *sr.thresholds.get_or_insert([exp.threshold_fractions.0, exp.threshold_fractions.1]);
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(CliError::validation("sr.thresholds must satisfy 0 < low < high < 1"));
    }
    exp.threshold_fractions = (lo, hi);
    s.sr = Some(sr);

    let mut d = s.drive.clone().unwrap_or_default();
    exp.operating_point = *d.operating_point.get_or_insert(OperatingPoint::Midpoint);
    if let Some(f) = d.frequency {
        exp.drive_omega = Some(2.0 * PI * positive("drive.frequency", f)?);
    }
    s.drive = Some(d);

    // integrator preconditions (step against the oscillation period or the
    // decay time) at the nominal drive frequency
    let omega = exp.drive_omega.unwrap_or(0.5 * (interval.0 + interval.1));
    let mut drive = DriveSpec::unmodulated(force, omega);
    if let Some(mo) = exp.mod_omega {
        drive.mod_depth = exp.mod_depth_rel * force;
        drive.mod_omega = mo;
        warnings.extend(drive.warnings(&p));
    }
    let config = SimConfig::new(exp.dt, exp.duration).stride(exp.stride);
    Integrator::new(kind, &p, &drive, &NoiseSpec::new(s_f, s.seed), &config).map_err(invalid)?;

    let mut h = s.histogram.clone().unwrap_or_default();
    let bins = points("histogram.bins", *h.bins.get_or_insert(100), 8)?;
    let step = h.drive_step_rel;
    if let Some(st) = step {
        if !(st.is_finite() && st != 0.0 && st > -1.0) {
            return Err(CliError::validation("histogram.drive_step_rel must be finite, nonzero and above -1"));
        }
    }
    s.histogram = Some(h);
    Ok(Plan::Sr { exp: Box::new(exp), bins, step })
}

fn source_power(name: &str, s_f: Option<f64>, amplitude: Option<f64>) -> Result<f64, CliError> {
    let (power, v) = one_of(&format!("{name}.s_f"), s_f, &format!("{name}.amplitude"), amplitude)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(CliError::validation(format!("{name} noise must be non-negative")));
    }
    Ok(if power { v } else { v * v })
}

fn prepare_budget(s: &mut Scenario, derived: &mut toml::Table) -> Result<Plan, CliError> {
    let b = require(&s.budget, "budget")?;
    let mut sources = Vec::new();
    if let Some(t) = b.thermal_temperature {
        let p = resonator(s, derived)?;
        sources.push(thermal_source(&p, t).map_err(invalid)?);
    } else if s.resonator.is_some() {
        return Err(CliError::validation("[resonator] is only read together with budget.thermal_temperature"));
    }
    if let Some(j) = &b.johnson {
        sources.push(johnson_source(&j.transduction(), j.temperature).map_err(invalid)?);
    }
    let mut resolved = b.clone();
    for src in resolved.sources.iter_mut() {
        let power = source_power(&format!("budget.sources.{}", src.name), src.s_f, src.amplitude)?;
        let provenance = *src.provenance.get_or_insert(Provenance::Custom);
        sources.push(NoiseSource::new(src.name.clone(), power, provenance).map_err(invalid)?);
    }
    if sources.is_empty() {
        return Err(CliError::validation("the budget has no sources"));
    }
    let measured = match &b.measured {
        Some(m) => {
            let power = source_power("budget.measured", m.s_f, m.amplitude)?;
            positive("budget.measured", power)?;
            Some((power, positive("budget.measured.tolerance", m.tolerance)?))
        }
        None => None,
    };
    s.budget = Some(resolved);
    Ok(Plan::Budget { sources, measured })
}

/// Runs a prepared scenario and writes its outputs.
pub fn execute(prepared: &Prepared) -> Result<Vec<std::path::PathBuf>, CliError> {
    let s = &prepared.scenario;
    let mut out = Outputs::create(&s.output)?;
    let mut results = toml::Table::new();
    match &prepared.plan {
        Plan::Potential { model, xs } => run_potential(model, xs, &mut out, &mut results),
        Plan::Tune { model, anchor, forces, estimate } => {
            run_tune(model, anchor, forces, *estimate, &mut out, &mut results)
        }
        Plan::Hysteresis { params, sweep, mirror, threshold } => {
            run_hysteresis(params, sweep, *mirror, threshold.as_ref(), &mut out, &mut results)
        }
        Plan::Sr { exp, bins, step } => run_sr(exp, *bins, *step, &mut out, &mut results),
        Plan::Budget { sources, measured } => run_budget(sources, *measured, &mut out, &mut results),
    }?;
    for w in &prepared.warnings {
        push_warning(&mut results, w);
    }
    out.finish(s.command.name(), prepared.parameters(), prepared.derived.clone(), results)
}

fn push_warning(results: &mut toml::Table, w: &str) {
    let entry = results.entry("warnings").or_insert_with(|| toml::Value::Array(Vec::new()));
    if let toml::Value::Array(a) = entry {
        if !a.iter().any(|v| v.as_str() == Some(w)) {
            a.push(val(w));
        }
    }
}

fn write(out: &mut Outputs, name: &str, description: &str, header: &[&str], cols: &[&[f64]]) -> Result<(), CliError> {
    let path = out.file(name, description);
    csvio::write_columns(path, header, cols).map_err(runtime)
}

fn run_potential(model: &PotentialModel, xs: &[f64], out: &mut Outputs, results: &mut toml::Table) -> Result<(), CliError> {
    let eval = |order: u32| -> Result<Vec<f64>, CliError> {
        xs.iter().map(|&x| model.eval(x, order)).collect::<chemduff::Result<_>>().map_err(runtime)
    };
    let u = eval(0)?;
    let u2 = eval(2)?;
    let u4 = eval(4)?;
    let minus_u2: Vec<f64> = u2.iter().map(|v| -v).collect();
    let minus_u4_6: Vec<f64> = u4.iter().map(|v| -v / 6.0).collect();
    write(
        out,
        "potential_scan.csv",
        "gap x, energy U, curvature U'', -U'' and -U''''/6",
        &["x_m", "U_J", "d2U_N_per_m", "minus_d2U_N_per_m", "minus_d4U_over_6_N_per_m3"],
        &[xs, &u, &u2, &minus_u2, &minus_u4_6],
    )?;
    let x_star = model.max_attraction_point().map_err(runtime)?;
    results.insert("max_attraction_x_m".into(), val(x_star));
    results.insert("d2U_at_max_attraction_N_per_m".into(), val(model.eval(x_star, 2).map_err(runtime)?));
    results.insert("d4U_over_6_at_max_attraction_N_per_m3".into(), val(model.eval(x_star, 4).map_err(runtime)? / 6.0));
    Ok(())
}

fn run_tune(
    model: &PotentialModel,
    anchor: &BeamAnchor,
    forces: &[f64],
    estimate: bool,
    out: &mut Outputs,
    results: &mut toml::Table,
) -> Result<(), CliError> {
    let curve = tune_curve(model, anchor, forces).map_err(runtime)?;
    let col = |f: fn(&chemduff::TunePoint) -> f64| curve.points.iter().map(f).collect::<Vec<f64>>();
    let (f, x, dk, alpha, k_eff) = (col(|p| p.force), col(|p| p.x_eq), col(|p| p.dk), col(|p| p.alpha), col(|p| p.k_eff));
    let stable = col(|p| f64::from(u8::from(p.stable)));
    write(
        out,
        "tune_curve.csv",
        "control force, equilibrium gap, mode stiffness shift, mode cubic coefficient, effective stiffness, stability flag",
        &["F_N", "x_eq_m", "dk_N_per_m", "alpha_N_per_m3", "k_eff_N_per_m", "stable"],
        &[&f, &x, &dk, &alpha, &k_eff, &stable],
    )?;
    results.insert("stable_points".into(), val(curve.points.len() as i64));
    match curve.truncation {
        Some(Truncation::JumpToContact { requested, last_stable_force }) => {
            results.insert("truncation".into(), val("jump-to-contact"));
            results.insert("truncation_requested_force_N".into(), val(requested));
            results.insert("last_stable_force_N".into(), val(last_stable_force));
        }
        Some(Truncation::LeftWindow { requested }) => {
            results.insert("truncation".into(), val("left-window"));
            results.insert("truncation_requested_force_N".into(), val(requested));
        }
        None => {
            results.insert("truncation".into(), val("none"));
        }
    }
    if estimate {
        if curve.points.len() < 7 {
            push_warning(results, "fewer than 7 stable points; the inverse estimate was skipped");
            return Ok(());
        }
        let samples: Vec<(f64, f64)> = f.iter().copied().zip(dk.iter().copied()).collect();
        let est = estimate_alpha_from_dk(&samples, StiffnessRef::Local(anchor.k0), anchor.xi).map_err(runtime)?;
        let a_est: Vec<f64> = est.iter().map(|e| e.alpha).collect();
        let rel: Vec<f64> = a_est.iter().zip(&alpha).map(|(e, a)| (e - a) / a.abs()).collect();
        let edge: Vec<f64> = est.iter().map(|e| f64::from(u8::from(e.edge))).collect();
        write(
            out,
            "alpha_estimate.csv",
            "cubic coefficient recovered from the sampled stiffness shift against the forward value",
            &["F_N", "dk_N_per_m", "alpha_estimate_N_per_m3", "alpha_forward_N_per_m3", "relative_error", "edge"],
            &[&f, &dk, &a_est, &alpha, &rel, &edge],
        )?;
        // the cubic coefficient diverges at the fold, so report how far
        // along the grid the interior estimates stay within 5%
        let mut reach = None;
        for ((force, r), e) in f.iter().zip(&rel).zip(&edge) {
            if *e == 0.0 {
                if r.abs() > 0.05 {
                    break;
                }
                reach = Some(*force);
            }
        }
        if let Some(force) = reach {
            results.insert("estimate_within_5pct_up_to_N".into(), val(force));
        }
    }
    Ok(())
}

fn sweep_columns(b: &SweepBranch, frequency: bool) -> [Vec<f64>; 3] {
    let scale = if frequency { 1.0 / (2.0 * PI) } else { 1.0 };
    [
        b.points.iter().map(|p| p.control * scale).collect(),
        b.points.iter().map(|p| p.amplitude).collect(),
        b.points.iter().map(|p| p.phase).collect(),
    ]
}

fn run_hysteresis(
    p: &ResonatorParams,
    sweep: &SweepPlan,
    mirror: bool,
    threshold: Option<&ThresholdPlan>,
    out: &mut Outputs,
    results: &mut toml::Table,
) -> Result<(), CliError> {
    let frequency = matches!(sweep, SweepPlan::Frequency { .. });
    let control = if frequency { "f_Hz" } else { "F_N" };
    let mut variants = vec![("", *p)];
    if mirror {
        variants.push(("mirror_", p.with_alpha(-p.alpha()).map_err(runtime)?));
    }
    let mut jump_cols: [Vec<f64>; 5] = Default::default();
    for (prefix, params) in &variants {
        let run = |dir: SweepDirection| match *sweep {
            SweepPlan::Frequency { force, lo, hi, n } => hysteresis_sweep(params, force, (lo, hi), dir, n),
            SweepPlan::Amplitude { omega, lo, hi, n } => amplitude_sweep(params, omega, (lo, hi), dir, n),
        };
        let (up, down) = rayon::join(|| run(SweepDirection::Up), || run(SweepDirection::Down));
        let (up, down) = (up.map_err(runtime)?, down.map_err(runtime)?);
        for b in [&up, &down] {
            let dir = sweep_direction_name(b.direction);
            let [c, a, ph] = sweep_columns(b, frequency);
            write(
                out,
                &format!("{prefix}sweep_{dir}.csv"),
                &format!("{dir} sweep with alpha = {:e} N/m^3", params.alpha()),
                &[control, "amplitude_m", "phase_rad"],
                &[&c, &a, &ph],
            )?;
            for j in &b.jumps {
                jump_cols[0].push(params.alpha().signum());
                jump_cols[1].push(if b.direction == SweepDirection::Up { 1.0 } else { -1.0 });
                jump_cols[2].push(if frequency { j.control / (2.0 * PI) } else { j.control });
                jump_cols[3].push(j.from);
                jump_cols[4].push(j.to);
            }
        }
        let area = hysteresis_area(&up, &down).map_err(runtime)?;
        results.insert(format!("{prefix}hysteresis_area"), val(area));
        results.insert(format!("{prefix}jumps"), val((up.jumps.len() + down.jumps.len()) as i64));
        if let SweepPlan::Frequency { force, .. } = *sweep {
            if let Some((lo, hi)) = bistable_interval(params, force).map_err(runtime)? {
                results.insert(format!("{prefix}bistable_low_Hz"), val(lo / (2.0 * PI)));
                results.insert(format!("{prefix}bistable_high_Hz"), val(hi / (2.0 * PI)));
            }
            let (peak, amp) = peak_response(params, force).map_err(runtime)?;
            results.insert(format!("{prefix}peak_frequency_Hz"), val(peak / (2.0 * PI)));
            results.insert(format!("{prefix}peak_amplitude_m"), val(amp));
        }
    }
    let [a, b, c, d, e] = &jump_cols;
    write(
        out,
        "jumps.csv",
        "jumps between branches: sign of alpha, sweep direction (+1 up, -1 down), control value, amplitudes before and after",
        &["alpha_sign", "direction", control, "from_amplitude_m", "to_amplitude_m"],
        &[a, b, c, d, e],
    )?;
    if p.alpha() != 0.0 {
        let lo = critical_point_leading_order(p).map_err(runtime)?;
        results.insert("critical_force_leading_order_N".into(), val(lo.force));
    }
    if let Some(t) = threshold {
        let intrinsic = threshold_vs_mass(&t.masses, ThresholdMode::Intrinsic, t.chem_alpha, &t.geometry).map_err(runtime)?;
        let chemical = threshold_vs_mass(&t.masses, ThresholdMode::Chemical, t.chem_alpha, &t.geometry).map_err(runtime)?;
        let fi: Vec<f64> = intrinsic.points.iter().map(|p| p.1).collect();
        let fch: Vec<f64> = chemical.points.iter().map(|p| p.1).collect();
        write(
            out,
            "threshold_vs_mass.csv",
            "critical drive against total mass for the intrinsic and the chemical nonlinearity",
            &["mass_kg", "Fc_intrinsic_N", "Fc_chemical_N", "decades_below_intrinsic"],
            &[&t.masses, &fi, &fch, &intrinsic.decades_below_intrinsic],
        )?;
        results.insert("threshold_exponent_intrinsic".into(), val(GeometryScaling::scaling_exponent(ThresholdMode::Intrinsic)));
        results.insert("threshold_exponent_chemical".into(), val(GeometryScaling::scaling_exponent(ThresholdMode::Chemical)));
    }
    Ok(())
}

fn run_sr(exp: &SrExperiment, bins: usize, step: Option<f64>, out: &mut Outputs, results: &mut toml::Table) -> Result<(), CliError> {
    let o = exp.run().map_err(runtime)?;
    for (name, spec, what) in [
        ("spectrum_unmodulated.csv", &o.spec_unmod, "amplitude PSD without modulation"),
        ("spectrum_modulated.csv", &o.spec_mod, "amplitude PSD with the slow drive modulation"),
    ] {
        spec.write_csv(out.file(name, what)).map_err(runtime)?;
    }
    o.telegraph.write_csv(out.file("switches.csv", "switch times and new state of the unmodulated run")).map_err(runtime)?;
    let hist = amplitude_histogram(&o.unmodulated.channels[0], bins).map_err(runtime)?;
    hist.write_csv(out.file("histogram.csv", "amplitude histogram of the unmodulated run")).map_err(runtime)?;
    write_bsim(out.file("trace_unmodulated.bsim", "amplitude record without modulation"), &o.unmodulated).map_err(runtime)?;
    write_bsim(out.file("trace_modulated.bsim", "amplitude record with modulation"), &o.modulated).map_err(runtime)?;

    let put = |r: &mut toml::Table, k: &str, v: toml::Value| {
        r.insert(k.into(), v);
    };
    put(results, "drive_frequency_Hz", val(o.omega / (2.0 * PI)));
    put(results, "modulation_frequency_Hz", val(o.mod_omega / (2.0 * PI)));
    put(results, "modulation_depth_N", val(o.mod_depth));
    put(results, "low_plateau_m", val(o.plateaus.0));
    put(results, "high_plateau_m", val(o.plateaus.1));
    put(results, "threshold_low_m", val(o.thresholds.0));
    put(results, "threshold_high_m", val(o.thresholds.1));
    put(results, "switches", val(o.telegraph.n_switches as i64));
    put(results, "switching_rate_per_s", val(o.telegraph.gamma_k));
    put(results, "dwell_low_s", val(o.telegraph.dwell_low));
    put(results, "dwell_high_s", val(o.telegraph.dwell_high));
    put(results, "fraction_high", val(o.telegraph.fraction_high));
    put(results, "snr_bin_modulated", val(o.snr_bin));
    put(results, "snr_bin_unmodulated", val(o.snr_bin_unmod));
    put(results, "snr_reference_bandwidth", val(o.inversion.snr));
    put(results, "reference_bandwidth_Hz", val(o.inversion.inputs.reference_bandwidth()));
    put(results, "s_f_inferred_N2_per_Hz", val(o.inversion.s_total));
    put(results, "s_f_injected_N2_per_Hz", val(o.injected));
    put(results, "amplitude_ratio_inferred_over_injected", val(o.amplitude_ratio()));
    put(results, "power_ratio_inferred_over_injected", val(o.inversion.s_total / o.injected));
    put(results, "histogram_modes", val(hist.modes(0.05) as i64));
    for w in &o.warnings {
        push_warning(results, w);
    }

    if let Some(st) = step {
        let drive = DriveSpec::unmodulated(exp.force * (1.0 + st), o.omega);
        let run = exp.amplitude_run(&drive, exp.duration, 2).map_err(runtime)?;
        let stepped = two_state_clamped(&run, o.thresholds).map_err(runtime)?;
        let h2 = amplitude_histogram(&run.channels[0], bins).map_err(runtime)?;
        h2.write_csv(out.file("histogram_step.csv", "amplitude histogram of the unmodulated run at the stepped drive"))
            .map_err(runtime)?;
        let base = &o.telegraph;
        let n1 = effective_samples(base.duration, base.dwell_low, base.dwell_high).map_err(runtime)?;
        let n2 = effective_samples(stepped.duration, stepped.dwell_low, stepped.dwell_high).map_err(runtime)?;
        let test = two_proportion_test(base.fraction_high, n1, stepped.fraction_high, n2).map_err(runtime)?;
        put(results, "step_fraction_high", val(stepped.fraction_high));
        put(results, "step_effective_samples", val(n2));
        put(results, "base_effective_samples", val(n1));
        put(results, "step_z", val(test.z));
        put(results, "step_p_value", val(test.p_value));
    }
    Ok(())
}

fn run_budget(sources: &[NoiseSource], measured: Option<(f64, f64)>, out: &mut Outputs, results: &mut toml::Table) -> Result<(), CliError> {
    let b = combine(sources).map_err(runtime)?;
    b.write_csv(out.file("budget.csv", "noise sources with fractions and level against the thermal floor"))
        .map_err(runtime)?;
    results.insert("s_total_N2_per_Hz".into(), val(b.s_total));
    results.insert("amplitude_total_N_per_rtHz".into(), val(b.s_total.sqrt()));
    results.insert("s_nonthermal_N2_per_Hz".into(), val(b.s_para));
    if let Some(t) = b.t_para {
        results.insert("nonthermal_noise_temperature_K".into(), val(t));
    }
    if let Some((s_meas, tol)) = measured {
        let c = total_vs_measured(b.s_total, s_meas, tol).map_err(runtime)?;
        results.insert("measured_over_budget_amplitude".into(), val(c.ratio));
        results.insert("measured_over_budget_dB".into(), val(c.db));
        results.insert("measured_consistent".into(), val(c.pass));
    }
    Ok(())
}
