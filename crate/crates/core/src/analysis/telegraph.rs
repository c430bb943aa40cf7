use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// Schmitt-trigger view of a two-level signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelegraphResult {
    /// 0 for the low state, 1 for the high state, one entry per sample.
    #[serde(skip)]
    pub states: Vec<u8>,
    /// Switches per second over the whole record.
    pub gamma_k: f64,
    /// Mean residence time in each state, s. Time spent in the state divided
    /// by the number of exits from it, which is the maximum-likelihood
    /// estimate for exponential dwells with censored ends. A state that was
    /// entered but never left reports its total time; an unvisited state
    /// reports 0.
    pub dwell_low: f64,
    pub dwell_high: f64,
    pub n_switches: usize,
    pub duration: f64,
    pub fraction_high: f64,
    #[serde(skip)]
    pub switch_times: Vec<f64>,
}

impl TelegraphResult {
    /// Switch timestamps as CSV, columns `t_s, new_state`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let new_state: Vec<f64> = self
            .switch_times
            .iter()
            .enumerate()
            .map(|(i, _)| f64::from((self.states[0] as usize + i + 1) as u8 % 2))
            .collect();
        crate::csvio::write_columns(path, &["t_s", "new_state"], &[&self.switch_times, &new_state])
    }

    pub fn summary_toml(&self) -> String {
        toml::to_string(self).expect("summary fields are plain numbers")
    }
}

/// Default Schmitt thresholds at 40% and 60% of the way from the low to the
/// high plateau.
pub fn schmitt_thresholds(low_level: f64, high_level: f64) -> (f64, f64) {
    thresholds_at(low_level, high_level, (0.4, 0.6))
}

/// Thresholds at the given fractions of the way from the low to the high
/// plateau.
pub fn thresholds_at(low_level: f64, high_level: f64, (lo, hi): (f64, f64)) -> (f64, f64) {
    let span = high_level - low_level;
    (low_level + lo * span, low_level + hi * span)
}

/// Discretizes `series` (sample spacing `dt`) with hysteresis: the state
/// rises only on reaching `high` and falls only on reaching `low`. The first
/// sample picks the initial state by the midpoint.
pub fn two_state(series: &[f64], dt: f64, low: f64, high: f64) -> Result<TelegraphResult> {
    if !(low < high) {
        return Err(Error::arg("low threshold must be below the high threshold"));
    }
    if series.is_empty() || !(dt > 0.0) {
        return Err(Error::arg("need a non-empty series and positive dt"));
    }
    let (min, max) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if low < min || high > max {
        return Err(Error::arg(format!(
            "thresholds [{low:e}, {high:e}] lie outside the data range [{min:e}, {max:e}]"
        )));
    }
    let mut state = u8::from(series[0] >= 0.5 * (low + high));
    let mut states = Vec::with_capacity(series.len());
    let mut switch_times = Vec::new();
    let mut exits = [0usize; 2];
    let mut occupancy = [0usize; 2];
    for (i, &x) in series.iter().enumerate() {
        let next = match state {
            0 if x >= high => 1,
            1 if x <= low => 0,
            s => s,
        };
        if next != state {
            exits[state as usize] += 1;
            switch_times.push(i as f64 * dt);
            state = next;
        }
        occupancy[state as usize] += 1;
        states.push(state);
    }
    let duration = series.len() as f64 * dt;
    let dwell = |s: usize| {
        let t = occupancy[s] as f64 * dt;
        if exits[s] > 0 {
            t / exits[s] as f64
        } else {
            t
        }
    };
    Ok(TelegraphResult {
        n_switches: switch_times.len(),
        gamma_k: switch_times.len() as f64 / duration,
        dwell_low: dwell(0),
        dwell_high: dwell(1),
        duration,
        fraction_high: occupancy[1] as f64 / series.len() as f64,
        states,
        switch_times,
    })
}
