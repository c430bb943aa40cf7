//! Power-law interaction potentials.
//!
//! A [`PotentialModel`] is a sum of power-law terms `c / r^p` evaluated in a
//! shifted coordinate `r = x + shift`, where `x` is the bond elongation
//! measured from the potential minimum. All derivatives are analytic.

mod fit;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use fit::{fit_two_power, FitReport};

/// One term `coefficient / r^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLawTerm {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::arg(format!("exponent must be positive, got {exponent}")));
        }
        if !coefficient.is_finite() || coefficient == 0.0 {
            return Err(Error::arg(format!(
                "coefficient must be finite and nonzero, got {coefficient}"
            )));
        }
        Ok(Self { coefficient, exponent })
    }

    /// `d^order/dr^order (c r^-p)`.
    pub fn derivative(&self, r: f64, order: u32) -> f64 {
        let p = self.exponent;
        let falling: f64 = (0..order).map(|j| -p - j as f64).product();
        self.coefficient * falling * r.powf(-p - order as f64)
    }
}

/// Parametric interaction potential with a validity window.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    terms: Vec<PowerLawTerm>,
    shift: f64,
    x_min: f64,
    x_max: f64,
}

impl PotentialModel {
    /// Builds a model; `x_min < x_max` and `x + shift > 0` across the window.
    ///
    /// An empty term list is allowed and yields the zero potential, which is
    /// handy for bare-spring checks.
    pub fn new(terms: Vec<PowerLawTerm>, shift: f64, x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::arg(format!("empty validity window [{x_min}, {x_max}]")));
        }
        if !shift.is_finite() || x_min + shift <= 0.0 {
            return Err(Error::arg(format!(
                "window lower edge maps to non-positive distance (x_min + shift = {})",
                x_min + shift
            )));
        }
        Ok(Self { terms, shift, x_min, x_max })
    }

    /// Unshifted model valid on `[x_min, x_max]` with `0 < x_min`.
    pub fn unshifted(terms: Vec<PowerLawTerm>, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(terms, 0.0, x_min, x_max)
    }

    /// Stand-in for a gold atomic contact.
    ///
    /// Mie-type form `D/(a-b) [b (r0/r)^a - a (r0/r)^b]` with `a = 8`, `b = 4`
    /// and `r0 = 0.2681 nm`, so the minimum sits at `x = 0`. The well depth is
    /// fixed so that `U''''/6 = 2e22 N/m^3` at the inflection point
    /// (maximum attraction). With shape constant 0.83 the attractive tail
    /// then reaches a mode Duffing constant of about `-2e18 N/m^3` where the
    /// stiffness shift is 3% of a 10 N/m beam. This is a calibrated
    /// stand-in, not electronic-structure data.
    pub fn gold_contact() -> Self {
        const A: f64 = 8.0;
        const B: f64 = 4.0;
        const R0: f64 = 2.681e-10;
        const ALPHA_AT_INFLECTION: f64 = 2e22;
        let r_star = R0 * ((A + 1.0) / (B + 1.0)).powf(1.0 / (A - B));
        let s = R0 / r_star;
        // U''''(r*) = D a b (b+1) s^b [(a+2)(a+3) - (b+2)(b+3)] / ((a-b) r*^4)
        let per_depth = A * B * (B + 1.0) * s.powf(B)
            * ((A + 2.0) * (A + 3.0) - (B + 2.0) * (B + 3.0))
            / ((A - B) * r_star.powi(4));
        let depth = 6.0 * ALPHA_AT_INFLECTION / per_depth;
        let terms = vec![
            PowerLawTerm { coefficient: depth * B * R0.powf(A) / (A - B), exponent: A },
            PowerLawTerm { coefficient: -depth * A * R0.powf(B) / (A - B), exponent: B },
        ];
        Self::new(terms, R0, -0.15 * R0, 4.0e-9 - R0).expect("static model is valid")
    }

    /// Returns a copy with an additional term, e.g. a long-range van der
    /// Waals tail `-C / r^p`.
    pub fn with_term(mut self, term: PowerLawTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn terms(&self) -> &[PowerLawTerm] {
        &self.terms
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn window(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| PowerLawTerm { coefficient: t.coefficient * factor, exponent: t.exponent })
            .collect();
        Self { terms, ..self.clone() }
    }

    /// `d^order U / dx^order` at `x`, exact.
    pub fn eval(&self, x: f64, order: u32) -> Result<f64> {
        if order > 4 {
            return Err(Error::arg(format!("derivative order must be 0..=4, got {order}")));
        }
        if !self.contains(x) {
            return Err(Error::domain(format!(
                "x = {x:e} m outside validity window [{:e}, {:e}]",
                self.x_min, self.x_max
            )));
        }
        Ok(self.eval_unchecked(x, order))
    }

    pub(crate) fn eval_unchecked(&self, x: f64, order: u32) -> f64 {
        let r = x + self.shift;
        self.terms.iter().map(|t| t.derivative(r, order)).sum()
    }

    /// Location of maximum attraction: the root of `U''` inside the window.
    ///
    /// Scans outward from the inner edge for the first sign change of `U''`
    /// and bisects it to a relative tolerance of 1e-12.
    pub fn max_attraction_point(&self) -> Result<f64> {
        const SCAN: usize = 4096;
        let (lo, hi) = (self.x_min, self.x_max);
        let at = |i: usize| lo + (hi - lo) * i as f64 / SCAN as f64;
        let mut prev_x = lo;
        let mut prev = self.eval_unchecked(lo, 2);
        for i in 1..=SCAN {
            let x = at(i);
            let cur = self.eval_unchecked(x, 2);
            if prev == 0.0 {
                return Ok(prev_x);
            }
            if prev.signum() != cur.signum() {
                return Ok(self.bisect_curvature(prev_x, x));
            }
            prev_x = x;
            prev = cur;
        }
        Err(Error::NotFound("U'' does not change sign inside the validity window".into()))
    }

    fn bisect_curvature(&self, mut a: f64, mut b: f64) -> f64 {
        let mut fa = self.eval_unchecked(a, 2);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            // relative to the distance coordinate, which is positive in the window
            if (b - a).abs() <= 1e-12 * (m + self.shift) {
                break;
            }
            let fm = self.eval_unchecked(m, 2);
            if fm == 0.0 {
                return m;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    pub fn to_toml(&self) -> String {
        let doc = ModelDoc {
            shift: Some(self.shift),
            window: WindowDoc { min: self.x_min, max: self.x_max },
            terms: self
                .terms
                .iter()
                .map(|t| TermDoc { coefficient: t.coefficient, exponent: t.exponent })
                .collect(),
        };
        toml::to_string(&doc).expect("model document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ModelDoc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Structured-text form of a potential model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    pub window: WindowDoc,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowDoc {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub coefficient: f64,
    pub exponent: f64,
}

impl ModelDoc {
    pub fn into_model(self) -> Result<PotentialModel> {
        let terms = self
            .terms
            .into_iter()
            .map(|t| PowerLawTerm::new(t.coefficient, t.exponent))
            .collect::<Result<Vec<_>>>()?;
        PotentialModel::new(terms, self.shift.unwrap_or(0.0), self.window.min, self.window.max)
    }
}
