//! Damped least-squares fit of `A/r^a + B/r^b` to sampled energies.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::{PotentialModel, PowerLawTerm};
use crate::{Error, Result};

const MAX_ITER: usize = 500;
const STEP_TOL: f64 = 1e-12;
const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: PotentialModel,
    /// Euclidean norm of the energy residuals, J.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Fits a two-term power law to `(x, U)` samples.
///
/// `init` supplies the starting coefficients and exponents (two terms) and
/// the coordinate shift, which is kept fixed. The returned model is valid on
/// the sampled range.
pub fn fit_two_power(samples: &[(f64, f64)], init: &PotentialModel) -> Result<FitReport> {
    if samples.len() < 8 {
        return Err(Error::arg(format!("need at least 8 samples, got {}", samples.len())));
    }
    if init.terms().len() != 2 {
        return Err(Error::arg("initial model must have exactly two terms"));
    }
    let shift = init.shift();
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::arg("sample positions must be strictly increasing"));
    }
    if samples.iter().any(|&(x, u)| !(x + shift > 0.0) || !u.is_finite()) {
        return Err(Error::arg("sample distances must be positive and energies finite"));
    }
    let u_scale = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let first = samples[0].1;
    if u_scale == 0.0 || samples.iter().all(|s| s.1 == first) {
        return Err(Error::Fit {
            message: "degenerate samples: energy is constant".into(),
            best: Vec::new(),
            residual_norm: f64::NAN,
        });
    }

    let r_first = samples[0].0 + shift;
    let r_last = samples[samples.len() - 1].0 + shift;
    let r_scale = (r_first * r_last).sqrt();
    let s: Vec<f64> = samples.iter().map(|&(x, _)| (x + shift) / r_scale).collect();
    let u: Vec<f64> = samples.iter().map(|&(_, e)| e / u_scale).collect();

    let [t1, t2] = [init.terms()[0], init.terms()[1]];
    if !(t1.exponent > 0.0 && t2.exponent > 0.0) || t1.exponent == t2.exponent {
        return Err(Error::arg("initial exponents must be positive and distinct"));
    }

    // Coefficients enter linearly, so they are projected out and the search
    // runs over the two exponents only.
    let project = |p: &Vector2<f64>| -> Option<(Vector2<f64>, DVector<f64>)> {
        let basis = DMatrix::from_fn(s.len(), 2, |i, j| s[i].powf(-p[j]));
        let rhs = DVector::from_column_slice(&u);
        let coeffs = basis.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
        let res = &basis * &coeffs - rhs;
        res.iter().all(|v| v.is_finite()).then(|| (Vector2::new(coeffs[0], coeffs[1]), res))
    };

    let mut p = Vector2::new(t1.exponent, t2.exponent);
    let Some((_, mut res)) = project(&p) else {
        return Err(Error::arg("initial exponents give a singular basis"));
    };
    let mut current = res.norm_squared();
    let mut damping = 1e-3;
    let mut converged = current == 0.0;
    let mut iterations = 0;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(s.len(), 2);
        for j in 0..2 {
            let h = 1e-6 * p[j].abs().max(1.0);
            let (mut hi, mut lo) = (p, p);
            hi[j] += h;
            lo[j] -= h;
            let (Some((_, rh)), Some((_, rl))) = (project(&hi), project(&lo)) else {
                break;
            };
            jac.set_column(j, &((rh - rl) / (2.0 * h)));
        }
        let jtj: Matrix2<f64> = (jac.transpose() * &jac).fixed_view::<2, 2>(0, 0).into();
        let grad: Vector2<f64> = (jac.transpose() * &res).fixed_rows::<2>(0).into();
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut lhs = jtj;
            for i in 0..2 {
                lhs[(i, i)] += damping * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = lhs.lu().solve(&(-grad)) else {
                damping *= 4.0;
                continue;
            };
            let trial = p + step;
            let admissible = trial[0] > 0.0 && trial[1] > 0.0 && (trial[0] - trial[1]).abs() > 1e-9;
            if let Some((_, trial_res)) = admissible.then(|| project(&trial)).flatten() {
                let trial_cost = trial_res.norm_squared();
                if trial_cost <= current {
                    let rel = (step[0] / p[0]).abs().max((step[1] / p[1]).abs());
                    p = trial;
                    res = trial_res;
                    current = trial_cost;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    converged = rel < STEP_TOL || current == 0.0;
                    break;
                }
            }
            damping *= 4.0;
        }
        if !accepted {
            // no descent direction left at working precision: stationary point
            converged = true;
        }
    }

    let (coeffs, _) = project(&p).ok_or_else(|| Error::arg("singular basis at the solution"))?;
    let coeff_a = coeffs[0] * u_scale * r_scale.powf(p[0]);
    let coeff_b = coeffs[1] * u_scale * r_scale.powf(p[1]);
    let residual_norm = current.sqrt() * u_scale;
    if !converged {
        return Err(Error::Fit {
            message: format!("no convergence after {MAX_ITER} iterations"),
            best: vec![coeff_a, p[0], coeff_b, p[1]],
            residual_norm,
        });
    }
    let theta = [coeff_a, p[0], coeff_b, p[1]];
    let terms = vec![PowerLawTerm::new(theta[0], theta[1])?, PowerLawTerm::new(theta[2], theta[3])?];
    let model = PotentialModel::new(terms, shift, samples[0].0, samples[samples.len() - 1].0)?;
    Ok(FitReport { model, residual_norm, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    // both terms are comparable around x = 2 cm
    const A: f64 = 2e-28; // J m^6
    const B: f64 = -1e-19; // J m

    fn truth() -> PotentialModel {
        PotentialModel::unshifted(
            vec![PowerLawTerm::new(A, 6.0).unwrap(), PowerLawTerm::new(B, 1.0).unwrap()],
            1e-3,
            1.0,
        )
        .unwrap()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.008 + 0.042 * i as f64 / (n - 1) as f64).collect()
    }

    fn perturbed_init() -> PotentialModel {
        PotentialModel::unshifted(
            vec![PowerLawTerm::new(A * 1.5, 5.5).unwrap(), PowerLawTerm::new(B * 0.7, 1.2).unwrap()],
            1e-3,
            1.0,
        )
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let m = truth();
        let samples: Vec<_> = grid(50).into_iter().map(|x| (x, m.eval(x, 0).unwrap())).collect();
        let fit = fit_two_power(&samples, &perturbed_init()).unwrap();
        let t = fit.model.terms();
        assert!(rel(t[0].coefficient, A) < 1e-6, "{:?}", t);
        assert!(rel(t[0].exponent, 6.0) < 1e-6);
        assert!(rel(t[1].coefficient, B) < 1e-6);
        assert!(rel(t[1].exponent, 1.0) < 1e-6);

        // refitting the fitted model is a fixed point
        let again = fit_two_power(&samples, &fit.model).unwrap();
        for (p, q) in t.iter().zip(again.model.terms()) {
            assert!(rel(q.coefficient, p.coefficient) < 1e-10);
            assert!(rel(q.exponent, p.exponent) < 1e-10);
        }
        assert_eq!(fit.model.window(), (0.008, 0.05));
    }

    #[test]
    fn residual_tracks_noise_floor() {
        let m = truth();
        let xs = grid(50);
        let sigma = 1e-4;
        let mut ratio_sum = 0.0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<_> = xs
                .iter()
                .map(|&x| {
                    let u = m.eval(x, 0).unwrap();
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (x, u * (1.0 + sigma * z))
                })
                .collect();
            let noise_norm = xs
                .iter()
                .zip(&samples)
                .map(|(&x, s)| (s.1 - m.eval(x, 0).unwrap()).powi(2))
                .sum::<f64>()
                .sqrt();
            let fit = fit_two_power(&samples, &perturbed_init()).unwrap();
            // least squares can never do worse than the true parameters
            assert!(fit.residual_norm <= noise_norm * (1.0 + 1e-9));
            ratio_sum += fit.residual_norm.powi(2);
        }
        // linearized expectation: sum_i (1 - H_ii) sigma_i^2 with H the hat
        // matrix of the model Jacobian at the true parameters
        let jac = DMatrix::from_fn(xs.len(), 4, |i, j| {
            let x = xs[i];
            match j {
                0 => x.powf(-6.0),
                1 => -A * x.powf(-6.0) * x.ln(),
                2 => x.powf(-1.0),
                _ => -B * x.powf(-1.0) * x.ln(),
            }
        });
        let norms: Vec<f64> = (0..4).map(|j| jac.column(j).norm()).collect();
        let jac = DMatrix::from_fn(xs.len(), 4, |i, j| jac[(i, j)] / norms[j]);
        let q = jac.svd(true, false).u.unwrap();
        let expected: f64 = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let h = q.row(i).norm_squared();
                (1.0 - h) * (sigma * m.eval(x, 0).unwrap()).powi(2)
            })
            .sum();
        let mean = ratio_sum / 100.0;
        assert!((mean / expected - 1.0).abs() < 0.2, "mean {mean:e} expected {expected:e}");
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let samples: Vec<_> = grid(20).into_iter().map(|x| (x, -1e-19)).collect();
        assert!(matches!(fit_two_power(&samples, &perturbed_init()), Err(Error::Fit { .. })));
    }

    #[test]
    fn preconditions() {
        let samples: Vec<_> = grid(5).into_iter().map(|x| (x, x)).collect();
        assert!(matches!(fit_two_power(&samples, &perturbed_init()), Err(Error::Argument(_))));
        let mut samples: Vec<_> = grid(10).into_iter().map(|x| (x, x)).collect();
        samples.swap(2, 3);
        assert!(matches!(fit_two_power(&samples, &perturbed_init()), Err(Error::Argument(_))));
    }

    #[test]
    fn morse_fit_keeps_inflection() {
        // Morse curve D (1 - e^{-k (r - re)})^2 - D
        let (d, k, re) = (1.0e-19, 1.6e10, 2.6e-10);
        let morse = |r: f64| d * (1.0 - (-k * (r - re)).exp()).powi(2) - d;
        let xs: Vec<f64> = (0..120).map(|i| 2.3e-10 + 7.7e-10 * i as f64 / 119.0).collect();
        let samples: Vec<_> = xs.iter().map(|&r| (r, morse(r))).collect();
        let init = PotentialModel::unshifted(
            vec![
                PowerLawTerm::new(d * re.powi(8), 8.0).unwrap(),
                PowerLawTerm::new(-2.0 * d * re.powi(4), 4.0).unwrap(),
            ],
            1e-10,
            2e-9,
        )
        .unwrap();
        let fit = fit_two_power(&samples, &init).unwrap();
        // force extremum of the Morse curve: e^{-k(r-re)} = 1/2
        let r_star = re + 2f64.ln() / k;
        let h = 1e-13;
        let fd = (morse(r_star + h) - 2.0 * morse(r_star) + morse(r_star - h)) / (h * h);
        let curvature_scale = 2.0 * d * k * k;
        assert!(fd.abs() < 1e-3 * curvature_scale);
        let fitted = fit.model.eval(r_star, 2).unwrap();
        assert!((fitted - fd).abs() < 0.15 * curvature_scale, "fitted U'' {fitted:e} scale {curvature_scale:e}");
    }
}
