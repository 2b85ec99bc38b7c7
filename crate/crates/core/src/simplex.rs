//! Downhill-simplex (Nelder-Mead) minimization over low-dimensional
//! parameter spaces, written for noisy black-box objectives such as measured
//! optical powers, plus a least-squares curve fitter built on top of it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weight applied per unit of box-constraint violation. Large compared to
/// every objective this crate minimizes (all order-one or smaller).
const PENALTY_WEIGHT: f64 = 1e6;

/// Coefficients and stopping rules for one minimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub reflect: f64,
    pub expand: f64,
    pub contract: f64,
    pub shrink: f64,
    /// Edge length of the initial simplex, added to `x0` one axis at a time.
    pub initial_scale: f64,
    /// Per-axis overrides of `initial_scale` (useful when parameters differ
    /// in magnitude, as in curve fitting).
    pub initial_scales: Option<Vec<f64>>,
    /// Relative spread of simplex values below which the run converges.
    pub f_tol: f64,
    /// Simplex diameter (per axis) below which the run converges.
    pub x_tol: f64,
    /// Total objective-evaluation budget.
    pub max_evals: usize,
    /// Inclusive box constraints per axis; candidates outside are evaluated
    /// at the clamped point with a penalty proportional to the violation.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Record the best vertex after every iteration.
    pub record_trace: bool,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            reflect: 1.0,
            expand: 2.0,
            contract: 0.5,
            shrink: 0.5,
            initial_scale: 0.2,
            initial_scales: None,
            f_tol: 1e-6,
            x_tol: 1e-4,
            max_evals: 500,
            bounds: None,
            record_trace: false,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self, dimension: usize) -> Result<(), SimplexError> {
        let ok = self.reflect > 0.0
            && self.expand > 1.0
            && self.contract > 0.0
            && self.contract < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0;
        if !ok {
            return Err(SimplexError::BadConfig(
                "need reflect > 0, expand > 1, contract and shrink in (0, 1)".into(),
            ));
        }
        if self.max_evals < dimension + 1 {
            return Err(SimplexError::BadConfig(format!(
                "max_evals {} cannot even evaluate the initial simplex ({} vertices)",
                self.max_evals,
                dimension + 1
            )));
        }
        if let Some(scales) = &self.initial_scales {
            if scales.len() != dimension {
                return Err(SimplexError::BadConfig("initial_scales length mismatch".into()));
            }
        }
        if let Some(bounds) = &self.bounds {
            if bounds.len() != dimension {
                return Err(SimplexError::BadConfig("bounds length mismatch".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("invalid simplex configuration: {0}")]
    BadConfig(String),
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("curve fit needs at least as many points as parameters ({points} < {params})")]
    TooFewPoints { points: usize, params: usize },
    #[error("xs and ys lengths differ ({xs} vs {ys})")]
    LengthMismatch { xs: usize, ys: usize },
}

/// Best point of one simplex iteration, for convergence plots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub f: f64,
}

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub n_evals: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub trace: Option<Vec<TracePoint>>,
}

struct Evaluator<'a, F> {
    objective: F,
    bounds: Option<&'a [(f64, f64)]>,
    n_evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.n_evals += 1;
        let f = match self.bounds {
            None => (self.objective)(x),
            Some(bounds) => {
                let mut violation = 0.0;
                let clamped: Vec<f64> = x
                    .iter()
                    .zip(bounds)
                    .map(|(&xi, &(lo, hi))| {
                        let c = xi.clamp(lo, hi);
                        violation += (xi - c).abs();
                        c
                    })
                    .collect();
                (self.objective)(&clamped) + PENALTY_WEIGHT * violation
            }
        };
        // Treat bad regions as arbitrarily poor rather than poisoning the
        // vertex ordering with NaNs.
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    }
}

/// Nelder-Mead minimization of `objective` starting from `x0`.
///
/// The run is deterministic for a deterministic objective; stateful (noisy)
/// objectives are supported through `FnMut`. Stops when the relative spread
/// of the simplex values falls under `f_tol`, the simplex diameter falls
/// under `x_tol`, or the evaluation budget runs out (`converged` is false
/// only in the last case).
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    objective: F,
    x0: &[f64],
    config: &SimplexConfig,
) -> Result<OptResult, SimplexError> {
    let n = x0.len();
    assert!(n >= 1, "dimension must be at least 1");
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimplexError::NonFiniteStart);
    }
    config.validate(n)?;

    let mut ev = Evaluator { objective, bounds: config.bounds.as_deref(), n_evals: 0 };

    let f0 = ev.eval(x0);
    if !f0.is_finite() {
        return Err(SimplexError::NonFiniteStart);
    }

    let scale_of = |axis: usize| -> f64 {
        config.initial_scales.as_ref().map_or(config.initial_scale, |s| s[axis])
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for axis in 0..n {
        let mut vertex = x0.to_vec();
        vertex[axis] += scale_of(axis);
        let f = ev.eval(&vertex);
        simplex.push(vertex);
        values.push(f);
    }

    let mut trace: Option<Vec<TracePoint>> = config.record_trace.then(Vec::new);
    let mut n_iterations = 0;
    let mut converged = false;

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let second_worst = order[n - 1];
        let worst = order[n];

        if let Some(t) = trace.as_mut() {
            t.push(TracePoint {
                iteration: n_iterations,
                x: simplex[best].clone(),
                f: values[best],
            });
        }

        let spread = values[worst] - values[best];
        let rel = 2.0 * spread.abs() / (values[worst].abs() + values[best].abs() + 1e-300);
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if rel < config.f_tol || diameter < config.x_tol {
            converged = true;
            break;
        }
        if ev.n_evals >= config.max_evals {
            break;
        }

        n_iterations += 1;

        // Centroid of all vertices but the worst.
        let mut centroid = vec![0.0; n];
        for (i, vertex) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, &x) in centroid.iter_mut().zip(vertex) {
                *c += x / n as f64;
            }
        }

        let blend = |a: &[f64], b: &[f64], coeff: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(&ai, &bi)| ai + coeff * (ai - bi)).collect()
        };

        let reflected = blend(&centroid, &simplex[worst], config.reflect);
        let f_reflected = ev.eval(&reflected);

        if f_reflected < values[best] {
            // Promising direction: try stretching further.
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&reflected)
                .map(|(&c, &r)| c + config.expand * (r - c))
                .collect();
            let f_expanded =
                if ev.n_evals < config.max_evals { ev.eval(&expanded) } else { f64::INFINITY };
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            // Contract: outside toward the reflected point if it improved on
            // the worst vertex, inside otherwise.
            let (anchor, f_anchor) = if f_reflected < values[worst] {
                (&reflected, f_reflected)
            } else {
                (&simplex[worst], values[worst])
            };
            let contracted: Vec<f64> = centroid
                .iter()
                .zip(anchor)
                .map(|(&c, &a)| c + config.contract * (a - c))
                .collect();
            let f_contracted =
                if ev.n_evals < config.max_evals { ev.eval(&contracted) } else { f64::INFINITY };
            if f_contracted < f_anchor {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink everything toward the best vertex.
                let best_vertex = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    if ev.n_evals >= config.max_evals {
                        break;
                    }
                    let shrunk: Vec<f64> = best_vertex
                        .iter()
                        .zip(&simplex[i])
                        .map(|(&b, &v)| b + config.shrink * (v - b))
                        .collect();
                    values[i] = ev.eval(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Ok(OptResult {
        x_best: simplex[best].clone(),
        f_best: values[best],
        n_evals: ev.n_evals,
        n_iterations,
        converged,
        trace,
    })
}

/// Least-squares fit of a parametric model `f(params, x)` to `(xs, ys)` by
/// simplex minimization of the summed squared residuals. Runs a short chain
/// of restarts with shrinking simplices so exact-data fits recover the
/// parameters to high precision.
pub fn fit_curve<M: Fn(&[f64], f64) -> f64>(
    model: M,
    params0: &[f64],
    xs: &[f64],
    ys: &[f64],
) -> Result<OptResult, SimplexError> {
    if xs.len() != ys.len() {
        return Err(SimplexError::LengthMismatch { xs: xs.len(), ys: ys.len() });
    }
    if xs.len() < params0.len() {
        return Err(SimplexError::TooFewPoints { points: xs.len(), params: params0.len() });
    }

    let objective = |params: &[f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = model(params, x) - y;
                r * r
            })
            .sum()
    };

    let mut current = params0.to_vec();
    let mut total_evals = 0;
    let mut total_iters = 0;
    let mut best: Option<OptResult> = None;
    let mut scale_factor = 1.0;
    for _round in 0..6 {
        let scales: Vec<f64> = current
            .iter()
            .map(|p| (0.1 * p.abs()).max(1e-4) * scale_factor)
            .collect();
        let config = SimplexConfig {
            initial_scales: Some(scales),
            f_tol: 1e-14,
            x_tol: 1e-12,
            max_evals: 2000,
            ..SimplexConfig::default()
        };
        let result = minimize(&objective, &current, &config)?;
        total_evals += result.n_evals;
        total_iters += result.n_iterations;
        let improved = best.as_ref().map_or(true, |b| result.f_best < b.f_best);
        let f_prev = best.as_ref().map_or(f64::INFINITY, |b| b.f_best);
        if improved {
            current = result.x_best.clone();
            best = Some(result);
        }
        let f_now = best.as_ref().unwrap().f_best;
        // Converged restart chain: no meaningful progress left.
        if f_now == 0.0 || (f_prev.is_finite() && f_prev - f_now <= 1e-14 * f_now.abs().max(1e-30))
        {
            break;
        }
        scale_factor *= 0.1;
    }
    let mut result = best.expect("at least one restart ran");
    result.n_evals = total_evals;
    result.n_iterations = total_iters;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_bowl_converges() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2);
        let result = minimize(f, &[0.0, 0.0], &SimplexConfig::default()).unwrap();
        assert!(result.converged);
        assert!((result.x_best[0] - 1.0).abs() < 1e-4);
        assert!((result.x_best[1] + 2.0).abs() < 1e-4);
    }

    #[test]
    fn quadratic_bowl_tight_tolerance() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2);
        let config = SimplexConfig {
            f_tol: 1e-16,
            x_tol: 1e-9,
            max_evals: 2000,
            ..SimplexConfig::default()
        };
        let result = minimize(f, &[0.0, 0.0], &config).unwrap();
        assert!(result.converged);
        assert!((result.x_best[0] - 1.0).abs() < 1e-6);
        assert!((result.x_best[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_converges_within_default_budget() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let config = SimplexConfig { f_tol: 1e-12, x_tol: 1e-8, ..SimplexConfig::default() };
        let result = minimize(f, &[-1.2, 1.0], &config).unwrap();
        assert!(result.n_evals <= 500);
        assert!(
            (result.x_best[0] - 1.0).abs() < 1e-4 && (result.x_best[1] - 1.0).abs() < 1e-4,
            "got {:?}",
            result.x_best
        );
    }

    #[test]
    fn non_finite_start_fails_fast() {
        let f = |_x: &[f64]| f64::NAN;
        assert!(matches!(
            minimize(f, &[0.0], &SimplexConfig::default()),
            Err(SimplexError::NonFiniteStart)
        ));
        let g = |x: &[f64]| x[0];
        assert!(matches!(
            minimize(g, &[f64::NAN], &SimplexConfig::default()),
            Err(SimplexError::NonFiniteStart)
        ));
    }

    #[test]
    fn budget_is_respected() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let config = SimplexConfig {
            max_evals: 40,
            f_tol: 0.0,
            x_tol: 0.0,
            ..SimplexConfig::default()
        };
        let result = minimize(f, &[5.0, 5.0, 5.0], &config).unwrap();
        assert!(!result.converged);
        assert!(result.n_evals <= 40);
    }

    #[test]
    fn bounds_keep_minimizer_in_box() {
        // Unconstrained minimum at (-1, -1); box forces (0, 0).
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] + 1.0).powi(2);
        let config = SimplexConfig {
            bounds: Some(vec![(0.0, 5.0); 2]),
            max_evals: 1000,
            ..SimplexConfig::default()
        };
        let result = minimize(f, &[2.0, 2.0], &config).unwrap();
        assert!(result.x_best.iter().all(|&v| v >= -1e-9));
        assert!(result.x_best.iter().all(|&v| v < 0.05), "got {:?}", result.x_best);
    }

    #[test]
    fn best_value_non_increasing_along_trace() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let config = SimplexConfig { record_trace: true, ..SimplexConfig::default() };
        let result = minimize(f, &[-1.2, 1.0], &config).unwrap();
        let trace = result.trace.unwrap();
        for pair in trace.windows(2) {
            assert!(pair[1].f <= pair[0].f);
        }
    }

    #[test]
    fn fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..5).map(|i| 29.0 + 0.5 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| -0.06090 * x + 5.568).collect();
        let line = |p: &[f64], x: f64| p[0] * x + p[1];
        let fit = fit_curve(line, &[0.0, 1.0], &xs, &ys).unwrap();
        assert_relative_eq!(fit.x_best[0], -0.06090, epsilon = 1e-8);
        assert_relative_eq!(fit.x_best[1], 5.568, epsilon = 1e-8);
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let xs: Vec<f64> = (0..14).map(|i| 0.5 * i as f64).collect();
        let truth = [-0.0007192, -0.0003439, 3.746];
        let ys: Vec<f64> = xs.iter().map(|&x| truth[0] * x * x + truth[1] * x + truth[2]).collect();
        let quad = |p: &[f64], x: f64| p[0] * x * x + p[1] * x + p[2];
        let fit = fit_curve(quad, &[0.0, 0.0, 3.0], &xs, &ys).unwrap();
        for (got, want) in fit.x_best.iter().zip(&truth) {
            assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
        }
    }

    #[test]
    fn fit_constant_data_is_exact() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [4.25, 4.25, 4.25];
        let constant = |p: &[f64], _x: f64| p[0];
        let fit = fit_curve(constant, &[4.25], &xs, &ys).unwrap();
        assert_eq!(fit.f_best, 0.0);
        assert_eq!(fit.x_best[0], 4.25);
    }

    #[test]
    fn fit_rejects_underdetermined_input() {
        let line = |p: &[f64], x: f64| p[0] * x + p[1];
        assert!(matches!(
            fit_curve(line, &[0.0, 0.0], &[1.0], &[2.0]),
            Err(SimplexError::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_curve(line, &[0.0, 0.0], &[1.0, 2.0], &[2.0]),
            Err(SimplexError::LengthMismatch { .. })
        ));
    }
}
