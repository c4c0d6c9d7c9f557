//! Derivative-free simplex (Nelder-Mead) minimizer with box bounds.
//!
//! Bounds are enforced by coordinate reflection: a trial point outside the box
//! is folded back across the violated bound before evaluation.

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iters: usize,
    /// Convergence when the simplex diameter falls below this (in parameter
    /// units) and the spread of function values is tiny.
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial step per coordinate when building the simplex.
    pub init_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iters: 2000,
            x_tol: 1e-5,
            f_tol: 1e-8,
            init_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
}

fn fold_into_bounds(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        let (lo, hi) = (lower[i], upper[i]);
        let width = hi - lo;
        // a couple of reflections is always enough for NM-sized steps
        for _ in 0..16 {
            if x[i] < lo {
                x[i] = lo + (lo - x[i]);
            } else if x[i] > hi {
                x[i] = hi - (x[i] - hi);
            } else {
                break;
            }
        }
        if x[i] < lo || x[i] > hi {
            x[i] = lo + 0.5 * width;
        }
    }
}

/// Minimize `f` over the box `[lower, upper]` starting from `x0`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Result<SimplexOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    assert!(n >= 1);
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);

    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| -> Result<f64> {
        fold_into_bounds(x, lower, upper);
        *evals += 1;
        f(x)
    };

    // Build initial simplex.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut p0 = x0.to_vec();
    let f0 = eval(&mut p0, &mut evals)?;
    simplex.push((p0, f0));
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = opts.init_step.max(1e-8 * (upper[i] - lower[i]));
        p[i] += step;
        let fp = eval(&mut p, &mut evals)?;
        simplex.push((p, fp));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iters {
        iter += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));

        let diameter = (0..n)
            .map(|i| {
                let lo = simplex.iter().map(|(p, _)| p[i]).fold(f64::INFINITY, f64::min);
                let hi = simplex
                    .iter()
                    .map(|(p, _)| p[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0f64, f64::max);
        let f_spread = simplex[n].1 - simplex[0].1;
        if diameter < opts.x_tol && f_spread.abs() < opts.f_tol.max(1e-12 * simplex[0].1.abs()) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();

        let mut reflected: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - worst.0[i]))
            .collect();
        let f_r = eval(&mut reflected, &mut evals)?;

        if f_r < simplex[0].1 {
            let mut expanded: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflected[i] - centroid[i]))
                .collect();
            let f_e = eval(&mut expanded, &mut evals)?;
            simplex[n] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < simplex[n - 1].1 {
            simplex[n] = (reflected, f_r);
        } else {
            let mut contracted: Vec<f64> = (0..n)
                .map(|i| centroid[i] + rho * (worst.0[i] - centroid[i]))
                .collect();
            let f_c = eval(&mut contracted, &mut evals)?;
            if f_c < worst.1 {
                simplex[n] = (contracted, f_c);
            } else {
                // shrink toward the best point
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = (0..n)
                        .map(|i| best[i] + sigma * (v.0[i] - best[i]))
                        .collect();
                    let fp = eval(&mut p, &mut evals)?;
                    *v = (p, fp);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SimplexOutcome {
        x: simplex[0].0.clone(),
        f: simplex[0].1,
        iterations: iter,
        converged,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let out = nelder_mead(
            |x| Ok((x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2)),
            &[0.0, 0.0],
            &[-10.0, -10.0],
            &[10.0, 10.0],
            &SimplexOptions::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 2.0).abs() < 1e-4);
        assert!((out.x[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds() {
        // Unconstrained minimum at x = -5, box forces x >= 1.
        let out = nelder_mead(
            |x| Ok((x[0] + 5.0).powi(2)),
            &[3.0],
            &[1.0],
            &[10.0],
            &SimplexOptions::default(),
        )
        .unwrap();
        assert!(out.x[0] >= 1.0 - 1e-12);
        assert!((out.x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rosenbrock() {
        let opts = SimplexOptions {
            max_iters: 5000,
            x_tol: 1e-8,
            ..Default::default()
        };
        let out = nelder_mead(
            |x| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)),
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &opts,
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-3);
        assert!((out.x[1] - 1.0).abs() < 1e-3);
    }
}
