//! Nelder-Mead downhill simplex.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Edge length of the starting simplex along each coordinate.
    pub step: f64,
    pub max_evals: usize,
    /// Stop once `max f - min f <= ftol_abs + ftol_rel * |min f|` over the simplex.
    pub ftol_rel: f64,
    pub ftol_abs: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_evals: 20_000,
            ftol_rel: 1e-11,
            ftol_abs: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimises `f` from `start`. Non-finite objective values are treated as `+∞`.
///
/// The returned point is never worse than `start`: the best vertex is kept
/// through every reflection, expansion, contraction and shrink.
pub fn minimize<F>(mut f: F, start: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    if n == 0 {
        let value = eval(start, &mut evals);
        return SimplexResult {
            x: Vec::new(),
            value,
            evals,
            converged: true,
        };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();
    let mut converged = false;

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        // Stable sort keeps ties in insertion order, so runs are reproducible.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| std::mem::take(&mut simplex[i])).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        if worst.is_finite() && worst - best <= opts.ftol_abs + opts.ftol_rel * best.abs() {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        centroid.fill(0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let point = |coef: f64, out: &mut [f64], simplex: &[Vec<f64>], centroid: &[f64]| {
            for i in 0..n {
                out[i] = centroid[i] + coef * (simplex[n][i] - centroid[i]);
            }
        };

        point(-1.0, &mut trial, &simplex, &centroid);
        let f_reflect = eval(&trial, &mut evals);

        if f_reflect < values[0] {
            point(-2.0, &mut trial2, &simplex, &centroid);
            let f_expand = eval(&trial2, &mut evals);
            if f_expand < f_reflect {
                simplex[n].copy_from_slice(&trial2);
                values[n] = f_expand;
            } else {
                simplex[n].copy_from_slice(&trial);
                values[n] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[n - 1] {
            simplex[n].copy_from_slice(&trial);
            values[n] = f_reflect;
            continue;
        }

        let outside = f_reflect < values[n];
        let coef = if outside { -0.5 } else { 0.5 };
        point(coef, &mut trial2, &simplex, &centroid);
        let f_contract = eval(&trial2, &mut evals);
        let accept = if outside {
            f_contract <= f_reflect
        } else {
            f_contract < values[n]
        };
        if accept {
            simplex[n].copy_from_slice(&trial2);
            values[n] = f_contract;
            continue;
        }

        let anchor = simplex[0].clone();
        for i in 1..=n {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            values[i] = eval(&simplex[i], &mut evals);
        }
    }

    SimplexResult {
        x: simplex.swap_remove(0),
        value: values[0],
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let r = minimize(f, &[0.0, 0.0], &SimplexOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] + 2.0).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = minimize(f, &[-1.2, 1.0], &SimplexOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-3, "{:?}", r);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] > 0.3 { f64::NAN } else { x[0].abs() };
        let r = minimize(f, &[0.2], &SimplexOptions::default());
        assert!(r.value <= 0.2);
    }
}
