//! Derivative-free minimization for hyperparameter fits.

/// Result of [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Box-constrained Nelder-Mead: every trial point is clamped to
/// `[lower, upper]`. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: f64,
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> NelderMeadOutcome {
    let n = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    simplex.push(x0.clone());
    for i in 0..n {
        let mut x = x0.clone();
        // Step inward when the start sits on the upper bound.
        x[i] += if x[i] + step <= upper[i] { step } else { -step };
        clamp(&mut x);
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= 1e-10 * (1.0 + values[0].abs()) && size <= 1e-8 {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let toward = |t: f64| {
            let mut x: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect();
            clamp(&mut x);
            x
        };
        let xr = toward(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = toward(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = toward(-0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = toward(0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let mut x: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, w)| b + 0.5 * (w - b)).collect();
            clamp(&mut x);
            values[i] = eval(&x);
            simplex[i] = x;
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NelderMeadOutcome { x: simplex[best].clone(), value: values[best], iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(f, &[-1.2, 1.0], 0.5, &[-5.0, -5.0], &[5.0, 5.0], 5000);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 10.0).powi(2);
        let out = nelder_mead(f, &[0.0], 1.0, &[-1.0], &[2.0], 500);
        assert!((out.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0].abs() };
        let out = nelder_mead(f, &[0.3], 1.0, &[-3.0], &[3.0], 200);
        assert!(out.value <= 0.3);
    }
}
