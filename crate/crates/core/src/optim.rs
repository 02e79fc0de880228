//! Box-constrained Nelder–Mead simplex search.
//!
//! Trial points are projected onto the box before evaluation, so the
//! objective is never called outside `[lower, upper]`. Expansion,
//! contraction and shrink coefficients follow the dimension-adaptive scheme
//! of Gao and Han.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and every vertex lies within this (box-relative) distance of the best.
    pub x_tol: f64,
    /// Stop immediately once the best value is at or below this.
    pub f_target: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evals: 2000,
            initial_step: 0.1,
            f_tol: 1e-10,
            x_tol: 1e-8,
            f_target: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Minimize `f` over the box `[lower, upper]` starting from `x0`.
///
/// `x0` is projected into the box and is always one vertex of the initial
/// simplex, so the returned value never exceeds `f(x0)`.
pub fn minimize_bounded<F>(
    f: &mut F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    config: &NelderMeadConfig,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "empty search space");
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);

    let alpha = 1.0;
    let gamma = 1.0 + 2.0 / n as f64;
    let rho = 0.75 - 1.0 / (2.0 * n as f64);
    let sigma = 1.0 - 1.0 / n as f64;

    let width: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
    let mut f = Counted { f, evals: 0 };

    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        let h = config.initial_step * width[i];
        if v[i] + h <= upper[i] {
            v[i] += h;
        } else {
            v[i] -= h;
        }
        project(&mut v, lower, upper);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f.call(v)).collect();

    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        // Sort vertices by value; stable so ties keep insertion order.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if values[0] <= config.f_target {
            converged = true;
            break;
        }
        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .zip(&width)
                    .map(|((a, b), w)| if *w > 0.0 { (a - b).abs() / w } else { 0.0 })
            })
            .fold(0.0, f64::max);
        if spread <= config.f_tol && size <= config.x_tol {
            converged = true;
            break;
        }
        if f.evals >= config.max_evals {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();

        let along = |coef: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + coef * (c - w);
            }
            project(out, lower, upper);
        };

        along(alpha, &mut trial);
        let f_r = f.call(&trial);
        if f_r < values[0] {
            along(alpha * gamma, &mut trial2);
            let f_e = f.call(&trial2);
            if f_e < f_r {
                simplex[n].clone_from(&trial2);
                values[n] = f_e;
            } else {
                simplex[n].clone_from(&trial);
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n].clone_from(&trial);
            values[n] = f_r;
            continue;
        }
        let (coef, threshold) = if f_r < values[n] {
            (alpha * rho, f_r)
        } else {
            (-rho, values[n])
        };
        along(coef, &mut trial2);
        let f_c = f.call(&trial2);
        if f_c < threshold {
            simplex[n].clone_from(&trial2);
            values[n] = f_c;
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            values[i] = f.call(&simplex[i]);
        }
    }

    Minimum {
        x: simplex.swap_remove(0),
        value: values[0],
        evals: f.evals,
        converged,
    }
}
