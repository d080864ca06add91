//! Small derivative-free minimizers and scalar root finders.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Result of a minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial simplex edge length along each axis.
    pub step: f64,
    pub max_evaluations: usize,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter below this.
    pub x_tol: f64,
    /// Number of times the simplex is rebuilt around the best vertex.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { step: 0.1, max_evaluations: 20_000, f_tol: 1e-15, x_tol: 1e-10, restarts: 3 }
    }
}

/// Nelder–Mead simplex minimization (adaptive coefficients for higher dimensions).
///
/// Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    if dim == 0 {
        let value = eval(x0, &mut evals);
        return Minimum { x: Vec::new(), value, evaluations: evals };
    }
    let n = dim as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / n, 0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n);

    let mut best_x = x0.to_vec();
    let mut best_v = eval(x0, &mut evals);
    let mut step = opts.step;

    for _round in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
        simplex.push(best_x.clone());
        values.push(best_v);
        for i in 0..dim {
            let mut v = best_x.clone();
            v[i] += step;
            values.push(eval(&v, &mut evals));
            simplex.push(v);
        }

        let mut centroid = vec![0.0; dim];
        let mut trial = vec![0.0; dim];
        let mut trial2 = vec![0.0; dim];
        while evals < opts.max_evaluations {
            // Order: best first.
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[dim] - values[0];
            let diameter = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (spread <= opts.f_tol && diameter <= opts.x_tol) || diameter <= opts.x_tol * 1e-3 {
                break;
            }

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for v in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n;
                }
            }
            let worst = &simplex[dim];
            for i in 0..dim {
                trial[i] = centroid[i] + alpha * (centroid[i] - worst[i]);
            }
            let fr = eval(&trial, &mut evals);
            if fr < values[0] {
                for i in 0..dim {
                    trial2[i] = centroid[i] + gamma * (trial[i] - centroid[i]);
                }
                let fe = eval(&trial2, &mut evals);
                if fe < fr {
                    simplex[dim].copy_from_slice(&trial2);
                    values[dim] = fe;
                } else {
                    simplex[dim].copy_from_slice(&trial);
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim].copy_from_slice(&trial);
                values[dim] = fr;
            } else {
                let outside = fr < values[dim];
                for i in 0..dim {
                    trial2[i] = if outside {
                        centroid[i] + rho * (trial[i] - centroid[i])
                    } else {
                        centroid[i] - rho * (centroid[i] - simplex[dim][i])
                    };
                }
                let fc = eval(&trial2, &mut evals);
                if fc < fr.min(values[dim]) {
                    simplex[dim].copy_from_slice(&trial2);
                    values[dim] = fc;
                } else {
                    for j in 1..=dim {
                        for i in 0..dim {
                            simplex[j][i] = simplex[0][i] + sigma * (simplex[j][i] - simplex[0][i]);
                        }
                        values[j] = eval(&simplex[j], &mut evals);
                    }
                }
            }
        }

        let (ib, _) = values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if values[ib] <= best_v {
            best_v = values[ib];
            best_x = simplex[ib].clone();
        }
        if evals >= opts.max_evaluations {
            break;
        }
        step = (step * 0.1).max(opts.x_tol * 10.0);
    }
    Minimum { x: best_x, value: best_v, evaluations: evals }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompassOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evaluations: usize,
}

impl Default for CompassOptions {
    fn default() -> Self {
        Self { initial_step: 0.5, min_step: 1e-9, max_evaluations: 200_000 }
    }
}

/// Compass (coordinate pattern) search. Only strict improvements are accepted, so
/// the returned trace of accepted values is non-increasing.
pub fn compass_search<F>(mut f: F, x0: &[f64], opts: &CompassOptions) -> (Minimum, Vec<f64>)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut value = f(&x);
    if value.is_nan() {
        value = f64::INFINITY;
    }
    let mut evals = 1;
    let mut trace = vec![value];
    let mut step = opts.initial_step;
    'outer: while step >= opts.min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                if evals >= opts.max_evaluations {
                    break 'outer;
                }
                let old = x[i];
                x[i] = old + dir * step;
                let v = f(&x);
                evals += 1;
                if v < value {
                    value = v;
                    trace.push(v);
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (Minimum { x, value, evaluations: evals }, trace)
}

/// Golden-section search for a minimum of a unimodal function on `[lo, hi]`.
pub fn golden_section<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    // The interior probes may beat the midpoint on flat or noisy objectives.
    [(x, fx), (c, fc), (d, fd)].into_iter().fold((x, fx), |acc, p| if p.1 < acc.1 { p } else { acc })
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, what: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::NoSignChange(what));
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn compass_trace_is_monotone() {
        let (m, trace) = compass_search(|x| (x[0] - 0.3).powi(2) + (x[1] + 0.7).powi(2), &[0.0, 0.0], &CompassOptions::default());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((m.x[0] - 0.3).abs() < 1e-8);
    }

    #[test]
    fn golden_and_bisect() {
        let (x, _) = golden_section(|x| (x - 0.25) * (x - 0.25), 0.0, 1.0, 1e-10);
        assert!((x - 0.25).abs() < 1e-8);
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, "sqrt").unwrap();
        assert!((r - core::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(bisect(|x| x + 1.0, 0.0, 1.0, 1e-9, "none"), Err(Error::NoSignChange("none")));
    }
}
