//! Small numerical helpers shared by the map-level modules: central-difference
//! Jacobians, damped Newton on `R^n` and bracketed bisection.

use nalgebra::{DMatrix, DVector};

use crate::{Result, SnlsError};

/// Central-difference Jacobian of `f` at `x`, one step per coordinate.
pub fn central_jacobian<F>(f: &F, x: &[f64], steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(x.len());
    for (j, &h) in steps.iter().enumerate() {
        probe[j] = x[j] + h;
        let fp = f(&probe)?;
        probe[j] = x[j] - h;
        let fm = f(&probe)?;
        probe[j] = x[j];
        columns.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let rows = columns.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| columns[j][i]))
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Stop once `‖F(x)‖∞` drops below this.
    pub residual_tol: f64,
    /// Or once the step is this small relative to `1 + ‖x‖∞`.
    pub step_tol: f64,
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 40,
            residual_tol: 1e-12,
            step_tol: 1e-14,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub min_singular_value: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iteration for `F(x) = 0` with a finite-difference Jacobian and
/// backtracking on the residual norm.
pub fn newton<F>(f: &F, x0: &[f64], cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut res = inf_norm(&fx);
    let mut sigma_min = f64::NAN;
    for it in 0..cfg.max_iter {
        if res < cfg.residual_tol {
            return Ok(NewtonOutcome {
                x,
                residual: res,
                iterations: it,
                min_singular_value: sigma_min,
            });
        }
        let steps: Vec<f64> = x.iter().map(|v| cfg.fd_step * (1.0 + v.abs())).collect();
        let jac = central_jacobian(f, &x, &steps)?;
        sigma_min = jac
            .clone()
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |m, &s| m.min(s));
        let rhs = DVector::from_vec(fx.iter().map(|v| -v).collect());
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SnlsError::Newton("singular Jacobian".into()))?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok(ft) = f(&trial) {
                let rt = inf_norm(&ft);
                if rt.is_finite() && (rt < res || rt < cfg.residual_tol) {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let step_norm = lambda * inf_norm(delta.as_slice());
        match accepted {
            Some((xt, ft, rt)) => {
                x = xt;
                fx = ft;
                res = rt;
            }
            None => {
                // no descent left: converged to rounding level or stuck
                if step_norm <= 1e3 * cfg.step_tol * (1.0 + inf_norm(&x)) {
                    return Ok(NewtonOutcome {
                        x,
                        residual: res,
                        iterations: it + 1,
                        min_singular_value: sigma_min,
                    });
                }
                return Err(SnlsError::Newton(format!(
                    "line search failed at iteration {it}, residual {res:e}"
                )));
            }
        }
        if step_norm <= cfg.step_tol * (1.0 + inf_norm(&x)) {
            return Ok(NewtonOutcome {
                x,
                residual: res,
                iterations: it + 1,
                min_singular_value: sigma_min,
            });
        }
    }
    if res < cfg.residual_tol {
        return Ok(NewtonOutcome {
            x,
            residual: res,
            iterations: cfg.max_iter,
            min_singular_value: sigma_min,
        });
    }
    Err(SnlsError::Newton(format!(
        "no convergence after {} iterations, residual {res:e}",
        cfg.max_iter
    )))
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
pub fn bisect<G>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    G: Fn(f64) -> f64,
{
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_quadratic() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0], x[0] * x[1]]);
        let j = central_jacobian(&f, &[2.0, 3.0], &[1e-4, 1e-4]).unwrap();
        assert!((j[(0, 0)] - 4.0).abs() < 1e-8);
        assert!((j[(1, 0)] - 3.0).abs() < 1e-8);
        assert!((j[(1, 1)] - 2.0).abs() < 1e-8);
        assert!(j[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn newton_solves_circle_line() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]);
        let out = newton(&f, &[1.0, 0.2], &NewtonConfig::default()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.x[0] - r).abs() < 1e-12 && (out.x[1] - r).abs() < 1e-12);
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect(|t| t * t - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|t| t * t + 1.0, 0.0, 1.0, 1e-12).is_none());
    }
}
