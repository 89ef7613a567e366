//! The family of fixed points of `P` labelled by the number of half-turns
//! spent near the saddle, at leading order and after Newton refinement.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::global_map::{GlobalMapModel, PoincareMap, GENERICITY_TOL};
use crate::normal_form::{in_section, FlowRates, NormalFormPoint, SectionKind, SectionSpec};
use crate::numeric::central_jacobian;
use crate::{Result, SnlsError};

/// Leading-order fixed point with label `l`.
///
/// With `ẑ₂ = e^{a t₀} z̃₂¹ / x̂⁰`, the pair
/// `c₂₁ cos bt₀ + c₂₂ sin bt₀ + c₂₃ ẑ₂ = 0`,
/// `c₃₁ cos bt₀ + c₃₂ sin bt₀ + c₃₃ ẑ₂ = 0` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub l: i64,
    pub t0: f64,
    pub x_hat0: f64,
    pub z_hat12: f64,
    pub q_hat0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointFamily {
    pub entries: Vec<FamilyEntry>,
    pub phi1: f64,
    pub l0: i64,
}

impl FamilyEntry {
    /// Residuals of the two leading-order equations.
    pub fn leading_residual(&self, model: &GlobalMapModel, b: f64) -> [f64; 2] {
        let c = &model.c.c;
        let (s, co) = (b * self.t0).sin_cos();
        [
            c[1][0] * co + c[1][1] * s + c[1][2] * self.z_hat12,
            c[2][0] * co + c[2][1] * s + c[2][2] * self.z_hat12,
        ]
    }

    /// The corresponding point on Σ₀.
    pub fn guess(&self, model: &GlobalMapModel, rates: &FlowRates, eta: f64) -> NormalFormPoint {
        let zt = (-rates.a * self.t0).exp() * self.x_hat0 * self.z_hat12;
        NormalFormPoint::new(
            self.x_hat0,
            0.0,
            eta * (-rates.gamma1 * self.t0).exp(),
            (-rates.gamma2 * self.t0).exp() * (model.q1_star.z2 + zt),
            self.q_hat0.clone(),
        )
    }
}

impl FixedPointFamily {
    pub fn get(&self, l: i64) -> Option<&FamilyEntry> {
        self.entries.iter().find(|e| e.l == l)
    }
}

/// Leading-order entries `t₀ = (lπ − φ₁)/b`, `x̂⁰ = x*⁰`, `Q̂⁰ = Q*⁰` for each
/// `l` in `l_range` whose point has `t₀ > 0` and lies in Σ₀ with `|z₂¹| < η`.
pub fn fixed_point_family(
    model: &GlobalMapModel,
    rates: &FlowRates,
    eta: f64,
    x0_star: f64,
    l_range: std::ops::RangeInclusive<i64>,
) -> Result<FixedPointFamily> {
    model.validate()?;
    let c = &model.c;
    if c.delta1().hypot(c.delta2()) <= GENERICITY_TOL {
        return Err(SnlsError::Degenerate(
            "delta1 and delta2 vanish together".into(),
        ));
    }
    let phi1 = c.phi1();
    // Solve for ẑ₂ from whichever row has the larger coefficient.
    let row = if c.c[1][2].abs() >= c.c[2][2].abs() { 1 } else { 2 };
    let section = SectionSpec {
        kind: SectionKind::Sigma0,
        eta,
    };
    let mut entries = Vec::new();
    for l in l_range {
        let t0 = (l as f64 * PI - phi1) / rates.b;
        if t0 <= 0.0 {
            continue;
        }
        let (s, co) = (rates.b * t0).sin_cos();
        let z_hat12 = -(c.c[row][0] * co + c.c[row][1] * s) / c.c[row][2];
        let entry = FamilyEntry {
            l,
            t0,
            x_hat0: x0_star,
            z_hat12,
            q_hat0: model.q0_star.tail.clone(),
        };
        let g = entry.guess(model, rates, eta);
        let z21 = g.z2 * (rates.gamma2 * t0).exp();
        if in_section(&g, &section, rates.a, rates.b) && z21.abs() < eta {
            entries.push(entry);
        }
    }
    let l0 = entries
        .first()
        .map(|e| e.l)
        .ok_or_else(|| SnlsError::InvalidParams("no admissible label in range".into()))?;
    Ok(FixedPointFamily { entries, phi1, l0 })
}

/// `(τ, x, z₂¹, tail)` with `z₁ = η e^{−γ₁τ}` and `z₂ = e^{−γ₂τ} z₂¹`.
fn to_hat(p: &NormalFormPoint, eta: f64, rates: &FlowRates) -> Result<Vec<f64>> {
    if p.z1 <= 0.0 {
        return Err(SnlsError::DomainExit(format!("z1 = {} is not positive", p.z1)));
    }
    let tau = (eta / p.z1).ln() / rates.gamma1;
    let mut h = vec![tau, p.x, (rates.gamma2 * tau).exp() * p.z2];
    h.extend_from_slice(&p.tail);
    Ok(h)
}

fn from_hat(h: &[f64], eta: f64, rates: &FlowRates) -> NormalFormPoint {
    let tau = h[0];
    NormalFormPoint::new(
        h[1],
        0.0,
        eta * (-rates.gamma1 * tau).exp(),
        (-rates.gamma2 * tau).exp() * h[2],
        h[3..].to_vec(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedFixedPoint {
    pub point: NormalFormPoint,
    /// `‖P(q) − q‖`.
    pub residual: f64,
    pub iterations: usize,
    /// Flight time `τ` of the refined point.
    pub tau: f64,
}

pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Newton on `P(q) = q` in the coordinates `(τ, x, z₂¹, tail)`.
///
/// The iteration stops once `‖P(q) − q‖` is below `1e-13` or no further
/// descent is possible; the result must satisfy `‖P(q) − q‖ < 1e-10`.
pub fn refine_fixed_point(map: &PoincareMap, guess: &NormalFormPoint) -> Result<RefinedFixedPoint> {
    let (eta, rates) = (map.eta, &map.rates);
    let raw = |q: &NormalFormPoint| -> Result<f64> { Ok(map.apply(q)?.distance(q)) };
    // Relative z₁ mismatch instead of the τ mismatch: it stays defined when
    // a poor guess sends z₁ negative.
    let g = |h: &[f64]| -> Result<Vec<f64>> {
        let q = from_hat(h, eta, rates);
        let image = map.apply(&q)?;
        let mut r = vec![
            (q.z1 - image.z1) / (rates.gamma1 * q.z1),
            image.x - q.x,
            (rates.gamma2 * h[0]).exp() * image.z2 - h[2],
        ];
        r.extend(image.tail.iter().zip(&q.tail).map(|(a, b)| a - b));
        Ok(r)
    };
    let norm = |v: &[f64]| v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));

    let mut h = to_hat(guess, eta, rates)?;
    let mut gh = g(&h)?;
    let mut res = raw(&from_hat(&h, eta, rates))?;
    let mut iterations = 0;
    while iterations < 60 && res >= 1e-13 {
        iterations += 1;
        let steps: Vec<f64> = h.iter().map(|v| 1e-7 * (1.0 + v.abs())).collect();
        let jac: DMatrix<f64> = central_jacobian(&g, &h, &steps)?;
        let rhs = DVector::from_iterator(gh.len(), gh.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SnlsError::Newton("singular Jacobian of P - id".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = h.iter().zip(delta.iter()).map(|(a, d)| a + lambda * d).collect();
            if let (Ok(gt), Ok(rt)) = (g(&trial), raw(&from_hat(&trial, eta, rates))) {
                if norm(&gt) < norm(&gh) || rt < res {
                    h = trial;
                    gh = gt;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(res < FIXED_POINT_TOL) {
        return Err(SnlsError::Newton(format!(
            "fixed-point residual {res:e} after {iterations} iterations"
        )));
    }
    Ok(RefinedFixedPoint {
        point: from_hat(&h, eta, rates),
        residual: res,
        iterations,
        tau: h[0],
    })
}

/// `|τ − t₀| + |x − x̂⁰| + |ẑ₂(q) − ẑ₂|` between a refined point and its
/// leading-order entry.
pub fn hat_distance(entry: &FamilyEntry, refined: &RefinedFixedPoint, model: &GlobalMapModel, rates: &FlowRates, eta: f64) -> Result<f64> {
    let h = to_hat(&refined.point, eta, rates)?;
    let z_hat = (rates.a * h[0]).exp() * (h[2] - model.q1_star.z2) / h[1];
    Ok((h[0] - entry.t0).abs() + (h[1] - entry.x_hat0).abs() + (z_hat - entry.z_hat12).abs())
}
