//! Affine model of the excursion map Σ₁ → Σ̄₀, its estimation from a flow by
//! finite differences, and the composed return map `P = P₁⁰ ∘ P₀¹`.
//!
//! Input deviations are ordered `(x̃¹, ỹ¹, z̃₂¹, tail¹)` and outputs
//! `(x̃⁰, z̃₁⁰, z̃₂⁰, tail⁰)`; `y⁰` is pinned to the section value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::normal_form::{local_map_p01, FlowRates, NormalFormPoint};
use crate::numeric::central_jacobian;
use crate::{Result, SnlsError};

/// `(c₂₃, c₃₃)` and `(Δ₁, Δ₂)` count as zero below this.
pub const GENERICITY_TOL: f64 = 1e-12;
pub const TRANSVERSALITY_TOL: f64 = 1e-8;
pub const SELF_CONSISTENCY_TOL: f64 = 1e-6;

/// Block matrix `C`: `c` is the 3×3 core, `C14` is 3×m, `C41` is m×3 and
/// `C44` is m×m, all row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMatrix {
    pub c: [[f64; 3]; 3],
    #[serde(rename = "C14")]
    pub c14: Vec<Vec<f64>>,
    #[serde(rename = "C41")]
    pub c41: Vec<Vec<f64>>,
    #[serde(rename = "C44")]
    pub c44: Vec<Vec<f64>>,
}

impl GlobalMatrix {
    /// Core `c`, zero coupling and identity `C44` on an `m`-dimensional tail.
    pub fn with_identity_tail(c: [[f64; 3]; 3], m: usize) -> Self {
        Self {
            c,
            c14: vec![vec![0.0; m]; 3],
            c41: vec![vec![0.0; 3]; m],
            c44: (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn tail_dim(&self) -> usize {
        self.c44.len()
    }

    fn validate_shape(&self) -> Result<()> {
        let m = self.tail_dim();
        let ok = self.c14.len() == 3
            && self.c14.iter().all(|r| r.len() == m)
            && self.c41.len() == m
            && self.c41.iter().all(|r| r.len() == 3)
            && self.c44.iter().all(|r| r.len() == m);
        if !ok {
            return Err(SnlsError::InvalidParams(format!(
                "inconsistent block shapes for tail dimension {m}"
            )));
        }
        Ok(())
    }

    /// The assembled `(3+m)×(3+m)` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let m = self.tail_dim();
        DMatrix::from_fn(3 + m, 3 + m, |i, j| match (i < 3, j < 3) {
            (true, true) => self.c[i][j],
            (true, false) => self.c14[i][j - 3],
            (false, true) => self.c41[i - 3][j],
            (false, false) => self.c44[i - 3][j - 3],
        })
    }

    pub fn from_full(mat: &DMatrix<f64>) -> Result<Self> {
        let n = mat.nrows();
        if n < 3 || mat.ncols() != n {
            return Err(SnlsError::InvalidParams(format!(
                "need a square matrix of size >= 3, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = mat[(i, j)];
            }
        }
        Ok(Self {
            c,
            c14: (0..3).map(|i| (3..n).map(|j| mat[(i, j)]).collect()).collect(),
            c41: (3..n).map(|i| (0..3).map(|j| mat[(i, j)]).collect()).collect(),
            c44: (3..n).map(|i| (3..n).map(|j| mat[(i, j)]).collect()).collect(),
        })
    }

    pub fn delta1(&self) -> f64 {
        self.c[1][0] * self.c[2][2] - self.c[2][0] * self.c[1][2]
    }

    pub fn delta2(&self) -> f64 {
        self.c[1][1] * self.c[2][2] - self.c[2][1] * self.c[1][2]
    }

    /// `arctan2(Δ₁, Δ₂)` reduced mod π into `(−π/2, π/2]`.
    pub fn phi1(&self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        let mut phi = self.delta1().atan2(self.delta2());
        while phi > FRAC_PI_2 {
            phi -= PI;
        }
        while phi <= -FRAC_PI_2 {
            phi += PI;
        }
        phi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMapModel {
    pub q0_star: NormalFormPoint,
    pub q1_star: NormalFormPoint,
    #[serde(rename = "C")]
    pub c: GlobalMatrix,
    #[serde(default)]
    pub quad_bound: f64,
    /// Largest `‖p¹ − q1_star‖` accepted by [`apply_p10`]; unlimited if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_radius: Option<f64>,
}

impl GlobalMapModel {
    pub fn validate(&self) -> Result<()> {
        self.c.validate_shape()?;
        let m = self.c.tail_dim();
        if self.q0_star.tail.len() != m || self.q1_star.tail.len() != m {
            return Err(SnlsError::InvalidParams(format!(
                "intersection points must carry a tail of length {m}"
            )));
        }
        if !(self.quad_bound >= 0.0) {
            return Err(SnlsError::InvalidParams("quad_bound must be >= 0".into()));
        }
        if self.validity_radius.is_some_and(|r| !(r > 0.0)) {
            return Err(SnlsError::InvalidParams("validity_radius must be > 0".into()));
        }
        let (c23, c33) = (self.c.c[1][2], self.c.c[2][2]);
        if c23.abs() <= GENERICITY_TOL && c33.abs() <= GENERICITY_TOL {
            return Err(SnlsError::Degenerate(
                "c23 and c33 vanish together: the unstable direction is not transverse".into(),
            ));
        }
        Ok(())
    }

    pub fn tail_dim(&self) -> usize {
        self.c.tail_dim()
    }

    fn deviation(&self, p1: &NormalFormPoint) -> Vec<f64> {
        let q = &self.q1_star;
        let mut d = vec![p1.x - q.x, p1.y - q.y, p1.z2 - q.z2];
        d.extend(p1.tail.iter().zip(&q.tail).map(|(a, b)| a - b));
        d
    }
}

/// `q0_star + C·(p¹ − q1_star)`, optionally plus a quadratic term of size
/// at most `quad_bound·‖p¹ − q1_star‖²`.
pub fn apply_p10(model: &GlobalMapModel, p1: &NormalFormPoint, with_remainder: bool) -> Result<NormalFormPoint> {
    if p1.tail.len() != model.tail_dim() {
        return Err(SnlsError::InvalidParams(format!(
            "tail length {} does not match the model ({})",
            p1.tail.len(),
            model.tail_dim()
        )));
    }
    let dist = p1.distance(&model.q1_star);
    if let Some(r) = model.validity_radius {
        if !(dist < r) {
            return Err(SnlsError::DomainExit(format!(
                "distance {dist:.6e} from the excursion entry exceeds the validity radius {r:.6e}"
            )));
        }
    }
    let d = DVector::from_vec(model.deviation(p1));
    let mut out = model.c.full() * &d;
    if with_remainder && model.quad_bound > 0.0 {
        // Σ (d_i d_{i+1})² ≤ ‖d‖⁴, so the added vector is within the bound.
        let n = d.len();
        for i in 0..n {
            out[i] += model.quad_bound * d[i] * d[(i + 1) % n];
        }
    }
    let q = &model.q0_star;
    Ok(NormalFormPoint::new(
        q.x + out[0],
        q.y,
        q.z1 + out[1],
        q.z2 + out[2],
        q.tail.iter().enumerate().map(|(i, v)| v + out[3 + i]).collect(),
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CEstimate {
    pub c: GlobalMatrix,
    /// `∂_t F_y` at the base point.
    pub dt_fy: f64,
    /// Largest entry of the corrected Jacobian's y-row.
    pub y_residual: f64,
}

/// An exactly affine flow realising `model` at time `t1_star`: the
/// excursion map with a `y`-row `y_row` added, drifting along `drift`
/// (output order `x, y, z₁, z₂, tail`) as `t` moves off `t1_star`.
pub fn affine_flow(
    model: &GlobalMapModel,
    t1_star: f64,
    drift: Vec<f64>,
    y_row: Vec<f64>,
) -> impl Fn(&NormalFormPoint, f64) -> Result<NormalFormPoint> + '_ {
    move |p: &NormalFormPoint, t: f64| {
        let mut q = apply_p10(model, p, false)?.to_vec();
        let d = model.deviation(p);
        q[1] += y_row.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        for (v, w) in q.iter_mut().zip(&drift) {
            *v += (t - t1_star) * w;
        }
        NormalFormPoint::from_slice(&q)
    }
}

/// Finite-difference estimate of `C` from a forward flow `F(p¹, t)` that
/// carries `q1_star` onto `y = 0` at time `t1_star`.
///
/// `∂t₁/∂Q = −∂_Q F_y / ∂_t F_y` folds the section-time dependence into the
/// Jacobian, after which the y-row is dropped.
pub fn estimate_c<F>(flow: &F, q1_star: &NormalFormPoint, t1_star: f64) -> Result<CEstimate>
where
    F: Fn(&NormalFormPoint, f64) -> Result<NormalFormPoint>,
{
    if !(t1_star > 0.0) {
        return Err(SnlsError::InvalidParams(format!("t1_star must be > 0, got {t1_star}")));
    }
    let base = flow(q1_star, t1_star)?;
    if base.y.abs() > SELF_CONSISTENCY_TOL {
        return Err(SnlsError::SelfConsistency(base.y.abs()));
    }
    let scale = 1.0_f64.max(q1_star.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt());
    let h = 1e-5 * scale;
    let ht = 1e-5 * 1.0_f64.max(t1_star);

    // Inputs are (x, y, z2, tail); z1 stays on the section.
    let mut inputs = vec![q1_star.x, q1_star.y, q1_star.z2];
    inputs.extend_from_slice(&q1_star.tail);
    let rebuild = |v: &[f64]| NormalFormPoint::new(v[0], v[1], q1_star.z1, v[2], v[3..].to_vec());
    let outputs = |p: &NormalFormPoint| {
        let mut o = vec![p.x, p.y, p.z1, p.z2];
        o.extend_from_slice(&p.tail);
        o
    };
    let jq = central_jacobian(
        &|v: &[f64]| Ok(outputs(&flow(&rebuild(v), t1_star)?)),
        &inputs,
        &vec![h; inputs.len()],
    )?;
    let jt = central_jacobian(&|t: &[f64]| Ok(outputs(&flow(q1_star, t[0])?)), &[t1_star], &[ht])?;
    let dt_fy = jt[(1, 0)];
    if dt_fy.abs() < TRANSVERSALITY_TOL {
        return Err(SnlsError::Transversality(dt_fy.abs()));
    }
    let grad_t = jq.row(1) * (-1.0 / dt_fy);
    let corrected = &jq + jt.column(0) * grad_t;
    let y_residual = corrected.row(1).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if y_residual > SELF_CONSISTENCY_TOL {
        return Err(SnlsError::SelfConsistency(y_residual));
    }
    let n = inputs.len();
    let dropped = DMatrix::from_fn(n, n, |i, j| corrected[(if i == 0 { 0 } else { i + 1 }, j)]);
    Ok(CEstimate {
        c: GlobalMatrix::from_full(&dropped)?,
        dt_fy,
        y_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Excursion along `h₁` through `q1_star`.
    H1,
    /// Its mirror `h₂ = σh₁` through `σ(q1_star)`.
    H2,
}

/// The return map on Σ₀.
#[derive(Debug, Clone)]
pub struct PoincareMap {
    pub model: GlobalMapModel,
    pub eta: f64,
    pub rates: FlowRates,
    pub symmetric: bool,
    pub with_remainder: bool,
}

pub fn compose_p(model: GlobalMapModel, eta: f64, rates: FlowRates, symmetric: bool) -> Result<PoincareMap> {
    model.validate()?;
    rates.validate()?;
    if model.tail_dim() != rates.tail_len() {
        return Err(SnlsError::InvalidParams(format!(
            "model tail ({}) and rate tail ({}) differ",
            model.tail_dim(),
            rates.tail_len()
        )));
    }
    if !(eta > 0.0) {
        return Err(SnlsError::InvalidParams(format!("eta must be > 0, got {eta}")));
    }
    Ok(PoincareMap {
        model,
        eta,
        rates,
        symmetric,
        with_remainder: false,
    })
}

impl PoincareMap {
    /// Excursion along the chosen branch from a Σ₁ point.
    pub fn excursion(&self, p1: &NormalFormPoint, branch: Branch) -> Result<NormalFormPoint> {
        match branch {
            Branch::H1 => apply_p10(&self.model, p1, self.with_remainder),
            Branch::H2 => {
                let back = apply_p10(&self.model, &self.rates.sigma(p1), self.with_remainder)?;
                Ok(self.rates.sigma(&back))
            }
        }
    }

    /// Branch whose excursion entry is nearest to `p1`.
    pub fn branch_for(&self, p1: &NormalFormPoint) -> Branch {
        if !self.symmetric {
            return Branch::H1;
        }
        let s = self.rates.sigma(&self.model.q1_star);
        if p1.distance(&s) < p1.distance(&self.model.q1_star) {
            Branch::H2
        } else {
            Branch::H1
        }
    }

    pub fn apply(&self, p0: &NormalFormPoint) -> Result<NormalFormPoint> {
        let p1 = local_map_p01(p0, self.eta, &self.rates)?;
        self.excursion(&p1, self.branch_for(&p1))
    }

    pub fn apply_branch(&self, p0: &NormalFormPoint, branch: Branch) -> Result<NormalFormPoint> {
        let p1 = local_map_p01(p0, self.eta, &self.rates)?;
        self.excursion(&p1, branch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    #[serde(rename = "A2")]
    pub a2: bool,
    #[serde(rename = "A3")]
    pub a3: bool,
    pub delta1: f64,
    pub delta2: f64,
    pub span_conditioning: f64,
}

/// (A2): `(Δ₁, Δ₂) ≠ 0`. (A3): `e_x̃⁰`, the tail basis, `E_θ = C·e_θ` and
/// `C·e_z̃₂¹` span Σ₀, where `e_θ` is the angular direction in `(x¹, y¹)` at
/// angle `theta`.
pub fn check_a2_a3(model: &GlobalMapModel, theta: f64, tol: f64) -> GenericityReport {
    let (d1, d2) = (model.c.delta1(), model.c.delta2());
    let c = model.c.full();
    let n = c.nrows();
    let mut e_theta = DVector::zeros(n);
    e_theta[0] = -theta.sin();
    e_theta[1] = theta.cos();
    let mut e_z2 = DVector::zeros(n);
    e_z2[2] = 1.0;
    let mut assembled = DMatrix::identity(n, n);
    assembled.set_column(1, &(&c * e_theta));
    assembled.set_column(2, &(&c * e_z2));
    let sv = assembled.singular_values();
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    GenericityReport {
        a2: d1.hypot(d2) > tol,
        a3: smin > tol,
        delta1: d1,
        delta2: d2,
        span_conditioning: smin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_form::{TailBlock, TailRate};

    fn canonical_c() -> [[f64; 3]; 3] {
        [[1.0, 0.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]
    }

    fn model(c: [[f64; 3]; 3]) -> GlobalMapModel {
        GlobalMapModel {
            q0_star: NormalFormPoint::new(1.0, 0.0, 0.0, 0.0, vec![0.0, 0.8]),
            q1_star: NormalFormPoint::new(0.0, 0.0, 1.5, 0.8, vec![0.0, 0.0]),
            c: GlobalMatrix::with_identity_tail(c, 2),
            quad_bound: 0.0,
            validity_radius: None,
        }
    }

    #[test]
    fn center_maps_to_center() {
        let m = model(canonical_c());
        assert_eq!(apply_p10(&m, &m.q1_star, false).unwrap(), m.q0_star);
    }

    #[test]
    fn identity_core_moves_along_x() {
        let m = model([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let mut p = m.q1_star.clone();
        p.x += 1e-3;
        let q = apply_p10(&m, &p, false).unwrap();
        assert!((q.x - m.q0_star.x - 1e-3).abs() < 1e-15);
        assert_eq!((q.z1, q.z2), (m.q0_star.z1, m.q0_star.z2));
    }

    #[test]
    fn remainder_is_bounded() {
        let mut m = model(canonical_c());
        m.quad_bound = 3.0;
        let mut p = m.q1_star.clone();
        p.x += 0.1;
        p.y -= 0.2;
        p.tail[1] += 0.05;
        let lin = apply_p10(&m, &p, false).unwrap();
        let quad = apply_p10(&m, &p, true).unwrap();
        let d = p.distance(&m.q1_star);
        assert!(quad.distance(&lin) <= 3.0 * d * d + 1e-15);
        assert!(quad.distance(&lin) > 0.0);
    }

    #[test]
    fn validity_radius_is_enforced() {
        let mut m = model(canonical_c());
        m.validity_radius = Some(0.1);
        let mut p = m.q1_star.clone();
        p.x += 0.2;
        assert!(matches!(apply_p10(&m, &p, false), Err(SnlsError::DomainExit(_))));
    }

    #[test]
    fn flat_unstable_direction_is_rejected() {
        let m = model([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(matches!(m.validate(), Err(SnlsError::Degenerate(_))));
    }

    #[test]
    fn canonical_deltas() {
        let m = model(canonical_c());
        assert_eq!(m.c.delta1(), 1.0);
        assert_eq!(m.c.delta2(), -1.0);
        assert!((m.c.phi1() + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn json_layout() {
        let m = model(canonical_c());
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert!(v["C"]["C44"].is_array());
        assert_eq!(v["q0_star"].as_array().unwrap().len(), 6);
        let back: GlobalMapModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rotation_flow_has_zero_y_row() {
        let period = 3.0;
        let w = 2.0 * std::f64::consts::PI / period;
        let flow = |p: &NormalFormPoint, t: f64| {
            let (s, c) = (w * t).sin_cos();
            Ok(NormalFormPoint::new(
                p.x * c - p.y * s,
                p.x * s + p.y * c,
                p.z1,
                p.z2,
                p.tail.clone(),
            ))
        };
        let q1 = NormalFormPoint::new(1.0, 0.0, 1.0, 0.0, vec![]);
        let est = estimate_c(&flow, &q1, period).unwrap();
        assert!(est.y_residual < 1e-8);
        assert!((est.dt_fy - w).abs() < 1e-8);
        // x is unchanged along the section y = 0 to first order.
        assert!((est.c.c[0][0] - 1.0).abs() < 1e-8);
        assert!(est.c.c[0][1].abs() < 1e-8);
    }

    #[test]
    fn degenerate_time_derivative_is_rejected() {
        let flow = |p: &NormalFormPoint, _t: f64| Ok(p.clone());
        let q1 = NormalFormPoint::new(1.0, 0.0, 1.0, 0.0, vec![]);
        assert!(matches!(estimate_c(&flow, &q1, 1.0), Err(SnlsError::Transversality(_))));
    }

    fn rates() -> FlowRates {
        FlowRates {
            a: 0.1,
            b: 1.0,
            gamma1: 0.4,
            gamma2: 0.45,
            tail: vec![TailBlock {
                rate: TailRate::Node { rates: [-0.5, -0.6] },
                parity: [1.0, -1.0],
            }],
        }
    }

    #[test]
    fn mirror_branch_is_conjugate() {
        let map = compose_p(model(canonical_c()), 1.5, rates(), true).unwrap();
        let p0 = NormalFormPoint::new(1.2, 0.0, 1e-3, 1e-4, vec![0.01, -0.02]);
        let s = &map.rates;
        let lhs = s.sigma(&map.apply_branch(&s.sigma(&p0), Branch::H1).unwrap());
        let rhs = map.apply_branch(&p0, Branch::H2).unwrap();
        assert!(lhs.distance(&rhs) < 1e-14);
    }

    #[test]
    fn funnel_exit_is_flagged() {
        let map = compose_p(model(canonical_c()), 1.5, rates(), true).unwrap();
        let p0 = NormalFormPoint::new(1.2, 0.0, 1e-3, 1.4, vec![0.0, 0.0]);
        assert!(matches!(map.apply(&p0), Err(SnlsError::DomainExit(_))));
    }

    #[test]
    fn genericity_checks() {
        let r = check_a2_a3(&model(canonical_c()), std::f64::consts::FRAC_PI_4, 1e-8);
        assert!(r.a2 && r.a3);
        // Rows 2 and 3 proportional: both deltas vanish.
        let r = check_a2_a3(&model([[1.0, 0.0, 0.0], [1.0, 2.0, 1.0], [2.0, 4.0, 2.0]]), 0.3, 1e-8);
        assert!(!r.a2);
        // C·e_θ parallel to e_x.
        let r = check_a2_a3(&model([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]), 0.0, 1e-8);
        assert!(!r.a3);
        assert!(r.span_conditioning < 1e-12);
    }

    #[test]
    fn affine_round_trip_with_drift() {
        let m = model(canonical_c());
        let mut drift = vec![0.0; 4 + m.tail_dim()];
        drift[1] = 2.0;
        drift[2] = 0.5;
        let mut y_row = vec![0.0; 3 + m.tail_dim()];
        y_row[0] = 0.25;
        y_row[2] = -1.0;
        let flow = affine_flow(&m, 2.0, drift, y_row);
        let est = estimate_c(&flow, &m.q1_star, 2.0).unwrap();
        assert!(est.y_residual < 1e-8);
        assert!((est.dt_fy - 2.0).abs() < 1e-8);
        // Folding the section time moves z1 by -(0.5/2) * y_row.
        let mut expected = m.c.c;
        expected[1][0] -= 0.25 * 0.25;
        expected[1][2] += 0.25;
        for i in 0..3 {
            for j in 0..3 {
                assert!((est.c.c[i][j] - expected[i][j]).abs() < 1e-8, "{i}{j}");
            }
        }
    }
}
