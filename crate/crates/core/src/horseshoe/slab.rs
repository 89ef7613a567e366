//! The slabs `S_l`, `σ(S_l)` and their hull `Ŝ_l`, with a chart that makes
//! `Ŝ_l` a box.
//!
//! Chart coordinates of a Σ₀ point are
//! `(u₁, u₂ | s_x, s_Q)`: `u₁ = (τ − τ_lo)/(τ_hi − τ_lo)` with
//! `z₁ = η e^{−γ₁τ}`, `u₂ = z₂¹/(|z₂*| + w)` with `z₂ = e^{−γ₂τ} z₂¹`,
//! `s_x = (x − x*)/w` and `s_Q = Q/w`. The first two are the expanding
//! directions, the rest contract.

use serde::{Deserialize, Serialize};

use crate::global_map::PoincareMap;
use crate::normal_form::NormalFormPoint;
use crate::{Result, SnlsError};

use super::family::{refine_fixed_point, FixedPointFamily, RefinedFixedPoint};

/// Number of expanding chart coordinates.
pub const UNSTABLE_DIM: usize = 2;

/// The stable tail ball stays this fraction inside Σ₀.
const TAIL_MARGIN: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlabKind {
    #[serde(rename = "S_l")]
    Direct,
    #[serde(rename = "S_l_sigma")]
    Mirrored,
    #[serde(rename = "S_hat_l")]
    Hull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSet {
    pub l: i64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    /// Half-width `η e^{−a t₀,₂ₗ/2}` of the x, z₂¹ and tail windows.
    pub w: f64,
    pub eta: f64,
    pub x_star: f64,
    pub z2_star: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Stable `s_x` interval: the x-window intersected with Σ₀.
    pub sx_range: [f64; 2],
    /// Radius of the stable tail ball in chart units.
    pub tail_radius: f64,
    /// Slowest tail contraction rate.
    pub tail_rate: f64,
    /// Fixed points with labels `2l` and `2l + 1`.
    pub fixed_points: Vec<RefinedFixedPoint>,
}

/// Windows for slab index `l` from the family entries `2l` and `2l + 2`;
/// rejects the slab unless the refined fixed points `2l`, `2l + 1` lie in
/// `S_l` and the windows fit inside the sections.
pub fn build_slabs(map: &PoincareMap, family: &FixedPointFamily, l: i64) -> Result<SlabSet> {
    let rates = &map.rates;
    let eta = map.eta;
    let (b, a) = (rates.b, rates.a);
    let entry = |k: i64| {
        family
            .get(k)
            .ok_or_else(|| SnlsError::InvalidParams(format!("family lacks label {k}")))
    };
    let t_lo = entry(2 * l)?.t0;
    let t_hi = entry(2 * l + 2)?.t0;
    let shift = std::f64::consts::PI / (2.0 * b);
    let w = eta * (-a * t_lo / 2.0).exp();
    let x_star = map.model.q0_star.x;
    let z2_star = map.model.q1_star.z2;
    if !(z2_star.abs() > w) {
        return Err(SnlsError::Slices(format!(
            "slab {l}: window {w:.4} not below |z2*| = {:.4}; S_l and its mirror overlap",
            z2_star.abs()
        )));
    }
    if !(z2_star.abs() + w < eta) {
        return Err(SnlsError::Slices(format!(
            "slab {l}: |z2*| + w = {:.4} leaves the exit section (eta = {eta})",
            z2_star.abs() + w
        )));
    }
    let x_lo = eta * (-2.0 * std::f64::consts::PI * a / b).exp();
    let sx_range = [((x_lo - x_star) / w).max(-1.0), ((eta - x_star) / w).min(1.0)];
    if !(sx_range[0] < 0.0 && sx_range[1] > 0.0) {
        return Err(SnlsError::Slices(format!(
            "slab {l}: x* = {x_star} is not inside the entry section"
        )));
    }
    let tail_rate = rates
        .tail
        .iter()
        .map(|t| t.slowest())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut slabs = SlabSet {
        l,
        tau_lo: t_lo - shift,
        tau_hi: t_hi - shift,
        w,
        eta,
        x_star,
        z2_star,
        gamma1: rates.gamma1,
        gamma2: rates.gamma2,
        sx_range,
        tail_radius: TAIL_MARGIN * eta / w,
        tail_rate,
        fixed_points: Vec::new(),
    };
    for k in [2 * l, 2 * l + 1] {
        let e = entry(k)?;
        let fp = refine_fixed_point(map, &e.guess(&map.model, rates, eta))?;
        if !slabs.contains(SlabKind::Direct, &fp.point, &map.rates) {
            return Err(SnlsError::Slices(format!(
                "slab {l}: refined fixed point {k} is not inside S_l"
            )));
        }
        slabs.fixed_points.push(fp);
    }
    Ok(slabs)
}

impl SlabSet {
    pub fn chart_dim(&self, tail_len: usize) -> usize {
        UNSTABLE_DIM + 1 + tail_len
    }

    pub(crate) fn z2_scale(&self) -> f64 {
        self.z2_star.abs() + self.w
    }

    pub fn tau_of(&self, u1: f64) -> f64 {
        self.tau_lo + u1 * (self.tau_hi - self.tau_lo)
    }

    pub fn to_chart(&self, p: &NormalFormPoint) -> Result<Vec<f64>> {
        if !(p.z1 > 0.0) {
            return Err(SnlsError::DomainExit(format!("z1 = {} has no flight time", p.z1)));
        }
        Ok(self.chart_at(p, (self.eta / p.z1).ln() / self.gamma1))
    }

    /// [`SlabSet::to_chart`] continued past `z₁ → 0` by linearizing `ln z₁`
    /// below the level of `u₁ = 3`, so Newton iterates may overshoot.
    pub fn to_chart_extended(&self, p: &NormalFormPoint) -> Vec<f64> {
        let floor = self.eta * (-self.gamma1 * self.tau_of(3.0)).exp();
        let ln_z1 = if p.z1 > floor {
            p.z1.ln()
        } else {
            floor.ln() + (p.z1 - floor) / floor
        };
        self.chart_at(p, (self.eta.ln() - ln_z1) / self.gamma1)
    }

    fn chart_at(&self, p: &NormalFormPoint, tau: f64) -> Vec<f64> {
        let mut c = vec![
            (tau - self.tau_lo) / (self.tau_hi - self.tau_lo),
            (self.gamma2 * tau).exp() * p.z2 / self.z2_scale(),
            (p.x - self.x_star) / self.w,
        ];
        c.extend(p.tail.iter().map(|v| v / self.w));
        c
    }

    pub fn from_chart(&self, c: &[f64]) -> NormalFormPoint {
        let tau = self.tau_of(c[0]);
        NormalFormPoint::new(
            self.x_star + self.w * c[2],
            0.0,
            self.eta * (-self.gamma1 * tau).exp(),
            (-self.gamma2 * tau).exp() * c[1] * self.z2_scale(),
            c[3..].iter().map(|v| v * self.w).collect(),
        )
    }

    /// `u₂` range of the unstable window of a slab kind.
    pub fn u2_range(&self, kind: SlabKind) -> [f64; 2] {
        let s = self.z2_scale();
        let lo = (self.z2_star.abs() - self.w) / s;
        match kind {
            SlabKind::Hull => [-1.0, 1.0],
            SlabKind::Direct if self.z2_star > 0.0 => [lo, 1.0],
            SlabKind::Mirrored if self.z2_star < 0.0 => [lo, 1.0],
            _ => [-1.0, -lo],
        }
    }

    /// Unstable chart box of a slab kind: `[u₁ range, u₂ range]`.
    pub fn unstable_box(&self, kind: SlabKind) -> [[f64; 2]; 2] {
        [[0.0, 1.0], self.u2_range(kind)]
    }

    /// Membership by the defining inequalities, including Σ₀'s own bounds.
    pub fn contains(&self, kind: SlabKind, p: &NormalFormPoint, rates: &crate::normal_form::FlowRates) -> bool {
        let Ok(c) = self.to_chart(p) else {
            return false;
        };
        let [u2_lo, u2_hi] = self.u2_range(kind);
        let tau = self.tau_of(c[0]);
        let exit_tail = rates.tail_flow(&p.tail, tau);
        let exit_norm = exit_tail.iter().map(|v| v * v).sum::<f64>().sqrt();
        p.y.abs() <= crate::normal_form::SECTION_EQ_TOL
            && (0.0..=1.0).contains(&c[0])
            && c[1] >= u2_lo
            && c[1] <= u2_hi
            && c[2] >= self.sx_range[0]
            && c[2] <= self.sx_range[1]
            && p.tail_norm() < self.eta
            && exit_norm <= self.w
    }

    /// Stable chart coordinates strictly inside the stable box.
    pub fn stable_interior(&self, s: &[f64], margin: f64) -> bool {
        let tail = s[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        s[0] > self.sx_range[0] + margin
            && s[0] < self.sx_range[1] - margin
            && tail < self.tail_radius - margin
            && tail * (self.tail_rate * self.tau_lo).exp() < 1.0 - margin
    }

    /// Samples of the stable box: center, `s_x` ends, and `± radius` along
    /// each tail axis.
    pub fn stable_samples(&self, tail_len: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; 1 + tail_len]];
        for sx in self.sx_range {
            let mut s = vec![0.0; 1 + tail_len];
            s[0] = sx;
            out.push(s);
        }
        // The exit-tail window only binds at τ_lo.
        let r = self.tail_radius.min((-self.tail_rate * self.tau_lo).exp());
        for i in 0..tail_len {
            for sign in [-1.0, 1.0] {
                let mut s = vec![0.0; 1 + tail_len];
                s[1 + i] = sign * r;
                out.push(s);
            }
        }
        out
    }
}
