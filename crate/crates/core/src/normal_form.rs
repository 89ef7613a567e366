//! Linear model flow near the saddle in eigen-coordinates, the two Poincaré
//! sections and the closed-form local passage Σ₀ → Σ₁.
//!
//! Coordinates are `(x, y, z₁, z₂, tail)`: `(x, y)` spiral in at rate `a`
//! with frequency `b`, `z₁`/`z₂` expand at `γ₁`/`γ₂`, and the tail is a list
//! of independent 2×2 blocks, each either a real node or a focus.

use serde::{Deserialize, Serialize};

use crate::params::EigenLadder;
use crate::{Result, SnlsError};

/// Tolerance for the equality constraints `y = 0` (Σ₀) and `z₁ = η` (Σ₁).
pub const SECTION_EQ_TOL: f64 = 1e-12;

/// Ω is the box `max(|x|,|y|,|z₁|,|z₂|,‖tail‖) < OMEGA_FACTOR·η`.
pub const OMEGA_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct NormalFormPoint {
    pub x: f64,
    pub y: f64,
    pub z1: f64,
    pub z2: f64,
    /// Flattened 2-vectors, one per tail block.
    pub tail: Vec<f64>,
}

impl NormalFormPoint {
    pub fn new(x: f64, y: f64, z1: f64, z2: f64, tail: Vec<f64>) -> Self {
        Self { x, y, z1, z2, tail }
    }

    pub fn origin(tail_len: usize) -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, vec![0.0; tail_len])
    }

    pub fn tail_norm(&self) -> f64 {
        self.tail.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.x, self.y, self.z1, self.z2];
        v.extend_from_slice(&self.tail);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 4 || (v.len() - 4) % 2 != 0 {
            return Err(SnlsError::InvalidParams(format!(
                "normal-form point needs 4 + 2m entries, got {}",
                v.len()
            )));
        }
        Ok(Self::new(v[0], v[1], v[2], v[3], v[4..].to_vec()))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

impl From<NormalFormPoint> for Vec<f64> {
    fn from(p: NormalFormPoint) -> Self {
        p.to_vec()
    }
}

impl TryFrom<Vec<f64>> for NormalFormPoint {
    type Error = SnlsError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_slice(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailRate {
    /// Two real contraction rates.
    Node { rates: [f64; 2] },
    /// `μ ± iν` with `μ < 0`.
    Focus { decay: f64, freq: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBlock {
    pub rate: TailRate,
    /// Sign each component picks up under the half-period shift.
    pub parity: [f64; 2],
}

impl TailBlock {
    fn flow(&self, c: [f64; 2], t: f64) -> [f64; 2] {
        match self.rate {
            TailRate::Node { rates } => [c[0] * (rates[0] * t).exp(), c[1] * (rates[1] * t).exp()],
            TailRate::Focus { decay, freq } => {
                let (s, co) = (freq * t).sin_cos();
                let g = (decay * t).exp();
                [g * (c[0] * co - c[1] * s), g * (c[0] * s + c[1] * co)]
            }
        }
    }

    /// Weakest contraction rate of the block.
    pub fn slowest(&self) -> f64 {
        match self.rate {
            TailRate::Node { rates } => rates[0].max(rates[1]),
            TailRate::Focus { decay, .. } => decay,
        }
    }
}

/// Rates of the linear normal-form system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRates {
    pub a: f64,
    pub b: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub tail: Vec<TailBlock>,
}

impl FlowRates {
    /// Rates from the saddle spectrum: the tail holds `(λ₀⁻, λ₁⁻)` and then
    /// the focus pairs of modes `3, 4, ...` until `tail_pairs` blocks exist.
    pub fn from_ladder(ladder: &EigenLadder, tail_pairs: usize) -> Result<Self> {
        let r = ladder.rates()?;
        if tail_pairs == 0 {
            return Err(SnlsError::InvalidParams("need at least one tail pair".into()));
        }
        let mut tail = vec![TailBlock {
            rate: TailRate::Node {
                rates: [ladder.entries[0].lambda_minus.re, ladder.entries[1].lambda_minus.re],
            },
            parity: [1.0, -1.0],
        }];
        for n in 3..3 + tail_pairs - 1 {
            let e = ladder.get(n).ok_or_else(|| {
                SnlsError::InvalidParams(format!("ladder too short for tail mode {n}"))
            })?;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            tail.push(TailBlock {
                rate: TailRate::Focus {
                    decay: e.lambda_plus.re,
                    freq: e.lambda_plus.im.abs(),
                },
                parity: [sign, sign],
            });
        }
        let rates = Self {
            a: r.a,
            b: r.b,
            gamma1: r.gamma1,
            gamma2: r.gamma2,
            tail,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.gamma1 > 0.0 && self.gamma2 > 0.0) {
            return Err(SnlsError::InvalidParams(format!(
                "rates need a, b, gamma1, gamma2 > 0: {:?}",
                (self.a, self.b, self.gamma1, self.gamma2)
            )));
        }
        if self.tail.iter().any(|t| t.slowest() >= 0.0) {
            return Err(SnlsError::InvalidParams("tail rates must be contracting".into()));
        }
        Ok(())
    }

    pub fn tail_len(&self) -> usize {
        2 * self.tail.len()
    }

    /// `e^{tL}` on the tail, block by block.
    pub fn tail_flow(&self, tail: &[f64], t: f64) -> Vec<f64> {
        self.tail
            .iter()
            .enumerate()
            .flat_map(|(i, blk)| blk.flow([tail[2 * i], tail[2 * i + 1]], t))
            .collect()
    }

    /// Half-period shift in normal-form coordinates: `(x, y, z₁, −z₂, σQ)`.
    pub fn sigma(&self, p: &NormalFormPoint) -> NormalFormPoint {
        let tail = self
            .tail
            .iter()
            .enumerate()
            .flat_map(|(i, blk)| [blk.parity[0] * p.tail[2 * i], blk.parity[1] * p.tail[2 * i + 1]])
            .collect();
        NormalFormPoint::new(p.x, p.y, p.z1, -p.z2, tail)
    }

    fn check_tail(&self, p: &NormalFormPoint) -> Result<()> {
        if p.tail.len() != self.tail_len() {
            return Err(SnlsError::InvalidParams(format!(
                "tail length {} does not match {} configured blocks",
                p.tail.len(),
                self.tail.len()
            )));
        }
        Ok(())
    }
}

/// Exact linear flow for time `t ≥ 0` from a point inside Ω.
pub fn local_flow(p: &NormalFormPoint, t: f64, rates: &FlowRates, eta: f64) -> Result<NormalFormPoint> {
    if t < 0.0 || !t.is_finite() {
        return Err(SnlsError::InvalidParams(format!(
            "local flow is forward only, got t = {t}"
        )));
    }
    rates.check_tail(p)?;
    let box_norm = [p.x.abs(), p.y.abs(), p.z1.abs(), p.z2.abs(), p.tail_norm()]
        .into_iter()
        .fold(0.0, f64::max);
    if !(box_norm < OMEGA_FACTOR * eta) || !p.is_finite() {
        return Err(SnlsError::DomainExit(format!(
            "point outside the linearisation box (size {box_norm}, limit {})",
            OMEGA_FACTOR * eta
        )));
    }
    let g = (-rates.a * t).exp();
    let (s, c) = (rates.b * t).sin_cos();
    Ok(NormalFormPoint::new(
        g * (p.x * c - p.y * s),
        g * (p.x * s + p.y * c),
        p.z1 * (rates.gamma1 * t).exp(),
        p.z2 * (rates.gamma2 * t).exp(),
        rates.tail_flow(&p.tail, t),
    ))
}

/// `t₀ = ln(η/z₁⁰)/γ₁`, the first time `z₁` reaches `η`.
pub fn flight_time_to_sigma1(p: &NormalFormPoint, eta: f64, gamma1: f64) -> Result<f64> {
    if p.z1 <= 0.0 {
        return Err(SnlsError::DomainExit(format!(
            "z1 = {} never reaches the exit section",
            p.z1
        )));
    }
    if p.z1 > eta {
        return Err(SnlsError::DomainExit(format!(
            "z1 = {} already beyond eta = {eta}",
            p.z1
        )));
    }
    Ok((eta / p.z1).ln() / gamma1)
}

/// Closed-form passage from Σ₀ to Σ₁:
///
/// ```text
/// x¹ = (z₁⁰/η)^{a/γ₁} x⁰ cos[(b/γ₁) ln(η/z₁⁰)]
/// y¹ = (z₁⁰/η)^{a/γ₁} x⁰ sin[(b/γ₁) ln(η/z₁⁰)]
/// z₂¹ = (η/z₁⁰)^{γ₂/γ₁} z₂⁰,   Q¹ = e^{t₀L} Q⁰
/// ```
pub fn local_map_p01(p0: &NormalFormPoint, eta: f64, rates: &FlowRates) -> Result<NormalFormPoint> {
    rates.check_tail(p0)?;
    if p0.y.abs() > SECTION_EQ_TOL {
        return Err(SnlsError::DomainExit(format!("y = {} is off the entry section", p0.y)));
    }
    if p0.z2.abs() >= eta || p0.tail_norm() >= eta {
        return Err(SnlsError::DomainExit("point outside the entry section box".into()));
    }
    let t0 = flight_time_to_sigma1(p0, eta, rates.gamma1)?;
    let ratio = p0.z1 / eta;
    let amp = ratio.powf(rates.a / rates.gamma1) * p0.x;
    let phase = rates.b / rates.gamma1 * (eta / p0.z1).ln();
    let z2 = (eta / p0.z1).powf(rates.gamma2 / rates.gamma1) * p0.z2;
    if z2.abs() >= eta {
        return Err(SnlsError::DomainExit(format!(
            "|z2| reaches eta before z1 does (z2 would be {z2})"
        )));
    }
    Ok(NormalFormPoint::new(
        amp * phase.cos(),
        amp * phase.sin(),
        eta,
        z2,
        rates.tail_flow(&p0.tail, t0),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionKind {
    Sigma0,
    Sigma1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub eta: f64,
}

/// Strict-inequality membership in Σ₀ or Σ₁ for the given focus rates.
pub fn in_section(p: &NormalFormPoint, spec: &SectionSpec, a: f64, b: f64) -> bool {
    let eta = spec.eta;
    let tail_ok = p.tail_norm() < eta && p.z2.abs() < eta;
    match spec.kind {
        SectionKind::Sigma0 => {
            let x_lo = eta * (-2.0 * std::f64::consts::PI * a / b).exp();
            p.y.abs() <= SECTION_EQ_TOL
                && p.x > x_lo
                && p.x < eta
                && p.z1 > 0.0
                && p.z1 < eta
                && tail_ok
        }
        SectionKind::Sigma1 => {
            (p.z1 - eta).abs() <= SECTION_EQ_TOL && p.x.hypot(p.y) < eta && tail_ok
        }
    }
}
