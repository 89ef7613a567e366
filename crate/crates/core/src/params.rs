//! Model parameters, the spatially constant saddle and its eigenvalue ladder.
//!
//! The saddle is evaluated with the first-order expansion in ε
//! (`I = ω² − ε/(2ω)·√(β² − α²ω²)`), so it carries an O(ε²) truncation error.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Result, SnlsError};

/// Default tolerance for ordering and "does not vanish" comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Physical and perturbation parameters (α, β, ω, ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, omega: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            omega,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            alpha,
            beta,
            omega,
            epsilon,
        } = *self;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SnlsError::InvalidParams(format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(SnlsError::InvalidParams(format!("beta must be > 0, got {beta}")));
        }
        if !(omega > 0.5 && omega < 1.0) {
            return Err(SnlsError::InvalidParams(format!(
                "omega must lie in (1/2, 1), got {omega}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(SnlsError::InvalidParams(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if alpha * omega >= beta {
            return Err(SnlsError::InvalidParams(format!(
                "alpha*omega = {} must be < beta = {beta}",
                alpha * omega
            )));
        }
        Ok(())
    }
}

/// The constant equilibrium `Q_ε = √I·e^{iθ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleState {
    #[serde(rename = "I")]
    pub intensity: f64,
    pub theta: f64,
    pub q_value: Complex64,
}

pub fn compute_saddle(params: &ModelParams) -> Result<SaddleState> {
    params.validate()?;
    let ModelParams {
        alpha,
        beta,
        omega,
        epsilon,
    } = *params;
    let radical = (beta * beta - alpha * alpha * omega * omega).sqrt();
    let intensity = omega * omega - epsilon / (2.0 * omega) * radical;
    if intensity <= 0.0 {
        return Err(SnlsError::InvalidParams(format!(
            "epsilon = {epsilon} too large for the first-order saddle (I = {intensity})"
        )));
    }
    let cos_theta = alpha * intensity.sqrt() / beta;
    if cos_theta >= 1.0 {
        return Err(SnlsError::InvalidParams(format!(
            "cos(theta) = {cos_theta} >= 1, no saddle phase"
        )));
    }
    let theta = cos_theta.acos();
    let q_value = Complex64::from_polar(intensity.sqrt(), theta);
    Ok(SaddleState {
        intensity,
        theta,
        q_value,
    })
}

/// One rung of the ladder: the pair λ_n^± for cosine mode `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub n: usize,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
}

/// Rates of the normal-form system: the focus (a, b) and the two expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub a: f64,
    pub b: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenLadder {
    pub entries: Vec<LadderEntry>,
}

impl EigenLadder {
    /// Ladder from explicit values, used for constructed test cases.
    pub fn from_entries(entries: Vec<LadderEntry>) -> Self {
        Self { entries }
    }

    pub fn n_max(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn get(&self, n: usize) -> Option<&LadderEntry> {
        self.entries.get(n)
    }

    /// Two-sided relabeling: `Λ_n = λ_n^+` for `n ≥ 0`, `Λ_n = λ_{−n−1}^−` for `n < 0`.
    pub fn big_lambda(&self, n: i64) -> Option<Complex64> {
        if n >= 0 {
            self.entries.get(n as usize).map(|e| e.lambda_plus)
        } else {
            self.entries.get((-n - 1) as usize).map(|e| e.lambda_minus)
        }
    }

    /// `(a, b, γ₁, γ₂) = (−Re λ₂⁺, Im λ₂⁺, Re λ₀⁺, Re λ₁⁺)`.
    pub fn rates(&self) -> Result<Rates> {
        let e0 = self.get(0);
        let e1 = self.get(1);
        let e2 = self.get(2);
        match (e0, e1, e2) {
            (Some(e0), Some(e1), Some(e2)) => Ok(Rates {
                a: -e2.lambda_plus.re,
                b: e2.lambda_plus.im,
                gamma1: e0.lambda_plus.re,
                gamma2: e1.lambda_plus.re,
            }),
            _ => Err(SnlsError::InvalidParams(
                "ladder must contain n = 0, 1, 2".into(),
            )),
        }
    }
}

/// Evaluates `λ_n^± = −ε(α+n²) ± 2√((n²/2+ω²−I)(3I−ω²−n²/2))` for `n = 0..=n_max`.
///
/// λ⁺ is the branch with the larger real part, and the larger imaginary part
/// when the radicand is negative.
pub fn compute_spectrum(params: &ModelParams, n_max: usize) -> Result<EigenLadder> {
    if n_max < 3 {
        return Err(SnlsError::InvalidParams(format!("n_max must be >= 3, got {n_max}")));
    }
    let saddle = compute_saddle(params)?;
    let i0 = saddle.intensity;
    let w2 = params.omega * params.omega;
    let entries = (0..=n_max)
        .map(|n| {
            let half_n2 = (n * n) as f64 / 2.0;
            let shift = -params.epsilon * (params.alpha + (n * n) as f64);
            let radicand = (half_n2 + w2 - i0) * (3.0 * i0 - w2 - half_n2);
            let root = if radicand >= 0.0 {
                Complex64::new(2.0 * radicand.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 2.0 * (-radicand).sqrt())
            };
            LadderEntry {
                n,
                lambda_plus: Complex64::new(shift, 0.0) + root,
                lambda_minus: Complex64::new(shift, 0.0) - root,
            }
        })
        .collect();
    Ok(EigenLadder { entries })
}

/// Outcome of one tolerance-guarded comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Pass,
    Fail,
    Indeterminate,
}

impl Check {
    pub fn holds(self) -> bool {
        self == Check::Pass
    }

    fn and(self, other: Check) -> Check {
        match (self, other) {
            (Check::Fail, _) | (_, Check::Fail) => Check::Fail,
            (Check::Indeterminate, _) | (_, Check::Indeterminate) => Check::Indeterminate,
            _ => Check::Pass,
        }
    }

    /// `lhs < rhs` with a margin; within `tol` the answer is indeterminate.
    fn less(lhs: f64, rhs: f64, tol: f64) -> Check {
        let gap = rhs - lhs;
        if gap.abs() < tol {
            Check::Indeterminate
        } else if gap > 0.0 {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilnikovReport {
    pub c1: Check,
    pub c2: Check,
    pub c3: Check,
    pub rates: Rates,
}

impl SilnikovReport {
    pub fn all_hold(&self) -> bool {
        self.c1.holds() && self.c2.holds() && self.c3.holds()
    }
}

/// The three ordering facts of a Silnikov saddle:
///
/// 1. only λ₀⁺ and λ₁⁺ are expanding, with `Re λ₀⁺ < Re λ₁⁺`;
/// 2. `|Re λ₂^±|` is the weakest attraction;
/// 3. `|Re λ₂⁺| < Re λ₀⁺`.
pub fn check_silnikov_conditions(ladder: &EigenLadder, tol: f64) -> Result<SilnikovReport> {
    if ladder.n_max() < 3 {
        return Err(SnlsError::InvalidParams("ladder must reach n >= 3".into()));
    }
    let rates = ladder.rates()?;
    let re0 = ladder.entries[0].lambda_plus.re;
    let re1 = ladder.entries[1].lambda_plus.re;

    // every real part except λ₀⁺, λ₁⁺
    let attracting: Vec<(usize, f64)> = ladder
        .entries
        .iter()
        .flat_map(|e| {
            let mut v = vec![(e.n, e.lambda_minus.re)];
            if e.n >= 2 {
                v.push((e.n, e.lambda_plus.re));
            }
            v
        })
        .collect();

    let mut c1 = Check::less(0.0, re0, tol)
        .and(Check::less(0.0, re1, tol))
        .and(Check::less(re0, re1, tol));
    for &(_, re) in &attracting {
        c1 = c1.and(Check::less(re, 0.0, tol));
    }

    let weakest = ladder.entries[2].lambda_plus.re.abs();
    let mut c2 = Check::less(ladder.entries[2].lambda_plus.re, 0.0, tol);
    for &(n, re) in &attracting {
        if n != 2 {
            c2 = c2.and(Check::less(weakest, re.abs(), tol));
        }
    }

    let c3 = Check::less(weakest, re0, tol);
    Ok(SilnikovReport { c1, c2, c3, rates })
}

/// Search-space truncation for the nonresonance check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonresonanceConfig {
    pub s: u32,
    pub n_max: usize,
    pub r_max: usize,
    pub l_bound: i64,
    pub budget: u128,
}

impl Default for NonresonanceConfig {
    fn default() -> Self {
        Self {
            s: 4,
            n_max: 6,
            r_max: 4,
            l_bound: 6,
            budget: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceWitness {
    pub n: usize,
    pub r: usize,
    pub indices: Vec<i64>,
    pub distance: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonresonanceReport {
    pub holds: bool,
    pub worst_margin: f64,
    pub witness: ResonanceWitness,
    pub combinations: u128,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of `(n, r, multiset)` triples the check would visit.
pub fn nonresonance_search_size(cfg: &NonresonanceConfig) -> u128 {
    let values = (2 * cfg.l_bound + 1) as u128;
    let mut total = 0u128;
    for n in 2..=cfg.n_max {
        for r in 2..=n.min(cfg.r_max) {
            total = total.saturating_add(binomial(values + r as u128 - 1, r as u128));
        }
    }
    total
}

/// Finite truncation of the Siegel-type condition
/// `|Λ_n − Σ_{j=1}^r Λ_{l_j}| ≥ 1/r^s` over `2 ≤ n ≤ n_max`,
/// `2 ≤ r ≤ min(n, r_max)` and multisets with `|l_j| ≤ l_bound`.
///
/// The witness is the first triple (in `n`, `r`, lexicographic multiset order)
/// attaining the smallest margin `|difference| − 1/r^s`.
pub fn check_nonresonance(
    ladder: &EigenLadder,
    cfg: &NonresonanceConfig,
) -> Result<NonresonanceReport> {
    if cfg.n_max < 2 || cfg.r_max < 2 || cfg.l_bound < 1 {
        return Err(SnlsError::InvalidParams(
            "nonresonance needs n_max >= 2, r_max >= 2, l_bound >= 1".into(),
        ));
    }
    let count = nonresonance_search_size(cfg);
    if count > cfg.budget {
        return Err(SnlsError::BudgetExceeded {
            count,
            budget: cfg.budget,
        });
    }
    let lo = -cfg.l_bound;
    let values: Vec<(i64, Complex64)> = (lo..=cfg.l_bound)
        .map(|l| {
            ladder.big_lambda(l).map(|v| (l, v)).ok_or_else(|| {
                SnlsError::InvalidParams(format!("ladder has no entry for Lambda_{l}"))
            })
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, ResonanceWitness)> = None;
    let mut idx = Vec::new();
    for n in 2..=cfg.n_max {
        let target = ladder.big_lambda(n as i64).ok_or_else(|| {
            SnlsError::InvalidParams(format!("ladder has no entry for Lambda_{n}"))
        })?;
        for r in 2..=n.min(cfg.r_max) {
            let threshold = 1.0 / (r as f64).powi(cfg.s as i32);
            idx.clear();
            idx.resize(r, 0usize);
            loop {
                let sum: Complex64 = idx.iter().map(|&i| values[i].1).sum();
                let distance = (target - sum).norm();
                let margin = distance - threshold;
                if best.as_ref().is_none_or(|(m, _)| margin < *m) {
                    best = Some((
                        margin,
                        ResonanceWitness {
                            n,
                            r,
                            indices: idx.iter().map(|&i| values[i].0).collect(),
                            distance,
                            threshold,
                        },
                    ));
                }
                if !next_multiset(&mut idx, values.len()) {
                    break;
                }
            }
        }
    }
    let (worst_margin, witness) = best.expect("search space is non-empty");
    Ok(NonresonanceReport {
        holds: worst_margin >= 0.0,
        worst_margin,
        witness,
        combinations: count,
    })
}

/// Advances a non-decreasing index vector; returns false once exhausted.
fn next_multiset(idx: &mut [usize], len: usize) -> bool {
    let r = idx.len();
    let mut pos = r;
    while pos > 0 {
        pos -= 1;
        if idx[pos] + 1 < len {
            let v = idx[pos] + 1;
            for slot in idx[pos..].iter_mut() {
                *slot = v;
            }
            return true;
        }
    }
    false
}
