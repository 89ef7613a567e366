//! Pseudo-spectral integration of the even, 2π-periodic NLS in a cosine basis.
//!
//! A field is stored as `q(ζ) = Σ_{k<K} c_k cos kζ`, so evenness and
//! periodicity hold by construction. Written in mode space the equation is
//!
//! ```text
//! ċ_k = [i k² + 2iω² − ε(α + k²)] c_k + P_k(−2i|q|² q) + εβ δ_{k0}
//! ```
//!
//! The diagonal linear part, which carries the stiff `ε∂²_ζ` term, is
//! integrated exactly. The cubic term is evaluated on a physical grid.

mod io;
mod linear;
mod tangency;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use io::{read_snapshot, write_snapshot, write_trajectory_csv, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use linear::{apply_l, mode_block, ModalFrame, ModeBasis};
pub use tangency::{tangency_angle, tangency_diagnostic, TangencyReport, TangencySample};

use crate::params::{compute_saddle, ModelParams};
use crate::{Result, SnlsError};

/// Even, 2π-periodic complex field in cosine-mode coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub modes: Vec<Complex64>,
    pub time: f64,
}

impl FieldState {
    pub fn zeros(k: usize) -> Self {
        Self {
            modes: vec![Complex64::new(0.0, 0.0); k],
            time: 0.0,
        }
    }

    /// Spatially constant field.
    pub fn constant(k: usize, value: Complex64) -> Self {
        let mut s = Self::zeros(k);
        s.modes[0] = value;
        s
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Point evaluation `q(ζ)`.
    pub fn eval(&self, zeta: f64) -> Complex64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 * zeta).cos())
            .sum()
    }

    /// `∫₀^{2π} |q|² dζ` from the cosine coefficients.
    pub fn mass(&self) -> f64 {
        let tail: f64 = self.modes.iter().skip(1).map(|c| c.norm_sqr()).sum();
        2.0 * PI * (self.modes[0].norm_sqr() + 0.5 * tail)
    }

    pub fn max_mode(&self) -> f64 {
        self.modes.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Copy with `K` modes, truncating or zero-padding.
    pub fn resized(&self, k: usize) -> Self {
        let mut modes = self.modes.clone();
        modes.resize(k, Complex64::new(0.0, 0.0));
        Self {
            modes,
            time: self.time,
        }
    }

    pub fn distance(&self, other: &FieldState) -> f64 {
        let n = self.modes.len().max(other.modes.len());
        let zero = Complex64::new(0.0, 0.0);
        (0..n)
            .map(|k| {
                let a = self.modes.get(k).copied().unwrap_or(zero);
                let b = other.modes.get(k).copied().unwrap_or(zero);
                (a - b).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Half-period shift `q(·) ↦ q(· + π)`: mode `k` picks up `(−1)^k`.
pub fn shift_half_period(state: &FieldState) -> FieldState {
    FieldState {
        modes: state
            .modes
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
            .collect(),
        time: state.time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Fourth-order exponential time differencing Runge–Kutta.
    Etdrk4,
    /// Strang splitting of the exact linear, cubic and forcing flows.
    SplitStep,
}

impl std::str::FromStr for Scheme {
    type Err = SnlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "etdrk4" => Ok(Scheme::Etdrk4),
            "split-step" => Ok(Scheme::SplitStep),
            other => Err(SnlsError::InvalidParams(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub blowup_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            modes: 64,
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::Etdrk4,
            dealias: true,
            blowup_bound: 1e3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modes < 16 || !self.modes.is_power_of_two() {
            return Err(SnlsError::InvalidParams(format!(
                "mode count must be a power of two >= 16, got {}",
                self.modes
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SnlsError::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Cosine-mode ↔ physical-grid transform.
///
/// With dealiasing the grid holds `4K` points, enough that the cubic product
/// of `K` retained modes does not alias back onto them.
pub struct Transform {
    modes: usize,
    grid: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(modes: usize, dealias: bool) -> Self {
        let grid = if dealias { 4 * modes } else { 2 * modes };
        let mut planner = FftPlanner::new();
        Self {
            modes,
            grid,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.grid
    }

    /// Samples `q(2πj/N)`, `j = 0..N`.
    pub fn to_physical(&self, modes: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid];
        buf[0] = modes[0];
        for k in 1..self.modes {
            let half = 0.5 * modes[k];
            buf[k] = half;
            buf[self.grid - k] = half;
        }
        self.inverse.process(&mut buf);
        buf
    }

    /// Projects grid samples of an even function back onto the cosine modes.
    pub fn to_modes(&self, mut samples: Vec<Complex64>) -> Vec<Complex64> {
        self.forward.process(&mut samples);
        let scale = 1.0 / self.grid as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.modes];
        out[0] = samples[0] * scale;
        for k in 1..self.modes {
            out[k] = (samples[k] + samples[self.grid - k]) * scale;
        }
        out
    }
}

/// Diagonal linear symbol `i k² + 2iω² − ε(α + k²)`.
pub fn linear_symbol(params: &ModelParams, k: usize) -> Complex64 {
    let k2 = (k * k) as f64;
    Complex64::new(
        -params.epsilon * (params.alpha + k2),
        k2 + 2.0 * params.omega * params.omega,
    )
}

fn nonlinear_term(tr: &Transform, params: &ModelParams, modes: &[Complex64]) -> Vec<Complex64> {
    let phys = tr.to_physical(modes);
    let cubic: Vec<Complex64> = phys
        .iter()
        .map(|q| Complex64::new(0.0, -2.0) * q.norm_sqr() * q)
        .collect();
    let mut out = tr.to_modes(cubic);
    out[0] += params.epsilon * params.beta;
    out
}

/// `q_t = −i q_ζζ − 2i(|q|² − ω²) q + ε(q_ζζ − α q + β)` in mode space.
pub fn rhs(state: &FieldState, params: &ModelParams, dealias: bool) -> FieldState {
    let tr = Transform::new(state.mode_count(), dealias);
    let mut out = nonlinear_term(&tr, params, &state.modes);
    for (k, (o, c)) in out.iter_mut().zip(&state.modes).enumerate() {
        *o += linear_symbol(params, k) * c;
    }
    FieldState {
        modes: out,
        time: state.time,
    }
}

struct EtdCoefficients {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl EtdCoefficients {
    /// φ-function combinations by contour averaging over a unit circle
    /// around each `hL`, which avoids cancellation near `hL = 0`.
    fn new(params: &ModelParams, modes: usize, h: f64) -> Self {
        const M: usize = 32;
        let roots: Vec<Complex64> = (0..M)
            .map(|j| Complex64::from_polar(1.0, PI * (j as f64 + 0.5) / M as f64 * 2.0))
            .collect();
        let mut c = Self {
            e: Vec::with_capacity(modes),
            e2: Vec::with_capacity(modes),
            q: Vec::with_capacity(modes),
            f1: Vec::with_capacity(modes),
            f2: Vec::with_capacity(modes),
            f3: Vec::with_capacity(modes),
        };
        for k in 0..modes {
            let hl = h * linear_symbol(params, k);
            c.e.push(hl.exp());
            c.e2.push((0.5 * hl).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for root in &roots {
                let r = hl + root;
                let er = r.exp();
                let r3 = r * r * r;
                q += ((0.5 * r).exp() - 1.0) / r;
                f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                f2 += (2.0 + r + er * (r - 2.0)) / r3;
                f3 += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
            }
            let scale = h / M as f64;
            c.q.push(q * scale);
            c.f1.push(f1 * scale);
            c.f2.push(f2 * scale);
            c.f3.push(f3 * scale);
        }
        c
    }
}

fn etdrk4_step(
    tr: &Transform,
    params: &ModelParams,
    co: &EtdCoefficients,
    v: &mut [Complex64],
) {
    let n_u = nonlinear_term(tr, params, v);
    let a: Vec<Complex64> = (0..v.len()).map(|k| co.e2[k] * v[k] + co.q[k] * n_u[k]).collect();
    let n_a = nonlinear_term(tr, params, &a);
    let b: Vec<Complex64> = (0..v.len()).map(|k| co.e2[k] * v[k] + co.q[k] * n_a[k]).collect();
    let n_b = nonlinear_term(tr, params, &b);
    let c: Vec<Complex64> = (0..v.len())
        .map(|k| co.e2[k] * a[k] + co.q[k] * (2.0 * n_b[k] - n_u[k]))
        .collect();
    let n_c = nonlinear_term(tr, params, &c);
    for k in 0..v.len() {
        v[k] = co.e[k] * v[k]
            + n_u[k] * co.f1[k]
            + 2.0 * (n_a[k] + n_b[k]) * co.f2[k]
            + n_c[k] * co.f3[k];
    }
}

fn split_step(
    tr: &Transform,
    params: &ModelParams,
    half_linear: &[Complex64],
    h: f64,
    v: &mut [Complex64],
) {
    let forcing = 0.5 * h * params.epsilon * params.beta;
    for (c, e) in v.iter_mut().zip(half_linear) {
        *c *= e;
    }
    v[0] += forcing;
    let phys: Vec<Complex64> = tr
        .to_physical(v)
        .into_iter()
        .map(|q| q * Complex64::new(0.0, -2.0 * h * q.norm_sqr()).exp())
        .collect();
    v.copy_from_slice(&tr.to_modes(phys));
    v[0] += forcing;
    for (c, e) in v.iter_mut().zip(half_linear) {
        *c *= e;
    }
}

/// Advances `state` to `config.t_end` with a uniform step no larger than `dt`.
///
/// Only forward time is supported; the damped flow is a semigroup.
pub fn evolve(state: &FieldState, params: &ModelParams, config: &SolverConfig) -> Result<FieldState> {
    evolve_with(state, params, config, |_| {})
}

/// [`evolve`] with a callback invoked on every accepted step (and the start).
pub fn evolve_with<F>(
    state: &FieldState,
    params: &ModelParams,
    config: &SolverConfig,
    mut observer: F,
) -> Result<FieldState>
where
    F: FnMut(&FieldState),
{
    config.validate()?;
    params.validate()?;
    if state.mode_count() != config.modes {
        return Err(SnlsError::InvalidParams(format!(
            "state has {} modes, config expects {}",
            state.mode_count(),
            config.modes
        )));
    }
    let span = config.t_end - state.time;
    if span < 0.0 {
        return Err(SnlsError::InvalidParams(format!(
            "t_end = {} precedes state time {}; backward integration is not defined",
            config.t_end, state.time
        )));
    }
    observer(state);
    if span == 0.0 {
        return Ok(state.clone());
    }
    let steps = (span / config.dt - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let tr = Transform::new(config.modes, config.dealias);
    let mut v = state.modes.clone();
    let mut current = state.clone();

    match config.scheme {
        Scheme::Etdrk4 => {
            let co = EtdCoefficients::new(params, config.modes, h);
            for step in 1..=steps {
                etdrk4_step(&tr, params, &co, &mut v);
                current = checked(&v, state.time + step as f64 * h, config)?;
                observer(&current);
            }
        }
        Scheme::SplitStep => {
            let half: Vec<Complex64> = (0..config.modes)
                .map(|k| (0.5 * h * linear_symbol(params, k)).exp())
                .collect();
            for step in 1..=steps {
                split_step(&tr, params, &half, h, &mut v);
                current = checked(&v, state.time + step as f64 * h, config)?;
                observer(&current);
            }
        }
    }
    current.time = config.t_end;
    Ok(current)
}

fn checked(v: &[Complex64], time: f64, config: &SolverConfig) -> Result<FieldState> {
    let max_mode = v.iter().fold(0.0f64, |m, c| {
        if c.re.is_finite() && c.im.is_finite() {
            m.max(c.norm())
        } else {
            f64::INFINITY
        }
    });
    if max_mode > config.blowup_bound {
        return Err(SnlsError::Blowup {
            time,
            max_mode,
            bound: config.blowup_bound,
        });
    }
    Ok(FieldState {
        modes: v.to_vec(),
        time,
    })
}

/// The saddle as a constant field with `k` modes.
pub fn saddle_field(params: &ModelParams, k: usize) -> Result<FieldState> {
    Ok(FieldState::constant(k, compute_saddle(params)?.q_value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> ModelParams {
        ModelParams::new(1.0, 2.0, 0.8, eps).unwrap()
    }

    fn smooth_state(k: usize) -> FieldState {
        let mut s = FieldState::zeros(k);
        for (n, c) in s.modes.iter_mut().enumerate().take(12) {
            let decay = (-(n as f64)).exp();
            *c = Complex64::new(0.3 * decay * (1.0 + 0.2 * n as f64).cos(), 0.2 * decay * (0.7 * n as f64).sin());
        }
        s.modes[0] += Complex64::new(0.6, 0.1);
        s
    }

    #[test]
    fn transform_round_trip() {
        let s = smooth_state(32);
        for dealias in [false, true] {
            let tr = Transform::new(32, dealias);
            let phys = tr.to_physical(&s.modes);
            let back = tr.to_modes(phys.clone());
            for (a, b) in back.iter().zip(&s.modes) {
                assert!((a - b).norm() < 1e-14);
            }
            // grid value matches point evaluation
            let z = 2.0 * PI * 3.0 / tr.grid_len() as f64;
            assert!((phys[3] - s.eval(z)).norm() < 1e-13);
        }
    }

    #[test]
    fn rhs_circle_of_equilibria() {
        let p = params(0.0);
        let s = FieldState::constant(16, Complex64::new(0.8, 0.0));
        assert!(rhs(&s, &p, true).max_mode() < 1e-14);
    }

    #[test]
    fn rhs_forcing_only() {
        let p = params(0.01);
        let s = FieldState::zeros(16);
        let d = rhs(&s, &p, true);
        assert!((d.modes[0] - Complex64::new(0.02, 0.0)).norm() < 1e-16);
        assert!(d.modes[1..].iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rhs_at_saddle_is_second_order() {
        // the first-order saddle leaves an O(ε²) residual
        let r = |eps: f64| {
            let p = params(eps);
            rhs(&saddle_field(&p, 16).unwrap(), &p, true).max_mode()
        };
        assert!(r(0.0) < 1e-12);
        let ratio = r(1e-3) / r(1e-4);
        assert!((ratio - 100.0).abs() < 5.0, "ratio {ratio}");
    }

    #[test]
    fn shift_is_involution() {
        let s = smooth_state(16);
        assert_eq!(shift_half_period(&shift_half_period(&s)), s);
        let c = FieldState::constant(16, Complex64::new(0.3, 0.4));
        assert_eq!(shift_half_period(&c), c);
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let s = smooth_state(16);
        let cfg = SolverConfig {
            modes: 16,
            t_end: 0.0,
            ..Default::default()
        };
        assert_eq!(evolve(&s, &params(0.01), &cfg).unwrap(), s);
    }

    #[test]
    fn evolve_rejects_backward_time() {
        let mut s = smooth_state(16);
        s.time = 1.0;
        let cfg = SolverConfig {
            modes: 16,
            t_end: 0.5,
            ..Default::default()
        };
        assert!(evolve(&s, &params(0.01), &cfg).is_err());
    }

    #[test]
    fn blowup_guard_trips() {
        let s = FieldState::constant(16, Complex64::new(5.0, 0.0));
        let cfg = SolverConfig {
            modes: 16,
            t_end: 0.1,
            blowup_bound: 4.0,
            ..Default::default()
        };
        assert!(matches!(
            evolve(&s, &params(0.01), &cfg),
            Err(SnlsError::Blowup { .. })
        ));
    }

    #[test]
    fn schemes_agree() {
        let p = params(0.01);
        let s = smooth_state(32);
        let mut cfg = SolverConfig {
            modes: 32,
            dt: 1e-3,
            t_end: 0.5,
            ..Default::default()
        };
        let a = evolve(&s, &p, &cfg).unwrap();
        cfg.scheme = Scheme::SplitStep;
        let b = evolve(&s, &p, &cfg).unwrap();
        assert!(a.distance(&b) < 1e-5, "{}", a.distance(&b));
    }

    #[test]
    fn split_step_is_second_order() {
        let p = params(0.01);
        let s = smooth_state(32);
        let run = |scheme, dt| {
            let cfg = SolverConfig {
                modes: 32,
                dt,
                t_end: 0.5,
                scheme,
                ..Default::default()
            };
            evolve(&s, &p, &cfg).unwrap()
        };
        let reference = run(Scheme::Etdrk4, 1e-3);
        let e1 = run(Scheme::SplitStep, 1e-2).distance(&reference);
        let e2 = run(Scheme::SplitStep, 5e-3).distance(&reference);
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "observed order {order}");
    }

    #[test]
    fn etdrk4_is_fourth_order() {
        let p = params(0.01);
        let s = smooth_state(32);
        let run = |dt| {
            let cfg = SolverConfig {
                modes: 32,
                dt,
                t_end: 0.5,
                ..Default::default()
            };
            evolve(&s, &p, &cfg).unwrap()
        };
        let reference = run(2.5e-3);
        let e1 = run(0.05).distance(&reference);
        let e2 = run(0.025).distance(&reference);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed order {order}");
    }
}
