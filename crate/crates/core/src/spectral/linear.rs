//! The operator `LQ = −iQ_ζζ − 2i[(2|Q_ε|² − ω²)Q + Q_ε² Q̄] + ε(−αQ + Q_ζζ)`
//! linearising the flow at the saddle, and the eigen-frame built from it.

use num_complex::Complex64;

use super::FieldState;
use crate::normal_form::NormalFormPoint;
use crate::params::{compute_saddle, ModelParams};
use crate::{Result, SnlsError};

fn mode_coefficients(params: &ModelParams, q_eps: Complex64, n: usize) -> (Complex64, Complex64) {
    let i0 = q_eps.norm_sqr();
    let n2 = (n * n) as f64;
    let w2 = params.omega * params.omega;
    let direct = Complex64::new(
        -params.epsilon * (params.alpha + n2),
        n2 - 2.0 * (2.0 * i0 - w2),
    );
    let conjugate = Complex64::new(0.0, -2.0) * q_eps * q_eps;
    (direct, conjugate)
}

/// Applies `L` mode by mode; it couples each `Q_n` with its conjugate.
pub fn apply_l(state: &FieldState, params: &ModelParams) -> Result<FieldState> {
    let q_eps = compute_saddle(params)?.q_value;
    let modes = state
        .modes
        .iter()
        .enumerate()
        .map(|(n, &q)| {
            let (direct, conjugate) = mode_coefficients(params, q_eps, n);
            direct * q + conjugate * q.conj()
        })
        .collect();
    Ok(FieldState {
        modes,
        time: state.time,
    })
}

/// Real 2×2 block of `L` on `(Re Q_n, Im Q_n)`, row-major.
pub fn mode_block(params: &ModelParams, n: usize) -> Result<[[f64; 2]; 2]> {
    let q_eps = compute_saddle(params)?.q_value;
    let (direct, conjugate) = mode_coefficients(params, q_eps, n);
    let col0 = direct + conjugate;
    let col1 = Complex64::new(0.0, 1.0) * (direct - conjugate);
    Ok([[col0.re, col1.re], [col0.im, col1.im]])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeBasis {
    /// Two real eigenvalues; columns are the eigenvectors for (larger, smaller).
    Node {
        rates: [f64; 2],
        basis: [[f64; 2]; 2],
    },
    /// Complex pair `μ ± iν`; in the columns `(Re v, −Im v)` the block acts as
    /// `ẋ = μx − νy, ẏ = νx + μy`.
    Focus {
        decay: f64,
        freq: f64,
        basis: [[f64; 2]; 2],
    },
}

impl ModeBasis {
    fn basis(&self) -> &[[f64; 2]; 2] {
        match self {
            ModeBasis::Node { basis, .. } | ModeBasis::Focus { basis, .. } => basis,
        }
    }

    fn coordinates(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.basis();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (m[1][1] * v[0] - m[0][1] * v[1]) / det,
            (-m[1][0] * v[0] + m[0][0] * v[1]) / det,
        ]
    }

    fn vector(&self, c: [f64; 2]) -> [f64; 2] {
        let m = self.basis();
        [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]]
    }
}

fn decompose(block: [[f64; 2]; 2], n: usize) -> Result<ModeBasis> {
    let [[m00, m01], [m10, m11]] = block;
    let half_tr = 0.5 * (m00 + m11);
    let det = m00 * m11 - m01 * m10;
    let disc = half_tr * half_tr - det;
    let scale = [m00, m01, m10, m11].iter().fold(1e-300, |m, v| v.abs().max(m));
    if disc.abs() <= 1e-14 * scale * scale {
        return Err(SnlsError::InvalidParams(format!(
            "mode {n}: repeated eigenvalue, no eigen-frame (is epsilon > 0?)"
        )));
    }
    let eigvec = |lam: f64| -> [f64; 2] {
        let a = [m01, lam - m00];
        let b = [lam - m11, m10];
        let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
        let norm = v[0].hypot(v[1]);
        [v[0] / norm, v[1] / norm]
    };
    if disc > 0.0 {
        let root = disc.sqrt();
        let (hi, lo) = (half_tr + root, half_tr - root);
        let (vp, vm) = (eigvec(hi), eigvec(lo));
        Ok(ModeBasis::Node {
            rates: [hi, lo],
            basis: [[vp[0], vm[0]], [vp[1], vm[1]]],
        })
    } else {
        let freq = (-disc).sqrt();
        // v = (m01, λ − m00) with λ = μ + iν
        let (p, r) = if m01.abs() > 0.0 {
            ([m01, half_tr - m00], [0.0, freq])
        } else {
            ([half_tr - m11, m10], [freq, 0.0])
        };
        let norm = p[0].hypot(p[1]).hypot(r[0].hypot(r[1]));
        Ok(ModeBasis::Focus {
            decay: half_tr,
            freq,
            basis: [[p[0] / norm, -r[0] / norm], [p[1] / norm, -r[1] / norm]],
        })
    }
}

/// Eigen-coordinates of the linearisation at the saddle:
/// `z₁`/`z₂` are the λ₀⁺/λ₁⁺ directions, `(x, y)` the mode-2 focus, and the
/// tail collects `(λ₀⁻, λ₁⁻)` followed by one focus pair per mode `n ≥ 3`.
#[derive(Debug, Clone)]
pub struct ModalFrame {
    pub saddle: Complex64,
    pub modes: Vec<ModeBasis>,
}

impl ModalFrame {
    pub fn new(params: &ModelParams, mode_count: usize) -> Result<Self> {
        if mode_count < 3 {
            return Err(SnlsError::InvalidParams("frame needs at least 3 modes".into()));
        }
        let saddle = compute_saddle(params)?.q_value;
        let modes = (0..mode_count)
            .map(|n| decompose(mode_block(params, n)?, n))
            .collect::<Result<Vec<_>>>()?;
        for (n, m) in modes.iter().enumerate() {
            let ok = match m {
                ModeBasis::Node { .. } => n < 2,
                ModeBasis::Focus { .. } => n >= 2,
            };
            if !ok {
                return Err(SnlsError::InvalidParams(format!(
                    "mode {n} has an unexpected eigen-structure for a Silnikov saddle"
                )));
            }
        }
        Ok(Self { saddle, modes })
    }

    pub fn tail_len(&self) -> usize {
        2 * (self.modes.len() - 2)
    }

    /// Coordinates of `state − Q_ε`.
    pub fn project(&self, state: &FieldState) -> NormalFormPoint {
        let dev = |n: usize| {
            let c = state.modes.get(n).copied().unwrap_or_default()
                - if n == 0 { self.saddle } else { Complex64::default() };
            [c.re, c.im]
        };
        let m0 = self.modes[0].coordinates(dev(0));
        let m1 = self.modes[1].coordinates(dev(1));
        let m2 = self.modes[2].coordinates(dev(2));
        let mut tail = vec![m0[1], m1[1]];
        for n in 3..self.modes.len() {
            tail.extend_from_slice(&self.modes[n].coordinates(dev(n)));
        }
        NormalFormPoint {
            x: m2[0],
            y: m2[1],
            z1: m0[0],
            z2: m1[0],
            tail,
        }
    }

    /// Field `Q_ε + Σ coordinates · eigenvectors`; inverse of [`project`](Self::project).
    pub fn synthesize(&self, p: &NormalFormPoint) -> FieldState {
        let mut state = FieldState::zeros(self.modes.len());
        let put = |c: [f64; 2]| Complex64::new(c[0], c[1]);
        let tail = |i: usize| p.tail.get(i).copied().unwrap_or(0.0);
        state.modes[0] = self.saddle + put(self.modes[0].vector([p.z1, tail(0)]));
        state.modes[1] = put(self.modes[1].vector([p.z2, tail(1)]));
        state.modes[2] = put(self.modes[2].vector([p.x, p.y]));
        for n in 3..self.modes.len() {
            let k = 2 * (n - 2);
            state.modes[n] = put(self.modes[n].vector([tail(k), tail(k + 1)]));
        }
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        let p = ModelParams::new(1.0, 2.0, 0.8, 0.01).unwrap();
        let z = apply_l(&FieldState::zeros(16), &p).unwrap();
        assert_eq!(z.max_mode(), 0.0);
    }

    #[test]
    fn frame_round_trip() {
        let p = ModelParams::new(1.0, 2.0, 0.8, 0.01).unwrap();
        let frame = ModalFrame::new(&p, 8).unwrap();
        let point = NormalFormPoint {
            x: 0.1,
            y: -0.2,
            z1: 0.05,
            z2: 0.3,
            tail: (0..frame.tail_len()).map(|i| 0.01 * i as f64).collect(),
        };
        let back = frame.project(&frame.synthesize(&point));
        assert!((back.x - point.x).abs() < 1e-13);
        assert!((back.y - point.y).abs() < 1e-13);
        assert!((back.z1 - point.z1).abs() < 1e-13);
        assert!((back.z2 - point.z2).abs() < 1e-13);
        for (a, b) in back.tail.iter().zip(&point.tail) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn frame_needs_damping() {
        let p = ModelParams::new(1.0, 2.0, 0.8, 0.0).unwrap();
        assert!(ModalFrame::new(&p, 8).is_err());
    }

    #[test]
    fn focus_basis_gives_rotation_form() {
        let p = ModelParams::new(1.0, 2.0, 0.8, 0.01).unwrap();
        let block = mode_block(&p, 2).unwrap();
        let ModeBasis::Focus { decay, freq, basis } = decompose(block, 2).unwrap() else {
            panic!("mode 2 should be a focus");
        };
        // L·(x-column) = μ·(x-column) + ν·(y-column)
        let col = |j: usize| [basis[0][j], basis[1][j]];
        let lx = [
            block[0][0] * col(0)[0] + block[0][1] * col(0)[1],
            block[1][0] * col(0)[0] + block[1][1] * col(0)[1],
        ];
        for i in 0..2 {
            assert!((lx[i] - (decay * col(0)[i] + freq * col(1)[i])).abs() < 1e-12);
        }
    }
}
