//! Multiple-shooting Newton for orbit segments of `P` in slab chart
//! coordinates. Only forward evaluations of `P` are used: preimages are
//! found by solving for the start of a segment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::global_map::PoincareMap;
use crate::normal_form::NormalFormPoint;
use crate::{Result, SnlsError};

use super::slab::{SlabSet, UNSTABLE_DIM};

const MAX_ITER: usize = 40;
const RESIDUAL_TOL: f64 = 1e-11;
/// A stalled iteration is still accepted below this residual.
const STALL_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSolution {
    /// Chart coordinates of `q₀ .. q_{N−1}`.
    pub points: Vec<Vec<f64>>,
    /// Chart coordinates of `P(q_{N−1})`.
    pub image: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `P` in chart coordinates.
pub fn chart_map(map: &PoincareMap, slabs: &SlabSet, c: &[f64]) -> Result<Vec<f64>> {
    Ok(slabs.to_chart_extended(&map.apply(&slabs.from_chart(c))?))
}

/// `c_next − chart(img)` to first order, without taking `ln z₁` of the image.
fn mismatch(slabs: &SlabSet, img: &NormalFormPoint, c_next: &[f64], out: &mut Vec<f64>) {
    let tau = slabs.tau_of(c_next[0]);
    let z1 = slabs.eta * (-slabs.gamma1 * tau).exp();
    out.push((img.z1 - z1) / (z1 * slabs.gamma1 * (slabs.tau_hi - slabs.tau_lo)));
    out.push(c_next[1] - (slabs.gamma2 * tau).exp() * img.z2 / slabs.z2_scale());
    if c_next.len() > UNSTABLE_DIM {
        out.push(c_next[2] - (img.x - slabs.x_star) / slabs.w);
        out.extend(c_next[3..].iter().zip(&img.tail).map(|(a, b)| a - b / slabs.w));
    }
}

enum Closure<'a> {
    /// Stable coordinates of `q₀` and unstable coordinates of `P(q_{N−1})`.
    Open { stable: &'a [f64], unstable: [f64; 2] },
    Periodic,
}

struct Problem<'a> {
    map: &'a PoincareMap,
    slabs: &'a SlabSet,
    closure: Closure<'a>,
    len: usize,
}

impl Problem<'_> {
    fn image(&self, c: &[f64]) -> Result<NormalFormPoint> {
        self.map.apply(&self.slabs.from_chart(c))
    }

    /// Residual blocks: `(start, len)` offsets in the stacked vector and the
    /// chain indices each block depends on.
    fn blocks(&self, n: usize) -> Vec<(usize, usize, Vec<usize>)> {
        let mut out = Vec::new();
        let mut at = 0;
        match self.closure {
            Closure::Open { .. } => {
                out.push((at, n - UNSTABLE_DIM, vec![0]));
                at += n - UNSTABLE_DIM;
                for i in 0..self.len - 1 {
                    out.push((at, n, vec![i, i + 1]));
                    at += n;
                }
                out.push((at, UNSTABLE_DIM, vec![self.len - 1]));
            }
            Closure::Periodic => {
                for i in 0..self.len {
                    let mut deps = vec![i, (i + 1) % self.len];
                    deps.dedup();
                    out.push((at, n, deps));
                    at += n;
                }
            }
        }
        out
    }

    fn block(&self, k: usize, q: &[Vec<f64>], images: &[NormalFormPoint]) -> Vec<f64> {
        let mut r = Vec::new();
        match &self.closure {
            Closure::Open { stable, unstable } => {
                if k == 0 {
                    r.extend(q[0][UNSTABLE_DIM..].iter().zip(stable.iter()).map(|(a, b)| a - b));
                } else if k < self.len {
                    mismatch(self.slabs, &images[k - 1], &q[k], &mut r);
                } else {
                    mismatch(self.slabs, &images[self.len - 1], unstable, &mut r);
                    r.iter_mut().for_each(|v| *v = -*v);
                }
            }
            Closure::Periodic => mismatch(self.slabs, &images[k], &q[(k + 1) % self.len], &mut r),
        }
        r
    }

    fn residual(&self, q: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<NormalFormPoint>)> {
        let images = q.iter().map(|c| self.image(c)).collect::<Result<Vec<_>>>()?;
        let n = q[0].len();
        let r = (0..self.blocks(n).len()).flat_map(|k| self.block(k, q, &images)).collect();
        Ok((r, images))
    }

    fn jacobian(&self, q: &[Vec<f64>], images: &[NormalFormPoint]) -> Result<DMatrix<f64>> {
        let n = q[0].len();
        let big = n * q.len();
        let blocks = self.blocks(n);
        let mut jac = DMatrix::zeros(big, big);
        let mut probe = q.to_vec();
        let mut imgs = images.to_vec();
        for m in 0..q.len() {
            for j in 0..n {
                let h = FD_STEP * (1.0 + q[m][j].abs());
                let eval = |v: f64, probe: &mut Vec<Vec<f64>>, imgs: &mut Vec<NormalFormPoint>| -> Result<Vec<(usize, Vec<f64>)>> {
                    probe[m][j] = v;
                    imgs[m] = self.image(&probe[m])?;
                    Ok(blocks
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| b.2.contains(&m))
                        .map(|(k, b)| (b.0, self.block(k, probe, imgs)))
                        .collect())
                };
                let plus = eval(q[m][j] + h, &mut probe, &mut imgs)?;
                let minus = eval(q[m][j] - h, &mut probe, &mut imgs)?;
                probe[m][j] = q[m][j];
                imgs[m] = images[m].clone();
                for ((row, fp), (_, fm)) in plus.iter().zip(&minus) {
                    for (a, (x, y)) in fp.iter().zip(fm).enumerate() {
                        jac[(row + a, m * n + j)] = (x - y) / (2.0 * h);
                    }
                }
            }
        }
        Ok(jac)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn solve(map: &PoincareMap, slabs: &SlabSet, guesses: &[Vec<f64>], closure: Closure) -> Result<ChainSolution> {
    if guesses.is_empty() {
        return Err(SnlsError::InvalidParams("empty chain".into()));
    }
    let n = guesses[0].len();
    let mut q: Vec<Vec<f64>> = guesses.to_vec();
    if let Closure::Open { stable, .. } = &closure {
        q[0][UNSTABLE_DIM..].copy_from_slice(stable);
    }
    let problem = Problem {
        map,
        slabs,
        closure,
        len: q.len(),
    };
    let (mut r, mut images) = problem.residual(&q)?;
    let mut res = inf_norm(&r);
    let mut iterations = 0;
    while res >= RESIDUAL_TOL && iterations < MAX_ITER {
        iterations += 1;
        let jac = problem.jacobian(&q, &images)?;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SnlsError::Newton("singular shooting Jacobian".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<Vec<f64>> = q
                .iter()
                .enumerate()
                .map(|(i, c)| c.iter().enumerate().map(|(j, v)| v + lambda * delta[i * n + j]).collect())
                .collect();
            if let Ok((rt, it)) = problem.residual(&trial) {
                let nt = inf_norm(&rt);
                if nt < res {
                    q = trial;
                    r = rt;
                    images = it;
                    res = nt;
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
    if !(res < STALL_TOL) {
        return Err(SnlsError::Newton(format!(
            "shooting residual {res:e} after {iterations} iterations"
        )));
    }
    let last = images.pop().expect("non-empty chain");
    Ok(ChainSolution {
        points: q,
        image: slabs.to_chart_extended(&last),
        residual: res,
        iterations,
    })
}

/// Orbit segment `q₀ → … → q_{N−1} → P(q_{N−1})` with prescribed stable
/// chart coordinates at `q₀` and unstable ones at `P(q_{N−1})`.
pub fn solve_chain(
    map: &PoincareMap,
    slabs: &SlabSet,
    guesses: &[Vec<f64>],
    stable_bc: &[f64],
    unstable_bc: [f64; 2],
) -> Result<ChainSolution> {
    solve(
        map,
        slabs,
        guesses,
        Closure::Open {
            stable: stable_bc,
            unstable: unstable_bc,
        },
    )
}

/// Periodic orbit `q₀ → … → q_{N−1} → q₀`.
pub fn solve_periodic_chain(map: &PoincareMap, slabs: &SlabSet, guesses: &[Vec<f64>]) -> Result<ChainSolution> {
    solve(map, slabs, guesses, Closure::Periodic)
}
