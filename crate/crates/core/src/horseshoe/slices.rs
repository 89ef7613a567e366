//! Unstable slices `H_j ⊂ S_l ∪ σ(S_l)` mapping across `Ŝ_l`, and their
//! images, the stable slices `V_j = P(H_j)`.
//!
//! Each `H_j` is located by bracketing sign changes over an `n × n` grid of
//! the source slab's expanding coordinates, then polished by Newton. Its
//! extent is sampled by shooting from stable-boundary samples to targets on
//! the boundary of `Ŝ_l`'s expanding box.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::global_map::PoincareMap;
use crate::numeric::{newton, NewtonConfig};
use crate::{Result, SnlsError};

use super::chain::{chart_map, solve_chain, ChainSolution};
use super::family::FixedPointFamily;
use super::slab::{build_slabs, SlabKind, SlabSet, UNSTABLE_DIM};
use super::symbols::Symbol;

/// Two roots closer than this (in chart units) are the same slice.
const ROOT_MERGE: f64 = 1e-8;
/// Stable images must stay this far inside the stable box.
const INTERIOR_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceInfo {
    pub label: Symbol,
    /// Chart point of `H_j` at the stable center mapping to the center of `Ŝ_l`.
    pub core: Vec<f64>,
    /// Bounding box of `H_j` in `(u₁, u₂)`.
    pub h_box: [[f64; 2]; 2],
    /// Bounding box of `V_j` in each stable chart coordinate.
    pub v_box: Vec<[f64; 2]>,
    /// Boundary samples of `H_j` (chart coordinates).
    pub h_samples: Vec<Vec<f64>>,
    /// Their images, boundary samples of `V_j`.
    pub v_samples: Vec<Vec<f64>>,
    /// Largest shooting residual over the samples.
    pub max_residual: f64,
}

impl SliceInfo {
    pub fn h_diameter(&self) -> f64 {
        self.h_box.iter().map(|r| (r[1] - r[0]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn v_diameter(&self) -> f64 {
        self.v_box.iter().map(|r| (r[1] - r[0]).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFamily {
    pub slabs: SlabSet,
    /// Ordered as [`Symbol::ALL`].
    pub slices: Vec<SliceInfo>,
    pub grid: usize,
    pub tail_len: usize,
    /// Roots found per source slab before labelling.
    pub roots_found: [usize; 2],
    /// Every `H_j` lies strictly inside its source slab.
    pub h_inside: bool,
    /// Every `V_j` avoids the stable boundary of `Ŝ_l`.
    pub v_interior: bool,
    pub h_disjoint: bool,
    pub v_disjoint: bool,
    /// `max_j ‖σ(core_j) − core_{−j}‖`.
    pub symmetry_defect: f64,
}

impl SliceFamily {
    pub fn slice(&self, s: Symbol) -> &SliceInfo {
        &self.slices[s.index()]
    }

    pub fn is_valid(&self) -> bool {
        self.roots_found == [2, 2] && self.h_inside && self.v_interior && self.h_disjoint && self.v_disjoint
    }

    /// Initial guesses for a chain through `H_{s₀}, H_{s₁}, …`.
    pub fn chain_guesses(&self, map: &PoincareMap, symbols: &[Symbol], stable_bc: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            let mut g = self.slice(*s).core.clone();
            if i == 0 {
                g[UNSTABLE_DIM..].copy_from_slice(stable_bc);
            } else if let Ok(img) = chart_map(map, &self.slabs, &out[i - 1]) {
                g[UNSTABLE_DIM..].copy_from_slice(&img[UNSTABLE_DIM..]);
            }
            out.push(g);
        }
        out
    }

    /// Whether the expanding coordinates of `c` fall in `H_s` (box test).
    pub fn in_h(&self, s: Symbol, c: &[f64], tol: f64) -> bool {
        let b = &self.slice(s).h_box;
        (0..UNSTABLE_DIM).all(|j| c[j] >= b[j][0] - tol && c[j] <= b[j][1] + tol)
    }
}

/// Targets on the boundary of `Ŝ_l`'s expanding box plus its center.
pub fn unstable_targets() -> Vec<[f64; 2]> {
    vec![
        [0.5, 0.0],
        [0.0, -1.0],
        [0.5, -1.0],
        [1.0, -1.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.5, 1.0],
        [0.0, 1.0],
        [0.0, 0.0],
    ]
}

fn boxes_disjoint(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
    a.iter().zip(b).any(|(x, y)| x[1] < y[0] || y[1] < x[0])
}

fn bounding_box(points: &[Vec<f64>], range: std::ops::Range<usize>) -> Vec<[f64; 2]> {
    range
        .map(|j| {
            points.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |acc, p| {
                [acc[0].min(p[j]), acc[1].max(p[j])]
            })
        })
        .collect()
}

/// Roots of `P(c) = center of Ŝ_l` over the expanding box of one source slab.
fn find_roots(map: &PoincareMap, slabs: &SlabSet, kind: SlabKind, grid: usize, tail_len: usize) -> Vec<Vec<f64>> {
    let [u2_lo, u2_hi] = slabs.u2_range(kind);
    let tau_mid = slabs.tau_of(0.5);
    let z1_mid = slabs.eta * (-slabs.gamma1 * tau_mid).exp();
    let z2_scale = (slabs.gamma2 * tau_mid).exp() / (slabs.z2_star.abs() + slabs.w);
    let point = |u1: f64, u2: f64| {
        let mut c = vec![0.0; UNSTABLE_DIM + 1 + tail_len];
        c[0] = u1;
        c[1] = u2;
        c
    };
    // Raw mismatch: defined even where the image has z₁ ≤ 0.
    let mismatch = |u: &[f64]| -> Result<Vec<f64>> {
        let img = map.apply(&slabs.from_chart(&point(u[0], u[1])))?;
        Ok(vec![(img.z1 - z1_mid) / z1_mid, img.z2 * z2_scale])
    };
    let node = |i: usize, j: usize| {
        let u1 = i as f64 / grid as f64;
        let u2 = u2_lo + (u2_hi - u2_lo) * j as f64 / grid as f64;
        mismatch(&[u1, u2]).ok()
    };
    let values: Vec<Vec<Option<Vec<f64>>>> = (0..=grid).map(|i| (0..=grid).map(|j| node(i, j)).collect()).collect();
    let cfg = NewtonConfig {
        residual_tol: 1e-12,
        fd_step: 1e-9,
        ..Default::default()
    };
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let corners = [&values[i][j], &values[i + 1][j], &values[i][j + 1], &values[i + 1][j + 1]];
            if corners.iter().any(|c| c.is_none()) {
                continue;
            }
            let changes = |k: usize| {
                let signs: Vec<bool> = corners.iter().map(|c| c.as_ref().unwrap()[k] > 0.0).collect();
                signs.iter().any(|s| *s) && signs.iter().any(|s| !*s)
            };
            if !(changes(0) && changes(1)) {
                continue;
            }
            let start = [
                (i as f64 + 0.5) / grid as f64,
                u2_lo + (u2_hi - u2_lo) * (j as f64 + 0.5) / grid as f64,
            ];
            let Ok(sol) = newton(&mismatch, &start, &cfg) else {
                continue;
            };
            let u = &sol.x;
            let inside = u[0] > 0.0 && u[0] < 1.0 && u[1] > u2_lo && u[1] < u2_hi;
            if inside && !roots.iter().any(|r| (r[0] - u[0]).hypot(r[1] - u[1]) < ROOT_MERGE) {
                roots.push(point(u[0], u[1]));
            }
        }
    }
    roots.sort_by(|a, b| a[0].total_cmp(&b[0]));
    roots
}

/// Chain from stable data `stable` to `target`, continuing in the stable
/// boundary data from the start of `from` when the direct solve fails.
pub(crate) fn shoot(
    map: &PoincareMap,
    slabs: &SlabSet,
    from: &[Vec<f64>],
    stable: &[f64],
    target: [f64; 2],
) -> Result<ChainSolution> {
    let direct = solve_chain(map, slabs, from, stable, target);
    if direct.is_ok() {
        return direct;
    }
    let start = from[0][UNSTABLE_DIM..].to_vec();
    let mut last = direct;
    'refine: for steps in [4, 16, 64] {
        let mut guess = from.to_vec();
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let bc: Vec<f64> = start.iter().zip(stable).map(|(a, b)| a + t * (b - a)).collect();
            match solve_chain(map, slabs, &guess, &bc, target) {
                Ok(sol) if k == steps => return Ok(sol),
                Ok(sol) => guess = sol.points,
                Err(e) => {
                    last = Err(e);
                    continue 'refine;
                }
            }
        }
    }
    last
}

fn sample_slice(map: &PoincareMap, slabs: &SlabSet, label: Symbol, core: Vec<f64>, tail_len: usize) -> Result<SliceInfo> {
    let mut h_samples = Vec::new();
    let mut v_samples = Vec::new();
    let mut max_residual: f64 = 0.0;
    let fail = |what: String, e: SnlsError| SnlsError::Slices(format!("slice {label}: no preimage of {what}: {e}"));
    let stables = slabs.stable_samples(tail_len);
    for target in unstable_targets() {
        let center = shoot(map, slabs, &[core.clone()], &stables[0], target)
            .map_err(|e| fail(format!("target {target:?}"), e))?;
        for stable in &stables {
            let sol = shoot(map, slabs, &center.points, stable, target)
                .map_err(|e| fail(format!("target {target:?} from stable sample {stable:?}"), e))?;
            max_residual = max_residual.max(sol.residual);
            h_samples.push(sol.points[0].clone());
            v_samples.push(sol.image);
        }
    }
    let hb = bounding_box(&h_samples, 0..UNSTABLE_DIM);
    Ok(SliceInfo {
        label,
        core,
        h_box: [hb[0], hb[1]],
        v_box: bounding_box(&v_samples, UNSTABLE_DIM..UNSTABLE_DIM + 1 + tail_len),
        h_samples,
        v_samples,
        max_residual,
    })
}

/// The four slices of `Ŝ_l`, labelled by increasing flight time: `1, 2` from
/// `S_l` and `−1, −2` from its mirror.
pub fn compute_slices(map: &PoincareMap, slabs: &SlabSet, grid: usize) -> Result<SliceFamily> {
    if grid < 4 {
        return Err(SnlsError::InvalidParams(format!("grid must be >= 4, got {grid}")));
    }
    let tail_len = map.rates.tail_len();
    let direct = find_roots(map, slabs, SlabKind::Direct, grid, tail_len);
    let mirrored = find_roots(map, slabs, SlabKind::Mirrored, grid, tail_len);
    let roots_found = [direct.len(), mirrored.len()];
    if roots_found != [2, 2] {
        return Err(SnlsError::Slices(format!(
            "slab {}: expected 2 + 2 slice cores, found {} + {} on a {grid}x{grid} grid",
            slabs.l, roots_found[0], roots_found[1]
        )));
    }
    let cores = direct.into_iter().chain(mirrored);
    let slices = Symbol::ALL
        .iter()
        .zip(cores)
        .map(|(s, core)| sample_slice(map, slabs, *s, core, tail_len))
        .collect::<Result<Vec<_>>>()?;

    let h_inside = slices.iter().all(|s| {
        let kind = if s.label.is_mirrored() { SlabKind::Mirrored } else { SlabKind::Direct };
        let b = slabs.unstable_box(kind);
        (0..UNSTABLE_DIM).all(|j| s.h_box[j][0] > b[j][0] && s.h_box[j][1] < b[j][1])
    });
    let v_interior = slices
        .iter()
        .all(|s| s.v_samples.iter().all(|v| slabs.stable_interior(&v[UNSTABLE_DIM..], INTERIOR_MARGIN)));
    let mut h_disjoint = true;
    let mut v_disjoint = true;
    for i in 0..4 {
        for j in i + 1..4 {
            h_disjoint &= boxes_disjoint(&slices[i].h_box, &slices[j].h_box);
            v_disjoint &= boxes_disjoint(&slices[i].v_box, &slices[j].v_box);
        }
    }
    let sigma_chart = |c: &[f64]| -> Result<Vec<f64>> {
        slabs.to_chart(&map.rates.sigma(&slabs.from_chart(c)))
    };
    let mut symmetry_defect: f64 = 0.0;
    for (a, b) in [(0, 2), (1, 3)] {
        let mirrored = sigma_chart(&slices[a].core)?;
        let d = mirrored
            .iter()
            .zip(&slices[b].core)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        symmetry_defect = symmetry_defect.max(d);
    }
    Ok(SliceFamily {
        slabs: slabs.clone(),
        slices,
        grid,
        tail_len,
        roots_found,
        h_inside,
        v_interior,
        h_disjoint,
        v_disjoint,
        symmetry_defect,
    })
}

/// Smallest slab index in `range` whose slices pass every check.
pub fn select_l(
    map: &PoincareMap,
    family: &FixedPointFamily,
    grid: usize,
    range: std::ops::RangeInclusive<i64>,
) -> Result<SliceFamily> {
    let mut notes = Vec::new();
    for l in range {
        let attempt = build_slabs(map, family, l).and_then(|s| compute_slices(map, &s, grid));
        match attempt {
            Ok(f) if f.is_valid() => return Ok(f),
            Ok(f) => notes.push(format!(
                "l = {l}: h_inside {}, v_interior {}, h_disjoint {}, v_disjoint {}",
                f.h_inside, f.v_interior, f.h_disjoint, f.v_disjoint
            )),
            Err(e) => notes.push(format!("l = {l}: {e}")),
        }
    }
    Err(SnlsError::Slices(format!("no usable slab index; {}", notes.join("; "))))
}

/// Boundary samples as CSV rows `kind,label,index,u1,u2,s_x,tail_norm`.
pub fn write_slices_csv<W: Write>(mut w: W, family: &SliceFamily) -> Result<()> {
    writeln!(w, "kind,label,index,u1,u2,s_x,tail_norm")?;
    for s in &family.slices {
        for (kind, samples) in [("H", &s.h_samples), ("V", &s.v_samples)] {
            for (i, c) in samples.iter().enumerate() {
                let tail = c[UNSTABLE_DIM + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                writeln!(w, "{kind},{},{i},{:e},{:e},{:e},{:e}", s.label, c[0], c[1], c[2], tail)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horseshoe::fixture;

    #[test]
    fn four_disjoint_slices_inside_the_hull() {
        let f = fixture::canonical();
        let s = &f.slices;
        assert!(s.is_valid());
        assert_eq!(s.roots_found, [2, 2]);
        let labels: Vec<Symbol> = s.slices.iter().map(|x| x.label).collect();
        assert_eq!(labels, Symbol::ALL.to_vec());
        for info in &s.slices {
            let kind = if info.label.is_mirrored() { SlabKind::Mirrored } else { SlabKind::Direct };
            let [lo, hi] = s.slabs.u2_range(kind);
            assert!(info.core[1] > lo && info.core[1] < hi, "{}", info.label);
            for v in &info.v_samples {
                assert!(s.slabs.stable_interior(&v[UNSTABLE_DIM..], 0.0));
            }
        }
        assert!(s.slice(Symbol::One).core[0] < s.slice(Symbol::Two).core[0]);
    }

    #[test]
    fn forward_images_of_h_samples_are_v_samples() {
        let f = fixture::canonical();
        for info in &f.slices.slices {
            for (h, v) in info.h_samples.iter().zip(&info.v_samples) {
                let img = f.map.apply(&f.slices.slabs.from_chart(h)).unwrap();
                let c = f.slices.slabs.to_chart(&img).unwrap();
                let d = c.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(d < 1e-8, "{}: {d:e}", info.label);
            }
        }
    }

    #[test]
    fn unstable_boundary_maps_to_hull_boundary() {
        let f = fixture::canonical();
        let targets = unstable_targets();
        for info in &f.slices.slices {
            for (i, v) in info.v_samples.iter().enumerate() {
                let t = targets[i / f.slices.slabs.stable_samples(f.slices.tail_len).len()];
                assert!((v[0] - t[0]).abs() < 1e-8 && (v[1] - t[1]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sigma_maps_slices_to_mirrored_slices() {
        let f = fixture::canonical();
        assert!(f.slices.symmetry_defect < 1e-9);
        let one = f.slices.slice(Symbol::One);
        let minus = f.slices.slice(Symbol::MinusOne);
        assert!((one.h_box[1][0] + minus.h_box[1][1]).abs() < 1e-8);
        assert!((one.v_box[0][0] - minus.v_box[0][0]).abs() < 1e-8);
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let f = fixture::canonical();
        let mut buf = Vec::new();
        write_slices_csv(&mut buf, &f.slices).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let n: usize = f.slices.slices.iter().map(|s| s.h_samples.len() + s.v_samples.len()).sum();
        assert_eq!(text.lines().count(), n + 1);
        assert!(text.starts_with("kind,label,index"));
    }

    #[test]
    fn tiny_grid_is_rejected() {
        let f = fixture::canonical();
        assert!(matches!(
            compute_slices(&f.map, &f.slices.slabs, 2),
            Err(SnlsError::InvalidParams(_))
        ));
    }
}
