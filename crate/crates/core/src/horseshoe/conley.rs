//! Conley–Moser checks on computed slices, points with prescribed
//! itineraries, and the finite-depth conjugacy with the shift.
//!
//! A chain through `H_{s₀}, …, H_{s_{m−1}}` serves both families of nested
//! slices: its starts sweep `H_{s₀ … s_{m−1}}` as the target in `Ŝ_l` moves,
//! and its images sweep the stable slice `P^m(H_{s₀}) ∩ …` as the stable
//! data at the start moves.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::global_map::PoincareMap;
use crate::normal_form::NormalFormPoint;
use crate::{Result, SnlsError};

use super::chain::chart_map;
use super::slab::UNSTABLE_DIM;
use super::slices::{shoot, unstable_targets, SliceFamily};
use super::symbols::{shift_map, Symbol, SymbolSequence};

/// Nesting levels measured for `ν`.
pub const DEFAULT_LEVELS: usize = 3;
pub const DEFAULT_SAMPLE_BUDGET: usize = 50_000;
/// Largest shooting residual accepted on slice boundary samples.
const BOUNDARY_TOL: f64 = 1e-8;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn diameter<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let pts: Vec<&[f64]> = points.into_iter().collect();
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(dist(pts[i], pts[j]));
        }
    }
    d
}

fn code(word: &[Symbol]) -> usize {
    word.iter().fold(0, |c, s| 4 * c + s.index())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmReport {
    pub cond_i: bool,
    pub nu: f64,
    pub l: i64,
    pub grid: usize,
    pub nu_stable: f64,
    pub nu_unstable: f64,
    pub levels: usize,
    /// Largest stable diameter per nesting level, level 0 being `Ŝ_l`.
    pub stable_diameters: Vec<f64>,
    /// Largest unstable diameter per nesting level, level 0 being `S_l`.
    pub unstable_diameters: Vec<f64>,
    /// Stable diameter of the level-2 slice of each chain `[s₋₂, s₋₁]`,
    /// indexed by base-4 code.
    pub v2_diameters: Vec<f64>,
    /// Unstable diameter of each `H_j`, indexed by symbol.
    pub h1_diameters: Vec<f64>,
    pub samples_used: usize,
    pub symmetry_defect: f64,
}

impl CmReport {
    pub fn passed(&self) -> bool {
        self.cond_i && self.nu < 1.0
    }

    /// `ν^{k−1}·d(V_{a₋₁a₋₂}) + ν^k·d(H_{a₀})`.
    pub fn depth_bound(&self, k: usize, back: [Symbol; 2], a0: Symbol) -> f64 {
        let dv = self.v2_diameters[code(&[back[1], back[0]])];
        let dh = self.h1_diameters[a0.index()];
        self.nu.powi(k as i32 - 1) * dv + self.nu.powi(k as i32) * dh
    }

    /// The bound maximised over words.
    pub fn uniform_bound(&self, k: usize) -> f64 {
        let dv = self.v2_diameters.iter().cloned().fold(0.0, f64::max);
        let dh = self.h1_diameters.iter().cloned().fold(0.0, f64::max);
        self.nu.powi(k as i32 - 1) * dv + self.nu.powi(k as i32) * dh
    }
}

struct Budget {
    left: usize,
    used: usize,
}

impl Budget {
    fn take(&mut self) -> Result<()> {
        if self.left == 0 {
            return Err(SnlsError::Inconclusive(format!(
                "sample budget exhausted after {} shooting problems",
                self.used
            )));
        }
        self.left -= 1;
        self.used += 1;
        Ok(())
    }
}

/// Stable diameter of the images and unstable diameter of the starts of
/// all chains through `word`.
fn chain_diameters(
    map: &PoincareMap,
    family: &SliceFamily,
    word: &[Symbol],
    budget: &mut Budget,
) -> Result<(f64, f64)> {
    let slabs = &family.slabs;
    let stables = slabs.stable_samples(family.tail_len);
    let targets = unstable_targets();
    let mut images = vec![Vec::new(); targets.len()];
    let mut starts = vec![Vec::new(); stables.len()];
    let base = family.chain_guesses(map, word, &stables[0]);
    for (ti, target) in targets.iter().enumerate() {
        budget.take()?;
        let center = shoot(map, slabs, &base, &stables[0], *target)?;
        for (si, stable) in stables.iter().enumerate() {
            let sol = if si == 0 {
                center.clone()
            } else {
                budget.take()?;
                shoot(map, slabs, &center.points, stable, *target)?
            };
            images[ti].push(sol.image[UNSTABLE_DIM..].to_vec());
            starts[si].push(sol.points[0][..UNSTABLE_DIM].to_vec());
        }
    }
    let fold = |groups: &[Vec<Vec<f64>>]| {
        groups
            .iter()
            .map(|g| diameter(g.iter().map(Vec::as_slice)))
            .fold(0.0, f64::max)
    };
    Ok((fold(&images), fold(&starts)))
}

/// Condition (i) from the slice samples and condition (ii) as the largest
/// measured ratio of nested slice diameters over `levels ≥ 3` levels.
pub fn verify_conley_moser(
    map: &PoincareMap,
    family: &SliceFamily,
    sample_budget: usize,
    levels: usize,
) -> Result<CmReport> {
    if levels < 3 {
        return Err(SnlsError::InvalidParams(format!("need at least 3 nesting levels, got {levels}")));
    }
    let slabs = &family.slabs;
    let boundary_ok = family.slices.iter().all(|s| s.max_residual < BOUNDARY_TOL);
    let cond_i = family.is_valid() && boundary_ok;

    let stables = slabs.stable_samples(family.tail_len);
    let d_stable0 = diameter(stables.iter().map(Vec::as_slice));
    let [u2_lo, u2_hi] = slabs.u2_range(super::slab::SlabKind::Direct);
    let d_unstable0 = (1.0 + (u2_hi - u2_lo).powi(2)).sqrt();

    let mut budget = Budget {
        left: sample_budget,
        used: 0,
    };
    // Diameters per chain, keyed by (length, code).
    let mut dv: HashMap<(usize, usize), f64> = HashMap::new();
    let mut dh: HashMap<(usize, usize), f64> = HashMap::new();
    let mut stable_diameters = vec![d_stable0];
    let mut unstable_diameters = vec![d_unstable0];
    let (mut nu_s, mut nu_u): (f64, f64) = (0.0, 0.0);
    for m in 1..=levels {
        let (mut max_v, mut max_h): (f64, f64) = (0.0, 0.0);
        for c in 0..4usize.pow(m as u32) {
            let word = Symbol::word(c, m);
            let (v, h) = chain_diameters(map, family, &word, &mut budget).map_err(|e| match e {
                SnlsError::Inconclusive(_) => e,
                other => SnlsError::Inconclusive(format!(
                    "level {m}, chain {}: {other}",
                    word.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
                )),
            })?;
            // The stable parent drops the oldest symbol, the unstable parent
            // the newest.
            let pv = if m == 1 { d_stable0 } else { dv[&(m - 1, code(&word[1..]))] };
            let ph = if m == 1 { d_unstable0 } else { dh[&(m - 1, code(&word[..m - 1]))] };
            nu_s = nu_s.max(v / pv);
            nu_u = nu_u.max(h / ph);
            max_v = max_v.max(v);
            max_h = max_h.max(h);
            dv.insert((m, c), v);
            dh.insert((m, c), h);
        }
        stable_diameters.push(max_v);
        unstable_diameters.push(max_h);
    }
    Ok(CmReport {
        cond_i,
        nu: nu_s.max(nu_u),
        l: slabs.l,
        grid: family.grid,
        nu_stable: nu_s,
        nu_unstable: nu_u,
        levels,
        stable_diameters,
        unstable_diameters,
        v2_diameters: (0..16).map(|c| dv[&(2, c)]).collect(),
        h1_diameters: (0..4).map(|c| dh[&(1, c)]).collect(),
        samples_used: budget.used,
        symmetry_defect: family.symmetry_defect,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItineraryPoint {
    pub point: NormalFormPoint,
    /// Chart coordinates in the slab.
    pub chart: Vec<f64>,
    pub bound: f64,
    /// Largest step mismatch of the shooting chain.
    pub residual: f64,
    /// `P^i(φ_k(a))` for `0 ≤ i ≤ k`, as shadowed by the chain.
    pub forward: Vec<Vec<f64>>,
}

/// The point `φ_k(a)` with `P^i(φ_k(a)) ∈ H_{a_i}` for `−k−1 ≤ i ≤ k`.
pub fn itinerary_to_point(
    map: &PoincareMap,
    family: &SliceFamily,
    report: &CmReport,
    seq: &SymbolSequence,
    k: usize,
) -> Result<ItineraryPoint> {
    if k < 1 {
        return Err(SnlsError::InvalidParams("depth must be at least 1".into()));
    }
    let ki = k as i64;
    let symbols: Vec<Symbol> = (-ki - 1..=ki)
        .map(|i| {
            seq.get(i)
                .ok_or_else(|| SnlsError::InvalidParams(format!("window too short for depth {k}")))
        })
        .collect::<Result<_>>()?;
    let slabs = &family.slabs;
    let center = vec![0.0; 1 + family.tail_len];
    let guesses = family.chain_guesses(map, &symbols, &center);
    let sol = shoot(map, slabs, &guesses, &center, [0.5, 0.0])?;
    for (i, (p, s)) in sol.points.iter().zip(&symbols).enumerate() {
        if !family.in_h(*s, p, 1e-9) {
            return Err(SnlsError::Slices(format!(
                "empty intersection at depth {k}: step {} left H_{s}",
                i as i64 - ki - 1
            )));
        }
    }
    let chart = sol.points[k + 1].clone();
    let bound = report.depth_bound(k, [symbols[k], symbols[k - 1]], symbols[k + 1]);
    Ok(ItineraryPoint {
        point: slabs.from_chart(&chart),
        chart,
        bound,
        residual: sol.residual,
        forward: sol.points[k + 1..].to_vec(),
    })
}

/// `‖P(φ_k(a)) − φ_k(χ(a))‖` in chart coordinates and the bound it is
/// compared against (twice the larger depth bound of the two points).
pub fn conjugacy_residual(
    map: &PoincareMap,
    family: &SliceFamily,
    report: &CmReport,
    seq: &SymbolSequence,
    k: usize,
) -> Result<(f64, f64)> {
    let here = itinerary_to_point(map, family, report, seq, k)?;
    let there = itinerary_to_point(map, family, report, &shift_map(seq), k)?;
    let image = chart_map(map, &family.slabs, &here.chart)?;
    Ok((dist(&image, &there.chart), 2.0 * here.bound.max(there.bound)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub word: String,
    pub point: NormalFormPoint,
    pub chart: Vec<f64>,
    /// `‖P^p(q) − q‖` in chart coordinates along the shooting chain, plus
    /// the accumulated step mismatch.
    pub residual: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCount {
    pub period: usize,
    pub count: usize,
    pub dedup_tol: f64,
    pub orbits: Vec<PeriodicOrbit>,
}

/// All `4^p` period-`p` words turned into points at depth `k`, each checked
/// to return within its depth bound after `p` steps.
pub fn count_periodic_orbits(
    map: &PoincareMap,
    family: &SliceFamily,
    report: &CmReport,
    period: usize,
    k: usize,
) -> Result<PeriodicCount> {
    if period == 0 {
        return Err(SnlsError::InvalidParams("period must be positive".into()));
    }
    let mut orbits = Vec::new();
    for c in 0..4usize.pow(period as u32) {
        let word = Symbol::word(c, period);
        let label = word.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        let seq = SymbolSequence::periodic(word)?;
        let p = itinerary_to_point(map, family, report, &seq, k)
            .map_err(|e| SnlsError::Slices(format!("word ({label}): {e}")))?;
        if period > k {
            return Err(SnlsError::InvalidParams(format!("period {period} exceeds depth {k}")));
        }
        // Plain forward iteration amplifies round-off by the expansion rate
        // at every step; the chain carries the orbit with bounded mismatch.
        let residual = dist(&p.forward[period], &p.chart) + period as f64 * p.residual;
        if !(residual <= p.bound) {
            return Err(SnlsError::Slices(format!(
                "word ({label}): return distance {residual:e} exceeds the depth bound {:e}",
                p.bound
            )));
        }
        orbits.push(PeriodicOrbit {
            word: label,
            point: p.point,
            chart: p.chart,
            residual,
            bound: p.bound,
        });
    }
    let mut d_min = f64::INFINITY;
    for i in 0..orbits.len() {
        for j in i + 1..orbits.len() {
            d_min = d_min.min(dist(&orbits[i].chart, &orbits[j].chart));
        }
    }
    let max_bound = orbits.iter().map(|o| o.bound).fold(0.0, f64::max);
    let dedup_tol = if d_min.is_finite() { 0.5 * d_min } else { 0.0 }.max(10.0 * max_bound);
    let mut reps: Vec<&[f64]> = Vec::new();
    for o in &orbits {
        if reps.iter().all(|r| dist(r, &o.chart) >= dedup_tol) {
            reps.push(&o.chart);
        }
    }
    Ok(PeriodicCount {
        period,
        count: reps.len(),
        dedup_tol,
        orbits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horseshoe::fixture;

    fn word(symbols: &[i8]) -> Vec<Symbol> {
        symbols.iter().map(|v| Symbol::try_from(*v).unwrap()).collect()
    }

    #[test]
    fn canonical_contraction_below_one() {
        let f = fixture::canonical();
        let r = &f.report;
        assert!(r.passed());
        assert!(r.nu > 0.0 && r.nu < 1.0, "nu = {}", r.nu);
        assert_eq!(r.stable_diameters.len(), DEFAULT_LEVELS + 1);
        for w in r.stable_diameters.windows(2) {
            assert!(w[1] <= r.nu * w[0] * (1.0 + 1e-12));
        }
        for w in r.unstable_diameters.windows(2) {
            assert!(w[1] <= r.nu * w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constant_word_lands_on_a_fixed_point() {
        let f = fixture::canonical();
        let slabs = &f.slices.slabs;
        for s in [Symbol::One, Symbol::Two] {
            let seq = SymbolSequence::periodic(vec![s]).unwrap();
            let p = itinerary_to_point(&f.map, &f.slices, &f.report, &seq, 6).unwrap();
            let nearest = slabs
                .fixed_points
                .iter()
                .map(|fp| dist(&slabs.to_chart(&fp.point).unwrap(), &p.chart))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= p.bound, "{s}: {nearest:e} > {:e}", p.bound);
        }
    }

    #[test]
    fn period_two_word_commutes_with_shift() {
        let f = fixture::canonical();
        let seq = SymbolSequence::periodic(word(&[1, 2])).unwrap();
        let (res, bound) = conjugacy_residual(&f.map, &f.slices, &f.report, &seq, 6).unwrap();
        assert!(res <= bound, "{res:e} > {bound:e}");
        let a = itinerary_to_point(&f.map, &f.slices, &f.report, &seq, 6).unwrap();
        let b = itinerary_to_point(&f.map, &f.slices, &f.report, &shift_map(&seq), 6).unwrap();
        assert!(dist(&a.chart, &b.chart) > 0.1);
    }

    #[test]
    fn fixed_point_count() {
        let f = fixture::canonical();
        let c = count_periodic_orbits(&f.map, &f.slices, &f.report, 1, 6).unwrap();
        assert_eq!(c.count, 4);
        assert!(c.dedup_tol >= 10.0 * c.orbits[0].bound);
        assert!(c.orbits.iter().all(|o| o.residual <= o.bound));
    }

    #[test]
    fn itineraries_separate_after_disagreement() {
        let f = fixture::canonical();
        let slabs = &f.slices.slabs;
        let j = 3;
        let mut a = vec![Symbol::One; 21];
        let base = SymbolSequence::finite(a.clone(), 10).unwrap();
        a[10 + j] = Symbol::Two;
        let other = SymbolSequence::finite(a, 10).unwrap();
        let p = itinerary_to_point(&f.map, &f.slices, &f.report, &base, 8).unwrap();
        let q = itinerary_to_point(&f.map, &f.slices, &f.report, &other, 8).unwrap();
        assert!(dist(&p.chart, &q.chart) < 1e-6);
        let (mut x, mut y) = (p.point.clone(), q.point.clone());
        for _ in 0..j {
            x = f.map.apply(&x).unwrap();
            y = f.map.apply(&y).unwrap();
        }
        let (cx, cy) = (slabs.to_chart(&x).unwrap(), slabs.to_chart(&y).unwrap());
        assert!((cx[0] - cy[0]).abs() > 0.25, "{:?} vs {:?}", &cx[..2], &cy[..2]);
    }

    #[test]
    fn short_window_is_rejected() {
        let f = fixture::canonical();
        let seq = SymbolSequence::finite(word(&[1, 2, 1]), 1).unwrap();
        assert!(itinerary_to_point(&f.map, &f.slices, &f.report, &seq, 3).is_err());
        assert!(count_periodic_orbits(&f.map, &f.slices, &f.report, 4, 3).is_err());
    }

    #[test]
    fn exhausted_budget_is_inconclusive() {
        let f = fixture::canonical();
        let r = verify_conley_moser(&f.map, &f.slices, 50, DEFAULT_LEVELS);
        assert!(matches!(r, Err(SnlsError::Inconclusive(_))));
        assert!(verify_conley_moser(&f.map, &f.slices, 50, 2).is_err());
    }

    fn weakened(gamma2: f64) -> Result<(CmReport, i64)> {
        let inst = crate::canonical::instance();
        let mut rates = inst.rates.clone();
        rates.gamma2 = gamma2;
        let map = crate::global_map::compose_p(inst.model.clone(), inst.eta, rates.clone(), true)?;
        let family = super::super::fixed_point_family(&inst.model, &rates, inst.eta, 1.0, 0..=20)?;
        let slices = super::super::select_l(&map, &family, 64, 1..=8)?;
        let r = verify_conley_moser(&map, &slices, DEFAULT_SAMPLE_BUDGET, DEFAULT_LEVELS)?;
        Ok((r, slices.slabs.l))
    }

    #[test]
    fn weaker_expansion_raises_unstable_factor() {
        let (r, l) = weakened(0.2).unwrap();
        assert_eq!(l, 3);
        assert!(r.nu_unstable > 10.0 * fixture::canonical().report.nu_unstable);
        assert!(r.nu < 1.0);
    }

    #[test]
    fn images_that_fail_to_cross_are_reported() {
        match weakened(0.1) {
            Err(SnlsError::Slices(msg)) => assert!(msg.contains("no preimage"), "{msg}"),
            other => panic!("expected a slice failure, got {other:?}"),
        }
    }
}
