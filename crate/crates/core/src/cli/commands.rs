//! Subcommand pipelines.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::{require_file, Command, GlobalMapAction, HorseshoeAction, ModelArgs, PhysArgs, RunContext};
use crate::canonical;
use crate::global_map::{affine_flow, check_a2_a3, compose_p, estimate_c, GlobalMapModel, PoincareMap};
use crate::horseshoe::{
    build_slabs, compute_slices, conjugacy_residual, count_periodic_orbits, fixed_point_family, hat_distance,
    refine_fixed_point, select_l, verify_conley_moser, write_slices_csv, Symbol, SymbolSequence, DEFAULT_LEVELS,
};
use crate::normal_form::{flight_time_to_sigma1, local_flow, local_map_p01, FlowRates, NormalFormPoint};
use crate::params::{
    check_nonresonance, check_silnikov_conditions, compute_saddle, compute_spectrum, EigenLadder, LadderEntry,
    ModelParams, NonresonanceConfig, DEFAULT_TOL,
};
use crate::spectral::{evolve_with, saddle_field, write_snapshot, write_trajectory_csv, SolverConfig};
use crate::{Result, SnlsError};

pub(super) fn dispatch(cmd: &Command, ctx: &mut RunContext) -> Result<()> {
    match cmd {
        Command::Saddle(phys) => saddle(phys, ctx),
        Command::Spectrum { phys, n_max } => spectrum(phys, *n_max, ctx),
        Command::Nonres {
            phys,
            ladder,
            s,
            n_max,
            r_max,
            l_bound,
        } => nonres(phys, ladder.as_deref(), *s, *n_max, *r_max, *l_bound, ctx),
        Command::Evolve {
            phys,
            tend,
            dt,
            modes,
            scheme,
            amp,
            every,
            no_dealias,
        } => {
            let config = SolverConfig {
                modes: *modes,
                dt: *dt,
                t_end: *tend,
                scheme: *scheme,
                dealias: !no_dealias,
                ..Default::default()
            };
            evolve(phys, &config, *amp, *every, ctx)
        }
        Command::LocalMap { model, point, samples } => local_map(model, point.as_deref(), *samples, ctx),
        Command::GlobalMap { action } => match action {
            GlobalMapAction::Estimate { model, t1 } => global_estimate(model, *t1, ctx),
            GlobalMapAction::Check { model, theta, tol } => global_check(model, *theta, *tol, ctx),
        },
        Command::FixedPoints {
            model,
            l_min,
            l_max,
            x0,
        } => fixed_points(model, *l_min, *l_max, *x0, ctx),
        Command::Horseshoe {
            action:
                HorseshoeAction::Run {
                    model,
                    l,
                    depth,
                    period,
                    grid,
                    budget,
                    words,
                },
        } => horseshoe(
            model,
            HorseshoeOptions {
                l: *l,
                depth: *depth,
                period: *period,
                grid: *grid,
                budget: *budget,
                words: *words,
            },
            ctx,
        ),
        Command::Report { runs } => report(runs, ctx),
    }
}

fn params(phys: &PhysArgs) -> Result<ModelParams> {
    ModelParams::new(phys.alpha, phys.beta, phys.omega, phys.eps)
}

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn saddle(phys: &PhysArgs, ctx: &mut RunContext) -> Result<()> {
    let s = compute_saddle(&params(phys)?)?;
    let out = json!({ "I": s.intensity, "theta": s.theta, "q": pair(s.q_value) });
    ctx.write_json("saddle.json", &out)?;
    ctx.note("I", s.intensity);
    ctx.note("theta", s.theta);
    ctx.stdout = Some(pretty(&out));
    Ok(())
}

fn spectrum(phys: &PhysArgs, n_max: usize, ctx: &mut RunContext) -> Result<()> {
    let p = params(phys)?;
    let s = compute_saddle(&p)?;
    let cfg = NonresonanceConfig::default();
    let ladder = compute_spectrum(&p, n_max.max(cfg.n_max).max(cfg.l_bound as usize))?;
    let shown = &ladder.entries[..=n_max.min(ladder.n_max())];
    let rates = ladder.rates().ok();
    let silnikov = check_silnikov_conditions(&ladder, DEFAULT_TOL).ok();
    let nonres = check_nonresonance(&ladder, &cfg).ok();
    let out = json!({
        "I": s.intensity,
        "theta": s.theta,
        "lambda": shown.iter().map(|e| pair(e.lambda_plus)).collect::<Vec<_>>(),
        "lambda_minus": shown.iter().map(|e| pair(e.lambda_minus)).collect::<Vec<_>>(),
        "rates": rates,
        "silnikov": silnikov.map(|r| json!({ "c1": r.c1, "c2": r.c2, "c3": r.c3 })),
        "nonresonance": nonres.map(|r| json!({
            "holds": r.holds,
            "worst_margin": r.worst_margin,
            "witness": r.witness,
        })),
    });
    ctx.write_json("spectrum.json", &out)?;
    ctx.note("lambda1_plus", pair(ladder.entries[1].lambda_plus));
    ctx.note("silnikov_all_hold", silnikov.map(|r| r.all_hold()));
    ctx.stdout = Some(pretty(&out));
    Ok(())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| SnlsError::InvalidParams(format!("bad number {t:?} in {what}")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn nonres(
    phys: &PhysArgs,
    ladder: Option<&str>,
    s: u32,
    n_max: Option<usize>,
    r_max: Option<usize>,
    l_bound: Option<i64>,
    ctx: &mut RunContext,
) -> Result<()> {
    let defaults = NonresonanceConfig::default();
    let (ladder, source) = match ladder {
        Some(text) => {
            let values = parse_list(text, "--ladder")?;
            if values.len() < 3 {
                return Err(SnlsError::InvalidParams("--ladder needs at least three values".into()));
            }
            let entries = values
                .iter()
                .enumerate()
                .map(|(n, &v)| LadderEntry {
                    n,
                    lambda_plus: Complex64::new(v, 0.0),
                    lambda_minus: Complex64::new(-v, 0.0),
                })
                .collect();
            (EigenLadder::from_entries(entries), "given")
        }
        None => {
            let need = n_max.unwrap_or(defaults.n_max).max(l_bound.unwrap_or(defaults.l_bound).max(0) as usize);
            (compute_spectrum(&params(phys)?, need)?, "physical")
        }
    };
    let top = ladder.n_max();
    let n_max = n_max.unwrap_or(defaults.n_max.min(top));
    let cfg = NonresonanceConfig {
        s,
        n_max,
        r_max: r_max.unwrap_or(defaults.r_max.min(n_max)),
        l_bound: l_bound.unwrap_or(defaults.l_bound.min(top as i64)),
        ..defaults
    };
    let report = check_nonresonance(&ladder, &cfg)?;
    let out = json!({ "ladder": source, "config": cfg, "report": report });
    ctx.write_json("nonres.json", &out)?;
    ctx.note("holds", report.holds);
    ctx.note("worst_margin", report.worst_margin);
    ctx.stdout = Some(pretty(&json!({
        "holds": report.holds,
        "worst_margin": report.worst_margin,
        "witness": report.witness,
    })));
    Ok(())
}

fn evolve(phys: &PhysArgs, config: &SolverConfig, amp: f64, every: usize, ctx: &mut RunContext) -> Result<()> {
    if every == 0 {
        return Err(SnlsError::InvalidParams("--every must be positive".into()));
    }
    config.validate()?;
    let p = params(phys)?;
    let mut state = saddle_field(&p, config.modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    for k in 1..=4.min(config.modes - 1) {
        state.modes[k] += Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
    }
    let mass0 = state.mass();
    let mut recorded = Vec::new();
    let mut step = 0usize;
    let last = evolve_with(&state, &p, config, |s| {
        if step % every == 0 {
            recorded.push(s.clone());
        }
        step += 1;
    })?;
    if recorded.last().map(|s| s.time) != Some(last.time) {
        recorded.push(last.clone());
    }
    ctx.lap("integrate");
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &recorded)?;
    ctx.write_bytes("trajectory.csv", &csv)?;
    let mut snap = Vec::new();
    write_snapshot(&mut snap, &last)?;
    ctx.write_bytes("final.snls", &snap)?;
    ctx.note("t_end", last.time);
    ctx.note("steps", step.saturating_sub(1));
    ctx.note("mass_initial", mass0);
    ctx.note("mass_final", last.mass());
    ctx.note("max_mode_final", last.max_mode());
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require_file(path)?;
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SnlsError::InvalidParams(format!("{}: {e}", path.display())))
}

struct Setup {
    model: GlobalMapModel,
    rates: FlowRates,
    eta: f64,
}

fn setup(args: &ModelArgs) -> Result<Setup> {
    let model = match &args.model {
        Some(p) => read_json(p)?,
        None => canonical::model(),
    };
    let rates = match &args.rates {
        Some(p) => read_json(p)?,
        None => canonical::rates(),
    };
    let eta = args.eta.unwrap_or(canonical::ETA);
    model
        .validate()
        .map_err(|e| SnlsError::InvalidParams(format!("model: {e}")))?;
    rates
        .validate()
        .map_err(|e| SnlsError::InvalidParams(format!("rates: {e}")))?;
    Ok(Setup { model, rates, eta })
}

fn map_of(s: &Setup) -> Result<PoincareMap> {
    compose_p(s.model.clone(), s.eta, s.rates.clone(), true).map_err(|e| match e {
        SnlsError::InvalidParams(m) => SnlsError::InvalidParams(m),
        other => other,
    })
}

fn local_map(args: &ModelArgs, point: Option<&str>, samples: usize, ctx: &mut RunContext) -> Result<()> {
    let s = setup(args)?;
    if point.is_none() && samples == 0 {
        return Err(SnlsError::InvalidParams("give --point or --samples".into()));
    }
    let mut points = Vec::new();
    if let Some(text) = point {
        points.push(NormalFormPoint::from_slice(&parse_list(text, "--point")?)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let m = s.rates.tail_len();
    let x_lo = s.eta * (-2.0 * std::f64::consts::PI * s.rates.a / s.rates.b).exp();
    for _ in 0..samples {
        let z1 = s.eta * rng.gen_range(0.01..0.9);
        let reach = (z1 / s.eta).powf(s.rates.gamma2 / s.rates.gamma1) * s.eta;
        let tail: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5) * s.eta / (m.max(1) as f64).sqrt()).collect();
        points.push(NormalFormPoint::new(
            rng.gen_range(x_lo..s.eta),
            0.0,
            z1,
            rng.gen_range(-0.9..0.9) * reach,
            tail,
        ));
    }
    let mut csv = String::from("index,t0");
    for side in ["in", "out"] {
        for c in ["x", "y", "z1", "z2"] {
            csv.push_str(&format!(",{c}_{side}"));
        }
        for i in 0..m {
            csv.push_str(&format!(",q{i}_{side}"));
        }
    }
    csv.push_str(",flow_mismatch\n");
    let mut worst: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let out = local_map_p01(p, s.eta, &s.rates)?;
        let t0 = flight_time_to_sigma1(p, s.eta, s.rates.gamma1)?;
        let mismatch = local_flow(p, t0, &s.rates, s.eta)?.distance(&out);
        worst = worst.max(mismatch);
        let row: Vec<String> = std::iter::once(t0)
            .chain(p.to_vec())
            .chain(out.to_vec())
            .chain(std::iter::once(mismatch))
            .map(|v| format!("{v:e}"))
            .collect();
        csv.push_str(&format!("{i},{}\n", row.join(",")));
    }
    ctx.write_bytes("local_map.csv", csv.as_bytes())?;
    ctx.note("points", points.len());
    ctx.note("max_flow_mismatch", worst);
    Ok(())
}

fn global_estimate(args: &ModelArgs, t1: f64, ctx: &mut RunContext) -> Result<()> {
    let s = setup(args)?;
    let mut drift = vec![0.0; 4 + s.model.tail_dim()];
    drift[1] = 1.0;
    let flow = affine_flow(&s.model, t1, drift, vec![0.0; 3 + s.model.tail_dim()]);
    let est = estimate_c(&flow, &s.model.q1_star, t1)?;
    let truth = s.model.c.full();
    let err = (est.c.full() - truth).abs().max();
    ctx.write_json("estimate.json", &json!({ "estimate": est, "max_entry_error": err }))?;
    ctx.note("max_entry_error", err);
    ctx.note("y_residual", est.y_residual);
    Ok(())
}

fn global_check(args: &ModelArgs, theta: f64, tol: f64, ctx: &mut RunContext) -> Result<()> {
    let s = setup(args)?;
    let report = check_a2_a3(&s.model, theta, tol);
    let out = json!({ "report": report, "phi1": s.model.c.phi1() });
    ctx.write_json("genericity.json", &out)?;
    ctx.note("A2", report.a2);
    ctx.note("A3", report.a3);
    ctx.stdout = Some(pretty(&out));
    Ok(())
}

fn fixed_points(args: &ModelArgs, l_min: i64, l_max: i64, x0: Option<f64>, ctx: &mut RunContext) -> Result<()> {
    if l_min > l_max {
        return Err(SnlsError::InvalidParams(format!("l_min {l_min} > l_max {l_max}")));
    }
    let s = setup(args)?;
    let map = map_of(&s)?;
    let x0 = x0.unwrap_or(s.model.q0_star.x);
    let family = fixed_point_family(&s.model, &s.rates, s.eta, x0, l_min..=l_max)?;
    let mut csv = String::from("l,t0,x_hat0,z_hat12,status,tau,residual,iterations,hat_distance,gap_deviation\n");
    let mut prev_tau: Option<(i64, f64)> = None;
    let mut refined = 0usize;
    for e in &family.entries {
        let head = format!("{},{:e},{:e},{:e}", e.l, e.t0, e.x_hat0, e.z_hat12);
        match refine_fixed_point(&map, &e.guess(&s.model, &s.rates, s.eta)) {
            Ok(r) => {
                refined += 1;
                let d = hat_distance(e, &r, &s.model, &s.rates, s.eta)?;
                let gap = match prev_tau {
                    Some((l, t)) if l + 1 == e.l => format!("{:e}", r.tau - t - std::f64::consts::PI / s.rates.b),
                    _ => String::new(),
                };
                csv.push_str(&format!(
                    "{head},ok,{:e},{:e},{},{:e},{gap}\n",
                    r.tau, r.residual, r.iterations, d
                ));
                prev_tau = Some((e.l, r.tau));
            }
            Err(err) => {
                csv.push_str(&format!("{head},\"{err}\",,,,,\n"));
                prev_tau = None;
            }
        }
    }
    ctx.write_bytes("fixed_points.csv", csv.as_bytes())?;
    ctx.write_json("family.json", &family)?;
    ctx.note("entries", family.entries.len());
    ctx.note("refined", refined);
    ctx.note("phi1", family.phi1);
    Ok(())
}

struct HorseshoeOptions {
    l: Option<i64>,
    depth: usize,
    period: usize,
    grid: usize,
    budget: usize,
    words: usize,
}

fn horseshoe(args: &ModelArgs, o: HorseshoeOptions, ctx: &mut RunContext) -> Result<()> {
    if o.depth < 2 || o.period == 0 || o.period > o.depth {
        return Err(SnlsError::InvalidParams(format!(
            "need depth >= 2 and 1 <= period <= depth, got depth {} period {}",
            o.depth, o.period
        )));
    }
    let s = setup(args)?;
    let map = map_of(&s)?;
    let top = o.l.unwrap_or(8).max(1);
    let family = fixed_point_family(&s.model, &s.rates, s.eta, s.model.q0_star.x, 0..=2 * top + 2)?;
    let slices = match o.l {
        Some(l) => compute_slices(&map, &build_slabs(&map, &family, l)?, o.grid)?,
        None => select_l(&map, &family, o.grid, 1..=8)?,
    };
    ctx.lap("slices");
    let mut csv = Vec::new();
    write_slices_csv(&mut csv, &slices)?;
    ctx.write_bytes("slices.csv", &csv)?;
    ctx.note("l", slices.slabs.l);
    ctx.note("slices_valid", slices.is_valid());

    let report = verify_conley_moser(&map, &slices, o.budget, DEFAULT_LEVELS)?;
    ctx.lap("conley_moser");
    ctx.write_json("cm_report.json", &report)?;
    ctx.note("cond_i", report.cond_i);
    ctx.note("nu", report.nu);
    if !report.passed() {
        return Err(SnlsError::Inconclusive(format!(
            "Conley-Moser conditions not met: cond_i = {}, nu = {}",
            report.cond_i, report.nu
        )));
    }

    let mut orbits = String::from("period,word,residual,bound");
    for c in ["x", "y", "z1", "z2"] {
        orbits.push_str(&format!(",{c}"));
    }
    for i in 0..s.rates.tail_len() {
        orbits.push_str(&format!(",q{i}"));
    }
    orbits.push('\n');
    let mut counts = Vec::new();
    for p in 1..=o.period {
        let c = count_periodic_orbits(&map, &slices, &report, p, o.depth)?;
        for orbit in &c.orbits {
            let coords: Vec<String> = orbit.point.to_vec().iter().map(|v| format!("{v:e}")).collect();
            orbits.push_str(&format!(
                "{p},\"{}\",{:e},{:e},{}\n",
                orbit.word,
                orbit.residual,
                orbit.bound,
                coords.join(",")
            ));
        }
        counts.push(c.count);
    }
    ctx.write_bytes("orbits.csv", orbits.as_bytes())?;
    ctx.note("periodic_counts", &counts);
    ctx.lap("periodic");

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let half = o.depth + 1;
    let mut worst: f64 = 0.0;
    for _ in 0..o.words {
        let window: Vec<Symbol> = (0..2 * half + 1).map(|_| Symbol::ALL[rng.gen_range(0..4)]).collect();
        let seq = SymbolSequence::finite(window, half)?;
        let (res, bound) = conjugacy_residual(&map, &slices, &report, &seq, o.depth)?;
        worst = worst.max(res / bound);
    }
    ctx.note("conjugacy_worst_ratio", worst);
    ctx.lap("conjugacy");
    Ok(())
}

fn report(runs: &[std::path::PathBuf], ctx: &mut RunContext) -> Result<()> {
    let mut rows = Vec::new();
    let mut keys = std::collections::BTreeSet::new();
    for dir in runs {
        let path = dir.join("manifest.json");
        let v: Value = read_json(&path)?;
        if let Some(obj) = v["summary"].as_object() {
            keys.extend(obj.keys().cloned());
        }
        rows.push((dir.display().to_string(), v));
    }
    let mut csv = String::from("run,command,status");
    for k in &keys {
        csv.push_str(&format!(",{k}"));
    }
    csv.push('\n');
    let cell = |v: &Value| match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string().replace(',', ";"),
    };
    for (name, v) in &rows {
        csv.push_str(&format!("{name},{},{}", cell(&v["command"]), cell(&v["status"])));
        for k in &keys {
            csv.push_str(&format!(",{}", cell(&v["summary"][k])));
        }
        csv.push('\n');
    }
    ctx.write_bytes("summary.csv", csv.as_bytes())?;
    ctx.note("runs", rows.len());
    ctx.stdout = Some(csv.trim_end().to_string());
    Ok(())
}
