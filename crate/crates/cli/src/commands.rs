//! Subcommand bodies: resolve the sections they read, run, write outputs.

use std::fmt::Write as _;

use diffusim_core::coupling::{coupled_alpha_pair, projection_violations};
use diffusim_core::dynamics::{exact_transient_with, Configuration, Params, TransientOptions};
use diffusim_core::estimation::{estimate_critical, sweep as run_sweep, Axis, Experiment};
use diffusim_core::harris::{generate_events, Engine};
use diffusim_core::lattice::Lattice;
use diffusim_core::observables::{
    bass_trajectory, counts_on_grid, extinction_time, replicate_seed, spacetime_raster, BassParams, Extinction,
    Mode, SurvivalRecord,
};
use diffusim_core::renormalization::{
    bottom_row, oriented_reachability, sample_block_field, BlockSpec, ExtinctionBlockSpec, Sampling,
    SurvivalBlockSpec, SurvivalOrigin,
};
use diffusim_core::rng::{derive, tag};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, BlockKind, Common, Coupling, FileConfig, Origin, ResolvedRun};
use crate::output::Output;
use crate::Failure;

fn cfg_err(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn rt_err(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("configuration serializes")
}

/// Common sections plus command-specific ones, as echoed into outputs.
fn echo(command: &str, common: &Common, extra: &[(&str, Value)]) -> Value {
    let mut doc = json!({
        "command": command,
        "seed": common.seed,
        "model": to_value(&common.model),
        "lattice": to_value(&common.lattice),
    });
    for (k, v) in extra {
        doc[*k] = v.clone();
    }
    doc
}

fn setup(cfg: &FileConfig) -> Result<(Common, Lattice, ResolvedRun, Configuration), Failure> {
    let common = config::common(cfg).map_err(cfg_err)?;
    let lattice = common.lattice.build().map_err(cfg_err)?;
    let run = config::run(cfg).map_err(cfg_err)?;
    let initial = run
        .initial
        .build(&lattice, derive(common.seed, tag::INITIAL))
        .map_err(cfg_err)?;
    Ok((common, lattice, run, initial))
}

fn extinction_value(e: Extinction) -> Value {
    match e {
        Extinction::At(t) => json!(t),
        Extinction::SurvivedPastHorizon => json!("survived-past-horizon"),
    }
}

pub fn simulate(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (common, lattice, run, initial) = setup(cfg)?;
    let step = cfg.simulate.time_step.unwrap_or(1.0);
    if !(step.is_finite() && step > 0.0) {
        return Err(cfg_err(format!("time_step must be positive, got {step}")));
    }
    let config = echo(
        "simulate",
        &common,
        &[("run", to_value(&run)), ("simulate", json!({ "time_step": step }))],
    );
    let traj = Engine::simulate(&lattice, &common.model, &initial, run.horizon, common.seed).map_err(rt_err)?;
    let raster = spacetime_raster(&traj, step).map_err(rt_err)?;

    out.csv("raster.csv", &config, &raster.to_csv())?;
    match lattice.dim() {
        1 => out.pgm("raster.pgm", &config, &raster.to_pgm())?,
        2 => {
            for j in 0..raster.samples() {
                let frame = raster.frame_pgm(&lattice, j).map_err(rt_err)?;
                out.pgm(&format!("raster_{j:05}.pgm"), &config, &frame)?;
            }
        }
        _ => {}
    }
    let mut changes = String::from("time,site,from,to\n");
    for c in traj.changes() {
        let _ = writeln!(changes, "{},{},{},{}", c.time, c.site.0, c.from.as_u8(), c.to.as_u8());
    }
    out.csv("trajectory.csv", &config, &changes)?;
    let grid: Vec<f64> = (0..raster.samples()).map(|j| j as f64 * step).collect();
    let mut counts = String::from("time,n0,n1,n2\n");
    for (t, n) in grid.iter().zip(counts_on_grid(&traj, &grid).map_err(rt_err)?) {
        let _ = writeln!(counts, "{t},{},{},{}", n[0], n[1], n[2]);
    }
    out.csv("counts.csv", &config, &counts)?;
    let final_counts = traj.final_config().counts();
    out.json(
        "summary.json",
        &json!({
            "config": config,
            "changes": traj.changes().len(),
            "final_counts": final_counts,
            "extinction": {
                "awareness": extinction_value(extinction_time(&traj, Mode::Awareness)),
                "adoption": extinction_value(extinction_time(&traj, Mode::Adoption)),
            },
        }),
    )?;
    println!(
        "simulate: {} changes, final counts n0={} n1={} n2={}",
        traj.changes().len(),
        final_counts[0],
        final_counts[1],
        final_counts[2]
    );
    Ok(())
}

pub fn sweep(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (common, lattice, run, initial) = setup(cfg)?;
    let s = &cfg.sweep;
    let m = &common.model;
    let lambdas = s.lambdas.clone().map_or(vec![m.lambda], |l| l.0);
    let alphas = s.alphas.clone().map_or(vec![m.alpha], |l| l.0);
    let gammas = s.gammas.clone().map_or(vec![m.gamma], |l| l.0);
    let config = echo(
        "sweep",
        &common,
        &[
            ("run", to_value(&run)),
            ("sweep", json!({ "lambdas": lambdas, "alphas": alphas, "gammas": gammas })),
        ],
    );
    let exp = Experiment {
        lattice: &lattice,
        initial: &initial,
        horizon: run.horizon,
        mode: run.mode,
        replicates: run.replicates,
        seed: common.seed,
    };
    let table = run_sweep(&lambdas, &alphas, &gammas, m, &exp).map_err(|e| match e {
        diffusim_core::Error::Invalid(_) | diffusim_core::Error::InvalidParams(_) => cfg_err(e),
        other => rt_err(other),
    })?;
    out.csv("sweep.csv", &config, &table.to_csv())?;
    let mut lines = format!("{}\n", json!({ "config": config }));
    for r in &table.rows {
        let p = Params {
            lambda: r.lambda,
            alpha: r.alpha,
            gamma: r.gamma,
            forget: m.forget,
        };
        let rec = SurvivalRecord::new(p, r.mode, &r.estimate, r.seed);
        let _ = writeln!(lines, "{}", serde_json::to_string(&rec).map_err(rt_err)?);
    }
    out.write("sweep.jsonl", &lines)?;
    for r in &table.rows {
        let e = &r.estimate;
        println!(
            "lambda={} alpha={} gamma={}: {}/{} survived, estimate {} [{}, {}]",
            r.lambda, r.alpha, r.gamma, e.successes, e.replicates, e.estimate, e.ci_low, e.ci_high
        );
    }
    Ok(())
}

pub fn critical(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (common, lattice, run, initial) = setup(cfg)?;
    let c = &cfg.critical;
    let axis = c.axis.map_or(Axis::Lambda, |a| a.0);
    let (low, high) = match (axis, c.low, c.high) {
        (_, Some(l), Some(h)) => (l, h),
        (Axis::Lambda, l, h) => (l.unwrap_or(0.5), h.unwrap_or(1.9442)),
        (Axis::Alpha, _, _) => return Err(cfg_err("the alpha axis needs an explicit [critical] low and high")),
    };
    let threshold = c.threshold.unwrap_or(0.5);
    let tolerance = c.tolerance.unwrap_or(0.05);
    let config = echo(
        "critical",
        &common,
        &[
            ("run", to_value(&run)),
            (
                "critical",
                json!({ "axis": axis, "low": low, "high": high, "threshold": threshold, "tolerance": tolerance }),
            ),
        ],
    );
    let exp = Experiment {
        lattice: &lattice,
        initial: &initial,
        horizon: run.horizon,
        mode: run.mode,
        replicates: run.replicates,
        seed: common.seed,
    };
    let est = estimate_critical(axis, &common.model, (low, high), threshold, tolerance, &exp).map_err(|e| match e {
        diffusim_core::Error::Bracket(_) => rt_err(e),
        other => cfg_err(other),
    })?;
    out.json("critical.json", &json!({ "config": config, "result": to_value(&est) }))?;
    println!(
        "critical: bracket [{}, {}], midpoint {}{}",
        est.bracket_low,
        est.bracket_high,
        est.midpoint,
        if est.flagged { " (flagged: ambiguous midpoint)" } else { "" }
    );
    Ok(())
}

pub fn couple(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (common, lattice, run, initial) = setup(cfg)?;
    let c = &cfg.couple;
    let mode = c.mode.map_or(Coupling::Alpha, |m| m.0);
    let seeds = c.seeds.unwrap_or(100);
    let alpha_low = c.alpha_low.unwrap_or(0.5);
    let alpha_high = c.alpha_high.unwrap_or(4.0);
    let mut section = json!({ "mode": mode, "seeds": seeds });
    if mode == Coupling::Alpha {
        section["alpha_low"] = json!(alpha_low);
        section["alpha_high"] = json!(alpha_high);
    }
    let config = echo(
        "couple",
        &common,
        &[
            ("run", json!({ "initial": run.initial, "horizon": run.horizon })),
            ("couple", section),
        ],
    );
    let per_run = (0..seeds)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(common.seed, r);
            let v = match mode {
                Coupling::Alpha => coupled_alpha_pair(
                    &lattice,
                    &common.model,
                    alpha_low,
                    alpha_high,
                    &initial,
                    run.horizon,
                    seed,
                )
                .map(|p| p.ordering_violations()),
                Coupling::Contact => generate_events(&lattice, &common.model, run.horizon, seed)
                    .and_then(|s| projection_violations(&initial, &s)),
            };
            v.map(|v| (seed, v)).map_err(cfg_err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let total: usize = per_run.iter().map(|r| r.1).sum();
    let mut csv = String::from("run,seed,violations\n");
    for (r, (seed, v)) in per_run.iter().enumerate() {
        let _ = writeln!(csv, "{r},{seed},{v}");
    }
    out.csv("couple.csv", &config, &csv)?;
    out.json("couple.json", &json!({ "config": config, "runs": seeds, "violations": total }))?;
    println!("violations: {total}");
    if total > 0 {
        return Err(Failure::Check(format!("{total} coupling violations over {seeds} runs")));
    }
    Ok(())
}

pub fn blocks(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let common = config::common(cfg).map_err(cfg_err)?;
    let b = &cfg.blocks;
    let kind = b.kind.map_or(BlockKind::Extinction, |k| k.0);
    let l = b.l.unwrap_or(10);
    let t = b.t.unwrap_or(10.0);
    let width = b.width.unwrap_or(1);
    let height = b.height.unwrap_or(1);
    let sampling = b.sampling.map_or(Sampling::Independent, |s| s.0);
    let replicates = cfg.run.replicates.unwrap_or(100);
    let spec = match kind {
        BlockKind::Extinction => {
            BlockSpec::Extinction(ExtinctionBlockSpec::new(l, t, common.lattice.dim).map_err(cfg_err)?)
        }
        BlockKind::Survival => BlockSpec::Survival {
            spec: SurvivalBlockSpec::new(l, t).map_err(cfg_err)?,
            origin: match b.origin.map_or(Origin::FullInterval, |o| o.0) {
                Origin::FullInterval => SurvivalOrigin::FullInterval,
                Origin::MinimalSeed => SurvivalOrigin::MinimalSeed,
            },
        },
    };
    let config = echo(
        "blocks",
        &common,
        &[(
            "blocks",
            json!({
                "spec": to_value(&spec),
                "width": width,
                "height": height,
                "sampling": sampling,
                "replicates": replicates,
            }),
        )],
    );
    let sample = sample_block_field(&common.model, &spec, (width, height), replicates, sampling, common.seed)
        .map_err(cfg_err)?;
    let mut csv = String::from("replicate,x,n,open\n");
    let mut rows = Vec::with_capacity(sample.fields.len());
    for (r, f) in sample.fields.iter().enumerate() {
        for line in f.to_csv().lines().skip(1) {
            let _ = writeln!(csv, "{r},{line}");
        }
        rows.push(oriented_reachability(f, &bottom_row(f)));
    }
    out.csv("blocks.csv", &config, &csv)?;
    let max_row = rows.iter().map(|r| r.max_row).max().unwrap_or(-1);
    let top = rows.iter().filter(|r| r.reached_top).count();
    out.json(
        "blocks.json",
        &json!({
            "config": config,
            "open_fraction": sample.open.estimate,
            "ci": [sample.open.ci_low, sample.open.ci_high],
            "open": sample.open.successes,
            "classified": sample.open.replicates,
            "max_row_reached": max_row,
            "rows_reached": rows.iter().map(|r| r.max_row).collect::<Vec<_>>(),
            "reached_top": top,
        }),
    )?;
    println!(
        "blocks: open fraction {} [{}, {}], max row reached {max_row}",
        sample.open.estimate, sample.open.ci_low, sample.open.ci_high
    );
    Ok(())
}

pub fn oracle(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (common, lattice, run, initial) = setup(cfg)?;
    let o = &cfg.oracle;
    let times = o.times.clone().map_or(vec![1.0], |t| t.0);
    let opts = TransientOptions {
        max_states: o.max_states.unwrap_or(TransientOptions::default().max_states),
        ..TransientOptions::default()
    };
    let config = echo(
        "oracle",
        &common,
        &[
            ("run", json!({ "initial": run.initial })),
            ("oracle", json!({ "times": times, "max_states": opts.max_states })),
        ],
    );
    let mut csv = String::from("t,config,probability\n");
    for &t in &times {
        let d = exact_transient_with(&lattice, &common.model, &initial, t, opts).map_err(cfg_err)?;
        for (c, p) in d.iter() {
            let digits: String = c.digits().iter().map(|d| char::from(b'0' + d)).collect();
            let _ = writeln!(csv, "{t},{digits},{p}");
        }
    }
    out.csv("oracle.csv", &config, &csv)?;
    println!("oracle: {} states at {} times", 3usize.pow(lattice.site_count() as u32), times.len());
    Ok(())
}

pub fn bass(cfg: &FileConfig, out: &Output) -> Result<(), Failure> {
    let b = &cfg.bass;
    let bp = BassParams {
        p: b.p.unwrap_or(0.01),
        q: b.q.unwrap_or(0.4),
        n: b.n.unwrap_or(1000.0),
    };
    let a0 = b.a0.unwrap_or(0.0);
    let t_max = b.t_max.unwrap_or(20.0);
    let step = b.step.unwrap_or(0.1);
    if !(step > 0.0 && t_max >= 0.0 && t_max.is_finite()) {
        return Err(cfg_err("bass needs step > 0 and a finite t_max >= 0"));
    }
    let config = json!({
        "command": "bass",
        "bass": { "p": bp.p, "q": bp.q, "n": bp.n, "a0": a0, "t_max": t_max, "step": step },
    });
    let samples = (t_max / step * (1.0 + 1e-12)).floor() as usize + 1;
    let grid: Vec<f64> = (0..samples).map(|j| j as f64 * step).collect();
    let a = bass_trajectory(&bp, &grid, a0).map_err(cfg_err)?;
    let mut csv = String::from("t,adopters\n");
    for (t, v) in grid.iter().zip(&a) {
        let _ = writeln!(csv, "{t},{v}");
    }
    out.csv("bass.csv", &config, &csv)?;
    println!("bass: A({}) = {}", grid[samples - 1], a[samples - 1]);
    Ok(())
}
