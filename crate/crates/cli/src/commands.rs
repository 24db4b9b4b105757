//! One handler per subcommand. Each writes its files into the output
//! directory and returns a one-line summary for stderr.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use spatial_rumor::experiments::{
    compare_with_oracle, estimate_open_probability_a, estimate_open_probability_b,
    estimate_open_probability_b_worst_case, sweep_phase_diagram, BlockSpecA, BlockSpecB, BoundaryPolicy,
    EngineKind, InitialCondition, Placement, ProcessMode, SurvivalCriterion, SurvivalOptions,
};
use spatial_rumor::harris::{run_coupled_on, DominanceReport};
use spatial_rumor::meanfield::{self, MeanFieldState, StabilityReport};
use spatial_rumor::oracle::OracleReport;
use spatial_rumor::rng::{derive_seed, rng_from_seed};
use spatial_rumor::{
    run_harris, ArrivalStream, Boundary, Configuration, EventEngine, GeneratorMatrix, Lattice, Params,
    RunOptions, Sampling, Trajectory,
};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn format(cfg: &RunConfig) -> Result<Format, CliError> {
    match cfg.raw("format") {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(CliError::Config(format!("format must be csv or json, got {other:?}"))),
    }
}

fn engine(cfg: &RunConfig) -> Result<EngineKind, CliError> {
    match cfg.raw("engine") {
        "gillespie" => Ok(EngineKind::Gillespie),
        "harris" => Ok(EngineKind::Harris),
        other => Err(CliError::Config(format!("engine must be gillespie or harris, got {other:?}"))),
    }
}

fn boolean(cfg: &RunConfig, key: &str) -> Result<bool, CliError> {
    match cfg.raw(key) {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CliError::Config(format!("{key} must be true or false, got {other:?}"))),
    }
}

fn params(cfg: &RunConfig) -> Result<Params, CliError> {
    Ok(Params::new(cfg.get("lambda")?, cfg.get("alpha")?)?)
}

fn lattice(cfg: &RunConfig) -> Result<Lattice, CliError> {
    let boundary: Boundary = cfg.get("boundary")?;
    Ok(Lattice::new(cfg.get("d")?, cfg.get("side")?, boundary)?)
}

fn read_snapshot(cfg: &RunConfig) -> Result<Configuration, CliError> {
    let path = cfg.raw("snapshot");
    if path.is_empty() {
        return Err(CliError::Config("init = snapshot needs a `snapshot` path".into()));
    }
    Ok(Configuration::parse_snapshot(&fs::read_to_string(path)?)?)
}

/// Lattice and initial condition. A snapshot carries its own lattice, which
/// takes precedence over `d`, `side` and `boundary`.
fn initial(cfg: &RunConfig) -> Result<(Lattice, InitialCondition), CliError> {
    let init = match cfg.raw("init") {
        "single" => InitialCondition::SingleCenter,
        "product" => InitialCondition::Product {
            spreader: cfg.get("spreader_density")?,
            stifler: cfg.get("stifler_density")?,
        },
        "snapshot" => {
            let eta0 = read_snapshot(cfg)?;
            return Ok((*eta0.lattice(), InitialCondition::Fixed(eta0)));
        }
        other => {
            return Err(CliError::Config(format!("init must be single, product or snapshot, got {other:?}")))
        }
    };
    let lattice = lattice(cfg)?;
    init.validate(&lattice)?;
    Ok((lattice, init))
}

fn nonnegative(cfg: &RunConfig, key: &str) -> Result<f64, CliError> {
    let v: f64 = cfg.get(key)?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key} must be a finite number >= 0, got {v}")))
    }
}

fn write(out: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::write(out.join(name), contents)?;
    Ok(())
}

fn write_json<T: Serialize>(out: &Path, name: &str, cfg: &RunConfig, body: T) -> Result<(), CliError> {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Config(e.to_string()))?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("config".into(), cfg.json());
        }
        None => value = json!({ "config": cfg.json(), "data": value }),
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write(out, name, text.as_bytes())
}

fn csv_with_header(cfg: &RunConfig, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = cfg.csv_header().into_bytes();
    body(&mut buf)?;
    Ok(buf)
}

fn write_trajectory(out: &Path, stem: &str, cfg: &RunConfig, traj: &Trajectory) -> Result<(), CliError> {
    match format(cfg)? {
        Format::Csv => {
            let buf = csv_with_header(cfg, |w| traj.write_csv(w))?;
            write(out, &format!("{stem}.csv"), &buf)
        }
        Format::Json => write_json(out, &format!("{stem}.json"), cfg, json!({ "points": traj.points })),
    }
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    match cfg.command() {
        Command::Simulate => simulate(cfg, out),
        Command::Couple => couple(cfg, out),
        Command::Meanfield => mean_field(cfg, out),
        Command::OracleCheck => oracle_check(cfg, out),
        Command::Sweep => sweep(cfg, out),
        Command::Block => block(cfg, out),
    }
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let p = params(cfg)?;
    let (lattice, init) = initial(cfg)?;
    let t_max = nonnegative(cfg, "t_max")?;
    let interval = nonnegative(cfg, "sample_interval")?;
    let event_log = boolean(cfg, "event_log")?;
    let opts = RunOptions {
        stop_on_extinction: boolean(cfg, "stop_on_extinction")?,
        sampling: if interval > 0.0 { Sampling::Interval(interval) } else { Sampling::EveryEvent },
        record_events: event_log,
    };
    // stream 0 drives the initial condition, stream 1 the dynamics
    let eta0 = init.sample(lattice, &mut rng_from_seed(derive_seed(seed, 0)));
    let engine_seed = derive_seed(seed, 1);
    let (traj, t_end) = match engine(cfg)? {
        EngineKind::Gillespie => {
            let mut e = EventEngine::new(eta0, p, engine_seed);
            let traj = e.run_until(t_max, opts)?;
            (traj, e.clock().min(t_max))
        }
        EngineKind::Harris => (run_harris(eta0, p, t_max, engine_seed, opts)?, t_max),
    };
    write_trajectory(out, "trajectory", cfg, &traj)?;
    if traj.events.is_some() {
        let buf = csv_with_header(cfg, |w| traj.write_event_csv(w))?;
        write(out, "events.csv", &buf)?;
    }
    let last = traj.last().expect("a trajectory has an initial record");
    write_json(
        out,
        "summary.json",
        cfg,
        json!({
            "t_end": t_end,
            "records": traj.points.len(),
            "events": traj.event_count(),
            "final_counts": last.counts,
            "extinct": last.counts.spreader == 0,
        }),
    )?;
    Ok(format!(
        "simulate: {} records, final counts {}/{}/{}",
        traj.points.len(),
        last.counts.ignorant,
        last.counts.spreader,
        last.counts.stifler
    ))
}

fn couple(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let p = params(cfg)?;
    let (lattice, init) = initial(cfg)?;
    let t_max: f64 = cfg.get("t_max")?;
    let replicas: u64 = cfg.get("replicas")?;
    if replicas == 0 {
        return Err(CliError::Config("replicas must be >= 1".into()));
    }
    let runs = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let replica_seed = derive_seed(seed, i);
            let eta0 = init.sample(lattice, &mut rng_from_seed(derive_seed(replica_seed, 0)));
            let stream = ArrivalStream::generate(lattice, p, t_max, derive_seed(replica_seed, 1))?;
            let keep = i == 0;
            let run = run_coupled_on(eta0, &stream, i, false, |_, _| {});
            Ok((run.report, keep.then_some((run.rumor, run.contact))))
        })
        .collect::<Result<Vec<_>, spatial_rumor::Error>>()?;
    let mut first = None;
    let mut reports = Vec::with_capacity(runs.len());
    for (report, trajs) in runs {
        reports.push(report);
        if trajs.is_some() {
            first = trajs;
        }
    }
    let report = DominanceReport::merge(reports);
    let (rumor, contact) = first.expect("replica 0 is kept");
    write_trajectory(out, "rumor", cfg, &rumor)?;
    write_trajectory(out, "contact", cfg, &contact)?;
    write_json(out, "dominance.json", cfg, &report)?;
    report.ensure_clean()?;
    Ok(format!(
        "couple: {} replicas, {} arrivals, 0 dominance violations",
        report.replicas, report.arrivals_applied
    ))
}

fn mean_field(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    cfg.seed()?;
    let p = params(cfg)?;
    let s0 = MeanFieldState::new(cfg.get("u1")?, cfg.get("u2")?)?;
    let points = meanfield::integrate(s0, &p, nonnegative(cfg, "t_max")?, cfg.get("dt")?)?;
    match format(cfg)? {
        Format::Csv => {
            let buf = csv_with_header(cfg, |w| meanfield::write_csv(&points, w))?;
            write(out, "meanfield.csv", &buf)?;
        }
        Format::Json => write_json(out, "meanfield.json", cfg, json!({ "points": points }))?,
    }
    let report = StabilityReport::new(&p);
    write_json(out, "stability.json", cfg, &report)?;
    let last = points.last().expect("integration records t = 0");
    Ok(format!(
        "meanfield: u(t={}) = ({:.6}, {:.6}, {:.6}), origin {:?}",
        last.t, last.u0, last.u1, last.u2, report.classification
    ))
}

fn oracle_check(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let p = params(cfg)?;
    let (lattice, init) = initial(cfg)?;
    let t = nonnegative(cfg, "t")?;
    let replicas: u64 = cfg.get("replicas")?;
    let threshold: f64 = cfg.get("tv_threshold")?;
    let engines = match cfg.raw("engine") {
        "both" => vec![EngineKind::Gillespie, EngineKind::Harris],
        _ => vec![engine(cfg)?],
    };
    let eta0 = match init {
        InitialCondition::Product { .. } => {
            return Err(CliError::Config("oracle-check needs a deterministic init (single or snapshot)".into()))
        }
        other => other.sample(lattice, &mut rng_from_seed(seed)),
    };
    let gen = GeneratorMatrix::build_with_cap(lattice, p, cfg.get("cap")?)?;
    let exact = gen.transient_distribution(&eta0, t)?;
    let mut comparisons = Vec::new();
    for (i, &kind) in engines.iter().enumerate() {
        let c = compare_with_oracle(&gen, &exact, kind, &eta0, t, replicas, derive_seed(seed, i as u64), threshold)?;
        comparisons.push(c);
    }
    let cross_tv = (comparisons.len() == 2)
        .then(|| spatial_rumor::oracle::total_variation(&comparisons[0].empirical, &comparisons[1].empirical));
    let cross_pass = cross_tv.is_none_or(|tv| tv < threshold);
    let pass = cross_pass && comparisons.iter().all(|c| c.pass);
    write_json(
        out,
        "oracle_check.json",
        cfg,
        json!({
            "oracle": OracleReport::new(&gen, t, &exact, cfg.get("top_k")?),
            "engines": comparisons,
            "cross_tv": cross_tv,
            "threshold": threshold,
            "pass": pass,
        }),
    )?;
    let line = comparisons
        .iter()
        .map(|c| format!("{:?} tv={:.5}", c.engine, c.tv))
        .chain(cross_tv.map(|tv| format!("cross tv={tv:.5}")))
        .collect::<Vec<_>>()
        .join(", ");
    if pass {
        Ok(format!("oracle-check: pass ({line})"))
    } else {
        Err(CliError::CheckFailed(format!("total variation at or above {threshold} ({line})")))
    }
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let (lattice, init) = initial(cfg)?;
    let opts = SurvivalOptions {
        engine: engine(cfg)?,
        mode: match cfg.raw("mode") {
            "rumor" => ProcessMode::Rumor,
            "contact" => ProcessMode::Contact,
            other => return Err(CliError::Config(format!("mode must be rumor or contact, got {other:?}"))),
        },
        criterion: match cfg.raw("criterion") {
            "spreaders-only" => SurvivalCriterion::SpreadersOnly,
            "spreaders-or-stiflers" => SurvivalCriterion::SpreadersOrStiflers,
            other => {
                return Err(CliError::Config(format!(
                    "criterion must be spreaders-only or spreaders-or-stiflers, got {other:?}"
                )))
            }
        },
    };
    let lambdas = cfg.list("lambdas")?;
    let alphas = cfg.list("alphas")?;
    let diagram = sweep_phase_diagram(
        &lambdas,
        &alphas,
        lattice,
        &init,
        nonnegative(cfg, "t_max")?,
        cfg.get("replicas")?,
        seed,
        opts,
    )?;
    match format(cfg)? {
        Format::Csv => {
            let buf = csv_with_header(cfg, |w| diagram.write_csv(w))?;
            write(out, "sweep.csv", &buf)?;
        }
        Format::Json => write_json(out, "sweep.json", cfg, json!({ "cells": diagram.cells }))?,
    }
    Ok(format!("sweep: {} cells", diagram.cells.len()))
}

fn block(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let p = params(cfg)?;
    let dim: usize = cfg.get("d")?;
    let l: u64 = cfg.get("L")?;
    let replicas: u64 = cfg.get("replicas")?;
    let explicit_t = match cfg.raw("T") {
        "" => None,
        _ => Some(cfg.get::<f64>("T")?),
    };
    let (body, estimate) = match cfg.raw("block") {
        "a" => {
            let placement = match cfg.raw("placement") {
                "uniform" => Placement::Uniform,
                "packed" => Placement::Packed,
                other => return Err(CliError::Config(format!("placement must be uniform or packed, got {other:?}"))),
            };
            let t = explicit_t.unwrap_or(2.0 * l as f64);
            let spec = BlockSpecA::new(dim, l, t)?.with_placement(placement);
            let est = estimate_open_probability_a(&spec, &p, seed, replicas)?;
            (serde_json::to_value(&est), est.estimate)
        }
        "b" => {
            let t = explicit_t.unwrap_or(l as f64);
            let spec = BlockSpecB::new(dim, l, t)?;
            let est = match cfg.raw("boundary_policy") {
                "worst-case" => estimate_open_probability_b_worst_case(&spec, &p, seed, replicas)?,
                name => {
                    let policy = BoundaryPolicy::ALL
                        .into_iter()
                        .find(|b| serde_json::to_value(b).ok().and_then(|v| v.as_str().map(|s| s == name)) == Some(true))
                        .ok_or_else(|| {
                            CliError::Config(format!(
                                "boundary_policy must be all-spreaders, all-stiflers, random-resampled or worst-case, got {name:?}"
                            ))
                        })?;
                    estimate_open_probability_b(&spec.with_policy(policy), &p, seed, replicas)?
                }
            };
            (serde_json::to_value(&est), est.estimate)
        }
        other => return Err(CliError::Config(format!("block must be a or b, got {other:?}"))),
    };
    let body = body.map_err(|e| CliError::Config(e.to_string()))?;
    match format(cfg)? {
        Format::Json => write_json(out, "block.json", cfg, body)?,
        Format::Csv => {
            let row = |k: &str| body.get(k).map(|v| v.to_string()).unwrap_or_default();
            let buf = csv_with_header(cfg, |w| {
                use std::io::Write;
                writeln!(w, "block,lambda,alpha,replicas,successes,estimate,ci_lo,ci_hi,seed")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    cfg.raw("block"),
                    row("lambda"),
                    row("alpha"),
                    row("replicas"),
                    row("successes"),
                    row("estimate"),
                    row("ci_lo"),
                    row("ci_hi"),
                    row("seed")
                )
            })?;
            write(out, "block.csv", &buf)?;
        }
    }
    Ok(format!("block {}: open with probability {estimate:.4}", cfg.raw("block")))
}
