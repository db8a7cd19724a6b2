use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rumorlab::engine::{exact_oracle, run_replicas_with_jobs, SimConfig};
use rumorlab::experiments::{Criterion, Report, Settings};
use rumorlab::fluctuations::{eval_noise_covariance, solve_fclt, write_samples_csv, NoiseSampler};
use rumorlab::meanfield::{MeanFieldProblem, MeanFieldSolution, Solver};
use rumorlab::qtgraph::{edges_to_csv, graph_from_files, types_to_json, verify_realization, Graph};

use crate::config::{Mode, Resolved, SolverName};
use crate::{runtime, CliError};

const DEFAULT_GRID_DT: f64 = 0.01;
const DEFAULT_DT: f64 = 0.01;

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|()| w.flush())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// meta.json: the only output that carries a wall-clock timestamp.
fn write_meta(dir: &Path, command: &str, cfg: &Resolved, mut extra: Value) -> Result<(), CliError> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut config = serde_json::to_value(&cfg.cfg).expect("config serializes");
    if let Value::Object(m) = &mut config {
        m.retain(|_, v| !v.is_null());
    }
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed()?,
        "config": config,
        "created_unix": created,
    });
    if let (Value::Object(m), Value::Object(e)) = (meta, extra.take()) {
        let mut m = m;
        m.extend(e);
        let text = serde_json::to_string_pretty(&Value::Object(m)).expect("json value");
        write_file(dir, "meta.json", |w| writeln!(w, "{text}"))?;
    }
    Ok(())
}

/// `t,type,X,Y,Z` rows from a `[grid][type][state]` table.
fn write_grid(dir: &Path, name: &str, times: &[f64], rows: &[Vec<[f64; 3]>]) -> Result<(), CliError> {
    write_file(dir, name, |w| {
        writeln!(w, "t,type,X,Y,Z")?;
        for (t, row) in times.iter().zip(rows) {
            for (k, v) in row.iter().enumerate() {
                writeln!(w, "{t},{k},{},{},{}", v[0], v[1], v[2])?;
            }
        }
        Ok(())
    })
}

fn grid_dt(cfg: &Resolved) -> Result<f64, CliError> {
    cfg.positive("grid_dt", cfg.cfg.grid_dt, Some(DEFAULT_GRID_DT))
}

fn sim_config(cfg: &Resolved, g: &Graph) -> Result<SimConfig, CliError> {
    let sc = SimConfig {
        lambda: cfg.lambda()?,
        law: cfg.law()?,
        t_max: cfg.t_max()?,
        grid_dt: grid_dt(cfg)?,
        initial: cfg.initial_condition(g)?,
        seed: cfg.seed()?,
        yy_rule: cfg.cfg.yy_rule.unwrap_or_default(),
        debug_checks: false,
    };
    sc.grid_steps().map_err(|e| cfg.bad("grid_dt", e.to_string()))?;
    Ok(sc)
}

fn problem(cfg: &Resolved) -> Result<MeanFieldProblem, CliError> {
    let bp = cfg.blueprint()?;
    let fractions = cfg.fractions(bp.n_types())?;
    let dt = cfg.positive("dt", cfg.cfg.dt, Some(DEFAULT_DT))?;
    MeanFieldProblem::from_fractions(bp, cfg.lambda()?, cfg.law()?, &fractions, cfg.t_max()?, dt)
        .map_err(|e| cfg.bad("dt", e.to_string()))
}

fn solve(cfg: &Resolved, prob: &MeanFieldProblem) -> Result<MeanFieldSolution, CliError> {
    let name = cfg.cfg.solver.unwrap_or(SolverName::Flln);
    Solver::from(name).solve(prob).map_err(|e| {
        let e = anyhow::Error::new(e);
        CliError::Runtime(if name == SolverName::Flln {
            e.context("the flln scheme broke down; `--solver survival_weighted` stays physical on long horizons")
        } else {
            e
        })
    })
}

pub fn graph_build(cfg: &Resolved) -> Result<bool, CliError> {
    let g = cfg.build_graph()?;
    let out = cfg.out_dir()?;
    let report = verify_realization(&g);
    write_file(&out, "edges.csv", |w| w.write_all(edges_to_csv(&g).as_bytes()))?;
    write_file(&out, "types.json", |w| writeln!(w, "{}", types_to_json(&g)))?;
    write_file(&out, "blueprint.json", |w| writeln!(w, "{}", g.blueprint().to_json()))?;
    write_meta(
        &out,
        "graph build",
        cfg,
        json!({
            "vertices": g.num_vertices(),
            "edges": g.num_edges(),
            "type_sizes": g.type_sizes(),
            "realizes_blueprint": report.passed,
            "connected": report.connected,
        }),
    )?;
    println!(
        "wrote {} vertices, {} edges to {}",
        g.num_vertices(),
        g.num_edges(),
        out.display()
    );
    Ok(true)
}

pub fn graph_verify(cfg: &Resolved) -> Result<bool, CliError> {
    let g = match &cfg.cfg.edges {
        Some(edges) => {
            let types = cfg
                .cfg
                .types
                .as_ref()
                .ok_or_else(|| CliError::Usage("--edges needs --types".into()))?;
            let read = |p: &Path| {
                std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))
            };
            graph_from_files(&read(edges)?, &read(types)?, cfg.blueprint()?).map_err(runtime)?
        }
        None => cfg.build_graph()?,
    };
    let r = verify_realization(&g);
    println!("vertices: {}, edges: {}", g.num_vertices(), g.num_edges());
    println!("connected: {}", r.connected);
    println!("proportion gap: {:.3e}", r.proportion_gap);
    if let Some(v) = r.structural_defect {
        println!("structural defect at vertex {v}");
    }
    if let Some(f) = &r.first_failure {
        println!(
            "vertex {} has {} neighbours of type {}, expected {}",
            f.vertex, f.found, f.neighbor_type, f.expected
        );
    }
    println!("{}", if r.passed { "PASS" } else { "FAIL" });
    Ok(r.passed)
}

pub fn simulate(cfg: &Resolved) -> Result<bool, CliError> {
    let g = cfg.build_graph()?;
    let sc = sim_config(cfg, &g)?;
    let replicas = cfg.replicas()?;
    let out = cfg.out_dir()?;
    let normalized = !cfg.cfg.counts.unwrap_or(false);
    let set = run_replicas_with_jobs(&g, &sc, replicas, cfg.jobs()?).map_err(runtime)?;
    for (r, tr) in set.trajectories.iter().enumerate() {
        write_file(&out, &format!("trajectory_{r:03}.csv"), |w| tr.write_csv(w, normalized))?;
    }
    if replicas > 1 {
        let times: Vec<f64> = set.trajectories[0].times();
        // replica statistics are always densities
        write_grid(&out, "trajectory_mean.csv", &times, &set.mean())?;
        write_grid(&out, "trajectory_variance.csv", &times, &set.variance())?;
    }
    let counters: Vec<Value> = set
        .trajectories
        .iter()
        .map(|t| {
            let c = t.counters();
            json!({
                "conversions": c.conversions,
                "contact_stiflings": c.contact_stiflings,
                "spontaneous_stiflings": c.spontaneous_stiflings,
                "events": c.events,
            })
        })
        .collect();
    write_meta(
        &out,
        "simulate",
        cfg,
        json!({
            "vertices": g.num_vertices(),
            "replicas": replicas,
            "normalized": normalized,
            "event_counters": counters,
        }),
    )?;
    let last = set.trajectories[0].len() - 1;
    let z: f64 = set.samples(last, 0, 2).iter().sum::<f64>() / replicas as f64;
    println!(
        "{replicas} replica(s) on {} vertices; mean type-0 stifler density at t={}: {z:.4}",
        g.num_vertices(),
        sc.t_max
    );
    Ok(true)
}

pub fn meanfield(cfg: &Resolved) -> Result<bool, CliError> {
    let prob = problem(cfg)?;
    let out = cfg.out_dir()?;
    let sol = solve(cfg, &prob)?;
    write_file(&out, "meanfield.csv", |w| sol.write_csv(w))?;
    write_meta(&out, "meanfield", cfg, json!({ "grid_points": sol.len() }))?;
    let last = sol.len() - 1;
    println!(
        "t={}: X={:.6} Y={:.6} Z={:.6}",
        sol.t_max(),
        sol.total(last, 0),
        sol.total(last, 1),
        sol.total(last, 2)
    );
    Ok(true)
}

fn covariance(cfg: &Resolved, times: Option<&[f64]>) -> Result<(MeanFieldProblem, MeanFieldSolution, rumorlab::fluctuations::NoiseCovariance), CliError> {
    let prob = problem(cfg)?;
    let sol = solve(cfg, &prob)?;
    let grid = sol.times();
    let times = times.unwrap_or(&grid);
    let model = cfg.cfg.model.unwrap_or_default();
    let cov = eval_noise_covariance(&sol, &prob.blueprint, prob.lambda, &prob.law, times, model)
        .map_err(|e| cfg.bad("times", e.to_string()))?;
    Ok((prob, sol, cov))
}

pub fn fclt_covariance(cfg: &Resolved) -> Result<bool, CliError> {
    let (_, _, cov) = covariance(cfg, cfg.cfg.times.as_deref())?;
    let out = cfg.out_dir()?;
    let index = cov.export(&out).map_err(runtime)?;
    write_meta(&out, "fclt covariance", cfg, json!({ "model": cov.model.to_string() }))?;
    println!("{} blocks on {} times; index {}", cov.blocks().len(), cov.n_times(), index.display());
    Ok(true)
}

pub fn fclt_sample(cfg: &Resolved) -> Result<bool, CliError> {
    let (prob, sol, cov) = covariance(cfg, None)?;
    let samples = match cfg.cfg.samples {
        Some(0) => return Err(cfg.bad("samples", "must be at least 1")),
        s => s.unwrap_or(1),
    };
    let out = cfg.out_dir()?;
    let sampler = NoiseSampler::new(&cov).map_err(runtime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed()?);
    let zero = vec![(0.0, 0.0); prob.blueprint.n_types()];
    let paths = (0..samples)
        .map(|_| {
            let noise = sampler.sample(&mut rng);
            solve_fclt(&cov, &noise, &zero, &prob.blueprint, prob.lambda, &prob.law, &sol)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    write_file(&out, "fclt_samples.csv", |w| write_samples_csv(&paths, w))?;
    write_meta(&out, "fclt sample", cfg, json!({ "samples": samples, "model": cov.model.to_string() }))?;
    println!("{samples} fluctuation path(s) on [0, {}]", sol.t_max());
    Ok(true)
}

pub fn oracle(cfg: &Resolved) -> Result<bool, CliError> {
    let g = cfg.build_graph()?;
    let sc = sim_config(cfg, &g)?;
    let times = match &cfg.cfg.times {
        Some(t) => t.clone(),
        None => (0..=sc.grid_steps().map_err(runtime)?).map(|i| i as f64 * sc.grid_dt).collect(),
    };
    let out = cfg.out_dir()?;
    let res = exact_oracle(&g, &sc, &times).map_err(|e| CliError::Usage(format!("oracle: {e}")))?;
    write_grid(&out, "oracle.csv", &res.times, &res.expected)?;
    write_meta(&out, "oracle", cfg, json!({ "reachable_states": res.reachable_states }))?;
    println!("{} reachable states, {} times", res.reachable_states, res.times.len());
    Ok(true)
}

fn parse_criteria(names: &[String]) -> Result<Vec<Criterion>, CliError> {
    if names.iter().any(|n| n == "all") {
        return Ok(Criterion::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            n.parse::<Criterion>().map_err(|_| {
                CliError::Usage(format!("unknown criterion `{n}`; expected `all`, 1-10 or one of: {}", Criterion::names().join(", ")))
            })
        })
        .collect()
}

pub fn acceptance(cfg: &Resolved, names: &[String]) -> Result<bool, CliError> {
    let criteria = parse_criteria(names)?;
    let settings = Settings {
        seed: cfg.seed()?,
        jobs: cfg.jobs()?,
    };
    let mut reports: Vec<Report> = Vec::new();
    for c in criteria {
        let r = c.run(&settings).map_err(runtime)?;
        println!("{r}");
        reports.push(r);
    }
    if reports.len() > 1 {
        println!("summary:");
        for r in &reports {
            println!("  {}", r.line());
        }
    }
    if let Some(dir) = &cfg.cfg.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let text = serde_json::to_string_pretty(&reports).expect("reports serialize");
        write_file(dir, "acceptance.json", |w| writeln!(w, "{text}"))?;
    }
    Ok(reports.iter().all(|r| r.passed))
}

/// Dispatches on the config's `mode` (and `action` where it matters).
pub fn run(cfg: &Resolved) -> Result<bool, CliError> {
    if cfg.file.is_none() {
        return Err(CliError::Usage("`run` needs --config FILE".into()));
    }
    let mode = cfg.cfg.mode.ok_or_else(|| cfg.bad("mode", "missing; expected one of graph, simulate, meanfield, fclt, oracle, acceptance"))?;
    let action = cfg.cfg.action.as_deref();
    match (mode, action) {
        (Mode::Graph, None | Some("build")) => graph_build(cfg),
        (Mode::Graph, Some("verify")) => graph_verify(cfg),
        (Mode::Fclt, None | Some("sample")) => fclt_sample(cfg),
        (Mode::Fclt, Some("covariance")) => fclt_covariance(cfg),
        (Mode::Simulate, None) => simulate(cfg),
        (Mode::Meanfield, None) => meanfield(cfg),
        (Mode::Oracle, None) => oracle(cfg),
        (Mode::Acceptance, None) => {
            let c = cfg.cfg.criterion.clone().unwrap_or_else(|| "all".into());
            acceptance(cfg, &[c])
        }
        (m, Some(a)) => Err(cfg.bad("action", format!("`{a}` is not an action of mode `{m}`"))),
    }
}
