use std::path::Path;
use std::process::{Command, Output};

use rumorlab::engine::{exact_oracle, InitialCondition, SimConfig, VertexState, YyRule};
use rumorlab::meanfield::{solve_flln, solve_flln_survival_weighted, MeanFieldProblem};
use rumorlab::qtgraph::{build_family, Family};
use rumorlab::stifling::StiflingLaw;

fn rumorlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rumorlab"))
        .args(args)
        .env_remove("RUMORLAB_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// `t,type,X,Y,Z` rows parsed back to numbers.
fn rows(p: &Path) -> Vec<(f64, usize, [f64; 3])> {
    read(p)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                [f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap()],
            )
        })
        .collect()
}

const SIM: &[&str] = &[
    "simulate", "--graph", "torus:6", "--law", "weibull:2:5", "--lambda", "0.5", "--y0", "0.1", "--t-max", "3",
    "--grid-dt", "0.5", "--replicas", "4",
];

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = SIM.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    args.extend(extra);
    rumorlab(&args)
}

#[test]
fn simulate_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c, d) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"), dir.path().join("d"));
    for (out, extra) in [(&a, &["--seed", "7", "--jobs", "1"][..]), (&b, &["--seed", "7", "--jobs", "3"]), (&c, &["--seed", "8"])] {
        let o = simulate(out, extra);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for name in ["trajectory_000.csv", "trajectory_003.csv", "trajectory_mean.csv", "trajectory_variance.csv"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name}");
    }
    assert_ne!(read(&a.join("trajectory_mean.csv")), read(&c.join("trajectory_mean.csv")));

    // the environment seed applies when neither flag nor config sets one
    let mut args = SIM.to_vec();
    args.extend(["--out", d.to_str().unwrap()]);
    let o = Command::new(env!("CARGO_BIN_EXE_rumorlab"))
        .args(&args)
        .env("RUMORLAB_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&a.join("trajectory_mean.csv")), read(&d.join("trajectory_mean.csv")));
    let meta: serde_json::Value = serde_json::from_str(&read(&d.join("meta.json"))).unwrap();
    assert_eq!(meta["seed"], 7);
}

#[test]
fn replica_statistics_match_the_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &["--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reps: Vec<_> = (0..4).map(|r| rows(&dir.path().join(format!("trajectory_{r:03}.csv")))).collect();
    let mean = rows(&dir.path().join("trajectory_mean.csv"));
    assert_eq!(mean.len(), 7);
    for (i, (t, _, m)) in mean.iter().enumerate() {
        for s in 0..3 {
            let want = reps.iter().map(|r| r[i].2[s]).sum::<f64>() / 4.0;
            assert!((m[s] - want).abs() < 1e-12, "t={t} s={s}");
        }
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn meanfield_csv_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let law = StiflingLaw::weibull(2.0, 5.0).unwrap();
    let bp = Family::Torus2D(8).blueprint();
    for (solver, t_max) in [("flln", "4"), ("survival_weighted", "20")] {
        let out = dir.path().join(solver);
        let o = rumorlab(&[
            "meanfield", "--graph", "torus:8", "--law", "weibull:2:5", "--lambda", "0.5", "--y0", "0.01", "--t-max", t_max,
            "--dt", "0.02", "--solver", solver, "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let prob =
            MeanFieldProblem::from_fractions(bp.clone(), 0.5, law, &[[0.99, 0.01, 0.0]], t_max.parse().unwrap(), 0.02).unwrap();
        let sol = if solver == "flln" { solve_flln(&prob) } else { solve_flln_survival_weighted(&prob) }.unwrap();
        let got = rows(&out.join("meanfield.csv"));
        assert_eq!(got.len(), sol.len());
        for (i, (t, k, v)) in got.iter().enumerate() {
            assert_eq!(*k, 0);
            assert!((t - sol.time(i)).abs() < 1e-12);
            // the CSV uses shortest round-trip formatting
            assert_eq!(*v, sol.values[i][0], "{solver} row {i}");
        }
    }
}

#[test]
fn printed_scheme_breakdown_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorlab(&[
        "meanfield", "--graph", "torus:8", "--law", "weibull:2:5", "--lambda", "0.5", "--y0", "0.01", "--t-max", "20",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("survival_weighted"), "{}", stderr(&o));
}

#[test]
fn oracle_csv_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorlab(&[
        "oracle", "--graph", "cycle:5", "--law", "exponential:0.7", "--lambda", "1.5", "--spreaders", "0,2", "--t-max",
        "2", "--grid-dt", "0.5", "--yy-rule", "initiator_only", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = build_family(Family::Cycle(5)).unwrap();
    let mut s = vec![VertexState::Ignorant; 5];
    s[0] = VertexState::Spreader;
    s[2] = VertexState::Spreader;
    let cfg = SimConfig {
        lambda: 1.5,
        law: StiflingLaw::exponential(0.7).unwrap(),
        t_max: 2.0,
        grid_dt: 0.5,
        initial: InitialCondition::Explicit(s),
        seed: 0,
        yy_rule: YyRule::InitiatorOnly,
        debug_checks: false,
    };
    let times = [0.0, 0.5, 1.0, 1.5, 2.0];
    let exact = exact_oracle(&g, &cfg, &times).unwrap();
    let got = rows(&dir.path().join("oracle.csv"));
    assert_eq!(got.len(), times.len());
    for (i, (t, _, v)) in got.iter().enumerate() {
        assert_eq!(*t, times[i]);
        assert_eq!(*v, exact.expected[i][0]);
    }
}

#[test]
fn graph_build_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = rumorlab(&["graph", "build", "--graph", "decorated:6:6", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let args = |edges: &Path| {
        vec![
            "graph".to_string(),
            "verify".into(),
            "--edges".into(),
            edges.to_str().unwrap().into(),
            "--types".into(),
            out.join("types.json").to_str().unwrap().into(),
            "--blueprint".into(),
            out.join("blueprint.json").to_str().unwrap().into(),
        ]
    };
    let run = |a: Vec<String>| Command::new(env!("CARGO_BIN_EXE_rumorlab")).args(a).output().unwrap();
    let o = run(args(&out.join("edges.csv")));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // dropping an edge breaks two neighbourhoods
    let text = read(&out.join("edges.csv"));
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, lines.join("\n") + "\n").unwrap();
    let o = run(args(&broken));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn configuration_model_graph_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let bp = dir.path().join("bp.json");
    std::fs::write(&bp, r#"{"n_types": 2, "counts": [[0, 3], [1, 2]]}"#).unwrap();
    let build = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = rumorlab(&[
            "graph", "build", "--blueprint", bp.to_str().unwrap(), "--size", "80", "--seed", seed, "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read(&out.join("edges.csv"))
    };
    assert_eq!(build("a", "1"), build("b", "1"));
    assert_ne!(build("a", "1"), build("c", "2"));
}

#[test]
fn config_errors_point_into_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let cases = [
        (r#"{"mode": "meanfield", "lambda": "fast"}"#, "/lambda"),
        (r#"{"mode": "meanfield", "fractions": [[0.9, 0.1, 0], [0.9, "y", 0]]}"#, "/fractions/1/1"),
        (r#"{"mode": "meanfield", "graph": "torus:4", "law": "never", "lambda": -1, "y0": 0.1, "t_max": 1, "out": "x"}"#, "/lambda"),
        (r#"{"mode": "simulate", "graph": "klein:3"}"#, "/graph"),
        (r#"{"mode": "teleport"}"#, "/mode"),
    ];
    for (text, pointer) in cases {
        std::fs::write(&cfg, text).unwrap();
        let o = rumorlab(&["run", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(&format!("at {pointer}:")), "{text}: {}", stderr(&o));
    }
    std::fs::write(&cfg, r#"{"mode": "meanfield", "lamda": 0.5}"#).unwrap();
    let o = rumorlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));

    // a config written for another command is rejected
    std::fs::write(&cfg, r#"{"mode": "oracle"}"#).unwrap();
    let o = rumorlab(&["meanfield", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["frobnicate"][..],
        &["simulate", "--lambda", "abc"],
        &["acceptance"],
        &["acceptance", "no-such-criterion"],
        &["meanfield", "--graph", "torus:4"],
        &["run"],
    ] {
        let o = rumorlab(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
    assert_eq!(code(&rumorlab(&["--help"])), 0);
}

#[test]
fn run_dispatches_on_mode_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("out");
    let text = serde_json::json!({
        "mode": "meanfield",
        "blueprint": [[0, 4], [1, 3]],
        "law": {"law": "exponential", "rate": 0.2},
        "lambda": 0.5,
        "y0": 0.02,
        "t_max": 30.0,
        "dt": 0.05,
        "solver": "survival_weighted",
        "out": out,
    });
    std::fs::write(&cfg, text.to_string()).unwrap();
    let o = rumorlab(&["run", "--config", cfg.to_str().unwrap(), "--t-max", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got = rows(&out.join("meanfield.csv"));
    // two types over 21 grid points
    assert_eq!(got.len(), 42);
    assert_eq!(got.last().unwrap().0, 1.0);
    let meta: serde_json::Value = serde_json::from_str(&read(&out.join("meta.json"))).unwrap();
    assert_eq!(meta["config"]["t_max"], 1.0);
}

#[test]
fn fclt_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "--graph", "bipartite24:4", "--law", "exponential:1", "--lambda", "1", "--y0", "0.1", "--t-max", "0.5", "--dt",
        "0.05", "--solver", "survival_weighted",
    ];
    let cov = dir.path().join("cov");
    let mut args = vec!["fclt", "covariance", "--times", "0.1,0.25,0.5", "--out", cov.to_str().unwrap()];
    args.extend(base);
    let o = rumorlab(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let index: serde_json::Value = serde_json::from_str(&read(&cov.join("covariance_index.json"))).unwrap();
    assert_eq!(index["model"], "marked_poisson");
    for b in index["blocks"].as_array().unwrap() {
        let m: Vec<Vec<f64>> = read(&cov.join(b["file"].as_str().unwrap()))
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect())
            .collect();
        for i in 0..m.len() {
            for j in 0..m.len() {
                assert!((m[i][j] - m[j][i]).abs() <= 1e-12 * (1.0 + m[i][j].abs()), "{b}");
            }
        }
    }

    // off-grid times are a configuration problem
    let mut args = vec!["fclt", "covariance", "--times", "0.123", "--out", cov.to_str().unwrap()];
    args.extend(base);
    assert_eq!(code(&rumorlab(&args)), 2);

    let sample = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["fclt", "sample", "--samples", "3", "--seed", "5", "--out", out.to_str().unwrap()];
        args.extend(base);
        let o = rumorlab(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read(&out.join("fclt_samples.csv"))
    };
    let a = sample("s1");
    assert_eq!(a, sample("s2"));
    // 3 samples x 11 times x 2 types
    assert_eq!(a.lines().count(), 1 + 3 * 11 * 2);
    for l in a.lines().skip(1) {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[3] + f[4] + f[5]).abs() < 1e-12, "{l}");
    }
}

#[test]
fn acceptance_exit_code_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = rumorlab(&["acceptance", "growth-margin", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    let passed = stdout.contains("PASS #10");
    assert!(passed || stdout.contains("FAIL #10"), "{stdout}");
    assert_eq!(code(&o), if passed { 0 } else { 1 });
    let reports: serde_json::Value = serde_json::from_str(&read(&dir.path().join("acceptance.json"))).unwrap();
    assert_eq!(reports[0]["name"], "growth-margin");
    assert_eq!(reports[0]["passed"], passed);
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(root.join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_str().unwrap().to_owned();
        if name.ends_with("blueprint") {
            continue;
        }
        let out = dir.path().join(&name);
        let o = Command::new(env!("CARGO_BIN_EXE_rumorlab"))
            .current_dir(&root)
            .args(["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        assert!(out.join("meta.json").exists(), "{name}");
        seen += 1;
    }
    assert!(seen >= 5);
}
