//! Run configuration: a JSON file whose keys can each be overridden by the
//! flag of the same name (`t_max` <-> `--t-max`).

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use rumorlab::engine::{InitialCondition, YyRule};
use rumorlab::experiments::DEFAULT_SEED;
use rumorlab::fluctuations::CovarianceModel;
use rumorlab::meanfield::Solver;
use rumorlab::qtgraph::{build_configuration_model, build_family, Family, Graph, TypeBlueprint};
use rumorlab::stifling::StiflingLaw;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Graph,
    Simulate,
    Meanfield,
    Fclt,
    Oracle,
    Acceptance,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Graph => "graph",
            Mode::Simulate => "simulate",
            Mode::Meanfield => "meanfield",
            Mode::Fclt => "fclt",
            Mode::Oracle => "oracle",
            Mode::Acceptance => "acceptance",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SolverName {
    Flln,
    SurvivalWeighted,
    ClassicOde,
}

impl From<SolverName> for Solver {
    fn from(s: SolverName) -> Self {
        match s {
            SolverName::Flln => Solver::Flln,
            SolverName::SurvivalWeighted => Solver::SurvivalWeighted,
            SolverName::ClassicOde => Solver::ClassicOde,
        }
    }
}

/// A law written either as the short form `weibull:2:5` or as the tagged
/// object `{"law": "weibull", "shape": 2, "scale": 5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Short(String),
    Full(StiflingLaw),
}

/// A blueprint given inline as a count matrix or as a path to a blueprint
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlueprintSpec {
    Counts(Vec<Vec<u32>>),
    File(PathBuf),
}

/// Every configurable key. Absent keys fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    /// `build`/`verify` for graphs, `sample`/`covariance` for fclt.
    pub action: Option<String>,
    /// Built-in family, e.g. `torus:50`.
    pub graph: Option<String>,
    pub blueprint: Option<BlueprintSpec>,
    /// Target vertex count for the configuration model.
    pub size: Option<usize>,
    /// Edge list and type sidecar to verify.
    pub edges: Option<PathBuf>,
    pub types: Option<PathBuf>,
    pub law: Option<LawSpec>,
    pub lambda: Option<f64>,
    /// Initial spreader fraction of every type.
    pub y0: Option<f64>,
    /// Per-type `[x, y, z]` fractions; overrides `y0`.
    pub fractions: Option<Vec<[f64; 3]>>,
    /// Vertices that start as spreaders (everything else ignorant).
    pub spreaders: Option<Vec<usize>>,
    pub t_max: Option<f64>,
    /// Mean-field step.
    pub dt: Option<f64>,
    /// Simulator recording step.
    pub grid_dt: Option<f64>,
    pub replicas: Option<usize>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub yy_rule: Option<YyRule>,
    pub solver: Option<SolverName>,
    pub model: Option<CovarianceModel>,
    pub times: Option<Vec<f64>>,
    pub samples: Option<usize>,
    /// Write counts instead of densities.
    pub counts: Option<bool>,
    pub criterion: Option<String>,
    pub out: Option<PathBuf>,
}

/// Flags mirroring [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for all randomness (falls back to $RUMORLAB_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Built-in graph family: cycle:N, bipartite24:N, decorated:M:N,
    /// torus:L, comb:N, strip:N, complete:N.
    #[arg(long, global = true, value_name = "FAMILY")]
    pub graph: Option<String>,
    /// Blueprint file for the configuration model or the mean-field system.
    #[arg(long, global = true, value_name = "FILE")]
    pub blueprint: Option<PathBuf>,
    #[arg(long, global = true)]
    pub size: Option<usize>,
    #[arg(long, global = true, value_name = "FILE")]
    pub edges: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub types: Option<PathBuf>,
    /// exponential:R, weibull:K:S, cauchy:LOC:S, deterministic:T, never,
    /// immediate.
    #[arg(long, global = true)]
    pub law: Option<String>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub y0: Option<f64>,
    /// Comma-separated vertex ids that start as spreaders.
    #[arg(long, global = true, value_delimiter = ',')]
    pub spreaders: Option<Vec<usize>>,
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "grid-dt", global = true)]
    pub grid_dt: Option<f64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Worker threads for replica runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long = "yy-rule", global = true, value_parser = parse_yy_rule)]
    pub yy_rule: Option<YyRule>,
    #[arg(long, global = true)]
    pub solver: Option<SolverName>,
    /// table or marked_poisson.
    #[arg(long, global = true, value_parser = parse_model)]
    pub model: Option<CovarianceModel>,
    /// Comma-separated times.
    #[arg(long, global = true, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Write counts instead of densities.
    #[arg(long, global = true)]
    pub counts: bool,
}

fn parse_yy_rule(s: &str) -> Result<YyRule, String> {
    match s {
        "both_stifle" | "both-stifle" => Ok(YyRule::BothStifle),
        "initiator_only" | "initiator-only" => Ok(YyRule::InitiatorOnly),
        _ => Err(format!("unknown rule `{s}` (expected both_stifle or initiator_only)")),
    }
}

fn parse_model(s: &str) -> Result<CovarianceModel, String> {
    s.parse()
}

/// JSON pointer of a deserialisation path, e.g. `/law/shape`.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            file: origin.display().to_string(),
            pointer: pointer(e.path()),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, path)
    }
}

/// A configuration with flag overrides applied; remembers where each key
/// came from so errors can point at it.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cfg: RunConfig,
    pub file: Option<PathBuf>,
    from_flags: BTreeSet<&'static str>,
}

macro_rules! overlay {
    ($cfg:expr, $flags:expr, $set:expr, $($key:ident),*) => {
        $(
            if let Some(v) = $flags.$key.clone() {
                $cfg.$key = Some(v.into());
                $set.insert(stringify!($key));
            }
        )*
    };
}

impl Resolved {
    pub fn new(flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut set = BTreeSet::new();
        overlay!(
            cfg, flags, set, out, seed, graph, size, edges, types, lambda, y0, spreaders, t_max, dt, grid_dt,
            replicas, jobs, yy_rule, solver, model, times, samples
        );
        if let Some(b) = &flags.blueprint {
            cfg.blueprint = Some(BlueprintSpec::File(b.clone()));
            set.insert("blueprint");
        }
        if let Some(l) = &flags.law {
            cfg.law = Some(LawSpec::Short(l.clone()));
            set.insert("law");
        }
        if flags.counts {
            cfg.counts = Some(true);
            set.insert("counts");
        }
        Ok(Self {
            cfg,
            file: flags.config.clone(),
            from_flags: set,
        })
    }

    /// Error about key `key`, located either at a flag or a JSON pointer.
    pub fn bad(&self, key: &'static str, message: impl Into<String>) -> CliError {
        let message = message.into();
        if self.from_flags.contains(key) {
            CliError::Usage(format!("--{}: {message}", key.replace('_', "-")))
        } else {
            CliError::Config {
                file: self
                    .file
                    .as_ref()
                    .map_or_else(|| "<defaults>".into(), |p| p.display().to_string()),
                pointer: format!("/{key}"),
                message,
            }
        }
    }

    fn missing(&self, key: &'static str) -> CliError {
        CliError::Usage(format!(
            "missing `{key}`: pass --{} or set it in the config file",
            key.replace('_', "-")
        ))
    }

    /// Checks the config's `mode` against the command being run.
    pub fn expect_mode(&self, mode: Mode) -> Result<(), CliError> {
        match self.cfg.mode {
            Some(m) if m != mode => Err(self.bad("mode", format!("config is for `{m}` but the command is `{mode}`"))),
            _ => Ok(()),
        }
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.cfg.seed {
            return Ok(s);
        }
        match std::env::var("RUMORLAB_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("RUMORLAB_SEED must be an unsigned integer, got `{v}`"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.cfg.out.clone().ok_or_else(|| self.missing("out"))?;
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(dir)
    }

    pub fn law(&self) -> Result<StiflingLaw, CliError> {
        match self.cfg.law.as_ref().ok_or_else(|| self.missing("law"))? {
            LawSpec::Short(s) => s.parse().map_err(|e| self.bad("law", format!("{e}"))),
            LawSpec::Full(l) => l.validated().map_err(|e| self.bad("law", e.to_string())),
        }
    }

    pub fn positive(&self, key: &'static str, v: Option<f64>, default: Option<f64>) -> Result<f64, CliError> {
        let v = v.or(default).ok_or_else(|| self.missing(key))?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.bad(key, format!("must be a positive number, got {v}")))
        }
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        self.positive("lambda", self.cfg.lambda, None)
    }

    pub fn t_max(&self) -> Result<f64, CliError> {
        self.positive("t_max", self.cfg.t_max, None)
    }

    pub fn family(&self) -> Result<Option<Family>, CliError> {
        self.cfg
            .graph
            .as_deref()
            .map(|s| s.parse::<Family>().map_err(|e| self.bad("graph", e.to_string())))
            .transpose()
    }

    pub fn blueprint_spec(&self) -> Result<Option<TypeBlueprint>, CliError> {
        let Some(spec) = &self.cfg.blueprint else {
            return Ok(None);
        };
        let bp = match spec {
            BlueprintSpec::Counts(c) => TypeBlueprint::new(c.clone()).map_err(|e| self.bad("blueprint", e.to_string()))?,
            BlueprintSpec::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| self.bad("blueprint", format!("cannot read {}: {e}", p.display())))?;
                TypeBlueprint::from_json(&text).map_err(|e| self.bad("blueprint", format!("{}: {e}", p.display())))?
            }
        };
        Ok(Some(bp))
    }

    /// Blueprint from `blueprint` or, failing that, from the graph family.
    pub fn blueprint(&self) -> Result<TypeBlueprint, CliError> {
        if let Some(bp) = self.blueprint_spec()? {
            return Ok(bp);
        }
        match self.family()? {
            Some(f) => Ok(f.blueprint()),
            None => Err(CliError::Usage(
                "need a blueprint: pass --blueprint FILE or --graph FAMILY (or set them in the config)".into(),
            )),
        }
    }

    /// A built-in family, or a configuration-model graph from `blueprint`
    /// and `size` seeded with the run seed.
    pub fn build_graph(&self) -> Result<Graph, CliError> {
        if let Some(f) = self.family()? {
            return build_family(f).map_err(|e| self.bad("graph", e.to_string()));
        }
        let bp = self.blueprint_spec()?.ok_or_else(|| {
            CliError::Usage("need a graph: pass --graph FAMILY or --blueprint FILE --size N".into())
        })?;
        let size = self.cfg.size.ok_or_else(|| self.missing("size"))?;
        build_configuration_model(&bp, size, self.seed()?).map_err(|e| self.bad("size", e.to_string()))
    }

    pub fn initial_condition(&self, g: &Graph) -> Result<InitialCondition, CliError> {
        use rumorlab::engine::VertexState;
        if let Some(ids) = &self.cfg.spreaders {
            let n = g.num_vertices();
            let mut s = vec![VertexState::Ignorant; n];
            for &v in ids {
                if v >= n {
                    return Err(self.bad("spreaders", format!("vertex {v} out of range for {n} vertices")));
                }
                s[v] = VertexState::Spreader;
            }
            return Ok(InitialCondition::Explicit(s));
        }
        Ok(InitialCondition::Proportions(self.fractions(g.n_types())?))
    }

    /// Per-type starting fractions from `fractions` or `y0`.
    pub fn fractions(&self, n_types: usize) -> Result<Vec<[f64; 3]>, CliError> {
        if let Some(f) = &self.cfg.fractions {
            if f.len() != n_types {
                return Err(self.bad("fractions", format!("{} rows for {n_types} types", f.len())));
            }
            return Ok(f.clone());
        }
        let y = self.cfg.y0.ok_or_else(|| self.missing("y0"))?;
        if !(0.0..=1.0).contains(&y) {
            return Err(self.bad("y0", format!("must lie in [0, 1], got {y}")));
        }
        Ok(vec![[1.0 - y, y, 0.0]; n_types])
    }

    pub fn replicas(&self) -> Result<usize, CliError> {
        match self.cfg.replicas {
            Some(0) => Err(self.bad("replicas", "must be at least 1")),
            Some(r) => Ok(r),
            None => Ok(1),
        }
    }

    pub fn jobs(&self) -> Result<Option<usize>, CliError> {
        match self.cfg.jobs {
            Some(0) => Err(self.bad("jobs", "must be at least 1")),
            j => Ok(j),
        }
    }
}
