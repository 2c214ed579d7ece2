//! Config-driven runs: parses a TOML run description, executes one of the
//! three modes, and persists artifacts plus a manifest that reproduces them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::{export_coords, Dataset, DatasetSpec};
use crate::decomp::{PipelineConfig, PipelineContext};
use crate::discover::{discover_gateset, export_gates, SearchConfig, SearchMethod};
use crate::error::{Error, Result};
use crate::evaluate::{comparison_csv, comparison_json, cost, evaluate_with, CostWeights, EvaluationReport};
use crate::gatelib::{assemble_gateset, GateSet, GateSetRecord, GateSpec};
use crate::matcore::{derive_seed, RngHandle};

pub const MANIFEST: &str = "manifest.json";
pub const INCOMPLETE: &str = "INCOMPLETE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Compile,
    Compare,
    Discover,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Compile => "compile",
            Mode::Compare => "compare",
            Mode::Discover => "discover",
        })
    }
}

fn yes() -> bool {
    true
}

/// Gate set section: identifiers, flattened parameters, and an optional seed
/// for freezing R1/R2 gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSetConfig {
    pub gates: Vec<GateSpec>,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "yes")]
    pub include_daggers: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl GateSetConfig {
    fn resolved_specs(&self, base: &Path) -> Vec<GateSpec> {
        self.gates
            .iter()
            .map(|s| {
                let mut s = s.clone();
                if let Some(f) = &s.file {
                    s.file = Some(base.join(f));
                }
                s
            })
            .collect()
    }

    fn build(&self, base: &Path, default_seed: u64, default_label: &str) -> Result<GateSet> {
        let seed = self.seed.unwrap_or(default_seed);
        let gs = assemble_gateset(&self.resolved_specs(base), &self.params, &mut RngHandle::new(seed), self.include_daggers)?;
        Ok(gs.with_label(self.label.as_deref().unwrap_or(default_label)))
    }
}

fn default_weights() -> [f64; 5] {
    CostWeights::default().as_array()
}

fn default_output() -> PathBuf {
    PathBuf::from("forge-out")
}

/// A complete run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub label: String,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    pub dataset: DatasetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gs1: Option<GateSetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gs2: Option<GateSetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<GateSetConfig>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// `[apf, npf, acd, ncd, agf]`.
    #[serde(default = "default_weights")]
    pub weights: [f64; 5],
    #[serde(default)]
    pub search: SearchConfig,
}

pub const DEFAULTS: &str = "\
Run config (TOML). Unknown keys are errors.

  mode        compile | compare | discover        (required)
  seed        0
  label       \"\"
  output      \"forge-out\"
  threads     0 (all cores)

  [dataset]   kind = haar-unitary | haar-state | golden-equispaced | u3-grid
                     | stab-magic | weyl-random | weyl-equispaced-nonlocal
                     | from-files                  (required)
              qubits = 1, size = 0, resolution = 0, seed = run seed, paths = []

  [gs1] [gs2] [ansatz]
              gates = [\"H1\", \"T1\", {id = \"F1\", file = \"g.umat\", cost = 2.0}]
              params = [], include_daggers = true, seed = run seed, label = gate ids
              compile needs gs1; compare needs gs1 and gs2; discover needs gs1
              and ansatz

  [pipeline]  oneq = \"skd\", twoq = \"kak\", nq = \"qsd\", basis_depth = 6,
              recursion = 2, basis_cap = 2000000, rd_trials = 500,
              rd_max_length = 20, max_apps = 3, daggers_everywhere = false,
              fidelity = \"process\"

  weights     [50, 1, 1, 1, 0]   (apf, npf, acd, ncd, agf)

  [search]    method = \"cobyla\" | \"random-search\", max_evals = 1000,
              restarts = 1, seed = run seed, initial_point = none

Relative paths resolve against the config file's directory.
";

impl RunConfig {
    pub fn cost_weights(&self) -> Result<CostWeights> {
        CostWeights::new(self.weights).map_err(|e| Error::Config(format!("weights: {e}")))
    }

    /// Checks the per-mode requirements without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        let need = |name: &str, v: &Option<GateSetConfig>| {
            if v.is_none() {
                Err(Error::Config(format!("mode `{}` requires a [{name}] section", self.mode)))
            } else {
                Ok(())
            }
        };
        let forbid = |name: &str, v: &Option<GateSetConfig>| {
            if v.is_some() {
                Err(Error::Config(format!("mode `{}` does not use a [{name}] section", self.mode)))
            } else {
                Ok(())
            }
        };
        need("gs1", &self.gs1)?;
        match self.mode {
            Mode::Compile => {
                forbid("gs2", &self.gs2)?;
                forbid("ansatz", &self.ansatz)?;
            }
            Mode::Compare => {
                need("gs2", &self.gs2)?;
                forbid("ansatz", &self.ansatz)?;
            }
            Mode::Discover => {
                need("ansatz", &self.ansatz)?;
                forbid("gs2", &self.gs2)?;
                let a = self.ansatz.as_ref().unwrap();
                if !a.params.is_empty() {
                    return Err(Error::Config("ansatz.params: parameters are searched, not given".into()));
                }
                let n: usize = a.gates.iter().map(|g| g.param_count()).sum();
                if n == 0 && self.search.method == SearchMethod::Cobyla {
                    return Err(Error::Config("ansatz.gates: no parametric gate to optimize".into()));
                }
                if let Some(x) = &self.search.initial_point {
                    if x.len() != n {
                        return Err(Error::Config(format!(
                            "search.initial_point: expected {n} values, got {}",
                            x.len()
                        )));
                    }
                }
                if self.search.max_evals == 0 {
                    return Err(Error::Config("search.max_evals must be at least 1".into()));
                }
            }
        }
        for (name, g) in [("gs1", &self.gs1), ("gs2", &self.gs2)] {
            if let Some(g) = g {
                let n: usize = g.gates.iter().map(|s| s.param_count()).sum();
                if g.params.len() != n {
                    return Err(Error::Config(format!(
                        "{name}.params: gate set takes {n} parameters, got {}",
                        g.params.len()
                    )));
                }
                if g.gates.is_empty() {
                    return Err(Error::Config(format!("{name}.gates is empty")));
                }
            }
        }
        if matches!(self.dataset.qubits, 0) || self.dataset.qubits > crate::matcore::MAX_QUBITS {
            return Err(Error::Config(format!("dataset.qubits out of range: {}", self.dataset.qubits)));
        }
        if self.pipeline.rd_trials == 0 || self.pipeline.rd_max_length == 0 {
            return Err(Error::Config("pipeline.rd_trials and pipeline.rd_max_length must be positive".into()));
        }
        self.cost_weights()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates config text. Errors carry the line and column.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    /// Directory relative config paths resolve against.
    pub base_dir: PathBuf,
    pub seed: u64,
    pub wall_time_s: f64,
    pub gatesets: Vec<GateSetRecord>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub summary: String,
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))
    }
}

/// Executes `cfg` with relative inputs resolved against `base`, writing
/// artifacts into `cfg.output` (resolved against `base` when relative).
/// The directory holds an `INCOMPLETE` marker until the run succeeds.
pub fn run(cfg: &RunConfig, base: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let base = std::path::absolute(base).map_err(|e| Error::io(base, e))?;
    let dir = base.join(&cfg.output);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let out = Out { dir: dir.clone() };
    out.write(INCOMPLETE, "run did not finish\n")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let (summary, gatesets) = pool.install(|| execute(cfg, &base, &out))?;
    let manifest = Manifest {
        tool: "forge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        base_dir: base.clone(),
        seed: cfg.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        gatesets,
    };
    out.write(MANIFEST, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    let marker = dir.join(INCOMPLETE);
    std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(RunOutcome { output: dir, summary })
}

/// Repeats the run recorded in a manifest, optionally redirecting output and
/// changing the thread count.
pub fn rerun(manifest: &Path, output: Option<&Path>, threads: Option<usize>) -> Result<RunOutcome> {
    let m = read_manifest(manifest)?;
    let mut cfg = m.config;
    if let Some(o) = output {
        cfg.output = std::path::absolute(o).map_err(|e| Error::io(o, e))?;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    run(&cfg, &m.base_dir)
}

fn coords(ds: &Dataset, out: &Out) -> Result<()> {
    if ds.n_qubits <= 2 {
        out.write("coords.csv", export_coords(ds)?)?;
    }
    Ok(())
}

fn evaluate_named(gs: &GateSet, cfg: &RunConfig, ds: &Dataset, seed: u64, keep: bool) -> Result<EvaluationReport> {
    let ctx = PipelineContext::new(gs, &cfg.pipeline)?;
    evaluate_with(&ctx, gs.label(), ds, seed, keep)
}

fn execute(cfg: &RunConfig, base: &Path, out: &Out) -> Result<(String, Vec<GateSetRecord>)> {
    let ds = cfg.dataset.build(derive_seed(cfg.seed, 0), base)?;
    let eval_seed = derive_seed(cfg.seed, 1);
    let gate_seed = derive_seed(cfg.seed, 2);
    let gs1 = cfg.gs1.as_ref().unwrap().build(base, gate_seed, "gs1")?;
    match cfg.mode {
        Mode::Compile => {
            let r = evaluate_named(&gs1, cfg, &ds, eval_seed, true)?;
            for (i, c) in r.circuits.iter().flatten().enumerate() {
                out.write(format!("circuits/{i}.txt"), c.to_text())?;
            }
            out.write("report.csv", r.to_csv())?;
            out.write("summary.json", serde_json::to_string_pretty(&r.summary()).expect("summary serializes"))?;
            coords(&ds, out)?;
            let s = format!(
                "{}: <PF> = {:.6}, <CD> = {:.3} over {} targets",
                gs1.label(),
                r.pf_mean,
                r.cd_mean,
                ds.len()
            );
            Ok((s, vec![gs1.record()]))
        }
        Mode::Compare => {
            let gs2 = cfg.gs2.as_ref().unwrap().build(base, derive_seed(gate_seed, 1), "gs2")?;
            let r1 = evaluate_named(&gs1, cfg, &ds, eval_seed, false)?;
            let r2 = evaluate_named(&gs2, cfg, &ds, eval_seed, false)?;
            let c = cost(&r1, &r2, &cfg.cost_weights()?, gs2.mean_fab_cost())?;
            out.write("report.csv", comparison_csv(&r1, &r2))?;
            out.write("summary.json", comparison_json(&r1, &r2, &c))?;
            coords(&ds, out)?;
            let s = format!(
                "{}: <PF> = {:.6}, <CD> = {:.3}\n{}: <PF> = {:.6}, <CD> = {:.3}\nscore = {:.6}",
                r1.label, r1.pf_mean, r1.cd_mean, r2.label, r2.pf_mean, r2.cd_mean, c.total
            );
            Ok((s, vec![gs1.record(), gs2.record()]))
        }
        Mode::Discover => {
            let a = cfg.ansatz.as_ref().unwrap();
            let specs = a.resolved_specs(base);
            let mut search = cfg.search.clone();
            search.seed.get_or_insert(derive_seed(cfg.seed, 3));
            let d = discover_gateset(
                &specs,
                &gs1,
                &ds,
                &cfg.cost_weights()?,
                &cfg.pipeline,
                &search,
                cfg.seed,
            )?;
            let best = d.best_gateset.clone().with_label(a.label.as_deref().unwrap_or("best"));
            out.write("report.csv", comparison_csv(&d.report1, &d.report2))?;
            out.write("summary.json", discovery_json(&d, &best))?;
            let mut traj = String::from("eval,score\n");
            for (i, s) in &d.trajectory {
                let _ = writeln!(traj, "{i},{s}");
            }
            out.write("trajectory.csv", traj)?;
            export_gates(&best, &out.dir.join("gates"))?;
            coords(&ds, out)?;
            let s = format!(
                "best score = {:.6} at {:?}\n{}: <PF> = {:.6}, <CD> = {:.3}\n{}: <PF> = {:.6}, <CD> = {:.3}",
                d.best_score,
                d.best_params,
                d.report1.label,
                d.report1.pf_mean,
                d.report1.cd_mean,
                best.label(),
                d.report2.pf_mean,
                d.report2.cd_mean
            );
            Ok((s, vec![gs1.record(), best.record()]))
        }
    }
}

fn discovery_json(d: &crate::discover::DiscoveryReport, best: &GateSet) -> String {
    #[derive(Serialize)]
    struct J<'a> {
        best_params: &'a [f64],
        best_score: f64,
        converged: bool,
        evaluations: usize,
        best_gateset: GateSetRecord,
        gs1: crate::evaluate::ReportSummary<'a>,
        gs2: crate::evaluate::ReportSummary<'a>,
        comparison: &'a crate::evaluate::ComparisonReport,
    }
    serde_json::to_string_pretty(&J {
        best_params: &d.best_params,
        best_score: d.best_score,
        converged: d.converged,
        evaluations: d.trajectory.len(),
        best_gateset: best.record(),
        gs1: d.report1.summary(),
        gs2: d.report2.summary(),
        comparison: &d.comparison,
    })
    .expect("summary serializes")
}
