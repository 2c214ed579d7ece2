//! Gate set discovery: searches the parameters of an ansatz gate set for the
//! highest score against a reference set.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use cobyla::{minimize, Func, RhoBeg, StopTols};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::decomp::{PipelineConfig, PipelineContext};
use crate::error::{Error, Result};
use crate::evaluate::{cost, evaluate_with, ComparisonReport, CostWeights, EvaluationReport};
use crate::gatelib::{assemble_gateset, GateSet, GateSpec};
use crate::matcore::{derive_seed, write_matrix_binary, RngHandle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    RandomSearch,
    /// Derivative-free local optimization (COBYLA).
    Cobyla,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub method: SearchMethod,
    pub max_evals: usize,
    pub restarts: usize,
    /// Seed for sampling starts and random-search candidates; defaults to
    /// the run seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            method: SearchMethod::Cobyla,
            max_evals: 1000,
            restarts: 1,
            seed: None,
            initial_point: None,
        }
    }
}

/// Outcome of a search over a box.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best_params: Vec<f64>,
    pub best_score: f64,
    /// `(evaluation index, score)` for every objective call.
    pub trajectory: Vec<(usize, f64)>,
    /// False when a local run stopped on its evaluation budget.
    pub converged: bool,
}

pub fn clip(x: &[f64], bounds: &[(f64, f64)]) -> (Vec<f64>, bool) {
    let mut clipped = false;
    let y = x
        .iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| {
            let c = v.clamp(lo, hi);
            clipped |= c != v;
            c
        })
        .collect();
    (y, clipped)
}

fn sample_point(bounds: &[(f64, f64)], rng: &mut RngHandle) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect()
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi) {
        return Err(Error::invalid("search bounds must be finite with lo <= hi"));
    }
    Ok(())
}

/// `max_evals` uniform samples in the box, evaluated in parallel; returns the
/// first maximizer.
pub fn random_search(
    f: impl Fn(&[f64]) -> f64 + Sync,
    bounds: &[(f64, f64)],
    max_evals: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    validate_bounds(bounds)?;
    if max_evals == 0 {
        return Err(Error::invalid("max_evals must be at least 1"));
    }
    let mut rng = RngHandle::new(seed);
    let points: Vec<Vec<f64>> = (0..max_evals).map(|_| sample_point(bounds, &mut rng)).collect();
    let scores: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    Ok(SearchOutcome {
        best_params: points[best].clone(),
        best_score: scores[best],
        trajectory: scores.into_iter().enumerate().collect(),
        converged: true,
    })
}

/// COBYLA maximization of `f` inside the box with `restarts` starts (the
/// first at `initial` when given), keeping the global best. Each start stops
/// when the trust radius falls below `1e-6` or after `max_evals` calls.
pub fn local_optimize(
    f: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    max_evals: usize,
    restarts: usize,
    initial: Option<&[f64]>,
    seed: u64,
) -> Result<SearchOutcome> {
    validate_bounds(bounds)?;
    if bounds.is_empty() {
        return Err(Error::invalid("local optimization needs at least one parameter"));
    }
    if max_evals == 0 {
        return Err(Error::invalid("max_evals must be at least 1"));
    }
    if let Some(x) = initial {
        if x.len() != bounds.len() {
            return Err(Error::invalid(format!(
                "initial point has {} entries, expected {}",
                x.len(),
                bounds.len()
            )));
        }
    }
    let mut rng = RngHandle::new(seed);
    let trajectory = Mutex::new(Vec::new());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = true;
    let rho: Vec<f64> = bounds.iter().map(|(lo, hi)| ((hi - lo) / 4.0).max(1e-3)).collect();
    for r in 0..restarts.max(1) {
        let x0 = match (r, initial) {
            (0, Some(x)) => clip(x, bounds).0,
            _ => sample_point(bounds, &mut rng),
        };
        let local_best: Mutex<Option<(f64, Vec<f64>)>> = Mutex::new(None);
        let obj = |x: &[f64], _: &mut ()| {
            let (x, _) = clip(x, bounds);
            let s = f(&x);
            let mut t = trajectory.lock().unwrap();
            let k = t.len();
            t.push((k, s));
            let mut lb = local_best.lock().unwrap();
            if s.is_finite() && lb.as_ref().is_none_or(|b| s > b.0) {
                *lb = Some((s, x));
            }
            if s.is_finite() { -s } else { 1e30 }
        };
        let cons: Vec<&dyn Func<()>> = Vec::new();
        let stop = StopTols {
            xtol_abs: vec![1e-6; bounds.len()],
            ..StopTols::default()
        };
        let res = minimize(obj, &x0, bounds, &cons, (), max_evals, RhoBeg::Set(rho.clone()), Some(stop));
        if res.is_err() {
            converged = false;
        } else if let Ok((status, _, _)) = &res {
            if matches!(status, cobyla::SuccessStatus::MaxEvalReached) {
                converged = false;
            }
        }
        if let Some(lb) = local_best.into_inner().unwrap() {
            if best.as_ref().is_none_or(|b| lb.0 > b.0) {
                best = Some(lb);
            }
        }
    }
    let trajectory = trajectory.into_inner().unwrap();
    let (best_score, best_params) = best.unwrap_or((f64::NEG_INFINITY, initial.map(|x| x.to_vec()).unwrap_or_default()));
    Ok(SearchOutcome {
        best_params,
        best_score,
        trajectory,
        converged,
    })
}

/// Scores candidate gate sets built from an ansatz against a cached
/// reference evaluation. All evaluations share one per-datapoint seed, so the
/// score is a deterministic function of the parameters.
pub struct Objective<'a> {
    pub ansatz: &'a [GateSpec],
    pub gs1_report: &'a EvaluationReport,
    pub ds: &'a Dataset,
    pub weights: CostWeights,
    pub cfg: &'a PipelineConfig,
    /// Freezes random gates in the ansatz.
    pub gate_seed: u64,
    /// Per-datapoint decomposition seed.
    pub eval_seed: u64,
    pub include_daggers: bool,
}

pub struct Evaluation {
    pub gateset: GateSet,
    pub report: EvaluationReport,
    pub comparison: ComparisonReport,
    pub clipped: bool,
}

impl Objective<'_> {
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.ansatz.iter().flat_map(|s| s.id.bounds()).collect()
    }

    /// Full evaluation at `params` (clipped into bounds first).
    pub fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let (x, clipped) = clip(params, &self.bounds());
        let gs = assemble_gateset(self.ansatz, &x, &mut RngHandle::new(self.gate_seed), self.include_daggers)?;
        let ctx = PipelineContext::new(&gs, self.cfg)?;
        let report = evaluate_with(&ctx, gs.label(), self.ds, self.eval_seed, false)?;
        let comparison = cost(self.gs1_report, &report, &self.weights, gs.mean_fab_cost())?;
        Ok(Evaluation {
            gateset: gs,
            report,
            comparison,
            clipped,
        })
    }

    /// Total score, or negative infinity when evaluation fails.
    pub fn score(&self, params: &[f64]) -> f64 {
        self.evaluate(params).map(|e| e.comparison.total).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug)]
pub struct DiscoveryReport {
    pub best_params: Vec<f64>,
    pub best_score: f64,
    pub best_gateset: GateSet,
    pub trajectory: Vec<(usize, f64)>,
    pub converged: bool,
    pub gate_seed: u64,
    pub eval_seed: u64,
    pub report1: EvaluationReport,
    pub report2: EvaluationReport,
    pub comparison: ComparisonReport,
}

/// Evaluates `gs1` once, searches the ansatz parameters, and re-evaluates the
/// best candidate for the final comparison.
pub fn discover_gateset(
    ansatz: &[GateSpec],
    gs1: &GateSet,
    ds: &Dataset,
    weights: &CostWeights,
    cfg: &PipelineConfig,
    search: &SearchConfig,
    seed: u64,
) -> Result<DiscoveryReport> {
    weights.validate()?;
    let n_params: usize = ansatz.iter().map(|s| s.param_count()).sum();
    if n_params == 0 && search.method == SearchMethod::Cobyla {
        return Err(Error::invalid(
            "ansatz has no parameters to optimize; compare the gate sets instead",
        ));
    }
    if ansatz.is_empty() {
        return Err(Error::invalid("ansatz is empty"));
    }
    let search_seed = search.seed.unwrap_or(seed);
    let eval_seed = derive_seed(seed, 1);
    let gate_seed = derive_seed(seed, 2);
    let ctx1 = PipelineContext::new(gs1, cfg)?;
    let report1 = evaluate_with(&ctx1, gs1.label(), ds, eval_seed, false)?;
    let include_daggers = gs1.include_daggers();
    let obj = Objective {
        ansatz,
        gs1_report: &report1,
        ds,
        weights: *weights,
        cfg,
        gate_seed,
        eval_seed,
        include_daggers,
    };
    let bounds = obj.bounds();
    let outcome = match search.method {
        SearchMethod::RandomSearch => random_search(|x| obj.score(x), &bounds, search.max_evals, search_seed)?,
        SearchMethod::Cobyla => local_optimize(
            |x| obj.score(x),
            &bounds,
            search.max_evals,
            search.restarts,
            search.initial_point.as_deref(),
            search_seed,
        )?,
    };
    let best = obj.evaluate(&outcome.best_params)?;
    Ok(DiscoveryReport {
        best_params: clip(&outcome.best_params, &bounds).0,
        best_score: best.comparison.total,
        best_gateset: best.gateset,
        trajectory: outcome.trajectory,
        converged: outcome.converged,
        gate_seed,
        eval_seed,
        report1,
        report2: best.report,
        comparison: best.comparison,
    })
}

/// Writes each gate of `gs` as `<dir>/<index>_<name>.umat`; the files load
/// back as F1/F2 gates.
pub fn export_gates(gs: &GateSet, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    gs.gates()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let p = dir.join(format!("{i}_{}.umat", g.name));
            write_matrix_binary(&p, g.matrix.matrix())?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_haar_unitaries;
    use crate::gatelib::{gate_matrix, GateId};

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()
    }

    #[test]
    fn random_search_toy() {
        let b = vec![(-1.0, 1.0); 3];
        let one = random_search(sphere, &b, 1, 0).unwrap();
        assert_eq!(one.trajectory.len(), 1);
        assert_eq!(one.best_score, one.trajectory[0].1);
        let r = random_search(sphere, &b, 1000, 1).unwrap();
        assert!(r.best_score > -0.1, "{}", r.best_score);
        assert_eq!(r.best_score, r.trajectory.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn cobyla_toy() {
        let b = vec![(-1.0, 1.0); 3];
        let r = local_optimize(sphere, &b, 2000, 1, None, 4).unwrap();
        assert!(r.best_score > -1e-8, "{}", r.best_score);
        assert!(r.best_params.iter().all(|v| (v - 0.3).abs() < 1e-4));
        let r2 = local_optimize(sphere, &b, 50, 3, Some(&[0.9, -0.9, 0.0]), 4).unwrap();
        assert!(r2.trajectory.len() <= 150);
    }

    #[test]
    fn clipping_is_transparent() {
        let b = [(0.0, 1.0), (0.0, 1.0)];
        assert_eq!(clip(&[-1.0, 2.0], &b), (vec![0.0, 1.0], true));
        assert_eq!(clip(&[0.5, 0.5], &b), (vec![0.5, 0.5], false));
    }

    #[test]
    fn objective_is_deterministic_and_self_consistent() {
        let ds = gen_haar_unitaries(1, 3, &mut RngHandle::new(0)).unwrap();
        let cfg = PipelineConfig {
            basis_depth: 4,
            recursion: 1,
            ..PipelineConfig::default()
        };
        let specs = [GateSpec::new(GateId::P1), GateSpec::new(GateId::P1)];
        let params = [1.0, 2.0, 3.0, 0.5, 0.1, 4.0];
        let gs1 = assemble_gateset(&specs, &params, &mut RngHandle::new(0), false).unwrap();
        let r1 = evaluate_with(&PipelineContext::new(&gs1, &cfg).unwrap(), "gs1", &ds, 7, false).unwrap();
        let obj = Objective {
            ansatz: &specs,
            gs1_report: &r1,
            ds: &ds,
            weights: CostWeights::default(),
            cfg: &cfg,
            gate_seed: 0,
            eval_seed: 7,
            include_daggers: false,
        };
        let e = obj.evaluate(&params).unwrap();
        assert_eq!(e.comparison.c_apf, 0.0);
        assert_eq!(obj.score(&params), obj.score(&params));
        let mut out = params;
        out[0] = -5.0;
        let mut inb = params;
        inb[0] = 0.0;
        assert_eq!(obj.score(&out), obj.score(&inb));
        assert!(obj.evaluate(&out).unwrap().clipped);
    }

    #[test]
    fn discovery_dimensions_and_export() {
        let ds = gen_haar_unitaries(1, 2, &mut RngHandle::new(0)).unwrap();
        let cfg = PipelineConfig {
            basis_depth: 3,
            recursion: 0,
            ..PipelineConfig::default()
        };
        let gs1 = assemble_gateset(&[GateSpec::new(GateId::H1), GateSpec::new(GateId::T1)], &[], &mut RngHandle::new(0), false)
            .unwrap();
        let search = SearchConfig {
            method: SearchMethod::RandomSearch,
            max_evals: 4,
            ..SearchConfig::default()
        };
        let ansatz = [GateSpec::new(GateId::H1), GateSpec::new(GateId::T1), GateSpec::new(GateId::P1)];
        let d = discover_gateset(&ansatz, &gs1, &ds, &CostWeights::default(), &cfg, &search, 3).unwrap();
        assert_eq!(d.best_params.len(), 3);
        assert_eq!(d.trajectory.len(), 4);
        assert_eq!(d.best_score, d.trajectory.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max));

        let fixed = [GateSpec::new(GateId::H1)];
        let err = discover_gateset(&fixed, &gs1, &ds, &CostWeights::default(), &cfg, &SearchConfig::default(), 3);
        assert!(err.is_err());

        let dir = tempfile::tempdir().unwrap();
        let paths = export_gates(&d.best_gateset, dir.path()).unwrap();
        let back = gate_matrix(&GateSpec::from_file(GateId::F1, &paths[2]), &[], &mut RngHandle::new(0)).unwrap();
        assert_eq!(&back, &d.best_gateset.gates()[2].matrix);
    }
}
