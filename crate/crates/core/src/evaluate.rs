//! Comparator: evaluates gate sets over datasets and scores one against another.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::decomp::{PipelineConfig, PipelineContext};
use crate::error::{Error, Result};
use crate::gatelib::{Circuit, GateSet};
use crate::matcore::RngHandle;

/// Per-datapoint fidelity and depth of one gate set on one dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub label: String,
    pub pf: Vec<f64>,
    pub cd: Vec<usize>,
    pub pf_mean: f64,
    pub pf_std: f64,
    pub cd_mean: f64,
    pub cd_std: f64,
    /// `(index, message)` for datapoints whose decomposition failed.
    pub failures: Vec<(usize, String)>,
    #[serde(skip)]
    pub circuits: Option<Vec<Circuit>>,
    #[serde(skip)]
    pub elapsed: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

impl EvaluationReport {
    pub fn from_traces(label: impl Into<String>, pf: Vec<f64>, cd: Vec<usize>) -> Self {
        let cdf: Vec<f64> = cd.iter().map(|&v| v as f64).collect();
        Self {
            label: label.into(),
            pf_mean: mean(&pf),
            pf_std: std_dev(&pf),
            cd_mean: mean(&cdf),
            cd_std: std_dev(&cdf),
            pf,
            cd,
            failures: Vec::new(),
            circuits: None,
            elapsed: 0.0,
        }
    }

    /// Rows `index,pf,cd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,pf,cd\n");
        for (i, (p, c)) in self.pf.iter().zip(&self.cd).enumerate() {
            let _ = writeln!(out, "{i},{p},{c}");
        }
        out
    }
}

/// Decomposes every datapoint with seed `derive_seed(seed, index)`, so the
/// report does not depend on how work is spread across threads. Failed
/// points score `pf = 0`, `cd = 0` and are listed in `failures`.
pub fn evaluate_gateset(
    gs: &GateSet,
    ds: &Dataset,
    cfg: &PipelineConfig,
    seed: u64,
    keep_circuits: bool,
) -> Result<EvaluationReport> {
    let start = Instant::now();
    let ctx = PipelineContext::new(gs, cfg)?;
    evaluate_with(&ctx, gs.label(), ds, seed, keep_circuits).map(|mut r| {
        r.elapsed = start.elapsed().as_secs_f64();
        r
    })
}

pub fn evaluate_with(
    ctx: &PipelineContext,
    label: &str,
    ds: &Dataset,
    seed: u64,
    keep_circuits: bool,
) -> Result<EvaluationReport> {
    let parent = RngHandle::new(seed);
    let results: Vec<_> = ds
        .unitaries
        .par_iter()
        .enumerate()
        .map(|(i, u)| ctx.decompose(u, &mut parent.child(i as u64)))
        .collect();
    let mut pf = Vec::with_capacity(results.len());
    let mut cd = Vec::with_capacity(results.len());
    let mut circuits = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                pf.push(r.fidelity.clamp(0.0, 1.0));
                cd.push(r.depth);
                if keep_circuits {
                    circuits.push(r.circuit);
                }
            }
            Err(e) => {
                pf.push(0.0);
                cd.push(0);
                failures.push((i, e.to_string()));
                if keep_circuits {
                    circuits.push(Circuit::new(ds.n_qubits, label));
                }
            }
        }
    }
    let mut rep = EvaluationReport::from_traces(label, pf, cd);
    rep.failures = failures;
    if keep_circuits {
        rep.circuits = Some(circuits);
    }
    Ok(rep)
}

/// Weights of the five score terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub apf: f64,
    pub npf: f64,
    pub acd: f64,
    pub ncd: f64,
    pub agf: f64,
}

impl CostWeights {
    pub fn new(w: [f64; 5]) -> Result<Self> {
        let cw = Self {
            apf: w[0],
            npf: w[1],
            acd: w[2],
            ncd: w[3],
            agf: w[4],
        };
        cw.validate()?;
        Ok(cw)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.apf, self.npf, self.acd, self.ncd, self.agf]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("cost weights must be finite and nonnegative"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("cost weights are all zero"));
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            apf: 50.0,
            npf: 1.0,
            acd: 1.0,
            ncd: 1.0,
            agf: 0.0,
        }
    }
}

/// Pearson correlation, or `None` when either trace has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Novelty {
    pub c_npf: f64,
    pub c_ncd: f64,
    pub pearson_pf: f64,
    pub pearson_defined: bool,
}

/// Anti-trend score in `(0, 1]`: `1 / (1 + x)` with `x` the L2 distance
/// between the centered second trace and the negated centered first trace,
/// divided by `scale`. Reaches 1 when the traces mirror each other.
fn anti_trend(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let x = a
        .iter()
        .zip(b)
        .map(|(p, q)| ((q - mb) + (p - ma)).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    1.0 / (1.0 + x / scale)
}

pub fn novelty_scores(r1: &EvaluationReport, r2: &EvaluationReport) -> Result<Novelty> {
    if r1.pf.len() != r2.pf.len() {
        return Err(Error::invalid(format!(
            "reports cover {} and {} datapoints",
            r1.pf.len(),
            r2.pf.len()
        )));
    }
    let c_npf = anti_trend(&r1.pf, &r2.pf, (r1.pf_mean + r2.pf_mean) / 2.0);
    let norm = |cd: &[usize], m: f64| -> Vec<f64> {
        cd.iter().map(|&v| if m > 0.0 { v as f64 / m } else { 0.0 }).collect()
    };
    let c_ncd = anti_trend(&norm(&r1.cd, r1.cd_mean), &norm(&r2.cd, r2.cd_mean), 1.0);
    let p = pearson(&r1.pf, &r2.pf);
    Ok(Novelty {
        c_npf,
        c_ncd,
        pearson_pf: p.unwrap_or(0.0),
        pearson_defined: p.is_some(),
    })
}

/// The five score terms of a candidate (`r2`) against a reference (`r1`) and
/// their weighted sum, a score to maximize.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub c_apf: f64,
    pub c_npf: f64,
    pub c_acd: f64,
    pub c_ncd: f64,
    pub c_agf: f64,
    pub pearson_pf: f64,
    pub pearson_defined: bool,
    pub weights: CostWeights,
    pub total: f64,
}

impl ComparisonReport {
    pub fn terms(&self) -> [f64; 5] {
        [self.c_apf, self.c_npf, self.c_acd, self.c_ncd, self.c_agf]
    }
}

/// `c_apf = <PF>_2 - <PF>_1`, `c_acd = (<CD>_1 - <CD>_2) / max(<CD>_1, 1)`,
/// novelty terms from [`novelty_scores`], `c_agf = -mean_fab_cost_2`.
pub fn cost(r1: &EvaluationReport, r2: &EvaluationReport, w: &CostWeights, mean_fab_cost_2: f64) -> Result<ComparisonReport> {
    let nov = novelty_scores(r1, r2)?;
    let c_apf = r2.pf_mean - r1.pf_mean;
    let c_acd = (r1.cd_mean - r2.cd_mean) / r1.cd_mean.max(1.0);
    let c_agf = -mean_fab_cost_2;
    let terms = [c_apf, nov.c_npf, c_acd, nov.c_ncd, c_agf];
    let total = terms.iter().zip(w.as_array()).map(|(c, w)| c * w).sum();
    Ok(ComparisonReport {
        c_apf,
        c_npf: nov.c_npf,
        c_acd,
        c_ncd: nov.c_ncd,
        c_agf,
        pearson_pf: nov.pearson_pf,
        pearson_defined: nov.pearson_defined,
        weights: *w,
        total,
    })
}

/// Rows `index,pf1,cd1,pf2,cd2`.
pub fn comparison_csv(r1: &EvaluationReport, r2: &EvaluationReport) -> String {
    let mut out = String::from("index,pf1,cd1,pf2,cd2\n");
    for i in 0..r1.pf.len().min(r2.pf.len()) {
        let _ = writeln!(out, "{i},{},{},{},{}", r1.pf[i], r1.cd[i], r2.pf[i], r2.cd[i]);
    }
    out
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    gs1: ReportSummary<'a>,
    gs2: ReportSummary<'a>,
    comparison: &'a ComparisonReport,
}

#[derive(Serialize)]
pub struct ReportSummary<'a> {
    pub label: &'a str,
    pub pf_mean: f64,
    pub pf_std: f64,
    pub cd_mean: f64,
    pub cd_std: f64,
    pub failures: &'a [(usize, String)],
}

impl EvaluationReport {
    pub fn summary(&self) -> ReportSummary<'_> {
        ReportSummary {
            label: &self.label,
            pf_mean: self.pf_mean,
            pf_std: self.pf_std,
            cd_mean: self.cd_mean,
            cd_std: self.cd_std,
            failures: &self.failures,
        }
    }
}

pub fn comparison_json(r1: &EvaluationReport, r2: &EvaluationReport, c: &ComparisonReport) -> String {
    serde_json::to_string_pretty(&SummaryJson {
        gs1: r1.summary(),
        gs2: r2.summary(),
        comparison: c,
    })
    .expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_haar_unitaries, DatasetKind};
    use crate::gatelib::{assemble_gateset, hadamard, GateId, GateSpec};
    use crate::matcore::UnitaryMatrix;

    fn ht() -> GateSet {
        let specs = [GateSpec::new(GateId::H1), GateSpec::new(GateId::T1)];
        assemble_gateset(&specs, &[], &mut RngHandle::new(0), false).unwrap()
    }

    fn rep(pf: &[f64], cd: &[usize]) -> EvaluationReport {
        EvaluationReport::from_traces("r", pf.to_vec(), cd.to_vec())
    }

    #[test]
    fn single_in_set_point() {
        let ds = Dataset {
            n_qubits: 1,
            kind: DatasetKind::FromFiles,
            seed: None,
            unitaries: vec![UnitaryMatrix::new(hadamard()).unwrap()],
        };
        let r = evaluate_gateset(&ht(), &ds, &PipelineConfig::default(), 0, false).unwrap();
        assert!((r.pf[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.cd, vec![1]);
    }

    #[test]
    fn haar_band_and_determinism() {
        let ds = gen_haar_unitaries(1, 10, &mut RngHandle::new(0)).unwrap();
        let a = evaluate_gateset(&ht(), &ds, &PipelineConfig::default(), 4, false).unwrap();
        let b = evaluate_gateset(&ht(), &ds, &PipelineConfig::default(), 4, false).unwrap();
        assert!(a.pf_mean > 0.6 && a.pf_mean < 1.0, "{}", a.pf_mean);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!((a.pf_mean - a.pf.iter().sum::<f64>() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn failures_degrade_to_zero() {
        let ds = gen_haar_unitaries(2, 2, &mut RngHandle::new(0)).unwrap();
        let r = evaluate_gateset(&ht(), &ds, &PipelineConfig::default(), 0, false).unwrap();
        assert_eq!(r.pf, vec![0.0, 0.0]);
        assert_eq!(r.failures.len(), 2);
    }

    #[test]
    fn novelty_cases() {
        let r1 = rep(&[0.2, 0.8, 0.4, 0.6], &[1, 2, 3, 4]);
        let same = novelty_scores(&r1, &r1).unwrap();
        assert!((same.pearson_pf - 1.0).abs() < 1e-12);
        let mirrored = rep(&[0.8, 0.2, 0.6, 0.4], &[4, 3, 2, 1]);
        let n = novelty_scores(&r1, &mirrored).unwrap();
        assert!((n.pearson_pf + 1.0).abs() < 1e-12);
        assert!((n.c_npf - 1.0).abs() < 1e-12);
        assert!(n.c_npf > same.c_npf);
        let flat = rep(&[0.5; 4], &[1; 4]);
        let f = novelty_scores(&r1, &flat).unwrap();
        assert!(!f.pearson_defined && f.pearson_pf == 0.0);
        assert!(novelty_scores(&r1, &rep(&[0.5], &[1])).is_err());
    }

    #[test]
    fn cost_terms() {
        let r1 = rep(&[0.2, 0.8, 0.4, 0.6], &[10, 20, 30, 40]);
        let w = CostWeights::new([1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let c = cost(&r1, &r1, &w, 1.0).unwrap();
        assert_eq!(c.c_apf, 0.0);
        assert_eq!(c.c_acd, 0.0);
        let r2 = rep(&[0.9, 0.9, 0.9, 1.0], &[5, 5, 5, 5]);
        let c = cost(&r1, &r2, &CostWeights::default(), 1.0).unwrap();
        assert!((c.c_apf - 0.425).abs() < 1e-12);
        assert!((c.c_acd - 0.8).abs() < 1e-12);
        let back = cost(&r2, &r1, &CostWeights::default(), 1.0).unwrap();
        assert_eq!(back.c_apf, -c.c_apf);
        assert!((back.c_npf - c.c_npf).abs() < 1e-15);
        assert!(CostWeights::new([0.0; 5]).is_err());
        assert!(CostWeights::new([1.0, -1.0, 0.0, 0.0, 0.0]).is_err());
    }
}
