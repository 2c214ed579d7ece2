//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to stderr
//! (bypassing output capture) before asserting.

use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gateforge::datasets::{gen_haar_unitaries, gen_stab_magic, Dataset};
use gateforge::decomp::{
    kak_canonicalize, qsd_decompose, skd_build_basis, skd_decompose, skd_group_commutator, OneqMethod,
    PipelineConfig, PipelineContext,
};
use gateforge::discover::{discover_gateset, DiscoveryReport, SearchConfig, SearchMethod};
use gateforge::evaluate::{cost, evaluate_with, pearson, CostWeights, EvaluationReport};
use gateforge::gatelib::{assemble_gateset, GateId, GateSet, GateSpec};
use gateforge::matcore::{haar_unitary, operator_distance, process_fidelity, RngHandle, UnitaryMatrix};
use gateforge::run::{parse_config_str, rerun, run};
use num_complex::Complex64 as C64;

fn verdict(n: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {n}: {detail}");
}

fn gateset(ids: &[GateId], params: &[f64]) -> GateSet {
    let specs: Vec<GateSpec> = ids.iter().map(|&g| GateSpec::new(g)).collect();
    assemble_gateset(&specs, params, &mut RngHandle::new(0), true).unwrap()
}

fn dist(a: &UnitaryMatrix, b: &UnitaryMatrix) -> f64 {
    operator_distance(a, b).unwrap()
}

#[test]
fn c1_decomposition_exactness() {
    const TOL: f64 = 1e-8;
    const BUDGET: Duration = Duration::from_secs(120);
    let start = Instant::now();
    let mut rng = RngHandle::new(101);
    let mut worst_kak: f64 = 0.0;
    for _ in 0..1000 {
        let u = haar_unitary(4, &mut rng).unwrap();
        let c = kak_canonicalize(&u).unwrap();
        worst_kak = worst_kak.max(dist(&c.reconstruct(), &u));
    }
    let mut worst_qsd: f64 = 0.0;
    let mut max_cx = 0;
    for (dim, count) in [(4, 100), (8, 20)] {
        for _ in 0..count {
            let u = haar_unitary(dim, &mut rng).unwrap();
            let r = qsd_decompose(&u).unwrap();
            worst_qsd = worst_qsd.max(dist(&r.circuit.unitary(), &u));
            if dim == 4 {
                max_cx = max_cx.max(r.circuit.count_arity(2));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_kak < TOL && worst_qsd < TOL && max_cx <= 3 && elapsed < BUDGET;
    verdict(
        1,
        pass,
        &format!(
            "max KAK distance {worst_kak:.2e}, max QSD distance {worst_qsd:.2e} (tol {TOL:e}), \
             2-qubit QSD CX <= {max_cx}, {:.1}s (budget {}s)",
            elapsed.as_secs_f64(),
            BUDGET.as_secs()
        ),
    );
    assert!(pass);
}

fn su2_rotation(theta: f64, axis: [f64; 3]) -> UnitaryMatrix {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|v| v / n);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let i = C64::i();
    let m = nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0) - i * s * z,
            -i * s * x - C64::new(s * y, 0.0),
            -i * s * x + C64::new(s * y, 0.0),
            C64::new(c, 0.0) + i * s * z,
        ],
    );
    UnitaryMatrix::new(m).unwrap()
}

#[test]
fn c2_commutator_identity() {
    const TOL: f64 = 1e-8;
    let mut rng = RngHandle::new(202);
    let mut targets = Vec::new();
    for _ in 0..998 {
        let u = haar_unitary(2, &mut rng).unwrap();
        let det = u.matrix().determinant().sqrt();
        targets.push(u.scaled(det.inv()));
    }
    for theta in [1e-4, std::f64::consts::PI - 1e-4] {
        let axis = [rng.normal(), rng.normal(), rng.normal()];
        targets.push(su2_rotation(theta, axis));
    }
    let mut worst: f64 = 0.0;
    for d in &targets {
        let (v, w) = skd_group_commutator(d).unwrap();
        let rebuilt = v.compose(&w).compose(&v.adjoint()).compose(&w.adjoint());
        worst = worst.max(dist(&rebuilt, d));
    }
    let pass = worst < TOL;
    verdict(
        2,
        pass,
        &format!("{} SU(2) inputs, max VWV^dag W^dag distance {worst:.2e} (tol {TOL:e})", targets.len()),
    );
    assert!(pass);
}

#[test]
fn c3_skd_improvement() {
    let ht = gateset(&[GateId::H1, GateId::T1], &[]);
    let targets = gen_haar_unitaries(1, 10, &mut RngHandle::new(303)).unwrap();
    let mean_dist = |depth: usize, n: usize| {
        let basis = skd_build_basis(&ht, depth, 2_000_000).unwrap();
        let total: f64 = targets
            .unitaries
            .iter()
            .map(|u| dist(&skd_decompose(u, &basis, n).unwrap().circuit.unitary(), u))
            .sum();
        total / targets.len() as f64
    };
    let n0 = mean_dist(6, 0);
    let n2 = mean_dist(6, 2);
    let by_depth: Vec<f64> = (2..=6).map(|d| mean_dist(d, 0)).collect();
    let monotone = by_depth.windows(2).all(|w| w[1] <= w[0]) && by_depth[4] < by_depth[0];
    let pass = n2 <= n0 && monotone;
    verdict(
        3,
        pass,
        &format!("mean distance n=0 {n0:.4}, n=2 {n2:.4}; n=0 by depth 2..6 {by_depth:.4?}"),
    );
    assert!(pass);
}

fn one_qubit_pipeline() -> PipelineConfig {
    PipelineConfig::default()
}

/// Search over `{P1, P1}` against `{H1, T1}` on 10 Haar targets with a
/// 1000-evaluation COBYLA budget.
fn discovery(weights: [f64; 5]) -> DiscoveryReport {
    let ds = gen_haar_unitaries(1, 10, &mut RngHandle::new(404)).unwrap();
    let gs1 = gateset(&[GateId::H1, GateId::T1], &[]);
    let ansatz = [GateSpec::new(GateId::P1), GateSpec::new(GateId::P1)];
    let search = SearchConfig {
        method: SearchMethod::Cobyla,
        max_evals: 1000,
        restarts: 1,
        seed: Some(405),
        initial_point: None,
    };
    discover_gateset(
        &ansatz,
        &gs1,
        &ds,
        &CostWeights::new(weights).unwrap(),
        &one_qubit_pipeline(),
        &search,
        406,
    )
    .unwrap()
}

fn table3_discovery() -> &'static (DiscoveryReport, Duration) {
    static CELL: OnceLock<(DiscoveryReport, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let d = discovery([50.0, 1.0, 1.0, 1.0, 0.0]);
        (d, start.elapsed())
    })
}

#[test]
fn c4_directional_skd_table() {
    const BUDGET: Duration = Duration::from_secs(30 * 60);
    let (d, elapsed) = table3_discovery();
    let (r1, r2) = (&d.report1, &d.report2);
    let pass = r2.pf_mean > r1.pf_mean && r2.cd_mean < r1.cd_mean && *elapsed < BUDGET;
    verdict(
        4,
        pass,
        &format!(
            "<PF> {:.4} (H,T) vs {:.4} (P1,P1); <CD> {:.2} vs {:.2}; {} evals in {:.0}s (budget {}s)",
            r1.pf_mean,
            r2.pf_mean,
            r1.cd_mean,
            r2.cd_mean,
            d.trajectory.len(),
            elapsed.as_secs_f64(),
            BUDGET.as_secs()
        ),
    );
    assert!(pass);
}

#[test]
fn c5_novelty_anticorrelation() {
    const BOUND: f64 = -0.3;
    let d = discovery([50.0, 20.0, 1.0, 1.0, 0.0]);
    let r = pearson(&d.report1.pf, &d.report2.pf);
    let pass = r.is_some_and(|r| r <= BOUND);
    verdict(
        5,
        pass,
        &format!(
            "Pearson(PF_HT, PF_discovered) = {r:?} (bound <= {BOUND}); <PF> {:.4} vs {:.4}",
            d.report1.pf_mean, d.report2.pf_mean
        ),
    );
    assert!(pass);
}

fn rd_stab_magic(ids: &[GateId], ds: &Dataset) -> EvaluationReport {
    let cfg = PipelineConfig {
        oneq: OneqMethod::Rd,
        rd_trials: 500,
        rd_max_length: 20,
        ..PipelineConfig::default()
    };
    let gs = gateset(ids, &[]);
    let ctx = PipelineContext::new(&gs, &cfg).unwrap();
    evaluate_with(&ctx, gs.label(), ds, 606, false).unwrap()
}

#[test]
fn c6_qec_crossover() {
    const STAB_MIN: f64 = 0.999;
    let ds = gen_stab_magic();
    let steane = rd_stab_magic(&[GateId::H1, GateId::X1, GateId::S1, GateId::Z1, GateId::CX2], &ds);
    let rm = rd_stab_magic(&[GateId::T1, GateId::X1, GateId::S1, GateId::Z1, GateId::CZ2], &ds);
    let stab_min = steane.pf[..6].iter().copied().fold(f64::INFINITY, f64::min);
    let magic = |r: &EvaluationReport| r.pf[6..].iter().sum::<f64>() / 8.0;
    let (ms, mr) = (magic(&steane), magic(&rm));
    let pass = stab_min >= STAB_MIN && mr > ms;
    verdict(
        6,
        pass,
        &format!("Steane min stabilizer PF {stab_min:.6} (>= {STAB_MIN}); magic <PF> Reed-Muller {mr:.5} vs Steane {ms:.5}"),
    );
    assert!(pass);
}

#[test]
fn c7_scalability_direction() {
    let (d, _) = table3_discovery();
    let ds = gen_haar_unitaries(2, 20, &mut RngHandle::new(707)).unwrap();
    let cfg = one_qubit_pipeline();
    let eval = |gs: &GateSet| {
        let ctx = PipelineContext::new(gs, &cfg).unwrap();
        evaluate_with(&ctx, gs.label(), &ds, 708, false).unwrap()
    };
    let ht = eval(&gateset(&[GateId::H1, GateId::T1, GateId::CX2], &[]));
    let disc = eval(&gateset(&[GateId::P1, GateId::P1, GateId::CX2], &d.best_params));
    let one_q_order = d.report2.pf_mean > d.report1.pf_mean;
    let two_q_order = disc.pf_mean > ht.pf_mean;
    let pass = one_q_order == two_q_order && ht.failures.is_empty() && disc.failures.is_empty();
    verdict(
        7,
        pass,
        &format!(
            "1-qubit <PF> {:.4} (H,T) vs {:.4} (discovered); 2-qubit with CX2 {:.4} vs {:.4}",
            d.report1.pf_mean, d.report2.pf_mean, ht.pf_mean, disc.pf_mean
        ),
    );
    assert!(pass);
}

#[test]
fn c8_determinism_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        r#"
mode = "compare"
seed = 11
threads = 1
[dataset]
kind = "haar-unitary"
size = 12
[gs1]
gates = ["H1", "T1"]
[gs2]
gates = ["H1", "S1", "T1"]
[pipeline]
basis_depth = 5
"#,
        r#"
mode = "compare"
seed = 12
threads = 3
[dataset]
kind = "haar-unitary"
qubits = 2
size = 4
[gs1]
gates = ["H1", "T1", "CX2"]
[gs2]
gates = ["R1", "R1", "CZ2"]
[pipeline]
basis_depth = 4
recursion = 1
"#,
        r#"
mode = "discover"
seed = 13
threads = 2
[dataset]
kind = "haar-unitary"
size = 6
[gs1]
gates = ["H1", "T1"]
[ansatz]
gates = ["P1", "P1"]
[pipeline]
basis_depth = 4
recursion = 1
[search]
max_evals = 25
"#,
    ];
    let mut identical = true;
    for (k, text) in configs.iter().enumerate() {
        let mut cfg = parse_config_str(text, Path::new("c.toml")).unwrap();
        cfg.output = dir.path().join(format!("run{k}"));
        let first = run(&cfg, dir.path()).unwrap();
        let manifest = first.output.join("manifest.json");
        let base = std::fs::read(first.output.join("report.csv")).unwrap();
        for threads in [1, 2, 8] {
            let out = dir.path().join(format!("run{k}_t{threads}"));
            let again = rerun(&manifest, Some(&out), Some(threads)).unwrap();
            identical &= std::fs::read(again.output.join("report.csv")).unwrap() == base;
        }
    }
    verdict(
        8,
        identical,
        "report.csv byte-identical on rerun from manifest with 1, 2 and 8 threads (compare 1q, compare 2q, discover)",
    );
    assert!(identical);
}

fn brute_pf(a: &UnitaryMatrix, b: &UnitaryMatrix) -> f64 {
    let (a, b) = (a.matrix(), b.matrix());
    let d = a.nrows();
    let mut re = 0.0;
    let mut im = 0.0;
    for i in 0..d {
        for j in 0..d {
            let (x, y) = (a[(i, j)], b[(i, j)]);
            re += x.re * y.re + x.im * y.im;
            im += x.re * y.im - x.im * y.re;
        }
    }
    (re * re + im * im) / (d * d) as f64
}

fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

fn brute_terms(pf1: &[f64], cd1: &[usize], pf2: &[f64], cd2: &[usize], fab: f64) -> [f64; 5] {
    let n = pf1.len() as f64;
    let avg = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (m1, m2) = (avg(pf1), avg(pf2));
    let c1: Vec<f64> = cd1.iter().map(|&v| v as f64).collect();
    let c2: Vec<f64> = cd2.iter().map(|&v| v as f64).collect();
    let (d1, d2) = (avg(&c1), avg(&c2));
    let mirror = |x: &[f64], y: &[f64], mx: f64, my: f64, scale: f64| {
        let mut s = 0.0;
        for k in 0..x.len() {
            let e = (x[k] - mx) + (y[k] - my);
            s += e * e;
        }
        1.0 / (1.0 + s.sqrt() / scale)
    };
    let n1: Vec<f64> = c1.iter().map(|v| v / d1).collect();
    let n2: Vec<f64> = c2.iter().map(|v| v / d2).collect();
    [
        m2 - m1,
        mirror(pf1, pf2, m1, m2, (m1 + m2) / 2.0),
        (d1 - d2) / d1.max(1.0),
        mirror(&n1, &n2, 1.0, 1.0, 1.0),
        -fab,
    ]
}

#[test]
fn c9_metric_oracles() {
    const TOL: f64 = 1e-12;
    let mut rng = RngHandle::new(909);
    let mut pf_err: f64 = 0.0;
    for k in 0..100 {
        let d = 1 << (1 + k % 3);
        let a = haar_unitary(d, &mut rng).unwrap();
        let b = haar_unitary(d, &mut rng).unwrap();
        pf_err = pf_err.max((process_fidelity(&a, &b).unwrap() - brute_pf(&a, &b)).abs());
    }
    let mut pearson_err: f64 = 0.0;
    let mut cost_err: f64 = 0.0;
    for _ in 0..100 {
        let n = 5 + rng.below(20);
        let pf1: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let pf2: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let cd1: Vec<usize> = (0..n).map(|_| 1 + rng.below(60)).collect();
        let cd2: Vec<usize> = (0..n).map(|_| 1 + rng.below(60)).collect();
        pearson_err = pearson_err.max((pearson(&pf1, &pf2).unwrap() - brute_pearson(&pf1, &pf2)).abs());

        let r1 = EvaluationReport::from_traces("a", pf1.clone(), cd1.clone());
        let r2 = EvaluationReport::from_traces("b", pf2.clone(), cd2.clone());
        let fab = rng.uniform_in(0.5, 3.0);
        let w: [f64; 5] = std::array::from_fn(|_| rng.uniform_in(0.0, 50.0));
        let terms = brute_terms(&pf1, &cd1, &pf2, &cd2, fab);
        let want: f64 = (0..5).map(|i| w[i] * terms[i]).sum();
        let got = cost(&r1, &r2, &CostWeights::new(w).unwrap(), fab).unwrap();
        cost_err = cost_err.max((got.total - want).abs() / want.abs().max(1.0));
        for i in 0..5 {
            cost_err = cost_err.max((got.terms()[i] - terms[i]).abs());
        }
    }
    let pass = pf_err < TOL && pearson_err < TOL && cost_err < TOL;
    verdict(
        9,
        pass,
        &format!(
            "max deviation from brute force: PF {pf_err:.1e}, Pearson {pearson_err:.1e}, cost {cost_err:.1e} (tol {TOL:e})"
        ),
    );
    assert!(pass);
}
