//! Random decomposition: best of many random gate sequences.

use std::time::Instant;

use super::{DecompositionResult, Method};
use crate::error::{Error, Result};
use crate::gatelib::{apply_gate, Circuit, Gate};
use crate::matcore::{process_fidelity_raw, CMatrix, RngHandle, UnitaryMatrix};

/// Samples `trials` circuits of length uniform in `[1, max_len]`, each op a
/// uniform gate from `gates` on uniformly chosen distinct qubits, and keeps
/// the one with the highest process fidelity (earliest on ties).
pub fn rd_decompose(
    u: &UnitaryMatrix,
    gates: &[Gate],
    max_len: usize,
    trials: usize,
    rng: &mut RngHandle,
) -> Result<DecompositionResult> {
    let start = Instant::now();
    let n = u.n_qubits();
    let usable: Vec<&Gate> = gates.iter().filter(|g| g.arity() <= n).collect();
    if usable.is_empty() {
        return Err(Error::invalid(format!("no gate fits a {n}-qubit target")));
    }
    if trials == 0 || max_len == 0 {
        return Err(Error::invalid("random decomposition needs trials >= 1 and max length >= 1"));
    }
    let d = u.dim();
    let mut best: Option<(f64, Vec<(usize, Vec<usize>)>)> = None;
    for _ in 0..trials {
        let len = 1 + rng.below(max_len);
        let mut m = CMatrix::identity(d, d);
        let mut ops = Vec::with_capacity(len);
        for _ in 0..len {
            let g = rng.below(usable.len());
            let qs = sample_qubits(usable[g].arity(), n, rng);
            apply_gate(&mut m, usable[g].matrix.matrix(), &qs, n);
            ops.push((g, qs));
        }
        let f = process_fidelity_raw(&m, u.matrix());
        if best.as_ref().is_none_or(|b| f > b.0) {
            best = Some((f, ops));
        }
    }
    let (_, ops) = best.expect("trials >= 1");
    let mut circuit = Circuit::new(n, "rd");
    for (g, qs) in ops {
        circuit.apply(usable[g], &qs)?;
    }
    Ok(DecompositionResult::new(circuit, u, Method::Rd, start))
}

/// `k` distinct qubits out of `n`, ordered.
fn sample_qubits(k: usize, n: usize, rng: &mut RngHandle) -> Vec<usize> {
    let mut qs = Vec::with_capacity(k);
    while qs.len() < k {
        let q = rng.below(n);
        if !qs.contains(&q) {
            qs.push(q);
        }
    }
    qs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gatelib::{builtin_gate, hadamard};
    use crate::matcore::{haar_unitary, process_fidelity};

    #[test]
    fn finds_single_gate() {
        let h = builtin_gate("H1").unwrap();
        let u = UnitaryMatrix::new(hadamard()).unwrap();
        let r = rd_decompose(&u, &[h.clone()], 1, 10, &mut RngHandle::new(0)).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        assert_eq!(r.depth, 1);
        let again = rd_decompose(&u, &[h], 1, 10, &mut RngHandle::new(0)).unwrap();
        assert_eq!(again.circuit, r.circuit);
    }

    #[test]
    fn result_dominates_every_sample() {
        let gates: Vec<Gate> = ["H1", "T1", "CX2"].iter().map(|n| builtin_gate(n).unwrap()).collect();
        let u = haar_unitary(4, &mut RngHandle::new(4)).unwrap();
        let r = rd_decompose(&u, &gates, 8, 50, &mut RngHandle::new(11)).unwrap();
        // Replay the sampler with the same seed and score each candidate.
        let mut rng = RngHandle::new(11);
        for _ in 0..50 {
            let len = 1 + rng.below(8);
            let mut c = Circuit::new(2, "replay");
            for _ in 0..len {
                let g = rng.below(3);
                let qs = sample_qubits(gates[g].arity(), 2, &mut rng);
                c.apply(&gates[g], &qs).unwrap();
            }
            assert!(process_fidelity(&c.unitary(), &u).unwrap() <= r.fidelity + 1e-15);
        }
        assert!((process_fidelity(&r.circuit.unitary(), &u).unwrap() - r.fidelity).abs() < 1e-10);
    }

    #[test]
    fn oversized_gates_are_skipped() {
        let gates = vec![builtin_gate("CX2").unwrap()];
        let u = UnitaryMatrix::new(hadamard()).unwrap();
        assert!(rd_decompose(&u, &gates, 3, 3, &mut RngHandle::new(0)).is_err());
    }
}
