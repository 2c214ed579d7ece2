//! Quantum Shannon decomposition into CX and single-axis rotations.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;

use super::kak::kak_resynthesize_until;
use super::{DecompositionResult, Method};
use crate::error::{Error, Result};
use crate::gatelib::{cx, p1_params, rotation_gate, Circuit, Gate};
use crate::matcore::{eig_unitary, operator_distance_raw, svd, unitarity_error, CMatrix, UnitaryMatrix, C64};

const ANGLE_TOL: f64 = 1e-13;

pub(crate) fn cx_gate() -> Gate {
    Gate::new("CX2", UnitaryMatrix::from_raw(cx()))
}

/// Appends `R_axis(theta)` on `q` unless it is the identity up to sign.
fn push_rotation(c: &mut Circuit, axis: char, theta: f64, q: usize) {
    let r = theta.rem_euclid(4.0 * PI);
    if r < ANGLE_TOL || 4.0 * PI - r < ANGLE_TOL {
        return;
    }
    if (r - 2.0 * PI).abs() < ANGLE_TOL {
        c.mul_phase(C64::new(-1.0, 0.0));
        return;
    }
    c.apply(&rotation_gate(axis, theta), &[q]).expect("qubit in range");
}

/// Appends an arbitrary single-qubit unitary as `Rz Ry Rz` plus phase.
pub(crate) fn push_zyz(c: &mut Circuit, u: &CMatrix, q: usize) {
    let ([theta, phi, lambda], alpha) = p1_params(u);
    c.mul_phase(C64::from_polar(1.0, alpha + (phi + lambda) / 2.0));
    push_rotation(c, 'z', lambda, q);
    push_rotation(c, 'y', theta, q);
    push_rotation(c, 'z', phi, q);
}

/// Uniformly controlled rotation: `target` gets `R_axis(angles[x])` when the
/// controls (first control most significant) are in state `x`. Lowered to a
/// Gray-code ladder of `2^k` rotations and `2^k` CX.
fn push_multiplexed(c: &mut Circuit, axis: char, angles: &[f64], target: usize, controls: &[usize]) {
    let k = controls.len();
    let n = 1usize << k;
    debug_assert_eq!(angles.len(), n);
    if angles.iter().all(|a| a.abs() < ANGLE_TOL) {
        return;
    }
    if k == 0 {
        push_rotation(c, axis, angles[0], target);
        return;
    }
    let gray = |i: usize| i ^ (i >> 1);
    let cxg = cx_gate();
    for i in 0..n {
        let g = gray(i);
        let phi: f64 = angles
            .iter()
            .enumerate()
            .map(|(x, a)| if (x & g).count_ones() % 2 == 0 { *a } else { -*a })
            .sum::<f64>()
            / n as f64;
        push_rotation(c, axis, phi, target);
        let changed = g ^ gray((i + 1) % n);
        let bit = changed.trailing_zeros() as usize;
        let control = controls[k - 1 - bit];
        c.apply(&cxg, &[control, target]).expect("qubits in range");
    }
}

fn block(m: &CMatrix, r: usize, c: usize, h: usize) -> CMatrix {
    m.view((r * h, c * h), (h, h)).into_owned()
}

struct Csd {
    l0: CMatrix,
    l1: CMatrix,
    r0: CMatrix,
    r1: CMatrix,
    theta: Vec<f64>,
}

/// `m = (L0 + L1) [[C, -S], [S, C]] (R0 + R1)` with `C = cos(theta)`,
/// `S = sin(theta)`.
fn cosine_sine(m: &CMatrix) -> Result<Csd> {
    let h = m.nrows() / 2;
    let (u00, u01, u10, u11) = (block(m, 0, 0, h), block(m, 0, 1, h), block(m, 1, 0, h), block(m, 1, 1, h));
    let (lu, sv, rv) = svd(&u00);
    // Ascending cosines put the well-conditioned sines first for the QR below.
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let l0 = CMatrix::from_fn(h, h, |i, j| lu[(i, order[j])]);
    let r0h = CMatrix::from_fn(h, h, |i, j| rv[(i, order[j])]);
    let cvals: Vec<f64> = order.iter().map(|&j| sv[j].min(1.0)).collect();

    let x = &u10 * &r0h;
    let qr = x.qr();
    let mut l1 = qr.q();
    let t = qr.r();
    let mut svals = vec![0.0; h];
    for i in 0..h {
        let ti = t[(i, i)];
        svals[i] = ti.norm();
        if ti.norm() > 0.0 {
            let ph = ti / ti.norm();
            let mut col = l1.column_mut(i);
            col *= ph;
        }
    }
    let cd = CMatrix::from_diagonal(&DVector::from_iterator(h, cvals.iter().map(|&v| C64::new(v, 0.0))));
    let sd = CMatrix::from_diagonal(&DVector::from_iterator(h, svals.iter().map(|&v| C64::new(v, 0.0))));
    let r1 = -(&sd * l0.adjoint() * &u01) + &cd * l1.adjoint() * &u11;
    let (pu, _, pv) = svd(&r1);
    let r1 = pu * pv.adjoint();
    let theta: Vec<f64> = cvals.iter().zip(&svals).map(|(c, s)| s.atan2(*c)).collect();
    Ok(Csd {
        l0,
        l1,
        r0: r0h.adjoint(),
        r1,
        theta,
    })
}

/// Emits the block-diagonal `a1 + a2` (selected by qubit `sel`, acting on
/// `rest`) as `V`, a multiplexed Rz on `sel`, and `W`.
fn demultiplex(c: &mut Circuit, a1: &CMatrix, a2: &CMatrix, sel: usize, rest: &[usize]) -> Result<()> {
    let (vals, v) = eig_unitary(&(a1 * a2.adjoint()))?;
    let d: Vec<C64> = vals.iter().map(|z| z.sqrt()).collect();
    let dm = CMatrix::from_diagonal(&DVector::from_row_slice(&d));
    let w = &dm * v.adjoint() * a2;
    let angles: Vec<f64> = d.iter().map(|z| -2.0 * z.arg()).collect();
    emit(c, &w, rest)?;
    push_multiplexed(c, 'z', &angles, sel, rest);
    emit(c, &v, rest)
}

/// Appends a circuit for `m` acting on `qubits` (first is most significant).
fn emit(c: &mut Circuit, m: &CMatrix, qubits: &[usize]) -> Result<()> {
    match qubits.len() {
        1 => {
            push_zyz(c, m, qubits[0]);
            Ok(())
        }
        2 => {
            let syn = kak_resynthesize_until(&UnitaryMatrix::from_raw(m.clone()), &cx_gate(), 3, |_, cu| {
                operator_distance_raw(cu, m) < 1e-10
            })?;
            let mut sub = Circuit::new(2, "qsd");
            sub.mul_phase(syn.circuit.phase());
            for op in syn.circuit.ops() {
                let g = &syn.circuit.gates()[op.gate];
                if g.arity() == 1 {
                    push_zyz(&mut sub, g.matrix.matrix(), op.qubits[0]);
                } else {
                    sub.apply(g, &op.qubits)?;
                }
            }
            c.extend_mapped(&sub, qubits)
        }
        _ => {
            let csd = cosine_sine(m)?;
            let (sel, rest) = (qubits[0], &qubits[1..]);
            demultiplex(c, &csd.r0, &csd.r1, sel, rest)?;
            let angles: Vec<f64> = csd.theta.iter().map(|t| 2.0 * t).collect();
            push_multiplexed(c, 'y', &angles, sel, rest);
            demultiplex(c, &csd.l0, &csd.l1, sel, rest)
        }
    }
}

/// Exact synthesis of an `n >= 2` qubit unitary over CX, Ry and Rz.
/// Two-qubit blocks are synthesized with at most three CX.
pub fn qsd_decompose(u: &UnitaryMatrix) -> Result<DecompositionResult> {
    let start = Instant::now();
    let n = u.n_qubits();
    if n < 2 {
        return Err(Error::invalid("Shannon decomposition needs at least two qubits"));
    }
    if unitarity_error(u.matrix()) > 1e-8 {
        return Err(Error::Validation("Shannon decomposition target is not unitary".into()));
    }
    let mut c = Circuit::new(n, "qsd");
    let qubits: Vec<usize> = (0..n).collect();
    emit(&mut c, u.matrix(), &qubits)?;
    Ok(DecompositionResult::new(c, u, Method::Qsd, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gatelib::ry;
    use crate::matcore::{haar_unitary, kron, operator_distance, RngHandle};

    fn mux_matrix(axis_m: fn(f64) -> CMatrix, angles: &[f64], k: usize) -> CMatrix {
        // Target is qubit 0, controls qubits 1..=k.
        let d = 1usize << (k + 1);
        let h = d / 2;
        let mut m = CMatrix::zeros(d, d);
        for (x, &a) in angles.iter().enumerate() {
            let r = axis_m(a);
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                m[(i * h + x, j * h + x)] = r[(i, j)];
            }
        }
        m
    }

    #[test]
    fn multiplexed_ladder_matches_block_oracle() {
        let mut rng = RngHandle::new(1);
        for k in 0..4 {
            let angles: Vec<f64> = (0..1 << k).map(|_| rng.uniform_in(-4.0, 4.0)).collect();
            let mut c = Circuit::new(k + 1, "t");
            let controls: Vec<usize> = (1..=k).collect();
            push_multiplexed(&mut c, 'y', &angles, 0, &controls);
            let want = mux_matrix(ry, &angles, k);
            assert!((c.unitary().matrix() - &want).camax() < 1e-12, "k={k}");
            if k > 0 {
                assert_eq!(c.count_named("CX2"), 1 << k);
            }
        }
    }

    #[test]
    fn zyz_is_exact() {
        let mut rng = RngHandle::new(2);
        for _ in 0..50 {
            let u = haar_unitary(2, &mut rng).unwrap();
            let mut c = Circuit::new(1, "t");
            push_zyz(&mut c, u.matrix(), 0);
            assert!((c.unitary().matrix() - u.matrix()).camax() < 1e-12);
        }
    }

    #[test]
    fn identity_yields_empty_circuit() {
        let r = qsd_decompose(&UnitaryMatrix::identity(8)).unwrap();
        assert_eq!(r.depth, 0);
        assert!((r.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_uses_at_most_three_cx() {
        let mut rng = RngHandle::new(3);
        for _ in 0..20 {
            let u = haar_unitary(4, &mut rng).unwrap();
            let r = qsd_decompose(&u).unwrap();
            assert!(r.circuit.count_named("CX2") <= 3);
            assert!(operator_distance(&r.circuit.unitary(), &u).unwrap() < 1e-8);
            assert!(r.fidelity >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn three_and_four_qubit_reconstruction() {
        let mut rng = RngHandle::new(4);
        for n in [3, 4] {
            for _ in 0..3 {
                let u = haar_unitary(1 << n, &mut rng).unwrap();
                let r = qsd_decompose(&u).unwrap();
                assert!(operator_distance(&r.circuit.unitary(), &u).unwrap() < 1e-8);
                if n == 3 {
                    assert!(r.circuit.count_named("CX2") <= 26);
                }
                for op in r.circuit.ops() {
                    let name = &r.circuit.gates()[op.gate].name;
                    assert!(name == "CX2" || name.starts_with("ry(") || name.starts_with("rz("), "{name}");
                }
            }
        }
    }

    #[test]
    fn structured_inputs() {
        let mut rng = RngHandle::new(5);
        let a = haar_unitary(2, &mut rng).unwrap().into_matrix();
        let b = haar_unitary(4, &mut rng).unwrap().into_matrix();
        let cases = vec![
            kron(&a, &b),
            kron(&b, &a),
            crate::gatelib::cx().kronecker(&CMatrix::identity(2, 2)),
            CMatrix::identity(2, 2).kronecker(&crate::gatelib::swap()),
        ];
        for m in cases {
            let u = UnitaryMatrix::new(m).unwrap();
            let r = qsd_decompose(&u).unwrap();
            assert!(operator_distance(&r.circuit.unitary(), &u).unwrap() < 1e-8);
        }
    }
}
