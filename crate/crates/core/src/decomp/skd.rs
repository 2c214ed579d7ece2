//! Solovay-Kitaev decomposition of single-qubit unitaries.

use std::collections::HashMap;
use std::time::Instant;

use super::{DecompositionResult, Method};
use crate::error::{Error, Result};
use crate::gatelib::{Circuit, Gate, GateSet};
use crate::matcore::{process_fidelity_raw, trace_inner, CMatrix, UnitaryMatrix, C64};

/// Default cap on stored basis entries.
pub const DEFAULT_BASIS_CAP: usize = 2_000_000;

const DEDUP_TOL: f64 = 1e-6;

/// Unit quaternion `(w, x, y, z)` of `u / sqrt(det u)`, i.e.
/// `w I - i (x X + y Y + z Z)`. Defined up to sign.
pub fn su2_quaternion(u: &CMatrix) -> [f64; 4] {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let s = det.sqrt();
    let a = u[(0, 0)] / s;
    let b = u[(1, 0)] / s;
    let q = [a.re, -b.im, b.re, -a.im];
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.map(|x| x / n)
}

pub fn quaternion_matrix(q: [f64; 4]) -> CMatrix {
    let [w, x, y, z] = q;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(w, -z),
            C64::new(-y, -x),
            C64::new(y, -x),
            C64::new(w, z),
        ],
    )
}

/// Phase-aligned spectral distance between two single-qubit unitaries,
/// `sqrt(2 - 2|<q, p>|)` on their quaternions.
pub fn su2_distance(q: &[f64; 4], p: &[f64; 4]) -> f64 {
    let dot: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
    (2.0 - 2.0 * dot.abs().min(1.0)).max(0.0).sqrt()
}

#[derive(Clone, Debug)]
pub struct SkEntry {
    /// Indices into [`SkBasis::gates`], in application order.
    pub sequence: Vec<usize>,
    pub matrix: CMatrix,
    quat: [f64; 4],
}

/// All distinct products of up to `max_depth` effective gates.
#[derive(Clone, Debug)]
pub struct SkBasis {
    pub gates: Vec<Gate>,
    /// `dagger[i]` is the index of the gate inverse to `gates[i]`.
    pub dagger: Vec<usize>,
    pub entries: Vec<SkEntry>,
    pub max_depth: usize,
    raw_sequences: u128,
}

impl SkBasis {
    /// Number of sequences of length `1..=max_depth` before deduplication.
    pub fn raw_sequences(&self) -> u128 {
        self.raw_sequences
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn dagger_sequence(&self, seq: &[usize]) -> Vec<usize> {
        seq.iter().rev().map(|&g| self.dagger[g]).collect()
    }

    fn sequence_matrix(&self, seq: &[usize]) -> CMatrix {
        let mut m = CMatrix::identity(2, 2);
        for &g in seq {
            m = self.gates[g].matrix.matrix() * m;
        }
        m
    }
}

fn cell(q: &[f64; 4]) -> [i64; 4] {
    q.map(|x| (x / DEDUP_TOL).floor() as i64)
}

fn near_existing(grid: &HashMap<[i64; 4], Vec<usize>>, quats: &[[f64; 4]], q: &[f64; 4]) -> bool {
    for sign in [1.0, -1.0] {
        let qs = q.map(|x| x * sign);
        let c = cell(&qs);
        for off in 0..81 {
            let mut k = c;
            let mut o = off;
            for v in k.iter_mut() {
                *v += (o % 3) as i64 - 1;
                o /= 3;
            }
            if let Some(ids) = grid.get(&k) {
                if ids.iter().any(|&i| su2_distance(&quats[i], q) < DEDUP_TOL) {
                    return true;
                }
            }
        }
    }
    false
}

/// Enumerates gate sequences of the set's single-qubit gates and their
/// daggers up to length `depth`. The identity (empty sequence) is entry 0.
pub fn skd_build_basis(gs: &GateSet, depth: usize, cap: usize) -> Result<SkBasis> {
    if depth == 0 {
        return Err(Error::invalid("SK basis depth must be at least 1"));
    }
    let gates = gs.effective_gates(1, true);
    if gates.is_empty() {
        return Err(Error::invalid(format!(
            "gate set `{}` has no single-qubit gates",
            gs.label()
        )));
    }
    let dagger: Vec<usize> = gates
        .iter()
        .map(|g| {
            let gd = g.matrix.adjoint();
            gates
                .iter()
                .position(|h| process_fidelity_raw(h.matrix.matrix(), gd.matrix()) > 1.0 - 1e-12)
                .expect("effective gates are closed under dagger")
        })
        .collect();
    let b = gates.len() as u128;
    let raw_sequences = (1..=depth as u32).map(|k| b.saturating_pow(k)).fold(0u128, u128::saturating_add);

    let id = CMatrix::identity(2, 2);
    let mut entries = vec![SkEntry {
        sequence: Vec::new(),
        quat: su2_quaternion(&id),
        matrix: id,
    }];
    let mut quats = vec![entries[0].quat];
    let mut grid: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
    grid.entry(cell(&entries[0].quat)).or_default().push(0);
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &e in &frontier {
            for (gi, g) in gates.iter().enumerate() {
                let m = g.matrix.matrix() * &entries[e].matrix;
                let q = su2_quaternion(&m);
                if near_existing(&grid, &quats, &q) {
                    continue;
                }
                if entries.len() >= cap {
                    return Err(Error::ResourceLimit(format!(
                        "SK basis exceeds {cap} entries at depth {depth}; use a smaller basis depth"
                    )));
                }
                let mut sequence = entries[e].sequence.clone();
                sequence.push(gi);
                let k = entries.len();
                grid.entry(cell(&q)).or_default().push(k);
                quats.push(q);
                entries.push(SkEntry {
                    sequence,
                    matrix: m,
                    quat: q,
                });
                next.push(k);
            }
        }
        frontier = next;
    }
    Ok(SkBasis {
        gates,
        dagger,
        entries,
        max_depth: depth,
        raw_sequences,
    })
}

/// Closest basis entry to `u` and its distance. Entries are stored shortest
/// first, so the first minimum is also the shortest.
pub fn skd_best_approx(u: &CMatrix, basis: &SkBasis) -> Result<(usize, f64)> {
    if basis.entries.is_empty() {
        return Err(Error::invalid("empty SK basis"));
    }
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(Error::invalid("SK approximation needs a 2x2 target"));
    }
    let q = su2_quaternion(u);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, e) in basis.entries.iter().enumerate() {
        let dot: f64 = e.quat.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>().abs();
        if dot > best.1 {
            best = (i, dot);
        }
    }
    Ok((best.0, (2.0 - 2.0 * best.1.min(1.0)).max(0.0).sqrt()))
}

fn rotation(axis: [f64; 3], angle: f64) -> [f64; 4] {
    let (s, c) = (angle / 2.0).sin_cos();
    [c, s * axis[0], s * axis[1], s * axis[2]]
}

fn qmul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [w1, x1, y1, z1] = a;
    let [w2, x2, y2, z2] = b;
    [
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ]
}

fn qconj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

/// Rotation angle in `[0, pi]` and unit axis of a quaternion.
fn angle_axis(q: [f64; 4]) -> (f64, [f64; 3]) {
    let q = if q[0] < 0.0 { q.map(|x| -x) } else { q };
    let v = [q[1], q[2], q[3]];
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let theta = 2.0 * s.atan2(q[0]);
    if s < 1e-300 {
        (0.0, [0.0, 0.0, 1.0])
    } else {
        (theta, v.map(|x| x / s))
    }
}

/// Balanced group commutator: `V W V^dag W^dag = delta` up to global phase,
/// with `V`, `W` rotations by the same angle about perpendicular axes.
pub fn skd_group_commutator(delta: &UnitaryMatrix) -> Result<(UnitaryMatrix, UnitaryMatrix)> {
    if delta.dim() != 2 {
        return Err(Error::invalid("group commutator needs a 2x2 unitary"));
    }
    let (theta, axis) = angle_axis(su2_quaternion(delta.matrix()));
    if theta < 1e-300 {
        return Ok((UnitaryMatrix::identity(2), UnitaryMatrix::identity(2)));
    }
    // sin(theta/2) = 2 sin^2(phi/2) sqrt(1 - sin^4(phi/2)) has the closed form
    // sin^2(phi/2) = sin(theta/4).
    let phi = 2.0 * (theta / 4.0).sin().sqrt().min(1.0).asin();
    let v = rotation([1.0, 0.0, 0.0], phi);
    let w = rotation([0.0, 1.0, 0.0], phi);
    let comm = qmul(qmul(v, w), qmul(qconj(v), qconj(w)));
    let (_, caxis) = angle_axis(comm);
    let s = align_axes(caxis, axis);
    let conj = |q: [f64; 4]| qmul(qmul(s, q), qconj(s));
    Ok((
        UnitaryMatrix::from_raw(quaternion_matrix(conj(v))),
        UnitaryMatrix::from_raw(quaternion_matrix(conj(w))),
    ))
}

/// Rotation taking unit vector `from` onto unit vector `to`.
fn align_axes(from: [f64; 3], to: [f64; 3]) -> [f64; 4] {
    let dot = (from[0] * to[0] + from[1] * to[1] + from[2] * to[2]).clamp(-1.0, 1.0);
    let cross = [
        from[1] * to[2] - from[2] * to[1],
        from[2] * to[0] - from[0] * to[2],
        from[0] * to[1] - from[1] * to[0],
    ];
    let n = cross.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        if dot > 0.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let pick = if from[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let p = [
            from[1] * pick[2] - from[2] * pick[1],
            from[2] * pick[0] - from[0] * pick[2],
            from[0] * pick[1] - from[1] * pick[0],
        ];
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        return rotation(p.map(|x| x / pn), std::f64::consts::PI);
    }
    rotation(cross.map(|x| x / n), n.atan2(dot))
}

struct Approx {
    sequence: Vec<usize>,
    matrix: CMatrix,
    distance: f64,
}

fn sk_recurse(u: &CMatrix, n: usize, basis: &SkBasis) -> Result<Approx> {
    if n == 0 {
        let (i, distance) = skd_best_approx(u, basis)?;
        let e = &basis.entries[i];
        return Ok(Approx {
            sequence: e.sequence.clone(),
            matrix: e.matrix.clone(),
            distance,
        });
    }
    let prev = sk_recurse(u, n - 1, basis)?;
    let delta = u * prev.matrix.adjoint();
    let (v, w) = skd_group_commutator(&UnitaryMatrix::from_raw(delta))?;
    let va = sk_recurse(v.matrix(), n - 1, basis)?;
    let wa = sk_recurse(w.matrix(), n - 1, basis)?;
    let mut sequence = prev.sequence.clone();
    sequence.extend(basis.dagger_sequence(&wa.sequence));
    sequence.extend(basis.dagger_sequence(&va.sequence));
    sequence.extend_from_slice(&wa.sequence);
    sequence.extend_from_slice(&va.sequence);
    let matrix = basis.sequence_matrix(&sequence);
    let distance = su2_distance(&su2_quaternion(&matrix), &su2_quaternion(u));
    if distance < prev.distance {
        Ok(Approx {
            sequence,
            matrix,
            distance,
        })
    } else {
        Ok(prev)
    }
}

/// Solovay-Kitaev approximation of a single-qubit `u` at recursion depth `n`.
/// Every level keeps the better of its own candidate and the level below, so
/// the returned distance never exceeds the `n = 0` distance.
pub fn skd_decompose(u: &UnitaryMatrix, basis: &SkBasis, n: usize) -> Result<DecompositionResult> {
    let start = Instant::now();
    if u.dim() != 2 {
        return Err(Error::invalid("Solovay-Kitaev needs a single-qubit target"));
    }
    let approx = sk_recurse(u.matrix(), n, basis)?;
    let mut circuit = Circuit::new(1, "skd");
    for &g in &approx.sequence {
        circuit.apply(&basis.gates[g], &[0])?;
    }
    let m = circuit.unitary();
    let tr = trace_inner(m.matrix(), u.matrix());
    if tr.norm() > 0.0 {
        circuit.mul_phase(tr / tr.norm());
    }
    Ok(DecompositionResult::new(circuit, u, Method::Skd, start))
}

/// Distance reported by [`skd_decompose`] for its own circuit.
pub fn circuit_distance(result: &DecompositionResult, u: &UnitaryMatrix) -> f64 {
    su2_distance(&su2_quaternion(result.circuit.unitary().matrix()), &su2_quaternion(u.matrix()))
}
