use std::fmt::Write as _;

use super::{p1, rx, ry, rz, Gate, GateId, GateSpec};
use crate::error::{Error, Result};
use crate::matcore::{format_complex, parse_complex, CMatrix, RngHandle, UnitaryMatrix, C64, ONE};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Op {
    pub gate: usize,
    pub qubits: Vec<usize>,
}

/// A gate sequence over `n_qubits`, applied first-to-last. The circuit owns
/// the alphabet its ops index into, so it can be evaluated on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    label: String,
    gates: Vec<Gate>,
    ops: Vec<Op>,
    phase: C64,
}

impl Circuit {
    pub fn new(n_qubits: usize, label: impl Into<String>) -> Self {
        Self {
            n_qubits,
            label: label.into(),
            gates: Vec::new(),
            ops: Vec::new(),
            phase: ONE,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Global phase multiplying the gate product.
    pub fn phase(&self) -> C64 {
        self.phase
    }

    pub fn mul_phase(&mut self, p: C64) {
        self.phase *= p;
    }

    /// Gate count; every gate has unit cost.
    pub fn depth(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Number of ops whose gate acts on `arity` qubits.
    pub fn count_arity(&self, arity: usize) -> usize {
        self.ops.iter().filter(|o| o.qubits.len() == arity).count()
    }

    pub fn count_named(&self, name: &str) -> usize {
        self.ops.iter().filter(|o| self.gates[o.gate].name == name).count()
    }

    /// Index of `gate` in the alphabet, adding it if no gate of that name exists.
    pub fn add_gate(&mut self, gate: &Gate) -> usize {
        if let Some(k) = self.gates.iter().position(|g| g.name == gate.name) {
            debug_assert_eq!(self.gates[k].matrix.dim(), gate.matrix.dim());
            return k;
        }
        self.gates.push(gate.clone());
        self.gates.len() - 1
    }

    pub fn push(&mut self, gate: usize, qubits: &[usize]) -> Result<()> {
        let g = self
            .gates
            .get(gate)
            .ok_or_else(|| Error::invalid(format!("gate index {gate} out of range")))?;
        if qubits.len() != g.arity() {
            return Err(Error::invalid(format!(
                "{} acts on {} qubits, got {}",
                g.name,
                g.arity(),
                qubits.len()
            )));
        }
        for (k, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::invalid(format!(
                    "qubit {q} out of range for a {}-qubit circuit",
                    self.n_qubits
                )));
            }
            if qubits[..k].contains(&q) {
                return Err(Error::invalid(format!("repeated qubit {q} in {}", g.name)));
            }
        }
        self.ops.push(Op {
            gate,
            qubits: qubits.to_vec(),
        });
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate, qubits: &[usize]) -> Result<()> {
        let k = self.add_gate(gate);
        self.push(k, qubits)
    }

    /// Appends `other`, remapping its qubit `q` to `qubit_map[q]`.
    pub fn extend_mapped(&mut self, other: &Circuit, qubit_map: &[usize]) -> Result<()> {
        if qubit_map.len() != other.n_qubits {
            return Err(Error::invalid("qubit map length differs from the appended circuit"));
        }
        for op in &other.ops {
            let k = self.add_gate(&other.gates[op.gate]);
            let qs: Vec<usize> = op.qubits.iter().map(|&q| qubit_map[q]).collect();
            self.push(k, &qs)?;
        }
        self.phase *= other.phase;
        Ok(())
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        let id: Vec<usize> = (0..other.n_qubits).collect();
        self.extend_mapped(other, &id)
    }

    /// Reversed sequence of daggers.
    pub fn inverse(&self) -> Circuit {
        let mut out = Circuit::new(self.n_qubits, self.label.clone());
        for op in self.ops.iter().rev() {
            let g = &self.gates[op.gate];
            let dg = match g.name.strip_suffix("dg") {
                Some(base) => Gate {
                    name: base.to_string(),
                    matrix: g.matrix.adjoint(),
                    fab_cost: g.fab_cost,
                },
                None => g.dagger(),
            };
            out.apply(&dg, &op.qubits).expect("ops were valid in the source circuit");
        }
        out.phase = self.phase.conj();
        out
    }

    /// The operator the circuit implements; qubit 0 is the most significant
    /// bit of the state index.
    pub fn unitary(&self) -> UnitaryMatrix {
        let d = 1usize << self.n_qubits;
        let mut u = CMatrix::identity(d, d);
        for op in &self.ops {
            apply_gate(&mut u, self.gates[op.gate].matrix.matrix(), &op.qubits, self.n_qubits);
        }
        if self.phase != ONE {
            u *= self.phase;
        }
        UnitaryMatrix::from_raw(u)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gateset {}", self.label);
        let _ = writeln!(out, "qubits {}", self.n_qubits);
        if self.phase != ONE {
            let _ = writeln!(out, "phase {}", format_complex(self.phase));
        }
        for op in &self.ops {
            let qs: Vec<String> = op.qubits.iter().map(|q| q.to_string()).collect();
            let _ = writeln!(out, "op {} {}", self.gates[op.gate].name, qs.join(" "));
        }
        out
    }

    /// Parses [`Circuit::to_text`] output. Gate names resolve against
    /// `alphabet` first, then against catalog fixed gates and the rotation
    /// forms `rx(a)`, `ry(a)`, `rz(a)` and `p1(a,b,c)`.
    pub fn from_text(text: &str, alphabet: &[Gate]) -> Result<Circuit> {
        let perr = |ln: usize, msg: String| Error::Parse {
            path: "<circuit>".into(),
            message: format!("line {ln}: {msg}"),
        };
        let mut label = None;
        let mut circ: Option<Circuit> = None;
        let mut phase = ONE;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            match key {
                "gateset" => label = Some(parts.collect::<Vec<_>>().join(" ")),
                "qubits" => {
                    let n = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| perr(ln, "bad qubit count".into()))?;
                    circ = Some(Circuit::new(n, label.clone().unwrap_or_default()));
                }
                "phase" => {
                    phase = parts
                        .next()
                        .ok_or_else(|| perr(ln, "missing phase".into()))
                        .and_then(|s| parse_complex(s).map_err(|e| perr(ln, e)))?;
                }
                "op" => {
                    let c = circ
                        .as_mut()
                        .ok_or_else(|| perr(ln, "`op` before `qubits`".into()))?;
                    let name = parts.next().ok_or_else(|| perr(ln, "missing gate name".into()))?;
                    let gate = alphabet
                        .iter()
                        .find(|g| g.name == name)
                        .cloned()
                        .or_else(|| builtin_gate(name))
                        .ok_or_else(|| perr(ln, format!("unknown gate `{name}`")))?;
                    let qs: Vec<usize> = parts
                        .map(|s| s.parse().map_err(|_| perr(ln, format!("bad qubit `{s}`"))))
                        .collect::<Result<_>>()?;
                    c.apply(&gate, &qs).map_err(|e| perr(ln, e.to_string()))?;
                }
                "fidelity" | "depth" => {}
                other => return Err(perr(ln, format!("unknown key `{other}`"))),
            }
        }
        let mut c = circ.ok_or_else(|| perr(0, "missing `qubits` line".into()))?;
        c.phase = phase;
        Ok(c)
    }
}

/// Resolves names emitted by the decomposers for gates outside any gate set.
pub fn builtin_gate(name: &str) -> Option<Gate> {
    let args = |s: &str| -> Option<Vec<f64>> {
        s.split(',').map(|a| a.trim().parse().ok()).collect()
    };
    let m = if let Some(inner) = name.strip_suffix(')') {
        let (head, a) = inner.split_once('(')?;
        let a = args(a)?;
        match (head, a.as_slice()) {
            ("rx", [t]) => rx(*t),
            ("ry", [t]) => ry(*t),
            ("rz", [t]) => rz(*t),
            ("p1", [x, y, z]) => p1(*x, *y, *z),
            _ => return None,
        }
    } else {
        let id: GateId = name.parse().ok()?;
        if id.param_count() != 0 || id.kind() != super::GateKind::Fixed {
            return None;
        }
        super::gate_matrix(&GateSpec::new(id), &[], &mut RngHandle::new(0))
            .ok()?
            .into_matrix()
    };
    Some(Gate::new(name, UnitaryMatrix::from_raw(m)))
}

pub fn rotation_gate(axis: char, theta: f64) -> Gate {
    let (name, m) = match axis {
        'x' => (format!("rx({theta})"), rx(theta)),
        'y' => (format!("ry({theta})"), ry(theta)),
        'z' => (format!("rz({theta})"), rz(theta)),
        _ => panic!("rotation axis must be x, y or z"),
    };
    Gate::new(name, UnitaryMatrix::from_raw(m))
}

pub fn p1_gate(a: [f64; 3]) -> Gate {
    Gate::new(
        format!("p1({},{},{})", a[0], a[1], a[2]),
        UnitaryMatrix::from_raw(p1(a[0], a[1], a[2])),
    )
}

/// Left-multiplies `u` by `g` acting on `qubits` of an `n`-qubit register.
pub(crate) fn apply_gate(u: &mut CMatrix, g: &CMatrix, qubits: &[usize], n: usize) {
    let d = u.nrows();
    match qubits {
        [q] => {
            let m = 1usize << (n - 1 - q);
            let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
            for col in 0..u.ncols() {
                let mut c = u.column_mut(col);
                for i in (0..d).filter(|i| i & m == 0) {
                    let (a, b) = (c[i], c[i | m]);
                    c[i] = g00 * a + g01 * b;
                    c[i | m] = g10 * a + g11 * b;
                }
            }
        }
        [q0, q1] => {
            let m0 = 1usize << (n - 1 - q0);
            let m1 = 1usize << (n - 1 - q1);
            for col in 0..u.ncols() {
                let mut c = u.column_mut(col);
                for i in (0..d).filter(|i| i & (m0 | m1) == 0) {
                    let idx = [i, i | m1, i | m0, i | m0 | m1];
                    let v = [c[idx[0]], c[idx[1]], c[idx[2]], c[idx[3]]];
                    for (r, &ir) in idx.iter().enumerate() {
                        c[ir] = (0..4).map(|k| g[(r, k)] * v[k]).sum();
                    }
                }
            }
        }
        _ => {
            // General embedding through an explicit permutation of the index bits.
            let k = qubits.len();
            for col in 0..u.ncols() {
                let src: Vec<C64> = u.column(col).iter().copied().collect();
                let mut c = u.column_mut(col);
                for i in 0..d {
                    let sub_i = sub_index(i, qubits, n);
                    let mut acc = C64::new(0.0, 0.0);
                    for sub_j in 0..1usize << k {
                        let j = with_sub_index(i, sub_j, qubits, n);
                        acc += g[(sub_i, sub_j)] * src[j];
                    }
                    c[i] = acc;
                }
            }
        }
    }
}

fn sub_index(i: usize, qubits: &[usize], n: usize) -> usize {
    qubits
        .iter()
        .fold(0, |acc, &q| (acc << 1) | ((i >> (n - 1 - q)) & 1))
}

fn with_sub_index(i: usize, sub: usize, qubits: &[usize], n: usize) -> usize {
    let k = qubits.len();
    let mut out = i;
    for (p, &q) in qubits.iter().enumerate() {
        let bit = (sub >> (k - 1 - p)) & 1;
        let m = 1usize << (n - 1 - q);
        out = (out & !m) | (bit * m);
    }
    out
}
