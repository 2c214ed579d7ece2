//! Routes a target through the engines: QSD for three or more qubits, KAK for
//! two-qubit blocks, and SKD or RD for the remaining single-qubit locals.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::kak::kak_resynthesize;
use super::qsd::{cx_gate, qsd_decompose};
use super::rd::rd_decompose;
use super::skd::{skd_build_basis, skd_decompose, SkBasis, DEFAULT_BASIS_CAP};
use super::{DecompositionResult, Method};
use crate::error::{Error, Result};
use crate::gatelib::{Circuit, Gate, GateSet};
use crate::matcore::{process_fidelity_raw, state_fidelity_raw, CMatrix, RngHandle, UnitaryMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OneqMethod {
    Skd,
    Rd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoqMethod {
    Kak,
    Rd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NqMethod {
    Qsd,
    Rd,
}

/// Which overlap scores a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityKind {
    /// `|Tr(a^dag b)|^2 / d^2`.
    Process,
    /// `|<0| a^dag b |0>|^2`, for state-preparation targets.
    State,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub oneq: OneqMethod,
    pub twoq: TwoqMethod,
    pub nq: NqMethod,
    /// Longest sequence stored in the SK basis.
    pub basis_depth: usize,
    /// Solovay-Kitaev recursion depth.
    pub recursion: usize,
    pub basis_cap: usize,
    pub rd_trials: usize,
    pub rd_max_length: usize,
    /// Entangler applications tried by KAK re-synthesis.
    pub max_apps: usize,
    /// Add daggers to the gate list used by RD and KAK.
    pub daggers_everywhere: bool,
    pub fidelity: FidelityKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            oneq: OneqMethod::Skd,
            twoq: TwoqMethod::Kak,
            nq: NqMethod::Qsd,
            basis_depth: 6,
            recursion: 2,
            basis_cap: DEFAULT_BASIS_CAP,
            rd_trials: 500,
            rd_max_length: 20,
            max_apps: 3,
            daggers_everywhere: false,
            fidelity: FidelityKind::Process,
        }
    }
}

impl PipelineConfig {
    pub fn score(&self, a: &CMatrix, b: &CMatrix) -> f64 {
        match self.fidelity {
            FidelityKind::Process => process_fidelity_raw(a, b),
            FidelityKind::State => state_fidelity_raw(a, b),
        }
    }
}

/// Per-gate-set state shared by every decomposition: the SK basis and the
/// gate lists each stage draws from.
#[derive(Clone, Debug)]
pub struct PipelineContext {
    pub cfg: PipelineConfig,
    label: String,
    basis: Option<SkBasis>,
    oneq_gates: Vec<Gate>,
    all_gates: Vec<Gate>,
    entanglers: Vec<Gate>,
}

impl PipelineContext {
    pub fn new(gs: &GateSet, cfg: &PipelineConfig) -> Result<Self> {
        let d = cfg.daggers_everywhere;
        let oneq_gates = gs.effective_gates(1, d);
        let entanglers = gs.effective_gates(2, d);
        let mut all_gates = oneq_gates.clone();
        all_gates.extend(entanglers.iter().cloned());
        for k in 3..=gs.max_arity() {
            all_gates.extend(gs.effective_gates(k, d));
        }
        let basis = if cfg.oneq == OneqMethod::Skd && !oneq_gates.is_empty() {
            Some(skd_build_basis(gs, cfg.basis_depth, cfg.basis_cap)?)
        } else {
            None
        };
        Ok(Self {
            cfg: cfg.clone(),
            label: gs.label().to_string(),
            basis,
            oneq_gates,
            all_gates,
            entanglers,
        })
    }

    pub fn basis(&self) -> Option<&SkBasis> {
        self.basis.as_ref()
    }

    /// Decomposes `u` over the gate set. The reported fidelity is computed
    /// end to end against `u`.
    pub fn decompose(&self, u: &UnitaryMatrix, rng: &mut RngHandle) -> Result<DecompositionResult> {
        let start = Instant::now();
        let circuit = match u.n_qubits() {
            1 => self.oneq(u.matrix(), rng)?,
            2 => match self.cfg.twoq {
                TwoqMethod::Rd => self.rd(u, rng)?,
                TwoqMethod::Kak => self.best_over_entanglers(u, rng, |e, rng| {
                    let syn = kak_resynthesize(u, e, self.cfg.max_apps)?;
                    self.lower(&syn.circuit, rng)
                })?,
            },
            _ => match self.cfg.nq {
                NqMethod::Rd => self.rd(u, rng)?,
                NqMethod::Qsd => {
                    let q = qsd_decompose(u)?.circuit;
                    self.best_over_entanglers(u, rng, |e, rng| {
                        let via = kak_resynthesize(&cx_gate().matrix, e, self.cfg.max_apps)?.circuit;
                        let mut expanded = Circuit::new(q.n_qubits(), "qsd");
                        for op in q.ops() {
                            let g = &q.gates()[op.gate];
                            if g.arity() == 2 {
                                expanded.extend_mapped(&via, &op.qubits)?;
                            } else {
                                expanded.apply(g, &op.qubits)?;
                            }
                        }
                        expanded.mul_phase(q.phase());
                        self.lower(&expanded, rng)
                    })?
                }
            },
        };
        let mut r = DecompositionResult::new(circuit, u, Method::Pipeline, start);
        r.fidelity = self.cfg.score(r.circuit.unitary().matrix(), u.matrix());
        Ok(r)
    }

    fn rd(&self, u: &UnitaryMatrix, rng: &mut RngHandle) -> Result<Circuit> {
        let mut c = rd_decompose(u, &self.all_gates, self.cfg.rd_max_length, self.cfg.rd_trials, rng)?.circuit;
        c.set_label(&self.label);
        Ok(c)
    }

    fn best_over_entanglers(
        &self,
        u: &UnitaryMatrix,
        rng: &mut RngHandle,
        f: impl Fn(&Gate, &mut RngHandle) -> Result<Circuit>,
    ) -> Result<Circuit> {
        if self.entanglers.is_empty() {
            return Err(Error::invalid(format!(
                "gate set `{}` has no two-qubit gate for the KAK stage",
                self.label
            )));
        }
        let mut best: Option<(f64, Circuit)> = None;
        for e in &self.entanglers {
            let c = f(e, rng)?;
            let score = self.cfg.score(c.unitary().matrix(), u.matrix());
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, c));
            }
        }
        Ok(best.expect("at least one entangler").1)
    }

    /// Approximates a single-qubit unitary with the configured method.
    fn oneq(&self, m: &CMatrix, rng: &mut RngHandle) -> Result<Circuit> {
        let u = UnitaryMatrix::from_raw(m.clone());
        let mut c = match (self.cfg.oneq, &self.basis) {
            (OneqMethod::Skd, Some(basis)) => skd_decompose(&u, basis, self.cfg.recursion)?.circuit,
            (OneqMethod::Rd, _) if !self.oneq_gates.is_empty() => {
                rd_decompose(&u, &self.oneq_gates, self.cfg.rd_max_length, self.cfg.rd_trials, rng)?.circuit
            }
            _ => {
                return Err(Error::invalid(format!(
                    "gate set `{}` has no single-qubit gates",
                    self.label
                )))
            }
        };
        c.set_label(&self.label);
        Ok(c)
    }

    /// Rebuilds `c` over the gate set: multi-qubit ops are kept, and each
    /// maximal run of single-qubit ops on a qubit is fused and approximated.
    fn lower(&self, c: &Circuit, rng: &mut RngHandle) -> Result<Circuit> {
        let n = c.n_qubits();
        let mut out = Circuit::new(n, self.label.clone());
        let mut pending: Vec<Option<CMatrix>> = vec![None; n];
        let flush = |q: usize, pending: &mut Vec<Option<CMatrix>>, out: &mut Circuit, rng: &mut RngHandle| -> Result<()> {
            if let Some(m) = pending[q].take() {
                if process_fidelity_raw(&m, &CMatrix::identity(2, 2)) < 1.0 - 1e-14 {
                    let sub = self.oneq(&m, rng)?;
                    out.extend_mapped(&sub, &[q])?;
                }
            }
            Ok(())
        };
        for op in c.ops() {
            let g = &c.gates()[op.gate];
            if g.arity() == 1 {
                let q = op.qubits[0];
                let m = match pending[q].take() {
                    Some(p) => g.matrix.matrix() * p,
                    None => g.matrix.matrix().clone(),
                };
                pending[q] = Some(m);
            } else {
                for &q in &op.qubits {
                    flush(q, &mut pending, &mut out, rng)?;
                }
                out.apply(g, &op.qubits)?;
            }
        }
        for q in 0..n {
            flush(q, &mut pending, &mut out, rng)?;
        }
        Ok(out)
    }
}

/// One-shot convenience: builds the context for `gs` and decomposes `u`.
pub fn decompose_pipeline(
    u: &UnitaryMatrix,
    gs: &GateSet,
    cfg: &PipelineConfig,
    rng: &mut RngHandle,
) -> Result<DecompositionResult> {
    PipelineContext::new(gs, cfg)?.decompose(u, rng)
}
