use serde::{Deserialize, Serialize};

use super::{gate_matrix, GateKind, GateSpec};
use crate::error::{Error, Result};
use crate::matcore::{process_fidelity_raw, RngHandle, UnitaryMatrix};

/// A concrete gate: a name, its arity and its matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub matrix: UnitaryMatrix,
    pub fab_cost: f64,
}

impl Gate {
    pub fn new(name: impl Into<String>, matrix: UnitaryMatrix) -> Self {
        Self {
            name: name.into(),
            matrix,
            fab_cost: 1.0,
        }
    }

    pub fn arity(&self) -> usize {
        self.matrix.n_qubits()
    }

    pub fn dagger(&self) -> Gate {
        Gate {
            name: format!("{}dg", self.name),
            matrix: self.matrix.adjoint(),
            fab_cost: self.fab_cost,
        }
    }
}

/// An assembled gate set: specs, their packed parameters, and the frozen
/// matrices. Immutable once built.
#[derive(Clone, Debug)]
pub struct GateSet {
    label: String,
    specs: Vec<GateSpec>,
    params: Vec<f64>,
    seed: u64,
    include_daggers: bool,
    gates: Vec<Gate>,
}

/// Serializable description from which a gate set is rebuilt exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSetRecord {
    pub label: String,
    pub gates: Vec<GateSpec>,
    pub params: Vec<f64>,
    pub seed: u64,
    pub include_daggers: bool,
}

/// Builds a gate set. R1/R2 are sampled from `rng` in list order and frozen;
/// F1/F2 are loaded and validated.
pub fn assemble_gateset(
    specs: &[GateSpec],
    params: &[f64],
    rng: &mut RngHandle,
    include_daggers: bool,
) -> Result<GateSet> {
    let want: usize = specs.iter().map(|s| s.param_count()).sum();
    if params.len() != want {
        return Err(Error::invalid(format!(
            "gate set takes {want} parameters, got {}",
            params.len()
        )));
    }
    if specs.is_empty() {
        return Err(Error::invalid("gate set has no gates"));
    }
    let seed = rng.seed();
    let mut gates = Vec::with_capacity(specs.len());
    let mut offset = 0;
    for (k, spec) in specs.iter().enumerate() {
        let n = spec.param_count();
        let matrix = gate_matrix(spec, &params[offset..offset + n], rng)?;
        offset += n;
        let repeats = specs.iter().filter(|s| s.id == spec.id).count();
        let name = if repeats > 1 {
            let ordinal = specs[..k].iter().filter(|s| s.id == spec.id).count();
            format!("{}_{ordinal}", spec.id)
        } else {
            spec.id.to_string()
        };
        gates.push(Gate {
            name,
            matrix,
            fab_cost: spec.fab_cost,
        });
    }
    let label = specs.iter().map(|s| s.id.name()).collect::<Vec<_>>().join(",");
    Ok(GateSet {
        label,
        specs: specs.to_vec(),
        params: params.to_vec(),
        seed,
        include_daggers,
        gates,
    })
}

impl GateSet {
    pub fn from_record(r: &GateSetRecord) -> Result<Self> {
        let mut rng = RngHandle::new(r.seed);
        Ok(assemble_gateset(&r.gates, &r.params, &mut rng, r.include_daggers)?.with_label(&r.label))
    }

    pub fn record(&self) -> GateSetRecord {
        GateSetRecord {
            label: self.label.clone(),
            gates: self.specs.clone(),
            params: self.params.clone(),
            seed: self.seed,
            include_daggers: self.include_daggers,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn specs(&self) -> &[GateSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn include_daggers(&self) -> bool {
        self.include_daggers
    }

    /// One gate per spec, in spec order.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn param_bounds(&self) -> Vec<(f64, f64)> {
        self.specs.iter().flat_map(|s| s.id.bounds()).collect()
    }

    pub fn has_random_or_file(&self) -> bool {
        self.specs
            .iter()
            .any(|s| matches!(s.kind(), GateKind::RandomFrozen | GateKind::File))
    }

    pub fn mean_fab_cost(&self) -> f64 {
        self.gates.iter().map(|g| g.fab_cost).sum::<f64>() / self.gates.len() as f64
    }

    /// Gates of the given arity, optionally with their daggers, deduplicated
    /// up to global phase (first occurrence wins).
    pub fn effective_gates(&self, arity: usize, with_daggers: bool) -> Vec<Gate> {
        let mut out: Vec<Gate> = Vec::new();
        let mut push = |g: Gate| {
            let dup = out.iter().any(|h| {
                process_fidelity_raw(h.matrix.matrix(), g.matrix.matrix()) > 1.0 - 1e-12
            });
            if !dup {
                out.push(g);
            }
        };
        for g in self.gates.iter().filter(|g| g.arity() == arity) {
            push(g.clone());
            if with_daggers {
                push(g.dagger());
            }
        }
        out
    }

    pub fn max_arity(&self) -> usize {
        self.gates.iter().map(|g| g.arity()).max().unwrap_or(0)
    }
}
