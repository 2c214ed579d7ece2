//! Decomposition engines and the routing pipeline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::gatelib::Circuit;
use crate::matcore::{process_fidelity_raw, UnitaryMatrix};

pub mod kak;
pub mod pipeline;
pub mod qsd;
pub mod rd;
pub mod skd;

pub use kak::{
    canonicalize_coords, in_weyl_chamber, kak_canonicalize, kak_resynthesize, makhlin_invariants,
    weyl_coordinates, CanonicalForm, KakSynthesis,
};
pub use pipeline::{decompose_pipeline, FidelityKind, NqMethod, OneqMethod, PipelineConfig, PipelineContext, TwoqMethod};
pub use qsd::qsd_decompose;
pub use rd::rd_decompose;
pub use skd::{skd_best_approx, skd_build_basis, skd_decompose, skd_group_commutator, SkBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Skd,
    Rd,
    Kak,
    Qsd,
    Pipeline,
}

/// A circuit together with how well it reproduces its target.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub circuit: Circuit,
    pub fidelity: f64,
    pub depth: usize,
    pub method: Method,
    pub elapsed: f64,
}

impl DecompositionResult {
    /// Scores `circuit` against `target` by process fidelity.
    pub fn new(circuit: Circuit, target: &UnitaryMatrix, method: Method, start: Instant) -> Self {
        let fidelity = process_fidelity_raw(circuit.unitary().matrix(), target.matrix());
        Self {
            depth: circuit.depth(),
            circuit,
            fidelity,
            method,
            elapsed: start.elapsed().as_secs_f64(),
        }
    }
}
