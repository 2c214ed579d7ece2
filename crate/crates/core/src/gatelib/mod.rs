//! Gate catalog, parametric gates, gate-set assembly and circuits.

mod circuit;
mod gateset;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    haar_unitary, read_matrix_file, unitarity_error, CMatrix, RngHandle, UnitaryMatrix, C64, I,
    ONE, ZERO,
};

pub use circuit::{builtin_gate, p1_gate, rotation_gate, Circuit, Op};
pub(crate) use circuit::apply_gate;
pub use gateset::{assemble_gateset, Gate, GateSet, GateSetRecord};

/// Tolerance for matrices read from gate or dataset files. Inputs within it
/// are projected onto the nearest unitary.
pub const FILE_UNITARITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateId {
    R1,
    P1,
    T1,
    TD1,
    S1,
    Z1,
    X1,
    H1,
    F1,
    R2,
    NL2,
    CX2,
    CZ2,
    B2,
    SPE2,
    F2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    Fixed,
    Parametric,
    RandomFrozen,
    File,
}

impl GateId {
    pub const ALL: [GateId; 16] = [
        GateId::R1,
        GateId::P1,
        GateId::T1,
        GateId::TD1,
        GateId::S1,
        GateId::Z1,
        GateId::X1,
        GateId::H1,
        GateId::F1,
        GateId::R2,
        GateId::NL2,
        GateId::CX2,
        GateId::CZ2,
        GateId::B2,
        GateId::SPE2,
        GateId::F2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateId::R1 => "R1",
            GateId::P1 => "P1",
            GateId::T1 => "T1",
            GateId::TD1 => "TD1",
            GateId::S1 => "S1",
            GateId::Z1 => "Z1",
            GateId::X1 => "X1",
            GateId::H1 => "H1",
            GateId::F1 => "F1",
            GateId::R2 => "R2",
            GateId::NL2 => "NL2",
            GateId::CX2 => "CX2",
            GateId::CZ2 => "CZ2",
            GateId::B2 => "B2",
            GateId::SPE2 => "SPE2",
            GateId::F2 => "F2",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateId::R2 | GateId::NL2 | GateId::CX2 | GateId::CZ2 | GateId::B2 | GateId::SPE2 | GateId::F2 => 2,
            _ => 1,
        }
    }

    pub fn kind(self) -> GateKind {
        match self {
            GateId::P1 | GateId::NL2 | GateId::SPE2 => GateKind::Parametric,
            GateId::R1 | GateId::R2 => GateKind::RandomFrozen,
            GateId::F1 | GateId::F2 => GateKind::File,
            _ => GateKind::Fixed,
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GateId::P1 | GateId::NL2 => 3,
            GateId::SPE2 => 1,
            _ => 0,
        }
    }

    /// Search domain of each parameter slot.
    pub fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            GateId::P1 => vec![(0.0, PI), (0.0, 2.0 * PI), (0.0, 2.0 * PI)],
            GateId::NL2 => vec![(0.0, 1.0); 3],
            GateId::SPE2 => vec![(0.0, 0.5)],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateId::ALL
            .iter()
            .copied()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown gate identifier `{s}`")))
    }
}

/// One element of a gate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct GateSpec {
    pub id: GateId,
    pub fab_cost: f64,
    pub file: Option<PathBuf>,
}

impl GateSpec {
    pub fn new(id: GateId) -> Self {
        Self {
            id,
            fab_cost: 1.0,
            file: None,
        }
    }

    pub fn from_file(id: GateId, path: impl Into<PathBuf>) -> Self {
        Self {
            id,
            fab_cost: 1.0,
            file: Some(path.into()),
        }
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.fab_cost = cost;
        self
    }

    pub fn arity(&self) -> usize {
        self.id.arity()
    }

    pub fn param_count(&self) -> usize {
        self.id.param_count()
    }

    pub fn kind(&self) -> GateKind {
        self.id.kind()
    }

    fn validate(&self) -> Result<()> {
        if !(self.fab_cost.is_finite() && self.fab_cost >= 0.0) {
            return Err(Error::invalid(format!(
                "{}: fabrication cost must be finite and nonnegative",
                self.id
            )));
        }
        match (self.kind(), &self.file) {
            (GateKind::File, None) => Err(Error::invalid(format!("{} requires a file path", self.id))),
            (GateKind::File, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => Err(Error::invalid(format!("{} does not take a file path", self.id))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Name(String),
    Full {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<f64>,
    },
}

impl TryFrom<SpecRepr> for GateSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let spec = match r {
            SpecRepr::Name(n) => GateSpec::new(n.parse()?),
            SpecRepr::Full { id, file, cost } => GateSpec {
                id: id.parse()?,
                fab_cost: cost.unwrap_or(1.0),
                file,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<GateSpec> for SpecRepr {
    fn from(s: GateSpec) -> Self {
        if s.file.is_none() && s.fab_cost == 1.0 {
            SpecRepr::Name(s.id.name().to_string())
        } else {
            SpecRepr::Full {
                id: s.id.name().to_string(),
                file: s.file,
                cost: (s.fab_cost != 1.0).then_some(s.fab_cost),
            }
        }
    }
}

/// The catalog matrix for `spec`. `rng` is drawn from only by R1 and R2.
pub fn gate_matrix(spec: &GateSpec, params: &[f64], rng: &mut RngHandle) -> Result<UnitaryMatrix> {
    if params.len() != spec.param_count() {
        return Err(Error::invalid(format!(
            "{} takes {} parameters, got {}",
            spec.id,
            spec.param_count(),
            params.len()
        )));
    }
    spec.validate()?;
    let m = match spec.id {
        GateId::R1 => return haar_unitary(2, rng),
        GateId::R2 => return haar_unitary(4, rng),
        GateId::F1 | GateId::F2 => {
            return load_gate_file(spec.file.as_deref().unwrap(), spec.arity());
        }
        GateId::P1 => p1(params[0], params[1], params[2]),
        GateId::NL2 => nl2(params[0], params[1], params[2]),
        GateId::SPE2 => nl2(0.5, params[0], 0.0),
        GateId::T1 => phase_gate(PI / 4.0),
        GateId::TD1 => phase_gate(-PI / 4.0),
        GateId::S1 => phase_gate(PI / 2.0),
        GateId::Z1 => phase_gate(PI),
        GateId::X1 => pauli_x(),
        GateId::H1 => hadamard(),
        GateId::CX2 => cx(),
        GateId::CZ2 => cz(),
        GateId::B2 => berkeley(),
    };
    Ok(UnitaryMatrix::from_raw(m))
}

fn load_gate_file(path: &Path, arity: usize) -> Result<UnitaryMatrix> {
    let m = read_matrix_file(path)?;
    if m.nrows() != 1 << arity {
        return Err(Error::Validation(format!(
            "{}: expected a {d}x{d} matrix, found {n}x{n}",
            path.display(),
            d = 1 << arity,
            n = m.nrows()
        )));
    }
    nearest_unitary_checked(m, FILE_UNITARITY_TOL).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Accepts `m` if it is unitary to `tol` and snaps it onto the unitary group
/// so downstream code can rely on the tighter invariant.
pub(crate) fn nearest_unitary_checked(m: CMatrix, tol: f64) -> Result<UnitaryMatrix> {
    let err = unitarity_error(&m);
    if !(err < tol) {
        return Err(Error::Validation(format!(
            "matrix is not unitary (max |U^dag U - I| = {err:.3e}, tolerance {tol:.0e})"
        )));
    }
    if err < crate::matcore::UNITARITY_TOL {
        return UnitaryMatrix::new(m);
    }
    let (u, _, v) = crate::matcore::svd(&m);
    UnitaryMatrix::new(u * v.adjoint())
}

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn phase_gate(theta: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, theta)])
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    phase_gate(PI)
}

pub fn hadamard() -> CMatrix {
    let s = c(FRAC_1_SQRT_2);
    CMatrix::from_row_slice(2, 2, &[s, s, s, -s])
}

/// CNOT with control on the more significant qubit.
pub fn cx() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn cz() -> CMatrix {
    let mut m = CMatrix::identity(4, 4);
    m[(3, 3)] = -ONE;
    m
}

pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

pub fn berkeley() -> CMatrix {
    let (c1, s1) = (c((PI / 8.0).cos()), I * (PI / 8.0).sin());
    let (c3, s3) = (c((3.0 * PI / 8.0).cos()), I * (3.0 * PI / 8.0).sin());
    CMatrix::from_row_slice(
        4,
        4,
        &[
            c1, ZERO, ZERO, s1, //
            ZERO, c3, s3, ZERO, //
            ZERO, s3, c3, ZERO, //
            s1, ZERO, ZERO, c1,
        ],
    )
}

/// `[[cos(a1/2), -e^{i a3} sin(a1/2)], [e^{i a2} sin(a1/2), e^{i(a2+a3)} cos(a1/2)]]`.
pub fn p1(a1: f64, a2: f64, a3: f64) -> CMatrix {
    let (s, co) = (a1 / 2.0).sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(co),
            -C64::from_polar(s, a3),
            C64::from_polar(s, a2),
            C64::from_polar(co, a2 + a3),
        ],
    )
}

/// Parameters `(a1, a2, a3)` and phase `alpha` with `u = e^{i alpha} P1(a1, a2, a3)`,
/// `a1 in [0, pi]`, `a2, a3 in [0, 2pi)`.
pub fn p1_params(u: &CMatrix) -> ([f64; 3], f64) {
    let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let a1 = 2.0 * u10.norm().atan2(u00.norm());
    let eps = 1e-12;
    let (alpha, a2, a3) = if u00.norm() > eps && u10.norm() > eps {
        let alpha = u00.arg();
        (alpha, u10.arg() - alpha, (-u01).arg() - alpha)
    } else if u00.norm() > eps {
        let alpha = u00.arg();
        (alpha, u11.arg() - alpha, 0.0)
    } else {
        (0.0, u10.arg(), (-u01).arg())
    };
    let wrap = |x: f64| {
        let y = x.rem_euclid(2.0 * PI);
        if y >= 2.0 * PI - 1e-15 { 0.0 } else { y }
    };
    ([a1, wrap(a2), wrap(a3)], alpha)
}

pub fn rx(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co), -I * s, -I * s, c(co)])
}

pub fn ry(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

pub fn rz(theta: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, C64::from_polar(1.0, theta / 2.0)],
    )
}

/// The magic basis: canonical gates are diagonal in it and `SU(2) x SU(2)`
/// maps onto `SO(4)`.
pub fn magic_basis() -> CMatrix {
    let s = FRAC_1_SQRT_2;
    let (o, i, z) = (c(s), I * s, ZERO);
    CMatrix::from_row_slice(
        4,
        4,
        &[
            o, i, z, z, //
            z, z, i, o, //
            z, z, i, -o, //
            o, -i, z, z,
        ],
    )
}

/// Eigenphases of `NL2(t)` in the magic basis, in column order of
/// [`magic_basis`].
pub fn canonical_phases(tx: f64, ty: f64, tz: f64) -> [f64; 4] {
    let h = PI / 2.0;
    [
        h * (-tx + ty - tz),
        h * (tx - ty - tz),
        h * (-tx - ty + tz),
        h * (tx + ty + tz),
    ]
}

/// `exp(-i pi/2 (tx XX + ty YY + tz ZZ))`, evaluated as `M D M^dag`.
pub fn nl2(tx: f64, ty: f64, tz: f64) -> CMatrix {
    let m = magic_basis();
    let ph = canonical_phases(tx, ty, tz);
    let mut md = m.clone();
    for (j, p) in ph.iter().enumerate() {
        let e = C64::from_polar(1.0, *p);
        for i in 0..4 {
            md[(i, j)] *= e;
        }
    }
    md * m.adjoint()
}
