//! Benchmark datasets of target unitaries.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomp::{canonicalize_coords, weyl_coordinates};
use crate::error::{Error, Result};
use crate::gatelib::{nearest_unitary_checked, nl2, p1, FILE_UNITARITY_TOL};
use crate::matcore::{
    haar_unitary, read_matrix_file, unitary_from_ginibre, CMatrix, RngHandle, UnitaryMatrix, C64, MAX_QUBITS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    HaarUnitary,
    HaarState,
    GoldenEquispaced,
    U3Grid,
    StabMagic,
    WeylRandom,
    WeylEquispacedNonlocal,
    FromFiles,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub n_qubits: usize,
    pub kind: DatasetKind,
    pub seed: Option<u64>,
    pub unitaries: Vec<UnitaryMatrix>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }
}

/// Declarative description of a dataset, as it appears in run configs and
/// manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "one")]
    pub qubits: usize,
    #[serde(default)]
    pub size: usize,
    /// Points per axis for `u3-grid`.
    #[serde(default)]
    pub resolution: usize,
    /// Overrides the run seed for stochastic kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathBuf>,
}

fn one() -> usize {
    1
}

impl DatasetSpec {
    /// Generates the dataset; relative paths resolve against `base`.
    pub fn build(&self, run_seed: u64, base: &Path) -> Result<Dataset> {
        let seed = self.seed.unwrap_or(run_seed);
        let need_size = || {
            if self.size == 0 {
                Err(Error::Config(format!("dataset.size must be at least 1 for {:?}", self.kind)))
            } else {
                Ok(self.size)
            }
        };
        let need_qubits = |n: usize| {
            if self.qubits != n {
                Err(Error::Config(format!(
                    "dataset kind {:?} is {n}-qubit, got qubits = {}",
                    self.kind, self.qubits
                )))
            } else {
                Ok(())
            }
        };
        let mut rng = RngHandle::new(seed);
        match self.kind {
            DatasetKind::HaarUnitary => gen_haar_unitaries(self.qubits, need_size()?, &mut rng),
            DatasetKind::HaarState => gen_haar_states(self.qubits, need_size()?, &mut rng),
            DatasetKind::GoldenEquispaced => {
                need_qubits(1)?;
                gen_golden_equispaced(need_size()?)
            }
            DatasetKind::U3Grid => {
                need_qubits(1)?;
                if self.resolution == 0 {
                    return Err(Error::Config("dataset.resolution must be at least 1 for u3-grid".into()));
                }
                gen_u3_grid(self.resolution)
            }
            DatasetKind::StabMagic => {
                need_qubits(1)?;
                Ok(gen_stab_magic())
            }
            DatasetKind::WeylRandom => {
                need_qubits(2)?;
                gen_weyl_random(need_size()?, &mut rng)
            }
            DatasetKind::WeylEquispacedNonlocal => {
                need_qubits(2)?;
                gen_weyl_equispaced_nonlocal(need_size()?)
            }
            DatasetKind::FromFiles => {
                let paths: Vec<PathBuf> = self.paths.iter().map(|p| base.join(p)).collect();
                load_dataset(&paths, Some(self.qubits))
            }
        }
        .map(|mut d| {
            if matches!(
                self.kind,
                DatasetKind::HaarUnitary | DatasetKind::HaarState | DatasetKind::WeylRandom
            ) {
                d.seed = Some(seed);
            }
            d
        })
    }
}

fn check_qubits(n: usize) -> Result<usize> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::invalid(format!("qubit count must be in 1..={MAX_QUBITS}, got {n}")));
    }
    Ok(1 << n)
}

fn dataset(n_qubits: usize, kind: DatasetKind, unitaries: Vec<CMatrix>) -> Dataset {
    Dataset {
        n_qubits,
        kind,
        seed: None,
        unitaries: unitaries.into_iter().map(UnitaryMatrix::from_raw).collect(),
    }
}

pub fn gen_haar_unitaries(n: usize, size: usize, rng: &mut RngHandle) -> Result<Dataset> {
    let d = check_qubits(n)?;
    let us = (0..size)
        .map(|_| haar_unitary(d, rng).map(UnitaryMatrix::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = dataset(n, DatasetKind::HaarUnitary, us);
    ds.seed = Some(rng.seed());
    Ok(ds)
}

/// State-preparation unitaries whose first column is a Haar-random state,
/// completed to a unitary by orthonormalizing random further columns.
pub fn gen_haar_states(n: usize, size: usize, rng: &mut RngHandle) -> Result<Dataset> {
    let d = check_qubits(n)?;
    let us = (0..size)
        .map(|_| {
            let z = CMatrix::from_fn(d, d, |_, _| C64::new(rng.normal(), rng.normal()));
            unitary_from_ginibre(z)
        })
        .collect();
    let mut ds = dataset(n, DatasetKind::HaarState, us);
    ds.seed = Some(rng.seed());
    Ok(ds)
}

/// Unitary `P1(theta, phi, 0)` preparing the state with Bloch angles
/// `(theta, phi)` from `|0>`.
fn bloch_prep(theta: f64, phi: f64) -> CMatrix {
    p1(theta, phi.rem_euclid(2.0 * PI), 0.0)
}

/// Fibonacci-sphere points: colatitude `acos(1 - 2(i + 1/2)/size)` and
/// azimuth `2 pi i / golden_ratio`.
pub fn gen_golden_equispaced(size: usize) -> Result<Dataset> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let us = (0..size)
        .map(|i| {
            let theta = (1.0 - 2.0 * (i as f64 + 0.5) / size as f64).acos();
            let phi = 2.0 * PI * i as f64 / golden;
            bloch_prep(theta, phi)
        })
        .collect();
    Ok(dataset(1, DatasetKind::GoldenEquispaced, us))
}

/// `resolution^3` P1 gates on a grid over `[0, pi] x [0, 2pi) x [0, 2pi)`:
/// the closed axis includes both ends, the periodic axes are spaced
/// `2 pi / resolution`. `resolution = 1` gives the midpoints.
pub fn gen_u3_grid(resolution: usize) -> Result<Dataset> {
    let axis = |closed: bool| -> Vec<f64> {
        if resolution == 1 {
            return vec![if closed { PI / 2.0 } else { PI }];
        }
        (0..resolution)
            .map(|k| {
                if closed {
                    PI * k as f64 / (resolution - 1) as f64
                } else {
                    2.0 * PI * k as f64 / resolution as f64
                }
            })
            .collect()
    };
    let (a1, a2) = (axis(true), axis(false));
    let mut us = Vec::with_capacity(resolution.pow(3));
    for &x in &a1 {
        for &y in &a2 {
            for &z in &a2 {
                us.push(p1(x, y, z));
            }
        }
    }
    Ok(dataset(1, DatasetKind::U3Grid, us))
}

/// Bloch vectors of the stab-magic dataset: `+Z, -Z, +X, -X, +Y, -Y`, then
/// the eight `(+-1, +-1, +-1)/sqrt(3)`.
pub fn stab_magic_bloch() -> Vec<[f64; 3]> {
    let mut v = vec![
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ];
    let s = 1.0 / 3f64.sqrt();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                v.push([sx * s, sy * s, sz * s]);
            }
        }
    }
    v
}

pub fn gen_stab_magic() -> Dataset {
    let us = stab_magic_bloch()
        .into_iter()
        .map(|[x, y, z]| bloch_prep(z.clamp(-1.0, 1.0).acos(), y.atan2(x)))
        .collect();
    dataset(1, DatasetKind::StabMagic, us)
}

/// Canonical gates at `t` drawn uniformly from `[0, 1]^3` and mapped into
/// the Weyl chamber.
pub fn gen_weyl_random(size: usize, rng: &mut RngHandle) -> Result<Dataset> {
    let us = (0..size)
        .map(|_| {
            let t = canonicalize_coords([rng.uniform(), rng.uniform(), rng.uniform()]);
            nl2(t[0], t[1], t[2])
        })
        .collect();
    let mut ds = dataset(2, DatasetKind::WeylRandom, us);
    ds.seed = Some(rng.seed());
    Ok(ds)
}

/// Chamber points of the grid with spacing `1/m`, without the origin.
fn chamber_grid(m: usize) -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    for i in 0..=m {
        for j in 0..=i {
            for k in 0..=j {
                let t = [i as f64 / m as f64, j as f64 / m as f64, k as f64 / m as f64];
                if t[0] + t[1] > 1.0 + 1e-12 || (t[0] > 0.5 + 1e-12 && k == 0) || (i == 0) {
                    continue;
                }
                pts.push(t);
            }
        }
    }
    pts
}

/// Canonical gates on a regular chamber grid, trimmed to `size` points by
/// greedy farthest-point selection.
pub fn gen_weyl_equispaced_nonlocal(size: usize) -> Result<Dataset> {
    let mut m = 2;
    let mut pts = chamber_grid(m);
    while pts.len() < size {
        m += 1;
        pts = chamber_grid(m);
    }
    let dist = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let mut chosen = Vec::with_capacity(size);
    let mut mind = vec![f64::INFINITY; pts.len()];
    // Start from the point farthest from the identity class.
    let mut next = (0..pts.len())
        .max_by(|&a, &b| dist(&pts[a], &[0.0; 3]).total_cmp(&dist(&pts[b], &[0.0; 3])).then(b.cmp(&a)))
        .expect("grid is non-empty");
    while chosen.len() < size {
        chosen.push(next);
        for (i, p) in pts.iter().enumerate() {
            mind[i] = mind[i].min(dist(p, &pts[next]));
        }
        next = (0..pts.len())
            .max_by(|&a, &b| mind[a].total_cmp(&mind[b]).then(b.cmp(&a)))
            .expect("grid is non-empty");
    }
    chosen.sort_unstable();
    let us = chosen.into_iter().map(|i| nl2(pts[i][0], pts[i][1], pts[i][2])).collect();
    Ok(dataset(2, DatasetKind::WeylEquispacedNonlocal, us))
}

/// Loads unitaries from matrix files. Entries within `1e-8` of unitary are
/// snapped to the nearest unitary; all files must share one dimension.
pub fn load_dataset(paths: &[PathBuf], n_qubits: Option<usize>) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::invalid("no dataset files given"));
    }
    let mut us: Vec<UnitaryMatrix> = Vec::with_capacity(paths.len());
    for p in paths {
        let m = read_matrix_file(p)?;
        let d = m.nrows();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::Validation(format!(
                "{}: dimension {d} is not a power of two >= 2",
                p.display()
            )));
        }
        if let Some(first) = us.first() {
            if first.dim() != d {
                return Err(Error::Validation(format!(
                    "{}: dimension {d} differs from {} in {}",
                    p.display(),
                    first.dim(),
                    paths[0].display()
                )));
            }
        }
        let u = nearest_unitary_checked(m, FILE_UNITARITY_TOL)
            .map_err(|e| Error::Validation(format!("{}: {e}", p.display())))?;
        us.push(u);
    }
    let n = us[0].n_qubits();
    if let Some(want) = n_qubits {
        if want != n {
            return Err(Error::Validation(format!(
                "dataset files are {n}-qubit, configured for {want}"
            )));
        }
    }
    Ok(Dataset {
        n_qubits: n,
        kind: DatasetKind::FromFiles,
        seed: None,
        unitaries: us,
    })
}

/// Bloch vector of `u|0>`.
pub fn bloch_vector(u: &CMatrix) -> [f64; 3] {
    let (a, b) = (u[(0, 0)], u[(1, 0)]);
    let ab = a.conj() * b;
    [2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()]
}

/// Plot coordinates: Bloch vectors for one qubit, Weyl coordinates for two.
pub fn export_coords(ds: &Dataset) -> Result<String> {
    let mut out = String::new();
    match ds.n_qubits {
        1 => {
            out.push_str("index,x,y,z\n");
            for (i, u) in ds.unitaries.iter().enumerate() {
                let [x, y, z] = bloch_vector(u.matrix());
                let _ = writeln!(out, "{i},{x},{y},{z}");
            }
        }
        2 => {
            out.push_str("index,tx,ty,tz\n");
            for (i, u) in ds.unitaries.iter().enumerate() {
                let [x, y, z] = weyl_coordinates(u)?;
                let _ = writeln!(out, "{i},{x},{y},{z}");
            }
        }
        n => return Err(Error::Unsupported(format!("coordinate export needs 1 or 2 qubits, got {n}"))),
    }
    Ok(out)
}
