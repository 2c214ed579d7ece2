//! Dense complex linear algebra, Haar sampling and unitary distance metrics.

mod io;
mod rng;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use io::{matrix_to_text, parse_matrix, read_matrix_file, write_matrix_binary, write_matrix_text};
pub(crate) use io::{format_complex, parse_complex};
pub use rng::{derive_seed, RngHandle};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Entrywise tolerance for the unitarity invariant.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Reconstruction tolerance for the exact decompositions.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Largest supported register.
pub const MAX_QUBITS: usize = 6;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A dense unitary of dimension `2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    m: CMatrix,
}

impl UnitaryMatrix {
    /// Validates squareness, power-of-two dimension and unitarity at
    /// [`UNITARITY_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, UNITARITY_TOL)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::invalid(format!("dimension {d} is not a power of two")));
        }
        if d > 1 << MAX_QUBITS {
            return Err(Error::Unsupported(format!(
                "dimension {d} exceeds the {MAX_QUBITS}-qubit cap"
            )));
        }
        let err = unitarity_error(&m);
        if !(err < tol) {
            return Err(Error::Validation(format!(
                "matrix is not unitary (max |U^dag U - I| = {err:.3e}, tolerance {tol:.0e})"
            )));
        }
        Ok(Self { m })
    }

    /// Skips validation. Callers guarantee unitarity by construction.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert!(m.nrows() == m.ncols());
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    /// Matrix product `self * rhs`.
    pub fn compose(&self, rhs: &UnitaryMatrix) -> Self {
        Self {
            m: &self.m * &rhs.m,
        }
    }

    pub fn scaled(&self, phase: C64) -> Self {
        Self {
            m: self.m.map(|z| z * phase),
        }
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.m)
    }
}

/// `max |(U^dag U - I)_ij|`.
pub fn unitarity_error(m: &CMatrix) -> f64 {
    let p = m.adjoint() * m;
    let mut err = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { ONE } else { ZERO };
            err = err.max((p[(i, j)] - target).norm());
        }
    }
    err
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix, with the
/// phases of `R`'s diagonal folded back into `Q`.
pub fn haar_unitary(dim: usize, rng: &mut RngHandle) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::invalid("haar_unitary: dim must be >= 1"));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.normal() * scale, rng.normal() * scale));
    Ok(UnitaryMatrix::from_raw(unitary_from_ginibre(z)))
}

pub(crate) fn unitary_from_ginibre(z: CMatrix) -> CMatrix {
    let dim = z.nrows();
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        let ph = if n > 0.0 { d / n } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// `Tr(a^dag b)` without forming the product.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn check_same_dim(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `|Tr(a^dag b)|^2 / d^2`, the process fidelity of two unitary channels.
pub fn process_fidelity(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(process_fidelity_raw(a.matrix(), b.matrix()))
}

pub(crate) fn process_fidelity_raw(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows() as f64;
    (trace_inner(a, b).norm_sqr() / (d * d)).clamp(0.0, 1.0)
}

/// `|<0| a^dag b |0>|^2`: overlap of the states both operators prepare from
/// the all-zero basis state.
pub fn state_fidelity(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(state_fidelity_raw(a.matrix(), b.matrix()))
}

pub(crate) fn state_fidelity_raw(a: &CMatrix, b: &CMatrix) -> f64 {
    let ov: C64 = a.column(0).iter().zip(b.column(0).iter()).map(|(x, y)| x.conj() * y).sum();
    ov.norm_sqr().clamp(0.0, 1.0)
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    svd(m).1.first().copied().unwrap_or(0.0)
}

/// Singular value decomposition `a = u diag(s) v^dag` of a square complex
/// matrix by one-sided Jacobi rotations, with `s` sorted descending.
///
/// Accurate on rank-deficient inputs, where the bidiagonalization-based
/// routine in nalgebra occasionally returns a wrong factorization.
pub fn svd(a: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let n = a.ncols();
    assert_eq!(a.nrows(), n, "svd: square matrices only");
    let mut w = a.clone();
    let mut v = CMatrix::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = w.column(p).iter().zip(w.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let ph = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for i in 0..m.nrows() {
                        let xp = m[(i, p)];
                        let xq = m[(i, q)] * ph.conj();
                        m[(i, p)] = xp * c - xq * s;
                        m[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (w.column(j).norm(), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let smax = order.first().map(|o| o.0).unwrap_or(0.0);
    let mut u = CMatrix::zeros(n, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = 0;
    for (k, &(sv, j)) in order.iter().enumerate() {
        vs.set_column(k, &v.column(j));
        s.push(sv);
        if sv > 1e-14 * smax.max(1e-300) {
            u.set_column(k, &(w.column(j) / C64::new(sv, 0.0)));
            filled = k + 1;
        }
    }
    // Complete the left basis for (numerically) zero singular values.
    let mut e = 0;
    while filled < n {
        let mut cand = CMatrix::zeros(n, 1);
        cand[(e, 0)] = ONE;
        e += 1;
        for _ in 0..2 {
            for k in 0..filled {
                let proj: C64 = u.column(k).iter().zip(cand.iter()).map(|(x, y)| x.conj() * y).sum();
                for i in 0..n {
                    cand[(i, 0)] -= u[(i, k)] * proj;
                }
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-8 {
            u.set_column(filled, &(cand.column(0) / C64::new(nrm, 0.0)));
            filled += 1;
        }
    }
    (u, s, vs)
}

/// Spectral-norm distance after aligning the global phase of `b` to `a`.
///
/// The phase is taken from `Tr(a^dag b)`; when that trace vanishes a
/// 360-point grid over the phase circle is scanned instead.
pub fn operator_distance(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(operator_distance_raw(a.matrix(), b.matrix()))
}

pub(crate) fn operator_distance_raw(a: &CMatrix, b: &CMatrix) -> f64 {
    let tr = trace_inner(a, b);
    let d = a.nrows() as f64;
    if tr.norm() > 1e-12 * d {
        let phase = tr.conj() / tr.norm();
        return spectral_norm(&(a - b.map(|z| z * phase)));
    }
    (0..360)
        .map(|k| {
            let phase = C64::from_polar(1.0, 2.0 * PI * k as f64 / 360.0);
            spectral_norm(&(a - b.map(|z| z * phase)))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Phase `e^{i phi}` that best aligns `b` to `a` (maximizes `Re Tr(a^dag e^{i phi} b)`).
pub fn alignment_phase(a: &CMatrix, b: &CMatrix) -> C64 {
    let tr = trace_inner(a, b);
    if tr.norm() > 0.0 {
        tr.conj() / tr.norm()
    } else {
        ONE
    }
}

/// Kronecker product with `a` on the more significant index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigendecomposition `m = Q diag(lambda) Q^T` of a complex symmetric unitary
/// with real orthogonal `Q` (`det Q = +1`).
///
/// `Re m` and `Im m` commute, so a generic real combination of the two shares
/// their eigenbasis. Several fixed combinations are tried and the first one
/// that diagonalizes `m` is kept, which also covers degenerate spectra.
pub fn eig_unitary_symmetric(m: &CMatrix) -> Result<(Vec<C64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid("eig_unitary_symmetric: matrix is not square"));
    }
    let asym = (m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-8 {
        return Err(Error::invalid(format!(
            "eig_unitary_symmetric: matrix is not symmetric (max |m - m^T| = {asym:.2e})"
        )));
    }
    let uerr = unitarity_error(m);
    if uerr > 1e-8 {
        return Err(Error::invalid(format!(
            "eig_unitary_symmetric: matrix is not unitary (error {uerr:.2e})"
        )));
    }
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let re = (&re + re.transpose()) * 0.5;
    let im = (&im + im.transpose()) * 0.5;

    const MIX: [f64; 6] = [
        0.618_033_988_749_894_9,
        1.414_213_562_373_095,
        -0.377_964_473_009_227_2,
        2.718_281_828_459_045,
        0.123_456_789,
        -3.141_592_653_589_793,
    ];
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for &k in MIX.iter() {
        let comb = &re + &im * k;
        let eig = SymmetricEigen::new(comb);
        let mut q = eig.eigenvectors;
        let off = offdiag_residual(m, &q);
        if best.as_ref().is_none_or(|(e, _)| off < *e) {
            if q.determinant() < 0.0 {
                let mut c = q.column_mut(0);
                c *= -1.0;
            }
            best = Some((off, q));
        }
        if off < 1e-12 {
            break;
        }
    }
    let (off, q) = best.expect("at least one mixing coefficient");
    if off > 1e-8 {
        return Err(Error::Internal(format!(
            "eig_unitary_symmetric: failed to diagonalize (residual {off:.2e})"
        )));
    }
    let qc = q.map(|x| C64::new(x, 0.0));
    let d = qc.transpose() * m * &qc;
    let vals = (0..n).map(|i| d[(i, i)]).collect();
    Ok((vals, q))
}

/// Eigendecomposition `x = V diag(lambda) V^dag` of a unitary with unitary `V`.
///
/// The Hermitian parts `(x + x^dag)/2` and `(x - x^dag)/2i` commute; a real
/// combination of them is diagonalized for a few fixed mixing values and the
/// basis with the smallest off-diagonal residual is kept.
pub fn eig_unitary(x: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = x.nrows();
    if n != x.ncols() {
        return Err(Error::invalid("eig_unitary: matrix is not square"));
    }
    let uerr = unitarity_error(x);
    if uerr > 1e-8 {
        return Err(Error::invalid(format!("eig_unitary: matrix is not unitary (error {uerr:.2e})")));
    }
    let h = (x + x.adjoint()) * C64::new(0.5, 0.0);
    let k = (x - x.adjoint()) * C64::new(0.0, -0.5);
    const MIX: [f64; 5] = [0.618_033_988_749_894_9, -1.414_213_562_373_095, 2.718_281_828_459_045, 0.123_456_789, -7.389_056_1];
    let mut best: Option<(f64, CMatrix)> = None;
    for &mu in MIX.iter() {
        let comb = &h + &k * C64::new(mu, 0.0);
        let comb = (&comb + comb.adjoint()) * C64::new(0.5, 0.0);
        let v = SymmetricEigen::new(comb).eigenvectors;
        let d = v.adjoint() * x * &v;
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(d[(i, j)].norm());
                }
            }
        }
        if best.as_ref().is_none_or(|(e, _)| off < *e) {
            best = Some((off, v));
        }
        if off < 1e-13 {
            break;
        }
    }
    let (off, v) = best.expect("at least one mixing coefficient");
    if off > 1e-8 {
        return Err(Error::Internal(format!("eig_unitary: failed to diagonalize (residual {off:.2e})")));
    }
    let d = v.adjoint() * x * &v;
    let vals = (0..n).map(|i| d[(i, i)] / d[(i, i)].norm()).collect();
    Ok((vals, v))
}

fn offdiag_residual(m: &CMatrix, q: &DMatrix<f64>) -> f64 {
    let qc = q.map(|x| C64::new(x, 0.0));
    let d = qc.transpose() * m * &qc;
    let mut off = 0.0f64;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            if i != j {
                off = off.max(d[(i, j)].norm());
            }
        }
    }
    off
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[C64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn hadamard() -> CMatrix {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        CMatrix::from_row_slice(2, 2, &[s, s, s, -s])
    }

    #[test]
    fn haar_dim_one_is_unit_modulus() {
        let mut rng = RngHandle::new(1);
        let u = haar_unitary(1, &mut rng).unwrap();
        assert_eq!(u.dim(), 1);
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_rejects_zero_dim() {
        let mut rng = RngHandle::new(1);
        assert!(matches!(haar_unitary(0, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn haar_outputs_are_unitary_and_reproducible() {
        for dim in [2, 4, 8, 16] {
            let a = haar_unitary(dim, &mut RngHandle::new(9)).unwrap();
            let b = haar_unitary(dim, &mut RngHandle::new(9)).unwrap();
            assert!(a.unitarity_error() < UNITARITY_TOL);
            for (x, y) in a.matrix().iter().zip(b.matrix().iter()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn haar_second_moment_of_trace() {
        // E|Tr U|^2 = 1 for Haar U on U(d).
        let mut rng = RngHandle::new(2024);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| haar_unitary(2, &mut rng).unwrap().matrix().trace().norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |Tr U|^2 = {mean}");
    }

    #[test]
    fn fidelity_reference_values() {
        let id = UnitaryMatrix::identity(2);
        let x = UnitaryMatrix::new(pauli_x()).unwrap();
        let t = UnitaryMatrix::new(diag(&[ONE, C64::from_polar(1.0, PI / 4.0)])).unwrap();
        assert!((process_fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(process_fidelity(&id, &x).unwrap().abs() < 1e-15);
        let expected = (2.0 + 2f64.sqrt()) / 4.0;
        assert!((process_fidelity(&id, &t).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn fidelity_rejects_dimension_mismatch() {
        let a = UnitaryMatrix::identity(2);
        let b = UnitaryMatrix::identity(4);
        assert!(process_fidelity(&a, &b).is_err());
        assert!(operator_distance(&a, &b).is_err());
    }

    #[test]
    fn distance_reference_values() {
        let id = UnitaryMatrix::identity(2);
        let z = UnitaryMatrix::new(diag(&[ONE, -ONE])).unwrap();
        assert!(operator_distance(&id, &id).unwrap() < 1e-15);
        // Brute-force the phase minimization of ||I - e^{i phi} Z||.
        let brute = (0..100_000)
            .map(|k| {
                let ph = C64::from_polar(1.0, 2.0 * PI * k as f64 / 100_000.0);
                spectral_norm(&(id.matrix() - z.matrix().map(|v| v * ph)))
            })
            .fold(f64::INFINITY, f64::min);
        let d = operator_distance(&id, &z).unwrap();
        assert!((d - brute).abs() < 1e-9);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        for theta in [0.1, 1.0, 2.5, -3.0] {
            let p = id.scaled(C64::from_polar(1.0, theta));
            assert!(operator_distance(&id, &p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn kron_reference_values() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4, 4));
        // X on the most significant qubit maps |00> to |10>.
        let xi = kron(&pauli_x(), &i2);
        assert_eq!(xi[(2, 0)], ONE);
        assert_eq!(xi.column(0).iter().filter(|z| z.norm() > 0.0).count(), 1);
        let hh = kron(&hadamard(), &hadamard());
        let sq = &hh * &hh;
        assert!((sq - CMatrix::identity(4, 4)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = RngHandle::new(5);
        let a = haar_unitary(2, &mut rng).unwrap().into_matrix();
        let b = haar_unitary(2, &mut rng).unwrap().into_matrix();
        let c = haar_unitary(2, &mut rng).unwrap().into_matrix();
        let d = haar_unitary(2, &mut rng).unwrap().into_matrix();
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn eig_unitary_round_trip_with_degeneracy() {
        let mut rng = RngHandle::new(23);
        for k in 0..200 {
            let q = haar_unitary(8, &mut rng).unwrap().into_matrix();
            let phases: Vec<C64> = (0..8)
                .map(|i| C64::from_polar(1.0, if k % 2 == 0 { (i % 3) as f64 } else { rng.uniform_in(-3.0, 3.0) }))
                .collect();
            let x = &q * diag(&phases) * q.adjoint();
            let (vals, v) = eig_unitary(&x).unwrap();
            let rec = &v * diag(&vals) * v.adjoint();
            assert!((rec - &x).camax() < 1e-10);
            assert!(unitarity_error(&v) < 1e-10);
        }
    }

    #[test]
    fn svd_reconstructs_rank_deficient_inputs() {
        let mut rng = RngHandle::new(17);
        for rank in 0..=4 {
            for _ in 0..300 {
                let a = CMatrix::from_fn(4, rank, |_, _| C64::new(rng.normal(), rng.normal()));
                let b = CMatrix::from_fn(rank, 4, |_, _| C64::new(rng.normal(), rng.normal()));
                let m = &a * &b;
                let (u, s, v) = svd(&m);
                let sd = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    4,
                    s.iter().map(|&x| C64::new(x, 0.0)),
                ));
                let err = (&u * sd * v.adjoint() - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(err < 1e-12 * (1.0 + m.norm()), "rank {rank}: {err}");
                assert!(unitarity_error(&u) < 1e-12 && unitarity_error(&v) < 1e-12);
                assert!(s.windows(2).all(|w| w[0] >= w[1]));
                assert_eq!(s.iter().filter(|&&x| x > 1e-9).count(), rank);
            }
        }
    }

    #[test]
    fn eig_symmetric_trivial_cases() {
        let (vals, q) = eig_unitary_symmetric(&CMatrix::identity(4, 4)).unwrap();
        assert!(vals.iter().all(|v| (v - ONE).norm() < 1e-12));
        assert!((q.transpose() * &q - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);

        let d = diag(&[ONE, -ONE, I, -I]);
        let (vals, q) = eig_unitary_symmetric(&d).unwrap();
        // Already diagonal: Q is a signed permutation and the spectrum is as given.
        for want in [ONE, -ONE, I, -I] {
            assert!(vals.iter().any(|v| (v - want).norm() < 1e-12));
        }
        assert!(q.iter().all(|x| x.abs() < 1e-12 || (x.abs() - 1.0).abs() < 1e-12));
    }

    fn random_orthogonal(rng: &mut RngHandle) -> DMatrix<f64> {
        let g = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.normal());
        g.qr().q()
    }

    #[test]
    fn eig_symmetric_round_trip_including_degenerate() {
        let mut rng = RngHandle::new(77);
        for trial in 0..1000 {
            let q0 = random_orthogonal(&mut rng).map(|x| C64::new(x, 0.0));
            let mut phases: Vec<f64> = (0..4).map(|_| rng.uniform_in(-PI, PI)).collect();
            match trial % 4 {
                1 => phases[1] = phases[0],
                2 => {
                    phases[1] = phases[0];
                    phases[3] = phases[2];
                }
                3 => phases = vec![phases[0]; 4],
                _ => {}
            }
            let d = diag(&phases.iter().map(|&p| C64::from_polar(1.0, p)).collect::<Vec<_>>());
            let m = &q0 * d * q0.transpose();
            let (vals, q) = eig_unitary_symmetric(&m).unwrap();
            let qc = q.map(|x| C64::new(x, 0.0));
            let rebuilt = &qc * diag(&vals) * qc.transpose();
            let err = (rebuilt - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-8, "trial {trial}: reconstruction error {err}");
            assert!((q.determinant() - 1.0).abs() < 1e-10);
            assert!(vals.iter().all(|v| (v.norm() - 1.0).abs() < 1e-8));
        }
    }

    #[test]
    fn eig_symmetric_rejects_bad_input() {
        let mut rng = RngHandle::new(3);
        let u = haar_unitary(4, &mut rng).unwrap().into_matrix();
        assert!(eig_unitary_symmetric(&u).is_err());
        let s = CMatrix::from_element(4, 4, ONE);
        assert!(eig_unitary_symmetric(&s).is_err());
    }
}
