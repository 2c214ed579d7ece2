//! Two-qubit canonical (KAK) decomposition in the magic basis, and
//! re-synthesis of two-qubit unitaries over a chosen entangler.

use std::f64::consts::PI;

use cobyla::{minimize, Func, RhoBeg, StopTols};
use nalgebra::{DMatrix, Matrix4};

use crate::error::{Error, Result};
use crate::gatelib::{
    canonical_phases, cx, hadamard, magic_basis, nl2, p1, p1_gate, p1_params, rx, ry, rz, Circuit, Gate,
};
use crate::matcore::{
    eig_unitary_symmetric, kron, process_fidelity_raw, svd, trace_inner, CMatrix, RngHandle, UnitaryMatrix, C64, I,
    ONE,
};

/// `source = phase * (k3 (x) k4) * NL2(t) * (k1 (x) k2)` with each `k` in SU(2)
/// and `t` in the Weyl chamber.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub k1: UnitaryMatrix,
    pub k2: UnitaryMatrix,
    pub k3: UnitaryMatrix,
    pub k4: UnitaryMatrix,
    pub t: [f64; 3],
    pub phase: C64,
}

impl CanonicalForm {
    pub fn reconstruct(&self) -> UnitaryMatrix {
        let after = kron(self.k3.matrix(), self.k4.matrix());
        let before = kron(self.k1.matrix(), self.k2.matrix());
        let m = after * nl2(self.t[0], self.t[1], self.t[2]) * before * self.phase;
        UnitaryMatrix::from_raw(m)
    }
}

/// Whether `t` lies in the chamber `tx >= ty >= tz >= 0`, `tx + ty <= 1`,
/// with the mirrored half `tx > 1/2` requiring `tz > 0`.
pub fn in_weyl_chamber(t: [f64; 3], tol: f64) -> bool {
    let [x, y, z] = t;
    x + tol >= y && y + tol >= z && z >= -tol && x + y <= 1.0 + tol && (x <= 0.5 + tol || z > -tol)
}

/// Maps any canonical coordinate triple onto its chamber representative.
pub fn canonicalize_coords(t: [f64; 3]) -> [f64; 3] {
    let reduce = |v: f64| {
        let mut r = v - v.round();
        if r <= -0.5 {
            r += 1.0;
        }
        r
    };
    let mut v = t.map(reduce);
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let sign = v.iter().fold(1.0, |s, x| if *x < 0.0 { -s } else { s });
    let (a, b, mut c) = (v[0].abs(), v[1].abs(), sign * v[2].abs());
    if c.abs() < 1e-11 {
        c = c.abs();
    }
    if c < 0.0 {
        [1.0 - a, b, -c]
    } else {
        [a, b, c]
    }
}

fn det_root4(u: &CMatrix) -> C64 {
    u.determinant().powf(0.25)
}

fn magic_symmetric(u: &CMatrix) -> (CMatrix, CMatrix) {
    let m = magic_basis();
    let us = u / det_root4(u);
    let up = m.adjoint() * us * &m;
    let sym = up.transpose() * &up;
    (up, sym)
}

/// Canonical coordinates of a two-qubit unitary, without the local factors.
pub fn weyl_coordinates(u: &UnitaryMatrix) -> Result<[f64; 3]> {
    Ok(kak_canonicalize(u)?.t)
}

/// Makhlin local invariants `(G1, G2)`; equal for locally equivalent gates.
pub fn makhlin_invariants(u: &CMatrix) -> (C64, f64) {
    let (_, m) = magic_symmetric(u);
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    ((tr * tr) / 16.0, ((tr * tr - tr2) / 4.0).re)
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| p.contains(&i)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn parity(p: &[usize; 4]) -> f64 {
    let mut s = 1.0;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// Nearest `phase * (a (x) b)` to a 4x4 matrix via the rank-1 SVD of its
/// rearrangement. `a`, `b` are returned in SU(2).
fn kron_factor(l: &CMatrix) -> Result<(CMatrix, CMatrix, C64)> {
    let mut r = CMatrix::zeros(4, 4);
    for i1 in 0..2 {
        for j1 in 0..2 {
            for i2 in 0..2 {
                for j2 in 0..2 {
                    r[(i1 * 2 + j1, i2 * 2 + j2)] = l[(i1 * 2 + i2, j1 * 2 + j2)];
                }
            }
        }
    }
    let (u, sv, v) = svd(&r);
    let s = sv[0].sqrt();
    let mut a = CMatrix::from_fn(2, 2, |i, j| u[(i * 2 + j, 0)] * s);
    let mut b = CMatrix::from_fn(2, 2, |i, j| v[(i * 2 + j, 0)].conj() * s);
    a /= a.determinant().sqrt();
    b /= b.determinant().sqrt();
    let ab = kron(&a, &b);
    let phase = trace_inner(&ab, l) / 4.0;
    let resid = (l - &ab * phase).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if resid > 1e-6 {
        return Err(Error::Internal(format!(
            "Kronecker factorization residual {resid:.2e} exceeds 1e-6"
        )));
    }
    Ok((a, b, phase / phase.norm()))
}

/// Canonical decomposition of a two-qubit unitary.
pub fn kak_canonicalize(u: &UnitaryMatrix) -> Result<CanonicalForm> {
    if u.dim() != 4 {
        return Err(Error::invalid(format!(
            "kak_canonicalize needs a 4x4 unitary, got {}x{}",
            u.dim(),
            u.dim()
        )));
    }
    let um = u.matrix();
    let g = det_root4(um);
    let (up, sym) = magic_symmetric(um);
    let (vals, p) = eig_unitary_symmetric(&sym)?;
    let mut d: Vec<C64> = vals.iter().map(|v| v.sqrt()).collect();
    let prod: C64 = d.iter().product();
    if prod.re < 0.0 {
        d[0] = -d[0];
    }
    let pc = p.map(|x| C64::new(x, 0.0));
    let dinv = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, d.iter().map(|z| z.inv())));
    let kl = &up * &pc * dinv;
    let kl_real = kl.map(|z| z.re);
    let theta: Vec<f64> = d.iter().map(|z| z.arg()).collect();
    let raw = [
        (-theta[0] + theta[1] - theta[2] + theta[3]) / (2.0 * PI),
        (theta[0] - theta[1] - theta[2] + theta[3]) / (2.0 * PI),
        (-theta[0] - theta[1] + theta[2] + theta[3]) / (2.0 * PI),
    ];
    let t = canonicalize_coords(raw);
    let target: Vec<C64> = canonical_phases(t[0], t[1], t[2])
        .iter()
        .map(|&a| C64::from_polar(1.0, a))
        .collect();

    // Find the signed permutation, even sign pattern and quarter phase that
    // carry the raw eigenphases onto the chamber representative.
    let phases = [ONE, I, -ONE, -I];
    let mut best: Option<(f64, [usize; 4], [f64; 4], C64)> = None;
    for perm in permutations4() {
        for mask in 0u8..16 {
            if mask.count_ones() % 2 == 1 {
                continue;
            }
            let sigma: [f64; 4] = std::array::from_fn(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
            for &ph in &phases {
                let err = (0..4)
                    .map(|i| (ph * sigma[i] * d[perm[i]] - target[i]).norm())
                    .fold(0.0, f64::max);
                if best.as_ref().is_none_or(|b| err < b.0) {
                    best = Some((err, perm, sigma, ph));
                }
            }
        }
    }
    let (err, perm, sigma, ph) = best.unwrap();
    if err > 1e-6 {
        return Err(Error::Internal(format!(
            "canonical eigenphase alignment failed (residual {err:.2e})"
        )));
    }
    // Pi D Pi^T has entry i equal to d[perm[i]], so Pi[i][perm[i]] = 1.
    let mut pi = Matrix4::<f64>::zeros();
    for i in 0..4 {
        pi[(i, perm[i])] = 1.0;
    }
    let mut s = Matrix4::<f64>::identity();
    s[(0, 0)] = parity(&perm);
    let sig = Matrix4::from_diagonal(&nalgebra::Vector4::from(sigma));
    let kl4 = Matrix4::from_fn(|i, j| kl_real[(i, j)]);
    let p4 = Matrix4::from_fn(|i, j| p[(i, j)]);
    let kl_new = kl4 * pi.transpose() * s;
    let kr_new = s * sig * pi * p4.transpose();
    let to_c = |m: Matrix4<f64>| DMatrix::from_fn(4, 4, |i, j| C64::new(m[(i, j)], 0.0));
    let mm = magic_basis();
    let left = &mm * to_c(kl_new) * mm.adjoint();
    let right = &mm * to_c(kr_new) * mm.adjoint();
    let (k3, k4, pl) = kron_factor(&left)?;
    let (k1, k2, pr) = kron_factor(&right)?;
    let form = CanonicalForm {
        k1: UnitaryMatrix::from_raw(k1),
        k2: UnitaryMatrix::from_raw(k2),
        k3: UnitaryMatrix::from_raw(k3),
        k4: UnitaryMatrix::from_raw(k4),
        t,
        phase: g * ph.conj() * pl * pr,
    };
    let rec = form.reconstruct();
    let resid = (rec.matrix() - um).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if resid > 1e-6 {
        return Err(Error::Internal(format!("KAK reconstruction residual {resid:.2e}")));
    }
    Ok(form)
}

/// `phase * L_k E L_{k-1} ... E L_0` with `L_i = a_i (x) b_i`.
#[derive(Clone, Debug)]
pub(crate) struct Layers {
    pub locals: Vec<(CMatrix, CMatrix)>,
    pub phase: C64,
}

impl Layers {
    fn matrix(&self, e: &CMatrix) -> CMatrix {
        let mut m = kron(&self.locals[0].0, &self.locals[0].1);
        for (a, b) in &self.locals[1..] {
            m = kron(a, b) * e * m;
        }
        m * self.phase
    }

    /// Rewrites the outer layers so the product matches `target`'s local
    /// factors, leaving the canonical class of the middle untouched.
    fn align_to(&mut self, e: &CMatrix, target: &CanonicalForm) -> Result<()> {
        let own = kak_canonicalize(&UnitaryMatrix::from_raw(self.matrix(e)))?;
        let k = self.locals.len() - 1;
        let (a0, b0) = &self.locals[0];
        self.locals[0] = (
            a0 * own.k1.matrix().adjoint() * target.k1.matrix(),
            b0 * own.k2.matrix().adjoint() * target.k2.matrix(),
        );
        let (ak, bk) = &self.locals[k];
        self.locals[k] = (
            target.k3.matrix() * own.k3.matrix().adjoint() * ak,
            target.k4.matrix() * own.k4.matrix().adjoint() * bk,
        );
        self.phase *= target.phase / own.phase;
        Ok(())
    }

    fn into_circuit(self, entangler: &Gate) -> Circuit {
        let mut c = Circuit::new(2, "kak");
        let mut phase = self.phase;
        let k = self.locals.len() - 1;
        for (i, (a, b)) in self.locals.iter().enumerate() {
            for (q, g) in [a, b].into_iter().enumerate() {
                let (params, alpha) = p1_params(g);
                phase *= C64::from_polar(1.0, alpha);
                let trivial = params[0].abs() < 1e-12 && {
                    let s = (params[1] + params[2]).rem_euclid(2.0 * PI);
                    s < 1e-12 || 2.0 * PI - s < 1e-12
                };
                if trivial {
                    phase *= p1(params[0], params[1], params[2])[(0, 0)];
                    continue;
                }
                c.apply(&p1_gate(params), &[q]).expect("qubit in range");
            }
            if i < k {
                c.apply(entangler, &[0, 1]).expect("qubit in range");
            }
        }
        c.mul_phase(phase);
        c
    }
}

enum Factor {
    Local(CMatrix, CMatrix),
    Ent,
    Phase(C64),
}

/// Collapses an application-ordered factor list into alternating layers.
fn collapse(factors: Vec<Factor>) -> Layers {
    let id = || CMatrix::identity(2, 2);
    let mut locals = vec![(id(), id())];
    let mut phase = ONE;
    for f in factors {
        match f {
            Factor::Local(a, b) => {
                let last = locals.last_mut().unwrap();
                last.0 = a * &last.0;
                last.1 = b * &last.1;
            }
            Factor::Ent => locals.push((id(), id())),
            Factor::Phase(p) => phase *= p,
        }
    }
    Layers { locals, phase }
}

/// `CX01 = phase * (a (x) b) E (c (x) d)` for an entangler in the CNOT class.
struct CxViaEntangler {
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
    d: CMatrix,
    phase: C64,
}

impl CxViaEntangler {
    fn new(e: &CanonicalForm) -> Result<Self> {
        let cxf = kak_canonicalize(&UnitaryMatrix::from_raw(cx()))?;
        Ok(Self {
            a: cxf.k3.matrix() * e.k3.matrix().adjoint(),
            b: cxf.k4.matrix() * e.k4.matrix().adjoint(),
            c: e.k1.matrix().adjoint() * cxf.k1.matrix(),
            d: e.k2.matrix().adjoint() * cxf.k2.matrix(),
            phase: cxf.phase / e.phase,
        })
    }

    fn push_cx01(&self, out: &mut Vec<Factor>) {
        out.push(Factor::Local(self.c.clone(), self.d.clone()));
        out.push(Factor::Ent);
        out.push(Factor::Local(self.a.clone(), self.b.clone()));
        out.push(Factor::Phase(self.phase));
    }

    fn push_cx10(&self, out: &mut Vec<Factor>) {
        out.push(Factor::Local(hadamard(), hadamard()));
        self.push_cx01(out);
        out.push(Factor::Local(hadamard(), hadamard()));
    }
}

fn cx_template(cxe: &CxViaEntangler, k: usize, t: [f64; 3]) -> Option<Layers> {
    let id = CMatrix::identity(2, 2);
    let mut f = Vec::new();
    match k {
        2 => {
            cxe.push_cx01(&mut f);
            f.push(Factor::Local(rx(PI * t[0]), rz(PI * t[1])));
            cxe.push_cx01(&mut f);
        }
        3 => {
            let (alpha, beta, gamma) = (-PI * t[0] / 2.0, -PI * t[1] / 2.0, -PI * t[2] / 2.0);
            cxe.push_cx10(&mut f);
            f.push(Factor::Local(id, ry(PI / 2.0 - 2.0 * beta)));
            cxe.push_cx01(&mut f);
            f.push(Factor::Local(rz(PI / 2.0 - 2.0 * gamma), ry(2.0 * alpha - PI / 2.0)));
            cxe.push_cx10(&mut f);
        }
        _ => return None,
    }
    Some(collapse(f))
}

fn layers_from_params(x: &[f64], k: usize) -> Layers {
    let id = CMatrix::identity(2, 2);
    let mut locals = vec![(id.clone(), id.clone())];
    for j in 0..k - 1 {
        let p = &x[6 * j..6 * j + 6];
        locals.push((p1(p[0], p[1], p[2]), p1(p[3], p[4], p[5])));
    }
    locals.push((id.clone(), id));
    Layers { locals, phase: ONE }
}

fn invariant_distance(a: (C64, f64), b: (C64, f64)) -> f64 {
    (a.0 - b.0).norm_sqr() + (a.1 - b.1).powi(2)
}

/// Fits the inner local layers so the middle has the target's invariants.
fn fit_middle(e: &CMatrix, k: usize, target: (C64, f64), seed: u64) -> Layers {
    let n = 6 * (k - 1);
    let bounds: Vec<(f64, f64)> = (0..n).map(|_| (-2.0 * PI, 2.0 * PI)).collect();
    let mut rng = RngHandle::new(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..6 {
        let x0: Vec<f64> = (0..n).map(|_| rng.uniform_in(-PI, PI)).collect();
        let f = |x: &[f64], _: &mut ()| invariant_distance(makhlin_invariants(&layers_from_params(x, k).matrix(e)), target);
        let cons: Vec<&dyn Func<()>> = Vec::new();
        let stop = StopTols {
            ftol_abs: 1e-20,
            xtol_abs: vec![1e-12; n],
            ..StopTols::default()
        };
        let (x, fx) = match minimize(f, &x0, &bounds, &cons, (), 3000, RhoBeg::All(0.5), Some(stop)) {
            Ok((_, x, fx)) | Err((_, x, fx)) => (x, fx),
        };
        if best.as_ref().is_none_or(|b| fx < b.0) {
            best = Some((fx, x));
        }
        if best.as_ref().is_some_and(|b| b.0 < 1e-22) {
            break;
        }
    }
    layers_from_params(&best.unwrap().1, k)
}

/// A re-synthesized two-qubit circuit and its process fidelity to the target.
#[derive(Clone, Debug)]
pub struct KakSynthesis {
    pub circuit: Circuit,
    pub fidelity: f64,
    pub applications: usize,
}

/// Synthesizes `u` as `L_0 E L_1 ... E L_k` over P1 locals and the entangler,
/// returning the smallest `k <= max_apps` that reaches fidelity `1 - 1e-9`,
/// or the best circuit found.
pub fn kak_resynthesize(u: &UnitaryMatrix, entangler: &Gate, max_apps: usize) -> Result<KakSynthesis> {
    kak_resynthesize_until(u, entangler, max_apps, |f, _| f >= 1.0 - 1e-9)
}

/// As [`kak_resynthesize`], stopping at the first `k` whose (fidelity,
/// circuit unitary) satisfies `accept`.
pub(crate) fn kak_resynthesize_until(
    u: &UnitaryMatrix,
    entangler: &Gate,
    max_apps: usize,
    accept: impl Fn(f64, &CMatrix) -> bool,
) -> Result<KakSynthesis> {
    if u.dim() != 4 || entangler.matrix.dim() != 4 {
        return Err(Error::invalid("kak_resynthesize needs 4x4 target and entangler"));
    }
    let target = kak_canonicalize(u)?;
    let e = entangler.matrix.matrix();
    let ef = kak_canonicalize(&entangler.matrix)?;
    let cx_class = (0..3).all(|i| (ef.t[i] - [0.5, 0.0, 0.0][i]).abs() < 1e-9);
    let cxe = if cx_class { Some(CxViaEntangler::new(&ef)?) } else { None };
    let inv = makhlin_invariants(u.matrix());
    let mut best: Option<KakSynthesis> = None;
    for k in 0..=max_apps {
        let mut layers = match (k, &cxe) {
            (0, _) => Layers {
                locals: vec![(CMatrix::identity(2, 2), CMatrix::identity(2, 2))],
                phase: ONE,
            },
            (1, _) => collapse(vec![Factor::Ent]),
            (2 | 3, Some(cxe)) => cx_template(cxe, k, target.t).unwrap(),
            _ => fit_middle(e, k, inv, 0x4b41_4b00 + k as u64),
        };
        if k == 0 {
            // The best local approximation keeps the target's local factors.
            layers.locals[0] = (
                target.k3.matrix() * target.k1.matrix(),
                target.k4.matrix() * target.k2.matrix(),
            );
            layers.phase = target.phase;
        } else {
            layers.align_to(e, &target)?;
        }
        let circuit = layers.into_circuit(entangler);
        let cu = circuit.unitary();
        let fidelity = process_fidelity_raw(u.matrix(), cu.matrix());
        let done = accept(fidelity, cu.matrix());
        if best.as_ref().is_none_or(|b| fidelity > b.fidelity) {
            best = Some(KakSynthesis {
                circuit,
                fidelity,
                applications: k,
            });
        }
        if done {
            break;
        }
    }
    Ok(best.unwrap())
}
