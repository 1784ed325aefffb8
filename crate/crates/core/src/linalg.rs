//! Dense complex linear algebra: the substrate for states, POVM elements,
//! and moment matrices.
//!
//! Everything in scope is small (at most ~100x100), so matrices are stored
//! densely in row-major order and the eigensolver is a cyclic complex Jacobi
//! iteration, which is deterministic across runs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// Which tensor factor an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from rows of real entries.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(entries[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        })
    }

    /// Rank-1 projector |v><v| (v need not be normalized).
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn real_trace(&self) -> f64 {
        self.trace().re
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j).conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale_re(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Hilbert-Schmidt inner product tr(A^dag B).
    pub fn hs_inner(&self, other: &Self) -> Complex64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum deviation from M = M^dag.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self, tolerance: f64) -> bool {
        self.hermitian_defect() <= tolerance
    }

    /// Minimum eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = eig_hermitian(self)?;
        Ok(vals[0])
    }

    pub fn is_psd(&self, min_eig_tol: f64) -> bool {
        self.is_hermitian(tol::HERMITIAN.max(1e-8))
            && self.min_eigenvalue().map(|l| l >= min_eig_tol).unwrap_or(false)
    }
}

/// Serialized as nested rows of `[re, im]` pairs with explicit dimensions.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| [self.get(i, j).re, self.get(i, j).im]).collect())
            .collect();
        MatrixRepr { rows: self.rows, cols: self.cols, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        if repr.entries.len() != repr.rows || repr.entries.iter().any(|r| r.len() != repr.cols) {
            return Err(serde::de::Error::custom("matrix entry table does not match dimensions"));
        }
        Ok(ComplexMatrix::from_fn(repr.rows, repr.cols, |i, j| {
            Complex64::new(repr.entries[i][j][0], repr.entries[i][j][1])
        }))
    }
}

/// Kronecker product: `out[(i*rB+k), (j*cB+l)] = A[i,j] * B[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let av = a.get(i, j);
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    out.set(i * b.rows() + k, j * b.cols() + l, av * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Kronecker product of several factors, left to right.
pub fn kron_all(ms: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut it = ms.iter();
    let first = (*it.next().expect("kron_all of empty list")).clone();
    it.fold(first, |acc, m| kron(&acc, m))
}

fn check_bipartite_dims(m: &ComplexMatrix, dims: (usize, usize)) -> Result<()> {
    let (da, db) = dims;
    if !m.is_square() || m.rows() != da * db {
        return Err(Error::Dimension(format!(
            "expected {}x{} matrix for subsystem dims ({}, {}), got {}x{}",
            da * db,
            da * db,
            da,
            db,
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Partial trace over one subsystem of a bipartite operator.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    over: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite_dims(m, dims)?;
    let (da, db) = dims;
    match over {
        Subsystem::A => Ok(ComplexMatrix::from_fn(db, db, |k, l| {
            (0..da).map(|i| m.get(i * db + k, i * db + l)).sum()
        })),
        Subsystem::B => Ok(ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m.get(i * db + k, j * db + k)).sum()
        })),
    }
}

/// Partial transpose on one subsystem of a bipartite operator.
pub fn partial_transpose(
    m: &ComplexMatrix,
    dims: (usize, usize),
    on: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite_dims(m, dims)?;
    let (da, db) = dims;
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..da {
        for k in 0..db {
            for j in 0..da {
                for l in 0..db {
                    let v = m.get(i * db + k, j * db + l);
                    match on {
                        Subsystem::A => out.set(j * db + k, i * db + l, v),
                        Subsystem::B => out.set(i * db + l, j * db + k, v),
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues in ascending order and the matching
/// unitary of column eigenvectors, so that `M = V diag(vals) V^dag`.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let defect = m.hermitian_defect();
    if defect > 1e-8 {
        return Err(Error::NonHermitian(defect));
    }
    let n = m.rows();
    let mut a = m.clone();
    // Symmetrize exactly so roundoff in the input cannot bias the sweep.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (a.get(i, j) + a.get(j, i).conj()) * 0.5;
            a.set(i, j, avg);
            a.set(j, i, avg.conj());
        }
        let d = a.get(i, i).re;
        a.set(i, i, Complex64::new(d, 0.0));
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    let target = (1e-15 * scale).powi(2) * 0.5;

    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let u = apq / r;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Columns p,q of A and V: right-multiply by the rotation.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp.scale(c) - akq * u.conj().scale(s));
                    a.set(k, q, akp * u.scale(s) + akq.scale(c));
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp.scale(c) - vkq * u.conj().scale(s));
                    v.set(k, q, vkp * u.scale(s) + vkq.scale(c));
                }
                // Rows p,q of A: left-multiply by the adjoint rotation.
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk.scale(c) - aqk * u.scale(s));
                    a.set(q, k, apk * u.conj().scale(s) + aqk.scale(c));
                }
                // Clean the rotated pivot pair.
                let dpp = a.get(p, p).re;
                let dqq = a.get(q, q).re;
                a.set(p, p, Complex64::new(dpp, 0.0));
                a.set(q, q, Complex64::new(dqq, 0.0));
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("NaN eigenvalue"));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = ComplexMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((sorted_vals, sorted_vecs))
}

/// Inverse square root of a PSD matrix. With `pseudo` set, eigenvalues below
/// the relative range cutoff are treated as zero and the inversion is
/// restricted to the range.
pub fn inv_sqrt_psd(m: &ComplexMatrix, pseudo: bool) -> Result<ComplexMatrix> {
    let (vals, vecs) = eig_hermitian(m)?;
    let lmax = vals.iter().fold(0.0f64, |a, &b| a.max(b));
    if vals[0] < tol::PSD_MIN_EIG * lmax.max(1.0) {
        return Err(Error::NotPsd(vals[0]));
    }
    let cutoff = tol::RANGE_CUTOFF * lmax.max(f64::MIN_POSITIVE);
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        let w = if l <= cutoff {
            if pseudo {
                continue;
            }
            return Err(Error::InvalidArgument(
                "singular matrix; use the pseudo-inverse square root".into(),
            ));
        } else {
            1.0 / l.sqrt()
        };
        for i in 0..n {
            for j in 0..n {
                let v = out.get(i, j) + vecs.get(i, k) * vecs.get(j, k).conj().scale(w);
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

/// Projector onto the range of a PSD matrix (eigenvalues below the relative
/// cutoff count as zero).
pub fn range_projector(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = eig_hermitian(m)?;
    let lmax = vals.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = tol::RANGE_CUTOFF * lmax.max(f64::MIN_POSITIVE);
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l <= cutoff {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let v = out.get(i, j) + vecs.get(i, k) * vecs.get(j, k).conj();
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis of the range of a PSD matrix, as columns.
pub fn range_basis(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = eig_hermitian(m)?;
    let lmax = vals.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = tol::RANGE_CUTOFF * lmax.max(f64::MIN_POSITIVE);
    let cols: Vec<usize> =
        (0..vals.len()).filter(|&k| vals[k] > cutoff).collect();
    Ok(ComplexMatrix::from_fn(m.rows(), cols.len(), |i, j| vecs.get(i, cols[j])))
}
