//! Small dense complex linear algebra.
//!
//! Everything here is sized for multiuser precoding: matrices are at most a
//! few dozen rows and columns, so plain row-major storage and Householder
//! reflections are used throughout. All routines are pure functions of their
//! inputs.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Singular values (approximated by triangular diagonal magnitudes) below this
/// fraction of the largest row norm count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Above this many rows, determinants are accumulated in the log domain.
const LOG_DET_THRESHOLD: usize = 4;

/// Dense complex matrix stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / cols.max(1),
                pos % cols.max(1),
                data[pos]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has length {} but row 0 has length {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F / max(‖other‖_F, tiny)`.
    pub fn relative_distance(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let diff: f64 =
            self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        diff / other.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }

    /// Appends one row below the matrix.
    pub fn stack_row(&self, row: &[C64]) -> Result<Self> {
        if self.rows > 0 && row.len() != self.cols {
            return Err(Error::Dimension(format!(
                "row of length {} stacked on a matrix with {} columns",
                row.len(),
                self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(row);
        Self::new(self.rows + 1, row.len(), data)
    }

    /// Scales column `j` by `c[j]`, i.e. `self · diag(c)`.
    pub fn scale_cols(&self, c: &[f64]) -> Self {
        assert_eq!(c.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] *= c[j];
            }
        }
        out
    }

    /// `H·H†`.
    pub fn gram(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let z = inner(self.row(i), self.row(j));
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:>+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// `a·b†` for row vectors, i.e. `Σ a_i conj(b_i)`.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Thin QR factorisation `A = Q·R` of a tall matrix with `R` upper triangular
/// and a real nonnegative diagonal.
#[derive(Debug, Clone)]
pub(crate) struct Qr {
    pub q: CMatrix,
    pub r: CMatrix,
}

/// Householder QR of an `m×n` matrix, `m ≥ n`. Never fails; a rank-deficient
/// input shows up as zero (or tiny) diagonal entries of `R`.
pub(crate) fn householder_qr(a: &CMatrix) -> Qr {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "householder_qr needs rows >= cols");
    let mut w = a.clone();
    let mut reflectors: Vec<Option<Vec<C64>>> = Vec::with_capacity(n);

    for k in 0..n {
        let x: Vec<C64> = (k..m).map(|i| w[(i, k)]).collect();
        let norm = norm_sqr(&x).sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
        let mut v = x;
        v[0] += phase * norm;
        let vnorm2 = norm_sqr(&v);
        for j in k..n {
            let s: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * w[(k + i, j)]).sum();
            let f = s * (2.0 / vnorm2);
            for (i, vi) in v.iter().enumerate() {
                w[(k + i, j)] -= f * vi;
            }
        }
        reflectors.push(Some(v));
    }

    let mut r = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = w[(i, j)];
        }
    }

    let mut q = CMatrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = C64::new(1.0, 0.0);
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        let Some(v) = v else { continue };
        let vnorm2 = norm_sqr(v);
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * q[(k + i, j)]).sum();
            let f = s * (2.0 / vnorm2);
            for (i, vi) in v.iter().enumerate() {
                q[(k + i, j)] -= f * vi;
            }
        }
    }

    // Rotate phases so that diag(R) is real and nonnegative.
    for k in 0..n {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag == 0.0 {
            continue;
        }
        let phase = d / mag;
        for j in k..n {
            r[(k, j)] *= phase.conj();
        }
        r[(k, k)] = C64::new(mag, 0.0);
        for i in 0..m {
            q[(i, k)] *= phase;
        }
    }
    Qr { q, r }
}

/// `H = L·Q` with `L` lower triangular (real positive diagonal) and `Q` with
/// orthonormal rows, computed from the QR factorisation of `H†`.
#[derive(Debug, Clone)]
pub(crate) struct Lq {
    pub l: CMatrix,
    pub q: CMatrix,
}

pub(crate) fn lq_unchecked(h: &CMatrix) -> Lq {
    let Qr { q, r } = householder_qr(&h.adjoint());
    Lq { l: r.adjoint(), q: q.adjoint() }
}

fn numerical_rank(h: &CMatrix, l: &CMatrix) -> usize {
    let scale = (0..h.rows()).map(|i| norm_sqr(h.row(i)).sqrt()).fold(0.0, f64::max);
    (0..l.rows()).filter(|&k| l[(k, k)].re > RANK_TOL * scale).count()
}

fn lq_full_row_rank(h: &CMatrix) -> Result<Lq> {
    let k = h.rows();
    if k == 0 {
        return Err(Error::Dimension("matrix has no rows".into()));
    }
    if k > h.cols() {
        return Err(Error::RankDeficient { rank: h.cols(), required: k });
    }
    let f = lq_unchecked(h);
    let rank = numerical_rank(h, &f.l);
    if rank < k {
        return Err(Error::RankDeficient { rank, required: k });
    }
    Ok(f)
}

/// Inverse of a nonsingular lower-triangular matrix by forward substitution.
pub(crate) fn invert_lower(l: &CMatrix) -> CMatrix {
    let n = l.rows();
    let mut inv = CMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = C64::new(1.0, 0.0) / l[(j, j)];
        for i in j + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Moore–Penrose pseudoinverse of a full-row-rank matrix, `H⁺ = H†(HH†)⁻¹`.
///
/// Computed as `Q†·L⁻¹` from `H = L·Q`, so `H·H⁺ = I` holds to working
/// precision. For square nonsingular input this is the ordinary inverse.
pub fn pseudoinverse(m: &CMatrix) -> Result<CMatrix> {
    let Lq { l, q } = lq_full_row_rank(m)?;
    Ok(&q.adjoint() * &invert_lower(&l))
}

/// Natural log of `det(H·H†)`; `-inf` when the rows are linearly dependent.
pub fn log_gram_det(h: &CMatrix) -> f64 {
    if h.rows() == 0 {
        return 0.0;
    }
    if h.rows() > h.cols() {
        return f64::NEG_INFINITY;
    }
    let Lq { l, .. } = lq_unchecked(h);
    (0..l.rows()).map(|k| 2.0 * l[(k, k)].re.ln()).sum()
}

/// `det(H·H†)` as the product of squared triangular diagonal magnitudes.
/// Rank-deficient input yields 0.
pub fn gram_det(h: &CMatrix) -> f64 {
    if h.rows() > h.cols() {
        return 0.0;
    }
    if h.rows() > LOG_DET_THRESHOLD {
        return log_gram_det(h).exp();
    }
    let Lq { l, .. } = lq_unchecked(h);
    (0..l.rows()).map(|k| l[(k, k)].re * l[(k, k)].re).product()
}

/// `H = diag(d)·V·Q` with `V` unit lower triangular and `Q` row-orthonormal.
#[derive(Debug, Clone)]
pub struct DvqFactors {
    pub d: Vec<f64>,
    pub v: CMatrix,
    pub q: CMatrix,
}

impl DvqFactors {
    pub fn reconstruct(&self) -> CMatrix {
        let dv = CMatrix::from_diag(&self.d);
        &(&dv * &self.v) * &self.q
    }

    /// `V⁻¹`, again unit lower triangular.
    pub fn v_inverse(&self) -> CMatrix {
        invert_lower(&self.v)
    }

    pub fn k(&self) -> usize {
        self.d.len()
    }
}

/// Splits a full-row-rank channel into per-user gains, a unit lower-triangular
/// interference matrix and an orthonormal row basis.
pub fn dvq_decompose(h: &CMatrix) -> Result<DvqFactors> {
    let Lq { l, q } = lq_full_row_rank(h)?;
    let k = l.rows();
    let d: Vec<f64> = (0..k).map(|i| l[(i, i)].re).collect();
    let mut v = l;
    for i in 0..k {
        for j in 0..=i {
            v[(i, j)] /= d[i];
        }
        v[(i, i)] = C64::new(1.0, 0.0);
    }
    Ok(DvqFactors { d, v, q })
}

/// Component of `h_u` orthogonal to the span of an orthogonal set of rows:
/// `h_u·(I − Σ g_s†g_s/‖g_s‖²)`.
pub fn ortho_component(h_u: &[C64], basis: &[Vec<C64>]) -> Result<Vec<C64>> {
    let mut g = h_u.to_vec();
    for (index, gs) in basis.iter().enumerate() {
        if gs.len() != h_u.len() {
            return Err(Error::Dimension(format!(
                "basis vector {index} has length {} but h_u has length {}",
                gs.len(),
                h_u.len()
            )));
        }
        let norm = norm_sqr(gs);
        if norm.sqrt() < 1e-12 {
            return Err(Error::DegenerateBasis { index, norm: norm.sqrt() });
        }
        let c = inner(h_u, gs) / norm;
        for (gi, si) in g.iter_mut().zip(gs) {
            *gi -= c * si;
        }
    }
    Ok(g)
}
