//! Closest-point search on the Gaussian-integer lattice generated by a
//! precoding matrix.
//!
//! The complex `K`-dimensional problem `min_q ‖G(a + q)‖²`, `q ∈ Z[j]^K`, is
//! solved as a `2K`-dimensional real problem with interleaved (Re, Im)
//! coordinates. The generator is triangularised once with a complex QR, its
//! real embedding is LLL-reduced, and a Schnorr–Euchner depth-first
//! enumeration with a shrinking radius finds the exact minimiser in the
//! reduced basis. The first radius is the cost of the Babai (successive
//! rounding) point.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{householder_qr, norm_sqr, pseudoinverse, CMatrix, C64};

/// A Gaussian integer.
pub type GaussInt = Complex<i64>;

/// Triangular diagonal magnitudes below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Relative slack for treating two lattice costs as equal.
const TIE_TOL: f64 = 1e-10;

/// Maps a real onto `[-0.5, 0.5)` by subtracting the nearest integer
/// (halves round up).
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - (x + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// A data vector whose components all have real and imaginary parts in
/// `[-0.5, 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubePoint(Vec<C64>);

impl CubePoint {
    pub fn new(a: Vec<C64>) -> Result<Self> {
        let inside = |x: f64| (-0.5..0.5).contains(&x);
        if let Some(i) = a.iter().position(|z| !inside(z.re) || !inside(z.im)) {
            return Err(Error::Domain(format!("component {i} ({}) lies outside the cube", a[i])));
        }
        Ok(Self(a))
    }

    /// Uniform draw from the cube.
    pub fn uniform<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        Self(
            (0..k)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        )
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); k])
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }
}

/// Componentwise modulo reduction of real and imaginary parts into the cube.
pub fn modulo_cube(x: &[C64]) -> CubePoint {
    CubePoint(x.iter().map(|z| C64::new(wrap_unit(z.re), wrap_unit(z.im))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub p: Vec<GaussInt>,
    /// `‖G(a + p)‖²`, evaluated directly from the generator.
    pub cost: f64,
    pub nodes_visited: u64,
}

/// `‖G(a + p)‖²` evaluated with complex arithmetic.
pub fn lattice_cost(g: &CMatrix, a: &[C64], p: &[GaussInt]) -> f64 {
    let z: Vec<C64> = a.iter().zip(p).map(|(a, p)| a + C64::new(p.re as f64, p.im as f64)).collect();
    norm_sqr(&g.mul_vec(&z))
}

/// Lovász constant for the basis reduction.
const LLL_DELTA: f64 = 0.99;

/// A generator prepared for repeated closest-point searches.
///
/// The real embedding of the generator is LLL-reduced first, so the
/// enumeration runs on a nearly orthogonal basis. The reduction is a
/// unimodular change of coordinates: the lattice, and therefore the minimum,
/// is unchanged, but ill-conditioned generators (rate-allocated precoders in
/// particular) no longer blow up the search tree.
#[derive(Debug, Clone)]
pub struct SphereEncoder {
    generator: CMatrix,
    /// Real upper-triangular `n×n` factor of the reduced basis, row-major, `n = 2K`.
    r: Vec<f64>,
    /// Unimodular `U` (reduced = original·U) and its inverse, row-major.
    u: Vec<i64>,
    u_inv: Vec<i64>,
    n: usize,
}

/// Gram–Schmidt coefficients `μ[j][i]` (row-major, `j > i`) and squared
/// lengths of the orthogonalised columns.
fn gram_schmidt(cols: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = cols.len();
    let mut mu = vec![0.0; n * n];
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut len_sq = vec![0.0; n];
    for j in 0..n {
        let mut v = cols[j].clone();
        for i in 0..j {
            let m = dot(&cols[j], &star[i]) / len_sq[i];
            mu[j * n + i] = m;
            for (x, s) in v.iter_mut().zip(&star[i]) {
                *x -= m * s;
            }
        }
        mu[j * n + j] = 1.0;
        len_sq[j] = dot(&v, &v);
        star.push(v);
    }
    (mu, len_sq)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LLL-reduces `cols` in place. Returns `U` and `U⁻¹` (row-major) with
/// `reduced = original·U`.
fn lll_reduce(cols: &mut [Vec<f64>]) -> (Vec<i64>, Vec<i64>) {
    let n = cols.len();
    let mut u = vec![0i64; n * n];
    let mut u_inv = vec![0i64; n * n];
    for i in 0..n {
        u[i * n + i] = 1;
        u_inv[i * n + i] = 1;
    }
    let (mut mu, mut len_sq) = gram_schmidt(cols);
    let mut k = 1;
    while k < n {
        for j in (0..k).rev() {
            let r = mu[k * n + j].round();
            if r == 0.0 {
                continue;
            }
            let ri = r as i64;
            let (bj, bk) = (cols[j].clone(), &mut cols[k]);
            for (x, y) in bk.iter_mut().zip(&bj) {
                *x -= r * y;
            }
            for row in 0..n {
                u[row * n + k] -= ri * u[row * n + j];
            }
            for col in 0..n {
                u_inv[j * n + col] += ri * u_inv[k * n + col];
            }
            for i in 0..j {
                mu[k * n + i] -= r * mu[j * n + i];
            }
            mu[k * n + j] -= r;
        }
        let m = mu[k * n + k - 1];
        if len_sq[k] >= (LLL_DELTA - m * m) * len_sq[k - 1] {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            for row in 0..n {
                u.swap(row * n + k, row * n + k - 1);
            }
            for col in 0..n {
                u_inv.swap(k * n + col, (k - 1) * n + col);
            }
            (mu, len_sq) = gram_schmidt(cols);
            k = (k - 1).max(1);
        }
    }
    (u, u_inv)
}

impl SphereEncoder {
    /// Reduces and triangularises `generator` (`m×K`, `m ≥ K`, full column rank).
    pub fn new(generator: &CMatrix) -> Result<Self> {
        let k = generator.cols();
        if k == 0 {
            return Err(Error::Dimension("generator has no columns".into()));
        }
        if generator.rows() < k {
            return Err(Error::SingularGenerator { index: generator.rows(), magnitude: 0.0 });
        }
        let rc = householder_qr(generator).r;
        for i in 0..k {
            let magnitude = rc[(i, i)].re;
            if magnitude < SINGULAR_TOL {
                return Err(Error::SingularGenerator { index: i, magnitude });
            }
        }
        // Real embedding of the triangular factor, interleaved (Re, Im).
        let n = 2 * k;
        let mut cols = vec![vec![0.0; n]; n];
        for i in 0..k {
            for j in i..k {
                let z = rc[(i, j)];
                cols[2 * j][2 * i] = z.re;
                cols[2 * j][2 * i + 1] = z.im;
                cols[2 * j + 1][2 * i] = -z.im;
                cols[2 * j + 1][2 * i + 1] = z.re;
            }
        }
        let (u, u_inv) = lll_reduce(&mut cols);
        let (mu, len_sq) = gram_schmidt(&cols);
        let mut r = vec![0.0; n * n];
        for i in 0..n {
            let len = len_sq[i].sqrt();
            for j in i..n {
                r[i * n + j] = mu[j * n + i] * len;
            }
        }
        Ok(Self { generator: generator.clone(), r, u, u_inv, n })
    }

    /// Number of users (complex dimensions).
    pub fn k(&self) -> usize {
        self.n / 2
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    /// Exact minimiser of `‖G(a + q)‖²` over Gaussian-integer `q`. Ties are
    /// broken deterministically, towards the lexicographically smallest
    /// coordinates in the reduced basis.
    pub fn search(&self, a: &[C64]) -> PerturbationResult {
        assert_eq!(a.len(), self.k(), "data vector length does not match the generator");
        let n = self.n;
        let r = &self.r;
        let t_orig: Vec<f64> = a.iter().flat_map(|z| [z.re, z.im]).collect();
        // Coordinates of the data point in the reduced basis.
        let t: Vec<f64> =
            (0..n).map(|i| (0..n).map(|j| self.u_inv[i * n + j] as f64 * t_orig[j]).sum()).collect();

        let mut q = vec![0.0f64; n];
        let mut sums = vec![0.0f64; n];
        let mut centers = vec![0.0f64; n];
        let mut steps = vec![0.0f64; n];
        let mut dist = vec![0.0f64; n + 1];

        // Off-diagonal contribution of already fixed coordinates at level i.
        let partial = |i: usize, q: &[f64]| -> f64 {
            let row = &r[i * n..(i + 1) * n];
            (i + 1..n).map(|j| row[j] * (t[j] + q[j])).sum()
        };

        // Babai point.
        for i in (0..n).rev() {
            let s = partial(i, &q);
            let rii = r[i * n + i];
            q[i] = (-s / rii - t[i]).round();
            let y = rii * (t[i] + q[i]) + s;
            dist[i] = dist[i + 1] + y * y;
        }
        let mut best_q = q.clone();
        let mut best = dist[0];
        let mut nodes: u64 = n as u64;

        let enter = |i: usize, q: &mut [f64], sums: &mut [f64], centers: &mut [f64], steps: &mut [f64]| {
            let s = partial(i, q);
            let c = -s / r[i * n + i] - t[i];
            let qi = c.round();
            sums[i] = s;
            centers[i] = c;
            q[i] = qi;
            steps[i] = if c >= qi { 1.0 } else { -1.0 };
        };
        let zigzag = |i: usize, q: &mut [f64], steps: &mut [f64]| {
            q[i] += steps[i];
            steps[i] = -steps[i] - steps[i].signum();
        };

        let mut i = n - 1;
        enter(i, &mut q, &mut sums, &mut centers, &mut steps);
        loop {
            let y = r[i * n + i] * (t[i] + q[i]) + sums[i];
            let d = dist[i + 1] + y * y;
            nodes += 1;
            let slack = TIE_TOL * best.max(f64::MIN_POSITIVE);
            if d <= best + slack {
                if i == 0 {
                    if d < best - slack || (d <= best + slack && lex_less(&q, &best_q)) {
                        best = best.min(d);
                        best_q.copy_from_slice(&q);
                    }
                    zigzag(0, &mut q, &mut steps);
                } else {
                    dist[i] = d;
                    i -= 1;
                    enter(i, &mut q, &mut sums, &mut centers, &mut steps);
                }
            } else {
                if i == n - 1 {
                    break;
                }
                i += 1;
                zigzag(i, &mut q, &mut steps);
            }
        }

        let q: Vec<i64> =
            (0..n).map(|i| (0..n).map(|j| self.u[i * n + j] * best_q[j] as i64).sum()).collect();
        let p: Vec<GaussInt> = q.chunks(2).map(|c| GaussInt::new(c[0], c[1])).collect();
        let cost = lattice_cost(&self.generator, a, &p);
        PerturbationResult { p, cost, nodes_visited: nodes }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// One-shot closest-point search; see [`SphereEncoder::search`].
pub fn closest_point(f: &CMatrix, a: &CubePoint) -> Result<PerturbationResult> {
    Ok(SphereEncoder::new(f)?.search(a.as_slice()))
}

/// Exhaustive minimum of `‖F(a + q)‖²` over the box
/// `|Re q_k|, |Im q_k| ≤ box_radius`. Intended as a test oracle only.
///
/// Fails with `BoxTooSmall` unless the box provably holds the global minimum.
pub fn brute_force_closest(f: &CMatrix, a: &CubePoint, box_radius: i64) -> Result<PerturbationResult> {
    let k = a.len();
    if f.cols() != k {
        return Err(Error::Dimension(format!("generator has {} columns, data has {k}", f.cols())));
    }
    if k == 0 || k > 4 {
        return Err(Error::Domain(format!("brute force supports 1..=4 users, got {k}")));
    }
    if box_radius < 1 {
        return Err(Error::Domain("box radius must be at least 1".into()));
    }
    let left_inverse = pseudoinverse(&f.adjoint())?;
    let row_norms: Vec<f64> = (0..k).map(|i| norm_sqr(&left_inverse.column(i)).sqrt()).collect();
    let n = 2 * k;
    let mut digits = vec![-box_radius; n];
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut visited = 0u64;
    loop {
        let p: Vec<GaussInt> = digits.chunks(2).map(|c| GaussInt::new(c[0], c[1])).collect();
        let cost = lattice_cost(f, a.as_slice(), &p);
        visited += 1;
        // Enumeration is in increasing lexicographic order, so the first of
        // several equal-cost points is kept.
        let better = match &best {
            None => true,
            Some((b, _)) => cost < b - TIE_TOL * b,
        };
        if better {
            best = Some((cost, digits.clone()));
        }
        // Odometer increment, last coordinate fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                let (cost, q) = best.expect("box is nonempty");
                // Any point at most as costly has z = a + q = G⁺y with ‖y‖² ≤ cost,
                // so |q_i| ≤ √cost·‖row_i(G⁺)‖ + ½ per real component.
                let reach = cost.sqrt();
                if row_norms.iter().any(|r| (reach * r + 0.5).floor() as i64 > box_radius) {
                    return Err(Error::BoxTooSmall { radius: box_radius });
                }
                let p = q.chunks(2).map(|c| GaussInt::new(c[0], c[1])).collect();
                return Ok(PerturbationResult { p, cost, nodes_visited: visited });
            }
            pos -= 1;
            if digits[pos] < box_radius {
                digits[pos] += 1;
                break;
            }
            digits[pos] = -box_radius;
        }
    }
}
