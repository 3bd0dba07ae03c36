//! Dense complex linear algebra kernels.
//!
//! Everything downstream reduces to small dense complex matrices, so this
//! module deliberately owns the whole numeric stack: Kronecker products,
//! a cyclic Jacobi eigensolver for self-adjoint matrices, a Hessenberg QR
//! spectrum routine plus a Denman-Beavers iteration for square roots of
//! matrices that are merely similar to positive diagonals, LU solves, and
//! the closure of a finite matrix group. All routines are deterministic:
//! identical input bits give identical output bits, which is what makes
//! the reports byte-stable.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt;
use thiserror::Error;

/// Scalar field for all numeric work. Implemented for `f32` and `f64`;
/// concrete aliases at the crate root fix `f64` for the CLI.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn real(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type Cx<T> = Complex<T>;

#[inline]
pub fn cx<T: Scalar>(re: f64, im: f64) -> Cx<T> {
    Complex::new(T::real(re), T::real(im))
}

#[inline]
pub fn one<T: Scalar>() -> Cx<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn zero<T: Scalar>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix is not self-adjoint (deviation {deviation:e})")]
    NotSelfAdjoint { deviation: f64 },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("matrix spectrum is not strictly positive (offending eigenvalue {re:e}{im:+e}i)")]
    SpectrumNotPositive { re: f64, im: f64 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("iteration failed to converge")]
    NoConvergence,
    #[error("group closure exceeded the cap of {cap} elements")]
    GroupTooLarge { cap: usize },
    #[error("generator slot {slot} is not unitary (deviation {deviation:e})")]
    NotUnitary { slot: usize, deviation: f64 },
    #[error("dimension mismatch: {context}")]
    Shape { context: String },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
}

pub type NumResult<V> = Result<V, NumError>;

/// Absolute and relative tolerance pair threaded through every residual
/// comparison. `atol` also seeds the rank cutoffs via its square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T: Scalar> {
    pub atol: T,
    pub rtol: T,
}

impl<T: Scalar> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance {
            atol: T::real(1e-9),
            rtol: T::real(1e-9),
        }
    }
}

impl<T: Scalar> Tolerance<T> {
    pub fn new(atol: T, rtol: T) -> NumResult<Self> {
        if atol <= T::zero() || rtol <= T::zero() {
            return Err(NumError::Shape {
                context: "tolerances must be strictly positive".into(),
            });
        }
        Ok(Tolerance { atol, rtol })
    }

    pub fn uniform(t: T) -> NumResult<Self> {
        Self::new(t, t)
    }

    /// Rank and clustering cutoff.
    pub fn sqrt_atol(&self) -> T {
        self.atol.sqrt()
    }

    /// `residual` acceptable at the given scale.
    pub fn accepts(&self, residual: T, scale: T) -> bool {
        residual <= self.atol + self.rtol * scale
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix<T: Scalar> {
    rows: usize,
    cols: usize,
    entries: Vec<Cx<T>>,
}

impl<T: Scalar> fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self.at(i, j);
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            entries: vec![zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Cx<T>>>) -> NumResult<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(NumError::Shape {
                context: "ragged row lengths".into(),
            });
        }
        Ok(CMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
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
    pub fn at(&self, i: usize, j: usize) -> Cx<T> {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Cx<T>) {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: Cx<T>) {
        self.entries[i * self.cols + j] += v;
    }

    pub fn entries(&self) -> &[Cx<T>] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a -= *b;
        }
        out
    }

    pub fn scaled(&self, s: Cx<T>) -> Self {
        let mut out = self.clone();
        for a in out.entries.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for a in out.entries.iter_mut() {
            *a = a.conj();
        }
        out
    }

    pub fn trace(&self) -> Cx<T> {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.at(i, i)).fold(zero(), |s, z| s + z)
    }

    /// Hilbert-Schmidt inner product `tr(other* self)`.
    pub fn hs_inner(&self, other: &Self) -> Cx<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| b.conj() * a)
            .fold(zero(), |s, z| s + z)
    }

    pub fn frob_norm(&self) -> T {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |s, z| s + z)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.entries
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }

    pub fn dist_max(&self, other: &Self) -> T {
        self.sub(other).max_abs()
    }

    /// Deviation from the identity, max-entry norm.
    pub fn identity_defect(&self) -> T {
        assert!(self.is_square());
        let mut d = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { one() } else { zero() };
                d = d.max((self.at(i, j) - target).norm());
            }
        }
        d
    }

    pub fn self_adjoint_defect(&self) -> T {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn column(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    /// Hermitian part `(a + a*)/2`, used before eigensolves on matrices that
    /// are self-adjoint up to roundoff.
    pub fn hermitize(&self) -> Self {
        let h = T::real(0.5);
        let adj = self.adjoint();
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self.at(i, j) + adj.at(i, j)).scale(h)
        })
    }
}

/// Kronecker product, left-factor-major block order:
/// `(a ⊗ b)[(i1,i2),(j1,j2)] = a[i1,j1]·b[i2,j2]` with `(i1,i2)` lexicographic.
pub fn kron<T: Scalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let mut out = CMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i1 in 0..a.rows() {
        for j1 in 0..a.cols() {
            let f = a.at(i1, j1);
            if f == zero() {
                continue;
            }
            for i2 in 0..b.rows() {
                for j2 in 0..b.cols() {
                    out.set(i1 * b.rows() + i2, j1 * b.cols() + j2, f * b.at(i2, j2));
                }
            }
        }
    }
    out
}

/// Block-diagonal direct sum in the given order.
pub fn direct_sum_blocks<T: Scalar>(blocks: &[CMatrix<T>]) -> CMatrix<T> {
    let rows = blocks.iter().map(CMatrix::rows).sum();
    let cols = blocks.iter().map(CMatrix::cols).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                out.set(r0 + i, c0 + j, b.at(i, j));
            }
        }
        r0 += b.rows();
        c0 += b.cols();
    }
    out
}

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

/// SplitMix-style 64-bit generator. Small, seedable, and stable across
/// platforms; used for every perturbation and randomized test instance so
/// that a seed printed in a report reproduces the run exactly.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_unit<T: Scalar>(&mut self) -> T {
        let x = self.next_u64() >> 11; // 53 bits
        T::real(x as f64 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian<T: Scalar>(&mut self) -> T {
        let mut u1 = self.next_unit::<T>();
        if u1 <= T::zero() {
            u1 = T::real(1e-12);
        }
        let u2 = self.next_unit::<T>();
        let two = T::real(2.0);
        (-two * u1.ln()).sqrt() * (two * T::PI() * u2).cos()
    }

    pub fn next_complex_gaussian<T: Scalar>(&mut self) -> Cx<T> {
        Complex::new(self.next_gaussian(), self.next_gaussian())
    }

    pub fn gaussian_matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> CMatrix<T> {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, self.next_complex_gaussian());
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigendecomposition `a = V diag(values) V*` of a self-adjoint matrix.
/// Values ascend; ties keep the sweep order, so the output is deterministic.
#[derive(Debug, Clone)]
pub struct HermitianEig<T: Scalar> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

/// Cyclic Jacobi with a fixed (p, q) sweep order. Quadratic convergence on
/// self-adjoint matrices; we cap at 60 sweeps which is far beyond need for
/// the sizes handled here.
pub fn hermitian_eig<T: Scalar>(a: &CMatrix<T>, tol: &Tolerance<T>) -> NumResult<HermitianEig<T>> {
    if !a.is_square() {
        return Err(NumError::Shape {
            context: format!("eigensolve needs a square matrix, got {}x{}", a.rows(), a.cols()),
        });
    }
    if !a.is_finite() {
        return Err(NumError::NonFinite);
    }
    let scale = a.frob_norm().max(T::one());
    let defect = a.self_adjoint_defect();
    if defect > tol.atol * scale {
        return Err(NumError::NotSelfAdjoint {
            deviation: defect.to_f64().unwrap_or(f64::NAN),
        });
    }

    let n = a.rows();
    let mut m = a.hermitize();
    let mut v = CMatrix::identity(n);
    if n <= 1 {
        return Ok(HermitianEig {
            values: (0..n).map(|i| m.at(i, i).re).collect(),
            vectors: v,
        });
    }

    let off = |m: &CMatrix<T>| -> T {
        let mut s = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                s += m.at(p, q).norm_sqr();
            }
        }
        s.sqrt()
    };

    let eps = T::epsilon();
    let stop = eps * scale * T::real(n as f64);
    let mut converged = false;
    for _sweep in 0..60 {
        if off(&m) <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m.at(p, q);
                let absg = g.norm();
                if absg <= eps * scale {
                    continue;
                }
                // Phase w turns m[p][q] real, then a real Jacobi rotation
                // annihilates it. Combined plane transform J = P·G.
                let w = g.conj().unscale(absg);
                let alpha = m.at(p, p).re;
                let beta = m.at(q, q).re;
                let tau = (beta - alpha) / (T::real(2.0) * absg);
                let t = if tau == T::zero() {
                    T::one()
                } else {
                    let sign = if tau >= T::zero() { T::one() } else { -T::one() };
                    sign / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let ws = w.scale(s);
                let wc = w.scale(c);
                // columns: col_p ← c·col_p − w·s·col_q ; col_q ← s·col_p + w·c·col_q
                for k in 0..n {
                    let akp = m.at(k, p);
                    let akq = m.at(k, q);
                    m.set(k, p, akp.scale(c) - ws * akq);
                    m.set(k, q, akp.scale(s) + wc * akq);
                }
                // rows with conjugated coefficients
                for l in 0..n {
                    let apl = m.at(p, l);
                    let aql = m.at(q, l);
                    m.set(p, l, apl.scale(c) - ws.conj() * aql);
                    m.set(q, l, apl.scale(s) + wc.conj() * aql);
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, vkp.scale(c) - ws * vkq);
                    v.set(k, q, vkp.scale(s) + wc * vkq);
                }
                let zpq = zero();
                m.set(p, q, zpq);
                m.set(q, p, zpq);
            }
        }
    }
    if !converged && off(&m) > stop * T::real(1e3) {
        return Err(NumError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| m.at(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v.at(i, order[j]));
    Ok(HermitianEig { values, vectors })
}

/// Positive square root of a positive semidefinite self-adjoint matrix.
/// Eigenvalues in `[-√atol, 0)` are clamped to zero; anything lower is an
/// error.
pub fn positive_sqrt<T: Scalar>(a: &CMatrix<T>, tol: &Tolerance<T>) -> NumResult<CMatrix<T>> {
    let eig = hermitian_eig(a, tol)?;
    let scale = a.frob_norm().max(T::one());
    let floor = -tol.sqrt_atol() * scale;
    if let Some(min) = eig.values.first() {
        if *min < floor {
            return Err(NumError::NotPositive {
                min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let n = a.rows();
    let v = &eig.vectors;
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.values[k].max(T::zero()).sqrt();
        if lam == T::zero() {
            continue;
        }
        for i in 0..n {
            let vik = v.at(i, k).scale(lam);
            for j in 0..n {
                out.add_at(i, j, vik * v.at(j, k).conj());
            }
        }
    }
    Ok(out)
}

/// Spectral projections of a self-adjoint matrix: eigenvalues are clustered
/// whenever adjacent sorted values are closer than `√atol`, and each cluster
/// yields `(mean eigenvalue, orthogonal projection)` in ascending order.
pub fn spectral_projections<T: Scalar>(
    a: &CMatrix<T>,
    tol: &Tolerance<T>,
) -> NumResult<Vec<(T, CMatrix<T>)>> {
    let eig = hermitian_eig(a, tol)?;
    let n = a.rows();
    let gap = tol.sqrt_atol() * a.frob_norm().max(T::one());
    let mut out: Vec<(T, CMatrix<T>)> = Vec::new();
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && eig.values[end] - eig.values[end - 1] < gap {
            end += 1;
        }
        let mut proj = CMatrix::zeros(n, n);
        let mut mean = T::zero();
        for c in k..end {
            mean += eig.values[c];
            for i in 0..n {
                let vic = eig.vectors.at(i, c);
                for j in 0..n {
                    proj.add_at(i, j, vic * eig.vectors.at(j, c).conj());
                }
            }
        }
        mean /= T::real((end - k) as f64);
        out.push((mean, proj));
        k = end;
    }
    Ok(out)
}

/// Largest singular value.
pub fn op_norm<T: Scalar>(a: &CMatrix<T>, tol: &Tolerance<T>) -> NumResult<T> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(T::zero());
    }
    let g = a.adjoint().mul(a);
    let eig = hermitian_eig(&g, tol)?;
    Ok(eig.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt())
}

/// 2-norm condition number, `+inf` encoded as `T::infinity()` when the
/// smallest singular value underflows the rank cutoff.
pub fn cond_2<T: Scalar>(a: &CMatrix<T>, tol: &Tolerance<T>) -> NumResult<T> {
    let g = a.adjoint().mul(a);
    let eig = hermitian_eig(&g, tol)?;
    let hi = eig.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
    let lo = eig.values.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
    if lo <= tol.sqrt_atol() * hi.max(T::one()) * T::epsilon().sqrt() || lo == T::zero() {
        return Ok(T::infinity());
    }
    Ok(hi / lo)
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

struct Lu<T: Scalar> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
}

fn lu_factor<T: Scalar>(a: &CMatrix<T>) -> NumResult<Lu<T>> {
    if !a.is_square() {
        return Err(NumError::Shape {
            context: "LU factorization needs a square matrix".into(),
        });
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(T::one());
    for k in 0..n {
        // pivot: largest modulus in column k at or below the diagonal
        let mut piv = k;
        let mut best = lu.at(k, k).norm();
        for i in (k + 1)..n {
            let v = lu.at(i, k).norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best <= T::epsilon() * scale * T::real(n as f64) {
            return Err(NumError::Singular);
        }
        if piv != k {
            for j in 0..n {
                let t = lu.at(k, j);
                lu.set(k, j, lu.at(piv, j));
                lu.set(piv, j, t);
            }
            perm.swap(k, piv);
        }
        let d = lu.at(k, k);
        for i in (k + 1)..n {
            let f = lu.at(i, k) / d;
            lu.set(i, k, f);
            if f == zero() {
                continue;
            }
            for j in (k + 1)..n {
                let v = lu.at(i, j) - f * lu.at(k, j);
                lu.set(i, j, v);
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl<T: Scalar> Lu<T> {
    fn solve(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n);
        let m = b.cols();
        let mut x = CMatrix::zeros(n, m);
        for c in 0..m {
            // forward substitution on P·b
            let mut y = vec![zero::<T>(); n];
            for i in 0..n {
                let mut s = b.at(self.perm[i], c);
                for j in 0..i {
                    s -= self.lu.at(i, j) * y[j];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for j in (i + 1)..n {
                    s -= self.lu.at(i, j) * x.at(j, c);
                }
                x.set(i, c, s / self.lu.at(i, i));
            }
        }
        x
    }
}

/// Solve `a·x = b` by column-pivoted Gaussian elimination.
pub fn lu_solve<T: Scalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> NumResult<CMatrix<T>> {
    Ok(lu_factor(a)?.solve(b))
}

pub fn lu_inverse<T: Scalar>(a: &CMatrix<T>) -> NumResult<CMatrix<T>> {
    let id = CMatrix::identity(a.rows());
    lu_solve(a, &id)
}

// ---------------------------------------------------------------------------
// General spectrum (Hessenberg + shifted QR) and similarity square root
// ---------------------------------------------------------------------------

fn givens<T: Scalar>(f: Cx<T>, g: Cx<T>) -> (T, Cx<T>) {
    // returns (c real, s) with [[c, s], [-s̄, c]]·[f; g] = [r; 0]
    if g == zero() {
        return (T::one(), zero());
    }
    if f == zero() {
        return (T::zero(), g.conj().unscale(g.norm()));
    }
    let r = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = f.norm() / r;
    let s = f.unscale(f.norm()) * g.conj().unscale(r);
    (c, s)
}

fn eig2<T: Scalar>(a: Cx<T>, b: Cx<T>, c: Cx<T>, d: Cx<T>) -> (Cx<T>, Cx<T>) {
    let half = T::real(0.5);
    let tr = (a + d).scale(half);
    let det = a * d - b * c;
    let disc = (tr * tr - det).sqrt();
    (tr + disc, tr - disc)
}

/// All eigenvalues of a general complex matrix via Householder reduction to
/// Hessenberg form followed by Wilkinson-shifted QR. Values only; order is
/// deterministic (deflation order, then sorted by real part, then imaginary).
pub fn general_eigenvalues<T: Scalar>(a: &CMatrix<T>) -> NumResult<Vec<Cx<T>>> {
    if !a.is_square() {
        return Err(NumError::Shape {
            context: "eigenvalues need a square matrix".into(),
        });
    }
    if !a.is_finite() {
        return Err(NumError::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a.at(0, 0)]);
    }
    let mut h = a.clone();

    // Householder reduction to upper Hessenberg.
    for k in 0..n.saturating_sub(2) {
        let mut x: Vec<Cx<T>> = ((k + 1)..n).map(|i| h.at(i, k)).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, z| s + z).sqrt();
        if norm <= T::epsilon() {
            continue;
        }
        let alpha = if x[0] == zero() {
            Complex::new(norm, T::zero())
        } else {
            x[0].unscale(x[0].norm()).scale(norm)
        };
        x[0] += alpha;
        let vnorm2 = x.iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, z| s + z);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::real(2.0);
        // H ← (I − 2vv*/v*v) H (I − 2vv*/v*v)
        for j in 0..n {
            let mut dot = zero::<T>();
            for (idx, i) in ((k + 1)..n).enumerate() {
                dot += x[idx].conj() * h.at(i, j);
            }
            let f = dot.scale(two / vnorm2);
            for (idx, i) in ((k + 1)..n).enumerate() {
                let v = h.at(i, j) - x[idx] * f;
                h.set(i, j, v);
            }
        }
        for i in 0..n {
            let mut dot = zero::<T>();
            for (idx, j) in ((k + 1)..n).enumerate() {
                dot += h.at(i, j) * x[idx];
            }
            let f = dot.scale(two / vnorm2);
            for (idx, j) in ((k + 1)..n).enumerate() {
                let v = h.at(i, j) - f * x[idx].conj();
                h.set(i, j, v);
            }
        }
    }

    let eps = T::epsilon();
    let mut values: Vec<Cx<T>> = Vec::with_capacity(n);
    let mut hi = n; // active window is rows/cols [0, hi)
    let mut iters = 0usize;
    let max_iters = 40 * n;
    while hi > 0 {
        if hi == 1 {
            values.push(h.at(0, 0));
            break;
        }
        // deflate tiny subdiagonals
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = h.at(lo, lo - 1).norm();
            let local = h.at(lo - 1, lo - 1).norm() + h.at(lo, lo).norm();
            if sub <= eps * local.max(T::epsilon()) {
                h.set(lo, lo - 1, zero());
                break;
            }
            lo -= 1;
        }
        if h.at(hi - 1, hi - 2).norm() == T::zero() {
            values.push(h.at(hi - 1, hi - 1));
            hi -= 1;
            continue;
        }
        if hi >= 2 && lo == hi - 1 {
            // isolated trailing 2x2 block? only when its own subdiagonal deflated
        }
        if hi >= 2 {
            let sub = h.at(hi - 1, hi - 2).norm();
            let local = h.at(hi - 2, hi - 2).norm() + h.at(hi - 1, hi - 1).norm();
            if sub <= eps * local.max(T::epsilon()) {
                h.set(hi - 1, hi - 2, zero());
                values.push(h.at(hi - 1, hi - 1));
                hi -= 1;
                continue;
            }
        }
        iters += 1;
        if iters > max_iters {
            return Err(NumError::NoConvergence);
        }
        // Wilkinson shift from the trailing 2x2 of the active window.
        let (e1, e2) = eig2(
            h.at(hi - 2, hi - 2),
            h.at(hi - 2, hi - 1),
            h.at(hi - 1, hi - 2),
            h.at(hi - 1, hi - 1),
        );
        let target = h.at(hi - 1, hi - 1);
        let mu = if (e1 - target).norm() <= (e2 - target).norm() { e1 } else { e2 };
        // explicit shifted QR on the active window
        let w = hi;
        let mut rot: Vec<(T, Cx<T>)> = Vec::with_capacity(w - 1);
        for i in 0..w {
            let v = h.at(i, i) - mu;
            h.set(i, i, v);
        }
        for k in 0..(w - 1) {
            let (c, s) = givens(h.at(k, k), h.at(k + 1, k));
            rot.push((c, s));
            for j in k..w {
                let a1 = h.at(k, j);
                let a2 = h.at(k + 1, j);
                h.set(k, j, a1.scale(c) + s * a2);
                h.set(k + 1, j, a2.scale(c) - s.conj() * a1);
            }
        }
        for (k, (c, s)) in rot.iter().enumerate() {
            for i in 0..=(k + 1).min(w - 1) {
                let a1 = h.at(i, k);
                let a2 = h.at(i, k + 1);
                h.set(i, k, a1.scale(*c) + a2 * s.conj());
                h.set(i, k + 1, a2.scale(*c) - a1 * *s);
            }
        }
        for i in 0..w {
            let v = h.at(i, i) + mu;
            h.set(i, i, v);
        }
    }

    values.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(values)
}

/// Square root of a matrix that is similar to a strictly positive diagonal
/// (a product of two positive-definite self-adjoint matrices, for instance).
/// The spectrum is checked first: every eigenvalue must satisfy
/// `|Im λ| ≤ √atol·scale` and `Re λ > atol·scale`. The root itself comes from
/// the Denman-Beavers iteration, which converges quadratically once the
/// spectrum avoids the closed negative real axis.
pub fn similarity_sqrt<T: Scalar>(a: &CMatrix<T>, tol: &Tolerance<T>) -> NumResult<CMatrix<T>> {
    if !a.is_square() {
        return Err(NumError::Shape {
            context: "similarity square root needs a square matrix".into(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(a.clone());
    }
    let scale = (a.frob_norm() / T::real(n as f64).sqrt()).max(T::one());
    let spectrum = general_eigenvalues(a)?;
    for lam in &spectrum {
        if lam.im.abs() > tol.sqrt_atol() * scale || lam.re <= tol.atol * scale {
            return Err(NumError::SpectrumNotPositive {
                re: lam.re.to_f64().unwrap_or(f64::NAN),
                im: lam.im.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let mut y = a.clone();
    let mut z = CMatrix::identity(n);
    let half = Complex::new(T::real(0.5), T::zero());
    for _ in 0..80 {
        let yi = lu_inverse(&y)?;
        let zi = lu_inverse(&z)?;
        let y_next = y.add(&zi).scaled(half);
        let z_next = z.add(&yi).scaled(half);
        let delta = y_next.dist_max(&y);
        y = y_next;
        z = z_next;
        if delta <= T::epsilon() * scale * T::real(16.0) {
            let residual = y.mul(&y).dist_max(a);
            if residual <= tol.sqrt_atol() * scale {
                return Ok(y);
            }
        }
    }
    let residual = y.mul(&y).dist_max(a);
    if residual <= tol.sqrt_atol() * scale {
        Ok(y)
    } else {
        Err(NumError::NoConvergence)
    }
}

// ---------------------------------------------------------------------------
// Finite group closure
// ---------------------------------------------------------------------------

/// An element of the closure is one unitary per slot; slot shapes are fixed
/// by the generating set. Element 0 is the identity.
#[derive(Debug, Clone)]
pub struct GroupClosure<T: Scalar> {
    pub elements: Vec<Vec<CMatrix<T>>>,
    /// `table[g][h]` = index of the product g·h.
    pub table: Vec<Vec<u32>>,
}

impl<T: Scalar> GroupClosure<T> {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn trivial(slot_dims: &[usize]) -> Self {
        GroupClosure {
            elements: vec![slot_dims.iter().map(|&d| CMatrix::identity(d)).collect()],
            table: vec![vec![0]],
        }
    }

    pub fn product(&self, g: usize, h: usize) -> usize {
        self.table[g][h] as usize
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.table[g]
            .iter()
            .position(|&p| p == 0)
            .expect("finite group row contains the identity")
    }
}

pub const GROUP_CAP: usize = 20_000;

/// Closure of a finite set of slot-tuples of unitaries under componentwise
/// multiplication. Duplicate detection uses the maximum Frobenius distance
/// over slots with cutoff `√atol`.
pub fn group_closure<T: Scalar>(
    generators: &[Vec<CMatrix<T>>],
    cap: usize,
    tol: &Tolerance<T>,
) -> NumResult<GroupClosure<T>> {
    let slot_dims: Vec<usize> = match generators.first() {
        Some(g) => g.iter().map(CMatrix::rows).collect(),
        None => return Ok(GroupClosure::trivial(&[])),
    };
    for g in generators {
        if g.len() != slot_dims.len() {
            return Err(NumError::Shape {
                context: "generators disagree on slot count".into(),
            });
        }
        for (s, m) in g.iter().enumerate() {
            if !m.is_square() || m.rows() != slot_dims[s] {
                return Err(NumError::Shape {
                    context: format!("slot {s} shape mismatch"),
                });
            }
            let defect = m.adjoint().mul(m).identity_defect();
            if defect > tol.atol.max(T::epsilon() * T::real(100.0)) {
                return Err(NumError::NotUnitary {
                    slot: s,
                    deviation: defect.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }

    let cutoff = tol.sqrt_atol();
    let dist = |a: &[CMatrix<T>], b: &[CMatrix<T>]| -> T {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.sub(y).frob_norm())
            .fold(T::zero(), T::max)
    };
    let identity: Vec<CMatrix<T>> = slot_dims.iter().map(|&d| CMatrix::identity(d)).collect();
    let mut elements: Vec<Vec<CMatrix<T>>> = vec![identity];
    let find = |elements: &[Vec<CMatrix<T>>], cand: &[CMatrix<T>]| -> Option<usize> {
        elements.iter().position(|e| dist(e, cand) < cutoff)
    };
    for g in generators {
        if find(&elements, g).is_none() {
            elements.push(g.clone());
        }
    }
    // worklist closure: multiply every ordered pair until stable
    let mut frontier = 0;
    while frontier < elements.len() {
        let g = elements[frontier].clone();
        let mut new_elems: Vec<Vec<CMatrix<T>>> = Vec::new();
        for h in 0..elements.len() {
            for (x, y) in [(&g, &elements[h]), (&elements[h], &g)] {
                let prod: Vec<CMatrix<T>> =
                    x.iter().zip(y.iter()).map(|(a, b)| a.mul(b)).collect();
                if find(&elements, &prod).is_none()
                    && new_elems.iter().all(|e| dist(e, &prod) >= cutoff)
                {
                    new_elems.push(prod);
                }
            }
        }
        for e in new_elems {
            if elements.len() >= cap {
                return Err(NumError::GroupTooLarge { cap });
            }
            elements.push(e);
        }
        frontier += 1;
    }

    let n = elements.len();
    let mut table = vec![vec![0u32; n]; n];
    for g in 0..n {
        for h in 0..n {
            let prod: Vec<CMatrix<T>> = elements[g]
                .iter()
                .zip(&elements[h])
                .map(|(a, b)| a.mul(b))
                .collect();
            let idx = find(&elements, &prod).ok_or(NumError::NoConvergence)?;
            table[g][h] = idx as u32;
        }
    }
    Ok(GroupClosure { elements, table })
}
