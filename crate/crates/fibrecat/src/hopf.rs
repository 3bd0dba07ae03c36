//! Fourier duality on the two commutant algebras of an irreducible
//! depth-two arrow and the fibrewise reconstruction of the induced pair of
//! finite-dimensional Hopf algebras.
//!
//! For an irreducible balanced 1-arrow ρ the algebras A = End(ρ̄⊗ρ) and
//! B = End(ρ⊗ρ̄) split into one finite-dimensional C*-algebra per base
//! point, matched through the support bijection θ. The standard solutions
//! of the two legs induce a Markov trace on each fibre, the solution of ρ
//! itself induces a Fourier transform A -> B, and the trace paired against
//! the inverse transform is nondegenerate. Pulling the multiplication of B
//! back through that pairing equips every fibre of A with a coproduct,
//! counit and antipode; all structure constants are extracted as explicit
//! matrices so the Hopf axioms reduce to finite tensor contractions whose
//! residuals are reported exactly as computed.

use crate::conjugation::{canonical_solution, is_standard, ConjError, SolutionPair};
use crate::homcalc::{
    compose_horizontal, compose_vertical, hom_basis, is_balanced, CalcError, CentralFunction,
    HomBasis, TwoArrow,
};
use crate::model::{Arrow, CategoryPresentation, FibreKey, ModelError};
use crate::numerics::{
    cond_2, hermitian_eig, lu_inverse, one, zero, CMatrix, Cx, NumError, Scalar, Tolerance,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Tolerance for the integrality facts that characterize depth two: the
/// scalar of ρ must be an integer and the trace of the unit of each fibre
/// algebra must match both its square and the fibre dimension.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HopfError {
    #[error("arrow {arrow} is not balanced")]
    NotBalanced { arrow: String },
    #[error("arrow support misses point {point} of object {object}")]
    SupportNotFull { object: String, point: String },
    #[error("End(rho) has dimension {end_dim} at point {point}, expected 1")]
    NotIrreducible { point: usize, end_dim: usize },
    #[error("canonical solution is not standard (defect {defect:e})")]
    NotStandard { defect: f64 },
    #[error("Fourier transform is singular at point {point}")]
    FourierSingular { point: usize },
    #[error("duality pairing is degenerate at point {point} (condition {condition:e})")]
    DegeneratePairing { point: usize, condition: f64 },
    #[error("datum shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Conj(#[from] ConjError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type HopfResult<V> = Result<V, HopfError>;

fn as_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Small dense linear algebra on coordinate vectors
// ---------------------------------------------------------------------------

fn csum<T: Scalar>(it: impl Iterator<Item = Cx<T>>) -> Cx<T> {
    it.fold(zero(), |s, z| s + z)
}

fn transpose<T: Scalar>(m: &CMatrix<T>) -> CMatrix<T> {
    CMatrix::from_fn(m.cols(), m.rows(), |i, j| m.at(j, i))
}

fn mat_vec<T: Scalar>(m: &CMatrix<T>, v: &[Cx<T>]) -> Vec<Cx<T>> {
    debug_assert_eq!(m.cols(), v.len());
    (0..m.rows())
        .map(|i| csum((0..v.len()).map(|j| m.at(i, j) * v[j])))
        .collect()
}

fn row<T: Scalar>(m: &CMatrix<T>, i: usize) -> Vec<Cx<T>> {
    (0..m.cols()).map(|j| m.at(i, j)).collect()
}

/// Gram matrix G[i][j] = tr(vᵢ† vⱼ) of a family of equal-shape blocks.
fn gram<T: Scalar>(blocks: &[CMatrix<T>]) -> CMatrix<T> {
    CMatrix::from_fn(blocks.len(), blocks.len(), |i, j| {
        blocks[j].hs_inner(&blocks[i])
    })
}

/// Coordinates of `x` against a (not necessarily orthonormal) block basis,
/// solved through the inverse Gram matrix.
fn coords_from<'x, T: Scalar + 'x>(
    gram_inv: &CMatrix<T>,
    blocks: impl Iterator<Item = &'x CMatrix<T>>,
    x: &CMatrix<T>,
) -> Vec<Cx<T>> {
    let v: Vec<Cx<T>> = blocks.map(|b| x.hs_inner(b)).collect();
    mat_vec(gram_inv, &v)
}

fn coords<T: Scalar>(gram_inv: &CMatrix<T>, blocks: &[CMatrix<T>], x: &CMatrix<T>) -> Vec<Cx<T>> {
    coords_from(gram_inv, blocks.iter(), x)
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Coordinate data of the two fibre algebras over one source base point,
/// with its partner θ(point) on the target object. Every matrix is written
/// against the restriction of the global hom bases to this fibre.
#[derive(Debug, Clone)]
pub struct HopfPoint<T: Scalar> {
    /// Base point on the source object.
    pub point: usize,
    /// Matched point θ(point) on the target object.
    pub partner: usize,
    /// Indices into the global End(ρ̄⊗ρ) basis supported on this fibre.
    pub a_members: Vec<usize>,
    /// Indices into the global End(ρ⊗ρ̄) basis supported on the partner fibre.
    pub b_members: Vec<usize>,
    /// Inverse Gram matrix of the A-side fibre basis blocks.
    pub gram_a_inv: CMatrix<T>,
    /// Inverse Gram matrix of the B-side fibre basis blocks.
    pub gram_b_inv: CMatrix<T>,
    /// Fourier transform in coordinates, mapping A-side to B-side.
    pub fourier: CMatrix<T>,
    /// Matrix inverse of the transform. This is not the transform in the
    /// opposite direction; the two differ by the antipode.
    pub fourier_inv: CMatrix<T>,
    /// Duality pairing P[i][j] = <a_i, b_j>.
    pub pairing: CMatrix<T>,
    /// Spectral condition number of the pairing.
    pub pairing_condition: T,
    /// Antipode in A-side coordinates, the round trip of both transforms.
    pub antipode: CMatrix<T>,
    /// mult_a[i].at(k, l): coefficient of a_l in a_i ∘ a_k.
    pub mult_a: Vec<CMatrix<T>>,
    /// mult_b[i].at(k, l): coefficient of b_l in b_i ∘ b_k.
    pub mult_b: Vec<CMatrix<T>>,
    /// coproduct[i].at(j, k): coefficient of a_j ⊗ a_k in Δ(a_i).
    pub coproduct: Vec<CMatrix<T>>,
    /// Counit values ε(a_i).
    pub counit: Vec<Cx<T>>,
    /// convolution[i].at(k, l): coefficient of a_l in a_i ⋆ a_k.
    pub convolution: Vec<CMatrix<T>>,
    /// Coordinates of the unit of the A-side fibre algebra.
    pub unit_a: Vec<Cx<T>>,
    /// Coordinates of the unit of the B-side fibre algebra.
    pub unit_b: Vec<Cx<T>>,
    /// Coordinates of the convolution unit, the inverse transform of 1_B.
    pub convolution_unit: Vec<Cx<T>>,
    /// Markov trace values of the A-side basis elements on this fibre.
    pub trace_a: Vec<Cx<T>>,
}

impl<T: Scalar> HopfPoint<T> {
    pub fn dim_a(&self) -> usize {
        self.a_members.len()
    }

    pub fn dim_b(&self) -> usize {
        self.b_members.len()
    }
}

/// Everything needed to evaluate the Hopf pair of an irreducible balanced
/// 1-arrow: the standard solutions of ρ and of its two one-sided squares,
/// the global hom bases of the two commutants, and the per-point
/// coordinate data.
#[derive(Debug, Clone)]
pub struct HopfData<T: Scalar> {
    pub rho: Arrow<T>,
    /// ρ̄⊗ρ, the endo-arrow over the source object carrying A.
    pub a_arrow: Arrow<T>,
    /// ρ⊗ρ̄, the endo-arrow over the target object carrying B.
    pub b_arrow: Arrow<T>,
    /// Standard solution of ρ, used by the Fourier transforms.
    pub solution: SolutionPair<T>,
    /// Standard solution of ρ̄⊗ρ, used by the A-side trace.
    pub a_solution: SolutionPair<T>,
    /// Standard solution of ρ⊗ρ̄, used by the B-side trace.
    pub b_solution: SolutionPair<T>,
    pub a_basis: HomBasis<T>,
    pub b_basis: HomBasis<T>,
    /// Support bijection of ρ from source points to target points.
    pub theta: BTreeMap<usize, usize>,
    /// Scalar of ρ per source point.
    pub d_rho: CentralFunction<T>,
    /// Trace of the A-side unit per source point.
    pub d_a: CentralFunction<T>,
    /// Trace of the B-side unit per target point.
    pub d_b: CentralFunction<T>,
    pub points: Vec<HopfPoint<T>>,
}

impl<T: Scalar> HopfData<T> {
    /// Assemble the full coordinate model. Fails when ρ is not balanced
    /// with full support on both sides, not irreducible, when a canonical
    /// solution is not standard, or when a transform or pairing degenerates.
    pub fn new(cat: &CategoryPresentation<T>, rho: &Arrow<T>) -> HopfResult<Self> {
        let theta = support_scan(cat, rho)?;
        if let Some(&(point, end_dim)) = end_dims(cat, rho, &theta)?.iter().find(|&&(_, d)| d != 1)
        {
            return Err(HopfError::NotIrreducible { point, end_dim });
        }

        let solution = standard_solution(cat, rho)?;
        let a_arrow = rho.dual().tensor(cat, rho)?;
        let b_arrow = rho.tensor(cat, &rho.dual())?;
        let a_solution = standard_solution(cat, &a_arrow)?;
        let b_solution = standard_solution(cat, &b_arrow)?;
        let a_basis = hom_basis(cat, &a_arrow, &a_arrow)?;
        let b_basis = hom_basis(cat, &b_arrow, &b_arrow)?;
        let d_rho = end_values(cat, &solution.r)?;
        let d_a = end_values(cat, &a_solution.r)?;
        let d_b = end_values(cat, &b_solution.r)?;

        let fourier_elems = a_basis
            .elements
            .iter()
            .map(|e| fourier_raw(cat, &solution, &b_arrow, e))
            .collect::<HopfResult<Vec<_>>>()?;
        let fourier_hat_elems = b_basis
            .elements
            .iter()
            .map(|e| fourier_hat_raw(cat, &solution, &a_arrow, e))
            .collect::<HopfResult<Vec<_>>>()?;
        let trace_fns = a_basis
            .elements
            .iter()
            .map(|e| markov_trace(cat, &a_solution, e))
            .collect::<HopfResult<Vec<_>>>()?;

        let mut points = Vec::with_capacity(theta.len());
        for (&point, &partner) in &theta {
            points.push(build_point(
                cat,
                point,
                partner,
                &a_arrow,
                &b_arrow,
                &a_basis,
                &b_basis,
                &fourier_elems,
                &fourier_hat_elems,
                &trace_fns,
                &d_rho,
            )?);
        }

        Ok(HopfData {
            rho: rho.clone(),
            a_arrow,
            b_arrow,
            solution,
            a_solution,
            b_solution,
            a_basis,
            b_basis,
            theta,
            d_rho,
            d_a,
            d_b,
            points,
        })
    }

    /// Per-point data at the given source base point.
    pub fn point(&self, point: usize) -> HopfResult<&HopfPoint<T>> {
        self.points
            .iter()
            .find(|p| p.point == point)
            .ok_or_else(|| HopfError::Shape(format!("no fibre data at point {point}")))
    }
}

// ---------------------------------------------------------------------------
// Preconditions
// ---------------------------------------------------------------------------

/// Balanced plus full support on both sides; returns the support bijection.
fn support_scan<T: Scalar>(
    cat: &CategoryPresentation<T>,
    rho: &Arrow<T>,
) -> HopfResult<BTreeMap<usize, usize>> {
    if !is_balanced(cat, rho) {
        return Err(HopfError::NotBalanced {
            arrow: rho.display(cat),
        });
    }
    let sig = cat.signature(rho);
    let mut theta = BTreeMap::new();
    for k in sig.dims.keys() {
        theta.insert(k.src, k.tgt);
    }
    let src = cat.object(rho.source());
    for (i, label) in src.base.iter().enumerate() {
        if !theta.contains_key(&i) {
            return Err(HopfError::SupportNotFull {
                object: src.name.clone(),
                point: label.clone(),
            });
        }
    }
    let covered: BTreeSet<usize> = theta.values().copied().collect();
    let tgt = cat.object(rho.target());
    for (i, label) in tgt.base.iter().enumerate() {
        if !covered.contains(&i) {
            return Err(HopfError::SupportNotFull {
                object: tgt.name.clone(),
                point: label.clone(),
            });
        }
    }
    Ok(theta)
}

/// Dimension of the endomorphism fibre of ρ at every source point.
fn end_dims<T: Scalar>(
    cat: &CategoryPresentation<T>,
    rho: &Arrow<T>,
    theta: &BTreeMap<usize, usize>,
) -> HopfResult<Vec<(usize, usize)>> {
    let basis = hom_basis(cat, rho, rho)?;
    Ok(theta
        .iter()
        .map(|(&s, &t)| {
            let key = FibreKey::new(t, s);
            let dim = basis
                .elements
                .iter()
                .filter(|e| e.block(key).is_some())
                .count();
            (s, dim)
        })
        .collect())
}

/// Decide irreducibility of ρ: balanced, fully supported on both sides, and
/// a one-dimensional endomorphism fibre at every point. The support
/// preconditions are hard errors; reducibility is an ordinary `false`.
pub fn check_irreducible<T: Scalar>(
    cat: &CategoryPresentation<T>,
    rho: &Arrow<T>,
) -> HopfResult<bool> {
    let theta = support_scan(cat, rho)?;
    Ok(end_dims(cat, rho, &theta)?.iter().all(|&(_, d)| d == 1))
}

fn standard_solution<T: Scalar>(
    cat: &CategoryPresentation<T>,
    arrow: &Arrow<T>,
) -> HopfResult<SolutionPair<T>> {
    let sol = canonical_solution(cat, arrow)?;
    let defect = is_standard(cat, &sol)?;
    if defect > cat.tol().sqrt_atol() {
        return Err(HopfError::NotStandard {
            defect: as_f64(defect),
        });
    }
    Ok(sol)
}

fn end_values<T: Scalar>(
    cat: &CategoryPresentation<T>,
    r: &TwoArrow<T>,
) -> HopfResult<CentralFunction<T>> {
    let sq = compose_vertical(cat, &r.adjoint(), r)?;
    Ok(CentralFunction::from_end_unit(cat, &sq)?)
}

// ---------------------------------------------------------------------------
// Global 2-arrow operators
// ---------------------------------------------------------------------------

fn ensure_end<T: Scalar>(
    cat: &CategoryPresentation<T>,
    x: &TwoArrow<T>,
    arrow: &Arrow<T>,
    role: &str,
) -> HopfResult<()> {
    if x.source() != arrow || x.target() != arrow {
        return Err(HopfError::Shape(format!(
            "{role} must be an endomorphism of {}",
            arrow.display(cat)
        )));
    }
    Ok(())
}

/// Raw transform (1 ⊗ R̄*) ∘ (1_ρ ⊗ a ⊗ 1_ρ̄) ∘ (R̄ ⊗ 1): bend the left leg of
/// a around with the solution of ρ and close its right leg.
fn fourier_raw<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    b_arrow: &Arrow<T>,
    a: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let id_b = TwoArrow::identity(cat, b_arrow);
    let bottom = compose_horizontal(cat, &sol.r_bar, &id_b)?;
    let middle = compose_horizontal(cat, &compose_horizontal(cat, &id_rho, a)?, &id_bar)?;
    let top = compose_horizontal(cat, &id_b, &sol.r_bar.adjoint())?;
    Ok(compose_vertical(
        cat,
        &top,
        &compose_vertical(cat, &middle, &bottom)?,
    )?)
}

/// Raw transform in the other direction, using R instead of R̄.
fn fourier_hat_raw<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    a_arrow: &Arrow<T>,
    b: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let id_a = TwoArrow::identity(cat, a_arrow);
    let bottom = compose_horizontal(cat, &sol.r, &id_a)?;
    let middle = compose_horizontal(cat, &compose_horizontal(cat, &id_bar, b)?, &id_rho)?;
    let top = compose_horizontal(cat, &id_a, &sol.r.adjoint())?;
    Ok(compose_vertical(
        cat,
        &top,
        &compose_vertical(cat, &middle, &bottom)?,
    )?)
}

/// Markov trace of an endomorphism: close it up with the standard solution
/// of the carrying arrow. The unit traces to the dimension, not to 1.
fn markov_trace<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    a: &TwoArrow<T>,
) -> HopfResult<CentralFunction<T>> {
    let lift = compose_horizontal(cat, &TwoArrow::identity(cat, &sol.rho_bar), a)?;
    let closed = compose_vertical(
        cat,
        &sol.r.adjoint(),
        &compose_vertical(cat, &lift, &sol.r)?,
    )?;
    Ok(CentralFunction::from_end_unit(cat, &closed)?)
}

/// Fourier transform End(ρ̄⊗ρ) -> End(ρ⊗ρ̄).
pub fn fourier<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    a: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    ensure_end(cat, a, &h.a_arrow, "transform input")?;
    fourier_raw(cat, &h.solution, &h.b_arrow, a)
}

/// Fourier transform End(ρ⊗ρ̄) -> End(ρ̄⊗ρ).
pub fn fourier_hat<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    b: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    ensure_end(cat, b, &h.b_arrow, "transform input")?;
    fourier_hat_raw(cat, &h.solution, &h.a_arrow, b)
}

/// Antipode, the round trip of the two transforms.
pub fn antipode<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    a: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    fourier_hat(cat, h, &fourier(cat, h, a)?)
}

fn fibre_dim<T: Scalar>(
    cat: &CategoryPresentation<T>,
    arrow: &Arrow<T>,
    key: FibreKey,
) -> HopfResult<usize> {
    cat.signature(arrow)
        .dims
        .get(&key)
        .copied()
        .ok_or_else(|| HopfError::Shape(format!("no fibre at ({}, {})", key.tgt, key.src)))
}

fn block_or_zero<T: Scalar>(t: &TwoArrow<T>, key: FibreKey, dim: usize) -> CMatrix<T> {
    t.block(key)
        .cloned()
        .unwrap_or_else(|| CMatrix::zeros(dim, dim))
}

fn point_a_coords<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    p: &HopfPoint<T>,
    a: &TwoArrow<T>,
) -> HopfResult<Vec<Cx<T>>> {
    let key = FibreKey::new(p.point, p.point);
    let blk = block_or_zero(a, key, fibre_dim(cat, &h.a_arrow, key)?);
    Ok(coords_from(
        &p.gram_a_inv,
        p.a_members
            .iter()
            .map(|&i| h.a_basis.elements[i].block(key).expect("member block")),
        &blk,
    ))
}

fn point_b_coords<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    p: &HopfPoint<T>,
    b: &TwoArrow<T>,
) -> HopfResult<Vec<Cx<T>>> {
    let key = FibreKey::new(p.partner, p.partner);
    let blk = block_or_zero(b, key, fibre_dim(cat, &h.b_arrow, key)?);
    Ok(coords_from(
        &p.gram_b_inv,
        p.b_members
            .iter()
            .map(|&i| h.b_basis.elements[i].block(key).expect("member block")),
        &blk,
    ))
}

/// Inverse Fourier transform, assembled from the per-point matrix inverses.
pub fn fourier_inverse<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    b: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    ensure_end(cat, b, &h.b_arrow, "inverse transform input")?;
    let mut out = TwoArrow::zero(h.a_arrow.clone(), h.a_arrow.clone());
    for p in &h.points {
        let v = point_b_coords(cat, h, p, b)?;
        let c = mat_vec(&p.fourier_inv, &v);
        for (l, &idx) in p.a_members.iter().enumerate() {
            if c[l] != zero() {
                out = out.add(&h.a_basis.elements[idx].scaled(c[l]));
            }
        }
    }
    Ok(out)
}

/// Convolution product on End(ρ̄⊗ρ), the pullback of composition through
/// the transform.
pub fn convolution<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    x: &TwoArrow<T>,
    y: &TwoArrow<T>,
) -> HopfResult<TwoArrow<T>> {
    let fx = fourier(cat, h, x)?;
    let fy = fourier(cat, h, y)?;
    fourier_inverse(cat, h, &compose_vertical(cat, &fx, &fy)?)
}

/// Unit of the convolution product, the inverse transform of 1_B.
pub fn convolution_unit<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
) -> HopfResult<TwoArrow<T>> {
    fourier_inverse(cat, h, &TwoArrow::identity(cat, &h.b_arrow))
}

/// Central Markov trace on End(ρ̄⊗ρ); the unit traces to d_a.
pub fn trace_a<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    a: &TwoArrow<T>,
) -> HopfResult<CentralFunction<T>> {
    ensure_end(cat, a, &h.a_arrow, "trace input")?;
    markov_trace(cat, &h.a_solution, a)
}

/// Central Markov trace on End(ρ⊗ρ̄); the unit traces to d_b.
pub fn trace_b<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    b: &TwoArrow<T>,
) -> HopfResult<CentralFunction<T>> {
    ensure_end(cat, b, &h.b_arrow, "trace input")?;
    markov_trace(cat, &h.b_solution, b)
}

/// Largest pointwise gap between the two routes of the Plancherel identity,
/// tr(x* y) on a fibre against tr(Fx* Fy) on the partner fibre.
pub fn parseval_defect<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    x: &TwoArrow<T>,
    y: &TwoArrow<T>,
) -> HopfResult<T> {
    let lhs = trace_a(cat, h, &compose_vertical(cat, &x.adjoint(), y)?)?;
    let fx = fourier(cat, h, x)?;
    let fy = fourier(cat, h, y)?;
    let rhs = trace_b(cat, h, &compose_vertical(cat, &fx.adjoint(), &fy)?)?;
    let mut defect = T::zero();
    for (&s, &t) in &h.theta {
        defect = defect.max((lhs.values[s] - rhs.values[t]).norm());
    }
    Ok(defect)
}

/// Duality pairing matrix at a source base point.
pub fn pairing_matrix<T: Scalar>(h: &HopfData<T>, point: usize) -> HopfResult<&CMatrix<T>> {
    Ok(&h.point(point)?.pairing)
}

/// Coproduct coefficients of an element per point: the returned matrix D
/// satisfies Δ(a) = Σ D[j][k] a_j ⊗ a_k on the fibre basis.
pub fn coproduct<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    a: &TwoArrow<T>,
) -> HopfResult<Vec<(usize, CMatrix<T>)>> {
    ensure_end(cat, a, &h.a_arrow, "coproduct input")?;
    h.points
        .iter()
        .map(|p| {
            let c = point_a_coords(cat, h, p, a)?;
            let mut d = CMatrix::zeros(p.dim_a(), p.dim_a());
            for (i, ci) in c.iter().enumerate() {
                if *ci != zero() {
                    d = d.add(&p.coproduct[i].scaled(*ci));
                }
            }
            Ok((p.point, d))
        })
        .collect()
}

/// Counit per point, the pairing against the B-side unit.
pub fn counit<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
    a: &TwoArrow<T>,
) -> HopfResult<CentralFunction<T>> {
    ensure_end(cat, a, &h.a_arrow, "counit input")?;
    let object = h.a_arrow.source();
    let mut values = vec![zero::<T>(); cat.point_count(object)];
    for p in &h.points {
        let c = point_a_coords(cat, h, p, a)?;
        values[p.point] = csum(c.iter().zip(&p.counit).map(|(x, e)| *x * *e));
    }
    Ok(CentralFunction { object, values })
}

// ---------------------------------------------------------------------------
// Per-point construction
// ---------------------------------------------------------------------------

fn member_blocks<T: Scalar>(
    elements: &[TwoArrow<T>],
    key: FibreKey,
) -> (Vec<usize>, Vec<CMatrix<T>>) {
    let mut members = Vec::new();
    let mut blocks = Vec::new();
    for (i, e) in elements.iter().enumerate() {
        if let Some(b) = e.block(key) {
            members.push(i);
            blocks.push(b.clone());
        }
    }
    (members, blocks)
}

/// Structure constants of a fibre algebra: table[i].at(k, l) is the
/// coefficient of basis element l in the product of elements i and k.
fn mult_table<T: Scalar>(blocks: &[CMatrix<T>], gram_inv: &CMatrix<T>) -> Vec<CMatrix<T>> {
    let m = blocks.len();
    (0..m)
        .map(|i| {
            let mut t = CMatrix::zeros(m, m);
            for k in 0..m {
                let c = coords(gram_inv, blocks, &blocks[i].mul(&blocks[k]));
                for (l, v) in c.into_iter().enumerate() {
                    t.set(k, l, v);
                }
            }
            t
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn build_point<T: Scalar>(
    cat: &CategoryPresentation<T>,
    point: usize,
    partner: usize,
    a_arrow: &Arrow<T>,
    b_arrow: &Arrow<T>,
    a_basis: &HomBasis<T>,
    b_basis: &HomBasis<T>,
    fourier_elems: &[TwoArrow<T>],
    fourier_hat_elems: &[TwoArrow<T>],
    trace_fns: &[CentralFunction<T>],
    d_rho: &CentralFunction<T>,
) -> HopfResult<HopfPoint<T>> {
    let tol = cat.tol();
    let key_a = FibreKey::new(point, point);
    let key_b = FibreKey::new(partner, partner);
    let fibre_a = fibre_dim(cat, a_arrow, key_a)?;
    let fibre_b = fibre_dim(cat, b_arrow, key_b)?;

    let (a_members, a_blocks) = member_blocks(&a_basis.elements, key_a);
    let (b_members, b_blocks) = member_blocks(&b_basis.elements, key_b);
    let m = a_members.len();
    let mb = b_members.len();
    if m == 0 || mb == 0 {
        return Err(HopfError::Shape(format!(
            "empty commutant fibre at point {point}"
        )));
    }

    let gram_a_inv = lu_inverse(&gram(&a_blocks))?;
    let gram_b_inv = lu_inverse(&gram(&b_blocks))?;
    let mult_a = mult_table(&a_blocks, &gram_a_inv);
    let mult_b = mult_table(&b_blocks, &gram_b_inv);

    // The transform must carry the fibre of A bijectively onto the fibre
    // of B for the pairing to make sense at all.
    if m != mb {
        return Err(HopfError::FourierSingular { point });
    }
    let mut fourier = CMatrix::zeros(mb, m);
    for (col, &i) in a_members.iter().enumerate() {
        let blk = block_or_zero(&fourier_elems[i], key_b, fibre_b);
        for (r, v) in coords(&gram_b_inv, &b_blocks, &blk).into_iter().enumerate() {
            fourier.set(r, col, v);
        }
    }
    let fourier_inv =
        lu_inverse(&fourier).map_err(|_| HopfError::FourierSingular { point })?;

    let mut hat = CMatrix::zeros(m, mb);
    for (col, &j) in b_members.iter().enumerate() {
        let blk = block_or_zero(&fourier_hat_elems[j], key_a, fibre_a);
        for (r, v) in coords(&gram_a_inv, &a_blocks, &blk).into_iter().enumerate() {
            hat.set(r, col, v);
        }
    }
    let antipode = hat.mul(&fourier);

    // Pairing <a_i, b_j> = d⁻¹ tr(a_i ∘ F⁻¹(b_j)), assembled from the trace
    // of products so it stays exactly linear in the coordinates.
    let trace_a: Vec<Cx<T>> = a_members
        .iter()
        .map(|&i| trace_fns[i].values[point])
        .collect();
    let tr_prod = CMatrix::from_fn(m, m, |i, k| {
        csum((0..m).map(|l| mult_a[i].at(k, l) * trace_a[l]))
    });
    let d = d_rho.values[point];
    let pairing = tr_prod.mul(&fourier_inv).scaled(one::<T>() / d);
    let pairing_condition = cond_2(&pairing, tol)?;
    if !pairing_condition.is_finite() {
        return Err(HopfError::DegeneratePairing {
            point,
            condition: as_f64(pairing_condition),
        });
    }
    let degenerate = |_| HopfError::DegeneratePairing {
        point,
        condition: as_f64(pairing_condition),
    };
    let p_inv = lu_inverse(&pairing).map_err(degenerate)?;
    let pairing_t = transpose(&pairing);
    let pt_inv = lu_inverse(&pairing_t).map_err(degenerate)?;

    let unit_a = coords(&gram_a_inv, &a_blocks, &CMatrix::identity(fibre_a));
    let unit_b = coords(&gram_b_inv, &b_blocks, &CMatrix::identity(fibre_b));
    let convolution_unit = mat_vec(&fourier_inv, &unit_b);
    let counit = mat_vec(&pairing, &unit_b);

    // Coproduct: solve Pᵀ c P = M with M[i].at(k, l) = <a_i, b_k ∘ b_l>.
    let mut moment = vec![CMatrix::zeros(mb, mb); m];
    for k in 0..mb {
        for l in 0..mb {
            let w = mat_vec(&pairing, &row(&mult_b[k], l));
            for (i, v) in w.into_iter().enumerate() {
                moment[i].set(k, l, v);
            }
        }
    }
    let coproduct: Vec<CMatrix<T>> = moment
        .iter()
        .map(|mi| pt_inv.mul(mi).mul(&p_inv))
        .collect();
    let mut solve_defect = T::zero();
    for (ci, mi) in coproduct.iter().zip(&moment) {
        solve_defect = solve_defect.max(pairing_t.mul(ci).mul(&pairing).sub(mi).max_abs());
    }
    if solve_defect > tol.sqrt_atol() * pairing_condition.max(T::one()) {
        return Err(HopfError::DegeneratePairing {
            point,
            condition: as_f64(pairing_condition),
        });
    }

    // Convolution through the transform: F(a_i ⋆ a_k) = F(a_i) ∘ F(a_k).
    let mut convolution = Vec::with_capacity(m);
    for i in 0..m {
        let mut tbl = CMatrix::zeros(m, m);
        for k in 0..m {
            let mut w = vec![zero::<T>(); mb];
            for p in 0..mb {
                let fp = fourier.at(p, i);
                if fp == zero() {
                    continue;
                }
                for q in 0..mb {
                    let fq = fp * fourier.at(q, k);
                    if fq == zero() {
                        continue;
                    }
                    for (l, wl) in w.iter_mut().enumerate() {
                        *wl += fq * mult_b[p].at(q, l);
                    }
                }
            }
            let c = mat_vec(&fourier_inv, &w);
            for (l, v) in c.into_iter().enumerate() {
                tbl.set(k, l, v);
            }
        }
        convolution.push(tbl);
    }

    Ok(HopfPoint {
        point,
        partner,
        a_members,
        b_members,
        gram_a_inv,
        gram_b_inv,
        fourier,
        fourier_inv,
        pairing,
        pairing_condition,
        antipode,
        mult_a,
        mult_b,
        coproduct,
        counit,
        convolution,
        unit_a,
        unit_b,
        convolution_unit,
        trace_a,
    })
}

// ---------------------------------------------------------------------------
// Depth two
// ---------------------------------------------------------------------------

/// Ranks of the two multiplication maps A ⊗ B -> End(ρ⊗ρ̄⊗ρ) on one fibre.
#[derive(Debug, Clone)]
pub struct DepthTwoPoint {
    pub point: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    /// Dimension of the endomorphism fibre of ρ⊗ρ̄⊗ρ.
    pub dim_composite: usize,
    pub rank_forward: usize,
    pub rank_reverse: usize,
}

impl DepthTwoPoint {
    /// Both multiplication maps hit the whole composite fibre bijectively.
    pub fn bijective(&self) -> bool {
        self.dim_a * self.dim_b == self.dim_composite
            && self.rank_forward == self.dim_composite
            && self.rank_reverse == self.dim_composite
    }
}

#[derive(Debug, Clone)]
pub struct DepthTwoReport {
    pub points: Vec<DepthTwoPoint>,
}

impl DepthTwoReport {
    pub fn depth_two(&self) -> bool {
        self.points.iter().all(DepthTwoPoint::bijective)
    }
}

fn gram_rank<T: Scalar>(vectors: &[CMatrix<T>], tol: &Tolerance<T>) -> HopfResult<usize> {
    if vectors.is_empty() {
        return Ok(0);
    }
    let eig = hermitian_eig(&gram(vectors), tol)?;
    let top = eig.values.last().copied().unwrap_or(T::zero()).max(T::one());
    Ok(eig
        .values
        .iter()
        .filter(|&&v| v > tol.sqrt_atol() * top)
        .count())
}

/// Check the depth-two property fibre by fibre: the maps a ⊗ b to
/// (1_ρ ⊗ a) ∘ (b ⊗ 1_ρ) and to (b ⊗ 1_ρ) ∘ (1_ρ ⊗ a) must both be
/// bijections onto the endomorphism fibre of ρ⊗ρ̄⊗ρ.
pub fn check_depth_two<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
) -> HopfResult<DepthTwoReport> {
    let d_arrow = h.rho.tensor(cat, &h.a_arrow)?;
    let d_basis = hom_basis(cat, &d_arrow, &d_arrow)?;
    let sig_d = cat.signature(&d_arrow);
    let id_rho = TwoArrow::identity(cat, &h.rho);
    let lifted_a: Vec<TwoArrow<T>> = h
        .a_basis
        .elements
        .iter()
        .map(|e| compose_horizontal(cat, &id_rho, e))
        .collect::<Result<_, _>>()?;
    let lifted_b: Vec<TwoArrow<T>> = h
        .b_basis
        .elements
        .iter()
        .map(|e| compose_horizontal(cat, e, &id_rho))
        .collect::<Result<_, _>>()?;

    let tol = cat.tol();
    let mut points = Vec::with_capacity(h.points.len());
    for p in &h.points {
        let key_d = FibreKey::new(p.partner, p.point);
        let dim_fibre = sig_d.dims.get(&key_d).copied().unwrap_or(0);
        let dim_composite = d_basis
            .elements
            .iter()
            .filter(|e| e.block(key_d).is_some())
            .count();
        let mut forward = Vec::new();
        let mut reverse = Vec::new();
        for &i in &p.a_members {
            for &j in &p.b_members {
                let f = compose_vertical(cat, &lifted_a[i], &lifted_b[j])?;
                let r = compose_vertical(cat, &lifted_b[j], &lifted_a[i])?;
                forward.push(block_or_zero(&f, key_d, dim_fibre));
                reverse.push(block_or_zero(&r, key_d, dim_fibre));
            }
        }
        points.push(DepthTwoPoint {
            point: p.point,
            dim_a: p.dim_a(),
            dim_b: p.dim_b(),
            dim_composite,
            rank_forward: gram_rank(&forward, tol)?,
            rank_reverse: gram_rank(&reverse, tol)?,
        });
    }
    Ok(DepthTwoReport { points })
}

// ---------------------------------------------------------------------------
// Axiom verification
// ---------------------------------------------------------------------------

/// Absolute residuals of the Hopf axioms on one fibre, in the coordinates
/// of the stored bases.
#[derive(Debug, Clone)]
pub struct HopfAxioms<T: Scalar> {
    pub coassociativity: T,
    pub counit_law: T,
    pub coproduct_of_unit: T,
    pub coproduct_multiplicative: T,
    pub counit_multiplicative: T,
    /// Antipode law with the algebra unit as the normalization of η.
    pub antipode_law_algebra_unit: T,
    /// Antipode law with the convolution unit instead; informational, kept
    /// alongside the algebra-unit variant for comparison.
    pub antipode_law_convolution_unit: T,
    pub antipode_antimultiplicative: T,
    pub antipode_squared: T,
    /// Defect of the solved coproduct against the pairing duality.
    pub duality: T,
    pub convolution_unit_law: T,
    pub convolution_associativity: T,
}

impl<T: Scalar> HopfAxioms<T> {
    /// Largest residual among the axioms that must hold. The antipode law
    /// enters through its algebra-unit normalization; the convolution-unit
    /// variant is reported but not folded in.
    pub fn max_residual(&self) -> T {
        [
            self.coassociativity,
            self.counit_law,
            self.coproduct_of_unit,
            self.coproduct_multiplicative,
            self.counit_multiplicative,
            self.antipode_law_algebra_unit,
            self.antipode_antimultiplicative,
            self.antipode_squared,
            self.duality,
            self.convolution_unit_law,
            self.convolution_associativity,
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }

    /// Named residuals for serialization, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, T)> {
        vec![
            ("coassociativity", self.coassociativity),
            ("counit_law", self.counit_law),
            ("coproduct_of_unit", self.coproduct_of_unit),
            ("coproduct_multiplicative", self.coproduct_multiplicative),
            ("counit_multiplicative", self.counit_multiplicative),
            ("antipode_law_algebra_unit", self.antipode_law_algebra_unit),
            (
                "antipode_law_convolution_unit",
                self.antipode_law_convolution_unit,
            ),
            (
                "antipode_antimultiplicative",
                self.antipode_antimultiplicative,
            ),
            ("antipode_squared", self.antipode_squared),
            ("duality", self.duality),
            ("convolution_unit_law", self.convolution_unit_law),
            ("convolution_associativity", self.convolution_associativity),
        ]
    }
}

/// Per-point summary of the reconstructed Hopf fibre.
#[derive(Debug, Clone)]
pub struct HopfPointReport<T: Scalar> {
    pub point: usize,
    pub partner: usize,
    pub dim_a: usize,
    /// Trace of the unit, which depth two forces to equal both dim_a and
    /// the square of the integer scalar of ρ.
    pub d_a: T,
    pub pairing_condition: T,
    pub dimension_integral: bool,
    /// Commutativity defect of the fibre algebra; reported, not an axiom.
    pub commutativity_defect: T,
    /// Cocommutativity defect of the coproduct; reported, not an axiom.
    pub cocommutativity_defect: T,
    pub axioms: HopfAxioms<T>,
}

#[derive(Debug, Clone)]
pub struct HopfReport<T: Scalar> {
    pub depth: DepthTwoReport,
    pub points: Vec<HopfPointReport<T>>,
}

impl<T: Scalar> HopfReport<T> {
    pub fn depth_two(&self) -> bool {
        self.depth.depth_two()
    }

    pub fn max_residual(&self) -> T {
        self.points
            .iter()
            .map(|p| p.axioms.max_residual())
            .fold(T::zero(), T::max)
    }

    pub fn dimension_integral(&self) -> bool {
        self.points.iter().all(|p| p.dimension_integral)
    }
}

/// Verify every Hopf axiom on every fibre and run the depth-two rank check.
pub fn verify_hopf<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &HopfData<T>,
) -> HopfResult<HopfReport<T>> {
    let depth = check_depth_two(cat, h)?;
    let points = h.points.iter().map(|p| point_report(h, p)).collect();
    Ok(HopfReport { depth, points })
}

fn point_report<T: Scalar>(h: &HopfData<T>, p: &HopfPoint<T>) -> HopfPointReport<T> {
    let m = p.dim_a();
    let c = &p.coproduct;
    let mult = &p.mult_a;
    let s = &p.antipode;
    let eps = &p.counit;
    let star = &p.convolution;

    let mut coassociativity = T::zero();
    for i in 0..m {
        for pp in 0..m {
            for q in 0..m {
                for k in 0..m {
                    let lhs = csum((0..m).map(|j| c[i].at(j, k) * c[j].at(pp, q)));
                    let rhs = csum((0..m).map(|t| c[i].at(pp, t) * c[t].at(q, k)));
                    coassociativity = coassociativity.max((lhs - rhs).norm());
                }
            }
        }
    }

    let mut counit_law = T::zero();
    for i in 0..m {
        for k in 0..m {
            let target = if i == k { one::<T>() } else { zero() };
            let left = csum((0..m).map(|j| c[i].at(j, k) * eps[j]));
            let right = csum((0..m).map(|j| c[i].at(k, j) * eps[j]));
            counit_law = counit_law
                .max((left - target).norm())
                .max((right - target).norm());
        }
    }

    let mut delta_unit = CMatrix::zeros(m, m);
    for i in 0..m {
        if p.unit_a[i] != zero() {
            delta_unit = delta_unit.add(&c[i].scaled(p.unit_a[i]));
        }
    }
    let unit_outer = CMatrix::from_fn(m, m, |u, v| p.unit_a[u] * p.unit_a[v]);
    let coproduct_of_unit = delta_unit.sub(&unit_outer).max_abs();

    let mut coproduct_multiplicative = T::zero();
    let mut counit_multiplicative = T::zero();
    for i in 0..m {
        for j in 0..m {
            let w = row(&mult[i], j);
            let mut lhs = CMatrix::zeros(m, m);
            for l in 0..m {
                if w[l] != zero() {
                    lhs = lhs.add(&c[l].scaled(w[l]));
                }
            }
            // Componentwise product of the two coproducts, contracted in
            // three staged passes to keep the loop count at m^4.
            let mut dstage = vec![CMatrix::zeros(m, m); m];
            for (pp, d) in dstage.iter_mut().enumerate() {
                for ss in 0..m {
                    for u in 0..m {
                        d.set(ss, u, csum((0..m).map(|r| c[j].at(r, ss) * mult[pp].at(r, u))));
                    }
                }
            }
            let mut bstage = vec![CMatrix::zeros(m, m); m];
            for (q, b) in bstage.iter_mut().enumerate() {
                for ss in 0..m {
                    for u in 0..m {
                        b.set(
                            ss,
                            u,
                            csum((0..m).map(|pp| c[i].at(pp, q) * dstage[pp].at(ss, u))),
                        );
                    }
                }
            }
            let rhs = CMatrix::from_fn(m, m, |u, v| {
                csum((0..m).flat_map(|q| {
                    (0..m).map(move |ss| (q, ss))
                }).map(|(q, ss)| bstage[q].at(ss, u) * mult[q].at(ss, v)))
            });
            coproduct_multiplicative = coproduct_multiplicative.max(lhs.sub(&rhs).max_abs());

            let value = csum((0..m).map(|l| w[l] * eps[l]));
            counit_multiplicative = counit_multiplicative.max((value - eps[i] * eps[j]).norm());
        }
    }

    let mut antipode_law_algebra_unit = T::zero();
    let mut antipode_law_convolution_unit = T::zero();
    for i in 0..m {
        let mut lhs1 = vec![zero::<T>(); m];
        let mut lhs2 = vec![zero::<T>(); m];
        for j in 0..m {
            for k in 0..m {
                let cc = c[i].at(j, k);
                if cc == zero() {
                    continue;
                }
                for pp in 0..m {
                    let sv = s.at(pp, j);
                    if sv == zero() {
                        continue;
                    }
                    for (l, t) in lhs1.iter_mut().enumerate() {
                        *t += cc * sv * mult[pp].at(k, l);
                    }
                }
                for q in 0..m {
                    let sv = s.at(q, k);
                    if sv == zero() {
                        continue;
                    }
                    for (l, t) in lhs2.iter_mut().enumerate() {
                        *t += cc * sv * mult[j].at(q, l);
                    }
                }
            }
        }
        for l in 0..m {
            let alg = eps[i] * p.unit_a[l];
            let conv = eps[i] * p.convolution_unit[l];
            antipode_law_algebra_unit = antipode_law_algebra_unit
                .max((lhs1[l] - alg).norm())
                .max((lhs2[l] - alg).norm());
            antipode_law_convolution_unit = antipode_law_convolution_unit
                .max((lhs1[l] - conv).norm())
                .max((lhs2[l] - conv).norm());
        }
    }

    let mut antipode_antimultiplicative = T::zero();
    for i in 0..m {
        for j in 0..m {
            let lhs = mat_vec(s, &row(&mult[i], j));
            for l in 0..m {
                let rhs = csum((0..m).flat_map(|pq| (0..m).map(move |qq| (pq, qq))).map(
                    |(pq, qq)| s.at(pq, j) * s.at(qq, i) * mult[pq].at(qq, l),
                ));
                antipode_antimultiplicative =
                    antipode_antimultiplicative.max((lhs[l] - rhs).norm());
            }
        }
    }

    let antipode_squared = s.mul(s).sub(&CMatrix::identity(m)).max_abs();

    let mb = p.dim_b();
    let mut duality = T::zero();
    for k in 0..mb {
        for l in 0..mb {
            let target = mat_vec(&p.pairing, &row(&p.mult_b[k], l));
            for i in 0..m {
                let lhs = csum(
                    (0..m)
                        .flat_map(|j| (0..m).map(move |kk| (j, kk)))
                        .map(|(j, kk)| c[i].at(j, kk) * p.pairing.at(j, k) * p.pairing.at(kk, l)),
                );
                duality = duality.max((lhs - target[i]).norm());
            }
        }
    }

    let mut convolution_unit_law = T::zero();
    for i in 0..m {
        for l in 0..m {
            let target = if i == l { one::<T>() } else { zero() };
            let left = csum((0..m).map(|pp| p.convolution_unit[pp] * star[pp].at(i, l)));
            let right = csum((0..m).map(|q| p.convolution_unit[q] * star[i].at(q, l)));
            convolution_unit_law = convolution_unit_law
                .max((left - target).norm())
                .max((right - target).norm());
        }
    }

    let mut convolution_associativity = T::zero();
    for i in 0..m {
        for j in 0..m {
            let w1 = row(&star[i], j);
            for k in 0..m {
                let w2 = row(&star[j], k);
                for l in 0..m {
                    let z1 = csum((0..m).map(|mm| w1[mm] * star[mm].at(k, l)));
                    let z2 = csum((0..m).map(|mm| w2[mm] * star[i].at(mm, l)));
                    convolution_associativity = convolution_associativity.max((z1 - z2).norm());
                }
            }
        }
    }

    let mut commutativity_defect = T::zero();
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                commutativity_defect =
                    commutativity_defect.max((mult[i].at(j, l) - mult[j].at(i, l)).norm());
            }
        }
    }
    let mut cocommutativity_defect = T::zero();
    for ci in c {
        cocommutativity_defect = cocommutativity_defect.max(ci.sub(&transpose(ci)).max_abs());
    }

    let int_tol = T::real(INTEGRALITY_TOL);
    let dr = h.d_rho.values[p.point].re;
    let da = h.d_a.values[p.point].re;
    let dr_round = dr.round();
    let dimension_integral = (dr - dr_round).abs() <= int_tol
        && (da - dr_round * dr_round).abs() <= int_tol
        && (da - T::real(m as f64)).abs() <= int_tol;

    HopfPointReport {
        point: p.point,
        partner: p.partner,
        dim_a: m,
        d_a: da,
        pairing_condition: p.pairing_condition,
        dimension_integral,
        commutativity_defect,
        cocommutativity_defect,
        axioms: HopfAxioms {
            coassociativity,
            counit_law,
            coproduct_of_unit,
            coproduct_multiplicative,
            counit_multiplicative,
            antipode_law_algebra_unit,
            antipode_law_convolution_unit,
            antipode_antimultiplicative,
            antipode_squared,
            duality,
            convolution_unit_law,
            convolution_associativity,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_presentation, PresentationBuilder, RawFibre};
    use crate::numerics::SplitMix64;

    type P = CategoryPresentation<f64>;

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    fn load(name: &str) -> P {
        let path = format!("{}/../../data/{}", env!("CARGO_MANIFEST_DIR"), name);
        let text = std::fs::read_to_string(path).unwrap();
        load_presentation(&text, tol()).unwrap()
    }

    fn rho_of(cat: &P) -> Arrow<f64> {
        Arrow::generator(cat, cat.gen_id("rho").unwrap())
    }

    fn single_fibre(d: usize) -> P {
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["pt"]);
        b.arrow("rho", "A", "A", vec![RawFibre::plain("pt", "pt", d)]);
        b.build().unwrap()
    }

    fn crossed_pair() -> P {
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["a1", "a2"]);
        b.object("B", &["b1", "b2"]);
        b.arrow(
            "rho",
            "B",
            "A",
            vec![RawFibre::plain("b2", "a1", 1), RawFibre::plain("b1", "a2", 1)],
        );
        b.build().unwrap()
    }

    fn random_end(cat: &P, arrow: &Arrow<f64>, seed: u64) -> TwoArrow<f64> {
        let basis = hom_basis(cat, arrow, arrow).unwrap();
        let mut rng = SplitMix64::new(seed);
        let mut acc = TwoArrow::zero(arrow.clone(), arrow.clone());
        for e in &basis.elements {
            acc = acc.add(&e.scaled(rng.next_complex_gaussian()));
        }
        acc
    }

    #[test]
    fn unit_arrow_is_irreducible_with_trivial_hopf_data() {
        let cat = load("trivial.json");
        let unit = Arrow::unit(cat.object_id("A").unwrap());
        assert!(check_irreducible(&cat, &unit).unwrap());
        let h = HopfData::new(&cat, &unit).unwrap();
        assert_eq!(h.points.len(), 1);
        let p = &h.points[0];
        assert_eq!(p.dim_a(), 1);
        assert!((p.pairing.at(0, 0) - one::<f64>()).norm() < 1e-12);
        assert!((p.counit[0] - one::<f64>()).norm() < 1e-12);
        assert!((p.antipode.at(0, 0) - one::<f64>()).norm() < 1e-12);
        let report = verify_hopf(&cat, &h).unwrap();
        assert!(report.depth_two());
        assert_eq!(report.depth.points[0].dim_composite, 1);
        assert!(report.max_residual() < 1e-12);
    }

    #[test]
    fn dimension_one_generator_matches_the_scalar_oracle() {
        let cat = single_fibre(1);
        let rho = rho_of(&cat);
        assert!(check_irreducible(&cat, &rho).unwrap());
        let h = HopfData::new(&cat, &rho).unwrap();
        let p = &h.points[0];
        // Everything collapses to scalars: the transform, pairing, antipode
        // and convolution are all the number 1 in the canonical basis.
        assert!((p.fourier.at(0, 0) - one::<f64>()).norm() < 1e-12);
        assert!((p.pairing.at(0, 0) - one::<f64>()).norm() < 1e-12);
        assert!((p.coproduct[0].at(0, 0) - one::<f64>()).norm() < 1e-12);
        assert!((p.convolution[0].at(0, 0) - one::<f64>()).norm() < 1e-12);
        assert!((p.trace_a[0] - one::<f64>()).norm() < 1e-12);
        let x = random_end(&cat, &h.a_arrow, 7);
        let fx = fourier(&cat, &h, &x).unwrap();
        // On a one-dimensional fibre the transform is the identity map.
        let moved = fourier_inverse(&cat, &h, &fx).unwrap();
        assert!(moved.sub(&x).max_abs() < 1e-12);
        let report = verify_hopf(&cat, &h).unwrap();
        assert!(report.max_residual() < 1e-12);
        assert!(report.points[0].axioms.antipode_law_convolution_unit < 1e-12);
        assert!(report.dimension_integral());
    }

    #[test]
    fn matrix_fibre_without_symmetry_is_reducible() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        assert!(!check_irreducible(&cat, &rho).unwrap());
        match HopfData::new(&cat, &rho) {
            Err(HopfError::NotIrreducible { point: 0, end_dim: 4 }) => {}
            other => panic!("expected the irreducibility gate, got {other:?}"),
        }
    }

    #[test]
    fn rejects_an_unbalanced_generator() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        assert!(matches!(
            check_irreducible(&cat, &rho),
            Err(HopfError::NotBalanced { .. })
        ));
    }

    #[test]
    fn rejects_missing_support_on_either_side() {
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["a1", "a2"]);
        b.object("B", &["b1"]);
        b.arrow("rho", "B", "A", vec![RawFibre::plain("b1", "a1", 1)]);
        let cat = b.build().unwrap();
        match check_irreducible(&cat, &rho_of(&cat)) {
            Err(HopfError::SupportNotFull { object, point }) => {
                assert_eq!(object, "A");
                assert_eq!(point, "a2");
            }
            other => panic!("expected a support error, got {other:?}"),
        }

        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["a1"]);
        b.object("B", &["b1", "b2"]);
        b.arrow("rho", "B", "A", vec![RawFibre::plain("b1", "a1", 1)]);
        let cat = b.build().unwrap();
        match check_irreducible(&cat, &rho_of(&cat)) {
            Err(HopfError::SupportNotFull { object, point }) => {
                assert_eq!(object, "B");
                assert_eq!(point, "b2");
            }
            other => panic!("expected a support error, got {other:?}"),
        }
    }

    #[test]
    fn heisenberg3_builds_nine_dimensional_abelian_fibres() {
        let cat = load("heisenberg3.json");
        let rho = rho_of(&cat);
        assert!(check_irreducible(&cat, &rho).unwrap());
        let h = HopfData::new(&cat, &rho).unwrap();
        assert_eq!(h.points.len(), 1);
        let p = &h.points[0];
        assert_eq!(p.dim_a(), 9);
        assert_eq!(p.dim_b(), 9);
        assert!((h.d_rho.values[0].re - 3.0).abs() < 1e-10);
        assert!((h.d_a.values[0].re - 9.0).abs() < 1e-10);
        // The central trace sends the unit to d_a on every point.
        let tr = trace_a(&cat, &h, &TwoArrow::identity(&cat, &h.a_arrow)).unwrap();
        assert!((tr.values[0] - h.d_a.values[0]).norm() < 1e-10);
        let tr = trace_b(&cat, &h, &TwoArrow::identity(&cat, &h.b_arrow)).unwrap();
        assert!((tr.values[0] - h.d_b.values[0]).norm() < 1e-10);
    }

    #[test]
    fn heisenberg3_fourier_inverts_and_parseval_holds() {
        let cat = load("heisenberg3.json");
        let h = HopfData::new(&cat, &rho_of(&cat)).unwrap();
        let x = random_end(&cat, &h.a_arrow, 11);
        let y = random_end(&cat, &h.a_arrow, 12);
        let round = fourier_inverse(&cat, &h, &fourier(&cat, &h, &x).unwrap()).unwrap();
        assert!(round.sub(&x).max_abs() < 1e-9);
        // The square of the antipode is the identity, globally and in
        // coordinates.
        let twice = antipode(&cat, &h, &antipode(&cat, &h, &x).unwrap()).unwrap();
        assert!(twice.sub(&x).max_abs() < 1e-8);
        let s = &h.points[0].antipode;
        assert!(s.mul(s).sub(&CMatrix::identity(9)).max_abs() < 1e-8);
        assert!(parseval_defect(&cat, &h, &x, &y).unwrap() < 1e-8);
    }

    #[test]
    fn heisenberg3_pairing_matches_the_composition_route() {
        let cat = load("heisenberg3.json");
        let h = HopfData::new(&cat, &rho_of(&cat)).unwrap();
        let p = &h.points[0];
        let d = h.d_rho.values[0];
        // Independent route: pair through global 2-arrow compositions and
        // the Markov trace instead of the stored coordinate matrices.
        for (jl, &j) in p.b_members.iter().enumerate() {
            let back = fourier_inverse(&cat, &h, &h.b_basis.elements[j]).unwrap();
            for (il, &i) in p.a_members.iter().enumerate() {
                let prod = compose_vertical(&cat, &h.a_basis.elements[i], &back).unwrap();
                let tr = trace_a(&cat, &h, &prod).unwrap();
                let direct = tr.values[0] / d;
                assert!(
                    (direct - p.pairing.at(il, jl)).norm() < 1e-9,
                    "pairing entry ({il}, {jl}) disagrees"
                );
            }
        }
        assert!(p.pairing_condition.is_finite());
        assert!(p.pairing_condition >= 1.0);
    }

    #[test]
    fn heisenberg3_hopf_axioms_hold() {
        let cat = load("heisenberg3.json");
        let h = HopfData::new(&cat, &rho_of(&cat)).unwrap();
        let report = verify_hopf(&cat, &h).unwrap();
        assert!(report.depth_two());
        let d = &report.depth.points[0];
        assert_eq!(d.dim_composite, 81);
        assert_eq!(d.rank_forward, 81);
        assert_eq!(d.rank_reverse, 81);
        let pt = &report.points[0];
        assert!(pt.axioms.max_residual() < 1e-7, "axioms: {:?}", pt.axioms);
        assert!(pt.axioms.antipode_squared < 1e-8);
        assert!(pt.dimension_integral);
        // This fibre algebra is abelian, so the coproduct must come out
        // cocommutative as well; both facts are reported as defects.
        assert!(pt.commutativity_defect < 1e-9);
        assert!(pt.cocommutativity_defect < 1e-7);
    }

    #[test]
    fn heisenberg2_hopf_axioms_hold() {
        let cat = load("heisenberg2.json");
        let h = HopfData::new(&cat, &rho_of(&cat)).unwrap();
        assert_eq!(h.points[0].dim_a(), 4);
        assert!((h.d_a.values[0].re - 4.0).abs() < 1e-10);
        let report = verify_hopf(&cat, &h).unwrap();
        assert!(report.depth_two());
        assert!(report.max_residual() < 1e-7);
        assert!(report.dimension_integral());
    }

    #[test]
    fn convolution_unit_and_associativity_through_global_routes() {
        let cat = load("heisenberg3.json");
        let h = HopfData::new(&cat, &rho_of(&cat)).unwrap();
        let u = convolution_unit(&cat, &h).unwrap();
        let x = random_end(&cat, &h.a_arrow, 21);
        let y = random_end(&cat, &h.a_arrow, 22);
        let z = random_end(&cat, &h.a_arrow, 23);
        assert!(convolution(&cat, &h, &x, &u).unwrap().sub(&x).max_abs() < 1e-9);
        assert!(convolution(&cat, &h, &u, &x).unwrap().sub(&x).max_abs() < 1e-9);
        let left = convolution(&cat, &h, &convolution(&cat, &h, &x, &y).unwrap(), &z).unwrap();
        let right = convolution(&cat, &h, &x, &convolution(&cat, &h, &y, &z).unwrap()).unwrap();
        assert!(left.sub(&right).max_abs() < 1e-9);
    }

    #[test]
    fn coproduct_and_counit_of_the_identity() {
        for cat in [load("heisenberg3.json"), single_fibre(1)] {
            let h = HopfData::new(&cat, &rho_of(&cat)).unwrap();
            let id = TwoArrow::identity(&cat, &h.a_arrow);
            for (point, d) in coproduct(&cat, &h, &id).unwrap() {
                let p = h.point(point).unwrap();
                let outer =
                    CMatrix::from_fn(p.dim_a(), p.dim_a(), |u, v| p.unit_a[u] * p.unit_a[v]);
                assert!(d.sub(&outer).max_abs() < 1e-9);
            }
            let eps = counit(&cat, &h, &id).unwrap();
            for v in &eps.values {
                assert!((*v - one::<f64>()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn crossed_two_point_base_gives_identical_fibre_reports() {
        let cat = crossed_pair();
        let rho = rho_of(&cat);
        let h = HopfData::new(&cat, &rho).unwrap();
        assert_eq!(h.theta.get(&0), Some(&1));
        assert_eq!(h.theta.get(&1), Some(&0));
        assert_eq!(h.points.len(), 2);
        let (p0, p1) = (&h.points[0], &h.points[1]);
        assert_eq!(p0.partner, 1);
        assert_eq!(p1.partner, 0);
        // Identical fibre data must produce identical coordinate models.
        assert!(p0.pairing.sub(&p1.pairing).max_abs() < 1e-12);
        assert!(p0.antipode.sub(&p1.antipode).max_abs() < 1e-12);
        assert!((p0.counit[0] - p1.counit[0]).norm() < 1e-12);
        let report = verify_hopf(&cat, &h).unwrap();
        assert!(report.depth_two());
        assert!(report.max_residual() < 1e-12);
        let x = random_end(&cat, &h.a_arrow, 5);
        let y = random_end(&cat, &h.a_arrow, 6);
        assert!(parseval_defect(&cat, &h, &x, &y).unwrap() < 1e-10);
    }

    #[test]
    fn transform_rejects_a_wrongly_shaped_input() {
        let cat = load("heisenberg3.json");
        let rho = rho_of(&cat);
        let h = HopfData::new(&cat, &rho).unwrap();
        let wrong = TwoArrow::identity(&cat, &rho);
        assert!(matches!(
            fourier(&cat, &h, &wrong),
            Err(HopfError::Shape(_))
        ));
        assert!(matches!(
            fourier_inverse(&cat, &h, &wrong),
            Err(HopfError::Shape(_))
        ));
    }
}
