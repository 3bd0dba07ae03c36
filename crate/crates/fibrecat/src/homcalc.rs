//! The 2-arrow calculus: Hom spaces, vertical and horizontal composition,
//! the involution, fibre evaluation, inner products, supports, central
//! transport along balanced arrows, direct sums, and subobject splitting.
//!
//! A 2-arrow stores one complex block per fibre key; absent keys are zero.
//! Horizontal composition works against the canonical chain layout fixed in
//! the model module: the composite block at (t, s) is assembled from the
//! split of each canonical tuple into (prefix tuple, middle point, suffix
//! tuple). Because that layout is defined by a global right fold rather
//! than per-association bracketing, ⊗ of 2-arrows is strictly associative
//! and the interchange law holds up to roundoff only.

use crate::model::{
    Arrow, CategoryPresentation, FibreKey, ModelError, ObjectId, Signature,
};
use crate::numerics::{
    hermitian_eig, op_norm, zero, CMatrix, Cx, NumError, Scalar,
};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalcError {
    #[error("composition mismatch: {context}")]
    CompositionMismatch { context: String },
    #[error("arrows are not parallel: '{left}' vs '{right}'")]
    NotParallel { left: String, right: String },
    #[error("unknown point index {index} (base has {count} points)")]
    UnknownPoint { index: usize, count: usize },
    #[error("2-arrow block at ({tgt}, {src}) is not equivariant (defect {defect:e})")]
    NotEquivariant { tgt: usize, src: usize, defect: f64 },
    #[error("2-arrow block shape mismatch: {0}")]
    BlockShape(String),
    #[error("not a projection (defect {0:e})")]
    NotProjection(f64),
    #[error("arrow is not centrally balanced: {0}")]
    NotBalanced(String),
    #[error("solution does not match the arrow: {0}")]
    SolutionArrowMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type CalcResult<V> = Result<V, CalcError>;

/// Which leg of an arrow a support or inner product refers to: `Left` values
/// live on the source object, `Right` values on the target object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A 2-arrow between parallel 1-arrows: per fibre key (target point, source
/// point), a block of shape dim_target(key) × dim_source(key). Absent keys
/// are zero blocks.
#[derive(Debug, Clone)]
pub struct TwoArrow<T: Scalar> {
    source: Arrow<T>,
    target: Arrow<T>,
    blocks: BTreeMap<FibreKey, CMatrix<T>>,
}

impl<T: Scalar> TwoArrow<T> {
    pub fn zero(source: Arrow<T>, target: Arrow<T>) -> Self {
        TwoArrow {
            source,
            target,
            blocks: BTreeMap::new(),
        }
    }

    pub fn identity(cat: &CategoryPresentation<T>, arrow: &Arrow<T>) -> Self {
        let sig = cat.signature(arrow);
        let blocks = sig
            .dims
            .iter()
            .map(|(&k, &d)| (k, CMatrix::identity(d)))
            .collect();
        TwoArrow {
            source: arrow.clone(),
            target: arrow.clone(),
            blocks,
        }
    }

    /// Assemble without equivariance validation; internal composites stay
    /// equivariant by construction. Zero-size and missing blocks are dropped.
    pub(crate) fn assemble(
        source: Arrow<T>,
        target: Arrow<T>,
        blocks: BTreeMap<FibreKey, CMatrix<T>>,
    ) -> Self {
        let blocks = blocks
            .into_iter()
            .filter(|(_, b)| b.rows() > 0 && b.cols() > 0)
            .collect();
        TwoArrow {
            source,
            target,
            blocks,
        }
    }

    /// Build from explicit blocks, validating shapes and equivariance.
    /// This is the entry point for untrusted (file or user) data.
    pub fn from_blocks(
        cat: &CategoryPresentation<T>,
        source: Arrow<T>,
        target: Arrow<T>,
        blocks: BTreeMap<FibreKey, CMatrix<T>>,
    ) -> CalcResult<Self> {
        let t = TwoArrow::assemble(source, target, blocks);
        t.validate(cat)?;
        Ok(t)
    }

    pub fn source(&self) -> &Arrow<T> {
        &self.source
    }

    pub fn target(&self) -> &Arrow<T> {
        &self.target
    }

    pub fn blocks(&self) -> &BTreeMap<FibreKey, CMatrix<T>> {
        &self.blocks
    }

    pub fn block(&self, key: FibreKey) -> Option<&CMatrix<T>> {
        self.blocks.get(&key)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.max_abs() == T::zero())
    }

    pub fn adjoint(&self) -> Self {
        TwoArrow {
            source: self.target.clone(),
            target: self.source.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(&k, b)| (k, b.adjoint()))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.source, other.source);
        debug_assert_eq!(self.target, other.target);
        let mut blocks = self.blocks.clone();
        for (&k, b) in &other.blocks {
            match blocks.get_mut(&k) {
                Some(existing) => *existing = existing.add(b),
                None => {
                    blocks.insert(k, b.clone());
                }
            }
        }
        TwoArrow {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-Cx::<T>::new(T::one(), T::zero())))
    }

    pub fn scaled(&self, s: Cx<T>) -> Self {
        TwoArrow {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks: self.blocks.iter().map(|(&k, b)| (k, b.scaled(s))).collect(),
        }
    }

    /// Summed fibre Hilbert-Schmidt inner product `Σ_key tr(other* self)`.
    pub fn hs_inner(&self, other: &Self) -> Cx<T> {
        let mut acc = zero::<T>();
        for (k, b) in &self.blocks {
            if let Some(o) = other.blocks.get(k) {
                acc += b.hs_inner(o);
            }
        }
        acc
    }

    pub fn frob_norm(&self) -> T {
        self.blocks
            .values()
            .map(|b| {
                let n = b.frob_norm();
                n * n
            })
            .fold(T::zero(), |a, x| a + x)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.blocks
            .values()
            .map(CMatrix::max_abs)
            .fold(T::zero(), T::max)
    }

    /// Max-entry distance over the union of keys.
    pub fn dist_max(&self, other: &Self) -> T {
        let mut d = T::zero();
        for (k, b) in &self.blocks {
            d = d.max(match other.blocks.get(k) {
                Some(o) => b.dist_max(o),
                None => b.max_abs(),
            });
        }
        for (k, o) in &other.blocks {
            if !self.blocks.contains_key(k) {
                d = d.max(o.max_abs());
            }
        }
        d
    }

    /// Max fibre operator norm.
    pub fn op_norm(&self, tol: &crate::numerics::Tolerance<T>) -> CalcResult<T> {
        let mut n = T::zero();
        for b in self.blocks.values() {
            n = n.max(op_norm(b, tol)?);
        }
        Ok(n)
    }

    /// Check block shapes against the signatures and equivariance against
    /// every group element.
    pub fn validate(&self, cat: &CategoryPresentation<T>) -> CalcResult<()> {
        let ssig = cat.signature(&self.source);
        let tsig = cat.signature(&self.target);
        if ssig.source != tsig.source || ssig.target != tsig.target {
            return Err(CalcError::NotParallel {
                left: self.source.display(cat),
                right: self.target.display(cat),
            });
        }
        for (&k, b) in &self.blocks {
            let (dt, ds) = (tsig.dim(k), ssig.dim(k));
            if b.rows() != dt || b.cols() != ds {
                return Err(CalcError::BlockShape(format!(
                    "block at ({}, {}) is {}x{}, signatures give {}x{}",
                    k.tgt,
                    k.src,
                    b.rows(),
                    b.cols(),
                    dt,
                    ds
                )));
            }
        }
        let scale = self.max_abs().max(T::one());
        for g in 0..cat.group_order() {
            for (&k, b) in &self.blocks {
                let ut = tsig.rep(g, k).expect("target rep");
                let us = ssig.rep(g, k).expect("source rep");
                let defect = ut.mul(b).dist_max(&b.mul(us));
                if defect > cat.tol().sqrt_atol() * scale {
                    return Err(CalcError::NotEquivariant {
                        tgt: k.tgt,
                        src: k.src,
                        defect: defect.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Canonical chain layout: dimension tables, enumeration, and splitting
// ---------------------------------------------------------------------------

/// Per-atom signatures of a chain plus the object at each cut position
/// (position k sits before atom k; position n is the chain source).
struct ChainProfile<T: Scalar> {
    sigs: Vec<Arc<Signature<T>>>,
    cut_objects: Vec<ObjectId>,
}

impl<T: Scalar> ChainProfile<T> {
    fn new(cat: &CategoryPresentation<T>, chain: &Arrow<T>) -> Self {
        let n = chain.atoms().len();
        let mut sigs = Vec::with_capacity(n);
        let mut cut_objects = Vec::with_capacity(n + 1);
        let mut rest = chain.clone();
        cut_objects.push(chain.target());
        for _ in 0..n {
            let (head, tail) = rest.split_head(cat).expect("length checked");
            cut_objects.push(head.source());
            sigs.push(cat.signature(&head));
            rest = tail;
        }
        ChainProfile { sigs, cut_objects }
    }

    fn len(&self) -> usize {
        self.sigs.len()
    }

    /// table[k][m] = fibre dimension of the suffix chain starting at atom k,
    /// at key (m, s). Index m runs over the base of the object at cut k.
    fn suffix_dims(&self, cat: &CategoryPresentation<T>, s: usize) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut table = vec![Vec::new(); n + 1];
        let last_points = cat.point_count(self.cut_objects[n]);
        table[n] = (0..last_points).map(|m| usize::from(m == s)).collect();
        for k in (0..n).rev() {
            let points = cat.point_count(self.cut_objects[k]);
            let next_points = cat.point_count(self.cut_objects[k + 1]);
            table[k] = (0..points)
                .map(|m| {
                    (0..next_points)
                        .map(|m2| self.sigs[k].dim(FibreKey::new(m, m2)) * table[k + 1][m2])
                        .sum()
                })
                .collect();
        }
        table
    }

    /// Rank of an interleaved tuple within the canonical enumeration of the
    /// suffix chain starting at atom k, at key (m, _); `table` must come from
    /// `suffix_dims` with the matching source point.
    fn rank(&self, table: &[Vec<usize>], k: usize, m: usize, tuple: &[usize]) -> usize {
        let n = self.len();
        if k == n {
            return 0;
        }
        if k == n - 1 {
            return tuple[0];
        }
        let (w, i) = (tuple[0], tuple[1]);
        let mut off = 0;
        for m2 in 0..w {
            off += self.sigs[k].dim(FibreKey::new(m, m2)) * table[k + 1][m2];
        }
        off + i * table[k + 1][w] + self.rank(table, k + 1, w, &tuple[2..])
    }

    /// Visit all canonical tuples of the suffix chain starting at atom k at
    /// key (m, s-of-table), in enumeration order.
    fn visit(
        &self,
        table: &[Vec<usize>],
        k: usize,
        m: usize,
        prefix: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        let n = self.len();
        if k == n {
            if table[n][m] == 1 {
                f(prefix);
            }
            return;
        }
        if k == n - 1 {
            // last atom: bare fibre index against the fixed source point
            let s = table[n]
                .iter()
                .position(|&v| v == 1)
                .expect("source point marked");
            for i in 0..self.sigs[k].dim(FibreKey::new(m, s)) {
                prefix.push(i);
                f(prefix);
                prefix.pop();
            }
            return;
        }
        let next_points = table[k + 1].len();
        for w in 0..next_points {
            if table[k + 1][w] == 0 {
                continue;
            }
            for i in 0..self.sigs[k].dim(FibreKey::new(m, w)) {
                prefix.push(w);
                prefix.push(i);
                self.visit(table, k + 1, w, prefix, f);
                prefix.pop();
                prefix.pop();
            }
        }
    }
}

/// For each canonical index of `chain` at `key`, the decomposition into
/// (prefix index, middle point, suffix index) across the cut after the first
/// `p` atoms. Prefix indices refer to the canonical layout of the first p
/// atoms at (key.tgt, middle), suffix indices to the last n−p atoms at
/// (middle, key.src).
pub(crate) fn split_table<T: Scalar>(
    cat: &CategoryPresentation<T>,
    chain: &Arrow<T>,
    p: usize,
    key: FibreKey,
) -> Vec<(usize, usize, usize)> {
    let n = chain.atoms().len();
    debug_assert!(p <= n);
    let profile = ChainProfile::new(cat, chain);
    let table = profile.suffix_dims(cat, key.src);
    if table[0].get(key.tgt).copied().unwrap_or(0) == 0 {
        return Vec::new();
    }

    let (l_arrow, r_arrow) = chain.split_at(cat, p);
    let l_profile = ChainProfile::new(cat, &l_arrow);
    let r_profile = ChainProfile::new(cat, &r_arrow);
    let mid_points = cat.point_count(l_arrow.source());
    // prefix rank tables per candidate middle point
    let l_tables: Vec<Vec<Vec<usize>>> = (0..mid_points)
        .map(|m| l_profile.suffix_dims(cat, m))
        .collect();
    let r_table = r_profile.suffix_dims(cat, key.src);

    let mut out = Vec::with_capacity(table[0][key.tgt]);
    let mut prefix = Vec::new();
    profile.visit(&table, 0, key.tgt, &mut prefix, &mut |tuple| {
        let (l_idx, mid, r_idx) = if n == 0 {
            (0, key.tgt, 0)
        } else if p == 0 {
            (0, key.tgt, r_profile.rank(&r_table, 0, key.tgt, tuple))
        } else if p == n {
            (
                l_profile.rank(&l_tables[key.src], 0, key.tgt, tuple),
                key.src,
                0,
            )
        } else {
            let mid = tuple[2 * (p - 1)];
            let mut l_tuple: Vec<usize> = tuple[..2 * (p - 1)].to_vec();
            l_tuple.push(tuple[2 * p - 1]);
            let r_tuple = &tuple[2 * p..];
            (
                l_profile.rank(&l_tables[mid], 0, key.tgt, &l_tuple),
                mid,
                r_profile.rank(&r_table, 0, mid, r_tuple),
            )
        };
        out.push((l_idx, mid, r_idx));
    });
    debug_assert_eq!(out.len(), table[0][key.tgt]);
    out
}

// ---------------------------------------------------------------------------
// The two compositions and friends
// ---------------------------------------------------------------------------

/// Vertical composition s ∘ t (s after t), fibrewise matrix product.
pub fn compose_vertical<T: Scalar>(
    cat: &CategoryPresentation<T>,
    s: &TwoArrow<T>,
    t: &TwoArrow<T>,
) -> CalcResult<TwoArrow<T>> {
    if s.source != t.target {
        return Err(CalcError::CompositionMismatch {
            context: format!(
                "vertical: source '{}' of the left factor differs from target '{}' of the right",
                s.source.display(cat),
                t.target.display(cat)
            ),
        });
    }
    let mut blocks = BTreeMap::new();
    for (&k, sb) in &s.blocks {
        if let Some(tb) = t.blocks.get(&k) {
            blocks.insert(k, sb.mul(tb));
        }
    }
    Ok(TwoArrow::assemble(t.source.clone(), s.target.clone(), blocks))
}

/// Horizontal composition s ⊗ t against the canonical chain layout.
pub fn compose_horizontal<T: Scalar>(
    cat: &CategoryPresentation<T>,
    s: &TwoArrow<T>,
    t: &TwoArrow<T>,
) -> CalcResult<TwoArrow<T>> {
    let target = s.target.tensor(cat, &t.target)?;
    let source = s.source.tensor(cat, &t.source)?;
    let tsig = cat.signature(&target);
    let ssig = cat.signature(&source);
    let p_t = s.target.atoms().len();
    let p_s = s.source.atoms().len();
    let mid_obj = s.source.source();
    let mid_points = cat.point_count(mid_obj);

    let mut blocks = BTreeMap::new();
    for (&key, &td) in &tsig.dims {
        let Some(&sd) = ssig.dims.get(&key) else {
            continue;
        };
        let rows = split_table(cat, &target, p_t, key);
        let cols = split_table(cat, &source, p_s, key);
        debug_assert_eq!(rows.len(), td);
        debug_assert_eq!(cols.len(), sd);
        let mut rows_by_mid: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); mid_points];
        for (idx, &(l, m, r)) in rows.iter().enumerate() {
            rows_by_mid[m].push((idx, l, r));
        }
        let mut cols_by_mid: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); mid_points];
        for (idx, &(l, m, r)) in cols.iter().enumerate() {
            cols_by_mid[m].push((idx, l, r));
        }
        let mut out = CMatrix::zeros(td, sd);
        let mut touched = false;
        for m in 0..mid_points {
            let Some(sb) = s.blocks.get(&FibreKey::new(key.tgt, m)) else {
                continue;
            };
            let Some(tb) = t.blocks.get(&FibreKey::new(m, key.src)) else {
                continue;
            };
            touched = true;
            for &(ri, rl, rr) in &rows_by_mid[m] {
                for &(ci, cl, cr) in &cols_by_mid[m] {
                    out.set(ri, ci, sb.at(rl, cl) * tb.at(rr, cr));
                }
            }
        }
        if touched {
            blocks.insert(key, out);
        }
    }
    Ok(TwoArrow::assemble(source, target, blocks))
}

// ---------------------------------------------------------------------------
// Central functions
// ---------------------------------------------------------------------------

/// An element of End(ι_A): one complex value per base point of the object.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralFunction<T: Scalar> {
    pub object: ObjectId,
    pub values: Vec<Cx<T>>,
}

impl<T: Scalar> CentralFunction<T> {
    pub fn constant(cat: &CategoryPresentation<T>, object: ObjectId, v: Cx<T>) -> Self {
        CentralFunction {
            object,
            values: vec![v; cat.point_count(object)],
        }
    }

    pub fn one(cat: &CategoryPresentation<T>, object: ObjectId) -> Self {
        Self::constant(cat, object, Cx::new(T::one(), T::zero()))
    }

    pub fn from_end_unit(
        cat: &CategoryPresentation<T>,
        t: &TwoArrow<T>,
    ) -> CalcResult<Self> {
        let object = t.source().source();
        if !t.source().is_unit() || !t.target().is_unit() {
            return Err(CalcError::SolutionArrowMismatch(format!(
                "expected an endomorphism of a unit arrow, got '{}' → '{}'",
                t.source().display(cat),
                t.target().display(cat)
            )));
        }
        let values = (0..cat.point_count(object))
            .map(|i| {
                t.block(FibreKey::new(i, i))
                    .map(|b| b.at(0, 0))
                    .unwrap_or_else(zero)
            })
            .collect();
        Ok(CentralFunction { object, values })
    }

    pub fn to_two_arrow(&self) -> TwoArrow<T> {
        let unit = Arrow::unit(self.object);
        let blocks = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut b = CMatrix::zeros(1, 1);
                b.set(0, 0, v);
                (FibreKey::new(i, i), b)
            })
            .collect();
        TwoArrow::assemble(unit.clone(), unit, blocks)
    }

    pub fn pointwise_mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.object, other.object);
        CentralFunction {
            object: self.object,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        }
    }

    pub fn dist_max(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    pub fn min_real(&self) -> T {
        self.values
            .iter()
            .map(|v| v.re)
            .fold(T::infinity(), T::min)
    }
}

// ---------------------------------------------------------------------------
// Hom spaces
// ---------------------------------------------------------------------------

/// Deterministic orthonormal basis of Hom(source, target): per-key averaged
/// coordinate matrices, modified Gram-Schmidt in coordinate order, rank cut
/// at √atol. Every element is supported on a single fibre key.
#[derive(Debug, Clone)]
pub struct HomBasis<T: Scalar> {
    pub source: Arrow<T>,
    pub target: Arrow<T>,
    pub elements: Vec<TwoArrow<T>>,
}

fn ensure_parallel<T: Scalar>(
    cat: &CategoryPresentation<T>,
    a: &Arrow<T>,
    b: &Arrow<T>,
) -> CalcResult<()> {
    if a.source() != b.source() || a.target() != b.target() {
        return Err(CalcError::NotParallel {
            left: a.display(cat),
            right: b.display(cat),
        });
    }
    Ok(())
}

pub fn hom_basis<T: Scalar>(
    cat: &CategoryPresentation<T>,
    source: &Arrow<T>,
    target: &Arrow<T>,
) -> CalcResult<HomBasis<T>> {
    ensure_parallel(cat, source, target)?;
    let ssig = cat.signature(source);
    let tsig = cat.signature(target);
    let order = cat.group_order();
    let inv_order = T::one() / T::real(order as f64);
    let cutoff = cat.tol().sqrt_atol();
    let mut elements = Vec::new();

    for (&key, &ds) in &ssig.dims {
        let Some(&dt) = tsig.dims.get(&key) else {
            continue;
        };
        // averaged coordinate matrices: P(E_ij) = (1/|G|) Σ_g u_t(g) E_ij u_s(g)*
        // assembled column-by-column: u E_ij u* = outer(u_t col i, u_s col j).
        let mut kept: Vec<CMatrix<T>> = Vec::new();
        for i in 0..dt {
            for j in 0..ds {
                let mut avg = CMatrix::zeros(dt, ds);
                for g in 0..order {
                    let ut = tsig.rep(g, key).expect("rep present");
                    let us = ssig.rep(g, key).expect("rep present");
                    for k in 0..dt {
                        let f = ut.at(k, i).scale(inv_order);
                        for l in 0..ds {
                            avg.add_at(k, l, f * us.at(l, j).conj());
                        }
                    }
                }
                // modified Gram-Schmidt with one re-orthogonalization pass
                let mut v = avg;
                for _ in 0..2 {
                    for b in &kept {
                        let c = v.hs_inner(b);
                        v = v.sub(&b.scaled(c));
                    }
                }
                let norm = v.frob_norm();
                if norm > cutoff {
                    kept.push(v.scaled(Cx::new(T::one() / norm, T::zero())));
                }
            }
        }
        for b in kept {
            let mut blocks = BTreeMap::new();
            blocks.insert(key, b);
            elements.push(TwoArrow::assemble(source.clone(), target.clone(), blocks));
        }
    }
    Ok(HomBasis {
        source: source.clone(),
        target: target.clone(),
        elements,
    })
}

/// Dimension of Hom(source, target) by the character formula
/// Σ_keys (1/|G|) Σ_g χ_target(g) · conj(χ_source(g)); an independent route
/// that never materializes a basis.
pub fn hom_dim<T: Scalar>(
    cat: &CategoryPresentation<T>,
    source: &Arrow<T>,
    target: &Arrow<T>,
) -> CalcResult<usize> {
    ensure_parallel(cat, source, target)?;
    let ssig = cat.signature(source);
    let tsig = cat.signature(target);
    let order = cat.group_order();
    let mut total = zero::<T>();
    for &key in ssig.dims.keys() {
        if !tsig.dims.contains_key(&key) {
            continue;
        }
        for g in 0..order {
            let xs = ssig.rep(g, key).expect("rep").trace();
            let xt = tsig.rep(g, key).expect("rep").trace();
            total += xt * xs.conj();
        }
    }
    let dim = total.re / T::real(order as f64);
    let rounded = dim.round();
    if (dim - rounded).abs() > T::real(1e-6) || total.im.abs() > T::real(1e-6) {
        return Err(CalcError::BlockShape(format!(
            "character formula gave a non-integer Hom dimension {dim}"
        )));
    }
    Ok(rounded.to_f64().unwrap_or(0.0) as usize)
}

// ---------------------------------------------------------------------------
// Fibre evaluation, supports, inner products
// ---------------------------------------------------------------------------

/// The column of blocks of t at source point ω: one matrix per target-object
/// point, zero blocks materialized at signature shapes.
pub fn fibre_eval<T: Scalar>(
    cat: &CategoryPresentation<T>,
    t: &TwoArrow<T>,
    omega: usize,
) -> CalcResult<Vec<CMatrix<T>>> {
    let src_obj = t.source().source();
    let count = cat.point_count(src_obj);
    if omega >= count {
        return Err(CalcError::UnknownPoint {
            index: omega,
            count,
        });
    }
    let ssig = cat.signature(t.source());
    let tsig = cat.signature(t.target());
    let tgt_points = cat.point_count(t.source().target());
    Ok((0..tgt_points)
        .map(|tp| {
            let key = FibreKey::new(tp, omega);
            match t.block(key) {
                Some(b) => b.clone(),
                None => CMatrix::zeros(tsig.dim(key), ssig.dim(key)),
            }
        })
        .collect())
}

/// Support of an arrow: `Left` gives the source points carrying a nonzero
/// fibre, `Right` the target points. Coincides with the support of R*∘R
/// (resp. R̄*∘R̄) for any conjugation solution.
pub fn support<T: Scalar>(
    cat: &CategoryPresentation<T>,
    arrow: &Arrow<T>,
    side: Side,
) -> BTreeSet<usize> {
    let sig = cat.signature(arrow);
    sig.dims
        .keys()
        .map(|k| match side {
            Side::Left => k.src,
            Side::Right => k.tgt,
        })
        .collect()
}

/// End(ι)-valued inner product of t, s ∈ Hom(ρ, σ) with respect to a
/// conjugation solution (r, rbar) for ρ:
/// right: R* ∘ (1_ρ̄ ⊗ (s*∘t)) ∘ R on the source object;
/// left: R̄* ∘ ((s*∘t) ⊗ 1_ρ̄) ∘ R̄ on the target object.
pub fn solution_inner_product<T: Scalar>(
    cat: &CategoryPresentation<T>,
    t: &TwoArrow<T>,
    s: &TwoArrow<T>,
    r: &TwoArrow<T>,
    rbar: &TwoArrow<T>,
    side: Side,
) -> CalcResult<CentralFunction<T>> {
    ensure_parallel(cat, t.source(), s.source())?;
    let rho = t.source().clone();
    let x = compose_vertical(cat, &s.adjoint(), t)?;
    match side {
        Side::Right => {
            let n = r.target().atoms().len();
            let k = rho.atoms().len();
            if n < k {
                return Err(CalcError::SolutionArrowMismatch(format!(
                    "R target '{}' too short for '{}'",
                    r.target().display(cat),
                    rho.display(cat)
                )));
            }
            let (rho_bar, rho_check) = r.target().split_at(cat, n - k);
            if rho_check != rho {
                return Err(CalcError::SolutionArrowMismatch(format!(
                    "R target '{}' does not end in '{}'",
                    r.target().display(cat),
                    rho.display(cat)
                )));
            }
            let mid = compose_horizontal(cat, &TwoArrow::identity(cat, &rho_bar), &x)?;
            let w = compose_vertical(cat, &r.adjoint(), &compose_vertical(cat, &mid, r)?)?;
            CentralFunction::from_end_unit(cat, &w)
        }
        Side::Left => {
            let k = rho.atoms().len();
            if rbar.target().atoms().len() < k {
                return Err(CalcError::SolutionArrowMismatch(format!(
                    "R̄ target '{}' too short for '{}'",
                    rbar.target().display(cat),
                    rho.display(cat)
                )));
            }
            let (rho_check, rho_bar) = rbar.target().split_at(cat, k);
            if rho_check != rho {
                return Err(CalcError::SolutionArrowMismatch(format!(
                    "R̄ target '{}' does not start with '{}'",
                    rbar.target().display(cat),
                    rho.display(cat)
                )));
            }
            let mid = compose_horizontal(cat, &x, &TwoArrow::identity(cat, &rho_bar))?;
            let w = compose_vertical(cat, &rbar.adjoint(), &compose_vertical(cat, &mid, rbar)?)?;
            CentralFunction::from_end_unit(cat, &w)
        }
    }
}

// ---------------------------------------------------------------------------
// Balanced decomposition and central transport
// ---------------------------------------------------------------------------

/// One centrally balanced piece of an arrow: the sub-arrow supported on a
/// partial bijection of base points, the corresponding projection in
/// End(arrow), and the bijection itself (source point → target point).
#[derive(Debug, Clone)]
pub struct BalancedComponent<T: Scalar> {
    pub arrow: Arrow<T>,
    pub projection: TwoArrow<T>,
    pub theta: BTreeMap<usize, usize>,
}

/// Split the support relation into graphs of partial bijections, greedily in
/// lexicographic (source point, target point) order. The direct sum of the
/// components reproduces the arrow (their projections sum to the identity).
pub fn balanced_components<T: Scalar>(
    cat: &CategoryPresentation<T>,
    arrow: &Arrow<T>,
) -> CalcResult<Vec<BalancedComponent<T>>> {
    let sig = cat.signature(arrow);
    let mut pairs: Vec<FibreKey> = sig.dims.keys().copied().collect();
    pairs.sort_by_key(|k| (k.src, k.tgt));
    let mut groups: Vec<Vec<FibreKey>> = Vec::new();
    for key in pairs {
        match groups.iter_mut().find(|g| {
            g.iter().all(|k| k.src != key.src && k.tgt != key.tgt)
        }) {
            Some(g) => g.push(key),
            None => groups.push(vec![key]),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (i, group) in groups.iter().enumerate() {
        let mut iso = BTreeMap::new();
        let mut proj_blocks = BTreeMap::new();
        let mut theta = BTreeMap::new();
        for &k in group {
            let d = sig.dim(k);
            iso.insert(k, CMatrix::identity(d));
            proj_blocks.insert(k, CMatrix::identity(d));
            theta.insert(k.src, k.tgt);
        }
        let name = format!("comp{}({})", i, arrow.display(cat));
        let sub = cat.sub_arrow(&name, arrow, iso)?;
        let projection = TwoArrow::assemble(arrow.clone(), arrow.clone(), proj_blocks);
        out.push(BalancedComponent {
            arrow: sub,
            projection,
            theta,
        });
    }
    Ok(out)
}

/// Whether the support relation of the arrow is already a partial bijection.
pub fn is_balanced<T: Scalar>(cat: &CategoryPresentation<T>, arrow: &Arrow<T>) -> bool {
    let sig = cat.signature(arrow);
    let mut srcs = BTreeSet::new();
    let mut tgts = BTreeSet::new();
    for k in sig.dims.keys() {
        if !srcs.insert(k.src) || !tgts.insert(k.tgt) {
            return false;
        }
    }
    true
}

/// Transport a central function on the source object along the component's
/// base bijection: θ(w)(θ(ω)) = w(ω), zero off the image. The defining
/// identity θ(w) ⊗ 1 = 1 ⊗ w is re-verified on the component.
pub fn theta_apply<T: Scalar>(
    cat: &CategoryPresentation<T>,
    component: &BalancedComponent<T>,
    w: &CentralFunction<T>,
) -> CalcResult<CentralFunction<T>> {
    let src_obj = component.arrow.source();
    let tgt_obj = component.arrow.target();
    if w.object != src_obj {
        return Err(CalcError::SolutionArrowMismatch(
            "central function lives on the wrong object".into(),
        ));
    }
    let mut values = vec![zero::<T>(); cat.point_count(tgt_obj)];
    for (&s, &t) in &component.theta {
        values[t] = w.values[s];
    }
    let out = CentralFunction {
        object: tgt_obj,
        values,
    };
    let ident = TwoArrow::identity(cat, &component.arrow);
    let lhs = compose_horizontal(cat, &out.to_two_arrow(), &ident)?;
    let rhs = compose_horizontal(cat, &ident, &w.to_two_arrow())?;
    let scale = w.max_abs().max(T::one());
    let defect = lhs.dist_max(&rhs);
    if defect > cat.tol().sqrt_atol() * scale {
        return Err(CalcError::NotBalanced(format!(
            "transport identity fails with defect {defect}"
        )));
    }
    Ok(out)
}

/// Composition of base bijections: (outer ∘ inner)(ω) = outer(inner(ω)).
pub fn theta_compose(
    outer: &BTreeMap<usize, usize>,
    inner: &BTreeMap<usize, usize>,
) -> BTreeMap<usize, usize> {
    inner
        .iter()
        .filter_map(|(&s, &m)| outer.get(&m).map(|&t| (s, t)))
        .collect()
}

// ---------------------------------------------------------------------------
// Direct sums and subobjects
// ---------------------------------------------------------------------------

/// Direct sum with its canonical isometries W₁, W₂ (Wᵢ: ρᵢ → ρ₁⊕ρ₂,
/// Wᵢ*∘Wⱼ = δᵢⱼ, W₁∘W₁* + W₂∘W₂* = 1).
pub fn direct_sum<T: Scalar>(
    cat: &CategoryPresentation<T>,
    name: &str,
    a: &Arrow<T>,
    b: &Arrow<T>,
) -> CalcResult<(Arrow<T>, TwoArrow<T>, TwoArrow<T>)> {
    ensure_parallel(cat, a, b)?;
    let sum = cat.sum_arrow(name, &[a.clone(), b.clone()])?;
    let asig = cat.signature(a);
    let bsig = cat.signature(b);
    let ssig = cat.signature(&sum);
    let mut w1 = BTreeMap::new();
    let mut w2 = BTreeMap::new();
    for (&k, &d) in &ssig.dims {
        let da = asig.dim(k);
        let db = bsig.dim(k);
        debug_assert_eq!(da + db, d);
        if da > 0 {
            let mut m = CMatrix::zeros(d, da);
            for i in 0..da {
                m.set(i, i, Cx::new(T::one(), T::zero()));
            }
            w1.insert(k, m);
        }
        if db > 0 {
            let mut m = CMatrix::zeros(d, db);
            for i in 0..db {
                m.set(da + i, i, Cx::new(T::one(), T::zero()));
            }
            w2.insert(k, m);
        }
    }
    Ok((
        sum.clone(),
        TwoArrow::assemble(a.clone(), sum.clone(), w1),
        TwoArrow::assemble(b.clone(), sum, w2),
    ))
}

/// Cut the subobject determined by a projection p ∈ End(ρ): per fibre, an
/// isometry onto the eigenvalue-1 eigenspace. Returns the sub-arrow and
/// W ∈ Hom(sub, ρ) with W∘W* ≈ p and W*∘W = 1_sub.
pub fn split_projection<T: Scalar>(
    cat: &CategoryPresentation<T>,
    name: &str,
    rho: &Arrow<T>,
    p: &TwoArrow<T>,
) -> CalcResult<(Arrow<T>, TwoArrow<T>)> {
    if p.source() != rho || p.target() != rho {
        return Err(CalcError::CompositionMismatch {
            context: format!(
                "projection must be an endomorphism of '{}'",
                rho.display(cat)
            ),
        });
    }
    let sa_defect = p.dist_max(&p.adjoint());
    let sq = compose_vertical(cat, p, p)?;
    let idem_defect = sq.dist_max(p);
    let defect = sa_defect.max(idem_defect);
    if defect > cat.tol().sqrt_atol() {
        return Err(CalcError::NotProjection(
            defect.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let mut iso = BTreeMap::new();
    for (&k, blk) in p.blocks() {
        let eig = hermitian_eig(&blk.hermitize(), cat.tol())?;
        let half = T::real(0.5);
        let picked: Vec<usize> = (0..eig.values.len())
            .filter(|&i| eig.values[i] > half)
            .collect();
        for &i in &picked {
            if (eig.values[i] - T::one()).abs() > cat.tol().sqrt_atol() {
                return Err(CalcError::NotProjection(
                    (eig.values[i] - T::one()).abs().to_f64().unwrap_or(f64::NAN),
                ));
            }
        }
        if picked.is_empty() {
            continue;
        }
        let w = CMatrix::from_fn(blk.rows(), picked.len(), |r, c| {
            eig.vectors.at(r, picked[c])
        });
        iso.insert(k, w);
    }
    let sub = cat.sub_arrow(name, rho, iso.clone())?;
    let w = TwoArrow::assemble(sub.clone(), rho.clone(), iso);
    let recon = compose_vertical(cat, &w, &w.adjoint())?;
    let recon_defect = recon.dist_max(p);
    if recon_defect > cat.tol().sqrt_atol() {
        return Err(CalcError::NotProjection(
            recon_defect.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok((sub, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_presentation, PresentationBuilder, RawFibre};
    use crate::numerics::{cx, SplitMix64, Tolerance};

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

    /// Random element of Hom(a, b) as a combination of basis elements.
    fn random_hom(
        cat: &P,
        rng: &mut SplitMix64,
        a: &Arrow<f64>,
        b: &Arrow<f64>,
    ) -> TwoArrow<f64> {
        let basis = hom_basis(cat, a, b).unwrap();
        let mut acc = TwoArrow::zero(a.clone(), b.clone());
        for e in &basis.elements {
            acc = acc.add(&e.scaled(rng.next_complex_gaussian()));
        }
        acc
    }

    #[test]
    fn identity_is_left_and_right_neutral() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let mut rng = SplitMix64::new(5);
        let t = random_hom(&cat, &mut rng, &rho, &rho);
        let id = TwoArrow::identity(&cat, &rho);
        let lt = compose_vertical(&cat, &id, &t).unwrap();
        let rt = compose_vertical(&cat, &t, &id).unwrap();
        assert!(lt.dist_max(&t) < 1e-12);
        assert!(rt.dist_max(&t) < 1e-12);
    }

    #[test]
    fn vertical_composition_matches_per_fibre_oracle() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let mut rng = SplitMix64::new(6);
        let s = random_hom(&cat, &mut rng, &rho, &rho);
        let t = random_hom(&cat, &mut rng, &rho, &rho);
        let st = compose_vertical(&cat, &s, &t).unwrap();
        for (&k, blk) in st.blocks() {
            let (sb, tb) = (s.block(k).unwrap(), t.block(k).unwrap());
            // brute-force triple loop product
            let mut oracle = CMatrix::zeros(sb.rows(), tb.cols());
            for i in 0..sb.rows() {
                for j in 0..tb.cols() {
                    let mut acc = cx::<f64>(0.0, 0.0);
                    for l in 0..sb.cols() {
                        acc += sb.at(i, l) * tb.at(l, j);
                    }
                    oracle.set(i, j, acc);
                }
            }
            assert!(blk.dist_max(&oracle) < 1e-13);
        }
    }

    #[test]
    fn horizontal_unit_law() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        let mut rng = SplitMix64::new(7);
        let s = random_hom(&cat, &mut rng, &rho, &rho);
        let unit = Arrow::unit(rho.source());
        let one = TwoArrow::identity(&cat, &unit);
        let s_unit = compose_horizontal(&cat, &s, &one).unwrap();
        assert_eq!(s_unit.source(), &rho);
        assert!(s_unit.dist_max(&s) < 1e-13);
        let unit_t = Arrow::unit(rho.target());
        let one_t = TwoArrow::identity(&cat, &unit_t);
        let unit_s = compose_horizontal(&cat, &one_t, &s).unwrap();
        assert!(unit_s.dist_max(&s) < 1e-13);
    }

    #[test]
    fn horizontal_identity_of_tensor() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        let rbar = rho.dual();
        let i1 = TwoArrow::identity(&cat, &rbar);
        let i2 = TwoArrow::identity(&cat, &rho);
        let prod = compose_horizontal(&cat, &i1, &i2).unwrap();
        let chain = rbar.tensor(&cat, &rho).unwrap();
        let expect = TwoArrow::identity(&cat, &chain);
        assert!(prod.dist_max(&expect) < 1e-13);
    }

    #[test]
    fn interchange_law_on_random_inputs() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let rbar = rho.dual();
        let mut rng = SplitMix64::new(8);
        // s, s' ∈ End(ρ̄); t, t' ∈ End(ρ)
        let s = random_hom(&cat, &mut rng, &rbar, &rbar);
        let s2 = random_hom(&cat, &mut rng, &rbar, &rbar);
        let t = random_hom(&cat, &mut rng, &rho, &rho);
        let t2 = random_hom(&cat, &mut rng, &rho, &rho);
        let left = compose_vertical(
            &cat,
            &compose_horizontal(&cat, &s, &t).unwrap(),
            &compose_horizontal(&cat, &s2, &t2).unwrap(),
        )
        .unwrap();
        let right = compose_horizontal(
            &cat,
            &compose_vertical(&cat, &s, &s2).unwrap(),
            &compose_vertical(&cat, &t, &t2).unwrap(),
        )
        .unwrap();
        assert!(left.dist_max(&right) < 1e-10 * (1.0 + left.max_abs()));
    }

    #[test]
    fn horizontal_composition_is_associative_exactly() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        let rbar = rho.dual();
        let mut rng = SplitMix64::new(9);
        let a = random_hom(&cat, &mut rng, &rbar, &rbar);
        let b = random_hom(&cat, &mut rng, &rho, &rho);
        let c = random_hom(&cat, &mut rng, &rbar, &rbar);
        let ab_c = compose_horizontal(&cat, &compose_horizontal(&cat, &a, &b).unwrap(), &c).unwrap();
        let a_bc = compose_horizontal(&cat, &a, &compose_horizontal(&cat, &b, &c).unwrap()).unwrap();
        assert_eq!(ab_c.source(), a_bc.source());
        assert!(ab_c.dist_max(&a_bc) < 1e-12 * (1.0 + ab_c.max_abs()));
    }

    #[test]
    fn adjoint_is_involutive_and_isometric() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let chain = rho.dual().tensor(&cat, &rho).unwrap();
        let mut rng = SplitMix64::new(10);
        let t = random_hom(&cat, &mut rng, &chain, &chain);
        assert!(t.adjoint().adjoint().dist_max(&t) == 0.0);
        let n1 = t.op_norm(&tol()).unwrap();
        let n2 = t.adjoint().op_norm(&tol()).unwrap();
        assert!((n1 - n2).abs() < 1e-9 * (1.0 + n1));
    }

    #[test]
    fn end_of_unit_has_base_dimension_and_commutes() {
        let cat = load("twopoint.json");
        let a = cat.object_id("A").unwrap();
        let unit = Arrow::unit(a);
        let basis = hom_basis(&cat, &unit, &unit).unwrap();
        assert_eq!(basis.elements.len(), 2);
        // ⊗ and ∘ agree on End(ι) and are commutative
        let mut rng = SplitMix64::new(11);
        let w = random_hom(&cat, &mut rng, &unit, &unit);
        let v = random_hom(&cat, &mut rng, &unit, &unit);
        let wv_v = compose_vertical(&cat, &w, &v).unwrap();
        let vw_v = compose_vertical(&cat, &v, &w).unwrap();
        let wv_h = compose_horizontal(&cat, &w, &v).unwrap();
        assert!(wv_v.dist_max(&vw_v) < 1e-12);
        assert!(wv_v.dist_max(&wv_h) < 1e-12);
    }

    #[test]
    fn hom_basis_dimensions_match_known_cases() {
        // trivial group, single fibre C²: End(ρ) = M₂ has dimension 4
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["pt"]);
        b.arrow("rho", "A", "A", vec![RawFibre::plain("pt", "pt", 2)]);
        let cat = b.build().unwrap();
        let rho = rho_of(&cat);
        assert_eq!(hom_basis(&cat, &rho, &rho).unwrap().elements.len(), 4);
        assert_eq!(hom_dim(&cat, &rho, &rho).unwrap(), 4);
    }

    #[test]
    fn heisenberg3_end_dimension_is_nine_with_nullspace_oracle() {
        let cat = load("heisenberg3.json");
        let rho = rho_of(&cat);
        let chain = rho.dual().tensor(&cat, &rho).unwrap();
        let basis = hom_basis(&cat, &chain, &chain).unwrap();
        assert_eq!(basis.elements.len(), 9);
        assert_eq!(hom_dim(&cat, &chain, &chain).unwrap(), 9);

        // Oracle: dimension of the joint nullspace of (u⊗ū − 1) over all
        // group elements, computed from the Gram spectrum of the stacked
        // constraint matrix.
        let sig = cat.signature(&chain);
        let key = FibreKey::new(0, 0);
        let d = sig.dim(key);
        let mut gram = CMatrix::<f64>::zeros(d * d, d * d);
        for g in 0..cat.group_order() {
            let u = sig.rep(g, key).unwrap();
            // constraint C_g = u ⊗ conj(u) − I acting on vec(T)
            let c = crate::numerics::kron(u, &u.conj()).sub(&CMatrix::identity(d * d));
            gram = gram.add(&c.adjoint().mul(&c));
        }
        let eig = hermitian_eig(&gram, &tol()).unwrap();
        let null_dim = eig.values.iter().filter(|&&v| v < 1e-8).count();
        assert_eq!(null_dim, 9);
    }

    #[test]
    fn hom_basis_elements_are_orthonormal_and_equivariant() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let chain = rho.dual().tensor(&cat, &rho).unwrap();
        let basis = hom_basis(&cat, &chain, &chain).unwrap();
        assert_eq!(basis.elements.len(), 4);
        for (i, e) in basis.elements.iter().enumerate() {
            e.validate(&cat).unwrap();
            for (j, f) in basis.elements.iter().enumerate() {
                let ip = e.hs_inner(f);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-10 && ip.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fibre_eval_identity_and_composition_rule() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let id = TwoArrow::identity(&cat, &rho);
        let col = fibre_eval(&cat, &id, 0).unwrap();
        assert_eq!(col.len(), 2);
        assert!(col[0].identity_defect() < 1e-15);
        assert_eq!(col[1].rows(), 0);

        let mut rng = SplitMix64::new(12);
        let s = random_hom(&cat, &mut rng, &rho, &rho);
        let t = random_hom(&cat, &mut rng, &rho, &rho);
        let st = compose_vertical(&cat, &s, &t).unwrap();
        for omega in 0..2 {
            let sc = fibre_eval(&cat, &s, omega).unwrap();
            let tc = fibre_eval(&cat, &t, omega).unwrap();
            let stc = fibre_eval(&cat, &st, omega).unwrap();
            for tp in 0..2 {
                if stc[tp].rows() == 0 {
                    continue;
                }
                assert!(stc[tp].dist_max(&sc[tp].mul(&tc[tp])) < 1e-12);
            }
        }
        assert!(matches!(
            fibre_eval(&cat, &s, 99),
            Err(CalcError::UnknownPoint { .. })
        ));
    }

    #[test]
    fn support_reads_off_dims() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        assert_eq!(
            support(&cat, &rho, Side::Left),
            BTreeSet::from([0usize, 1])
        );
        assert_eq!(support(&cat, &rho, Side::Right), BTreeSet::from([0usize]));
        let a = cat.object_id("A").unwrap();
        assert_eq!(
            support(&cat, &Arrow::unit(a), Side::Left),
            BTreeSet::from([0usize, 1])
        );

        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["a1", "a2"]);
        b.object("B", &["b1"]);
        b.arrow("rho", "B", "A", vec![RawFibre::plain("b1", "a1", 1)]);
        let cat2 = b.build().unwrap();
        let rho2 = rho_of(&cat2);
        assert_eq!(support(&cat2, &rho2, Side::Left), BTreeSet::from([0usize]));
    }

    #[test]
    fn balanced_component_extraction() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let comps = balanced_components(&cat, &rho).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(is_balanced(&cat, &rho));
        assert_eq!(comps[0].theta, BTreeMap::from([(0, 0), (1, 1)]));

        let cat2 = load("twopoint.json");
        let rho2 = rho_of(&cat2);
        assert!(!is_balanced(&cat2, &rho2));
        let comps2 = balanced_components(&cat2, &rho2).unwrap();
        assert_eq!(comps2.len(), 2);
        assert_eq!(comps2[0].theta, BTreeMap::from([(0, 0)]));
        assert_eq!(comps2[1].theta, BTreeMap::from([(1, 0)]));
        // projections sum to the identity
        let total = comps2[0].projection.add(&comps2[1].projection);
        assert!(total.dist_max(&TwoArrow::identity(&cat2, &rho2)) < 1e-15);
    }

    #[test]
    fn theta_transport_and_composition() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let comp = balanced_components(&cat, &rho).unwrap().remove(0);
        let a = cat.object_id("A").unwrap();
        let w = CentralFunction {
            object: a,
            values: vec![cx(2.0, 1.0), cx(-3.0, 0.5)],
        };
        let moved = theta_apply(&cat, &comp, &w).unwrap();
        assert_eq!(moved.values, vec![cx(2.0, 1.0), cx(-3.0, 0.5)]);

        let constant = CentralFunction::constant(&cat, a, cx(7.0, 0.0));
        let moved_c = theta_apply(&cat, &comp, &constant).unwrap();
        assert!(moved_c.values.iter().all(|&v| (v - cx(7.0, 0.0)).norm() < 1e-15));

        // θ_{ρ̄}∘θ_ρ = θ_{ρ̄⊗ρ}
        let dual_comp = balanced_components(&cat, &rho.dual()).unwrap().remove(0);
        let chain = rho.dual().tensor(&cat, &rho).unwrap();
        let chain_comp = balanced_components(&cat, &chain).unwrap().remove(0);
        let composed = theta_compose(&dual_comp.theta, &comp.theta);
        assert_eq!(composed, chain_comp.theta);
    }

    #[test]
    fn direct_sum_isometries() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        let (sum, w1, w2) = direct_sum(&cat, "rho+rho", &rho, &rho).unwrap();
        let id_rho = TwoArrow::identity(&cat, &rho);
        let w11 = compose_vertical(&cat, &w1.adjoint(), &w1).unwrap();
        let w22 = compose_vertical(&cat, &w2.adjoint(), &w2).unwrap();
        let w12 = compose_vertical(&cat, &w1.adjoint(), &w2).unwrap();
        assert!(w11.dist_max(&id_rho) < 1e-15);
        assert!(w22.dist_max(&id_rho) < 1e-15);
        assert!(w12.is_zero());
        let resolution = compose_vertical(&cat, &w1, &w1.adjoint())
            .unwrap()
            .add(&compose_vertical(&cat, &w2, &w2.adjoint()).unwrap());
        assert!(resolution.dist_max(&TwoArrow::identity(&cat, &sum)) < 1e-15);
        let ssig = cat.signature(&sum);
        assert_eq!(ssig.dim(FibreKey::new(0, 1)), 4);
    }

    #[test]
    fn split_projection_cases() {
        // trivial group, single fibre C²: a rank-1 projection splits off C¹
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["pt"]);
        b.arrow("rho", "A", "A", vec![RawFibre::plain("pt", "pt", 2)]);
        let cat = b.build().unwrap();
        let rho = rho_of(&cat);
        let mut pb = CMatrix::<f64>::zeros(2, 2);
        pb.set(0, 0, cx(0.5, 0.0));
        pb.set(0, 1, cx(0.5, 0.0));
        pb.set(1, 0, cx(0.5, 0.0));
        pb.set(1, 1, cx(0.5, 0.0));
        let mut blocks = BTreeMap::new();
        blocks.insert(FibreKey::new(0, 0), pb);
        let p = TwoArrow::assemble(rho.clone(), rho.clone(), blocks);
        let (sub, w) = split_projection(&cat, "tau", &rho, &p).unwrap();
        assert_eq!(cat.signature(&sub).dim(FibreKey::new(0, 0)), 1);
        let ww = compose_vertical(&cat, &w, &w.adjoint()).unwrap();
        assert!(ww.dist_max(&p) < 1e-10);
        let wtw = compose_vertical(&cat, &w.adjoint(), &w).unwrap();
        assert!(wtw.dist_max(&TwoArrow::identity(&cat, &sub)) < 1e-10);

        // p = 1 gives a unitary W
        let idp = TwoArrow::identity(&cat, &rho);
        let (_, wu) = split_projection(&cat, "full", &rho, &idp).unwrap();
        let uu = compose_vertical(&cat, &wu.adjoint(), &wu).unwrap();
        assert!(uu.blocks().get(&FibreKey::new(0, 0)).unwrap().identity_defect() < 1e-12);

        // p = 0 gives the zero subobject
        let zp = TwoArrow::zero(rho.clone(), rho.clone());
        let (zsub, zw) = split_projection(&cat, "none", &rho, &zp).unwrap();
        assert!(cat.signature(&zsub).dims.is_empty());
        assert!(zw.is_zero());

        // non-projection rejected
        let half = TwoArrow::identity(&cat, &rho).scaled(cx(0.5, 0.0));
        assert!(matches!(
            split_projection(&cat, "bad", &rho, &half),
            Err(CalcError::NotProjection(_))
        ));
    }

    #[test]
    fn validation_rejects_non_equivariant_blocks() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let mut blocks = BTreeMap::new();
        let mut m = CMatrix::<f64>::zeros(2, 2);
        m.set(0, 0, cx(1.0, 0.0));
        blocks.insert(FibreKey::new(0, 0), m);
        assert!(matches!(
            TwoArrow::from_blocks(&cat, rho.clone(), rho.clone(), blocks),
            Err(CalcError::NotEquivariant { .. })
        ));
    }

    #[test]
    fn hom_dim_agrees_with_basis_across_chains() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let chain = rho.dual().tensor(&cat, &rho).unwrap();
        let long = chain.tensor(&cat, &rho.dual()).unwrap();
        for (a, b) in [(&rho, &rho), (&chain, &chain), (&long, &long)] {
            let via_basis = hom_basis(&cat, a, b).unwrap().elements.len();
            let via_chars = hom_dim(&cat, a, b).unwrap();
            assert_eq!(via_basis, via_chars);
        }
    }
}
