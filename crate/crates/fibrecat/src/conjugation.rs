//! The conjugation calculus: canonical solutions of the conjugation
//! equations, their verification, the bullet map, dimension functions,
//! standardization, relating invertibles, and the operator inequalities
//! that a solution certifies.
//!
//! Solutions are built recursively over the chain structure: generators get
//! per-fibre maximally entangled vectors (one per middle point, stacked in
//! base order), tensor chains get the product solution, duals swap the pair,
//! subobjects pull back through the isometry and its conjugate, and sums add
//! embedded component solutions.

use crate::homcalc::{
    balanced_components, compose_horizontal, compose_vertical, hom_basis,
    is_balanced, split_table, BalancedComponent, CalcError, CentralFunction,
    HomBasis, TwoArrow,
};
use crate::model::{
    Arrow, AtomBase, CategoryPresentation, FibreKey, ModelError, ObjectId,
};
use crate::numerics::{
    hermitian_eig, lu_inverse, positive_sqrt, CMatrix, Cx, NumError, Scalar,
    SplitMix64,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConjError {
    #[error("not a conjugation solution (residual {residual:e})")]
    NotAConjugationSolution { residual: f64 },
    #[error("solution is not standard (residual {residual:e})")]
    NotStandard { residual: f64 },
    #[error("verification failed: {context} (residual {residual:e})")]
    VerificationFailed { context: String, residual: f64 },
    #[error("density spectrum not positive at fibre ({tgt}, {src})")]
    SpectrumNotPositive { tgt: usize, src: usize },
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type ConjResult<V> = Result<V, ConjError>;

/// A solution pair (R, R̄) witnessing that ρ̄ is conjugate to ρ:
/// R: ι_A → ρ̄⊗ρ and R̄: ι_B → ρ⊗ρ̄ for ρ: A → B.
#[derive(Debug, Clone)]
pub struct SolutionPair<T: Scalar> {
    pub rho: Arrow<T>,
    pub rho_bar: Arrow<T>,
    pub r: TwoArrow<T>,
    pub r_bar: TwoArrow<T>,
}

impl<T: Scalar> SolutionPair<T> {
    /// Wrap externally supplied 2-arrows, checking endpoint shapes and
    /// equivariance.
    pub fn new(
        cat: &CategoryPresentation<T>,
        rho: Arrow<T>,
        r: TwoArrow<T>,
        r_bar: TwoArrow<T>,
    ) -> ConjResult<Self> {
        let rho_bar = rho.dual();
        let want_r_tgt = rho_bar.tensor(cat, &rho)?;
        let want_rb_tgt = rho.tensor(cat, &rho_bar)?;
        if r.source() != &Arrow::unit(rho.source())
            || r.target() != &want_r_tgt
            || r_bar.source() != &Arrow::unit(rho.target())
            || r_bar.target() != &want_rb_tgt
        {
            return Err(CalcError::SolutionArrowMismatch(format!(
                "solution legs do not match '{}'",
                rho.display(cat)
            ))
            .into());
        }
        r.validate(cat)?;
        r_bar.validate(cat)?;
        Ok(SolutionPair {
            rho,
            rho_bar,
            r,
            r_bar,
        })
    }

    /// The solution for the dual arrow: R_ρ̄ = R̄_ρ and R̄_ρ̄ = R_ρ.
    pub fn swapped(&self) -> Self {
        SolutionPair {
            rho: self.rho_bar.clone(),
            rho_bar: self.rho.clone(),
            r: self.r_bar.clone(),
            r_bar: self.r.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical solutions
// ---------------------------------------------------------------------------

/// Maximally entangled columns for a single atom: at each source point s the
/// R block is the stack, over middle points m in base order, of vec(I_d)
/// with d = dim(m, s); analogously for R̄ over target points.
fn entangled_solution<T: Scalar>(
    cat: &CategoryPresentation<T>,
    atom_arrow: &Arrow<T>,
) -> ConjResult<SolutionPair<T>> {
    let rho = atom_arrow.clone();
    let rho_bar = rho.dual();
    let sig = cat.signature(&rho);
    let src_obj = rho.source();
    let tgt_obj = rho.target();
    let r_target = rho_bar.tensor(cat, &rho)?;
    let rb_target = rho.tensor(cat, &rho_bar)?;

    let mut r_blocks = BTreeMap::new();
    for s in 0..cat.point_count(src_obj) {
        let mut col = Vec::new();
        for m in 0..cat.point_count(tgt_obj) {
            let d = sig.dim(FibreKey::new(m, s));
            for i in 0..d {
                for j in 0..d {
                    col.push(if i == j {
                        Cx::new(T::one(), T::zero())
                    } else {
                        Cx::new(T::zero(), T::zero())
                    });
                }
            }
        }
        if col.is_empty() {
            continue;
        }
        let mut blk = CMatrix::zeros(col.len(), 1);
        for (i, v) in col.into_iter().enumerate() {
            blk.set(i, 0, v);
        }
        r_blocks.insert(FibreKey::new(s, s), blk);
    }

    let mut rb_blocks = BTreeMap::new();
    for t in 0..cat.point_count(tgt_obj) {
        let mut col = Vec::new();
        for a in 0..cat.point_count(src_obj) {
            let d = sig.dim(FibreKey::new(t, a));
            for i in 0..d {
                for j in 0..d {
                    col.push(if i == j {
                        Cx::new(T::one(), T::zero())
                    } else {
                        Cx::new(T::zero(), T::zero())
                    });
                }
            }
        }
        if col.is_empty() {
            continue;
        }
        let mut blk = CMatrix::zeros(col.len(), 1);
        for (i, v) in col.into_iter().enumerate() {
            blk.set(i, 0, v);
        }
        rb_blocks.insert(FibreKey::new(t, t), blk);
    }

    let unit_src = Arrow::unit(src_obj);
    let unit_tgt = Arrow::unit(tgt_obj);
    Ok(SolutionPair {
        r: TwoArrow::from_blocks(cat, unit_src, r_target, r_blocks)?,
        r_bar: TwoArrow::from_blocks(cat, unit_tgt, rb_target, rb_blocks)?,
        rho,
        rho_bar,
    })
}

/// The conjugate of an isometry W: sub → parent under the canonical
/// solutions: W̄: sub̄ → parent̄ has the entrywise conjugate blocks at
/// transposed keys.
fn conjugate_isometry<T: Scalar>(w: &TwoArrow<T>) -> TwoArrow<T> {
    let blocks = w
        .blocks()
        .iter()
        .map(|(&k, b)| (k.swap(), b.conj()))
        .collect();
    TwoArrow::assemble(w.source().dual(), w.target().dual(), blocks)
}

/// Canonical conjugation solution for an arbitrary arrow expression.
pub fn canonical_solution<T: Scalar>(
    cat: &CategoryPresentation<T>,
    rho: &Arrow<T>,
) -> ConjResult<SolutionPair<T>> {
    if rho.is_unit() {
        let id = TwoArrow::identity(cat, rho);
        return Ok(SolutionPair {
            rho: rho.clone(),
            rho_bar: rho.clone(),
            r: id.clone(),
            r_bar: id,
        });
    }
    if rho.atoms().len() > 1 {
        // product solution on (head, rest):
        // R = (1_rest̄ ⊗ R_head ⊗ 1_rest) ∘ R_rest,
        // R̄ = (1_head ⊗ R̄_rest ⊗ 1_head̄) ∘ R̄_head
        let (head, rest) = rho.split_head(cat).expect("non-unit chain");
        let sol_head = canonical_solution(cat, &head)?;
        let sol_rest = canonical_solution(cat, &rest)?;
        let id_rest = TwoArrow::identity(cat, &rest);
        let id_rest_bar = TwoArrow::identity(cat, &rest.dual());
        let id_head = TwoArrow::identity(cat, &head);
        let id_head_bar = TwoArrow::identity(cat, &head.dual());
        let inner_r = compose_horizontal(
            cat,
            &compose_horizontal(cat, &id_rest_bar, &sol_head.r)?,
            &id_rest,
        )?;
        let r = compose_vertical(cat, &inner_r, &sol_rest.r)?;
        let inner_rb = compose_horizontal(
            cat,
            &compose_horizontal(cat, &id_head, &sol_rest.r_bar)?,
            &id_head_bar,
        )?;
        let r_bar = compose_vertical(cat, &inner_rb, &sol_head.r_bar)?;
        return Ok(SolutionPair {
            rho: rho.clone(),
            rho_bar: rho.dual(),
            r,
            r_bar,
        });
    }

    let atom = &rho.atoms()[0];
    if atom.is_dual() {
        return Ok(canonical_solution(cat, &rho.dual())?.swapped());
    }
    match atom.base() {
        AtomBase::Gen(_) => entangled_solution(cat, rho),
        AtomBase::Sub(data) => {
            // pull the parent solution through the isometry:
            // R_sub = (W̄* ⊗ W*) ∘ R_parent, R̄_sub = (W* ⊗ W̄*) ∘ R̄_parent
            let parent_sol = canonical_solution(cat, &data.parent)?;
            let w = TwoArrow::assemble(rho.clone(), data.parent.clone(), data.isometry.clone());
            let w_bar = conjugate_isometry(&w);
            let r = compose_vertical(
                cat,
                &compose_horizontal(cat, &w_bar.adjoint(), &w.adjoint())?,
                &parent_sol.r,
            )?;
            let r_bar = compose_vertical(
                cat,
                &compose_horizontal(cat, &w.adjoint(), &w_bar.adjoint())?,
                &parent_sol.r_bar,
            )?;
            Ok(SolutionPair {
                rho: rho.clone(),
                rho_bar: rho.dual(),
                r,
                r_bar,
            })
        }
        AtomBase::Sum(data) => {
            // entangled sum: R = Σᵢ (W̄ᵢ ⊗ Wᵢ) ∘ Rᵢ over the canonical
            // embeddings Wᵢ: partᵢ → sum
            let rho_bar = rho.dual();
            let r_target = rho_bar.tensor(cat, rho)?;
            let rb_target = rho.tensor(cat, &rho_bar)?;
            let sum_sig = cat.signature(rho);
            let mut r = TwoArrow::zero(Arrow::unit(rho.source()), r_target);
            let mut r_bar = TwoArrow::zero(Arrow::unit(rho.target()), rb_target);
            let mut offsets: BTreeMap<FibreKey, usize> = BTreeMap::new();
            for part in &data.parts {
                let psig = cat.signature(part);
                let mut w_blocks = BTreeMap::new();
                for (&k, &pd) in &psig.dims {
                    let off = offsets.entry(k).or_insert(0);
                    let mut m = CMatrix::zeros(sum_sig.dim(k), pd);
                    for i in 0..pd {
                        m.set(*off + i, i, Cx::new(T::one(), T::zero()));
                    }
                    *off += pd;
                    w_blocks.insert(k, m);
                }
                let w = TwoArrow::assemble(part.clone(), rho.clone(), w_blocks);
                let w_bar = conjugate_isometry(&w);
                let sol = canonical_solution(cat, part)?;
                r = r.add(&compose_vertical(
                    cat,
                    &compose_horizontal(cat, &w_bar, &w)?,
                    &sol.r,
                )?);
                r_bar = r_bar.add(&compose_vertical(
                    cat,
                    &compose_horizontal(cat, &w, &w_bar)?,
                    &sol.r_bar,
                )?);
            }
            Ok(SolutionPair {
                rho: rho.clone(),
                rho_bar,
                r,
                r_bar,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Verification and transforms
// ---------------------------------------------------------------------------

/// Residuals of the two conjugation equations.
#[derive(Debug, Clone)]
pub struct ConjugationReport<T: Scalar> {
    /// ‖(R̄*⊗1_ρ)∘(1_ρ⊗R) − 1_ρ‖
    pub zig_rho: T,
    /// ‖(R*⊗1_ρ̄)∘(1_ρ̄⊗R̄) − 1_ρ̄‖
    pub zig_dual: T,
}

impl<T: Scalar> ConjugationReport<T> {
    pub fn max_residual(&self) -> T {
        self.zig_rho.max(self.zig_dual)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max_residual() < tol
    }
}

/// The zigzag composite (R̄*⊗1_ρ)∘(1_ρ⊗R) ∈ End(ρ).
fn zigzag<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<TwoArrow<T>> {
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let up = compose_horizontal(cat, &id_rho, &sol.r)?;
    let down = compose_horizontal(cat, &sol.r_bar.adjoint(), &id_rho)?;
    Ok(compose_vertical(cat, &down, &up)?)
}

pub fn verify_conjugation<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<ConjugationReport<T>> {
    let z1 = zigzag(cat, sol)?;
    let z2 = zigzag(cat, &sol.swapped())?;
    Ok(ConjugationReport {
        zig_rho: z1.dist_max(&TwoArrow::identity(cat, &sol.rho)),
        zig_dual: z2.dist_max(&TwoArrow::identity(cat, &sol.rho_bar)),
    })
}

/// Per-fibre inverse of an endomorphism; fails with `Singular` when a
/// support fibre carries no invertible block.
pub fn invert_end<T: Scalar>(
    cat: &CategoryPresentation<T>,
    a: &TwoArrow<T>,
) -> ConjResult<TwoArrow<T>> {
    let sig = cat.signature(a.source());
    let mut blocks = BTreeMap::new();
    for &k in sig.dims.keys() {
        let blk = a.block(k).ok_or(NumError::Singular)?;
        blocks.insert(k, lu_inverse(blk)?);
    }
    Ok(TwoArrow::assemble(
        a.target().clone(),
        a.source().clone(),
        blocks,
    ))
}

/// Transport a solution by an invertible a ∈ End(ρ):
/// R' = (1_ρ̄⊗a)∘R, R̄' = (a^{-1*}⊗1_ρ̄)∘R̄. Solutions of the conjugation
/// equations stay solutions under exactly this transform.
pub fn transform_solution<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    a: &TwoArrow<T>,
) -> ConjResult<SolutionPair<T>> {
    let a_inv_star = invert_end(cat, a)?.adjoint();
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let r = compose_vertical(cat, &compose_horizontal(cat, &id_bar, a)?, &sol.r)?;
    let r_bar = compose_vertical(
        cat,
        &compose_horizontal(cat, &a_inv_star, &id_bar)?,
        &sol.r_bar,
    )?;
    Ok(SolutionPair {
        rho: sol.rho.clone(),
        rho_bar: sol.rho_bar.clone(),
        r,
        r_bar,
    })
}

/// A random equivariant invertible 1 + ε·(gaussian combination of an
/// orthonormal End(ρ) basis); used to perturb solutions reproducibly.
pub fn random_equivariant_invertible<T: Scalar>(
    cat: &CategoryPresentation<T>,
    rho: &Arrow<T>,
    rng: &mut SplitMix64,
    eps: T,
) -> ConjResult<TwoArrow<T>> {
    let basis = hom_basis(cat, rho, rho)?;
    let mut a = TwoArrow::identity(cat, rho);
    for e in &basis.elements {
        let c = rng.next_complex_gaussian::<T>() * Cx::new(eps, T::zero());
        a = a.add(&e.scaled(c));
    }
    // reject draws too close to singular; retry with a smaller perturbation
    for &k in cat.signature(rho).dims.keys() {
        let singular = match a.block(k) {
            Some(blk) => lu_inverse(blk).is_err(),
            None => true,
        };
        if singular {
            return random_equivariant_invertible(cat, rho, rng, eps * T::real(0.5));
        }
    }
    Ok(a)
}

/// The invertible relating two solutions for the same (ρ, ρ̄):
/// A = (R̄₁*⊗1_ρ)∘(1_ρ⊗R₂), so that R₂ = (1_ρ̄⊗A)∘R₁ and
/// R̄₂ = (A^{-1*}⊗1_ρ̄)∘R̄₁; both reconstructions are verified.
pub fn relating_invertible<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol1: &SolutionPair<T>,
    sol2: &SolutionPair<T>,
) -> ConjResult<TwoArrow<T>> {
    if sol1.rho != sol2.rho {
        return Err(CalcError::SolutionArrowMismatch(
            "the two solutions are for different arrows".into(),
        )
        .into());
    }
    let id_rho = TwoArrow::identity(cat, &sol1.rho);
    let up = compose_horizontal(cat, &id_rho, &sol2.r)?;
    let down = compose_horizontal(cat, &sol1.r_bar.adjoint(), &id_rho)?;
    let a = compose_vertical(cat, &down, &up)?;

    let rebuilt = transform_solution(cat, sol1, &a)?;
    let scale = sol2.r.max_abs().max(T::one());
    let res_r = rebuilt.r.dist_max(&sol2.r);
    let res_rb = rebuilt.r_bar.dist_max(&sol2.r_bar);
    let residual = res_r.max(res_rb);
    if residual > cat.tol().sqrt_atol() * scale {
        return Err(ConjError::VerificationFailed {
            context: "solution reconstruction from the relating invertible".into(),
            residual: residual.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Bullet map
// ---------------------------------------------------------------------------

/// The conjugate 2-arrow s• ∈ Hom(ρ̄, σ̄) of s ∈ Hom(ρ, σ):
/// s• = (1_σ̄⊗R̄_ρ*)∘(1_σ̄⊗s*⊗1_ρ̄)∘(R_σ⊗1_ρ̄). Antilinear in s; with
/// canonical solutions it is entrywise conjugation at transposed keys.
pub fn bullet<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol_rho: &SolutionPair<T>,
    sol_sigma: &SolutionPair<T>,
    s: &TwoArrow<T>,
) -> ConjResult<TwoArrow<T>> {
    if s.source() != &sol_rho.rho || s.target() != &sol_sigma.rho {
        return Err(CalcError::SolutionArrowMismatch(format!(
            "bullet input must lie in Hom('{}', '{}')",
            sol_rho.rho.display(cat),
            sol_sigma.rho.display(cat)
        ))
        .into());
    }
    let id_sigma_bar = TwoArrow::identity(cat, &sol_sigma.rho_bar);
    let id_rho_bar = TwoArrow::identity(cat, &sol_rho.rho_bar);
    let top = compose_horizontal(cat, &id_sigma_bar, &sol_rho.r_bar.adjoint())?;
    let mid = compose_horizontal(
        cat,
        &compose_horizontal(cat, &id_sigma_bar, &s.adjoint())?,
        &id_rho_bar,
    )?;
    let bottom = compose_horizontal(cat, &sol_sigma.r, &id_rho_bar)?;
    Ok(compose_vertical(
        cat,
        &top,
        &compose_vertical(cat, &mid, &bottom)?,
    )?)
}

// ---------------------------------------------------------------------------
// Standardness
// ---------------------------------------------------------------------------

/// Left and right dimension functions of a standard solution.
#[derive(Debug, Clone)]
pub struct DimensionFunction<T: Scalar> {
    /// R*∘R on the source base.
    pub left: CentralFunction<T>,
    /// R̄*∘R̄ on the target base.
    pub right: CentralFunction<T>,
}

/// Inclusion isometry of a balanced component back into the full arrow:
/// identity blocks on the component's fibre keys.
fn component_isometry<T: Scalar>(
    cat: &CategoryPresentation<T>,
    component: &BalancedComponent<T>,
    rho: &Arrow<T>,
) -> TwoArrow<T> {
    let sig = cat.signature(&component.arrow);
    let blocks = sig
        .dims
        .iter()
        .map(|(&k, &d)| (k, CMatrix::identity(d)))
        .collect();
    TwoArrow::assemble(component.arrow.clone(), rho.clone(), blocks)
}

/// Restriction of a solution to a balanced component. The component sectors
/// of a solution are exact: summing the embedded restrictions over all
/// components reconstructs (R, R̄), and each restriction of a valid solution
/// is again a valid solution for the component arrow.
fn restrict_to_component<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    component: &BalancedComponent<T>,
) -> ConjResult<SolutionPair<T>> {
    let w = component_isometry(cat, component, &sol.rho);
    let w_bar = conjugate_isometry(&w);
    let r = compose_vertical(
        cat,
        &compose_horizontal(cat, &w_bar.adjoint(), &w.adjoint())?,
        &sol.r,
    )?;
    let r_bar = compose_vertical(
        cat,
        &compose_horizontal(cat, &w.adjoint(), &w_bar.adjoint())?,
        &sol.r_bar,
    )?;
    Ok(SolutionPair {
        rho: component.arrow.clone(),
        rho_bar: component.arrow.dual(),
        r,
        r_bar,
    })
}

/// Max residual of the standardness identity
/// 1_ρ⊗(R*∘(1_ρ̄⊗X)∘R) = (R̄*∘(X⊗1_ρ̄)∘R̄)⊗1_ρ over the basis elements X,
/// checked per balanced component with the solution and X restricted along
/// the component inclusion. A solution is standard when it is the direct sum
/// of componentwise standard solutions; on an already balanced arrow this is
/// the plain identity.
pub fn standardness_defect<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    basis: &HomBasis<T>,
) -> ConjResult<T> {
    let mut worst = T::zero();
    for component in balanced_components(cat, &sol.rho)? {
        let w = component_isometry(cat, &component, &sol.rho);
        let part = restrict_to_component(cat, sol, &component)?;
        let id_sub = TwoArrow::identity(cat, &part.rho);
        let id_sub_bar = TwoArrow::identity(cat, &part.rho_bar);
        for x in &basis.elements {
            let x_part = compose_vertical(
                cat,
                &w.adjoint(),
                &compose_vertical(cat, x, &w)?,
            )?;
            if x_part.is_zero() {
                continue;
            }
            let inner_r = compose_vertical(
                cat,
                &part.r.adjoint(),
                &compose_vertical(
                    cat,
                    &compose_horizontal(cat, &id_sub_bar, &x_part)?,
                    &part.r,
                )?,
            )?;
            let inner_rb = compose_vertical(
                cat,
                &part.r_bar.adjoint(),
                &compose_vertical(
                    cat,
                    &compose_horizontal(cat, &x_part, &id_sub_bar)?,
                    &part.r_bar,
                )?,
            )?;
            let lhs = compose_horizontal(cat, &id_sub, &inner_r)?;
            let rhs = compose_horizontal(cat, &inner_rb, &id_sub)?;
            worst = worst.max(lhs.dist_max(&rhs));
        }
    }
    Ok(worst)
}

/// Standardness check with an internally computed End(ρ) basis.
pub fn is_standard<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<T> {
    let basis = hom_basis(cat, &sol.rho, &sol.rho)?;
    standardness_defect(cat, sol, &basis)
}

/// Group-average a fibre matrix onto the commutant of the key's
/// representation; exact commutant membership keeps the functional calculus
/// equivariant.
fn average_to_commutant<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sig: &crate::model::Signature<T>,
    key: FibreKey,
    m: &CMatrix<T>,
) -> CMatrix<T> {
    let order = cat.group_order();
    let mut acc = CMatrix::zeros(m.rows(), m.cols());
    for g in 0..order {
        let u = sig.rep(g, key).expect("rep present");
        acc = acc.add(&u.mul(m).mul(&u.adjoint()));
    }
    acc.scaled(Cx::new(T::one() / T::real(order as f64), T::zero()))
}

/// Density matrices of the two dimension functionals at one fibre key:
/// M_Φ from the R column at the source point, M_Ψ from the R̄ column at the
/// target point, both group-averaged onto the commutant.
fn fibre_densities<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    key: FibreKey,
) -> ConjResult<(CMatrix<T>, CMatrix<T>)> {
    let sig = cat.signature(&sol.rho);
    let d = sig.dim(key);
    let p_bar = sol.rho_bar.atoms().len();
    let p_rho = sol.rho.atoms().len();

    // M from R at (s, s): rows with middle point key.tgt give M[l, r]
    let s_key = FibreKey::new(key.src, key.src);
    let r_col = sol.r.block(s_key).ok_or(NumError::Singular)?;
    let table_r = split_table(cat, sol.r.target(), p_bar, s_key);
    let mut m = CMatrix::zeros(d, d);
    for (flat, &(l, mid, rr)) in table_r.iter().enumerate() {
        if mid == key.tgt {
            m.set(l, rr, r_col.at(flat, 0));
        }
    }
    // N from R̄ at (t, t): rows with middle point key.src give N[l, r]
    let t_key = FibreKey::new(key.tgt, key.tgt);
    let rb_col = sol.r_bar.block(t_key).ok_or(NumError::Singular)?;
    let table_rb = split_table(cat, sol.r_bar.target(), p_rho, t_key);
    let mut n = CMatrix::zeros(d, d);
    for (flat, &(l, mid, rr)) in table_rb.iter().enumerate() {
        if mid == key.src {
            n.set(l, rr, rb_col.at(flat, 0));
        }
    }

    let phi = average_to_commutant(cat, &sig, key, &m.adjoint().mul(&m).transpose());
    let psi = average_to_commutant(cat, &sig, key, &n.mul(&n.adjoint()));
    Ok((phi, psi))
}

/// Standardize a verified solution. Per support fibre key the correction is
/// the fourth root K = (M_Φ·M_Ψ⁻¹)^{1/4}: valid solutions satisfy
/// M_Ψ = M_Φ⁻¹ exactly, so the product is K⁴ and the corrected pair
/// ((1⊗K⁻¹)∘R, (K⊗1)∘R̄) has both densities equal to 1. Returns the new
/// pair together with K.
pub fn standardize<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<(SolutionPair<T>, TwoArrow<T>)> {
    let report = verify_conjugation(cat, sol)?;
    if !report.passes(cat.tol().sqrt_atol()) {
        return Err(ConjError::NotAConjugationSolution {
            residual: report.max_residual().to_f64().unwrap_or(f64::NAN),
        });
    }
    let sig = cat.signature(&sol.rho);
    let mut k_blocks = BTreeMap::new();
    for &key in sig.dims.keys() {
        let not_positive = |_| ConjError::SpectrumNotPositive {
            tgt: key.tgt,
            src: key.src,
        };
        let (phi, psi) = fibre_densities(cat, sol, key)?;
        let psi_inv = lu_inverse(&psi).map_err(not_positive)?;
        let prod = phi.mul(&psi_inv).hermitize();
        let sqrt = positive_sqrt(&prod, cat.tol()).map_err(not_positive)?;
        let fourth = positive_sqrt(&sqrt.hermitize(), cat.tol()).map_err(not_positive)?;
        k_blocks.insert(key, fourth);
    }
    let k = TwoArrow::assemble(sol.rho.clone(), sol.rho.clone(), k_blocks);
    let k_inv = invert_end(cat, &k)?;
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let r = compose_vertical(cat, &compose_horizontal(cat, &id_bar, &k_inv)?, &sol.r)?;
    let r_bar = compose_vertical(cat, &compose_horizontal(cat, &k, &id_bar)?, &sol.r_bar)?;
    Ok((
        SolutionPair {
            rho: sol.rho.clone(),
            rho_bar: sol.rho_bar.clone(),
            r,
            r_bar,
        },
        k,
    ))
}

/// Dimension functions of a standard solution; rejects non-standard input.
pub fn dimension<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<DimensionFunction<T>> {
    let defect = is_standard(cat, sol)?;
    if defect > cat.tol().sqrt_atol() {
        return Err(ConjError::NotStandard {
            residual: defect.to_f64().unwrap_or(f64::NAN),
        });
    }
    let left = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r.adjoint(), &sol.r)?,
    )?;
    let right = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r_bar.adjoint(), &sol.r_bar)?,
    )?;
    for (func, source_side) in [(&left, true), (&right, false)] {
        for (point, v) in func.values.iter().enumerate() {
            let on_support = cat.signature(&sol.rho).dims.keys().any(|k| {
                if source_side {
                    k.src == point
                } else {
                    k.tgt == point
                }
            });
            let bad_imag = v.im.abs() > cat.tol().sqrt_atol();
            let bad_low = on_support && v.re < T::one() - cat.tol().sqrt_atol();
            let bad_neg = v.re < -cat.tol().sqrt_atol();
            if bad_imag || bad_low || bad_neg {
                return Err(ConjError::VerificationFailed {
                    context: format!("dimension positivity at point {point}"),
                    residual: v.im.abs().to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(DimensionFunction { left, right })
}

// ---------------------------------------------------------------------------
// Operator inequalities
// ---------------------------------------------------------------------------

/// A named minimum-eigenvalue result; the certified inequality holds when
/// the minimum eigenvalue is ≥ −tol.
#[derive(Debug, Clone)]
pub struct EigReport<T: Scalar> {
    pub name: &'static str,
    pub min_eigenvalue: T,
}

/// Minimum fibre eigenvalue of a self-adjoint endomorphism; absent blocks
/// on nonzero fibres count as zero matrices.
fn min_fibre_eigenvalue<T: Scalar>(
    cat: &CategoryPresentation<T>,
    t: &TwoArrow<T>,
) -> ConjResult<T> {
    let sig = cat.signature(t.source());
    let mut min = T::infinity();
    for &k in sig.dims.keys() {
        match t.block(k) {
            Some(b) => {
                let eig = hermitian_eig(&b.hermitize(), cat.tol())?;
                min = min.min(eig.values[0]);
            }
            None => min = min.min(T::zero()),
        }
    }
    Ok(if min == T::infinity() { T::zero() } else { min })
}

/// The four cap bounds: R∘R* ≤ (R*∘R)⊗1_{ρ̄ρ}, R∘R* ≤ 1_{ρ̄ρ}⊗(R*∘R),
/// and the two mirror bounds for R̄.
pub fn cap_inequalities<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<Vec<EigReport<T>>> {
    let mut out = Vec::with_capacity(4);
    for (pair, names) in [
        (sol, ["R∘R* ≤ (R*∘R)⊗1", "R∘R* ≤ 1⊗(R*∘R)"]),
        (
            &sol.swapped(),
            ["Rbar∘Rbar* ≤ (Rbar*∘Rbar)⊗1", "Rbar∘Rbar* ≤ 1⊗(Rbar*∘Rbar)"],
        ),
    ] {
        let chain = pair.r.target().clone();
        let id_chain = TwoArrow::identity(cat, &chain);
        let cap = compose_vertical(cat, &pair.r, &pair.r.adjoint())?;
        let w = CentralFunction::from_end_unit(
            cat,
            &compose_vertical(cat, &pair.r.adjoint(), &pair.r)?,
        )?;
        let left_bound = compose_horizontal(cat, &w.to_two_arrow(), &id_chain)?;
        let right_bound = compose_horizontal(cat, &id_chain, &w.to_two_arrow())?;
        out.push(EigReport {
            name: names[0],
            min_eigenvalue: min_fibre_eigenvalue(cat, &left_bound.sub(&cap))?,
        });
        out.push(EigReport {
            name: names[1],
            min_eigenvalue: min_fibre_eigenvalue(cat, &right_bound.sub(&cap))?,
        });
    }
    Ok(out)
}

/// (R̄*∘R̄)⊗1_ρ ∘ 1_ρ⊗(R*∘R) ≥ 1_ρ: the product of the two dimension
/// functions dominates the identity.
pub fn dimension_product_bound<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<EigReport<T>> {
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let w = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r.adjoint(), &sol.r)?,
    )?;
    let z = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r_bar.adjoint(), &sol.r_bar)?,
    )?;
    let left = compose_horizontal(cat, &z.to_two_arrow(), &id_rho)?;
    let right = compose_horizontal(cat, &id_rho, &w.to_two_arrow())?;
    let product = compose_vertical(cat, &left, &right)?;
    Ok(EigReport {
        name: "(Rbar*∘Rbar)⊗1 ∘ 1⊗(R*∘R) ≥ 1",
        min_eigenvalue: min_fibre_eigenvalue(cat, &product.sub(&id_rho))?,
    })
}

/// The Pimsner-Popa bound: for positive X ∈ End(ρ⊗σ),
/// X ≤ (R̄*∘R̄) ⊗ 1_ρ ⊗ ((R*⊗1_σ)∘(1_ρ̄⊗X)∘(R⊗1_σ)).
pub fn pimsner_popa<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    x: &TwoArrow<T>,
) -> ConjResult<EigReport<T>> {
    let p = sol.rho.atoms().len();
    let chain = x.source().clone();
    if chain.atoms().len() < p || chain.split_at(cat, p).0 != sol.rho {
        return Err(CalcError::SolutionArrowMismatch(format!(
            "X must be an endomorphism of a chain starting with '{}'",
            sol.rho.display(cat)
        ))
        .into());
    }
    let sigma = chain.split_at(cat, p).1;
    let id_sigma = TwoArrow::identity(cat, &sigma);
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let lift = compose_horizontal(cat, &sol.r, &id_sigma)?;
    let conjugated = compose_vertical(
        cat,
        &lift.adjoint(),
        &compose_vertical(cat, &compose_horizontal(cat, &id_bar, x)?, &lift)?,
    )?;
    let z = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r_bar.adjoint(), &sol.r_bar)?,
    )?;
    let bound = compose_horizontal(
        cat,
        &compose_horizontal(cat, &z.to_two_arrow(), &id_rho)?,
        &conjugated,
    )?;
    Ok(EigReport {
        name: "X ≤ (Rbar*∘Rbar)⊗1⊗(R*⊗1 ∘ 1⊗X ∘ R⊗1)",
        min_eigenvalue: min_fibre_eigenvalue(cat, &bound.sub(x))?,
    })
}

/// The bound (R̄*∘R̄)⊗1_ρ⊗(R*∘R) ∈ End(ρ) of a solution; standard
/// solutions minimize it.
pub fn dimension_bound<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> ConjResult<TwoArrow<T>> {
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let w = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r.adjoint(), &sol.r)?,
    )?;
    let z = CentralFunction::from_end_unit(
        cat,
        &compose_vertical(cat, &sol.r_bar.adjoint(), &sol.r_bar)?,
    )?;
    Ok(compose_horizontal(
        cat,
        &compose_horizontal(cat, &z.to_two_arrow(), &id_rho)?,
        &w.to_two_arrow(),
    )?)
}

/// Minimality of standard solutions: bound(other) − bound(standard) ≥ 0.
pub fn minimality_gap<T: Scalar>(
    cat: &CategoryPresentation<T>,
    standard: &SolutionPair<T>,
    other: &SolutionPair<T>,
) -> ConjResult<EigReport<T>> {
    let b_std = dimension_bound(cat, standard)?;
    let b_other = dimension_bound(cat, other)?;
    Ok(EigReport {
        name: "standard solutions minimize (Rbar*∘Rbar)⊗1⊗(R*∘R)",
        min_eigenvalue: min_fibre_eigenvalue(cat, &b_other.sub(&b_std))?,
    })
}

/// |⟨s∘t, 1⟩ − ⟨t∘s, 1⟩| pointwise maximum: vanishes for standard
/// solutions (the inner product is tracial).
pub fn tracial_defect<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    s: &TwoArrow<T>,
    t: &TwoArrow<T>,
) -> ConjResult<T> {
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let pair = |x: &TwoArrow<T>| -> ConjResult<CentralFunction<T>> {
        let inner = compose_vertical(
            cat,
            &sol.r.adjoint(),
            &compose_vertical(cat, &compose_horizontal(cat, &id_bar, x)?, &sol.r)?,
        )?;
        Ok(CentralFunction::from_end_unit(cat, &inner)?)
    };
    let st = pair(&compose_vertical(cat, s, t)?)?;
    let ts = pair(&compose_vertical(cat, t, s)?)?;
    Ok(st.dist_max(&ts))
}

// ---------------------------------------------------------------------------
// Fibre category extraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FibrePointReport {
    pub object: ObjectId,
    pub point: usize,
    /// dim End(ι)|_ω of the fibre unit; simple means 1.
    pub unit_end_dim: usize,
}

#[derive(Debug, Clone)]
pub struct FibreHomDim {
    pub target_point: usize,
    pub source_point: usize,
    pub fibre_dim: usize,
    pub end_dim: usize,
}

#[derive(Debug, Clone)]
pub struct FibreGeneratorReport<T: Scalar> {
    pub arrow: String,
    pub theta: BTreeMap<usize, usize>,
    pub hom_dims: Vec<FibreHomDim>,
    pub conjugation_residual: T,
}

#[derive(Debug, Clone)]
pub struct FibreCategoryReport<T: Scalar> {
    pub orbit: Vec<FibrePointReport>,
    pub generators: Vec<FibreGeneratorReport<T>>,
}

impl<T: Scalar> FibreCategoryReport<T> {
    pub fn units_simple(&self) -> bool {
        self.orbit.iter().all(|p| p.unit_end_dim == 1)
    }
}

/// Extract the fibre category over the θ-orbit of a base point: enumerate
/// the orbit under the balanced generators (both directions), check that
/// every fibre unit is simple, and verify the canonical solutions fibrewise
/// on the orbit.
pub fn fibre_category<T: Scalar>(
    cat: &CategoryPresentation<T>,
    object: ObjectId,
    point: usize,
    generators: &[Arrow<T>],
) -> ConjResult<FibreCategoryReport<T>> {
    let count = cat.point_count(object);
    if point >= count {
        return Err(CalcError::UnknownPoint {
            index: point,
            count,
        }
        .into());
    }
    let mut thetas = Vec::with_capacity(generators.len());
    for g in generators {
        if !is_balanced(cat, g) {
            return Err(CalcError::NotBalanced(format!(
                "generator '{}' has a non-bijective support relation",
                g.display(cat)
            ))
            .into());
        }
        let sig = cat.signature(g);
        let theta: BTreeMap<usize, usize> =
            sig.dims.keys().map(|k| (k.src, k.tgt)).collect();
        thetas.push(theta);
    }

    // orbit closure under every generator's θ, forward and backward
    let mut orbit: BTreeSet<(ObjectId, usize)> = BTreeSet::new();
    orbit.insert((object, point));
    loop {
        let mut grew = false;
        for (g, theta) in generators.iter().zip(&thetas) {
            let (src_obj, tgt_obj) = (g.source(), g.target());
            let mut additions = Vec::new();
            for &(obj, w) in &orbit {
                if obj == src_obj {
                    if let Some(&w2) = theta.get(&w) {
                        additions.push((tgt_obj, w2));
                    }
                }
                if obj == tgt_obj {
                    if let Some((&w2, _)) = theta.iter().find(|&(_, &t)| t == w) {
                        additions.push((src_obj, w2));
                    }
                }
            }
            for a in additions {
                grew |= orbit.insert(a);
            }
        }
        if !grew {
            break;
        }
    }

    let orbit_points: Vec<FibrePointReport> = orbit
        .iter()
        .map(|&(obj, w)| {
            let unit = Arrow::unit(obj);
            let basis = hom_basis(cat, &unit, &unit)?;
            let unit_end_dim = basis
                .elements
                .iter()
                .filter(|e| e.block(FibreKey::new(w, w)).is_some())
                .count();
            Ok(FibrePointReport {
                object: obj,
                point: w,
                unit_end_dim,
            })
        })
        .collect::<ConjResult<_>>()?;

    let mut gen_reports = Vec::with_capacity(generators.len());
    for (g, theta) in generators.iter().zip(&thetas) {
        let sig = cat.signature(g);
        let basis = hom_basis(cat, g, g)?;
        let sol = canonical_solution(cat, g)?;
        let z1 = zigzag(cat, &sol)?;
        let z2 = zigzag(cat, &sol.swapped())?;
        let mut hom_dims = Vec::new();
        let mut residual = T::zero();
        for &(obj, w) in &orbit {
            if obj != g.source() {
                continue;
            }
            let Some(&w2) = theta.get(&w) else { continue };
            let key = FibreKey::new(w2, w);
            let fibre_dim = sig.dim(key);
            if fibre_dim == 0 {
                continue;
            }
            let end_dim = basis
                .elements
                .iter()
                .filter(|e| e.block(key).is_some())
                .count();
            hom_dims.push(FibreHomDim {
                target_point: w2,
                source_point: w,
                fibre_dim,
                end_dim,
            });
            let id_blk = CMatrix::identity(fibre_dim);
            if let Some(b) = z1.block(key) {
                residual = residual.max(b.dist_max(&id_blk));
            } else {
                residual = residual.max(T::one());
            }
            if let Some(b) = z2.block(key.swap()) {
                residual = residual.max(b.dist_max(&id_blk));
            } else {
                residual = residual.max(T::one());
            }
        }
        gen_reports.push(FibreGeneratorReport {
            arrow: g.display(cat),
            theta: theta.clone(),
            hom_dims,
            conjugation_residual: residual,
        });
    }

    Ok(FibreCategoryReport {
        orbit: orbit_points,
        generators: gen_reports,
    })
}
