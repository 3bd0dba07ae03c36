//! Frobenius algebras and Q-systems on endo-1-arrows, and the Jones
//! projections with their Temperley-Lieb relations.
//!
//! A conjugation solution for ρ induces the canonical Q-system on ρ̄⊗ρ; in
//! the other direction a Q-system is exactly a *-Frobenius algebra whose
//! coproduct is an isometry. The normalization routines move between the
//! three equivalent axiom packages by functional calculus in End(λ), always
//! restricted to the support of the algebra.

use crate::conjugation::{verify_conjugation, ConjError, SolutionPair};
use crate::homcalc::{
    balanced_components, compose_horizontal, compose_vertical, support,
    CalcError, CentralFunction, Side, TwoArrow,
};
use crate::model::{Arrow, CategoryPresentation, ModelError};
use crate::numerics::{
    hermitian_eig, lu_inverse, positive_sqrt, CMatrix, Cx, NumError, Scalar,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Tolerance for matching an index value against the discrete series
/// 4cos²(π/k); values at least 4 - INDEX_NODE_TOL fall into the continuum.
pub const INDEX_NODE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum QfError {
    #[error("the supplied pair is not a conjugation solution (residual {residual:e})")]
    NotAConjugationSolution { residual: f64 },
    #[error("prerequisite relation {relation} does not hold (residual {residual:e})")]
    PrerequisiteFailed {
        relation: &'static str,
        residual: f64,
    },
    #[error("H = S*∘S is not invertible (minimum eigenvalue {min_eigenvalue:e})")]
    HNotInvertible { min_eigenvalue: f64 },
    #[error("solution support is degenerate at point {point}")]
    SupportDegenerate { point: usize },
    #[error("multiplication data is not of the strongly separable form (defect {defect:e})")]
    NotStronglySeparable { defect: f64 },
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

pub type QfResult<V> = Result<V, QfError>;

fn as_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Frobenius algebras
// ---------------------------------------------------------------------------

/// A Frobenius structure on an endo-1-arrow λ: A → A. The unit points into
/// λ, the coproduct splits λ into λ⊗λ, and counit/product run the other way.
/// No *-compatibility is assumed at this level.
#[derive(Debug, Clone)]
pub struct FrobeniusData<T: Scalar> {
    pub algebra: Arrow<T>,
    pub unit: TwoArrow<T>,
    pub counit: TwoArrow<T>,
    pub coproduct: TwoArrow<T>,
    pub product: TwoArrow<T>,
}

impl<T: Scalar> FrobeniusData<T> {
    /// Wrap externally supplied 2-arrows, checking all endpoint shapes and
    /// equivariance.
    pub fn new(
        cat: &CategoryPresentation<T>,
        algebra: Arrow<T>,
        unit: TwoArrow<T>,
        counit: TwoArrow<T>,
        coproduct: TwoArrow<T>,
        product: TwoArrow<T>,
    ) -> QfResult<Self> {
        if algebra.source() != algebra.target() {
            return Err(QfError::Shape(format!(
                "algebra arrow '{}' is not an endo-arrow",
                algebra.display(cat)
            )));
        }
        let iota = Arrow::unit(algebra.source());
        let square = algebra.tensor(cat, &algebra)?;
        let shapes: [(&TwoArrow<T>, &Arrow<T>, &Arrow<T>, &str); 4] = [
            (&unit, &iota, &algebra, "unit"),
            (&counit, &algebra, &iota, "counit"),
            (&coproduct, &algebra, &square, "coproduct"),
            (&product, &square, &algebra, "product"),
        ];
        for (arrow, src, tgt, role) in shapes {
            if arrow.source() != src || arrow.target() != tgt {
                return Err(QfError::Shape(format!(
                    "{role} must map '{}' to '{}'",
                    src.display(cat),
                    tgt.display(cat)
                )));
            }
            arrow.validate(cat)?;
        }
        Ok(FrobeniusData {
            algebra,
            unit,
            counit,
            coproduct,
            product,
        })
    }
}

/// Residuals of the five Frobenius identities.
#[derive(Debug, Clone, Copy)]
pub struct FrobeniusReport<T: Scalar> {
    /// (W⊗1)∘W = (1⊗W)∘W.
    pub coassociativity: T,
    /// W'∘(W'⊗1) = W'∘(1⊗W').
    pub associativity: T,
    /// (V'⊗1)∘W = 1 = (1⊗V')∘W.
    pub counit_law: T,
    /// W'∘(V⊗1) = 1 = W'∘(1⊗V).
    pub unit_law: T,
    /// (W'⊗1)∘(1⊗W) = W∘W' = (1⊗W')∘(W⊗1).
    pub frobenius_law: T,
}

impl<T: Scalar> FrobeniusReport<T> {
    pub fn max_residual(&self) -> T {
        self.coassociativity
            .max(self.associativity)
            .max(self.counit_law)
            .max(self.unit_law)
            .max(self.frobenius_law)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max_residual() < tol
    }
}

/// Evaluate the five Frobenius identities and report their residuals.
pub fn verify_frobenius<T: Scalar>(
    cat: &CategoryPresentation<T>,
    f: &FrobeniusData<T>,
) -> QfResult<FrobeniusReport<T>> {
    let id = TwoArrow::identity(cat, &f.algebra);
    let lift_l = |s: &TwoArrow<T>| compose_horizontal(cat, s, &id);
    let lift_r = |s: &TwoArrow<T>| compose_horizontal(cat, &id, s);

    let coassociativity = compose_vertical(cat, &lift_l(&f.coproduct)?, &f.coproduct)?
        .dist_max(&compose_vertical(cat, &lift_r(&f.coproduct)?, &f.coproduct)?);
    let associativity = compose_vertical(cat, &f.product, &lift_l(&f.product)?)?
        .dist_max(&compose_vertical(cat, &f.product, &lift_r(&f.product)?)?);

    let counit_law = compose_vertical(cat, &lift_l(&f.counit)?, &f.coproduct)?
        .dist_max(&id)
        .max(compose_vertical(cat, &lift_r(&f.counit)?, &f.coproduct)?.dist_max(&id));
    let unit_law = compose_vertical(cat, &f.product, &lift_l(&f.unit)?)?
        .dist_max(&id)
        .max(compose_vertical(cat, &f.product, &lift_r(&f.unit)?)?.dist_max(&id));

    let middle = compose_vertical(cat, &f.coproduct, &f.product)?;
    let frobenius_law = compose_vertical(cat, &lift_l(&f.product)?, &lift_r(&f.coproduct)?)?
        .dist_max(&middle)
        .max(
            compose_vertical(cat, &lift_r(&f.product)?, &lift_l(&f.coproduct)?)?
                .dist_max(&middle),
        );

    Ok(FrobeniusReport {
        coassociativity,
        associativity,
        counit_law,
        unit_law,
        frobenius_law,
    })
}

// ---------------------------------------------------------------------------
// Q-systems
// ---------------------------------------------------------------------------

/// A Q-system candidate on λ: the unit T: ι → λ and the coproduct
/// S: λ → λ⊗λ. The four relations are checked separately so that partially
/// normalized data can be carried around.
#[derive(Debug, Clone)]
pub struct QSystemData<T: Scalar> {
    pub algebra: Arrow<T>,
    pub unit: TwoArrow<T>,
    pub coproduct: TwoArrow<T>,
}

impl<T: Scalar> QSystemData<T> {
    pub fn new(
        cat: &CategoryPresentation<T>,
        algebra: Arrow<T>,
        unit: TwoArrow<T>,
        coproduct: TwoArrow<T>,
    ) -> QfResult<Self> {
        if algebra.source() != algebra.target() {
            return Err(QfError::Shape(format!(
                "algebra arrow '{}' is not an endo-arrow",
                algebra.display(cat)
            )));
        }
        let iota = Arrow::unit(algebra.source());
        let square = algebra.tensor(cat, &algebra)?;
        if unit.source() != &iota || unit.target() != &algebra {
            return Err(QfError::Shape("unit must map the object unit to the algebra".into()));
        }
        if coproduct.source() != &algebra || coproduct.target() != &square {
            return Err(QfError::Shape(
                "coproduct must map the algebra to its tensor square".into(),
            ));
        }
        unit.validate(cat)?;
        coproduct.validate(cat)?;
        Ok(QSystemData {
            algebra,
            unit,
            coproduct,
        })
    }
}

/// Residuals of the four Q-system relations.
#[derive(Debug, Clone, Copy)]
pub struct QSystemReport<T: Scalar> {
    /// (T*⊗1)∘S = 1 = (1⊗T*)∘S.
    pub q1: T,
    /// S*∘S = 1.
    pub q2: T,
    /// (S⊗1)∘S = (1⊗S)∘S.
    pub q3: T,
    /// (S*⊗1)∘(1⊗S) = S∘S* = (1⊗S*)∘(S⊗1).
    pub q4: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QRelation {
    Q2,
    Q3,
    Q4,
}

impl QRelation {
    pub fn name(self) -> &'static str {
        match self {
            QRelation::Q2 => "Q2",
            QRelation::Q3 => "Q3",
            QRelation::Q4 => "Q4",
        }
    }
}

impl<T: Scalar> QSystemReport<T> {
    pub fn max_residual(&self) -> T {
        self.q1.max(self.q2).max(self.q3).max(self.q4)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max_residual() < tol
    }

    pub fn residual(&self, r: QRelation) -> T {
        match r {
            QRelation::Q2 => self.q2,
            QRelation::Q3 => self.q3,
            QRelation::Q4 => self.q4,
        }
    }
}

/// Evaluate the four Q-system relations and report their residuals.
pub fn verify_qsystem<T: Scalar>(
    cat: &CategoryPresentation<T>,
    q: &QSystemData<T>,
) -> QfResult<QSystemReport<T>> {
    let id = TwoArrow::identity(cat, &q.algebra);
    let lift_l = |s: &TwoArrow<T>| compose_horizontal(cat, s, &id);
    let lift_r = |s: &TwoArrow<T>| compose_horizontal(cat, &id, s);
    let s = &q.coproduct;
    let t_star = q.unit.adjoint();
    let s_star = s.adjoint();

    let q1 = compose_vertical(cat, &lift_l(&t_star)?, s)?
        .dist_max(&id)
        .max(compose_vertical(cat, &lift_r(&t_star)?, s)?.dist_max(&id));
    let q2 = compose_vertical(cat, &s_star, s)?.dist_max(&id);
    let q3 = compose_vertical(cat, &lift_l(s)?, s)?
        .dist_max(&compose_vertical(cat, &lift_r(s)?, s)?);
    let middle = compose_vertical(cat, s, &s_star)?;
    let q4 = compose_vertical(cat, &lift_l(&s_star)?, &lift_r(s)?)?
        .dist_max(&middle)
        .max(compose_vertical(cat, &lift_r(&s_star)?, &lift_l(s)?)?.dist_max(&middle));

    Ok(QSystemReport { q1, q2, q3, q4 })
}

// ---------------------------------------------------------------------------
// Functional calculus helpers
// ---------------------------------------------------------------------------

/// Per-fibre square root and inverse square root of a positive invertible
/// endomorphism. Every signature key must carry a block with spectrum
/// strictly above the absolute tolerance.
fn end_sqrt_pair<T: Scalar>(
    cat: &CategoryPresentation<T>,
    h: &TwoArrow<T>,
) -> QfResult<(TwoArrow<T>, TwoArrow<T>)> {
    let sig = cat.signature(h.source());
    let mut roots = BTreeMap::new();
    let mut inverses = BTreeMap::new();
    for &key in sig.dims.keys() {
        let blk = h
            .block(key)
            .ok_or(QfError::HNotInvertible {
                min_eigenvalue: 0.0,
            })?
            .hermitize();
        let eig = hermitian_eig(&blk, cat.tol())?;
        let min = eig.values.first().copied().unwrap_or_else(T::zero);
        if min <= cat.tol().atol {
            return Err(QfError::HNotInvertible {
                min_eigenvalue: as_f64(min),
            });
        }
        let root = positive_sqrt(&blk, cat.tol())?;
        let inverse = lu_inverse(&root)?;
        roots.insert(key, root);
        inverses.insert(key, inverse);
    }
    let lambda = h.source().clone();
    Ok((
        TwoArrow::assemble(lambda.clone(), lambda.clone(), roots),
        TwoArrow::assemble(lambda.clone(), lambda, inverses),
    ))
}

/// Pointwise real power of a central function: the stated power on the
/// support, zero elsewhere. Values on the support must stay above `atol`.
fn central_power<T: Scalar>(
    f: &CentralFunction<T>,
    supp: &BTreeSet<usize>,
    exp: f64,
    atol: T,
) -> QfResult<CentralFunction<T>> {
    let mut out = f.clone();
    for (point, v) in out.values.iter_mut().enumerate() {
        if supp.contains(&point) {
            if v.re <= atol {
                return Err(QfError::SupportDegenerate { point });
            }
            *v = Cx::new(v.re.powf(T::real(exp)), T::zero());
        } else {
            *v = Cx::new(T::zero(), T::zero());
        }
    }
    Ok(out)
}

/// R*∘R as a central function on the source unit.
fn end_values<T: Scalar>(
    cat: &CategoryPresentation<T>,
    r: &TwoArrow<T>,
) -> QfResult<CentralFunction<T>> {
    let square = compose_vertical(cat, &r.adjoint(), r)?;
    Ok(CentralFunction::from_end_unit(cat, &square)?)
}

// ---------------------------------------------------------------------------
// Canonical Q-system from a conjugation solution
// ---------------------------------------------------------------------------

/// The canonical Q-system on λ = ρ̄⊗ρ induced by a conjugation solution:
/// the raw data T' = R and S' = 1_ρ̄⊗R̄⊗1_ρ satisfy all relations except
/// isometry of the coproduct, which the H-move restores. H = S'*∘S' is
/// 1_ρ̄⊗(R̄*∘R̄)⊗1_ρ, hence invertible on every fibre of λ.
pub fn canonical_qsystem<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> QfResult<QSystemData<T>> {
    let report = verify_conjugation(cat, sol)?;
    if !report.passes(cat.tol().sqrt_atol()) {
        return Err(QfError::NotAConjugationSolution {
            residual: as_f64(report.max_residual()),
        });
    }
    let algebra = sol.rho_bar.tensor(cat, &sol.rho)?;
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let raw_coproduct = compose_horizontal(
        cat,
        &compose_horizontal(cat, &id_bar, &sol.r_bar)?,
        &id_rho,
    )?;
    let h = compose_vertical(cat, &raw_coproduct.adjoint(), &raw_coproduct)?;
    let (h_sqrt, h_inv_sqrt) = end_sqrt_pair(cat, &h)?;
    let coproduct = compose_vertical(cat, &raw_coproduct, &h_inv_sqrt)?;
    let unit = compose_vertical(cat, &h_sqrt, &sol.r)?;
    Ok(QSystemData {
        algebra,
        unit,
        coproduct,
    })
}

// ---------------------------------------------------------------------------
// Normalization between the relation packages
// ---------------------------------------------------------------------------

/// What `normalize_qsystem` did and what it established.
#[derive(Debug, Clone, Copy)]
pub struct NormalizeReport<T: Scalar> {
    /// Whether the coproduct was replaced by S∘H^{-1/2} (and the unit by
    /// H^{1/2}∘T).
    pub applied_h_move: bool,
    /// Name of the relation that was implied rather than assumed.
    pub implied: &'static str,
    /// Residual of the implied relation on the returned data.
    pub implied_residual: T,
}

/// Given unit relations Q1 and two of {Q2, Q3, Q4}, produce a Q-system
/// satisfying all four. With Q2 among the hypotheses the data is returned
/// unchanged and the third relation is merely confirmed; without Q2 the
/// H-move with H = S*∘S renormalizes the pair.
pub fn normalize_qsystem<T: Scalar>(
    cat: &CategoryPresentation<T>,
    q: &QSystemData<T>,
    present: &[QRelation],
) -> QfResult<(QSystemData<T>, NormalizeReport<T>)> {
    if present.len() != 2 || present[0] == present[1] {
        return Err(QfError::Shape(
            "present must name exactly two distinct relations".into(),
        ));
    }
    let gate = cat.tol().sqrt_atol();
    let report = verify_qsystem(cat, q)?;
    if report.q1 > gate {
        return Err(QfError::PrerequisiteFailed {
            relation: "Q1",
            residual: as_f64(report.q1),
        });
    }
    for &rel in present {
        let residual = report.residual(rel);
        if residual > gate {
            return Err(QfError::PrerequisiteFailed {
                relation: rel.name(),
                residual: as_f64(residual),
            });
        }
    }
    let have = |r: QRelation| present.contains(&r);
    let implied = if !have(QRelation::Q2) {
        QRelation::Q2
    } else if !have(QRelation::Q3) {
        QRelation::Q3
    } else {
        QRelation::Q4
    };

    if have(QRelation::Q2) {
        return Ok((
            q.clone(),
            NormalizeReport {
                applied_h_move: false,
                implied: implied.name(),
                implied_residual: report.residual(implied),
            },
        ));
    }

    let h = compose_vertical(cat, &q.coproduct.adjoint(), &q.coproduct)?;
    let (h_sqrt, h_inv_sqrt) = end_sqrt_pair(cat, &h)?;
    let out = QSystemData {
        algebra: q.algebra.clone(),
        unit: compose_vertical(cat, &h_sqrt, &q.unit)?,
        coproduct: compose_vertical(cat, &q.coproduct, &h_inv_sqrt)?,
    };
    let after = verify_qsystem(cat, &out)?;
    Ok((
        out,
        NormalizeReport {
            applied_h_move: true,
            implied: QRelation::Q2.name(),
            implied_residual: after.q2,
        },
    ))
}

/// Extract the central scalar z with g = z⊗1 on an End(λ) element, together
/// with the target-side support it lives on. Fails when g is farther than
/// the rank cutoff from that form.
fn central_scalar_factor<T: Scalar>(
    cat: &CategoryPresentation<T>,
    g: &TwoArrow<T>,
) -> QfResult<(CentralFunction<T>, BTreeSet<usize>)> {
    let lambda = g.source();
    let sig = cat.signature(lambda);
    let mut traces: BTreeMap<usize, (Cx<T>, T)> = BTreeMap::new();
    for (&key, &dim) in sig.dims.iter() {
        let tr = g
            .block(key)
            .map(|b| b.trace())
            .unwrap_or_else(|| Cx::new(T::zero(), T::zero()));
        let entry = traces
            .entry(key.tgt)
            .or_insert((Cx::new(T::zero(), T::zero()), T::zero()));
        entry.0 += tr;
        entry.1 += T::real(dim as f64);
    }
    let mut scalar = CentralFunction::constant(
        cat,
        lambda.target(),
        Cx::new(T::zero(), T::zero()),
    );
    let mut supp = BTreeSet::new();
    for (&point, &(tr, total)) in &traces {
        scalar.values[point] = tr / Cx::new(total, T::zero());
        supp.insert(point);
    }
    let mut defect = T::zero();
    for (&key, &dim) in sig.dims.iter() {
        let want = CMatrix::identity(dim).scaled(scalar.values[key.tgt]);
        let got = g
            .block(key)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(dim, dim));
        defect = defect.max(got.dist_max(&want));
    }
    if defect > cat.tol().sqrt_atol() {
        return Err(QfError::NotStronglySeparable {
            defect: as_f64(defect),
        });
    }
    Ok((scalar, supp))
}

/// Turn a *-compatible, strongly separable Frobenius structure into a
/// Q-system: divide out the central factor z = W'∘W (so the coproduct
/// becomes an isometry), then run the H-move pipeline, which also verifies
/// the remaining prerequisites.
pub fn frobenius_to_qsystem<T: Scalar>(
    cat: &CategoryPresentation<T>,
    f: &FrobeniusData<T>,
) -> QfResult<(QSystemData<T>, NormalizeReport<T>)> {
    let gate = cat.tol().sqrt_atol();
    let star_defect = f
        .product
        .dist_max(&f.coproduct.adjoint())
        .max(f.counit.dist_max(&f.unit.adjoint()));
    if star_defect > gate {
        return Err(QfError::Shape(format!(
            "product and counit must be the adjoints of coproduct and unit (defect {:e})",
            as_f64(star_defect)
        )));
    }
    let g = compose_vertical(cat, &f.product, &f.coproduct)?;
    let (z, supp) = central_scalar_factor(cat, &g)?;
    let z_half = central_power(&z, &supp, 0.5, cat.tol().atol)?;
    let (_, g_inv_sqrt) = end_sqrt_pair(cat, &g)?;
    let candidate = QSystemData {
        algebra: f.algebra.clone(),
        unit: compose_vertical(cat, &f.unit, &z_half.to_two_arrow())?,
        coproduct: compose_vertical(cat, &f.coproduct, &g_inv_sqrt)?,
    };
    normalize_qsystem(cat, &candidate, &[QRelation::Q3, QRelation::Q4])
}

/// Defect of the self-duality pair e = W∘V, d = V'∘W' on a self-dual
/// algebra: both snake identities (d⊗1)∘(1⊗e) = 1 and (1⊗d)∘(e⊗1) = 1.
pub fn self_duality_defect<T: Scalar>(
    cat: &CategoryPresentation<T>,
    f: &FrobeniusData<T>,
) -> QfResult<T> {
    if f.algebra.dual() != f.algebra {
        return Err(QfError::Shape(format!(
            "algebra arrow '{}' is not self-dual",
            f.algebra.display(cat)
        )));
    }
    let e = compose_vertical(cat, &f.coproduct, &f.unit)?;
    let d = compose_vertical(cat, &f.counit, &f.product)?;
    let id = TwoArrow::identity(cat, &f.algebra);
    let left = compose_vertical(
        cat,
        &compose_horizontal(cat, &d, &id)?,
        &compose_horizontal(cat, &id, &e)?,
    )?;
    let right = compose_vertical(
        cat,
        &compose_horizontal(cat, &id, &d)?,
        &compose_horizontal(cat, &e, &id)?,
    )?;
    Ok(left.dist_max(&id).max(right.dist_max(&id)))
}

/// Conjugate a Q-system by a unitary u in End(λ): T ↦ u∘T and
/// S ↦ (u⊗u)∘S∘u*. All four residuals are invariant under this move.
pub fn transport_qsystem<T: Scalar>(
    cat: &CategoryPresentation<T>,
    q: &QSystemData<T>,
    u: &TwoArrow<T>,
) -> QfResult<QSystemData<T>> {
    if u.source() != &q.algebra || u.target() != &q.algebra {
        return Err(QfError::Shape(
            "transport unitary must be an endomorphism of the algebra arrow".into(),
        ));
    }
    let unit = compose_vertical(cat, u, &q.unit)?;
    let squared = compose_horizontal(cat, u, u)?;
    let coproduct = compose_vertical(
        cat,
        &compose_vertical(cat, &squared, &q.coproduct)?,
        &u.adjoint(),
    )?;
    Ok(QSystemData {
        algebra: q.algebra.clone(),
        unit,
        coproduct,
    })
}

// ---------------------------------------------------------------------------
// Jones projections and Temperley-Lieb relations
// ---------------------------------------------------------------------------

fn jones_side<T: Scalar>(
    cat: &CategoryPresentation<T>,
    r: &TwoArrow<T>,
    supp: &BTreeSet<usize>,
) -> QfResult<TwoArrow<T>> {
    let values = end_values(cat, r)?;
    let inverse = central_power(&values, supp, -1.0, cat.tol().atol)?;
    let scaled = compose_vertical(cat, r, &inverse.to_two_arrow())?;
    Ok(compose_vertical(cat, &scaled, &r.adjoint())?)
}

/// The Jones projections E = R∘(R*∘R)^{-1}∘R* in End(ρ̄⊗ρ) and
/// Ē = R̄∘(R̄*∘R̄)^{-1}∘R̄* in End(ρ⊗ρ̄), with the central inverses taken
/// on the respective supports.
pub fn jones_projections<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> QfResult<(TwoArrow<T>, TwoArrow<T>)> {
    let e = jones_side(cat, &sol.r, &support(cat, &sol.rho, Side::Left))?;
    let e_bar = jones_side(cat, &sol.r_bar, &support(cat, &sol.rho, Side::Right))?;
    Ok((e, e_bar))
}

/// Rescale a solution on a balanced arrow so that R̄*∘R̄ equals the
/// transport of R*∘R along the point bijection θ. The rescale is central,
/// so the conjugation equations are preserved.
pub fn renormalize_solution<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
) -> QfResult<SolutionPair<T>> {
    if !crate::homcalc::is_balanced(cat, &sol.rho) {
        return Err(CalcError::NotBalanced(sol.rho.display(cat)).into());
    }
    let mut theta = BTreeMap::new();
    for comp in balanced_components(cat, &sol.rho)? {
        theta.extend(comp.theta.iter().map(|(&s, &t)| (s, t)));
    }
    let w = end_values(cat, &sol.r)?;
    let z = end_values(cat, &sol.r_bar)?;
    let atol = cat.tol().atol;
    let quarter = T::real(0.25);

    let mut left = CentralFunction::constant(
        cat,
        sol.rho.source(),
        Cx::new(T::zero(), T::zero()),
    );
    let mut right = CentralFunction::constant(
        cat,
        sol.rho.target(),
        Cx::new(T::zero(), T::zero()),
    );
    for (&s, &t) in &theta {
        let ws = w.values[s].re;
        let zt = z.values[t].re;
        if ws <= atol {
            return Err(QfError::SupportDegenerate { point: s });
        }
        if zt <= atol {
            return Err(QfError::SupportDegenerate { point: t });
        }
        left.values[s] = Cx::new(ws.powf(-quarter) * zt.powf(quarter), T::zero());
        right.values[t] = Cx::new(zt.powf(-quarter) * ws.powf(quarter), T::zero());
    }
    let r = compose_vertical(cat, &sol.r, &left.to_two_arrow())?;
    let r_bar = compose_vertical(cat, &sol.r_bar, &right.to_two_arrow())?;
    Ok(SolutionPair::new(cat, sol.rho.clone(), r, r_bar)?)
}

/// Classification of one index value against the discrete series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexClass {
    /// Within INDEX_NODE_TOL of 4cos²(π/k).
    DiscreteSeries { k: u32 },
    /// At least 4 (up to INDEX_NODE_TOL).
    AtLeastFour,
    /// Strictly between the series nodes and below 4.
    NotInSeries,
}

/// Match an index value against {4cos²(π/k) : 3 ≤ k ≤ 100} ∪ [4, ∞).
pub fn classify_index<T: Scalar>(value: T) -> IndexClass {
    let v = as_f64(value);
    if !v.is_finite() {
        return IndexClass::NotInSeries;
    }
    for k in 3..=100u32 {
        let node = 4.0 * (std::f64::consts::PI / f64::from(k)).cos().powi(2);
        if (v - node).abs() < INDEX_NODE_TOL {
            return IndexClass::DiscreteSeries { k };
        }
    }
    if v >= 4.0 - INDEX_NODE_TOL {
        IndexClass::AtLeastFour
    } else {
        IndexClass::NotInSeries
    }
}

/// Index value at one support point.
#[derive(Debug, Clone, Copy)]
pub struct IndexValue<T: Scalar> {
    pub point: usize,
    pub value: T,
    pub class: IndexClass,
}

/// Residuals of the two Temperley-Lieb relations plus the index data they
/// certify.
#[derive(Debug, Clone)]
pub struct TlReport<T: Scalar> {
    /// (1_ρ⊗E)∘(Ē⊗1_ρ)∘(1_ρ⊗E) = (R̄*∘R̄)^{-2}⊗1_ρ⊗E.
    pub jones_rho: T,
    /// (1_ρ̄⊗Ē)∘(E⊗1_ρ̄)∘(1_ρ̄⊗Ē) = (R*∘R)^{-2}⊗1_ρ̄⊗Ē.
    pub jones_dual: T,
    /// (R̄*∘R̄)^{-2} per target-side support point.
    pub coefficient_rho: Vec<(usize, T)>,
    /// (R*∘R)^{-2} per source-side support point.
    pub coefficient_dual: Vec<(usize, T)>,
    /// (R*∘R)² per source-side support point, with series membership.
    pub index: Vec<IndexValue<T>>,
    pub renormalized: bool,
}

impl<T: Scalar> TlReport<T> {
    pub fn max_residual(&self) -> T {
        self.jones_rho.max(self.jones_dual)
    }
}

/// Check the two Temperley-Lieb relations for the Jones projections of a
/// solution. With `renormalized` the solution is first rebalanced so that
/// R̄*∘R̄ is the θ-transport of R*∘R, which the relations assume.
pub fn verify_temperley_lieb<T: Scalar>(
    cat: &CategoryPresentation<T>,
    sol: &SolutionPair<T>,
    renormalized: bool,
) -> QfResult<TlReport<T>> {
    let rebalanced;
    let sol = if renormalized {
        rebalanced = renormalize_solution(cat, sol)?;
        &rebalanced
    } else {
        sol
    };
    let (e, e_bar) = jones_projections(cat, sol)?;
    let id_rho = TwoArrow::identity(cat, &sol.rho);
    let id_bar = TwoArrow::identity(cat, &sol.rho_bar);
    let supp_l = support(cat, &sol.rho, Side::Left);
    let supp_r = support(cat, &sol.rho, Side::Right);
    let w = end_values(cat, &sol.r)?;
    let z = end_values(cat, &sol.r_bar)?;
    let w_m2 = central_power(&w, &supp_l, -2.0, cat.tol().atol)?;
    let z_m2 = central_power(&z, &supp_r, -2.0, cat.tol().atol)?;

    let lift_e = compose_horizontal(cat, &id_rho, &e)?;
    let lift_ebar = compose_horizontal(cat, &e_bar, &id_rho)?;
    let triple = compose_vertical(
        cat,
        &lift_e,
        &compose_vertical(cat, &lift_ebar, &lift_e)?,
    )?;
    let jones_rho =
        triple.dist_max(&compose_horizontal(cat, &z_m2.to_two_arrow(), &lift_e)?);

    let lift_ebar_dual = compose_horizontal(cat, &id_bar, &e_bar)?;
    let lift_e_dual = compose_horizontal(cat, &e, &id_bar)?;
    let triple_dual = compose_vertical(
        cat,
        &lift_ebar_dual,
        &compose_vertical(cat, &lift_e_dual, &lift_ebar_dual)?,
    )?;
    let jones_dual = triple_dual.dist_max(&compose_horizontal(
        cat,
        &w_m2.to_two_arrow(),
        &lift_ebar_dual,
    )?);

    let coefficient_rho = supp_r.iter().map(|&p| (p, z_m2.values[p].re)).collect();
    let coefficient_dual = supp_l.iter().map(|&p| (p, w_m2.values[p].re)).collect();
    let index = supp_l
        .iter()
        .map(|&p| {
            let value = w.values[p].re * w.values[p].re;
            IndexValue {
                point: p,
                value,
                class: classify_index(value),
            }
        })
        .collect();

    Ok(TlReport {
        jones_rho,
        jones_dual,
        coefficient_rho,
        coefficient_dual,
        index,
        renormalized,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugation::canonical_solution;
    use crate::model::{load_presentation, PresentationBuilder, RawFibre};
    use crate::numerics::{cx, SplitMix64, Tolerance};
    use crate::homcalc::hom_basis;

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

    fn canonical_q(cat: &P, rho: &Arrow<f64>) -> (SolutionPair<f64>, QSystemData<f64>) {
        let sol = canonical_solution(cat, rho).unwrap();
        let q = canonical_qsystem(cat, &sol).unwrap();
        (sol, q)
    }

    fn reinterpret(q: &QSystemData<f64>) -> FrobeniusData<f64> {
        FrobeniusData {
            algebra: q.algebra.clone(),
            unit: q.unit.clone(),
            counit: q.unit.adjoint(),
            coproduct: q.coproduct.clone(),
            product: q.coproduct.adjoint(),
        }
    }

    #[test]
    fn unit_algebra_passes_trivially() {
        let cat = load("twopoint.json");
        let a = cat.object_id("A").unwrap();
        let iota = Arrow::unit(a);
        let id = TwoArrow::identity(&cat, &iota);
        let f = FrobeniusData::new(
            &cat,
            iota,
            id.clone(),
            id.clone(),
            id.clone(),
            id.clone(),
        )
        .unwrap();
        let rep = verify_frobenius(&cat, &f).unwrap();
        assert_eq!(rep.max_residual(), 0.0);
    }

    #[test]
    fn canonical_qsystem_is_a_frobenius_algebra() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let rep = verify_frobenius(&cat, &reinterpret(&q)).unwrap();
        assert!(rep.max_residual() < 1e-10, "residual {:e}", rep.max_residual());
    }

    #[test]
    fn doubled_coproduct_breaks_exactly_the_counit_law() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let mut f = reinterpret(&q);
        f.coproduct = f.coproduct.scaled(cx(2.0, 0.0));
        let rep = verify_frobenius(&cat, &f).unwrap();
        assert!((rep.counit_law - 1.0).abs() < 1e-10);
        assert!(rep.coassociativity < 1e-10);
        assert!(rep.associativity < 1e-10);
        assert!(rep.unit_law < 1e-10);
        assert!(rep.frobenius_law < 1e-10);
    }

    #[test]
    fn canonical_qsystem_on_unit_arrow_is_trivial() {
        let cat = load("twopoint.json");
        let a = cat.object_id("A").unwrap();
        let unit = Arrow::unit(a);
        let sol = canonical_solution(&cat, &unit).unwrap();
        let q = canonical_qsystem(&cat, &sol).unwrap();
        let id = TwoArrow::identity(&cat, &q.algebra);
        assert!(q.unit.dist_max(&id) < 1e-12);
        assert!(q.coproduct.dist_max(&id) < 1e-12);
        let rep = verify_qsystem(&cat, &q).unwrap();
        assert!(rep.max_residual() < 1e-12);
    }

    #[test]
    fn canonical_qsystem_single_fibre_unit_carries_the_index() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let (sol, q) = canonical_q(&cat, &rho);
        let rep = verify_qsystem(&cat, &q).unwrap();
        assert!(rep.max_residual() < 1e-10, "residual {:e}", rep.max_residual());

        // Independent oracle: T = H^{1/2}∘R with H = 1⊗(R̄*∘R̄)⊗1, so
        // T*∘T = (R̄*∘R̄)·(R*∘R) = d·d on the single point.
        let w = end_values(&cat, &sol.r).unwrap().values[0].re;
        let z = end_values(&cat, &sol.r_bar).unwrap().values[0].re;
        let tt = end_values(&cat, &q.unit).unwrap().values[0];
        assert!((tt.re - w * z).abs() < 1e-10);
        assert!((tt.re - 4.0).abs() < 1e-10);
        assert!(tt.im.abs() < 1e-12);
    }

    #[test]
    fn canonical_qsystem_heisenberg3() {
        let cat = load("heisenberg3.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let rep = verify_qsystem(&cat, &q).unwrap();
        assert!(rep.q1 < 1e-8);
        assert!(rep.q2 < 1e-8);
        assert!(rep.q3 < 1e-8);
        assert!(rep.q4 < 1e-8);
    }

    #[test]
    fn canonical_qsystem_rejects_scaled_solutions() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let mut sol = canonical_solution(&cat, &rho).unwrap();
        sol.r = sol.r.scaled(cx(2.0, 0.0));
        match canonical_qsystem(&cat, &sol) {
            Err(QfError::NotAConjugationSolution { .. }) => {}
            other => panic!("expected NotAConjugationSolution, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn normalize_passthrough_confirms_the_implied_relation() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        for (present, implied) in [
            ([QRelation::Q2, QRelation::Q3], "Q4"),
            ([QRelation::Q2, QRelation::Q4], "Q3"),
        ] {
            let (out, rep) = normalize_qsystem(&cat, &q, &present).unwrap();
            assert!(!rep.applied_h_move);
            assert_eq!(rep.implied, implied);
            assert!(rep.implied_residual < 1e-10);
            assert!(out.unit.dist_max(&q.unit) == 0.0);
            assert!(out.coproduct.dist_max(&q.coproduct) == 0.0);
        }
    }

    #[test]
    fn h_move_rescales_a_scaled_coproduct() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let root2 = 2f64.sqrt();
        let skew = QSystemData {
            algebra: q.algebra.clone(),
            unit: q.unit.scaled(cx(1.0 / root2, 0.0)),
            coproduct: q.coproduct.scaled(cx(root2, 0.0)),
        };
        let before = verify_qsystem(&cat, &skew).unwrap();
        assert!(before.q1 < 1e-10 && before.q3 < 1e-10 && before.q4 < 1e-10);
        assert!((before.q2 - 1.0).abs() < 1e-10, "S*S = 2 means residual 1");

        let (out, rep) = normalize_qsystem(&cat, &skew, &[QRelation::Q3, QRelation::Q4]).unwrap();
        assert!(rep.applied_h_move);
        assert_eq!(rep.implied, "Q2");
        assert!(rep.implied_residual < 1e-9);
        assert!(verify_qsystem(&cat, &out).unwrap().max_residual() < 1e-9);
        assert!(out.unit.dist_max(&q.unit) < 1e-9);
        assert!(out.coproduct.dist_max(&q.coproduct) < 1e-9);
    }

    #[test]
    fn h_move_on_an_isometric_coproduct_is_inert() {
        let cat = load("heisenberg3.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let (out, rep) = normalize_qsystem(&cat, &q, &[QRelation::Q3, QRelation::Q4]).unwrap();
        assert!(rep.applied_h_move);
        assert!(out.unit.dist_max(&q.unit) < 1e-12);
        assert!(out.coproduct.dist_max(&q.coproduct) < 1e-12);
    }

    #[test]
    fn normalize_rejects_a_missing_prerequisite() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let root2 = 2f64.sqrt();
        let skew = QSystemData {
            algebra: q.algebra.clone(),
            unit: q.unit.scaled(cx(1.0 / root2, 0.0)),
            coproduct: q.coproduct.scaled(cx(root2, 0.0)),
        };
        match normalize_qsystem(&cat, &skew, &[QRelation::Q2, QRelation::Q3]) {
            Err(QfError::PrerequisiteFailed { relation: "Q2", .. }) => {}
            other => panic!("expected PrerequisiteFailed(Q2), got {:?}", other.map(|_| ())),
        }
        match normalize_qsystem(&cat, &q, &[QRelation::Q3, QRelation::Q3]) {
            Err(QfError::Shape(_)) => {}
            other => panic!("expected Shape error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn end_sqrt_pair_rejects_degenerate_blocks() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let lambda = rho.dual().tensor(&cat, &rho).unwrap();
        let zero = TwoArrow::zero(lambda.clone(), lambda);
        match end_sqrt_pair(&cat, &zero) {
            Err(QfError::HNotInvertible { .. }) => {}
            other => panic!("expected HNotInvertible, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn frobenius_with_central_factor_normalizes_to_a_qsystem() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let root2 = 2f64.sqrt();
        // All five identities hold with W'∘W = 2·1.
        let f = FrobeniusData {
            algebra: q.algebra.clone(),
            unit: q.unit.scaled(cx(1.0 / root2, 0.0)),
            counit: q.unit.adjoint().scaled(cx(1.0 / root2, 0.0)),
            coproduct: q.coproduct.scaled(cx(root2, 0.0)),
            product: q.coproduct.adjoint().scaled(cx(root2, 0.0)),
        };
        let frep = verify_frobenius(&cat, &f).unwrap();
        assert!(frep.max_residual() < 1e-9, "residual {:e}", frep.max_residual());

        let (out, rep) = frobenius_to_qsystem(&cat, &f).unwrap();
        assert!(rep.implied_residual < 1e-9);
        assert!(verify_qsystem(&cat, &out).unwrap().max_residual() < 1e-9);
        assert!(out.unit.dist_max(&q.unit) < 1e-9);
        assert!(out.coproduct.dist_max(&q.coproduct) < 1e-9);
    }

    #[test]
    fn non_scalar_multiplication_square_is_rejected() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let key = crate::model::FibreKey::new(0, 0);
        let mut diag = CMatrix::zeros(4, 4);
        for i in 0..4 {
            diag.set(i, i, cx(if i == 0 { 2.0 } else { 1.0 }, 0.0));
        }
        let twist = TwoArrow::from_blocks(
            &cat,
            q.algebra.clone(),
            q.algebra.clone(),
            BTreeMap::from([(key, diag)]),
        )
        .unwrap();
        let coproduct = compose_vertical(&cat, &q.coproduct, &twist).unwrap();
        let f = FrobeniusData {
            algebra: q.algebra.clone(),
            unit: q.unit.clone(),
            counit: q.unit.adjoint(),
            product: coproduct.adjoint(),
            coproduct,
        };
        match frobenius_to_qsystem(&cat, &f) {
            Err(QfError::NotStronglySeparable { .. }) => {}
            other => panic!("expected NotStronglySeparable, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn unit_positivity_lives_exactly_on_the_support() {
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["a1", "a2", "a3"]);
        b.object("B", &["b1"]);
        b.arrow(
            "rho",
            "B",
            "A",
            vec![RawFibre::plain("b1", "a1", 1), RawFibre::plain("b1", "a3", 2)],
        );
        let cat = b.build().unwrap();
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let z1 = end_values(&cat, &q.unit).unwrap();
        let ss = compose_vertical(
            &cat,
            &compose_vertical(&cat, &q.coproduct, &q.unit).unwrap().adjoint(),
            &compose_vertical(&cat, &q.coproduct, &q.unit).unwrap(),
        )
        .unwrap();
        let z2 = CentralFunction::from_end_unit(&cat, &ss).unwrap();
        let supp = support(&cat, &q.algebra, Side::Left);
        assert_eq!(supp, BTreeSet::from([0usize, 2]));
        for p in 0..3 {
            if supp.contains(&p) {
                assert!(z1.values[p].re >= 1.0 - 1e-9);
                assert!(z2.values[p].re >= 1.0 - 1e-9);
            } else {
                assert!(z1.values[p].norm() < 1e-12);
                assert!(z2.values[p].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn self_duality_pair_from_the_canonical_algebra() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let defect = self_duality_defect(&cat, &reinterpret(&q)).unwrap();
        assert!(defect < 1e-9, "defect {:e}", defect);
    }

    fn unitary_exp(cat: &P, h: &TwoArrow<f64>) -> TwoArrow<f64> {
        let mut blocks = BTreeMap::new();
        for (&key, block) in h.blocks() {
            let herm = block.add(&block.adjoint()).scaled(cx(0.5, 0.0));
            let eig = hermitian_eig(&herm, cat.tol()).unwrap();
            let n = herm.rows();
            let mut u = CMatrix::zeros(n, n);
            for j in 0..n {
                let phase = cx(eig.values[j].cos(), eig.values[j].sin());
                for r in 0..n {
                    for c in 0..n {
                        let v = eig.vectors.at(r, j) * eig.vectors.at(c, j).conj();
                        u.add_at(r, c, v * phase);
                    }
                }
            }
            blocks.insert(key, u);
        }
        TwoArrow::from_blocks(cat, h.source().clone(), h.target().clone(), blocks).unwrap()
    }

    #[test]
    fn residuals_are_invariant_under_unitary_transport() {
        let cat = load("heisenberg2.json");
        let rho = rho_of(&cat);
        let (_, q) = canonical_q(&cat, &rho);
        let basis = hom_basis(&cat, &q.algebra, &q.algebra).unwrap();
        let mut rng = SplitMix64::new(1203);
        let mut h = TwoArrow::zero(q.algebra.clone(), q.algebra.clone());
        for e in &basis.elements {
            h = h.add(&e.scaled(rng.next_complex_gaussian()));
        }
        let u = unitary_exp(&cat, &h);
        let id = TwoArrow::identity(&cat, &q.algebra);
        assert!(
            compose_vertical(&cat, &u.adjoint(), &u).unwrap().dist_max(&id) < 1e-12,
            "transport element must be unitary"
        );
        let moved = transport_qsystem(&cat, &q, &u).unwrap();
        let before = verify_qsystem(&cat, &q).unwrap();
        let after = verify_qsystem(&cat, &moved).unwrap();
        assert!(after.max_residual() < 1e-8);
        assert!((before.q1 - after.q1).abs() < 1e-8);
        assert!((before.q2 - after.q2).abs() < 1e-8);
        assert!((before.q3 - after.q3).abs() < 1e-8);
        assert!((before.q4 - after.q4).abs() < 1e-8);
    }

    #[test]
    fn jones_projections_are_projections() {
        for cat in [load("twopoint.json"), load("heisenberg3.json")] {
            let rho = rho_of(&cat);
            let sol = canonical_solution(&cat, &rho).unwrap();
            let (e, e_bar) = jones_projections(&cat, &sol).unwrap();
            for p in [e, e_bar] {
                let square = compose_vertical(&cat, &p, &p).unwrap();
                assert!(square.dist_max(&p) < 1e-10);
                assert!(p.adjoint().dist_max(&p) < 1e-10);
            }
        }
    }

    #[test]
    fn jones_projection_is_rank_one_per_middle() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let (e, _) = jones_projections(&cat, &sol).unwrap();
        let key = crate::model::FibreKey::new(0, 0);
        let block = e.block(key).unwrap();
        assert_eq!(block.rows(), 4);
        let eig = hermitian_eig(&block.hermitize(), cat.tol()).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (got, want) in eig.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_arrow_jones_projection_is_the_identity() {
        let cat = single_fibre(1);
        let rho = rho_of(&cat);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let (e, e_bar) = jones_projections(&cat, &sol).unwrap();
        let id = TwoArrow::identity(&cat, e.source());
        assert!(e.dist_max(&id) < 1e-12);
        assert!(e_bar.dist_max(&id) < 1e-12);
    }

    #[test]
    fn temperley_lieb_holds_with_the_dimension_coefficients() {
        for d in 1..=3usize {
            let cat = single_fibre(d);
            let rho = rho_of(&cat);
            let sol = canonical_solution(&cat, &rho).unwrap();
            let rep = verify_temperley_lieb(&cat, &sol, false).unwrap();
            assert!(rep.jones_rho < 1e-9, "d = {d}: residual {:e}", rep.jones_rho);
            assert!(rep.jones_dual < 1e-9);
            let want = 1.0 / ((d * d) as f64);
            assert_eq!(rep.coefficient_rho.len(), 1);
            assert!((rep.coefficient_rho[0].1 - want).abs() < 1e-9);
            assert!((rep.coefficient_dual[0].1 - want).abs() < 1e-9);
            let want_index = (d * d) as f64;
            assert!((rep.index[0].value - want_index).abs() < 1e-9);
        }
    }

    #[test]
    fn heisenberg3_coefficient_is_one_ninth() {
        let cat = load("heisenberg3.json");
        let rho = rho_of(&cat);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let rep = verify_temperley_lieb(&cat, &sol, false).unwrap();
        assert!(rep.max_residual() < 1e-9);
        assert!((rep.coefficient_rho[0].1 - 1.0 / 9.0).abs() < 1e-9);
        assert_eq!(rep.index[0].class, IndexClass::AtLeastFour);
    }

    #[test]
    fn temperley_lieb_on_a_balanced_multipoint_base() {
        let cat = load("balanced2.json");
        let rho = rho_of(&cat);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let rep = verify_temperley_lieb(&cat, &sol, false).unwrap();
        assert!(rep.max_residual() < 1e-9, "residual {:e}", rep.max_residual());
        // Fibre dimensions 2 and 1 give indices 4 and 1 over the two points.
        assert_eq!(rep.index.len(), 2);
        assert_eq!(rep.index[0].class, IndexClass::AtLeastFour);
        assert_eq!(rep.index[1].class, IndexClass::DiscreteSeries { k: 3 });
    }

    #[test]
    fn renormalization_restores_the_balanced_coefficients() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let root2 = 2f64.sqrt();
        let skew = SolutionPair::new(
            &cat,
            rho.clone(),
            sol.r.scaled(cx(root2, 0.0)),
            sol.r_bar.scaled(cx(1.0 / root2, 0.0)),
        )
        .unwrap();
        assert!(verify_conjugation(&cat, &skew).unwrap().max_residual() < 1e-12);

        let raw = verify_temperley_lieb(&cat, &skew, false).unwrap();
        assert!(raw.max_residual() > 0.1, "imbalanced pair must break the relation");

        let fixed = verify_temperley_lieb(&cat, &skew, true).unwrap();
        assert!(fixed.max_residual() < 1e-9);
        assert!((fixed.coefficient_rho[0].1 - 0.25).abs() < 1e-9);

        let balanced = renormalize_solution(&cat, &skew).unwrap();
        let w = end_values(&cat, &balanced.r).unwrap().values[0].re;
        let z = end_values(&cat, &balanced.r_bar).unwrap().values[0].re;
        assert!((w - 2.0).abs() < 1e-10);
        assert!((z - 2.0).abs() < 1e-10);
    }

    #[test]
    fn renormalization_requires_a_balanced_arrow() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        let sol = canonical_solution(&cat, &rho).unwrap();
        match renormalize_solution(&cat, &sol) {
            Err(QfError::Calc(CalcError::NotBalanced(_))) => {}
            other => panic!("expected NotBalanced, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn index_classifier_matches_the_discrete_series() {
        assert_eq!(classify_index(1.0), IndexClass::DiscreteSeries { k: 3 });
        assert_eq!(classify_index(2.0), IndexClass::DiscreteSeries { k: 4 });
        assert_eq!(classify_index(3.0), IndexClass::DiscreteSeries { k: 6 });
        let golden = 4.0 * (std::f64::consts::PI / 5.0).cos().powi(2);
        assert_eq!(classify_index(golden), IndexClass::DiscreteSeries { k: 5 });
        assert_eq!(classify_index(3.5), IndexClass::NotInSeries);
        assert_eq!(classify_index(4.0), IndexClass::AtLeastFour);
        assert_eq!(classify_index(9.0), IndexClass::AtLeastFour);
    }
}
