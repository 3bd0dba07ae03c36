//! Category presentations and normalized 1-arrow signatures.
//!
//! A presentation consists of finitely many objects (each a finite ordered
//! base of points), a finite symmetry group given by closing generator
//! tuples, and generator 1-arrows carrying per-fibre dimensions and unitary
//! representations. Arbitrary 1-arrows are normalized chains of atoms;
//! every chain has a signature: fibre dimensions and group representations
//! keyed by (target point, source point).
//!
//! Layout convention, fixed once and globally: the fibre of a chain
//! a₁ ⊗ a₂ ⊗ … ⊗ aₙ at key (t, s) is spanned by tuples
//! (ω₁, i₁, ω₂, i₂, …, ω_{n−1}, i_{n−1}, iₙ) enumerated lexicographically
//! with middle points in declared base order. Signatures realize this by a
//! right fold: rep(chain) = ⊕_{ω₁} rep(a₁)(t,ω₁) ⊗ rep(rest)(ω₁,s).
//! Horizontal composition of 2-arrows uses the same fold, which is what
//! makes ⊗ of 2-arrows strictly associative here.

use crate::numerics::{
    cx, direct_sum_blocks, group_closure, kron, CMatrix, GroupClosure, NumError, Scalar,
    Tolerance, GROUP_CAP,
};
use serde::Deserialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("validation failed ({constraint}): {detail}")]
    Validation {
        constraint: &'static str,
        detail: String,
    },
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("unknown arrow '{0}'")]
    UnknownArrow(String),
    #[error("unknown point '{point}' on object '{object}'")]
    UnknownPoint { object: String, point: String },
    #[error("type mismatch: expected source object '{expected}', found target object '{found}'")]
    TypeMismatch { expected: String, found: String },
    #[error("parts do not partition the base: {0}")]
    NotAPartition(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type ModelResult<V> = Result<V, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GenId(pub usize);

/// Fibre key: indices of (target-object point, source-object point) in the
/// declared base orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FibreKey {
    pub tgt: usize,
    pub src: usize,
}

impl FibreKey {
    pub fn new(tgt: usize, src: usize) -> Self {
        FibreKey { tgt, src }
    }

    pub fn swap(self) -> Self {
        FibreKey {
            tgt: self.src,
            src: self.tgt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectDecl {
    pub name: String,
    pub base: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GeneratorDecl {
    pub name: String,
    pub source: ObjectId,
    pub target: ObjectId,
    /// Only keys with dim ≥ 1 are present.
    pub dims: BTreeMap<FibreKey, usize>,
}

/// Fibre data of a 1-arrow: dimensions and one unitary per group element,
/// both keyed by (target point, source point). Keys with zero dimension are
/// absent from both tables.
#[derive(Debug, Clone)]
pub struct Signature<T: Scalar> {
    pub source: ObjectId,
    pub target: ObjectId,
    pub dims: BTreeMap<FibreKey, usize>,
    /// reps[g][key]: unitary of size dims[key], for every group element g.
    pub reps: Vec<BTreeMap<FibreKey, CMatrix<T>>>,
}

impl<T: Scalar> Signature<T> {
    pub fn dim(&self, key: FibreKey) -> usize {
        self.dims.get(&key).copied().unwrap_or(0)
    }

    pub fn rep(&self, elem: usize, key: FibreKey) -> Option<&CMatrix<T>> {
        self.reps[elem].get(&key)
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    fn dualized(&self) -> Self {
        let dims = self
            .dims
            .iter()
            .map(|(k, &d)| (k.swap(), d))
            .collect::<BTreeMap<_, _>>();
        let reps = self
            .reps
            .iter()
            .map(|per| per.iter().map(|(k, m)| (k.swap(), m.conj())).collect())
            .collect();
        Signature {
            source: self.target,
            target: self.source,
            dims,
            reps,
        }
    }
}

static NEXT_ATOM_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_atom_id() -> u64 {
    NEXT_ATOM_ID.fetch_add(1, Ordering::Relaxed)
}

/// A subobject of a parent chain, cut out by a per-fibre isometry family
/// W: sub → parent. Identity of the subobject is nominal (the id), because
/// the isometry is fixed only up to a unitary on the sub side.
#[derive(Debug)]
pub struct SubData<T: Scalar> {
    pub id: u64,
    pub name: String,
    pub parent: Arrow<T>,
    pub source: ObjectId,
    pub target: ObjectId,
    pub dims: BTreeMap<FibreKey, usize>,
    /// W per key, shape parent_dim × sub_dim, W*W = 1.
    pub isometry: BTreeMap<FibreKey, CMatrix<T>>,
    /// W* u(g) W per group element, precomputed and unitary.
    pub reps: Vec<BTreeMap<FibreKey, CMatrix<T>>>,
}

/// A finite direct sum of parallel arrows; fibres are stacked in part order.
/// With no parts this is the zero arrow.
#[derive(Debug)]
pub struct SumData<T: Scalar> {
    pub id: u64,
    pub name: String,
    pub parts: Vec<Arrow<T>>,
    pub source: ObjectId,
    pub target: ObjectId,
}

#[derive(Debug, Clone)]
pub enum AtomBase<T: Scalar> {
    Gen(GenId),
    Sub(Arc<SubData<T>>),
    Sum(Arc<SumData<T>>),
}

impl<T: Scalar> PartialEq for AtomBase<T> {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (AtomBase::Gen(a), AtomBase::Gen(b)) => a == b,
            (AtomBase::Sub(a), AtomBase::Sub(b)) => a.id == b.id,
            (AtomBase::Sum(a), AtomBase::Sum(b)) => a.id == b.id,
            _ => false,
        }
    }
}

impl<T: Scalar> Eq for AtomBase<T> {}

impl<T: Scalar> Hash for AtomBase<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            AtomBase::Gen(g) => {
                state.write_u8(0);
                state.write_usize(g.0);
            }
            AtomBase::Sub(d) => {
                state.write_u8(1);
                state.write_u64(d.id);
            }
            AtomBase::Sum(d) => {
                state.write_u8(2);
                state.write_u64(d.id);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Atom<T: Scalar> {
    base: AtomBase<T>,
    dual: bool,
}

impl<T: Scalar> PartialEq for Atom<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dual == other.dual && self.base == other.base
    }
}

impl<T: Scalar> Eq for Atom<T> {}

impl<T: Scalar> Hash for Atom<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.base.hash(state);
        self.dual.hash(state);
    }
}

impl<T: Scalar> Atom<T> {
    pub fn base(&self) -> &AtomBase<T> {
        &self.base
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    fn underlying_endpoints(&self, cat: &CategoryPresentation<T>) -> (ObjectId, ObjectId) {
        match &self.base {
            AtomBase::Gen(g) => {
                let decl = cat.generator(*g);
                (decl.source, decl.target)
            }
            AtomBase::Sub(d) => (d.source, d.target),
            AtomBase::Sum(d) => (d.source, d.target),
        }
    }

    pub fn source(&self, cat: &CategoryPresentation<T>) -> ObjectId {
        let (s, t) = self.underlying_endpoints(cat);
        if self.dual {
            t
        } else {
            s
        }
    }

    pub fn target(&self, cat: &CategoryPresentation<T>) -> ObjectId {
        let (s, t) = self.underlying_endpoints(cat);
        if self.dual {
            s
        } else {
            t
        }
    }

    fn display(&self, cat: &CategoryPresentation<T>) -> String {
        let name = match &self.base {
            AtomBase::Gen(g) => cat.generator(*g).name.clone(),
            AtomBase::Sub(d) => d.name.clone(),
            AtomBase::Sum(d) => d.name.clone(),
        };
        if self.dual {
            format!("dual({name})")
        } else {
            name
        }
    }
}

/// A normalized 1-arrow: a chain of atoms ordered target-to-source. The
/// empty chain is the unit arrow of its (single) object. Units are dropped
/// on tensoring and double duals cancel, so structural equality of chains
/// is equality modulo the strictness identities.
#[derive(Debug, Clone)]
pub struct Arrow<T: Scalar> {
    source: ObjectId,
    target: ObjectId,
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> PartialEq for Arrow<T> {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.target == other.target && self.atoms == other.atoms
    }
}

impl<T: Scalar> Eq for Arrow<T> {}

impl<T: Scalar> Hash for Arrow<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.source.hash(state);
        self.target.hash(state);
        self.atoms.hash(state);
    }
}

impl<T: Scalar> Arrow<T> {
    pub fn unit(object: ObjectId) -> Self {
        Arrow {
            source: object,
            target: object,
            atoms: Vec::new(),
        }
    }

    pub fn generator(cat: &CategoryPresentation<T>, g: GenId) -> Self {
        let decl = cat.generator(g);
        Arrow {
            source: decl.source,
            target: decl.target,
            atoms: vec![Atom {
                base: AtomBase::Gen(g),
                dual: false,
            }],
        }
    }

    pub fn source(&self) -> ObjectId {
        self.source
    }

    pub fn target(&self) -> ObjectId {
        self.target
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn is_unit(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dual(&self) -> Self {
        let atoms = self
            .atoms
            .iter()
            .rev()
            .map(|a| Atom {
                base: a.base.clone(),
                dual: !a.dual,
            })
            .collect();
        Arrow {
            source: self.target,
            target: self.source,
            atoms,
        }
    }

    /// σ.tensor(ρ) = σ ⊗ ρ, defined when source(σ) = target(ρ).
    pub fn tensor(&self, cat: &CategoryPresentation<T>, other: &Self) -> ModelResult<Self> {
        if self.source != other.target {
            return Err(ModelError::TypeMismatch {
                expected: cat.object(self.source).name.clone(),
                found: cat.object(other.target).name.clone(),
            });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(Arrow {
            source: other.source,
            target: self.target,
            atoms,
        })
    }

    /// Chain split into leading atom and remainder, both as arrows.
    pub fn split_head(&self, cat: &CategoryPresentation<T>) -> Option<(Arrow<T>, Arrow<T>)> {
        let (head, rest) = self.atoms.split_first()?;
        let mid = head.source(cat);
        Some((
            Arrow {
                source: mid,
                target: self.target,
                atoms: vec![head.clone()],
            },
            Arrow {
                source: self.source,
                target: mid,
                atoms: rest.to_vec(),
            },
        ))
    }

    /// Prefix/suffix split at atom position p (prefix gets the first p atoms).
    pub fn split_at(&self, cat: &CategoryPresentation<T>, p: usize) -> (Arrow<T>, Arrow<T>) {
        assert!(p <= self.atoms.len());
        let mid = if p == 0 {
            self.target
        } else {
            self.atoms[p - 1].source(cat)
        };
        (
            Arrow {
                source: mid,
                target: self.target,
                atoms: self.atoms[..p].to_vec(),
            },
            Arrow {
                source: self.source,
                target: mid,
                atoms: self.atoms[p..].to_vec(),
            },
        )
    }

    pub fn display(&self, cat: &CategoryPresentation<T>) -> String {
        if self.atoms.is_empty() {
            return format!("unit({})", cat.object(self.source).name);
        }
        self.atoms
            .iter()
            .map(|a| a.display(cat))
            .collect::<Vec<_>>()
            .join(" * ")
    }
}

pub struct CategoryPresentation<T: Scalar> {
    objects: Vec<ObjectDecl>,
    generators: Vec<GeneratorDecl>,
    group: GroupClosure<T>,
    group_gen_names: Vec<String>,
    /// Raw generator tuples in slot order, kept for re-keying on refinement.
    group_gen_tuples: Vec<Vec<CMatrix<T>>>,
    slot_index: HashMap<(GenId, FibreKey), usize>,
    tol: Tolerance<T>,
    sig_cache: Mutex<HashMap<Arrow<T>, Arc<Signature<T>>>>,
}

impl<T: Scalar> fmt::Debug for CategoryPresentation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CategoryPresentation")
            .field("objects", &self.objects)
            .field("generators", &self.generators)
            .field("group_order", &self.group.order())
            .finish()
    }
}

impl<T: Scalar> CategoryPresentation<T> {
    pub fn objects(&self) -> &[ObjectDecl] {
        &self.objects
    }

    pub fn object(&self, id: ObjectId) -> &ObjectDecl {
        &self.objects[id.0]
    }

    pub fn object_id(&self, name: &str) -> ModelResult<ObjectId> {
        self.objects
            .iter()
            .position(|o| o.name == name)
            .map(ObjectId)
            .ok_or_else(|| ModelError::UnknownObject(name.to_string()))
    }

    pub fn point_count(&self, id: ObjectId) -> usize {
        self.objects[id.0].base.len()
    }

    pub fn point_index(&self, id: ObjectId, label: &str) -> ModelResult<usize> {
        self.objects[id.0]
            .base
            .iter()
            .position(|p| p == label)
            .ok_or_else(|| ModelError::UnknownPoint {
                object: self.objects[id.0].name.clone(),
                point: label.to_string(),
            })
    }

    pub fn generators(&self) -> &[GeneratorDecl] {
        &self.generators
    }

    pub fn generator(&self, id: GenId) -> &GeneratorDecl {
        &self.generators[id.0]
    }

    pub fn gen_id(&self, name: &str) -> ModelResult<GenId> {
        self.generators
            .iter()
            .position(|g| g.name == name)
            .map(GenId)
            .ok_or_else(|| ModelError::UnknownArrow(name.to_string()))
    }

    pub fn group(&self) -> &GroupClosure<T> {
        &self.group
    }

    pub fn group_order(&self) -> usize {
        self.group.order()
    }

    pub fn tol(&self) -> &Tolerance<T> {
        &self.tol
    }

    pub fn signature(&self, arrow: &Arrow<T>) -> Arc<Signature<T>> {
        if let Some(s) = self.sig_cache.lock().unwrap().get(arrow) {
            return s.clone();
        }
        let sig = Arc::new(self.compute_signature(arrow));
        let mut cache = self.sig_cache.lock().unwrap();
        cache.entry(arrow.clone()).or_insert(sig).clone()
    }

    fn compute_signature(&self, arrow: &Arrow<T>) -> Signature<T> {
        match arrow.atoms.len() {
            0 => self.unit_signature(arrow.source),
            1 => self.atom_signature(&arrow.atoms[0]),
            _ => {
                let (head, rest) = arrow.split_head(self).expect("nonempty chain");
                let head_sig = self.atom_signature(&head.atoms[0]);
                let rest_sig = self.signature(&rest);
                self.fold_tensor(&head_sig, &rest_sig)
            }
        }
    }

    fn unit_signature(&self, object: ObjectId) -> Signature<T> {
        let n = self.point_count(object);
        let dims: BTreeMap<FibreKey, usize> =
            (0..n).map(|i| (FibreKey::new(i, i), 1)).collect();
        let one_block = CMatrix::identity(1);
        let reps = (0..self.group_order())
            .map(|_| {
                (0..n)
                    .map(|i| (FibreKey::new(i, i), one_block.clone()))
                    .collect()
            })
            .collect();
        Signature {
            source: object,
            target: object,
            dims,
            reps,
        }
    }

    fn atom_signature(&self, atom: &Atom<T>) -> Signature<T> {
        let base = match &atom.base {
            AtomBase::Gen(g) => {
                let decl = self.generator(*g);
                let reps = (0..self.group_order())
                    .map(|e| {
                        decl.dims
                            .keys()
                            .map(|&k| {
                                let slot = self.slot_index[&(*g, k)];
                                (k, self.group.elements[e][slot].clone())
                            })
                            .collect()
                    })
                    .collect();
                Signature {
                    source: decl.source,
                    target: decl.target,
                    dims: decl.dims.clone(),
                    reps,
                }
            }
            AtomBase::Sub(d) => Signature {
                source: d.source,
                target: d.target,
                dims: d.dims.clone(),
                reps: d.reps.clone(),
            },
            AtomBase::Sum(d) => self.sum_signature(d),
        };
        if atom.dual {
            base.dualized()
        } else {
            base
        }
    }

    fn sum_signature(&self, d: &SumData<T>) -> Signature<T> {
        let part_sigs: Vec<Arc<Signature<T>>> =
            d.parts.iter().map(|p| self.signature(p)).collect();
        let mut dims: BTreeMap<FibreKey, usize> = BTreeMap::new();
        for s in &part_sigs {
            for (&k, &v) in &s.dims {
                *dims.entry(k).or_insert(0) += v;
            }
        }
        let reps = (0..self.group_order())
            .map(|e| {
                dims.keys()
                    .map(|&k| {
                        let blocks: Vec<CMatrix<T>> = part_sigs
                            .iter()
                            .filter_map(|s| s.reps[e].get(&k).cloned())
                            .collect();
                        (k, direct_sum_blocks(&blocks))
                    })
                    .collect()
            })
            .collect();
        Signature {
            source: d.source,
            target: d.target,
            dims,
            reps,
        }
    }

    /// rep(head ⊗ rest) at (t, s) = ⊕_m kron(head(t,m), rest(m,s)),
    /// middle points m in declared base order.
    fn fold_tensor(&self, head: &Signature<T>, rest: &Signature<T>) -> Signature<T> {
        debug_assert_eq!(head.source, rest.target);
        let mid_points = self.point_count(head.source);
        let mut dims: BTreeMap<FibreKey, usize> = BTreeMap::new();
        for t in 0..self.point_count(head.target) {
            for s in 0..self.point_count(rest.source) {
                let mut d = 0;
                for m in 0..mid_points {
                    d += head.dim(FibreKey::new(t, m)) * rest.dim(FibreKey::new(m, s));
                }
                if d > 0 {
                    dims.insert(FibreKey::new(t, s), d);
                }
            }
        }
        let reps = (0..self.group_order())
            .map(|e| {
                dims.keys()
                    .map(|&k| {
                        let mut blocks = Vec::new();
                        for m in 0..mid_points {
                            let (hk, rk) = (FibreKey::new(k.tgt, m), FibreKey::new(m, k.src));
                            if let (Some(h), Some(r)) =
                                (head.reps[e].get(&hk), rest.reps[e].get(&rk))
                            {
                                blocks.push(kron(h, r));
                            }
                        }
                        (k, direct_sum_blocks(&blocks))
                    })
                    .collect()
            })
            .collect();
        Signature {
            source: rest.source,
            target: head.target,
            dims,
            reps,
        }
    }

    /// Register a subobject of `parent` cut out by the isometry family
    /// `isometry` (one block per fibre key, shape parent_dim × sub_dim).
    /// The range of each block must be invariant under the group action.
    pub fn sub_arrow(
        &self,
        name: &str,
        parent: &Arrow<T>,
        isometry: BTreeMap<FibreKey, CMatrix<T>>,
    ) -> ModelResult<Arrow<T>> {
        let psig = self.signature(parent);
        let mut dims = BTreeMap::new();
        for (&k, w) in &isometry {
            let pd = psig.dim(k);
            if pd == 0 || w.rows() != pd {
                return Err(ModelError::Validation {
                    constraint: "sub-shape",
                    detail: format!(
                        "isometry block at {k:?} has {} rows, parent fibre has dim {pd}",
                        w.rows()
                    ),
                });
            }
            if w.cols() == 0 {
                continue;
            }
            let defect = w.adjoint().mul(w).identity_defect();
            if defect > self.tol.sqrt_atol() {
                return Err(ModelError::Validation {
                    constraint: "isometry",
                    detail: format!("W*W deviates from identity by {defect} at {k:?}"),
                });
            }
            dims.insert(k, w.cols());
        }
        let isometry: BTreeMap<FibreKey, CMatrix<T>> = isometry
            .into_iter()
            .filter(|(k, _)| dims.contains_key(k))
            .collect();
        let mut reps: Vec<BTreeMap<FibreKey, CMatrix<T>>> = Vec::with_capacity(self.group_order());
        for e in 0..self.group_order() {
            let mut per = BTreeMap::new();
            for (&k, w) in &isometry {
                let u = psig.reps[e].get(&k).expect("parent rep present");
                let range_proj = w.mul(&w.adjoint());
                let commute = u.mul(&range_proj).dist_max(&range_proj.mul(u));
                if commute > self.tol.sqrt_atol() {
                    return Err(ModelError::Validation {
                        constraint: "sub-invariance",
                        detail: format!(
                            "isometry range at {k:?} not invariant under the group (defect {commute})"
                        ),
                    });
                }
                per.insert(k, w.adjoint().mul(u).mul(w));
            }
            reps.push(per);
        }
        let data = SubData {
            id: fresh_atom_id(),
            name: name.to_string(),
            parent: parent.clone(),
            source: parent.source,
            target: parent.target,
            dims,
            isometry,
            reps,
        };
        Ok(Arrow {
            source: parent.source,
            target: parent.target,
            atoms: vec![Atom {
                base: AtomBase::Sub(Arc::new(data)),
                dual: false,
            }],
        })
    }

    /// Direct sum of parallel arrows, fibres stacked in part order.
    pub fn sum_arrow(&self, name: &str, parts: &[Arrow<T>]) -> ModelResult<Arrow<T>> {
        let first = parts.first().ok_or_else(|| ModelError::Validation {
            constraint: "sum-parts",
            detail: "direct sum needs at least one part (use zero_arrow for the empty sum)"
                .to_string(),
        })?;
        for p in parts {
            if p.source != first.source || p.target != first.target {
                return Err(ModelError::Validation {
                    constraint: "sum-parallel",
                    detail: format!(
                        "'{}' and '{}' are not parallel",
                        first.display(self),
                        p.display(self)
                    ),
                });
            }
        }
        let data = SumData {
            id: fresh_atom_id(),
            name: name.to_string(),
            parts: parts.to_vec(),
            source: first.source,
            target: first.target,
        };
        Ok(Arrow {
            source: first.source,
            target: first.target,
            atoms: vec![Atom {
                base: AtomBase::Sum(Arc::new(data)),
                dual: false,
            }],
        })
    }

    /// The zero arrow between two objects: every fibre dimension is 0.
    pub fn zero_arrow(&self, source: ObjectId, target: ObjectId) -> Arrow<T> {
        let data = SumData {
            id: fresh_atom_id(),
            name: format!(
                "zero({},{})",
                self.object(target).name,
                self.object(source).name
            ),
            parts: Vec::new(),
            source,
            target,
        };
        Arrow {
            source,
            target,
            atoms: vec![Atom {
                base: AtomBase::Sum(Arc::new(data)),
                dual: false,
            }],
        }
    }

    /// Split one object's base along a partition, producing a presentation
    /// with one object per part. Generators touching the object split
    /// accordingly; the symmetry group is carried over slot-for-slot.
    pub fn refine_object(
        &self,
        object: &str,
        parts: &[Vec<String>],
    ) -> ModelResult<CategoryPresentation<T>> {
        let oid = self.object_id(object)?;
        let base = &self.object(oid).base;
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for part in parts {
            if part.is_empty() {
                return Err(ModelError::NotAPartition("empty part".into()));
            }
            for label in part {
                if !base.iter().any(|b| b == label) {
                    return Err(ModelError::NotAPartition(format!(
                        "'{label}' is not a point of '{object}'"
                    )));
                }
                if seen.insert(label.as_str(), 1).is_some() {
                    return Err(ModelError::NotAPartition(format!(
                        "'{label}' appears in two parts"
                    )));
                }
            }
        }
        if seen.len() != base.len() {
            return Err(ModelError::NotAPartition(format!(
                "parts cover {} of {} points",
                seen.len(),
                base.len()
            )));
        }

        let mut builder = PresentationBuilder::new(self.tol);
        for (i, obj) in self.objects.iter().enumerate() {
            if ObjectId(i) == oid {
                for (k, part) in parts.iter().enumerate() {
                    let name = format!("{}#{}", obj.name, k);
                    builder.object(&name, &part.iter().map(String::as_str).collect::<Vec<_>>());
                }
            } else {
                builder.object(&obj.name, &obj.base.iter().map(String::as_str).collect::<Vec<_>>());
            }
        }
        for g in &self.group_gen_names {
            builder.group_generator(g);
        }

        // Which part a point of the refined object belongs to, by old index.
        let part_of: HashMap<usize, usize> = parts
            .iter()
            .enumerate()
            .flat_map(|(k, part)| {
                part.iter().map(move |label| {
                    (
                        base.iter().position(|b| b == label).expect("validated"),
                        k,
                    )
                })
            })
            .collect();

        for (gi, gen) in self.generators.iter().enumerate() {
            let src_parts = if gen.source == oid { parts.len() } else { 1 };
            let tgt_parts = if gen.target == oid { parts.len() } else { 1 };
            for tp in 0..tgt_parts {
                for sp in 0..src_parts {
                    let mut name = gen.name.clone();
                    if gen.target == oid && tgt_parts > 1 {
                        name.push_str(&format!("#t{tp}"));
                    }
                    if gen.source == oid && src_parts > 1 {
                        name.push_str(&format!("#s{sp}"));
                    }
                    let src_name = if gen.source == oid {
                        format!("{}#{}", self.object(oid).name, sp)
                    } else {
                        self.object(gen.source).name.clone()
                    };
                    let tgt_name = if gen.target == oid {
                        format!("{}#{}", self.object(oid).name, tp)
                    } else {
                        self.object(gen.target).name.clone()
                    };
                    let mut fibres = Vec::new();
                    for (&key, &dim) in &gen.dims {
                        if gen.source == oid && part_of[&key.src] != sp {
                            continue;
                        }
                        if gen.target == oid && part_of[&key.tgt] != tp {
                            continue;
                        }
                        let to = self.object(gen.target).base[key.tgt].clone();
                        let from = self.object(gen.source).base[key.src].clone();
                        let slot = self.slot_index[&(GenId(gi), key)];
                        let reps: BTreeMap<String, CMatrix<T>> = self
                            .group_gen_names
                            .iter()
                            .enumerate()
                            .map(|(gg, gname)| {
                                (gname.clone(), self.group_gen_tuples[gg][slot].clone())
                            })
                            .collect();
                        fibres.push(RawFibre {
                            to,
                            from,
                            dim,
                            reps,
                        });
                    }
                    builder.arrow(&name, &tgt_name, &src_name, fibres);
                }
            }
        }
        builder.build()
    }
}

/// One fibre of a generator arrow during construction: point labels, a
/// dimension, and one unitary per named group generator.
#[derive(Debug, Clone)]
pub struct RawFibre<T: Scalar> {
    pub to: String,
    pub from: String,
    pub dim: usize,
    pub reps: BTreeMap<String, CMatrix<T>>,
}

impl<T: Scalar> RawFibre<T> {
    pub fn plain(to: &str, from: &str, dim: usize) -> Self {
        RawFibre {
            to: to.to_string(),
            from: from.to_string(),
            dim,
            reps: BTreeMap::new(),
        }
    }

    pub fn with_rep(mut self, group_gen: &str, u: CMatrix<T>) -> Self {
        self.reps.insert(group_gen.to_string(), u);
        self
    }
}

struct RawArrow<T: Scalar> {
    name: String,
    target: String,
    source: String,
    fibres: Vec<RawFibre<T>>,
}

pub struct PresentationBuilder<T: Scalar> {
    objects: Vec<ObjectDecl>,
    group_gens: Vec<String>,
    arrows: Vec<RawArrow<T>>,
    tol: Tolerance<T>,
}

impl<T: Scalar> PresentationBuilder<T> {
    pub fn new(tol: Tolerance<T>) -> Self {
        PresentationBuilder {
            objects: Vec::new(),
            group_gens: Vec::new(),
            arrows: Vec::new(),
            tol,
        }
    }

    pub fn object(&mut self, name: &str, base: &[&str]) -> &mut Self {
        self.objects.push(ObjectDecl {
            name: name.to_string(),
            base: base.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn group_generator(&mut self, name: &str) -> &mut Self {
        self.group_gens.push(name.to_string());
        self
    }

    /// Declare a generator arrow `name: source → target`. Note the argument
    /// order (target first) matching the fibre key order.
    pub fn arrow(
        &mut self,
        name: &str,
        target: &str,
        source: &str,
        fibres: Vec<RawFibre<T>>,
    ) -> &mut Self {
        self.arrows.push(RawArrow {
            name: name.to_string(),
            target: target.to_string(),
            source: source.to_string(),
            fibres,
        });
        self
    }

    pub fn build(self) -> ModelResult<CategoryPresentation<T>> {
        for obj in &self.objects {
            if obj.base.is_empty() {
                return Err(ModelError::Validation {
                    constraint: "base-nonempty",
                    detail: format!("object '{}' has an empty base", obj.name),
                });
            }
            let mut labels = obj.base.clone();
            labels.sort();
            labels.dedup();
            if labels.len() != obj.base.len() {
                return Err(ModelError::Validation {
                    constraint: "base-distinct",
                    detail: format!("object '{}' repeats a point label", obj.name),
                });
            }
        }
        let mut names: Vec<&str> = self.objects.iter().map(|o| o.name.as_str()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.objects.len() {
            return Err(ModelError::Validation {
                constraint: "object-names-distinct",
                detail: "two objects share a name".into(),
            });
        }
        {
            let mut gnames: Vec<&str> = self.group_gens.iter().map(String::as_str).collect();
            gnames.sort();
            gnames.dedup();
            if gnames.len() != self.group_gens.len() {
                return Err(ModelError::Validation {
                    constraint: "group-names-distinct",
                    detail: "two group generators share a name".into(),
                });
            }
        }

        let objects = self.objects;
        let find_object = |name: &str| -> ModelResult<ObjectId> {
            objects
                .iter()
                .position(|o| o.name == name)
                .map(ObjectId)
                .ok_or_else(|| ModelError::UnknownObject(name.to_string()))
        };
        let point_of = |oid: ObjectId, label: &str| -> ModelResult<usize> {
            objects[oid.0]
                .base
                .iter()
                .position(|p| p == label)
                .ok_or_else(|| ModelError::UnknownPoint {
                    object: objects[oid.0].name.clone(),
                    point: label.to_string(),
                })
        };

        let mut generators = Vec::new();
        let mut slot_index = HashMap::new();
        let mut slots: Vec<(usize, FibreKey)> = Vec::new();
        let mut fibre_tables: Vec<BTreeMap<FibreKey, &RawFibre<T>>> = Vec::new();
        {
            let mut anames: Vec<&str> = self.arrows.iter().map(|a| a.name.as_str()).collect();
            anames.sort();
            anames.dedup();
            if anames.len() != self.arrows.len() {
                return Err(ModelError::Validation {
                    constraint: "arrow-names-distinct",
                    detail: "two generator arrows share a name".into(),
                });
            }
        }
        for (gi, raw) in self.arrows.iter().enumerate() {
            let source = find_object(&raw.source)?;
            let target = find_object(&raw.target)?;
            let mut dims = BTreeMap::new();
            let mut table = BTreeMap::new();
            for fibre in &raw.fibres {
                let key = FibreKey::new(point_of(target, &fibre.to)?, point_of(source, &fibre.from)?);
                if fibre.dim == 0 {
                    return Err(ModelError::Validation {
                        constraint: "fibre-dim-positive",
                        detail: format!(
                            "arrow '{}' fibre ({}, {}) declares dim 0; omit the key instead",
                            raw.name, fibre.to, fibre.from
                        ),
                    });
                }
                if dims.insert(key, fibre.dim).is_some() {
                    return Err(ModelError::Parse {
                        line: 1,
                        col: 1,
                        message: format!(
                            "duplicate fibre key (to={}, from={}) in arrow '{}'",
                            fibre.to, fibre.from, raw.name
                        ),
                    });
                }
                table.insert(key, fibre);
            }
            for &key in dims.keys() {
                slot_index.insert((GenId(gi), key), slots.len());
                slots.push((gi, key));
            }
            generators.push(GeneratorDecl {
                name: raw.name.clone(),
                source,
                target,
                dims,
            });
            fibre_tables.push(table);
        }

        let mut group_gen_tuples: Vec<Vec<CMatrix<T>>> = Vec::new();
        for gname in &self.group_gens {
            let mut tuple = Vec::with_capacity(slots.len());
            for &(gi, key) in &slots {
                let fibre = fibre_tables[gi][&key];
                let dim = generators[gi].dims[&key];
                let u = fibre.reps.get(gname).ok_or_else(|| ModelError::Validation {
                    constraint: "missing-representation",
                    detail: format!(
                        "arrow '{}' fibre ({}, {}) lacks a matrix for group generator '{}'",
                        generators[gi].name, fibre.to, fibre.from, gname
                    ),
                })?;
                if u.rows() != dim || u.cols() != dim {
                    return Err(ModelError::Validation {
                        constraint: "rep-shape",
                        detail: format!(
                            "arrow '{}' fibre ({}, {}): rep for '{}' is {}x{}, expected {dim}x{dim}",
                            generators[gi].name,
                            fibre.to,
                            fibre.from,
                            gname,
                            u.rows(),
                            u.cols()
                        ),
                    });
                }
                let defect = u.adjoint().mul(u).identity_defect();
                if defect > self.tol.sqrt_atol() {
                    return Err(ModelError::Validation {
                        constraint: "unitarity",
                        detail: format!(
                            "arrow '{}' fibre ({}, {}): rep for '{}' deviates from unitary by {defect}",
                            generators[gi].name, fibre.to, fibre.from, gname
                        ),
                    });
                }
                tuple.push(u.clone());
            }
            group_gen_tuples.push(tuple);
        }

        let group = if group_gen_tuples.is_empty() {
            let slot_dims: Vec<usize> = slots.iter().map(|&(gi, k)| generators[gi].dims[&k]).collect();
            GroupClosure::trivial(&slot_dims)
        } else {
            group_closure(&group_gen_tuples, GROUP_CAP, &self.tol)?
        };

        Ok(CategoryPresentation {
            objects,
            generators,
            group,
            group_gen_names: self.group_gens,
            group_gen_tuples,
            slot_index,
            tol: self.tol,
            sig_cache: Mutex::new(HashMap::new()),
        })
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDto {
    objects: Vec<ObjectDto>,
    #[serde(default)]
    group: Option<GroupDto>,
    #[serde(default)]
    arrows: Vec<ArrowDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDto {
    name: String,
    base: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDto {
    generators: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrowDto {
    name: String,
    source: String,
    target: String,
    fibres: Vec<FibreDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FibreDto {
    to: String,
    from: String,
    dim: usize,
    #[serde(default)]
    reps: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

fn matrix_from_dto<T: Scalar>(
    rows: &[Vec<[f64; 2]>],
    context: &str,
) -> ModelResult<CMatrix<T>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(ModelError::Validation {
            constraint: "rep-shape",
            detail: format!("{context}: ragged matrix rows"),
        });
    }
    let mut m = CMatrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(ModelError::Validation {
                    constraint: "finite-entries",
                    detail: format!("{context}: non-finite entry at ({i}, {j})"),
                });
            }
            m.set(i, j, cx(re, im));
        }
    }
    Ok(m)
}

/// Load a presentation from its JSON text form. Complex entries are
/// `[re, im]` pairs; a missing "group" key means the trivial group; missing
/// fibre keys mean dimension 0.
pub fn load_presentation<T: Scalar>(
    text: &str,
    tol: Tolerance<T>,
) -> ModelResult<CategoryPresentation<T>> {
    let dto: FileDto = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        line: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    let mut builder = PresentationBuilder::new(tol);
    for obj in &dto.objects {
        builder.object(&obj.name, &obj.base.iter().map(String::as_str).collect::<Vec<_>>());
    }
    if let Some(group) = &dto.group {
        for g in &group.generators {
            builder.group_generator(g);
        }
    }
    for arrow in &dto.arrows {
        let mut fibres = Vec::new();
        for f in &arrow.fibres {
            let mut raw = RawFibre::plain(&f.to, &f.from, f.dim);
            for (gname, rows) in &f.reps {
                let context = format!("arrow '{}' fibre ({}, {}) rep '{}'", arrow.name, f.to, f.from, gname);
                raw.reps.insert(gname.clone(), matrix_from_dto(rows, &context)?);
            }
            fibres.push(raw);
        }
        builder.arrow(&arrow.name, &arrow.target, &arrow.source, fibres);
    }
    builder.build()
}
