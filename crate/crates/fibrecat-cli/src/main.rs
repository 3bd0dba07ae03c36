//! `fibrecat`: verification reports for finite equivariant 2-category
//! presentations. Every subcommand loads a category file, runs the checks it
//! names, and prints one JSON report to stdout; prose and wall time go to
//! stderr. Exit code 0 means every check passed, 2 a validation error, 3 a
//! numerical failure.

mod inputs;
mod report;

use clap::{Parser, Subcommand};
use fibrecat::conjugation::{
    canonical_solution, cap_inequalities, dimension, dimension_product_bound, fibre_category,
    is_standard, pimsner_popa, random_equivariant_invertible, relating_invertible, standardize,
    transform_solution, verify_conjugation,
};
use fibrecat::dsl::{run_expression, SolutionTable};
use fibrecat::homcalc::{compose_vertical, fibre_eval, hom_basis, TwoArrow};
use fibrecat::hopf::{verify_hopf, HopfData};
use fibrecat::model::{load_presentation, Arrow, CategoryPresentation};
use fibrecat::numerics::{SplitMix64, Tolerance};
use fibrecat::qfrobenius::{
    canonical_qsystem, frobenius_to_qsystem, normalize_qsystem, verify_frobenius, verify_qsystem,
    verify_temperley_lieb, FrobeniusData, IndexClass, QRelation, QSystemData,
};
use inputs::{
    arrow_from_text, parse_bindings, point_index, point_label, read_script, resolve_tolerance,
    two_arrow_from_file,
};
use report::{
    numerical, validation, CliError, CliResult, DimValues, Entry, EvalOutcome, FibreBlock,
    FibreSlice, GeneratorOutcome, IndexOutcome, NormalizationOutcome, OrbitPoint, Report,
};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

type Cat = CategoryPresentation<f64>;
type Op = TwoArrow<f64>;
type Arr = Arrow<f64>;

/// Scale of seeded perturbations in `standardize --perturb`.
const PERTURB_EPS: f64 = 0.35;
/// Seed for the deterministic random positives drawn by `check`.
const CHECK_SEED: u64 = 0x5EED_C4EC;

#[derive(Parser)]
#[command(
    name = "fibrecat",
    version,
    about = "Verification reports for finite equivariant 2-category presentations",
    long_about = "Loads a category presentation from a JSON file, runs the checks named by \
the subcommand, and prints a machine-readable report to stdout. Arrow arguments are \
expressions over generator names with dual(..), unit(OBJECT) and the tensor '*'. \
Reports are byte-stable for a fixed input, flag set and seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Tolerance for every pass/fail comparison (overrides FIBRECAT_TOL).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for independent checks.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Conjugation axioms, standardness and the inequality suite for every generator.
    Check { file: PathBuf },
    /// Evaluate diagram expressions; raw 2-arrows enter via --bind NAME=PATH block files.
    Eval {
        file: PathBuf,
        /// A single expression.
        #[arg(long, conflicts_with = "script")]
        expr: Option<String>,
        /// Script file, one expression per line, '#' comments.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Also print the blocks of each result at this source base point (label or index).
        #[arg(long)]
        fibre: Option<String>,
        /// Bind NAME to the 2-arrow in the JSON block file at PATH (repeatable).
        #[arg(long = "bind", value_name = "NAME=PATH")]
        bind: Vec<String>,
    },
    /// Standardize the canonical solution of an arrow, optionally after a seeded perturbation.
    Standardize {
        file: PathBuf,
        #[arg(long)]
        arrow: String,
        /// Perturb by a random equivariant invertible drawn from this seed.
        #[arg(long, value_name = "SEED")]
        perturb: Option<u64>,
    },
    /// Left and right dimension functions of an arrow.
    Dim {
        file: PathBuf,
        #[arg(long)]
        arrow: String,
    },
    /// Canonical Q-system on dual(arrow) * arrow; verify its relations or normalize it.
    Qsystem {
        file: PathBuf,
        #[arg(long)]
        arrow: String,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        normalize: bool,
    },
    /// Verify or normalize a Frobenius algebra given by bound data. Required bindings:
    /// algebra=ARROW_EXPR and unit, counit, coproduct, product as block-file paths.
    Frobenius {
        file: PathBuf,
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        bind: Vec<String>,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        normalize: bool,
    },
    /// Depth-two Hopf reconstruction report for an irreducible balanced arrow.
    Hopf {
        file: PathBuf,
        #[arg(long)]
        arrow: String,
        /// Also write the JSON report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fibre category over the orbit of a base point under balanced generators.
    Fibre {
        file: PathBuf,
        #[arg(long)]
        object: String,
        /// Base point label or index.
        #[arg(long)]
        point: String,
        /// Comma-separated arrow expressions.
        #[arg(long)]
        generators: String,
    },
    /// Temperley-Lieb relations for the Jones projections of an arrow.
    Tl {
        file: PathBuf,
        #[arg(long)]
        arrow: String,
        /// Rebalance the solution before checking the relations.
        #[arg(long)]
        renormalize: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    match dispatch(&cli) {
        Ok((report, out)) => {
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, report.to_json() + "\n") {
                    eprintln!("error: cannot write '{}': {e}", path.display());
                    std::process::exit(2);
                }
            }
            let ok = report.emit(started);
            std::process::exit(if ok { 0 } else { 3 });
        }
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            std::process::exit(2);
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("error: {m}");
            std::process::exit(3);
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<(Report, Option<PathBuf>)> {
    let tol = resolve_tolerance(cli.tol)?;
    if cli.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let (name, file) = match &cli.command {
        Command::Check { file } => ("check", file),
        Command::Eval { file, .. } => ("eval", file),
        Command::Standardize { file, .. } => ("standardize", file),
        Command::Dim { file, .. } => ("dim", file),
        Command::Qsystem { file, .. } => ("qsystem", file),
        Command::Frobenius { file, .. } => ("frobenius", file),
        Command::Hopf { file, .. } => ("hopf", file),
        Command::Fibre { file, .. } => ("fibre", file),
        Command::Tl { file, .. } => ("tl", file),
    };
    let bytes = std::fs::read(file)
        .map_err(|e| validation(format!("cannot read '{}': {e}", file.display())))?;
    let digest = format!("sha256:{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|e| validation(format!("'{}' is not UTF-8: {e}", file.display())))?;
    let model_tol = Tolerance::uniform(tol).map_err(validation)?;
    let cat = load_presentation(&text, model_tol).map_err(validation)?;

    let mut rep = Report::new(name, &file.display().to_string(), digest, tol, cli.jobs);
    let mut out_path = None;
    match &cli.command {
        Command::Check { .. } => cmd_check(&cat, tol, cli.jobs, &mut rep)?,
        Command::Eval {
            expr,
            script,
            fibre,
            bind,
            ..
        } => cmd_eval(&cat, tol, expr, script, fibre, bind, &mut rep)?,
        Command::Standardize { arrow, perturb, .. } => {
            cmd_standardize(&cat, tol, arrow, *perturb, &mut rep)?
        }
        Command::Dim { arrow, .. } => cmd_dim(&cat, tol, arrow, &mut rep)?,
        Command::Qsystem {
            arrow,
            verify,
            normalize,
            ..
        } => cmd_qsystem(&cat, tol, arrow, pick_mode(*verify, *normalize)?, &mut rep)?,
        Command::Frobenius {
            bind,
            verify,
            normalize,
            ..
        } => cmd_frobenius(&cat, tol, bind, pick_mode(*verify, *normalize)?, &mut rep)?,
        Command::Hopf { arrow, out, .. } => {
            cmd_hopf(&cat, tol, arrow, &mut rep)?;
            out_path = out.clone();
        }
        Command::Fibre {
            object,
            point,
            generators,
            ..
        } => cmd_fibre(&cat, tol, object, point, generators, &mut rep)?,
        Command::Tl {
            arrow, renormalize, ..
        } => cmd_tl(&cat, tol, arrow, *renormalize, &mut rep)?,
    }
    Ok((rep, out_path))
}

fn pick_mode(verify: bool, normalize: bool) -> CliResult<bool> {
    match (verify, normalize) {
        (true, false) => Ok(false),
        (false, true) => Ok(true),
        _ => Err(CliError::Validation(
            "exactly one of --verify and --normalize is required".into(),
        )),
    }
}

fn random_end(cat: &Cat, chain: &Arr, rng: &mut SplitMix64) -> CliResult<Op> {
    let basis = hom_basis(cat, chain, chain).map_err(numerical)?;
    let mut acc = TwoArrow::zero(chain.clone(), chain.clone());
    for e in &basis.elements {
        acc = acc.add(&e.scaled(rng.next_complex_gaussian()));
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn check_generator(cat: &Cat, tol: f64, idx: usize, name: &str) -> CliResult<Vec<Entry>> {
    let rho = Arrow::generator(cat, cat.gen_id(name).map_err(validation)?);
    let mut out = Vec::new();
    let sol = canonical_solution(cat, &rho).map_err(numerical)?;
    let conj = verify_conjugation(cat, &sol).map_err(numerical)?;
    out.push(Entry::residual(
        format!("{name}: conjugation"),
        "the canonical solution satisfies both conjugate equations",
        conj.max_residual(),
        tol,
    ));
    out.push(Entry::residual(
        format!("{name}: standardness"),
        "the canonical solution is standard",
        is_standard(cat, &sol).map_err(numerical)?,
        tol,
    ));
    for bound in cap_inequalities(cat, &sol).map_err(numerical)? {
        out.push(Entry::eigen_floor(
            format!("{name}: cap bound {}", bound.name),
            "a cap composite forced positive by the conjugate equations",
            bound.min_eigenvalue,
            tol,
        ));
    }
    let prod = dimension_product_bound(cat, &sol).map_err(numerical)?;
    out.push(Entry::eigen_floor(
        format!("{name}: dimension product bound"),
        "the product of the two cap scalars dominates the identity",
        prod.min_eigenvalue,
        tol,
    ));
    let mut rng = SplitMix64::new(CHECK_SEED.wrapping_add(idx as u64));
    for k in 0..3 {
        let t = random_end(cat, &rho, &mut rng)?;
        let x = compose_vertical(cat, &t.adjoint(), &t).map_err(numerical)?;
        let bound = pimsner_popa(cat, &sol, &x).map_err(numerical)?;
        out.push(Entry::eigen_floor(
            format!("{name}: operator bound on random positive {k}"),
            "a positive endomorphism is dominated by its conditioned lift",
            bound.min_eigenvalue,
            tol,
        ));
    }
    Ok(out)
}

fn cmd_check(cat: &Cat, tol: f64, jobs: usize, rep: &mut Report) -> CliResult<()> {
    let names: Vec<String> = cat.generators().iter().map(|g| g.name.clone()).collect();
    let mut results: Vec<CliResult<Vec<Entry>>> = Vec::new();
    if jobs <= 1 || names.len() <= 1 {
        for (idx, name) in names.iter().enumerate() {
            results.push(check_generator(cat, tol, idx, name));
        }
    } else {
        // workers pull generator indices; assembly stays in declaration order
        let slots: Vec<Mutex<Option<CliResult<Vec<Entry>>>>> =
            names.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(names.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= names.len() {
                        break;
                    }
                    let r = check_generator(cat, tol, i, &names[i]);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        for slot in slots {
            results.push(slot.into_inner().unwrap().expect("worker finished"));
        }
    }
    rep.seed = Some(CHECK_SEED);
    for r in results {
        rep.entries.extend(r?);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn cmd_eval(
    cat: &Cat,
    tol: f64,
    expr: &Option<String>,
    script: &Option<PathBuf>,
    fibre: &Option<String>,
    bind: &[String],
    rep: &mut Report,
) -> CliResult<()> {
    let exprs = match (expr, script) {
        (Some(e), None) => vec![e.clone()],
        (None, Some(p)) => read_script(p)?,
        _ => {
            return Err(CliError::Validation(
                "exactly one of --expr and --script is required".into(),
            ))
        }
    };
    if exprs.is_empty() {
        return Err(CliError::Validation("no expressions to evaluate".into()));
    }
    let mut bindings: BTreeMap<String, Op> = BTreeMap::new();
    for (name, path) in parse_bindings(bind)? {
        bindings.insert(name, two_arrow_from_file(cat, PathBuf::from(path).as_path())?);
    }
    let mut table = SolutionTable::new();
    let mut outcomes = Vec::new();
    for text in &exprs {
        let result = run_expression(cat, text, &bindings, &mut table).map_err(validation)?;
        let norm = result.frob_norm();
        rep.entries.push(Entry::residual(
            text.clone(),
            "the expression parses, typechecks and evaluates on this presentation",
            if norm.is_finite() { 0.0 } else { f64::INFINITY },
            tol.max(f64::MIN_POSITIVE),
        ));
        let slice = match fibre {
            Some(token) => {
                let src_obj = result.source().source();
                let w = point_index(cat, src_obj, token)?;
                let blocks = fibre_eval(cat, &result, w).map_err(numerical)?;
                Some(FibreSlice {
                    point: w,
                    blocks: blocks
                        .iter()
                        .enumerate()
                        .map(|(tp, m)| FibreBlock {
                            target_point: tp,
                            matrix: (0..m.rows())
                                .map(|i| {
                                    (0..m.cols())
                                        .map(|j| [m.at(i, j).re, m.at(i, j).im])
                                        .collect()
                                })
                                .collect(),
                        })
                        .collect(),
                })
            }
            None => None,
        };
        outcomes.push(EvalOutcome {
            expr: text.clone(),
            source: result.source().display(cat),
            target: result.target().display(cat),
            frobenius_norm: norm,
            fibre: slice,
        });
    }
    rep.results = Some(outcomes);
    Ok(())
}

// ---------------------------------------------------------------------------
// standardize
// ---------------------------------------------------------------------------

fn cmd_standardize(
    cat: &Cat,
    tol: f64,
    arrow: &str,
    perturb: Option<u64>,
    rep: &mut Report,
) -> CliResult<()> {
    let rho = arrow_from_text(cat, arrow)?;
    let base = canonical_solution(cat, &rho).map_err(numerical)?;
    let sol = match perturb {
        Some(seed) => {
            rep.seed = Some(seed);
            let mut rng = SplitMix64::new(seed);
            let a = random_equivariant_invertible(cat, &rho, &mut rng, PERTURB_EPS)
                .map_err(numerical)?;
            transform_solution(cat, &base, &a).map_err(numerical)?
        }
        None => base.clone(),
    };
    let before = is_standard(cat, &sol).map_err(numerical)?;
    rep.entries.push(Entry::value(
        "standardness defect before",
        "the defect the standardization has to remove",
        serde_json::json!(before),
        before.is_finite(),
    ));
    let (fixed, _) = standardize(cat, &sol).map_err(numerical)?;
    rep.entries.push(Entry::residual(
        "conjugation after",
        "the standardized pair still satisfies the conjugate equations",
        verify_conjugation(cat, &fixed).map_err(numerical)?.max_residual(),
        tol,
    ));
    rep.entries.push(Entry::residual(
        "standardness after",
        "the standardized pair is standard",
        is_standard(cat, &fixed).map_err(numerical)?,
        tol,
    ));
    // uniqueness: the invertible relating this output to the standardization
    // of the unperturbed canonical solution must be unitary
    let (reference, _) = standardize(cat, &base).map_err(numerical)?;
    let u = relating_invertible(cat, &reference, &fixed).map_err(numerical)?;
    let id = TwoArrow::identity(cat, &rho);
    let defect = compose_vertical(cat, &u.adjoint(), &u)
        .map_err(numerical)?
        .dist_max(&id)
        .max(
            compose_vertical(cat, &u, &u.adjoint())
                .map_err(numerical)?
                .dist_max(&id),
        );
    rep.entries.push(Entry::residual(
        "uniqueness unitary",
        "standard solutions for the same arrow differ by a unitary",
        defect,
        tol,
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// dim
// ---------------------------------------------------------------------------

fn cmd_dim(cat: &Cat, tol: f64, arrow: &str, rep: &mut Report) -> CliResult<()> {
    let rho = arrow_from_text(cat, arrow)?;
    let sol = canonical_solution(cat, &rho).map_err(numerical)?;
    let (fixed, _) = standardize(cat, &sol).map_err(numerical)?;
    let dims = dimension(cat, &fixed).map_err(numerical)?;
    let mut imag: f64 = 0.0;
    let mut left = BTreeMap::new();
    for (w, v) in dims.left.values.iter().enumerate() {
        imag = imag.max(v.im.abs());
        left.insert(point_label(cat, dims.left.object, w), v.re);
    }
    let mut right = BTreeMap::new();
    for (w, v) in dims.right.values.iter().enumerate() {
        imag = imag.max(v.im.abs());
        right.insert(point_label(cat, dims.right.object, w), v.re);
    }
    for (label, v) in &left {
        rep.entries.push(Entry::value(
            format!("left dimension at {label}"),
            "squared norm of the standard cap over this source point",
            serde_json::json!(v),
            v.is_finite() && *v >= -tol,
        ));
    }
    for (label, v) in &right {
        rep.entries.push(Entry::value(
            format!("right dimension at {label}"),
            "squared norm of the standard cocap over this target point",
            serde_json::json!(v),
            v.is_finite() && *v >= -tol,
        ));
    }
    rep.entries.push(Entry::residual(
        "dimensions are real",
        "both dimension functions have vanishing imaginary part",
        imag,
        tol,
    ));
    rep.dimensions = Some(DimValues { left, right });
    Ok(())
}

// ---------------------------------------------------------------------------
// qsystem / frobenius
// ---------------------------------------------------------------------------

fn push_qsystem_entries(
    cat: &Cat,
    tol: f64,
    q: &QSystemData<f64>,
    rep: &mut Report,
) -> CliResult<()> {
    let qrep = verify_qsystem(cat, q).map_err(numerical)?;
    let rows = [
        ("Q1 unit law", "the unit splits the coproduct on both sides", qrep.q1),
        ("Q2 isometry", "the coproduct is an isometry", qrep.q2),
        ("Q3 coassociativity", "the two double coproducts agree", qrep.q3),
        (
            "Q4 exchange",
            "the coproduct exchanges with its adjoint past a tensor leg",
            qrep.q4,
        ),
    ];
    for (name, certifies, residual) in rows {
        rep.entries.push(Entry::residual(name, certifies, residual, tol));
    }
    Ok(())
}

fn cmd_qsystem(
    cat: &Cat,
    tol: f64,
    arrow: &str,
    normalize: bool,
    rep: &mut Report,
) -> CliResult<()> {
    let rho = arrow_from_text(cat, arrow)?;
    let sol = canonical_solution(cat, &rho).map_err(numerical)?;
    let (fixed, _) = standardize(cat, &sol).map_err(numerical)?;
    let q = canonical_qsystem(cat, &fixed).map_err(numerical)?;
    if normalize {
        let (normalized, nrep) =
            normalize_qsystem(cat, &q, &[QRelation::Q3, QRelation::Q4]).map_err(numerical)?;
        rep.entries.push(Entry::residual(
            format!("implied relation {}", nrep.implied),
            "the relation implied by the assumed ones after the unit move",
            nrep.implied_residual,
            tol,
        ));
        rep.normalization = Some(NormalizationOutcome {
            applied_h_move: nrep.applied_h_move,
            implied: nrep.implied.to_string(),
            implied_residual: nrep.implied_residual,
        });
        push_qsystem_entries(cat, tol, &normalized, rep)
    } else {
        push_qsystem_entries(cat, tol, &q, rep)
    }
}

fn cmd_frobenius(
    cat: &Cat,
    tol: f64,
    bind: &[String],
    normalize: bool,
    rep: &mut Report,
) -> CliResult<()> {
    let mut values = parse_bindings(bind)?;
    let mut take = |name: &str| {
        values.remove(name).ok_or_else(|| {
            CliError::Validation(format!("missing required binding '{name}=...'"))
        })
    };
    let algebra = arrow_from_text(cat, &take("algebra")?)?;
    let unit = two_arrow_from_file(cat, PathBuf::from(take("unit")?).as_path())?;
    let counit = two_arrow_from_file(cat, PathBuf::from(take("counit")?).as_path())?;
    let coproduct = two_arrow_from_file(cat, PathBuf::from(take("coproduct")?).as_path())?;
    let product = two_arrow_from_file(cat, PathBuf::from(take("product")?).as_path())?;
    if let Some(extra) = values.keys().next() {
        return Err(CliError::Validation(format!("unknown binding '{extra}'")));
    }
    let f = FrobeniusData::new(cat, algebra, unit, counit, coproduct, product)
        .map_err(validation)?;
    if normalize {
        let (q, nrep) = frobenius_to_qsystem(cat, &f).map_err(numerical)?;
        rep.entries.push(Entry::residual(
            format!("implied relation {}", nrep.implied),
            "the relation implied by the normalization moves",
            nrep.implied_residual,
            tol,
        ));
        rep.normalization = Some(NormalizationOutcome {
            applied_h_move: nrep.applied_h_move,
            implied: nrep.implied.to_string(),
            implied_residual: nrep.implied_residual,
        });
        push_qsystem_entries(cat, tol, &q, rep)
    } else {
        let frep = verify_frobenius(cat, &f).map_err(numerical)?;
        let rows = [
            ("coassociativity", "the two double coproducts agree", frep.coassociativity),
            ("associativity", "the two double products agree", frep.associativity),
            ("counit law", "the counit splits the coproduct", frep.counit_law),
            ("unit law", "the unit splits the product", frep.unit_law),
            (
                "exchange law",
                "product and coproduct satisfy the exchange identity",
                frep.frobenius_law,
            ),
        ];
        for (name, certifies, residual) in rows {
            rep.entries.push(Entry::residual(name, certifies, residual, tol));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// hopf
// ---------------------------------------------------------------------------

fn cmd_hopf(cat: &Cat, tol: f64, arrow: &str, rep: &mut Report) -> CliResult<()> {
    let rho = arrow_from_text(cat, arrow)?;
    let h = HopfData::new(cat, &rho).map_err(numerical)?;
    let hrep = verify_hopf(cat, &h).map_err(numerical)?;
    let src = h.a_arrow.source();
    rep.depth_two = Some(hrep.depth_two());
    rep.entries.push(Entry::value(
        "depth two",
        "the composite of the arrow with its dual generates in one step",
        serde_json::json!(hrep.depth_two()),
        hrep.depth_two(),
    ));
    let mut dim_a = BTreeMap::new();
    let mut pairing = BTreeMap::new();
    let mut axioms: BTreeMap<String, f64> = BTreeMap::new();
    for point in &hrep.points {
        let label = point_label(cat, src, point.point);
        dim_a.insert(label.clone(), point.dim_a);
        pairing.insert(label.clone(), point.pairing_condition);
        for (name, residual) in point.axioms.entries() {
            let slot = axioms.entry(name.to_string()).or_insert(0.0);
            *slot = slot.max(residual);
        }
        rep.entries.push(Entry::value(
            format!("pairing condition at {label}"),
            "condition number of the duality pairing between the two fibre algebras",
            serde_json::json!(point.pairing_condition),
            point.pairing_condition.is_finite(),
        ));
        rep.entries.push(Entry::value(
            format!("integral dimension at {label}"),
            "the fibre algebra dimension is the square of an integer scalar",
            serde_json::json!(point.dimension_integral),
            point.dimension_integral,
        ));
    }
    for (name, residual) in &axioms {
        // the convolution-unit variant of the antipode law is informational:
        // it measures how far the convolution unit sits from the algebra unit
        if name == "antipode_law_convolution_unit" {
            rep.entries.push(Entry::value(
                format!("axiom {name}"),
                "distance between the convolution unit and the algebra unit normalizations",
                serde_json::json!(residual),
                residual.is_finite(),
            ));
        } else {
            rep.entries.push(Entry::residual(
                format!("axiom {name}"),
                "a defining identity of the reconstructed finite-dimensional Hopf algebra",
                *residual,
                tol,
            ));
        }
    }
    rep.dim_a = Some(dim_a);
    rep.axioms = Some(axioms);
    rep.pairing_condition = Some(pairing);
    Ok(())
}

// ---------------------------------------------------------------------------
// fibre
// ---------------------------------------------------------------------------

fn cmd_fibre(
    cat: &Cat,
    tol: f64,
    object: &str,
    point: &str,
    generators: &str,
    rep: &mut Report,
) -> CliResult<()> {
    let obj = cat.object_id(object).map_err(validation)?;
    let w = point_index(cat, obj, point)?;
    let gens: Vec<Arr> = generators
        .split(',')
        .map(|t| arrow_from_text(cat, t.trim()))
        .collect::<CliResult<_>>()?;
    if gens.is_empty() {
        return Err(CliError::Validation("--generators must name at least one arrow".into()));
    }
    let frep = fibre_category(cat, obj, w, &gens).map_err(numerical)?;
    let mut orbit = Vec::new();
    for p in &frep.orbit {
        let label = point_label(cat, p.object, p.point);
        rep.entries.push(Entry::value(
            format!("unit end dimension at {}:{label}", cat.object(p.object).name),
            "the fibre unit is simple at this orbit point",
            serde_json::json!(p.unit_end_dim),
            p.unit_end_dim == 1,
        ));
        orbit.push(OrbitPoint {
            object: cat.object(p.object).name.clone(),
            point: label,
            unit_end_dim: p.unit_end_dim,
        });
    }
    let mut gen_out = Vec::new();
    for g in &frep.generators {
        rep.entries.push(Entry::residual(
            format!("fibre conjugation for {}", g.arrow),
            "the restricted generator keeps a conjugation solution in the fibre",
            g.conjugation_residual,
            tol,
        ));
        gen_out.push(GeneratorOutcome {
            arrow: g.arrow.clone(),
            theta: g.theta.clone(),
            conjugation_residual: g.conjugation_residual,
        });
    }
    rep.orbit = Some(orbit);
    rep.generators = Some(gen_out);
    Ok(())
}

// ---------------------------------------------------------------------------
// tl
// ---------------------------------------------------------------------------

fn class_label(class: &IndexClass) -> String {
    match class {
        IndexClass::DiscreteSeries { k } => format!("discrete series 4cos^2(pi/{k})"),
        IndexClass::AtLeastFour => "at least 4".to_string(),
        IndexClass::NotInSeries => "outside the discrete series".to_string(),
    }
}

fn cmd_tl(cat: &Cat, tol: f64, arrow: &str, renormalize: bool, rep: &mut Report) -> CliResult<()> {
    let rho = arrow_from_text(cat, arrow)?;
    let sol = canonical_solution(cat, &rho).map_err(numerical)?;
    let trep = verify_temperley_lieb(cat, &sol, renormalize).map_err(numerical)?;
    rep.entries.push(Entry::value(
        "renormalized",
        "whether the solution was rebalanced before the relations were checked",
        serde_json::json!(trep.renormalized),
        true,
    ));
    rep.entries.push(Entry::residual(
        "Jones relation on the arrow side",
        "the alternating triple of Jones projections collapses with the squared cap scalar",
        trep.jones_rho,
        tol,
    ));
    rep.entries.push(Entry::residual(
        "Jones relation on the dual side",
        "the mirrored alternating triple collapses with the squared cocap scalar",
        trep.jones_dual,
        tol,
    ));
    for (p, c) in &trep.coefficient_rho {
        rep.entries.push(Entry::value(
            format!("coefficient (arrow side) at point {p}"),
            "inverse squared cap scalar entering the Jones relation",
            serde_json::json!(c),
            c.is_finite() && *c > 0.0,
        ));
    }
    for (p, c) in &trep.coefficient_dual {
        rep.entries.push(Entry::value(
            format!("coefficient (dual side) at point {p}"),
            "inverse squared cocap scalar entering the Jones relation",
            serde_json::json!(c),
            c.is_finite() && *c > 0.0,
        ));
    }
    let mut index = Vec::new();
    for iv in &trep.index {
        let class = class_label(&iv.class);
        rep.entries.push(Entry::value(
            format!("index at point {}", iv.point),
            "squared cap scalar with its discrete-series membership",
            serde_json::json!({ "value": iv.value, "class": class }),
            iv.value.is_finite() && iv.value >= 1.0 - tol,
        ));
        index.push(IndexOutcome {
            point: iv.point.to_string(),
            value: iv.value,
            class,
        });
    }
    rep.index = Some(index);
    Ok(())
}
