//! Report assembly and emission. The JSON document on stdout is byte-stable
//! for a fixed input file, flag set and seed; wall time and prose go to
//! stderr so pipelines can consume stdout directly.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

/// Failures before any verification ran (bad files, flags, names, shapes)
/// exit with 2; failures of numerical checks or their preconditions exit
/// with 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

pub type CliResult<V> = Result<V, CliError>;

pub fn validation(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

pub fn numerical(e: impl fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// One verified statement. `certifies` says in plain language what a passing
/// entry establishes about the input.
#[derive(Serialize)]
pub struct Entry {
    pub name: String,
    pub certifies: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<serde_json::Value>,
    pub pass: bool,
}

impl Entry {
    /// Residual compared against the report tolerance.
    pub fn residual(
        name: impl Into<String>,
        certifies: impl Into<String>,
        residual: f64,
        tol: f64,
    ) -> Entry {
        Entry {
            name: name.into(),
            certifies: certifies.into(),
            residual: Some(residual),
            value: None,
            pass: residual.is_finite() && residual < tol,
        }
    }

    /// Smallest eigenvalue of an operator that must be positive; passes when
    /// it does not dip below minus the tolerance.
    pub fn eigen_floor(
        name: impl Into<String>,
        certifies: impl Into<String>,
        min_eigenvalue: f64,
        tol: f64,
    ) -> Entry {
        Entry {
            name: name.into(),
            certifies: certifies.into(),
            residual: None,
            value: Some(serde_json::json!(min_eigenvalue)),
            pass: min_eigenvalue.is_finite() && min_eigenvalue >= -tol,
        }
    }

    /// Reported value with an explicit pass flag.
    pub fn value(
        name: impl Into<String>,
        certifies: impl Into<String>,
        value: serde_json::Value,
        pass: bool,
    ) -> Entry {
        Entry {
            name: name.into(),
            certifies: certifies.into(),
            residual: None,
            value: Some(value),
            pass,
        }
    }
}

#[derive(Serialize)]
pub struct EvalOutcome {
    pub expr: String,
    pub source: String,
    pub target: String,
    pub frobenius_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fibre: Option<FibreSlice>,
}

/// Blocks of a 2-arrow at one source base point, one per target point.
#[derive(Serialize)]
pub struct FibreSlice {
    pub point: usize,
    pub blocks: Vec<FibreBlock>,
}

#[derive(Serialize)]
pub struct FibreBlock {
    pub target_point: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
pub struct DimValues {
    pub left: BTreeMap<String, f64>,
    pub right: BTreeMap<String, f64>,
}

#[derive(Serialize)]
pub struct NormalizationOutcome {
    pub applied_h_move: bool,
    pub implied: String,
    pub implied_residual: f64,
}

#[derive(Serialize)]
pub struct IndexOutcome {
    pub point: String,
    pub value: f64,
    pub class: String,
}

#[derive(Serialize)]
pub struct OrbitPoint {
    pub object: String,
    pub point: String,
    pub unit_end_dim: usize,
}

#[derive(Serialize)]
pub struct GeneratorOutcome {
    pub arrow: String,
    pub theta: BTreeMap<usize, usize>,
    pub conjugation_residual: f64,
}

/// The machine-readable result of one invocation.
#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub input: String,
    pub digest: String,
    pub tolerance: f64,
    pub jobs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: Vec<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_two: Option<bool>,
    #[serde(rename = "dimA", skip_serializing_if = "Option::is_none")]
    pub dim_a: Option<BTreeMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_condition: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Vec<EvalOutcome>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimensions: Option<DimValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<Vec<IndexOutcome>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit: Option<Vec<OrbitPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<GeneratorOutcome>>,
}

impl Report {
    pub fn new(command: &str, input: &str, digest: String, tolerance: f64, jobs: usize) -> Report {
        Report {
            command: command.to_string(),
            input: input.to_string(),
            digest,
            tolerance,
            jobs,
            seed: None,
            entries: Vec::new(),
            depth_two: None,
            dim_a: None,
            axioms: None,
            pairing_condition: None,
            results: None,
            dimensions: None,
            normalization: None,
            index: None,
            orbit: None,
            generators: None,
        }
    }

    /// JSON to stdout, prose and wall time to stderr. Returns whether every
    /// entry passed.
    pub fn emit(&self, started: Instant) -> bool {
        let json = serde_json::to_string(self).expect("report serialization");
        println!("{json}");
        let failed: Vec<&Entry> = self.entries.iter().filter(|e| !e.pass).collect();
        eprintln!(
            "fibrecat {} {}: {} checks, {}",
            self.command,
            self.input,
            self.entries.len(),
            if failed.is_empty() {
                "all passed".to_string()
            } else {
                format!("{} failed", failed.len())
            }
        );
        for e in &failed {
            match e.residual {
                Some(r) => eprintln!("  FAIL {} (residual {r:.3e})", e.name),
                None => eprintln!("  FAIL {}", e.name),
            }
        }
        eprintln!("  wall time {:.3} s", started.elapsed().as_secs_f64());
        failed.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization")
    }
}
