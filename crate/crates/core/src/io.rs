//! Versioned JSON files for spaces, partitions of unity, trees and reports.
//!
//! Every file is a JSON object carrying `"v": 1`. Floats are written in
//! shortest round-trip form, so loading and re-saving a file reproduces it.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::covers::DecompositionTree;
use crate::metric::{FiniteMetricSpace, MetricError, Norm, PointSubset, Provenance};
use crate::simplex::{PartitionOfUnity, SimplexError, SimplexPoint, VertexId};
use crate::verify::{CoverFamily, VerifyError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error("file is for {file} points but the space has {space}")]
    SizeMismatch { file: usize, space: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

/// Pretty-printed JSON with the schema version prepended and a trailing newline.
pub fn to_file_string<T: Serialize>(body: &T) -> Result<String, IoError> {
    let mut out = serde_json::to_string_pretty(&Versioned { v: SCHEMA_VERSION, body })?;
    out.push('\n');
    Ok(out)
}

fn from_file_str<T: DeserializeOwned>(s: &str) -> Result<T, IoError> {
    let raw: Value = serde_json::from_str(s)?;
    let v = raw.get("v").and_then(Value::as_u64).unwrap_or(0) as u32;
    if v != SCHEMA_VERSION {
        return Err(IoError::Version(v));
    }
    Ok(serde_json::from_value::<Versioned<T>>(raw)?.body)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SpaceBody {
    Matrix {
        rows: Vec<Vec<f64>>,
    },
    Graph {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
    Points {
        /// `"inf"` or the exponent `p` as a string.
        norm: String,
        coords: Vec<Vec<f64>>,
    },
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    #[serde(flatten)]
    body: SpaceBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<Value>,
}

fn norm_name(norm: Norm) -> String {
    match norm {
        Norm::Infinity => "inf".into(),
        Norm::P(p) => p.to_string(),
    }
}

fn parse_norm(s: &str) -> Result<Norm, MetricError> {
    match s {
        "inf" => Ok(Norm::Infinity),
        _ => s.parse::<f64>().map(Norm::P).map_err(|_| MetricError::BadNorm(f64::NAN)),
    }
}

/// Serializes a space, with optional generator metadata (kind, parameters, seed).
pub fn space_to_string(space: &FiniteMetricSpace, generator: Option<Value>) -> Result<String, IoError> {
    let n = space.len();
    let body = match space.provenance() {
        Provenance::Graph => {
            let adjacency = space.adjacency().expect("graph spaces keep their adjacency");
            let edges = adjacency
                .iter()
                .enumerate()
                .flat_map(|(u, out)| out.iter().filter(move |&&(v, _)| u < v).map(move |&(v, w)| (u, v, w)))
                .collect();
            SpaceBody::Graph { n, edges }
        }
        Provenance::Points(norm) => {
            let (coords, _) = space.coordinates().expect("point spaces keep their coordinates");
            SpaceBody::Points { norm: norm_name(norm), coords: coords.to_vec() }
        }
        Provenance::Matrix => SpaceBody::Matrix { rows: (0..n).map(|x| space.row(x).into_owned()).collect() },
    };
    to_file_string(&SpaceFile { body, generator })
}

/// Loads a space and validates it.
pub fn load_space(s: &str) -> Result<FiniteMetricSpace, IoError> {
    let file: SpaceFile = from_file_str(s)?;
    Ok(match file.body {
        SpaceBody::Matrix { rows } => FiniteMetricSpace::from_matrix(rows)?,
        SpaceBody::Graph { n, edges } => FiniteMetricSpace::from_graph(n, &edges)?,
        SpaceBody::Points { norm, coords } => FiniteMetricSpace::from_points(coords, parse_norm(&norm)?)?,
    })
}

#[derive(Serialize, Deserialize)]
struct PouFile {
    n: usize,
    values: Vec<(usize, Vec<(VertexId, f64)>)>,
}

pub fn pou_to_string(f: &PartitionOfUnity) -> Result<String, IoError> {
    let values = f.iter().map(|(x, p)| (x, p.weights().to_vec())).collect();
    to_file_string(&PouFile { n: f.host_len(), values })
}

/// Loads a partition of unity for a space of `n` points, checking every
/// point id and simplex invariant.
pub fn load_pou(s: &str, n: usize) -> Result<PartitionOfUnity, IoError> {
    let file: PouFile = from_file_str(s)?;
    if file.n != n {
        return Err(IoError::SizeMismatch { file: file.n, space: n });
    }
    let entries = file
        .values
        .into_iter()
        .map(|(x, w)| SimplexPoint::new(w).map(|p| (x, p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PartitionOfUnity::from_entries(n, entries)?)
}

pub fn tree_to_string(tree: &DecompositionTree) -> Result<String, IoError> {
    to_file_string(tree)
}

pub fn load_tree(s: &str) -> Result<DecompositionTree, IoError> {
    from_file_str(s)
}

#[derive(Serialize, Deserialize)]
struct FamilyEntry {
    members: Vec<PointSubset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claimed_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claimed_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct FamiliesFile {
    families: Vec<FamilyEntry>,
}

pub fn families_to_string(families: &[CoverFamily]) -> Result<String, IoError> {
    let families = families
        .iter()
        .map(|f| FamilyEntry { members: f.members.clone(), claimed_r: f.claimed_r, claimed_bound: f.claimed_bound })
        .collect();
    to_file_string(&FamiliesFile { families })
}

pub fn load_families(s: &str) -> Result<Vec<CoverFamily>, IoError> {
    let file: FamiliesFile = from_file_str(s)?;
    file.families
        .into_iter()
        .map(|f| Ok(CoverFamily::new(f.members)?.with_claims(f.claimed_r, f.claimed_bound)))
        .collect()
}
