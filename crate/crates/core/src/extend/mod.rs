//! Pasting and extension of partitions of unity, and the certificate
//! pipeline that assembles them over a decomposition tree.

mod certificate;
mod modulus;
mod ops;
mod schedule;

use thiserror::Error;

use crate::covers::{CoversError, TreeReport};
use crate::metric::MetricError;
use crate::simplex::{SimplexError, VertexId};
use crate::verify::{CrossPair, VerifyError};

pub use certificate::{build_certificate, Certificate, CertificateConfig};
pub use modulus::{default_modulus, Magnitude, Modulus, UNDERFLOW_FLOOR};
pub use ops::{
    extend_over_bounded_piece, extend_over_disjoint_family, extend_pou, extend_pou_cobounded, paste, Branch,
    ExtendStats, Extension, FamilyExtension, PasteParams, PieceExtension, PieceParams, PieceValues, Preconditions,
};
pub use schedule::{budget_schedule, BudgetSchedule, ScheduleMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtendError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("postcondition failed: {0}")]
    PostconditionFailed(String),
    #[error("the subset to extend from is empty")]
    EmptySubset,
    #[error("budget {budget} is below 2/(R+1) = {required} for R = {radius}")]
    BudgetTooSmall { budget: f64, required: f64, radius: f64 },
    #[error("family is not R-disjoint: d({}, {}) = {}", .0.x, .0.y, .0.distance)]
    NotRDisjoint(CrossPair),
    #[error("pieces {first} and {second} both introduced vertex {vertex}")]
    CarrierCollision { first: usize, second: usize, vertex: VertexId },
    #[error("epsilon must lie in (0, 2), got {0}")]
    BadEpsilon(f64),
    #[error("bad modulus: {0}")]
    BadModulus(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("budget underflow at level {level}: {message}{}; try a linear modulus", .log10.map(|l| format!(" (about 1e{l:.0})")).unwrap_or_default())]
    Underflow { level: usize, iterations: u64, log10: Option<f64>, message: String },
    #[error("tree radius R_{level} = {got} is below the required {required}")]
    ScheduleMismatch { level: usize, required: f64, got: f64 },
    #[error("tree fails validation at clause {}: {}", .0.violated_clause.unwrap_or(0), .0.message.clone().unwrap_or_default())]
    InvalidTree(Box<TreeReport>),
    #[error("certificate failed verification")]
    VerificationFailed(Box<Certificate>),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Covers(#[from] CoversError),
}
