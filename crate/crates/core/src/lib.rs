//! Construction and independent verification of Lipschitz, cobounded
//! partitions of unity on finite metric spaces.
//!
//! A certificate at scale ε is a map `f: X → Δ(S)` into the ℓ₁ simplex with
//! `|f(x) − f(y)|₁ ≤ ε·d(x, y) + ε` for all pairs and star preimages of
//! bounded diameter. Certificates are assembled from decomposition data by
//! repeated pasting and extension, then re-checked from scratch.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod metric;
pub mod simplex;
pub mod covers;
pub mod verify;
pub mod extend;
pub mod generate;
pub mod io;

pub use metric::{Boundary, FiniteMetricSpace, MetricError, Norm, PointSubset, Provenance, Retraction};
pub use simplex::{barycentric_pou, convex_combine, l1_distance, PartitionOfUnity, SimplexError, SimplexPoint, VertexId, VertexMint};
pub use verify::{CheckMode, CheckRecord, CoverFamily, VerifyError};
pub use extend::{build_certificate, default_modulus, Certificate, CertificateConfig, ExtendError, Modulus, ScheduleMode};
