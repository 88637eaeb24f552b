//! Geographic-distance analytics for research team collaboration.
//!
//! A publication is reduced to the set of affiliations on it. For every team
//! with two or more affiliations the crate computes the geodesic distance of
//! each affiliation pair and the average, maximum and minimum of those
//! distances, classifies the team as domestic or international, and
//! aggregates the results into yearly series, stage summaries, pair rankings
//! and a productivity power-law fit.
//!
//! * [`geodesy`]: WGS-84 geodesic and great-circle distances.
//! * [`corpus`]: record formats, validation and ingestion.
//! * [`georesolve`]: country lookup from coordinates.
//! * [`metrics`]: per-team indicators and scope.
//! * [`analytics`]: mergeable aggregations.
//! * [`pipeline`]: streaming end-to-end analysis.
//! * [`synth`]: synthetic corpora with ground truth.

pub mod analytics;
pub mod corpus;
pub mod geodesy;
pub mod georesolve;
pub mod metrics;
pub mod pipeline;
pub mod synth;
