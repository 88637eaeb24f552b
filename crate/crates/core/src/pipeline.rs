//! End-to-end analysis of one or more record streams.
//!
//! Input is consumed in chunks. Within a chunk, screening and per-team
//! distance computation run on the current rayon pool, while admission (the
//! step that fixes canonical affiliation metadata) stays in input order.
//! Partial tallies are merged through [`Aggregator::merge`], so the result
//! does not depend on the number of workers.

use std::io::BufRead;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{AnalyticsError, Aggregator, StageDefinition};
use crate::corpus::{screen, CorpusError, IngestOptions, IngestReport, Ingestor, InputFormat, RecordSource, YearWindow};
use crate::geodesy::{DistanceMode, GeoPoint};
use crate::georesolve::CountryBoundarySet;
use crate::metrics::assess_team;

pub const DEFAULT_CHUNK_SIZE: usize = 65_536;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub ingest: IngestOptions,
    pub window: YearWindow,
    pub stages: StageDefinition,
    pub distance: DistanceMode,
    pub snap_radius_km: f64,
    pub chunk_size: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            ingest: IngestOptions::default(),
            window: YearWindow { start: 1950, end: 2019 },
            stages: StageDefinition::default(),
            distance: DistanceMode::default(),
            snap_radius_km: crate::georesolve::DEFAULT_SNAP_RADIUS_KM,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub tallies: Aggregator,
    pub ingest: IngestReport,
    /// Accepted publications dated outside the analysis window.
    pub outside_window: u64,
    pub affiliations: u64,
}

/// Runs ingestion, distance computation and aggregation over `sources` in
/// order. Affiliation metadata is shared across sources: the first
/// occurrence in the concatenated stream wins.
pub fn analyze<R: BufRead>(
    sources: impl IntoIterator<Item = (R, InputFormat)>,
    boundaries: Option<&CountryBoundarySet>,
    opts: &AnalysisOptions,
) -> Result<AnalysisOutcome, PipelineError> {
    opts.stages.check_covers(opts.window)?;
    if opts.chunk_size == 0 {
        return Err(CorpusError::InvalidArgument("chunk size must be positive".into()).into());
    }
    let snap = opts.snap_radius_km;
    let resolve = move |p: GeoPoint| boundaries.and_then(|b| b.resolve(p, snap).code());
    let mut ingestor = if boundaries.is_some() {
        Ingestor::with_resolver(&resolve)
    } else {
        Ingestor::new()
    };

    let mut tallies = Aggregator::new(opts.stages.clone());
    let mut outside_window = 0u64;
    let mut chunk = Vec::with_capacity(opts.chunk_size);
    for (reader, format) in sources {
        let mut source = RecordSource::new(reader, format)?;
        loop {
            chunk.clear();
            for item in source.by_ref().take(opts.chunk_size) {
                chunk.push(item?);
            }
            if chunk.is_empty() {
                break;
            }
            let screened: Vec<_> = chunk.par_drain(..).map(|item| screen(item, &opts.ingest)).collect();
            let mut teams = Vec::with_capacity(screened.len());
            for s in screened {
                if let Some(team) = ingestor.admit(s) {
                    if opts.window.contains(team.year()) {
                        teams.push(team);
                    } else {
                        outside_window += 1;
                    }
                }
            }
            let partial = teams
                .par_iter()
                .fold(
                    || Aggregator::new(opts.stages.clone()),
                    |mut acc, team| {
                        acc.add(&assess_team(team, &opts.distance));
                        acc
                    },
                )
                .reduce(
                    || Aggregator::new(opts.stages.clone()),
                    |mut a, b| {
                        a.merge(b);
                        a
                    },
                );
            tallies.merge(partial);
        }
    }
    Ok(AnalysisOutcome {
        tallies,
        affiliations: ingestor.known_affiliations() as u64,
        ingest: ingestor.into_report(),
        outside_window,
    })
}

/// Ingests without computing distances.
pub fn validate<R: BufRead>(
    sources: impl IntoIterator<Item = (R, InputFormat)>,
    opts: &IngestOptions,
) -> Result<IngestReport, CorpusError> {
    let mut ingestor = Ingestor::new();
    let mut chunk = Vec::new();
    for (reader, format) in sources {
        let mut source = RecordSource::new(reader, format)?;
        loop {
            chunk.clear();
            for item in source.by_ref().take(DEFAULT_CHUNK_SIZE) {
                chunk.push(item?);
            }
            if chunk.is_empty() {
                break;
            }
            let screened: Vec<_> = chunk.par_drain(..).map(|item| screen(item, opts)).collect();
            for s in screened {
                ingestor.admit(s);
            }
        }
    }
    Ok(ingestor.into_report())
}
