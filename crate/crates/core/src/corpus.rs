//! Publication–affiliation records.
//!
//! A publication is reduced to its team: the set of unique affiliations that
//! appear on it, each with a location and (optionally) a country. Records are
//! read from one of two line-oriented formats:
//!
//! * line records, one JSON object per line:
//!   `{"id": "...", "year": 2019, "affiliations": [{"id": "...", "lat": 0.0, "lon": 0.0, "country": "US"}]}`
//! * delimited edges, a CSV file with a header row naming the columns
//!   `publication_id, year, affiliation_id, lat, lon, country` (plus an
//!   optional `author_id`), one row per publication–affiliation link. Rows of
//!   one publication must be contiguous.
//!
//! Ingestion happens in two steps. [`screen`] turns one raw item into either a
//! candidate team or a drop reason and has no shared state, so it can run on
//! any number of workers. [`Ingestor::admit`] then runs in input order: it
//! keeps the first-seen metadata of every affiliation id, counts conflicts,
//! fills missing countries through an optional resolver, and tallies the
//! [`IngestReport`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::GeoPoint;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("delimited input is missing the `{0}` column")]
    MissingColumn(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Opaque affiliation identifier. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffiliationId(Arc<str>);

impl AffiliationId {
    pub fn new(id: &str) -> Result<Self, CorpusError> {
        let id = id.trim();
        if id.is_empty() {
            return Err(CorpusError::InvalidRecord("empty affiliation id".into()));
        }
        Ok(AffiliationId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Serialize for AffiliationId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl fmt::Display for AffiliationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// ISO 3166-1 alpha-2 country code, stored uppercase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn as_str(&self) -> &str {
        // Always two ASCII letters.
        std::str::from_utf8(&self.0).expect("ascii")
    }
}

impl FromStr for CountryCode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.trim().as_bytes();
        if b.len() == 2 && b.iter().all(u8::is_ascii_alphabetic) {
            Ok(CountryCode([b[0].to_ascii_uppercase(), b[1].to_ascii_uppercase()]))
        } else {
            Err(CorpusError::InvalidRecord(format!("invalid country code {s:?}")))
        }
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffiliationRecord {
    pub id: AffiliationId,
    pub location: GeoPoint,
    pub country: Option<CountryCode>,
}

/// One publication reduced to its set of unique affiliations.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicationTeam {
    id: String,
    year: i32,
    /// Sorted by id, unique.
    affiliations: Vec<AffiliationRecord>,
    /// Sorted, unique. Empty when the input carried no author data.
    authors: Vec<String>,
}

impl PublicationTeam {
    /// Builds a team, collapsing repeated affiliation ids onto their first
    /// occurrence.
    pub fn new(
        id: impl Into<String>,
        year: i32,
        affiliations: Vec<AffiliationRecord>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(CorpusError::InvalidRecord("empty publication id".into()));
        }
        if affiliations.is_empty() {
            return Err(CorpusError::InvalidRecord(format!(
                "publication {id} has no affiliations"
            )));
        }
        let mut seen = HashSet::with_capacity(affiliations.len());
        let mut unique: Vec<AffiliationRecord> = affiliations
            .into_iter()
            .filter(|a| seen.insert(a.id.clone()))
            .collect();
        unique.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(PublicationTeam {
            id,
            year,
            affiliations: unique,
            authors: Vec::new(),
        })
    }

    pub fn with_authors(mut self, mut authors: Vec<String>) -> Self {
        authors.sort();
        authors.dedup();
        self.authors = authors;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    /// Number of unique affiliations.
    pub fn m(&self) -> usize {
        self.affiliations.len()
    }

    pub fn affiliations(&self) -> &[AffiliationRecord] {
        &self.affiliations
    }

    pub fn authors(&self) -> &[String] {
        &self.authors
    }
}

/// What happens to a publication when some of its affiliations lack usable
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingCoordinatePolicy {
    #[default]
    DropPublication,
    DropAffiliation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub year_min: i32,
    pub year_max: i32,
    pub missing_coordinates: MissingCoordinatePolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            year_min: 1900,
            year_max: 2100,
            missing_coordinates: MissingCoordinatePolicy::DropPublication,
        }
    }
}

/// Tallies for one ingestion run.
///
/// `accepted` plus the four `dropped_*` record counts always equals
/// `total_records`. The affiliation-level counters are informational.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_records: u64,
    pub accepted: u64,
    pub dropped_malformed: u64,
    pub dropped_no_affiliation: u64,
    pub dropped_bad_coords: u64,
    pub dropped_bad_year: u64,
    pub deduplicated_affiliations: u64,
    pub dropped_affiliations: u64,
    pub coordinate_conflicts: u64,
}

impl IngestReport {
    pub fn is_balanced(&self) -> bool {
        self.accepted
            + self.dropped_malformed
            + self.dropped_no_affiliation
            + self.dropped_bad_coords
            + self.dropped_bad_year
            == self.total_records
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.total_records += other.total_records;
        self.accepted += other.accepted;
        self.dropped_malformed += other.dropped_malformed;
        self.dropped_no_affiliation += other.dropped_no_affiliation;
        self.dropped_bad_coords += other.dropped_bad_coords;
        self.dropped_bad_year += other.dropped_bad_year;
        self.deduplicated_affiliations += other.deduplicated_affiliations;
        self.dropped_affiliations += other.dropped_affiliations;
        self.coordinate_conflicts += other.coordinate_conflicts;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Malformed,
    NoAffiliation,
    BadYear,
    BadCoordinates,
}

/// Result of screening one raw item.
#[derive(Debug, Clone, PartialEq)]
pub enum Screened {
    Accepted {
        team: PublicationTeam,
        deduplicated: u64,
        dropped_affiliations: u64,
    },
    Dropped(DropReason),
}

/// One undecoded input record.
#[derive(Debug, Clone)]
pub enum RawItem {
    Line(String),
    Edges(Candidate),
    Malformed,
}

/// A decoded record before validation.
#[derive(Debug, Clone, Default)]
pub struct Candidate {
    id: String,
    year: Option<i64>,
    entries: Vec<Entry>,
    authors: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct Entry {
    id: String,
    lat: Option<f64>,
    lon: Option<f64>,
    country: Option<String>,
    author: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdValue {
    Text(String),
    Int(i64),
}

impl IdValue {
    fn into_string(self) -> String {
        match self {
            IdValue::Text(s) => s,
            IdValue::Int(i) => i.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: IdValue,
    #[serde(default)]
    year: Option<i64>,
    #[serde(default)]
    affiliations: Option<Vec<JsonAffiliation>>,
    #[serde(default)]
    authors: Option<Vec<IdValue>>,
}

#[derive(Deserialize)]
struct JsonAffiliation {
    #[serde(default)]
    id: Option<IdValue>,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    lon: Option<f64>,
    #[serde(default)]
    country: Option<String>,
    #[serde(default)]
    author: Option<IdValue>,
}

fn decode_line(line: &str) -> Option<Candidate> {
    let rec: JsonRecord = serde_json::from_str(line).ok()?;
    let entries = rec
        .affiliations
        .unwrap_or_default()
        .into_iter()
        .map(|a| Entry {
            id: a.id.map(IdValue::into_string).unwrap_or_default(),
            lat: a.lat,
            lon: a.lon,
            country: a.country,
            author: a.author.map(IdValue::into_string),
        })
        .collect();
    Some(Candidate {
        id: rec.id.into_string(),
        year: rec.year,
        entries,
        authors: rec
            .authors
            .unwrap_or_default()
            .into_iter()
            .map(IdValue::into_string)
            .collect(),
    })
}

/// Validates one raw item. Pure; safe to call from any worker.
///
/// Checks run in a fixed order: malformed, no affiliation, bad year, bad
/// coordinates.
pub fn screen(item: RawItem, opts: &IngestOptions) -> Screened {
    let cand = match item {
        RawItem::Line(line) => match decode_line(&line) {
            Some(c) => c,
            None => return Screened::Dropped(DropReason::Malformed),
        },
        RawItem::Edges(c) => c,
        RawItem::Malformed => return Screened::Dropped(DropReason::Malformed),
    };
    if cand.id.trim().is_empty() {
        return Screened::Dropped(DropReason::Malformed);
    }

    // Entries without an id carry no affiliation information.
    let entries: Vec<Entry> = cand
        .entries
        .into_iter()
        .filter(|e| !e.id.trim().is_empty())
        .collect();
    if entries.is_empty() {
        return Screened::Dropped(DropReason::NoAffiliation);
    }

    let year = match cand.year {
        Some(y) if (opts.year_min as i64..=opts.year_max as i64).contains(&y) => y as i32,
        _ => return Screened::Dropped(DropReason::BadYear),
    };

    let mut authors = cand.authors;
    let mut records = Vec::with_capacity(entries.len());
    let mut seen: HashSet<String> = HashSet::with_capacity(entries.len());
    let mut deduplicated = 0u64;
    let mut bad_coords = 0u64;
    for e in entries {
        if let Some(a) = e.author.filter(|a| !a.trim().is_empty()) {
            authors.push(a);
        }
        let id = e.id.trim().to_string();
        if !seen.insert(id.clone()) {
            deduplicated += 1;
            continue;
        }
        let country = match e.country.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(code) => match code.parse::<CountryCode>() {
                Ok(c) => Some(c),
                Err(_) => return Screened::Dropped(DropReason::Malformed),
            },
        };
        let location = match (e.lat, e.lon) {
            (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok(),
            _ => None,
        };
        match location {
            Some(location) => records.push(AffiliationRecord {
                id: AffiliationId::new(&id).expect("non-empty"),
                location,
                country,
            }),
            None => bad_coords += 1,
        }
    }

    let dropped_affiliations = match opts.missing_coordinates {
        MissingCoordinatePolicy::DropPublication if bad_coords > 0 => {
            return Screened::Dropped(DropReason::BadCoordinates)
        }
        _ => bad_coords,
    };
    if records.is_empty() {
        return Screened::Dropped(DropReason::BadCoordinates);
    }
    let team = PublicationTeam::new(cand.id.trim(), year, records)
        .expect("validated")
        .with_authors(authors);
    Screened::Accepted {
        team,
        deduplicated,
        dropped_affiliations,
    }
}

/// Resolves a location to a country when the input did not supply one.
pub type CountryResolver<'a> = dyn Fn(GeoPoint) -> Option<CountryCode> + Sync + 'a;

/// Sequential half of ingestion: canonical affiliation metadata and tallies.
pub struct Ingestor<'a> {
    registry: HashMap<AffiliationId, AffiliationRecord>,
    report: IngestReport,
    resolver: Option<&'a CountryResolver<'a>>,
}

impl Default for Ingestor<'_> {
    fn default() -> Self {
        Ingestor::new()
    }
}

impl<'a> Ingestor<'a> {
    pub fn new() -> Self {
        Ingestor {
            registry: HashMap::new(),
            report: IngestReport::default(),
            resolver: None,
        }
    }

    pub fn with_resolver(resolver: &'a CountryResolver<'a>) -> Self {
        Ingestor {
            resolver: Some(resolver),
            ..Ingestor::new()
        }
    }

    /// Records the outcome of one screened item, in input order.
    ///
    /// The first accepted occurrence of an affiliation id fixes its location
    /// and country; later occurrences with different metadata are replaced by
    /// the canonical record and counted in `coordinate_conflicts`.
    pub fn admit(&mut self, screened: Screened) -> Option<PublicationTeam> {
        self.report.total_records += 1;
        let (mut team, deduplicated, dropped_affiliations) = match screened {
            Screened::Dropped(reason) => {
                match reason {
                    DropReason::Malformed => self.report.dropped_malformed += 1,
                    DropReason::NoAffiliation => self.report.dropped_no_affiliation += 1,
                    DropReason::BadYear => self.report.dropped_bad_year += 1,
                    DropReason::BadCoordinates => self.report.dropped_bad_coords += 1,
                }
                return None;
            }
            Screened::Accepted {
                team,
                deduplicated,
                dropped_affiliations,
            } => (team, deduplicated, dropped_affiliations),
        };
        self.report.accepted += 1;
        self.report.deduplicated_affiliations += deduplicated;
        self.report.dropped_affiliations += dropped_affiliations;

        for aff in team.affiliations.iter_mut() {
            match self.registry.get(&aff.id) {
                Some(canonical) => {
                    let conflicting = canonical.location != aff.location
                        || (aff.country.is_some() && aff.country != canonical.country);
                    if conflicting {
                        self.report.coordinate_conflicts += 1;
                    }
                    *aff = canonical.clone();
                }
                None => {
                    if aff.country.is_none() {
                        if let Some(resolve) = self.resolver {
                            aff.country = resolve(aff.location);
                        }
                    }
                    self.registry.insert(aff.id.clone(), aff.clone());
                }
            }
        }
        Some(team)
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn into_report(self) -> IngestReport {
        self.report
    }

    /// Number of distinct affiliation ids admitted so far.
    pub fn known_affiliations(&self) -> usize {
        self.registry.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    LineRecords,
    DelimitedEdges,
}

/// Streams raw items from a reader without buffering the whole input.
pub struct RecordSource<R: BufRead> {
    kind: SourceKind<R>,
}

enum SourceKind<R: BufRead> {
    Lines { reader: R, buf: Vec<u8> },
    Edges(EdgeGrouper<R>),
}

impl<R: BufRead> RecordSource<R> {
    /// For delimited input the header is read and checked here.
    pub fn new(reader: R, format: InputFormat) -> Result<Self, CorpusError> {
        let kind = match format {
            InputFormat::LineRecords => SourceKind::Lines {
                reader,
                buf: Vec::new(),
            },
            InputFormat::DelimitedEdges => SourceKind::Edges(EdgeGrouper::new(reader)?),
        };
        Ok(RecordSource { kind })
    }
}

impl<R: BufRead> Iterator for RecordSource<R> {
    type Item = Result<RawItem, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.kind {
            SourceKind::Lines { reader, buf } => loop {
                buf.clear();
                match reader.read_until(b'\n', buf) {
                    Ok(0) => return None,
                    Ok(_) => {}
                    Err(e) => return Some(Err(e.into())),
                }
                let Ok(line) = std::str::from_utf8(buf) else {
                    return Some(Ok(RawItem::Malformed));
                };
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                return Some(Ok(RawItem::Line(line.to_string())));
            },
            SourceKind::Edges(g) => g.next(),
        }
    }
}

#[derive(Clone, Copy)]
struct Columns {
    publication_id: usize,
    year: usize,
    affiliation_id: usize,
    lat: usize,
    lon: usize,
    country: usize,
    author_id: Option<usize>,
}

struct EdgeGrouper<R: BufRead> {
    records: csv::StringRecordsIntoIter<R>,
    cols: Columns,
    /// Group under construction: (publication id, raw year, candidate, malformed).
    pending: Option<(String, String, Candidate, bool)>,
    /// Finished items waiting to be returned.
    ready: std::collections::VecDeque<RawItem>,
    done: bool,
}

impl<R: BufRead> EdgeGrouper<R> {
    fn new(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_to_corpus)?.clone();
        let find = |name: &'static str| -> Result<usize, CorpusError> {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or(CorpusError::MissingColumn(name))
        };
        let cols = Columns {
            publication_id: find("publication_id")?,
            year: find("year")?,
            affiliation_id: find("affiliation_id")?,
            lat: find("lat")?,
            lon: find("lon")?,
            country: find("country")?,
            author_id: find("author_id").ok(),
        };
        Ok(EdgeGrouper {
            records: rdr.into_records(),
            cols,
            pending: None,
            ready: Default::default(),
            done: false,
        })
    }

    fn flush(&mut self) {
        if let Some((_, _, cand, malformed)) = self.pending.take() {
            self.ready.push_back(if malformed {
                RawItem::Malformed
            } else {
                RawItem::Edges(cand)
            });
        }
    }

    fn push_row(&mut self, row: &csv::StringRecord) {
        let c = self.cols;
        let max_col = [c.publication_id, c.year, c.affiliation_id, c.lat, c.lon, c.country]
            .into_iter()
            .max()
            .unwrap_or(0);
        let pub_id = row.get(c.publication_id).unwrap_or("");
        if row.len() <= max_col || pub_id.is_empty() {
            // Cannot be attributed to any publication.
            self.ready.push_back(RawItem::Malformed);
            return;
        }
        let year_raw = row[c.year].to_string();
        let continues = matches!(&self.pending, Some((id, _, _, _)) if id == pub_id);
        if !continues {
            self.flush();
            let year = year_raw.parse::<i64>().ok();
            let malformed = year.is_none() && !year_raw.is_empty();
            self.pending = Some((
                pub_id.to_string(),
                year_raw.clone(),
                Candidate {
                    id: pub_id.to_string(),
                    year,
                    ..Candidate::default()
                },
                malformed,
            ));
        }
        let (_, group_year, cand, malformed) = self.pending.as_mut().expect("pending group");
        if *group_year != year_raw {
            *malformed = true;
        }
        let parse_coord = |s: &str| -> Result<Option<f64>, ()> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| ())
            }
        };
        let (lat, lon) = match (parse_coord(&row[c.lat]), parse_coord(&row[c.lon])) {
            (Ok(lat), Ok(lon)) => (lat, lon),
            _ => {
                *malformed = true;
                (None, None)
            }
        };
        let country = Some(row[c.country].to_string()).filter(|s| !s.is_empty());
        let author = c
            .author_id
            .and_then(|i| row.get(i))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        cand.entries.push(Entry {
            id: row[c.affiliation_id].to_string(),
            lat,
            lon,
            country,
            author,
        });
    }

    fn next(&mut self) -> Option<Result<RawItem, CorpusError>> {
        loop {
            if let Some(item) = self.ready.pop_front() {
                return Some(Ok(item));
            }
            if self.done {
                return None;
            }
            match self.records.next() {
                None => {
                    self.done = true;
                    self.flush();
                }
                Some(Ok(row)) => self.push_row(&row),
                Some(Err(e)) => match e.kind() {
                    csv::ErrorKind::Io(_) => {
                        self.done = true;
                        return Some(Err(csv_to_corpus(e)));
                    }
                    _ => self.ready.push_back(RawItem::Malformed),
                },
            }
        }
    }
}

fn csv_to_corpus(e: csv::Error) -> CorpusError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CorpusError::Io(io),
            _ => unreachable!(),
        }
    } else {
        CorpusError::InvalidRecord(e.to_string())
    }
}

/// Parses a whole stream sequentially.
pub fn parse_records<R: BufRead>(
    reader: R,
    format: InputFormat,
    opts: &IngestOptions,
) -> Result<(Vec<PublicationTeam>, IngestReport), CorpusError> {
    let mut ingestor = Ingestor::new();
    let mut teams = Vec::new();
    for item in RecordSource::new(reader, format)? {
        if let Some(team) = ingestor.admit(screen(item?, opts)) {
            teams.push(team);
        }
    }
    Ok((teams, ingestor.into_report()))
}

#[derive(Serialize)]
struct JsonOut<'a> {
    id: &'a str,
    year: i32,
    affiliations: Vec<JsonAffOut<'a>>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    authors: &'a [String],
}

#[derive(Serialize)]
struct JsonAffOut<'a> {
    id: &'a str,
    lat: f64,
    lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    country: Option<CountryCode>,
}

/// Writes one team as a line record (terminated by a newline).
pub fn write_record<W: Write>(mut w: W, team: &PublicationTeam) -> io::Result<()> {
    let out = JsonOut {
        id: &team.id,
        year: team.year,
        affiliations: team
            .affiliations
            .iter()
            .map(|a| JsonAffOut {
                id: a.id.as_str(),
                lat: a.location.lat(),
                lon: a.location.lon(),
                country: a.country,
            })
            .collect(),
        authors: &team.authors,
    };
    serde_json::to_writer(&mut w, &out)?;
    w.write_all(b"\n")
}

pub fn write_records<'a, W: Write>(
    mut w: W,
    teams: impl IntoIterator<Item = &'a PublicationTeam>,
) -> io::Result<()> {
    for t in teams {
        write_record(&mut w, t)?;
    }
    Ok(())
}

/// Writes teams as delimited edges, one row per publication–affiliation link.
/// Author data is not carried over.
pub struct EdgeWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EdgeWriter<W> {
    pub fn new(w: W) -> Result<Self, CorpusError> {
        let mut inner = csv::Writer::from_writer(w);
        inner
            .write_record(["publication_id", "year", "affiliation_id", "lat", "lon", "country"])
            .map_err(csv_to_corpus)?;
        Ok(EdgeWriter { inner })
    }

    pub fn write(&mut self, team: &PublicationTeam) -> Result<(), CorpusError> {
        let year = team.year.to_string();
        for a in &team.affiliations {
            let lat = a.location.lat().to_string();
            let lon = a.location.lon().to_string();
            let country = a.country.map(|c| c.to_string()).unwrap_or_default();
            self.inner
                .write_record([team.id.as_str(), &year, a.id.as_str(), &lat, &lon, &country])
                .map_err(csv_to_corpus)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, CorpusError> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| CorpusError::Io(io::Error::other(e.to_string())))
    }
}

/// Inclusive range of publication years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Result<Self, CorpusError> {
        if start > end {
            return Err(CorpusError::InvalidArgument(format!(
                "year window {start}-{end} is inverted"
            )));
        }
        Ok(YearWindow { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

/// Keeps the teams dated within `[start_year, end_year]`, preserving order.
pub fn filter_by_years(
    teams: Vec<PublicationTeam>,
    start_year: i32,
    end_year: i32,
) -> Result<Vec<PublicationTeam>, CorpusError> {
    let window = YearWindow::new(start_year, end_year)?;
    Ok(teams.into_iter().filter(|t| window.contains(t.year)).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub publications: u64,
    pub unique_affiliations: u64,
    /// Present only when at least one record carried author ids.
    pub unique_authors: Option<u64>,
}

/// Incremental form of [`corpus_stats`].
#[derive(Debug, Default, Clone)]
pub struct StatsAccumulator {
    publications: u64,
    affiliations: HashSet<AffiliationId>,
    authors: HashSet<String>,
}

impl StatsAccumulator {
    pub fn add(&mut self, team: &PublicationTeam) {
        self.publications += 1;
        for a in &team.affiliations {
            if !self.affiliations.contains(&a.id) {
                self.affiliations.insert(a.id.clone());
            }
        }
        for a in &team.authors {
            if !self.authors.contains(a) {
                self.authors.insert(a.clone());
            }
        }
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        self.publications += other.publications;
        self.affiliations.extend(other.affiliations);
        self.authors.extend(other.authors);
    }

    pub fn finish(&self) -> CorpusStats {
        CorpusStats {
            publications: self.publications,
            unique_affiliations: self.affiliations.len() as u64,
            unique_authors: (!self.authors.is_empty()).then_some(self.authors.len() as u64),
        }
    }
}

pub fn corpus_stats<'a>(teams: impl IntoIterator<Item = &'a PublicationTeam>) -> CorpusStats {
    let mut acc = StatsAccumulator::default();
    for t in teams {
        acc.add(t);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(input: &str) -> (Vec<PublicationTeam>, IngestReport) {
        parse_records(input.as_bytes(), InputFormat::LineRecords, &IngestOptions::default())
            .unwrap()
    }

    fn parse_csv(input: &str) -> (Vec<PublicationTeam>, IngestReport) {
        parse_records(input.as_bytes(), InputFormat::DelimitedEdges, &IngestOptions::default())
            .unwrap()
    }

    fn team(id: &str, year: i32, affs: &[&str]) -> PublicationTeam {
        let recs = affs
            .iter()
            .map(|a| AffiliationRecord {
                id: AffiliationId::new(a).unwrap(),
                location: GeoPoint::new(1.0, 2.0).unwrap(),
                country: None,
            })
            .collect();
        PublicationTeam::new(id, year, recs).unwrap()
    }

    #[test]
    fn same_affiliation_three_times_is_one_member() {
        let line = r#"{"id":"p1","year":2001,"affiliations":[
            {"id":"A","lat":1,"lon":2,"author":"x"},
            {"id":"A","lat":1,"lon":2,"author":"y"},
            {"id":"A","lat":1,"lon":2,"author":"z"}]}"#
            .replace('\n', "");
        let (teams, report) = parse(&line);
        assert_eq!(teams.len(), 1);
        assert_eq!(teams[0].m(), 1);
        assert_eq!(teams[0].authors().len(), 3);
        assert_eq!(report.deduplicated_affiliations, 2);
    }

    #[test]
    fn repeated_affiliation_is_counted() {
        let line = r#"{"id":"p1","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2},{"id":"B","lat":3,"lon":4},{"id":"A","lat":1,"lon":2}]}"#;
        let (teams, report) = parse(line);
        assert_eq!(teams[0].m(), 2);
        assert_eq!(report.deduplicated_affiliations, 1);
        let ids: Vec<_> = teams[0].affiliations().iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
    }

    #[test]
    fn empty_affiliations_are_dropped() {
        let input = concat!(
            r#"{"id":"p1","year":2001,"affiliations":[]}"#,
            "\n",
            r#"{"id":"p2","year":2001}"#,
            "\n",
            r#"{"id":"p3","year":2001,"affiliations":[{"lat":1,"lon":2}]}"#,
        );
        let (teams, report) = parse(input);
        assert!(teams.is_empty());
        assert_eq!(report.dropped_no_affiliation, 3);
        assert!(report.is_balanced());
    }

    #[test]
    fn tallies_every_drop_reason() {
        let input = [
            r#"{"id":"ok","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2,"country":"us"}]}"#,
            r#"not json"#,
            r#"{"id":"y","year":1800,"affiliations":[{"id":"A","lat":1,"lon":2}]}"#,
            r#"{"id":"y2","affiliations":[{"id":"A","lat":1,"lon":2}]}"#,
            r#"{"id":"c","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2},{"id":"B","lat":null,"lon":2}]}"#,
            r#"{"id":"c2","year":2001,"affiliations":[{"id":"A","lat":95,"lon":2}]}"#,
            r#"{"id":"cc","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2,"country":"USA"}]}"#,
            "",
            "   ",
        ]
        .join("\n");
        let (teams, r) = parse(&input);
        assert_eq!(teams.len(), 1);
        assert_eq!(teams[0].affiliations()[0].country.unwrap().as_str(), "US");
        assert_eq!(r.total_records, 7);
        assert_eq!(r.accepted, 1);
        assert_eq!(r.dropped_malformed, 2);
        assert_eq!(r.dropped_bad_year, 2);
        assert_eq!(r.dropped_bad_coords, 2);
        assert!(r.is_balanced());
    }

    #[test]
    fn drop_affiliation_policy_keeps_the_rest() {
        let line = r#"{"id":"c","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2},{"id":"B","lon":2}]}"#;
        let opts = IngestOptions {
            missing_coordinates: MissingCoordinatePolicy::DropAffiliation,
            ..IngestOptions::default()
        };
        let (teams, r) = parse_records(line.as_bytes(), InputFormat::LineRecords, &opts).unwrap();
        assert_eq!(teams[0].m(), 1);
        assert_eq!(r.dropped_affiliations, 1);
        assert_eq!(r.accepted, 1);
    }

    #[test]
    fn first_seen_coordinates_win() {
        let input = concat!(
            r#"{"id":"p1","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2}]}"#,
            "\n",
            r#"{"id":"p2","year":2002,"affiliations":[{"id":"A","lat":5,"lon":6}]}"#,
        );
        let (teams, r) = parse(input);
        assert_eq!(teams[1].affiliations()[0].location, GeoPoint::new(1.0, 2.0).unwrap());
        assert_eq!(r.coordinate_conflicts, 1);
    }

    #[test]
    fn numeric_ids_are_accepted() {
        let line = r#"{"id":12,"year":2001,"affiliations":[{"id":7,"lat":1,"lon":2}]}"#;
        let (teams, _) = parse(line);
        assert_eq!(teams[0].id(), "12");
        assert_eq!(teams[0].affiliations()[0].id.as_str(), "7");
    }

    #[test]
    fn resolver_fills_missing_countries_only() {
        let input = concat!(
            r#"{"id":"p1","year":2001,"affiliations":[{"id":"A","lat":1,"lon":2},{"id":"B","lat":1,"lon":3,"country":"FR"}]}"#,
        );
        let resolve = |_: GeoPoint| Some("DE".parse::<CountryCode>().unwrap());
        let mut ing = Ingestor::with_resolver(&resolve);
        let opts = IngestOptions::default();
        let mut teams = Vec::new();
        for item in RecordSource::new(input.as_bytes(), InputFormat::LineRecords).unwrap() {
            teams.extend(ing.admit(screen(item.unwrap(), &opts)));
        }
        let c: Vec<_> = teams[0].affiliations().iter().map(|a| a.country.unwrap().to_string()).collect();
        assert_eq!(c, ["DE", "FR"]);
    }

    #[test]
    fn delimited_edges_group_contiguous_rows() {
        let input = "\
publication_id,year,affiliation_id,lat,lon,country
p1,2001,A,1.0,2.0,US
p1,2001,B,3.0,4.0,
p1,2001,A,1.0,2.0,US
p2,2002,,,,
p3,2003,C,abc,4.0,CN
p4,2004,D,5.0,6.0,CN
short
";
        let (teams, r) = parse_csv(input);
        assert_eq!(teams.len(), 2);
        assert_eq!(teams[0].m(), 2);
        assert_eq!(teams[1].id(), "p4");
        assert_eq!(r.total_records, 5);
        assert_eq!(r.dropped_no_affiliation, 1);
        assert_eq!(r.dropped_malformed, 2);
        assert_eq!(r.deduplicated_affiliations, 1);
        assert!(r.is_balanced());
    }

    #[test]
    fn delimited_header_must_name_columns() {
        let err = parse_records(
            "pub,year,aff,lat,lon,country\n".as_bytes(),
            InputFormat::DelimitedEdges,
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn("publication_id")));
    }

    #[test]
    fn delimited_and_line_formats_agree() {
        let csv = "\
publication_id,year,affiliation_id,lat,lon,country,author_id
p1,2001,A,1.0,2.0,US,u1
p1,2001,B,3.0,4.0,CN,u2
";
        let json = r#"{"id":"p1","year":2001,"affiliations":[{"id":"A","lat":1.0,"lon":2.0,"country":"US","author":"u1"},{"id":"B","lat":3.0,"lon":4.0,"country":"CN","author":"u2"}]}"#;
        assert_eq!(parse_csv(csv), parse(json));
    }

    #[test]
    fn year_filter_is_inclusive() {
        let teams = vec![
            team("a", 1949, &["A"]),
            team("b", 1950, &["A"]),
            team("c", 2019, &["A"]),
            team("d", 2020, &["A"]),
        ];
        let kept = filter_by_years(teams, 1950, 2019).unwrap();
        let ids: Vec<_> = kept.iter().map(|t| t.id()).collect();
        assert_eq!(ids, ["b", "c"]);
        assert!(filter_by_years(Vec::new(), 1950, 2019).unwrap().is_empty());
        assert_eq!(filter_by_years(vec![team("e", 2000, &["A"])], 2000, 2000).unwrap().len(), 1);
        assert!(matches!(
            filter_by_years(Vec::new(), 2019, 1950),
            Err(CorpusError::InvalidArgument(_))
        ));
    }

    #[test]
    fn stats_count_distinct_affiliations() {
        let teams = [team("a", 2000, &["A", "B"]), team("b", 2000, &["A", "C"])];
        let s = corpus_stats(&teams);
        assert_eq!(s.publications, 2);
        assert_eq!(s.unique_affiliations, 3);
        assert_eq!(s.unique_authors, None);
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
    }

    #[test]
    fn country_codes() {
        assert_eq!("us".parse::<CountryCode>().unwrap().as_str(), "US");
        assert!("U1".parse::<CountryCode>().is_err());
        assert!("USA".parse::<CountryCode>().is_err());
        assert!("".parse::<CountryCode>().is_err());
    }

    #[test]
    fn team_requires_affiliations() {
        assert!(PublicationTeam::new("x", 2000, Vec::new()).is_err());
        assert!(PublicationTeam::new(" ", 2000, team("a", 1, &["A"]).affiliations.clone()).is_err());
    }
}
