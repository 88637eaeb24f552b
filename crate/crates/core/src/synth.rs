//! Synthetic corpora with known answers.
//!
//! Every profile is deterministic for a given seed and streams its
//! publications to the caller while tallying a [`Truth`] record by direct
//! counting, which tests compare against the analysis output.
//!
//! Profiles:
//!
//! * `mixed`: affiliations clustered around a dozen country centers plus some
//!   without a country; team sizes uniform in 1..=5; years 1950–2019.
//! * `multi25`: publications come in groups of four in one year, exactly one
//!   of which has several affiliations, so every complete year has a
//!   multi-affiliation share of 0.25.
//! * `powerlaw<alpha>` (e.g. `powerlaw2.5`): `size` affiliations whose
//!   publication counts are drawn from a zeta distribution with exponent
//!   `alpha`, packed into teams of one to three.
//! * `landmark`: a fixed set of well-known institution pairs with set
//!   collaboration counts per stage, mixed into `size` background
//!   publications.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zeta};
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{write_record, AffiliationId, AffiliationRecord, CorpusError, CountryCode, EdgeWriter, InputFormat, PublicationTeam};
use crate::geodesy::GeoPoint;

pub const FIRST_YEAR: i32 = 1950;
pub const LAST_YEAR: i32 = 2019;
const MAX_ZETA_COUNT: f64 = 1e7;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid fixture argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Mixed,
    Multi25,
    PowerLaw(f64),
    Landmark,
}

impl FromStr for Profile {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(Profile::Mixed),
            "multi25" => Ok(Profile::Multi25),
            "landmark" => Ok(Profile::Landmark),
            _ => {
                let alpha: f64 = s
                    .strip_prefix("powerlaw")
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| SynthError::InvalidArgument(format!("unknown profile {s:?}")))?;
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(SynthError::InvalidArgument(format!(
                        "power-law exponent must exceed 1, got {alpha}"
                    )));
                }
                Ok(Profile::PowerLaw(alpha))
            }
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Mixed => f.write_str("mixed"),
            Profile::Multi25 => f.write_str("multi25"),
            Profile::PowerLaw(a) => write!(f, "powerlaw{a}"),
            Profile::Landmark => f.write_str("landmark"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct YearTruth {
    pub publications: u64,
    pub single: u64,
    pub multi: u64,
    pub domestic: u64,
    pub international: u64,
    pub unclassifiable: u64,
    pub affiliation_buckets: [u64; 5],
    pub country_buckets: [u64; 5],
    pub country_unresolved: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectedPair {
    pub stage: String,
    pub scope: String,
    pub first: String,
    pub second: String,
    pub count: u64,
}

/// Ground truth written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub profile: String,
    pub seed: u64,
    pub size: usize,
    pub publications: u64,
    pub affiliations: u64,
    pub years: BTreeMap<i32, YearTruth>,
    /// Multi-affiliation share per year.
    pub shares: BTreeMap<i32, f64>,
    pub power_law_exponent: Option<f64>,
    /// Pairs that must rank first for their stage and scope.
    pub expected_top_pairs: Vec<ExpectedPair>,
}

impl Truth {
    fn new(profile: Profile, seed: u64, size: usize) -> Self {
        Truth {
            profile: profile.to_string(),
            seed,
            size,
            publications: 0,
            affiliations: 0,
            years: BTreeMap::new(),
            shares: BTreeMap::new(),
            power_law_exponent: None,
            expected_top_pairs: Vec::new(),
        }
    }

    fn record(&mut self, team: &PublicationTeam) {
        let bucket = |n: usize| n.clamp(1, 5) - 1;
        let y = self.years.entry(team.year()).or_default();
        let m = team.m();
        y.publications += 1;
        y.affiliation_buckets[bucket(m)] += 1;
        let resolved: Option<HashSet<CountryCode>> = team.affiliations().iter().map(|a| a.country).collect();
        match &resolved {
            Some(c) => y.country_buckets[bucket(c.len())] += 1,
            None => y.country_unresolved += 1,
        }
        if m == 1 {
            y.single += 1;
        } else {
            y.multi += 1;
            match resolved {
                None => y.unclassifiable += 1,
                Some(c) if c.len() == 1 => y.domestic += 1,
                Some(_) => y.international += 1,
            }
        }
        self.publications += 1;
    }

    fn finish(&mut self, affiliations: u64) {
        self.affiliations = affiliations;
        self.shares = self
            .years
            .iter()
            .map(|(y, t)| (*y, t.multi as f64 / t.publications as f64))
            .collect();
    }
}

/// Sink for generated publications in either input format.
pub enum FixtureWriter<W: Write> {
    Lines(W),
    Edges(EdgeWriter<W>),
}

impl<W: Write> FixtureWriter<W> {
    pub fn new(w: W, format: InputFormat) -> Result<Self, SynthError> {
        Ok(match format {
            InputFormat::LineRecords => FixtureWriter::Lines(w),
            InputFormat::DelimitedEdges => FixtureWriter::Edges(EdgeWriter::new(w)?),
        })
    }

    fn write(&mut self, team: &PublicationTeam) -> Result<(), SynthError> {
        match self {
            FixtureWriter::Lines(w) => write_record(w, team).map_err(CorpusError::from)?,
            FixtureWriter::Edges(e) => e.write(team)?,
        }
        Ok(())
    }

    pub fn finish(self) -> Result<W, SynthError> {
        Ok(match self {
            FixtureWriter::Lines(mut w) => {
                w.flush().map_err(CorpusError::from)?;
                w
            }
            FixtureWriter::Edges(e) => e.finish()?,
        })
    }
}

/// Generates a corpus into `out` and returns its ground truth.
pub fn generate<W: Write>(
    profile: Profile,
    seed: u64,
    size: usize,
    out: &mut FixtureWriter<W>,
) -> Result<Truth, SynthError> {
    if size == 0 {
        return Err(SynthError::InvalidArgument("size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Truth::new(profile, seed, size);
    let mut emit = |team: PublicationTeam| -> Result<(), SynthError> {
        truth.record(&team);
        out.write(&team)
    };
    let affiliations = match profile {
        Profile::Mixed => {
            let pool = Pool::new(&mut rng, (size / 4).clamp(50, 250_000));
            for i in 0..size {
                let m = rng.random_range(1..=5);
                let year = rng.random_range(FIRST_YEAR..=LAST_YEAR);
                emit(pool.team(&mut rng, format!("p{i}"), year, m))?;
            }
            pool.len()
        }
        Profile::Multi25 => {
            let pool = Pool::new(&mut rng, (size / 4).clamp(50, 250_000));
            let years = (LAST_YEAR - FIRST_YEAR + 1) as usize;
            for i in 0..size {
                let year = FIRST_YEAR + ((i / 4) % years) as i32;
                let m = if i % 4 == 3 { rng.random_range(2..=5) } else { 1 };
                emit(pool.team(&mut rng, format!("p{i}"), year, m))?;
            }
            pool.len()
        }
        Profile::PowerLaw(alpha) => {
            let zeta = Zeta::new(alpha).map_err(|e| SynthError::InvalidArgument(e.to_string()))?;
            let pool = Pool::new(&mut rng, size);
            let mut slots: Vec<u32> = Vec::new();
            for i in 0..size {
                let c = zeta.sample(&mut rng).min(MAX_ZETA_COUNT) as usize;
                slots.extend(std::iter::repeat_n(i as u32, c));
            }
            slots.shuffle(&mut rng);
            let mut next = 0usize;
            let mut team: Vec<u32> = Vec::with_capacity(3);
            let mut target = rng.random_range(1..=3);
            for slot in slots {
                if team.len() == target || team.contains(&slot) {
                    emit(pool.fixed_team(format!("p{next}"), rng.random_range(FIRST_YEAR..=LAST_YEAR), &team))?;
                    next += 1;
                    team.clear();
                    target = rng.random_range(1..=3);
                }
                team.push(slot);
            }
            if !team.is_empty() {
                emit(pool.fixed_team(format!("p{next}"), rng.random_range(FIRST_YEAR..=LAST_YEAR), &team))?;
            }
            truth.power_law_exponent = Some(alpha);
            size
        }
        Profile::Landmark => {
            let pool = Pool::new(&mut rng, size.max(500));
            let mut teams: Vec<PublicationTeam> = (0..size)
                .map(|i| {
                    let m = rng.random_range(1..=4);
                    let year = rng.random_range(FIRST_YEAR..=LAST_YEAR);
                    pool.team(&mut rng, format!("p{i}"), year, m)
                })
                .collect();
            let mut n = size;
            for row in LANDMARK_ROWS {
                let a = LANDMARK_SITES[row.a].record();
                let b = LANDMARK_SITES[row.b].record();
                for _ in 0..row.count {
                    let year = rng.random_range(row.years.0..=row.years.1);
                    teams.push(PublicationTeam::new(format!("p{n}"), year, vec![a.clone(), b.clone()])?);
                    n += 1;
                }
            }
            teams.shuffle(&mut rng);
            for t in teams {
                emit(t)?;
            }
            truth.expected_top_pairs = expected_landmark_pairs();
            pool.len() + LANDMARK_SITES.len()
        }
    };
    truth.finish(affiliations as u64);
    Ok(truth)
}

struct Pool {
    affs: Vec<AffiliationRecord>,
    /// Pool indices per country, in `CENTERS` order; the last entry holds
    /// affiliations without a country.
    by_country: Vec<Vec<usize>>,
    slot: Vec<usize>,
}

/// Rough country centers used to scatter synthetic affiliations.
const CENTERS: [(&str, f64, f64); 12] = [
    ("US", 39.0, -98.0),
    ("CN", 33.0, 110.0),
    ("GB", 53.0, -1.5),
    ("DE", 51.0, 10.0),
    ("JP", 36.0, 138.0),
    ("FR", 46.5, 2.5),
    ("IN", 22.0, 78.0),
    ("CA", 50.0, -100.0),
    ("AU", -28.0, 140.0),
    ("BR", -12.0, -50.0),
    ("ES", 40.0, -3.5),
    ("KR", 36.5, 127.8),
];

impl Pool {
    fn new(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let mut affs = Vec::with_capacity(n);
        let mut by_country = vec![Vec::new(); CENTERS.len() + 1];
        let mut slots = Vec::with_capacity(n);
        for i in 0..n {
            let id = AffiliationId::new(&format!("inst{i:06}")).expect("non-empty");
            // About one in twenty affiliations has no country.
            let (location, country, slot) = if rng.random_range(0..20) == 0 {
                let p = GeoPoint::new(rng.random_range(-60.0..70.0), rng.random_range(-180.0..180.0)).expect("in range");
                (p, None, CENTERS.len())
            } else {
                let k = rng.random_range(0..CENTERS.len());
                let (code, lat, lon) = CENTERS[k];
                let p = GeoPoint::new(lat + rng.random_range(-4.0..4.0), lon + rng.random_range(-6.0..6.0))
                    .expect("in range");
                (p, Some(code.parse().expect("valid code")), k)
            };
            by_country[slot].push(i);
            slots.push(slot);
            affs.push(AffiliationRecord { id, location, country });
        }
        Pool {
            affs,
            by_country,
            slot: slots,
        }
    }

    fn len(&self) -> usize {
        self.affs.len()
    }

    /// `m` distinct affiliations; usually the rest share the first one's country.
    fn team(&self, rng: &mut ChaCha8Rng, id: String, year: i32, m: usize) -> PublicationTeam {
        let m = m.min(self.affs.len());
        let first = rng.random_range(0..self.affs.len());
        let home = &self.by_country[self.slot[first]];
        let domestic = rng.random_bool(0.6) && home.len() >= m;
        let mut chosen = vec![first];
        while chosen.len() < m {
            let k = if domestic {
                home[rng.random_range(0..home.len())]
            } else {
                rng.random_range(0..self.affs.len())
            };
            if !chosen.contains(&k) {
                chosen.push(k);
            }
        }
        self.fixed_team_usize(id, year, &chosen)
    }

    fn fixed_team(&self, id: String, year: i32, members: &[u32]) -> PublicationTeam {
        let idx: Vec<usize> = members.iter().map(|&i| i as usize).collect();
        self.fixed_team_usize(id, year, &idx)
    }

    fn fixed_team_usize(&self, id: String, year: i32, members: &[usize]) -> PublicationTeam {
        let affs = members.iter().map(|&i| self.affs[i].clone()).collect();
        PublicationTeam::new(id, year, affs).expect("non-empty team")
    }
}

struct Site {
    id: &'static str,
    lat: f64,
    lon: f64,
    country: &'static str,
}

impl Site {
    fn record(&self) -> AffiliationRecord {
        AffiliationRecord {
            id: AffiliationId::new(self.id).expect("non-empty"),
            location: GeoPoint::new(self.lat, self.lon).expect("in range"),
            country: Some(self.country.parse().expect("valid code")),
        }
    }
}

/// Campus coordinates from public sources.
const LANDMARK_SITES: [Site; 7] = [
    Site { id: "Harvard University", lat: 42.3770, lon: -71.1167, country: "US" },
    Site { id: "Massachusetts Institute of Technology", lat: 42.3601, lon: -71.0942, country: "US" },
    Site { id: "University of Science and Technology of China", lat: 31.8389, lon: 117.2636, country: "CN" },
    Site { id: "Microsoft Redmond", lat: 47.6396, lon: -122.1281, country: "US" },
    Site { id: "Tsinghua University", lat: 40.0000, lon: 116.3264, country: "CN" },
    Site { id: "Karlsruhe Institute of Technology", lat: 49.0094, lon: 8.4116, country: "DE" },
    Site { id: "Indian Institute of Technology Bombay", lat: 19.1334, lon: 72.9133, country: "IN" },
];

struct LandmarkRow {
    a: usize,
    b: usize,
    years: (i32, i32),
    count: u64,
}

const LANDMARK_ROWS: [LandmarkRow; 8] = [
    LandmarkRow { a: 0, b: 1, years: (1950, 1996), count: 28 },
    LandmarkRow { a: 5, b: 6, years: (1950, 1996), count: 16 },
    LandmarkRow { a: 0, b: 1, years: (1997, 2009), count: 98 },
    LandmarkRow { a: 2, b: 3, years: (1997, 2009), count: 153 },
    LandmarkRow { a: 4, b: 3, years: (1997, 2009), count: 131 },
    LandmarkRow { a: 0, b: 1, years: (2010, 2019), count: 273 },
    LandmarkRow { a: 2, b: 3, years: (2010, 2019), count: 367 },
    LandmarkRow { a: 4, b: 3, years: (2010, 2019), count: 227 },
];

fn expected_landmark_pairs() -> Vec<ExpectedPair> {
    let stage_label = |years: (i32, i32)| match years.0 {
        1950 => "Stage 1",
        1997 => "Stage 2",
        _ => "Stage 3",
    };
    let mut out: Vec<ExpectedPair> = Vec::new();
    for row in &LANDMARK_ROWS {
        let (a, b) = (&LANDMARK_SITES[row.a], &LANDMARK_SITES[row.b]);
        let scope = if a.country == b.country { "domestic" } else { "international" };
        let stage = stage_label(row.years);
        // Only the most frequent embedded pair per stage and scope.
        if let Some(prev) = out.iter_mut().find(|p| p.stage == stage && p.scope == scope) {
            if prev.count >= row.count {
                continue;
            }
            *prev = pair(stage, scope, a.id, b.id, row.count);
        } else {
            out.push(pair(stage, scope, a.id, b.id, row.count));
        }
    }
    out
}

fn pair(stage: &str, scope: &str, a: &str, b: &str, count: u64) -> ExpectedPair {
    let (first, second) = if a < b { (a, b) } else { (b, a) };
    ExpectedPair {
        stage: stage.into(),
        scope: scope.into(),
        first: first.into(),
        second: second.into(),
        count,
    }
}
