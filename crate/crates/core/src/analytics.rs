//! Aggregation of per-team results into yearly series, bucket counts, stage
//! summaries, pair rankings and the productivity power-law fit.
//!
//! Every tally is mergeable: partial [`Aggregator`]s built on any number of
//! workers can be merged in any order. Counts are exact and kilometer sums go
//! through a fixed-point accumulator, so the merged result does not depend on
//! how the input was split or ordered.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AffiliationId, CountryCode, YearWindow};
use crate::metrics::{GdIndicators, Scope, TeamDistances};

pub const BUCKET_LABELS: [&str; 5] = ["1", "2", "3", "4", "5+"];
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("invalid stage definition: {0}")]
    InvalidStages(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Index into a `{1, 2, 3, 4, 5+}` bucket array.
pub fn bucket_index(n: usize) -> usize {
    n.clamp(1, 5) - 1
}

/// Order-independent sum of kilometer values, quantized to 2^-40 km.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExactSum(i128);

const FIXED_SCALE: f64 = (1u64 << 40) as f64;

impl ExactSum {
    pub fn add(&mut self, x: f64) {
        self.0 += (x * FIXED_SCALE).round() as i128;
    }

    pub fn merge(&mut self, other: ExactSum) {
        self.0 += other.0;
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / FIXED_SCALE
    }

    pub fn mean(&self, n: u64) -> Option<f64> {
        (n > 0).then(|| self.value() / n as f64)
    }
}

/// Which teams a distance mean is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GdLevel {
    /// Every team with at least two affiliations, classifiable or not.
    All,
    Domestic,
    International,
}

impl GdLevel {
    pub const ALL: [GdLevel; 3] = [GdLevel::All, GdLevel::Domestic, GdLevel::International];

    pub fn as_str(&self) -> &'static str {
        match self {
            GdLevel::All => "all",
            GdLevel::Domestic => "domestic",
            GdLevel::International => "international",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GdMeans {
    pub ave_km: f64,
    pub max_km: f64,
    pub min_km: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GdTally {
    pub n: u64,
    ave: ExactSum,
    max: ExactSum,
    min: ExactSum,
}

impl GdTally {
    pub fn add(&mut self, g: &GdIndicators) {
        self.n += 1;
        self.ave.add(g.ave_km);
        self.max.add(g.max_km);
        self.min.add(g.min_km);
    }

    pub fn merge(&mut self, other: &GdTally) {
        self.n += other.n;
        self.ave.merge(other.ave);
        self.max.merge(other.max);
        self.min.merge(other.min);
    }

    /// Unweighted means, absent when the tally is empty.
    pub fn means(&self) -> Option<GdMeans> {
        Some(GdMeans {
            ave_km: self.ave.mean(self.n)?,
            max_km: self.max.mean(self.n)?,
            min_km: self.min.mean(self.n)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScopeCounts {
    pub single: u64,
    pub domestic: u64,
    pub international: u64,
    pub unclassifiable: u64,
}

impl ScopeCounts {
    pub fn add(&mut self, scope: Option<Scope>) {
        match scope {
            Some(Scope::SingleAffiliation) => self.single += 1,
            Some(Scope::Domestic) => self.domestic += 1,
            Some(Scope::International) => self.international += 1,
            None => self.unclassifiable += 1,
        }
    }

    pub fn merge(&mut self, o: &ScopeCounts) {
        self.single += o.single;
        self.domestic += o.domestic;
        self.international += o.international;
        self.unclassifiable += o.unclassifiable;
    }

    pub fn multi(&self) -> u64 {
        self.domestic + self.international + self.unclassifiable
    }

    pub fn total(&self) -> u64 {
        self.single + self.multi()
    }
}

/// Affiliation-count and country-count histograms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BucketCounts {
    pub affiliations: [u64; 5],
    pub countries: [u64; 5],
    /// Publications whose country count is unknown.
    pub countries_unresolved: u64,
}

impl BucketCounts {
    pub fn add(&mut self, t: &TeamDistances) {
        self.affiliations[bucket_index(t.m)] += 1;
        match t.country_count() {
            Some(c) => self.countries[bucket_index(c)] += 1,
            None => self.countries_unresolved += 1,
        }
    }

    pub fn merge(&mut self, o: &BucketCounts) {
        for i in 0..5 {
            self.affiliations[i] += o.affiliations[i];
            self.countries[i] += o.countries[i];
        }
        self.countries_unresolved += o.countries_unresolved;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct YearTally {
    pub scopes: ScopeCounts,
    pub buckets: BucketCounts,
    gd: [GdTally; 3],
}

impl YearTally {
    pub fn add(&mut self, t: &TeamDistances) {
        self.scopes.add(t.scope);
        self.buckets.add(t);
        add_gd(&mut self.gd, t);
    }

    pub fn merge(&mut self, o: &YearTally) {
        self.scopes.merge(&o.scopes);
        self.buckets.merge(&o.buckets);
        for (a, b) in self.gd.iter_mut().zip(&o.gd) {
            a.merge(b);
        }
    }

    pub fn publications(&self) -> u64 {
        self.scopes.total()
    }

    pub fn single(&self) -> u64 {
        self.scopes.single
    }

    pub fn multi(&self) -> u64 {
        self.scopes.multi()
    }

    pub fn multi_affiliation_share(&self) -> Option<f64> {
        let n = self.publications();
        (n > 0).then(|| self.multi() as f64 / n as f64)
    }

    pub fn gd(&self, level: GdLevel) -> &GdTally {
        &self.gd[level.index()]
    }

    pub fn means(&self, level: GdLevel) -> Option<GdMeans> {
        self.gd(level).means()
    }
}

fn add_gd(gd: &mut [GdTally; 3], t: &TeamDistances) {
    let Some(g) = &t.indicators else { return };
    gd[GdLevel::All.index()].add(g);
    match t.scope {
        Some(Scope::Domestic) => gd[GdLevel::Domestic.index()].add(g),
        Some(Scope::International) => gd[GdLevel::International.index()].add(g),
        _ => {}
    }
}

/// Per-year tallies. Years without publications are simply absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct YearlySeries {
    years: BTreeMap<i32, YearTally>,
}

impl YearlySeries {
    pub fn add(&mut self, t: &TeamDistances) {
        self.years.entry(t.year).or_default().add(t);
    }

    pub fn merge(&mut self, other: &YearlySeries) {
        for (y, tally) in &other.years {
            self.years.entry(*y).or_default().merge(tally);
        }
    }

    pub fn get(&self, year: i32) -> Option<&YearTally> {
        self.years.get(&year)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &YearTally)> {
        self.years.iter().map(|(y, t)| (*y, t))
    }

    pub fn total(&self) -> YearTally {
        let mut out = YearTally::default();
        for t in self.years.values() {
            out.merge(t);
        }
        out
    }
}

pub fn build_yearly_series<'a>(teams: impl IntoIterator<Item = &'a TeamDistances>) -> YearlySeries {
    let mut s = YearlySeries::default();
    for t in teams {
        s.add(t);
    }
    s
}

/// Exact multi-affiliation share for every year that has publications.
pub fn multi_affiliation_share_series(yearly: &YearlySeries) -> BTreeMap<i32, f64> {
    yearly
        .iter()
        .filter_map(|(y, t)| t.multi_affiliation_share().map(|s| (y, s)))
        .collect()
}

pub fn bucket_counts<'a>(teams: impl IntoIterator<Item = &'a TeamDistances>) -> BTreeMap<i32, BucketCounts> {
    let mut out: BTreeMap<i32, BucketCounts> = BTreeMap::new();
    for t in teams {
        out.entry(t.year).or_default().add(t);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub label: String,
    pub start: i32,
    pub end: i32,
}

/// Contiguous, non-overlapping year ranges in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Stage>", into = "Vec<Stage>")]
pub struct StageDefinition {
    stages: Vec<Stage>,
}

impl StageDefinition {
    pub fn new(stages: Vec<Stage>) -> Result<Self, AnalyticsError> {
        if stages.is_empty() {
            return Err(AnalyticsError::InvalidStages("no stages".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            if s.label.trim().is_empty() {
                return Err(AnalyticsError::InvalidStages(format!("stage {} has an empty label", i + 1)));
            }
            if s.start > s.end {
                return Err(AnalyticsError::InvalidStages(format!(
                    "stage {:?} runs backwards ({}-{})",
                    s.label, s.start, s.end
                )));
            }
            if stages[..i].iter().any(|p| p.label == s.label) {
                return Err(AnalyticsError::InvalidStages(format!("duplicate label {:?}", s.label)));
            }
        }
        for w in stages.windows(2) {
            match (w[0].end + 1).cmp(&w[1].start) {
                Ordering::Equal => {}
                Ordering::Less => {
                    return Err(AnalyticsError::InvalidStages(format!(
                        "gap between {:?} and {:?}",
                        w[0].label, w[1].label
                    )))
                }
                Ordering::Greater => {
                    return Err(AnalyticsError::InvalidStages(format!(
                        "{:?} overlaps {:?}",
                        w[0].label, w[1].label
                    )))
                }
            }
        }
        Ok(StageDefinition { stages })
    }

    /// 1950–1996, 1997–2009, 2010–2019.
    pub fn standard() -> Self {
        let stage = |n: u32, start, end| Stage {
            label: format!("Stage {n}"),
            start,
            end,
        };
        StageDefinition {
            stages: vec![stage(1, 1950, 1996), stage(2, 1997, 2009), stage(3, 2010, 2019)],
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn span(&self) -> YearWindow {
        YearWindow {
            start: self.stages[0].start,
            end: self.stages[self.stages.len() - 1].end,
        }
    }

    pub fn stage_of(&self, year: i32) -> Option<usize> {
        let i = self.stages.partition_point(|s| s.end < year);
        (i < self.stages.len() && self.stages[i].start <= year).then_some(i)
    }

    /// Stages must cover the analysis window exactly.
    pub fn check_covers(&self, window: YearWindow) -> Result<(), AnalyticsError> {
        let span = self.span();
        if span != window {
            return Err(AnalyticsError::InvalidStages(format!(
                "stages span {}-{} but the analysis window is {}-{}",
                span.start, span.end, window.start, window.end
            )));
        }
        Ok(())
    }
}

impl Default for StageDefinition {
    fn default() -> Self {
        StageDefinition::standard()
    }
}

impl TryFrom<Vec<Stage>> for StageDefinition {
    type Error = AnalyticsError;

    fn try_from(v: Vec<Stage>) -> Result<Self, Self::Error> {
        StageDefinition::new(v)
    }
}

impl From<StageDefinition> for Vec<Stage> {
    fn from(d: StageDefinition) -> Self {
        d.stages
    }
}

/// Parses `1950-1996,1997-2009` or `early=1950-1996,late=1997-2009`.
impl FromStr for StageDefinition {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |part: &str| AnalyticsError::InvalidStages(format!("cannot parse stage {part:?}"));
        let mut stages = Vec::new();
        for (i, part) in s.split(',').enumerate() {
            let part = part.trim();
            let (label, range) = match part.split_once('=') {
                Some((l, r)) => (l.trim().to_string(), r.trim()),
                None => (format!("Stage {}", i + 1), part),
            };
            let (a, b) = range.split_once('-').ok_or_else(|| bad(part))?;
            let start = a.trim().parse().map_err(|_| bad(part))?;
            let end = b.trim().parse().map_err(|_| bad(part))?;
            stages.push(Stage { label, start, end });
        }
        StageDefinition::new(stages)
    }
}

impl fmt::Display for StageDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}={}-{}", s.label, s.start, s.end)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CountryTally {
    pub publications: u64,
    pub scopes: ScopeCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageTally {
    pub scopes: ScopeCounts,
    /// Each publication counts once for every distinct country it involves.
    pub countries: BTreeMap<CountryCode, CountryTally>,
    gd: [GdTally; 3],
}

impl StageTally {
    pub fn add(&mut self, t: &TeamDistances) {
        self.scopes.add(t.scope);
        add_gd(&mut self.gd, t);
        for c in &t.countries {
            let e = self.countries.entry(*c).or_default();
            e.publications += 1;
            e.scopes.add(t.scope);
        }
    }

    pub fn merge(&mut self, o: &StageTally) {
        self.scopes.merge(&o.scopes);
        for (a, b) in self.gd.iter_mut().zip(&o.gd) {
            a.merge(b);
        }
        for (c, t) in &o.countries {
            let e = self.countries.entry(*c).or_default();
            e.publications += t.publications;
            e.scopes.merge(&t.scopes);
        }
    }

    pub fn publications(&self) -> u64 {
        self.scopes.total()
    }

    pub fn means(&self, level: GdLevel) -> Option<GdMeans> {
        self.gd[level.index()].means()
    }

    pub fn gd(&self, level: GdLevel) -> &GdTally {
        &self.gd[level.index()]
    }
}

type PairKey = (AffiliationId, AffiliationId);

#[derive(Debug, Clone, PartialEq)]
struct PairTally {
    count: u64,
    km: f64,
    countries: (Option<CountryCode>, Option<CountryCode>),
}

/// Occurrence counts of affiliation pairs within domestic and within
/// international publications.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairCounts {
    domestic: HashMap<PairKey, PairTally>,
    international: HashMap<PairKey, PairTally>,
}

impl PairCounts {
    pub fn add(&mut self, t: &TeamDistances) {
        let map = match t.scope {
            Some(Scope::Domestic) => &mut self.domestic,
            Some(Scope::International) => &mut self.international,
            _ => return,
        };
        for p in &t.pair_distances {
            map.entry((p.first.clone(), p.second.clone()))
                .and_modify(|e| e.count += 1)
                .or_insert(PairTally {
                    count: 1,
                    km: p.km,
                    countries: (p.first_country, p.second_country),
                });
        }
    }

    pub fn merge(&mut self, other: &PairCounts) {
        for (mine, theirs) in [
            (&mut self.domestic, &other.domestic),
            (&mut self.international, &other.international),
        ] {
            for (k, v) in theirs {
                mine.entry(k.clone())
                    .and_modify(|e| e.count += v.count)
                    .or_insert_with(|| v.clone());
            }
        }
    }

    fn scope_map(&self, scope: Scope) -> Result<&HashMap<PairKey, PairTally>, AnalyticsError> {
        match scope {
            Scope::Domestic => Ok(&self.domestic),
            Scope::International => Ok(&self.international),
            Scope::SingleAffiliation => Err(AnalyticsError::InvalidArgument(
                "single-affiliation publications have no pairs".into(),
            )),
        }
    }

    /// Most frequent pairs, ties broken by the id pair in ascending order.
    pub fn top(&self, scope: Scope, k: usize) -> Result<Vec<RankedPair>, AnalyticsError> {
        check_k(k)?;
        let map = self.scope_map(scope)?;
        Ok(rank(map.iter().map(|(key, t)| (key, t.count, t)).collect(), k))
    }

    /// Ranking over the union of several tallies, e.g. all stages.
    pub fn top_across(parts: &[PairCounts], scope: Scope, k: usize) -> Result<Vec<RankedPair>, AnalyticsError> {
        check_k(k)?;
        let mut merged: HashMap<&PairKey, (u64, &PairTally)> = HashMap::new();
        for p in parts {
            for (key, t) in p.scope_map(scope)? {
                merged.entry(key).and_modify(|e| e.0 += t.count).or_insert((t.count, t));
            }
        }
        Ok(rank(merged.into_iter().map(|(key, (c, t))| (key, c, t)).collect(), k))
    }
}

fn check_k(k: usize) -> Result<(), AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

fn rank(mut entries: Vec<(&PairKey, u64, &PairTally)>, k: usize) -> Vec<RankedPair> {
    let order = |a: &(&PairKey, u64, &PairTally), b: &(&PairKey, u64, &PairTally)| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0));
    if entries.len() > k {
        entries.select_nth_unstable_by(k - 1, order);
        entries.truncate(k);
    }
    entries.sort_unstable_by(order);
    entries
        .into_iter()
        .map(|((a, b), count, t)| RankedPair {
            first: a.clone(),
            second: b.clone(),
            countries: country_label(t.countries),
            count,
            km: t.km,
        })
        .collect()
}

fn country_label(c: (Option<CountryCode>, Option<CountryCode>)) -> String {
    match c {
        (Some(a), Some(b)) if a == b => a.to_string(),
        (Some(a), Some(b)) => {
            let (x, y) = if a < b { (a, b) } else { (b, a) };
            format!("{x}/{y}")
        }
        (Some(a), None) | (None, Some(a)) => a.to_string(),
        (None, None) => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPair {
    pub first: AffiliationId,
    pub second: AffiliationId,
    /// One code for a same-country pair, otherwise `AA/BB` in sorted order.
    pub countries: String,
    pub count: u64,
    pub km: f64,
}

/// Pair ranking for the publications of one stage and scope.
pub fn top_pairs<'a>(
    teams: impl IntoIterator<Item = &'a TeamDistances>,
    stage: &Stage,
    scope: Scope,
    k: usize,
) -> Result<Vec<RankedPair>, AnalyticsError> {
    let mut counts = PairCounts::default();
    for t in teams {
        if (stage.start..=stage.end).contains(&t.year) {
            counts.add(t);
        }
    }
    counts.top(scope, k)
}

pub fn stage_summaries<'a>(
    teams: impl IntoIterator<Item = &'a TeamDistances>,
    stages: &StageDefinition,
) -> Vec<StageTally> {
    let mut out = vec![StageTally::default(); stages.len()];
    for t in teams {
        if let Some(i) = stages.stage_of(t.year) {
            out[i].add(t);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Negative slope of log10(frequency) against log10(n).
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Smallest and largest publication count observed.
    pub fit_min: u64,
    pub fit_max: u64,
    /// Number of binned points the line was fitted to.
    pub points: usize,
    pub affiliations: u64,
    /// Discrete maximum-likelihood exponent with n_min = 1, when it exists.
    pub mle_exponent: Option<f64>,
}

pub const MIN_POWER_LAW_AFFILIATIONS: usize = 10;
const UNIT_BIN_LIMIT: u64 = 10;
const LOG_BIN_RATIO: f64 = 1.5;

/// Fits the frequency distribution of per-affiliation publication counts.
///
/// Counts up to 10 get one bin each; larger counts are grouped in bins whose
/// width grows by a factor of 1.5, with the frequency divided by the number
/// of integers in the bin and placed at the bin's geometric center. The line
/// is fitted in log10 space by least squares weighted by the number of
/// affiliations in each bin.
pub fn fit_power_law(counts: impl IntoIterator<Item = u64>) -> Result<PowerLawFit, AnalyticsError> {
    let mut freq: BTreeMap<u64, u64> = BTreeMap::new();
    let mut affiliations = 0u64;
    for c in counts.into_iter().filter(|&c| c > 0) {
        *freq.entry(c).or_default() += 1;
        affiliations += 1;
    }
    if affiliations < MIN_POWER_LAW_AFFILIATIONS as u64 {
        return Err(AnalyticsError::InsufficientData(format!(
            "{affiliations} affiliations, need at least {MIN_POWER_LAW_AFFILIATIONS}"
        )));
    }
    let points = binned(&freq);
    if points.len() < 2 {
        return Err(AnalyticsError::InsufficientData(format!(
            "{} non-empty bin(s), need at least 2",
            points.len()
        )));
    }
    let (slope, intercept, r_squared) = weighted_line(&points);
    let fit_min = *freq.keys().next().expect("non-empty");
    let fit_max = *freq.keys().next_back().expect("non-empty");
    Ok(PowerLawFit {
        exponent: -slope,
        intercept,
        r_squared,
        fit_min,
        fit_max,
        points: points.len(),
        affiliations,
        mle_exponent: zeta_mle(&freq),
    })
}

/// (log10 x, log10 density, weight) per non-empty bin.
fn binned(freq: &BTreeMap<u64, u64>) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for (&n, &f) in freq.range(..=UNIT_BIN_LIMIT) {
        out.push(((n as f64).log10(), (f as f64).log10(), f as f64));
    }
    let Some(&max_n) = freq.keys().next_back() else {
        return out;
    };
    let mut lo = UNIT_BIN_LIMIT + 1;
    while lo <= max_n {
        let hi = ((lo as f64 * LOG_BIN_RATIO).floor() as u64).max(lo);
        let total: u64 = freq.range(lo..=hi).map(|(_, f)| f).sum();
        if total > 0 {
            let width = (hi - lo + 1) as f64;
            let x = ((lo as f64) * (hi as f64)).sqrt();
            out.push((x.log10(), (total as f64 / width).log10(), total as f64));
        }
        lo = hi + 1;
    }
    out
}

fn weighted_line(points: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        let ss_res: f64 = points
            .iter()
            .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r_squared)
}

/// Solves zeta'(a)/zeta(a) = -mean(ln n) by bisection.
fn zeta_mle(freq: &BTreeMap<u64, u64>) -> Option<f64> {
    let total: u64 = freq.values().sum();
    let mean_ln = freq.iter().map(|(&n, &f)| f as f64 * (n as f64).ln()).sum::<f64>() / total as f64;
    let g = |a: f64| mean_ln + zeta_log_derivative(a);
    let (mut lo, mut hi) = (1.0 + 1e-6, 20.0);
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// zeta'(s)/zeta(s) for s > 1, via Euler–Maclaurin summation.
fn zeta_log_derivative(s: f64) -> f64 {
    const N: f64 = 20.0;
    let mut z = 0.0;
    let mut dz = 0.0;
    for n in 1..20 {
        let n = n as f64;
        let t = n.powf(-s);
        z += t;
        dz -= n.ln() * t;
    }
    let ln = N.ln();
    let a = N.powf(1.0 - s) / (s - 1.0);
    let b = N.powf(-s);
    let c = N.powf(-s - 1.0);
    let d = N.powf(-s - 3.0);
    let poly = s * (s + 1.0) * (s + 2.0);
    z += a + b / 2.0 + s * c / 12.0 - poly * d / 720.0;
    dz += -ln * a - a / (s - 1.0) - ln * b / 2.0 + c / 12.0 - s * ln * c / 12.0
        - (3.0 * s * s + 6.0 * s + 2.0) * d / 720.0
        + poly * ln * d / 720.0;
    dz / z
}

/// Mergeable tally of everything the analysis reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregator {
    stages: StageDefinition,
    yearly: YearlySeries,
    stage_tallies: Vec<StageTally>,
    pairs: Vec<PairCounts>,
    productivity: HashMap<AffiliationId, u64>,
    outside_stages: u64,
}

impl Aggregator {
    pub fn new(stages: StageDefinition) -> Self {
        let n = stages.len();
        Aggregator {
            stages,
            yearly: YearlySeries::default(),
            stage_tallies: vec![StageTally::default(); n],
            pairs: vec![PairCounts::default(); n],
            productivity: HashMap::new(),
            outside_stages: 0,
        }
    }

    pub fn add(&mut self, t: &TeamDistances) {
        self.yearly.add(t);
        for a in &t.affiliations {
            *self.productivity.entry(a.clone()).or_default() += 1;
        }
        match self.stages.stage_of(t.year) {
            Some(i) => {
                self.stage_tallies[i].add(t);
                self.pairs[i].add(t);
            }
            None => self.outside_stages += 1,
        }
    }

    /// Both sides must have been built with the same stages.
    pub fn merge(&mut self, other: Aggregator) {
        assert_eq!(self.stages, other.stages, "merging tallies built on different stages");
        self.yearly.merge(&other.yearly);
        for (a, b) in self.stage_tallies.iter_mut().zip(&other.stage_tallies) {
            a.merge(b);
        }
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            a.merge(b);
        }
        let mut theirs = other.productivity;
        if self.productivity.len() < theirs.len() {
            std::mem::swap(&mut self.productivity, &mut theirs);
        }
        for (k, v) in theirs {
            *self.productivity.entry(k).or_default() += v;
        }
        self.outside_stages += other.outside_stages;
    }

    pub fn stages(&self) -> &StageDefinition {
        &self.stages
    }

    pub fn yearly(&self) -> &YearlySeries {
        &self.yearly
    }

    pub fn stage_tallies(&self) -> &[StageTally] {
        &self.stage_tallies
    }

    pub fn top_pairs(&self, stage: usize, scope: Scope, k: usize) -> Result<Vec<RankedPair>, AnalyticsError> {
        self.pairs
            .get(stage)
            .ok_or_else(|| AnalyticsError::InvalidArgument(format!("no stage with index {stage}")))?
            .top(scope, k)
    }

    /// Ranking over the whole analysis window.
    pub fn top_pairs_overall(&self, scope: Scope, k: usize) -> Result<Vec<RankedPair>, AnalyticsError> {
        PairCounts::top_across(&self.pairs, scope, k)
    }

    pub fn publications(&self) -> u64 {
        self.yearly.iter().map(|(_, t)| t.publications()).sum()
    }

    /// Publications whose year falls in no stage.
    pub fn outside_stages(&self) -> u64 {
        self.outside_stages
    }

    pub fn affiliation_publication_counts(&self) -> &HashMap<AffiliationId, u64> {
        &self.productivity
    }

    pub fn power_law(&self) -> Result<PowerLawFit, AnalyticsError> {
        fit_power_law(self.productivity.values().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AffiliationRecord, PublicationTeam};
    use crate::geodesy::{DistanceMode, GeoPoint};
    use crate::metrics::assess_team;

    fn td(year: i32, affs: &[(&str, f64, Option<&str>)]) -> TeamDistances {
        let affs = affs
            .iter()
            .map(|(id, lon, c)| AffiliationRecord {
                id: AffiliationId::new(id).unwrap(),
                location: GeoPoint::new(0.0, *lon).unwrap(),
                country: c.map(|c| c.parse().unwrap()),
            })
            .collect();
        assess_team(&PublicationTeam::new("p", year, affs).unwrap(), &DistanceMode::default())
    }

    #[test]
    fn default_stage_boundaries() {
        let s = StageDefinition::default();
        assert_eq!(s.stage_of(1950), Some(0));
        assert_eq!(s.stage_of(1996), Some(0));
        assert_eq!(s.stage_of(1997), Some(1));
        assert_eq!(s.stage_of(2009), Some(1));
        assert_eq!(s.stage_of(2010), Some(2));
        assert_eq!(s.stage_of(2019), Some(2));
        assert_eq!(s.stage_of(1949), None);
        assert_eq!(s.stage_of(2020), None);
        assert!(s.check_covers(YearWindow::new(1950, 2019).unwrap()).is_ok());
        assert!(s.check_covers(YearWindow::new(1950, 2020).unwrap()).is_err());
    }

    #[test]
    fn stage_validation() {
        let st = |start, end| Stage {
            label: format!("{start}"),
            start,
            end,
        };
        assert!(StageDefinition::new(vec![]).is_err());
        assert!(StageDefinition::new(vec![st(1950, 1990), st(1990, 2000)]).is_err());
        assert!(StageDefinition::new(vec![st(1950, 1990), st(1992, 2000)]).is_err());
        assert!(StageDefinition::new(vec![st(1990, 1950)]).is_err());
        assert!(StageDefinition::new(vec![st(1950, 1990), st(1991, 2000)]).is_ok());
    }

    #[test]
    fn stage_parsing_round_trips() {
        let d: StageDefinition = "1950-1996, 1997-2009,2010-2019".parse().unwrap();
        assert_eq!(d, StageDefinition::default());
        let again: StageDefinition = d.to_string().parse().unwrap();
        assert_eq!(again, d);
        let named: StageDefinition = "early=1900-1949,late=1950-2000".parse().unwrap();
        assert_eq!(named.stages()[1].label, "late");
        assert!("1950".parse::<StageDefinition>().is_err());
        assert!("1950-1960,1950-1970".parse::<StageDefinition>().is_err());
    }

    #[test]
    fn buckets() {
        assert_eq!(bucket_index(1), 0);
        assert_eq!(bucket_index(4), 3);
        assert_eq!(bucket_index(5), 4);
        assert_eq!(bucket_index(7), 4);
        let single = td(2000, &[("a", 0.0, Some("US"))]);
        let b = bucket_counts([&single]);
        assert_eq!(b[&2000].affiliations, [1, 0, 0, 0, 0]);
        assert_eq!(b[&2000].countries, [1, 0, 0, 0, 0]);
        let ids: Vec<String> = (0..7).map(|i| format!("a{i}")).collect();
        let big: Vec<(&str, f64, Option<&str>)> = ids.iter().map(|s| (s.as_str(), 0.0, Some("US"))).collect();
        let b = bucket_counts([&td(2000, &big)]);
        assert_eq!(b[&2000].affiliations, [0, 0, 0, 0, 1]);
    }

    #[test]
    fn yearly_means_and_absent_values() {
        let a = td(2001, &[("a", 0.0, Some("US")), ("b", 0.0, Some("US"))]);
        let mut b = td(2001, &[("c", 0.0, Some("US")), ("d", 1.0, Some("CN"))]);
        let mut a2 = a.clone();
        a2.indicators = GdIndicators::from_distances(&[100.0]);
        b.indicators = GdIndicators::from_distances(&[300.0]);
        let lone = td(2002, &[("a", 0.0, Some("US"))]);
        let s = build_yearly_series([&a2, &b, &lone]);
        let y = s.get(2001).unwrap();
        assert_eq!(y.means(GdLevel::All).unwrap().ave_km, 200.0);
        assert_eq!(y.means(GdLevel::Domestic).unwrap().ave_km, 100.0);
        assert_eq!(y.means(GdLevel::International).unwrap().ave_km, 300.0);
        let y2 = s.get(2002).unwrap();
        assert_eq!(y2.publications(), 1);
        assert_eq!(y2.means(GdLevel::All), None);
        assert_eq!(s.get(2003), None);
        let share = multi_affiliation_share_series(&s);
        assert_eq!(share[&2001], 1.0);
        assert_eq!(share[&2002], 0.0);
        assert!(!share.contains_key(&2003));
    }

    #[test]
    fn share_is_exact_ratio() {
        let mut s = YearlySeries::default();
        let single = td(2019, &[("a", 0.0, Some("US"))]);
        let multi = td(2019, &[("a", 0.0, Some("US")), ("b", 1.0, Some("US"))]);
        for _ in 0..60 {
            s.add(&single);
        }
        for _ in 0..40 {
            s.add(&multi);
        }
        assert_eq!(multi_affiliation_share_series(&s)[&2019], 0.4);
    }

    #[test]
    fn pair_ranking_ties_break_on_ids() {
        let t1 = td(2000, &[("b", 0.0, Some("US")), ("c", 1.0, Some("US"))]);
        let t2 = td(2000, &[("a", 0.0, Some("US")), ("z", 1.0, Some("US"))]);
        let t3 = td(2000, &[("a", 0.0, Some("CN")), ("b", 1.0, Some("US"))]);
        let stages = StageDefinition::default();
        let stage = &stages.stages()[1];
        let dom = top_pairs([&t1, &t2, &t1, &t2, &t3], stage, Scope::Domestic, 5).unwrap();
        let names: Vec<(&str, &str, u64)> = dom.iter().map(|p| (p.first.as_str(), p.second.as_str(), p.count)).collect();
        assert_eq!(names, vec![("a", "z", 2), ("b", "c", 2)]);
        assert_eq!(dom[0].countries, "US");
        let top1 = top_pairs([&t1, &t2, &t1, &t2], stage, Scope::Domestic, 1).unwrap();
        assert_eq!(top1.len(), 1);
        assert_eq!(top1[0].first.as_str(), "a");
        let int = top_pairs([&t3], stage, Scope::International, 5).unwrap();
        assert_eq!(int[0].countries, "CN/US");
        assert!(top_pairs([&t3], stage, Scope::Domestic, 0).is_err());
        let empty = top_pairs([&t3], &stages.stages()[0], Scope::International, 5).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn power_law_edge_cases() {
        assert!(matches!(
            fit_power_law(std::iter::repeat_n(3, 100)),
            Err(AnalyticsError::InsufficientData(_))
        ));
        assert!(matches!(
            fit_power_law([1, 2, 3, 4, 5]),
            Err(AnalyticsError::InsufficientData(_))
        ));
        let f = fit_power_law(std::iter::repeat_n(1, 1000).chain(std::iter::repeat_n(10, 10))).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!((f.fit_min, f.fit_max, f.points), (1, 10, 2));
    }

    #[test]
    fn zeta_log_derivative_matches_reference_values() {
        assert!((zeta_log_derivative(2.0) + 0.569_960_993_094_532_8).abs() < 1e-9);
        assert!((zeta_log_derivative(3.0) + 0.164_822_682_158_277_2).abs() < 1e-9);
    }

    #[test]
    fn exact_sum_is_order_independent() {
        let xs = [0.1, 1e4, 3.3333, 2e-7, 12345.678, 0.0];
        let mut a = ExactSum::default();
        let mut b = ExactSum::default();
        for x in xs {
            a.add(x);
        }
        for x in xs.iter().rev() {
            b.add(*x);
        }
        assert_eq!(a, b);
        assert!((a.value() - xs.iter().sum::<f64>()).abs() < 1e-9);
    }
}
