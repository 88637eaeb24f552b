//! Per-publication distance indicators and collaboration scope.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{AffiliationId, AffiliationRecord, CountryCode, PublicationTeam};
use crate::geodesy::DistanceMode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("publication {publication_id} has {m} affiliation(s); distances need at least two")]
    NotACollaboration { publication_id: String, m: usize },
    #[error("publication {publication_id} has affiliations without a resolved country")]
    Unclassifiable { publication_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    SingleAffiliation,
    Domestic,
    International,
}

impl Scope {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scope::SingleAffiliation => "single",
            Scope::Domestic => "domestic",
            Scope::International => "international",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDistance {
    pub first: AffiliationId,
    pub second: AffiliationId,
    pub first_country: Option<CountryCode>,
    pub second_country: Option<CountryCode>,
    pub km: f64,
}

/// AveGD, MaxGD and MinGD of one team, in kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GdIndicators {
    pub ave_km: f64,
    pub max_km: f64,
    pub min_km: f64,
}

impl GdIndicators {
    /// `None` for an empty slice.
    pub fn from_distances(distances: &[f64]) -> Option<Self> {
        if distances.is_empty() {
            return None;
        }
        let mut max_km = f64::NEG_INFINITY;
        let mut min_km = f64::INFINITY;
        let mut sum = 0.0;
        for &d in distances {
            max_km = max_km.max(d);
            min_km = min_km.min(d);
            sum += d;
        }
        let ave_km = (sum / distances.len() as f64).clamp(min_km, max_km);
        Some(GdIndicators { ave_km, max_km, min_km })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeamDistances {
    pub publication_id: String,
    pub year: i32,
    pub m: usize,
    /// Sorted, unique.
    pub affiliations: Vec<AffiliationId>,
    /// All unordered pairs, ordered by (first, second) id.
    pub pair_distances: Vec<PairDistance>,
    /// Absent when m = 1.
    pub indicators: Option<GdIndicators>,
    /// `None` when a multi-affiliation team has an unresolved country.
    pub scope: Option<Scope>,
    /// Distinct resolved countries, sorted.
    pub countries: Vec<CountryCode>,
    /// True when any affiliation lacks a country.
    pub has_unresolved: bool,
}

impl TeamDistances {
    /// Distinct countries, or `None` if any affiliation is unresolved.
    pub fn country_count(&self) -> Option<usize> {
        (!self.has_unresolved).then_some(self.countries.len())
    }
}

/// Every unordered affiliation pair, sorted by id pair.
pub fn pair_set(team: &PublicationTeam) -> Result<Vec<(&AffiliationRecord, &AffiliationRecord)>, MetricsError> {
    require_collaboration(team)?;
    Ok(pairs(team.affiliations()))
}

fn pairs(affs: &[AffiliationRecord]) -> Vec<(&AffiliationRecord, &AffiliationRecord)> {
    let mut out = Vec::with_capacity(affs.len() * affs.len().saturating_sub(1) / 2);
    for (i, a) in affs.iter().enumerate() {
        for b in &affs[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

fn require_collaboration(team: &PublicationTeam) -> Result<(), MetricsError> {
    if team.m() < 2 {
        return Err(MetricsError::NotACollaboration {
            publication_id: team.id().to_string(),
            m: team.m(),
        });
    }
    Ok(())
}

/// Distances and indicators for a team with at least two affiliations.
pub fn team_distances(team: &PublicationTeam, mode: &DistanceMode) -> Result<TeamDistances, MetricsError> {
    require_collaboration(team)?;
    Ok(assess_team(team, mode))
}

/// Like [`team_distances`] but accepts single-affiliation teams, which get
/// no pairs and no indicators.
pub fn assess_team(team: &PublicationTeam, mode: &DistanceMode) -> TeamDistances {
    let pair_distances: Vec<PairDistance> = pairs(team.affiliations())
        .into_iter()
        .map(|(a, b)| PairDistance {
            first: a.id.clone(),
            second: b.id.clone(),
            first_country: a.country,
            second_country: b.country,
            km: mode.distance_km(a.location, b.location),
        })
        .collect();
    let kms: Vec<f64> = pair_distances.iter().map(|p| p.km).collect();
    let (countries, has_unresolved) = countries_of(team);
    TeamDistances {
        publication_id: team.id().to_string(),
        year: team.year(),
        m: team.m(),
        affiliations: team.affiliations().iter().map(|a| a.id.clone()).collect(),
        indicators: GdIndicators::from_distances(&kms),
        pair_distances,
        scope: scope_from(team.m(), &countries, has_unresolved),
        countries,
        has_unresolved,
    }
}

fn countries_of(team: &PublicationTeam) -> (Vec<CountryCode>, bool) {
    let mut unresolved = false;
    let mut codes: Vec<CountryCode> = team
        .affiliations()
        .iter()
        .filter_map(|a| {
            unresolved |= a.country.is_none();
            a.country
        })
        .collect();
    codes.sort();
    codes.dedup();
    (codes, unresolved)
}

fn scope_from(m: usize, countries: &[CountryCode], unresolved: bool) -> Option<Scope> {
    match (m, unresolved) {
        (0 | 1, _) => Some(Scope::SingleAffiliation),
        (_, true) => None,
        _ if countries.len() == 1 => Some(Scope::Domestic),
        _ => Some(Scope::International),
    }
}

pub fn classify_scope(team: &PublicationTeam) -> Result<Scope, MetricsError> {
    let (countries, unresolved) = countries_of(team);
    scope_from(team.m(), &countries, unresolved).ok_or_else(|| MetricsError::Unclassifiable {
        publication_id: team.id().to_string(),
    })
}

pub fn country_count(team: &PublicationTeam) -> Result<usize, MetricsError> {
    let (countries, unresolved) = countries_of(team);
    if unresolved {
        return Err(MetricsError::Unclassifiable {
            publication_id: team.id().to_string(),
        });
    }
    Ok(countries.len())
}
