use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use collabgeo::analytics::{GdLevel, GdMeans, PowerLawFit, RankedPair, BUCKET_LABELS};
use collabgeo::metrics::Scope;
use collabgeo::pipeline::AnalysisOutcome;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

type Rankings = Vec<(Scope, Vec<(String, Vec<RankedPair>)>)>;

/// Named file contents, written together by [`write_atomically`].
#[derive(Debug, Default)]
pub struct OutputSet {
    pub files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

/// Writes every file into a scratch directory inside `dir`, then moves them
/// into place. On failure nothing new is left behind.
pub fn write_atomically(dir: &Path, set: &OutputSet) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let scratch = tempfile::Builder::new()
        .prefix(".collabgeo-")
        .tempdir_in(dir)
        .with_context(|| format!("cannot write to {}", dir.display()))?;
    for (name, bytes) in &set.files {
        fs::write(scratch.path().join(name), bytes).with_context(|| format!("cannot write {name}"))?;
    }
    let mut moved = Vec::new();
    for (name, _) in &set.files {
        let target = dir.join(name);
        if let Err(e) = fs::rename(scratch.path().join(name), &target) {
            for t in &moved {
                let _ = fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("cannot move {name} into place"));
        }
        moved.push(target);
    }
    Ok(())
}

fn table(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut out = format!("# schema: collabgeo/{name} v{SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    Ok(out)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn means_cells(m: Option<GdMeans>, n: u64) -> [String; 4] {
    [
        n.to_string(),
        opt(m.map(|m| m.ave_km)),
        opt(m.map(|m| m.max_km)),
        opt(m.map(|m| m.min_km)),
    ]
}

fn means_header(prefix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for l in GdLevel::ALL {
        let l = l.as_str();
        h.push(format!("{l}_teams"));
        h.push(format!("{l}_mean_ave_gd_km"));
        h.push(format!("{l}_mean_max_gd_km"));
        h.push(format!("{l}_mean_min_gd_km"));
    }
    h
}

pub fn render(outcome: &AnalysisOutcome, config: &RunConfig) -> Result<(OutputSet, Summary)> {
    let t = &outcome.tallies;
    let mut set = OutputSet::default();
    let mut warnings = Vec::new();
    let empty = t.publications() == 0;
    if empty {
        warnings.push("no publications in the analysis window; tables are empty".to_string());
    }

    let yearly_header = means_header(&[
        "year",
        "publications",
        "single",
        "multi",
        "multi_share",
        "domestic",
        "international",
        "unclassifiable",
    ]);
    let rows = t
        .yearly()
        .iter()
        .map(|(y, yt)| {
            let s = yt.scopes;
            let mut r = vec![
                y.to_string(),
                yt.publications().to_string(),
                s.single.to_string(),
                s.multi().to_string(),
                opt(yt.multi_affiliation_share()),
                s.domestic.to_string(),
                s.international.to_string(),
                s.unclassifiable.to_string(),
            ];
            for l in GdLevel::ALL {
                r.extend(means_cells(yt.means(l), yt.gd(l).n));
            }
            r
        })
        .collect();
    let h: Vec<&str> = yearly_header.iter().map(String::as_str).collect();
    set.push("yearly_series.csv", table("yearly_series", &h, rows)?);

    let mut bucket_header = vec!["year".to_string()];
    bucket_header.extend(BUCKET_LABELS.iter().map(|b| format!("affiliations_{b}")));
    bucket_header.extend(BUCKET_LABELS.iter().map(|b| format!("countries_{b}")));
    bucket_header.push("countries_unresolved".into());
    let rows = t
        .yearly()
        .iter()
        .map(|(y, yt)| {
            let b = &yt.buckets;
            let mut r = vec![y.to_string()];
            r.extend(b.affiliations.iter().map(u64::to_string));
            r.extend(b.countries.iter().map(u64::to_string));
            r.push(b.countries_unresolved.to_string());
            r
        })
        .collect();
    let h: Vec<&str> = bucket_header.iter().map(String::as_str).collect();
    set.push("buckets.csv", table("buckets", &h, rows)?);

    let stage_header = means_header(&[
        "stage",
        "start_year",
        "end_year",
        "publications",
        "single",
        "domestic",
        "international",
        "unclassifiable",
    ]);
    let stages = t.stages().stages();
    let mut rows = Vec::new();
    let mut country_rows = Vec::new();
    if !empty {
        for (stage, st) in stages.iter().zip(t.stage_tallies()) {
            let s = st.scopes;
            let mut r = vec![
                stage.label.clone(),
                stage.start.to_string(),
                stage.end.to_string(),
                st.publications().to_string(),
                s.single.to_string(),
                s.domestic.to_string(),
                s.international.to_string(),
                s.unclassifiable.to_string(),
            ];
            for l in GdLevel::ALL {
                r.extend(means_cells(st.means(l), st.gd(l).n));
            }
            rows.push(r);

            let mut countries: Vec<_> = st.countries.iter().collect();
            countries.sort_by(|a, b| b.1.publications.cmp(&a.1.publications).then(a.0.cmp(b.0)));
            for (code, c) in countries {
                country_rows.push(vec![
                    stage.label.clone(),
                    code.to_string(),
                    c.publications.to_string(),
                    c.scopes.single.to_string(),
                    c.scopes.domestic.to_string(),
                    c.scopes.international.to_string(),
                    c.scopes.unclassifiable.to_string(),
                ]);
            }
        }
    }
    let h: Vec<&str> = stage_header.iter().map(String::as_str).collect();
    set.push("stage_summary.csv", table("stage_summary", &h, rows)?);
    set.push(
        "stage_countries.csv",
        table(
            "stage_countries",
            &["stage", "country", "publications", "single", "domestic", "international", "unclassifiable"],
            country_rows,
        )?,
    );

    let mut rankings: Rankings = Vec::new();
    for scope in [Scope::Domestic, Scope::International] {
        let mut per_stage = Vec::new();
        let mut rows = Vec::new();
        for (i, stage) in stages.iter().enumerate() {
            let ranked = t.top_pairs(i, scope, config.top_k)?;
            for (rank, p) in ranked.iter().enumerate() {
                rows.push(vec![
                    stage.label.clone(),
                    (rank + 1).to_string(),
                    p.first.to_string(),
                    p.second.to_string(),
                    p.countries.clone(),
                    p.count.to_string(),
                    num(p.km),
                ]);
            }
            per_stage.push((stage.label.clone(), ranked));
        }
        let name = format!("top_pairs_{}", scope.as_str());
        set.push(
            &format!("{name}.csv"),
            table(
                &name,
                &[
                    "stage",
                    "rank",
                    "affiliation_1",
                    "affiliation_2",
                    "countries",
                    "collaborations",
                    "distance_km",
                ],
                rows,
            )?,
        );
        rankings.push((scope, per_stage));
    }

    let fit = match t.power_law() {
        Ok(f) => Some(f),
        Err(e) => {
            if !empty {
                warnings.push(format!("power-law fit skipped: {e}"));
            }
            None
        }
    };
    let rows = fit
        .iter()
        .map(|f| {
            vec![
                num(f.exponent),
                num(f.intercept),
                num(f.r_squared),
                f.fit_min.to_string(),
                f.fit_max.to_string(),
                f.points.to_string(),
                f.affiliations.to_string(),
                opt(f.mle_exponent),
            ]
        })
        .collect();
    set.push(
        "powerlaw_fit.csv",
        table(
            "powerlaw_fit",
            &[
                "exponent",
                "intercept",
                "r_squared",
                "fit_min_publications",
                "fit_max_publications",
                "binned_points",
                "affiliations",
                "mle_exponent",
            ],
            rows,
        )?,
    );

    let total = t.yearly().total();
    let summary = Summary {
        schema: format!("collabgeo/summary v{SCHEMA_VERSION}"),
        publications: total.publications(),
        outside_window: outcome.outside_window,
        affiliations: outcome.affiliations,
        multi_affiliation_share: total.multi_affiliation_share(),
        domestic: total.scopes.domestic,
        international: total.scopes.international,
        unclassifiable: total.scopes.unclassifiable,
        top_domestic: t.top_pairs_overall(Scope::Domestic, 1)?.into_iter().next(),
        top_international: t.top_pairs_overall(Scope::International, 1)?.into_iter().next(),
        power_law: fit,
        warnings,
    };

    set.push("ingest_report.json", json_bytes(&json!({
        "schema": format!("collabgeo/ingest_report v{SCHEMA_VERSION}"),
        "report": outcome.ingest,
        "balanced": outcome.ingest.is_balanced(),
        "outside_window": outcome.outside_window,
    }))?);
    set.push("run_config.json", json_bytes(&json!({
        "schema": format!("collabgeo/run_config v{SCHEMA_VERSION}"),
        "config": config,
    }))?);
    set.push("summary.json", json_bytes(&summary)?);
    set.push("report.txt", human_report(outcome, &summary, &rankings).into_bytes());
    Ok((set, summary))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema: String,
    pub publications: u64,
    pub outside_window: u64,
    pub affiliations: u64,
    pub multi_affiliation_share: Option<f64>,
    pub domestic: u64,
    pub international: u64,
    pub unclassifiable: u64,
    pub top_domestic: Option<RankedPair>,
    pub top_international: Option<RankedPair>,
    pub power_law: Option<PowerLawFit>,
    pub warnings: Vec<String>,
}

impl Summary {
    /// One-line digest for standard output.
    pub fn line(&self) -> String {
        let pair = |p: &Option<RankedPair>| match p {
            Some(p) => format!("{} / {} ({}, {:.2} km)", p.first, p.second, p.count, p.km),
            None => "none".to_string(),
        };
        format!(
            "publications={} multi_share={} top_domestic={} top_international={}",
            self.publications,
            self.multi_affiliation_share.map_or("n/a".to_string(), |s| format!("{:.4}", s)),
            pair(&self.top_domestic),
            pair(&self.top_international),
        )
    }
}

fn human_report(outcome: &AnalysisOutcome, s: &Summary, rankings: &Rankings) -> String {
    let t = &outcome.tallies;
    let r = &outcome.ingest;
    let mut out = String::new();
    let _ = writeln!(out, "Collaboration distance report");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Records read: {}  accepted: {}  malformed: {}  no affiliation: {}  bad coordinates: {}  bad year: {}",
        r.total_records, r.accepted, r.dropped_malformed, r.dropped_no_affiliation, r.dropped_bad_coords, r.dropped_bad_year
    );
    let _ = writeln!(out, "Outside analysis window: {}", s.outside_window);
    let _ = writeln!(
        out,
        "Publications: {}  single: {}  domestic: {}  international: {}  unclassifiable: {}",
        s.publications,
        s.publications - s.domestic - s.international - s.unclassifiable,
        s.domestic,
        s.international,
        s.unclassifiable
    );
    if let Some(share) = s.multi_affiliation_share {
        let _ = writeln!(out, "Multi-affiliation share: {:.2}%", share * 100.0);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Stages (mean AveGD / MaxGD / MinGD, km)");
    for (stage, st) in t.stages().stages().iter().zip(t.stage_tallies()) {
        let _ = writeln!(out, "  {} ({}-{}): {} publications", stage.label, stage.start, stage.end, st.publications());
        for l in GdLevel::ALL {
            if let Some(m) = st.means(l) {
                let _ = writeln!(
                    out,
                    "    {:<13} {:>10.2} {:>10.2} {:>10.2}",
                    l.as_str(),
                    m.ave_km,
                    m.max_km,
                    m.min_km
                );
            }
        }
    }
    for (scope, per_stage) in rankings {
        let _ = writeln!(out);
        let _ = writeln!(out, "Most frequent {} collaborations", scope.as_str());
        for (label, ranked) in per_stage {
            let _ = writeln!(out, "  {label}");
            if ranked.is_empty() {
                let _ = writeln!(out, "    (none)");
            }
            for p in ranked {
                let _ = writeln!(
                    out,
                    "    {} | {} | {} | {} | {:.2} km",
                    p.first, p.second, p.countries, p.count, p.km
                );
            }
        }
    }
    let _ = writeln!(out);
    match &s.power_law {
        Some(f) => {
            let _ = writeln!(
                out,
                "Power law: exponent {:.2}, r^2 {:.2}, {} affiliations, counts {}-{}",
                f.exponent, f.r_squared, f.affiliations, f.fit_min, f.fit_max
            );
            if let Some(m) = f.mle_exponent {
                let _ = writeln!(out, "  maximum-likelihood exponent {:.2}", m);
            }
        }
        None => {
            let _ = writeln!(out, "Power law: not fitted");
        }
    }
    for w in &s.warnings {
        let _ = writeln!(out, "Warning: {w}");
    }
    out
}
