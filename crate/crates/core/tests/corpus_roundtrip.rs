use collabgeo::corpus::{
    parse_records, write_records, AffiliationId, AffiliationRecord, EdgeWriter, IngestOptions, IngestReport,
    InputFormat, PublicationTeam,
};
use collabgeo::geodesy::GeoPoint;
use collabgeo::pipeline;
use proptest::prelude::*;

fn pool() -> impl Strategy<Value = Vec<AffiliationRecord>> {
    prop::collection::vec(
        (-90.0f64..=90.0, -180.0f64..180.0, prop::option::of(prop::sample::select(vec!["US", "CN", "DE", "BR"]))),
        1..12,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (lat, lon, c))| AffiliationRecord {
                id: AffiliationId::new(&format!("inst {i}, \"q\"")).unwrap(),
                location: GeoPoint::new(lat, lon).unwrap(),
                country: c.map(|c| c.parse().unwrap()),
            })
            .collect()
    })
}

fn corpus() -> impl Strategy<Value = Vec<PublicationTeam>> {
    pool().prop_flat_map(|affs| {
        let n = affs.len();
        prop::collection::vec((1900i32..2100, prop::collection::vec(0..n, 1..6)), 0..40).prop_map(move |pubs| {
            pubs.into_iter()
                .enumerate()
                .map(|(i, (year, picks))| {
                    let team = picks.iter().map(|&k| affs[k].clone()).collect();
                    PublicationTeam::new(format!("pub-{i}"), year, team).unwrap()
                })
                .collect()
        })
    })
}

fn edges(teams: &[PublicationTeam]) -> Vec<u8> {
    let mut w = EdgeWriter::new(Vec::new()).unwrap();
    for t in teams {
        w.write(t).unwrap();
    }
    w.finish().unwrap()
}

fn lines(teams: &[PublicationTeam]) -> Vec<u8> {
    let mut out = Vec::new();
    write_records(&mut out, teams).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn line_records_round_trip(teams in corpus()) {
        let (back, report) = parse_records(&lines(&teams)[..], InputFormat::LineRecords, &IngestOptions::default()).unwrap();
        prop_assert_eq!(&back, &teams);
        prop_assert_eq!(report.accepted, teams.len() as u64);
        prop_assert!(report.is_balanced());
    }

    #[test]
    fn delimited_edges_round_trip(teams in corpus()) {
        let (back, report) = parse_records(&edges(&teams)[..], InputFormat::DelimitedEdges, &IngestOptions::default()).unwrap();
        prop_assert_eq!(&back, &teams);
        prop_assert_eq!(report.total_records, teams.len() as u64);
    }

    #[test]
    fn formats_agree(teams in corpus()) {
        let opts = IngestOptions::default();
        let a = parse_records(&lines(&teams)[..], InputFormat::LineRecords, &opts).unwrap();
        let b = parse_records(&edges(&teams)[..], InputFormat::DelimitedEdges, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn noisy_input() -> String {
    let teams: Vec<PublicationTeam> = (0..500)
        .map(|i| {
            let affs = (0..(i % 4) + 1)
                .map(|k| AffiliationRecord {
                    id: AffiliationId::new(&format!("a{}", (i * 7 + k * 13) % 90)).unwrap(),
                    location: GeoPoint::new(((i * 7 + k * 13) % 90) as f64 - 45.0, 10.0).unwrap(),
                    country: None,
                })
                .collect();
            PublicationTeam::new(format!("p{i}"), 1950 + (i % 70), affs).unwrap()
        })
        .collect();
    let text = String::from_utf8(lines(&teams)).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        out.push_str(line);
        out.push('\n');
        match i % 37 {
            0 => out.push_str("{\"id\":\"x\",\"year\":\n"),
            5 => out.push_str(&format!("{{\"id\":\"bad{i}\",\"year\":1999,\"affiliations\":[{{\"id\":\"z\",\"lat\":95,\"lon\":0}}]}}\n")),
            9 => out.push_str(&format!("{{\"id\":\"old{i}\",\"year\":1066,\"affiliations\":[{{\"id\":\"z\",\"lat\":5,\"lon\":0}}]}}\n")),
            13 => out.push_str(&format!("{{\"id\":\"none{i}\",\"year\":2000,\"affiliations\":[]}}\n")),
            _ => {}
        }
    }
    out
}

fn counts(r: &IngestReport) -> [u64; 6] {
    [
        r.total_records,
        r.accepted,
        r.dropped_malformed,
        r.dropped_no_affiliation,
        r.dropped_bad_coords,
        r.dropped_bad_year,
    ]
}

#[test]
fn sharded_reports_sum_to_whole() {
    let text = noisy_input();
    let opts = IngestOptions::default();
    let (_, whole) = parse_records(text.as_bytes(), InputFormat::LineRecords, &opts).unwrap();
    assert!(whole.is_balanced());
    assert!(whole.dropped_malformed > 0 && whole.dropped_bad_coords > 0);
    assert!(whole.dropped_bad_year > 0 && whole.dropped_no_affiliation > 0);
    let all: Vec<&str> = text.lines().collect();
    for shards in [2, 3, 7] {
        let mut merged = IngestReport::default();
        for chunk in all.chunks(all.len().div_ceil(shards)) {
            let part = chunk.join("\n") + "\n";
            let (_, r) = parse_records(part.as_bytes(), InputFormat::LineRecords, &opts).unwrap();
            merged.merge(&r);
        }
        assert_eq!(counts(&merged), counts(&whole), "{shards} shards");
    }
}

#[test]
fn validation_is_independent_of_worker_count() {
    let text = noisy_input();
    let opts = IngestOptions::default();
    let (_, want) = parse_records(text.as_bytes(), InputFormat::LineRecords, &opts).unwrap();
    for workers in [1, 2, 5] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        let got = pool
            .install(|| pipeline::validate([(text.as_bytes(), InputFormat::LineRecords)], &opts))
            .unwrap();
        assert_eq!(got, want, "{workers} workers");
    }
}

#[test]
fn parsing_twice_is_identical() {
    let text = noisy_input();
    let opts = IngestOptions::default();
    let a = parse_records(text.as_bytes(), InputFormat::LineRecords, &opts).unwrap();
    let b = parse_records(text.as_bytes(), InputFormat::LineRecords, &opts).unwrap();
    assert_eq!(a, b);
}
