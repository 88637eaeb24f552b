use std::path::PathBuf;
use std::sync::OnceLock;

use collabgeo::georesolve::{load_boundaries, resolve_country, CountryBoundarySet, Resolution};
use collabgeo::geodesy::GeoPoint;
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn boundaries() -> &'static CountryBoundarySet {
    static SET: OnceLock<CountryBoundarySet> = OnceLock::new();
    SET.get_or_init(|| load_boundaries(data("countries_110m_subset.geojson")).unwrap())
}

fn code_at(lat: f64, lon: f64, snap: f64) -> String {
    resolve_country(GeoPoint::new(lat, lon).unwrap(), boundaries(), snap)
        .map(|c| c.to_string())
        .unwrap_or_default()
}

#[test]
fn fixture_loads_and_skips_placeholder_code() {
    let set = boundaries();
    assert_eq!(set.len(), 33);
    assert!(set.countries().iter().all(|c| c.code.as_str() != "XK"));
    for c in set.countries() {
        for p in &c.polygons {
            let b = p.bbox();
            assert!(b.min_lon >= -180.0 && b.max_lon <= 180.0, "{}", c.code);
        }
    }
}

#[test]
fn known_cities() {
    let cases = [
        (38.9072, -77.0369, "US"),
        (42.3770, -71.1167, "US"),
        (47.6396, -122.1281, "US"),
        (45.4215, -75.6972, "CA"),
        (39.9042, 116.4074, "CN"),
        (31.8389, 117.2636, "CN"),
        (35.6762, 139.6503, "JP"),
        (49.0094, 8.4116, "DE"),
        (48.8566, 2.3522, "FR"),
        (19.1334, 72.9133, "IN"),
        (55.7558, 37.6173, "RU"),
        (64.7337, 177.5089, "RU"),
        (-33.8688, 151.2093, "AU"),
        (-15.7975, -47.8919, "BR"),
        (-17.7134, 178.0650, "FJ"),
        (-85.0, 0.0, "AQ"),
        (-89.9, 123.0, "AQ"),
    ];
    for (lat, lon, want) in cases {
        assert_eq!(code_at(lat, lon, 25.0), want, "({lat}, {lon})");
    }
}

#[test]
fn gulf_of_guinea_origin_is_unresolved() {
    assert_eq!(code_at(0.0, 0.0, 25.0), "");
    assert_eq!(
        boundaries().resolve(GeoPoint::new(0.0, 0.0).unwrap(), 25.0),
        Resolution::Unresolved
    );
}

#[test]
fn coastal_point_snaps_within_radius() {
    // Just off the Dutch coast.
    let p = GeoPoint::new(52.37, 4.10).unwrap();
    assert_eq!(boundaries().resolve(p, 0.0), Resolution::Unresolved);
    match boundaries().resolve(p, 25.0) {
        Resolution::Snapped { code, distance_km } => {
            assert_eq!(code.as_str(), "NL");
            assert!(distance_km > 0.0 && distance_km <= 25.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn matches_independent_point_in_polygon_labels() {
    let mut reader = csv::Reader::from_path(data("resolve_oracle.csv")).unwrap();
    let mut n = 0;
    for row in reader.records() {
        let row = row.unwrap();
        let lat: f64 = row[0].parse().unwrap();
        let lon: f64 = row[1].parse().unwrap();
        assert_eq!(code_at(lat, lon, 0.0), &row[2], "({lat}, {lon})");
        n += 1;
    }
    assert_eq!(n, 5000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn snapping_is_monotone_in_radius(lat in -80.0f64..80.0, lon in -180.0f64..180.0, r1 in 0.0f64..100.0, extra in 0.0f64..100.0) {
        let a = code_at(lat, lon, r1);
        let b = code_at(lat, lon, r1 + extra);
        if !a.is_empty() {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn resolution_is_deterministic(lat in -90.0f64..=90.0, lon in -180.0f64..180.0) {
        prop_assert_eq!(code_at(lat, lon, 25.0), code_at(lat, lon, 25.0));
    }
}
