use std::collections::HashSet;

use collabgeo::corpus::{AffiliationId, AffiliationRecord, CountryCode, PublicationTeam};
use collabgeo::geodesy::{geodesic_distance, DistanceMode, Ellipsoid, GeoPoint};
use collabgeo::metrics::{assess_team, classify_scope, country_count, pair_set, team_distances, Scope};
use geographiclib_rs::{DirectGeodesic, Geodesic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CODES: [&str; 5] = ["US", "CN", "GB", "DE", "JP"];

fn random_team(rng: &mut ChaCha8Rng, idx: usize) -> PublicationTeam {
    let m = rng.random_range(2..=6);
    let affs = (0..m)
        .map(|j| AffiliationRecord {
            id: AffiliationId::new(&format!("t{idx}-a{j}")).unwrap(),
            location: GeoPoint::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..180.0)).unwrap(),
            country: Some(CODES[rng.random_range(0..CODES.len())].parse().unwrap()),
        })
        .collect();
    PublicationTeam::new(format!("p{idx}"), 2000, affs).unwrap()
}

#[test]
fn indicators_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mode = DistanceMode::default();
    for i in 0..1000 {
        let team = random_team(&mut rng, i);
        let d = team_distances(&team, &mode).unwrap();
        let affs = team.affiliations();
        let m = affs.len();

        // Every ordered pair, then halve.
        let mut all = Vec::new();
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    all.push(geodesic_distance(affs[a].location, affs[b].location, &Ellipsoid::WGS84));
                }
            }
        }
        assert_eq!(all.len(), m * (m - 1));
        let sum: f64 = all.iter().sum::<f64>() / 2.0;
        let n = (m * (m - 1) / 2) as f64;
        let max = all.iter().cloned().fold(f64::MIN, f64::max);
        let min = all.iter().cloned().fold(f64::MAX, f64::min);

        assert_eq!(d.pair_distances.len(), m * (m - 1) / 2);
        assert_eq!(pair_set(&team).unwrap().len(), m * (m - 1) / 2);
        let g = d.indicators.unwrap();
        assert!((g.ave_km - sum / n).abs() < 1e-9, "{} vs {}", g.ave_km, sum / n);
        assert!((g.max_km - max).abs() < 1e-9);
        assert!((g.min_km - min).abs() < 1e-9);
        assert!(g.min_km <= g.ave_km && g.ave_km <= g.max_km);

        let distinct: HashSet<CountryCode> = affs.iter().filter_map(|a| a.country).collect();
        assert_eq!(country_count(&team).unwrap(), distinct.len());
        let scope = classify_scope(&team).unwrap();
        assert_eq!(scope == Scope::Domestic, distinct.len() == 1);
        assert_eq!(scope == Scope::International, distinct.len() >= 2);
        assert_eq!(assess_team(&team, &mode).scope, Some(scope));
    }
}

#[test]
fn three_four_five_triangle() {
    // Right angle at A with legs of 3 and 4 km; the hypotenuse is 5 km to
    // within the curvature of a few kilometers of ellipsoid.
    let g = Geodesic::wgs84();
    let (lat_b, lon_b): (f64, f64) = g.direct(40.0, -75.0, 0.0, 3000.0);
    let (lat_c, lon_c): (f64, f64) = g.direct(40.0, -75.0, 90.0, 4000.0);
    let affs = vec![
        AffiliationRecord {
            id: AffiliationId::new("A").unwrap(),
            location: GeoPoint::new(40.0, -75.0).unwrap(),
            country: None,
        },
        AffiliationRecord {
            id: AffiliationId::new("B").unwrap(),
            location: GeoPoint::new(lat_b, lon_b).unwrap(),
            country: None,
        },
        AffiliationRecord {
            id: AffiliationId::new("C").unwrap(),
            location: GeoPoint::new(lat_c, lon_c).unwrap(),
            country: None,
        },
    ];
    let team = PublicationTeam::new("tri", 2000, affs).unwrap();
    let d = team_distances(&team, &DistanceMode::default()).unwrap();
    let g = d.indicators.unwrap();
    assert!((g.min_km - 3.0).abs() < 1e-6, "{}", g.min_km);
    assert!((g.max_km - 5.0).abs() < 1e-3, "{}", g.max_km);
    assert!((g.ave_km - 4.0).abs() < 1e-3, "{}", g.ave_km);
    let kms: Vec<f64> = d.pair_distances.iter().map(|p| p.km).collect();
    assert!((g.ave_km - kms.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    assert_eq!(d.scope, None);
}

#[test]
fn harvard_mit_indicators() {
    let affs = vec![
        AffiliationRecord {
            id: AffiliationId::new("Harvard University").unwrap(),
            location: GeoPoint::new(42.3770, -71.1167).unwrap(),
            country: Some("US".parse().unwrap()),
        },
        AffiliationRecord {
            id: AffiliationId::new("Massachusetts Institute of Technology").unwrap(),
            location: GeoPoint::new(42.3601, -71.0942).unwrap(),
            country: Some("US".parse().unwrap()),
        },
    ];
    let team = PublicationTeam::new("hm", 1990, affs).unwrap();
    let g = team_distances(&team, &DistanceMode::default()).unwrap().indicators.unwrap();
    for v in [g.ave_km, g.max_km, g.min_km] {
        assert!((v - 2.61).abs() / 2.61 < 0.05, "{v}");
    }
}
