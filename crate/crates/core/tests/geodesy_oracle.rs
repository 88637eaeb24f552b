//! Cross-checks the geodesic solver against GeographicLib's implementation.

use collabgeo::geodesy::{
    geodesic_distance, great_circle_distance, Ellipsoid, GeoPoint, MEAN_EARTH_RADIUS_KM,
};
use geographiclib_rs::{Geodesic, InverseGeodesic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let g = Geodesic::wgs84();
    let s12: f64 = g.inverse(a.lat(), a.lon(), b.lat(), b.lon());
    s12 / 1000.0
}

fn random_point(rng: &mut impl Rng) -> GeoPoint {
    let z: f64 = rng.random_range(-1.0..=1.0);
    GeoPoint::new(z.asin().to_degrees(), rng.random_range(-180.0..180.0)).unwrap()
}

#[test]
fn matches_reference_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let e = Ellipsoid::WGS84;
    let mut worst = 0.0f64;
    for _ in 0..20_000 {
        let a = random_point(&mut rng);
        let b = random_point(&mut rng);
        let err = (geodesic_distance(a, b, &e) - reference_km(a, b)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-6, "worst error {worst} km");
}

#[test]
fn matches_reference_near_antipodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e = Ellipsoid::WGS84;
    let mut worst = 0.0f64;
    for _ in 0..5_000 {
        let lat1: f64 = rng.random_range(-89.0..89.0);
        let lon1: f64 = rng.random_range(-180.0..180.0);
        let lat2 = -lat1 + rng.random_range(-1.0..1.0);
        let lon2 = lon1 + 180.0 + rng.random_range(-1.0..1.0);
        let a = GeoPoint::new(lat1, lon1).unwrap();
        let b = GeoPoint::new(lat2.clamp(-90.0, 90.0), lon2).unwrap();
        let d = geodesic_distance(a, b, &e);
        assert!(d.is_finite());
        let err = (d - reference_km(a, b)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-6, "worst error {worst} km");
}

#[test]
fn equatorial_and_near_equatorial_antipodes() {
    let e = Ellipsoid::WGS84;
    for &(lat1, lat2, dlon) in &[
        (0.0, 0.0, 179.9),
        (0.0, 0.0, 179.5),
        (0.0, 0.0, 179.0),
        (0.0, 0.1, 179.8),
        (0.01, -0.01, 179.99),
        (0.0, 0.5, 179.7),
        (1e-7, -1e-7, 180.0),
        (45.0, -45.0, 179.999),
        (0.0, 0.0, 179.392),
        (0.0, 0.0, 179.394),
        (0.0, 0.0, 179.3965),
        (0.0, 0.0, 179.398),
    ] {
        let a = GeoPoint::new(lat1, 0.0).unwrap();
        let b = GeoPoint::new(lat2, dlon).unwrap();
        let d = geodesic_distance(a, b, &e);
        let r = reference_km(a, b);
        assert!((d - r).abs() < 1e-3, "{a} {b}: {d} vs {r}");
    }
}

#[test]
fn meridian_quadrant_matches_reference() {
    let a = GeoPoint::new(0.0, 0.0).unwrap();
    let b = GeoPoint::new(90.0, 0.0).unwrap();
    let r = reference_km(a, b);
    assert!((r - 10_001.965_729).abs() < 1e-6);
    assert!((geodesic_distance(a, b, &Ellipsoid::WGS84) - r).abs() < 1e-3);
}

#[test]
fn symmetric_identity_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = Ellipsoid::WGS84;
    for _ in 0..10_000 {
        let a = random_point(&mut rng);
        let b = random_point(&mut rng);
        let ab = geodesic_distance(a, b, &e);
        let ba = geodesic_distance(b, a, &e);
        assert!((ab - ba).abs() < 1e-9);
        assert!((0.0..20_038.0).contains(&ab));
        assert_eq!(geodesic_distance(a, a, &e), 0.0);
    }
}

#[test]
fn equatorial_arcs_are_exact_multiples_of_the_axis() {
    // Along the equator the geodesic is the equator itself while the
    // longitude difference stays below (1 - f) * 180 degrees; beyond that a
    // route near the poles is shorter.
    let e = Ellipsoid::WGS84;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let limit = (1.0 - e.flattening()) * 180.0;
    for _ in 0..2_000 {
        let l1: f64 = rng.random_range(-180.0..180.0);
        let dl: f64 = rng.random_range(0.0..limit);
        let a = GeoPoint::new(0.0, l1).unwrap();
        let b = GeoPoint::new(0.0, l1 + dl).unwrap();
        let expected = e.semi_major_axis_km() * dl.to_radians();
        let d = geodesic_distance(a, b, &e);
        assert!((d - expected).abs() < 1e-6, "dl={dl}: {d} vs {expected}");
    }
}

#[test]
fn sphere_and_ellipsoid_agree_within_point_six_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let e = Ellipsoid::WGS84;
    for _ in 0..10_000 {
        let a = random_point(&mut rng);
        let b = random_point(&mut rng);
        let g = geodesic_distance(a, b, &e);
        let s = great_circle_distance(a, b, MEAN_EARTH_RADIUS_KM).unwrap();
        if g > 0.0 {
            assert!((g - s).abs() / g < 0.006, "{a} {b}: {g} vs {s}");
        }
    }
}

#[test]
fn matches_reference_at_every_antipodal_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let e = Ellipsoid::WGS84;
    let mut worst = (0.0f64, String::new());
    for i in 0..20_000 {
        let lat1: f64 = if i % 5 == 0 { 0.0 } else { rng.random_range(-89.0..89.0) };
        let dlat = if i % 3 == 0 {
            0.0
        } else {
            10f64.powf(rng.random_range(-8.0..0.0)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        };
        let dlon = 10f64.powf(rng.random_range(-8.0..0.5));
        let a = GeoPoint::new(lat1, 0.0).unwrap();
        let b = GeoPoint::new((-lat1 + dlat).clamp(-90.0, 90.0), 180.0 - dlon).unwrap();
        let d = geodesic_distance(a, b, &e);
        let err = (d - reference_km(a, b)).abs();
        if err > worst.0 {
            worst = (err, format!("{a} {b}"));
        }
    }
    assert!(worst.0 < 1e-3, "worst error {} km at {}", worst.0, worst.1);
}
