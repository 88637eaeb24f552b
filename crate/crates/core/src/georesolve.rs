//! Country lookup from coordinates.
//!
//! Boundaries come from a GeoJSON feature collection of Polygon/MultiPolygon
//! features carrying an ISO 3166-1 alpha-2 code property. Rings that cross the
//! antimeridian, or wind around a pole, are unwrapped and clipped into the
//! `[-180, 180]` longitude strip at load time so that containment can be
//! tested with a planar even-odd ray cast.
//!
//! A point inside (or on the edge of) some polygon resolves to that polygon's
//! country; if several qualify the lowest code wins. Otherwise the nearest
//! country boundary within the snap radius is used, again with the lowest
//! code on ties.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use serde_json::Value;
use thiserror::Error;

use crate::corpus::CountryCode;
use crate::geodesy::{geodesic_distance, Ellipsoid, GeoPoint};

pub const DEFAULT_SNAP_RADIUS_KM: f64 = 25.0;

/// Property names searched, in order, for a feature's country code.
pub const DEFAULT_CODE_PROPERTIES: &[&str] = &[
    "ISO_A2_EH",
    "ISO_A2",
    "iso_a2",
    "ISO3166-1-Alpha-2",
    "country_code",
    "code",
];

#[derive(Debug, Error)]
pub enum GeoResolveError {
    #[error("cannot read boundary file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("boundary file is not valid JSON: {0}")]
    Json(String),
    #[error("boundary file is not a FeatureCollection")]
    NotFeatureCollection,
    #[error("feature {feature}: malformed geometry: {reason}")]
    MalformedGeometry { feature: usize, reason: String },
    #[error("feature {feature}: no country code property")]
    MissingCountryCode { feature: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    fn of(rings: &[Vec<[f64; 2]>]) -> Self {
        let mut b = BoundingBox {
            min_lon: f64::INFINITY,
            min_lat: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            max_lat: f64::NEG_INFINITY,
        };
        for &[lon, lat] in rings.iter().flatten() {
            b.min_lon = b.min_lon.min(lon);
            b.max_lon = b.max_lon.max(lon);
            b.min_lat = b.min_lat.min(lat);
            b.max_lat = b.max_lat.max(lat);
        }
        b
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        (self.min_lon..=self.max_lon).contains(&lon) && (self.min_lat..=self.max_lat).contains(&lat)
    }
}

/// One polygon: an outer ring plus holes, evaluated with the even-odd rule.
/// Vertices are `[lon, lat]` in degrees; every ring is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<[f64; 2]>>,
    bbox: BoundingBox,
}

impl Polygon {
    pub fn rings(&self) -> &[Vec<[f64; 2]>] {
        &self.rings
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        if !self.bbox.contains(lon, lat) {
            return false;
        }
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let [x1, y1] = w[0];
                let [x2, y2] = w[1];
                if on_segment(lon, lat, x1, y1, x2, y2) {
                    return true;
                }
                if (y1 > lat) != (y2 > lat) {
                    let x = x1 + (lat - y1) * (x2 - x1) / (y2 - y1);
                    if lon < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.rings
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }
}

fn on_segment(px: f64, py: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> bool {
    const EPS: f64 = 1e-12;
    let cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
    if cross.abs() > EPS {
        return false;
    }
    px >= x1.min(x2) - EPS && px <= x1.max(x2) + EPS && py >= y1.min(y2) - EPS && py <= y1.max(y2) + EPS
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryBoundary {
    pub code: CountryCode,
    pub polygons: Vec<Polygon>,
}

/// Immutable set of country polygons, ordered by country code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountryBoundarySet {
    countries: Vec<CountryBoundary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Contained(CountryCode),
    Snapped { code: CountryCode, distance_km: f64 },
    Unresolved,
}

impl Resolution {
    pub fn code(&self) -> Option<CountryCode> {
        match *self {
            Resolution::Contained(c) | Resolution::Snapped { code: c, .. } => Some(c),
            Resolution::Unresolved => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub features: usize,
    pub countries: usize,
    /// Features whose code property held something other than an alpha-2 code.
    pub skipped: usize,
}

impl CountryBoundarySet {
    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn countries(&self) -> &[CountryBoundary] {
        &self.countries
    }

    pub fn resolve(&self, p: GeoPoint, snap_radius_km: f64) -> Resolution {
        let (lon, lat) = (p.lon(), p.lat());
        // Countries are sorted, so the first hit has the lowest code.
        for c in &self.countries {
            if c.polygons.iter().any(|poly| poly.contains(lon, lat)) {
                return Resolution::Contained(c.code);
            }
        }
        if !(snap_radius_km > 0.0) {
            return Resolution::Unresolved;
        }
        let mut best: Option<(f64, CountryCode)> = None;
        for c in &self.countries {
            for poly in &c.polygons {
                if !near_bbox(&poly.bbox, lon, lat, snap_radius_km) {
                    continue;
                }
                let d = distance_to_boundary_km(p, poly);
                if d <= snap_radius_km && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, c.code));
                }
            }
        }
        match best {
            Some((distance_km, code)) => Resolution::Snapped { code, distance_km },
            None => Resolution::Unresolved,
        }
    }
}

/// Country for `p`, or `None` when unresolved.
pub fn resolve_country(p: GeoPoint, boundaries: &CountryBoundarySet, snap_radius_km: f64) -> Option<CountryCode> {
    boundaries.resolve(p, snap_radius_km).code()
}

/// Conservative prefilter: false only if no point of the box can lie within
/// `radius_km` of (lon, lat).
fn near_bbox(b: &BoundingBox, lon: f64, lat: f64, radius_km: f64) -> bool {
    // Smallest radius of curvature on WGS-84 is above 6335 km.
    let delta = (radius_km / 6335.0).to_degrees() * 1.01;
    if lat + delta < b.min_lat || lat - delta > b.max_lat {
        return false;
    }
    let max_abs_lat = lat.abs() + delta;
    if max_abs_lat >= 89.9 {
        return true;
    }
    let dlon = (delta.to_radians().sin() / max_abs_lat.to_radians().cos())
        .min(1.0)
        .asin()
        .to_degrees()
        * 1.01;
    [lon, lon - 360.0, lon + 360.0]
        .iter()
        .any(|&l| l + dlon >= b.min_lon && l - dlon <= b.max_lon)
}

fn distance_to_boundary_km(p: GeoPoint, poly: &Polygon) -> f64 {
    let e = Ellipsoid::WGS84;
    let coslat = p.lat().to_radians().cos().max(1e-6);
    let mut best = f64::INFINITY;
    for (a, b) in poly.segments() {
        // Closest point in a local equirectangular frame, then measured exactly.
        let shift = |x: f64| {
            let d = x - p.lon();
            if d > 180.0 {
                x - 360.0
            } else if d < -180.0 {
                x + 360.0
            } else {
                x
            }
        };
        let (ax, ay) = ((shift(a[0]) - p.lon()) * coslat, a[1] - p.lat());
        let (bx, by) = ((shift(b[0]) - p.lon()) * coslat, b[1] - p.lat());
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0)
        };
        let lon = a[0] + t * (shift(b[0]) - shift(a[0]));
        let lat = a[1] + t * (b[1] - a[1]);
        if let Ok(q) = GeoPoint::new(lat.clamp(-90.0, 90.0), lon) {
            best = best.min(geodesic_distance(p, q, &e));
        }
    }
    best
}

pub fn load_boundaries(path: impl AsRef<Path>) -> Result<CountryBoundarySet, GeoResolveError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GeoResolveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (set, summary) = parse_boundaries(&text, DEFAULT_CODE_PROPERTIES)?;
    log::info!(
        "loaded {} countries from {} features ({} skipped) in {}",
        summary.countries,
        summary.features,
        summary.skipped,
        path.display()
    );
    Ok(set)
}

pub fn parse_boundaries(
    text: &str,
    code_properties: &[&str],
) -> Result<(CountryBoundarySet, LoadSummary), GeoResolveError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| GeoResolveError::Json(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(GeoResolveError::NotFeatureCollection);
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or(GeoResolveError::NotFeatureCollection)?;
    if features.is_empty() {
        warn!("boundary feature collection is empty; no country will resolve geometrically");
    }

    let mut by_code: BTreeMap<CountryCode, Vec<Polygon>> = BTreeMap::new();
    let mut summary = LoadSummary {
        features: features.len(),
        ..LoadSummary::default()
    };
    for (index, feature) in features.iter().enumerate() {
        let code = match feature_code(feature, code_properties) {
            CodeLookup::Found(c) => c,
            CodeLookup::Invalid => {
                summary.skipped += 1;
                continue;
            }
            CodeLookup::Missing => return Err(GeoResolveError::MissingCountryCode { feature: index }),
        };
        let polygons = feature_polygons(feature).map_err(|reason| GeoResolveError::MalformedGeometry {
            feature: index,
            reason,
        })?;
        by_code.entry(code).or_default().extend(polygons);
    }
    let countries: Vec<CountryBoundary> = by_code
        .into_iter()
        .map(|(code, polygons)| CountryBoundary { code, polygons })
        .collect();
    summary.countries = countries.len();
    Ok((CountryBoundarySet { countries }, summary))
}

enum CodeLookup {
    Found(CountryCode),
    Invalid,
    Missing,
}

fn feature_code(feature: &Value, keys: &[&str]) -> CodeLookup {
    let Some(props) = feature.get("properties").and_then(Value::as_object) else {
        return CodeLookup::Missing;
    };
    let mut any = false;
    for key in keys {
        if let Some(v) = props.get(*key).and_then(Value::as_str) {
            any = true;
            let b = v.as_bytes();
            if b.len() == 2 && b.iter().all(u8::is_ascii_uppercase) {
                if let Ok(c) = v.parse() {
                    return CodeLookup::Found(c);
                }
            }
        }
    }
    if any {
        CodeLookup::Invalid
    } else {
        CodeLookup::Missing
    }
}

fn feature_polygons(feature: &Value) -> Result<Vec<Polygon>, String> {
    let geom = feature
        .get("geometry")
        .filter(|g| !g.is_null())
        .ok_or("missing geometry")?;
    let coords = geom.get("coordinates").ok_or("missing coordinates")?;
    let polys: Vec<&Value> = match geom.get("type").and_then(Value::as_str) {
        Some("Polygon") => vec![coords],
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or("MultiPolygon coordinates must be an array")?
            .iter()
            .collect(),
        Some(other) => return Err(format!("unsupported geometry type {other}")),
        None => return Err("geometry without type".into()),
    };
    let mut out = Vec::new();
    for poly in polys {
        let rings = poly.as_array().ok_or("polygon must be an array of rings")?;
        if rings.is_empty() {
            return Err("polygon without rings".into());
        }
        let rings: Vec<Vec<[f64; 2]>> = rings.iter().map(parse_ring).collect::<Result<_, _>>()?;
        out.extend(split_polygon(&rings));
    }
    Ok(out)
}

fn parse_ring(ring: &Value) -> Result<Vec<[f64; 2]>, String> {
    let positions = ring.as_array().ok_or("ring must be an array")?;
    let mut out = Vec::with_capacity(positions.len());
    for pos in positions {
        let pair = pos.as_array().ok_or("position must be an array")?;
        let lon = pair.first().and_then(Value::as_f64).ok_or("position lacks longitude")?;
        let lat = pair.get(1).and_then(Value::as_f64).ok_or("position lacks latitude")?;
        if !lon.is_finite() || !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(format!("invalid position [{lon}, {lat}]"));
        }
        out.push([lon, lat]);
    }
    if out.len() < 4 {
        return Err(format!("ring has {} positions, need at least 4", out.len()));
    }
    if out.first() != out.last() {
        return Err("ring is not closed".into());
    }
    Ok(out)
}

/// Unwraps each ring's longitudes, closes pole-encircling rings through the
/// pole, and clips everything into 360-degree windows shifted back into
/// `[-180, 180]`.
fn split_polygon(rings: &[Vec<[f64; 2]>]) -> Vec<Polygon> {
    let unwrapped: Vec<Vec<[f64; 2]>> = rings.iter().map(|r| unwrap_ring(r)).collect();
    let (lo, hi) = unwrapped
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
    if lo >= -180.0 && hi <= 180.0 {
        return vec![make_polygon(unwrapped)];
    }
    let k_min = ((lo + 180.0) / 360.0).floor() as i64;
    let k_max = ((hi - 180.0) / 360.0).ceil() as i64;
    let mut out = Vec::new();
    for k in k_min..=k_max {
        let offset = 360.0 * k as f64;
        let clipped: Vec<Vec<[f64; 2]>> = unwrapped
            .iter()
            .filter_map(|r| {
                let r = clip_strip(r, -180.0 + offset, 180.0 + offset);
                let r: Vec<[f64; 2]> = r.into_iter().map(|[x, y]| [x - offset, y]).collect();
                close_ring(r)
            })
            .collect();
        if !clipped.is_empty() {
            out.push(make_polygon(clipped));
        }
    }
    out
}

fn make_polygon(rings: Vec<Vec<[f64; 2]>>) -> Polygon {
    let bbox = BoundingBox::of(&rings);
    Polygon { rings, bbox }
}

fn unwrap_ring(ring: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(ring.len() + 3);
    out.push(ring[0]);
    for w in ring.windows(2) {
        let prev = out.last().expect("non-empty")[0];
        let mut d = w[1][0] - w[0][0];
        if d > 180.0 {
            d -= 360.0;
        } else if d < -180.0 {
            d += 360.0;
        }
        out.push([prev + d, w[1][1]]);
    }
    let first = out[0];
    let last = *out.last().expect("non-empty");
    if (last[0] - first[0]).abs() > 1e-9 {
        // Encircles a pole; close the ring along the pole.
        let mean_lat = ring.iter().map(|p| p[1]).sum::<f64>() / ring.len() as f64;
        let pole = if mean_lat < 0.0 { -90.0 } else { 90.0 };
        out.push([last[0], pole]);
        out.push([first[0], pole]);
        out.push(first);
    }
    out
}

/// Sutherland–Hodgman clip of a closed ring to `lo <= lon <= hi`.
fn clip_strip(ring: &[[f64; 2]], lo: f64, hi: f64) -> Vec<[f64; 2]> {
    let open = &ring[..ring.len() - 1];
    let stage1 = clip_half(open, |p| p[0] >= lo, lo);
    clip_half(&stage1, |p| p[0] <= hi, hi)
}

fn clip_half(poly: &[[f64; 2]], inside: impl Fn(&[f64; 2]) -> bool, x: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 4);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let prev = poly[(i + n - 1) % n];
        let (cin, pin) = (inside(&cur), inside(&prev));
        if cin {
            if !pin {
                out.push(intersect_vertical(prev, cur, x));
            }
            out.push(cur);
        } else if pin {
            out.push(intersect_vertical(prev, cur, x));
        }
    }
    out
}

fn intersect_vertical(a: [f64; 2], b: [f64; 2], x: f64) -> [f64; 2] {
    let t = (x - a[0]) / (b[0] - a[0]);
    [x, a[1] + t * (b[1] - a[1])]
}

fn close_ring(mut r: Vec<[f64; 2]>) -> Option<Vec<[f64; 2]>> {
    if r.len() < 3 {
        return None;
    }
    if r.first() != r.last() {
        r.push(r[0]);
    }
    (r.len() >= 4).then_some(r)
}
