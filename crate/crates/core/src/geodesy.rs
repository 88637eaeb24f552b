//! Distances between points on the Earth's surface.
//!
//! The primary measure is the geodesic (shortest surface path) on a reference
//! ellipsoid, WGS-84 by default, computed with Vincenty's inverse formulae.
//! Vincenty's fixed-point iteration does not converge for some nearly antipodal
//! pairs, so those pairs are solved by bracketing every root of the same
//! longitude equation and keeping the shortest resulting geodesic. The solver
//! therefore always terminates with a finite answer.
//!
//! A spherical great-circle distance is provided as an explicit approximation.
//!
//! All lengths are in kilometers.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Mean Earth radius (IUGG R1) in kilometers.
pub const MEAN_EARTH_RADIUS_KM: f64 = 6371.0088;

/// Convergence tolerance on the auxiliary-sphere longitude iterate, in radians.
pub const LAMBDA_TOLERANCE: f64 = 1e-12;

/// Iteration cap for the fixed-point solver before switching to root bracketing.
pub const MAX_ITERATIONS: usize = 200;

/// Below this, sin(sigma) is rounding noise around an exact antipode.
const DEGENERATE_SIN_SIGMA: f64 = 1e-14;

/// Samples used to bracket roots in the near-antipodal regime.
const BRACKET_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A position given by geodetic latitude and longitude in degrees.
///
/// Longitudes are normalized into `(-180, 180]` on construction, so two points
/// describing the same place compare equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeodesyError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeodesyError::InvalidInput(format!(
                "non-finite coordinate ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeodesyError::InvalidInput(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        Ok(GeoPoint {
            lat,
            lon: normalize_longitude(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Maps any finite longitude into `(-180, 180]`.
pub fn normalize_longitude(lon: f64) -> f64 {
    if (-180.0..=180.0).contains(&lon) && lon != -180.0 {
        return lon;
    }
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped <= -180.0 {
        180.0
    } else {
        wrapped
    }
}

/// A rotational ellipsoid described by its semi-major axis and flattening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    semi_major_axis_km: f64,
    flattening: f64,
}

impl Ellipsoid {
    pub const WGS84: Ellipsoid = Ellipsoid {
        semi_major_axis_km: 6378.137,
        flattening: 1.0 / 298.257_223_563,
    };

    pub fn new(semi_major_axis_km: f64, flattening: f64) -> Result<Self, GeodesyError> {
        if !(semi_major_axis_km.is_finite() && semi_major_axis_km > 0.0) {
            return Err(GeodesyError::InvalidInput(format!(
                "semi-major axis must be positive, got {semi_major_axis_km}"
            )));
        }
        if !(flattening.is_finite() && (0.0..1.0).contains(&flattening)) {
            return Err(GeodesyError::InvalidInput(format!(
                "flattening must lie in [0, 1), got {flattening}"
            )));
        }
        Ok(Ellipsoid {
            semi_major_axis_km,
            flattening,
        })
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        self.semi_major_axis_km
    }

    pub fn flattening(&self) -> f64 {
        self.flattening
    }

    pub fn semi_minor_axis_km(&self) -> f64 {
        self.semi_major_axis_km * (1.0 - self.flattening)
    }
}

impl Default for Ellipsoid {
    fn default() -> Self {
        Ellipsoid::WGS84
    }
}

/// Geodesic distance in kilometers between `a` and `b` on ellipsoid `e`.
///
/// The computation is symmetric bit-for-bit: the two points are put in a
/// canonical order before solving.
pub fn geodesic_distance(a: GeoPoint, b: GeoPoint, e: &Ellipsoid) -> f64 {
    if a == b {
        return 0.0;
    }
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) {
        (a, b)
    } else {
        (b, a)
    };
    let problem = InverseProblem::new(p, q, e);
    problem.solve()
}

/// Great-circle distance in kilometers on a sphere of the given radius.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint, radius_km: f64) -> Result<f64, GeodesyError> {
    if !(radius_km.is_finite() && radius_km > 0.0) {
        return Err(GeodesyError::InvalidInput(format!(
            "radius must be positive, got {radius_km}"
        )));
    }
    Ok(radius_km * central_angle(a, b))
}

/// Central angle in radians between two points on the unit sphere (haversine form).
fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) {
        (a, b)
    } else {
        (b, a)
    };
    let phi1 = p.lat.to_radians();
    let phi2 = q.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = wrap_pi((q.lon - p.lon).to_radians());
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * h.sqrt().atan2((1.0 - h).max(0.0).sqrt())
}

fn wrap_pi(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y = PI;
    }
    y
}

/// How distances between affiliations are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMode {
    Geodesic(Ellipsoid),
    Spherical { radius_km: f64 },
}

impl DistanceMode {
    pub fn geodesic() -> Self {
        DistanceMode::Geodesic(Ellipsoid::WGS84)
    }

    pub fn spherical(radius_km: f64) -> Result<Self, GeodesyError> {
        if !(radius_km.is_finite() && radius_km > 0.0) {
            return Err(GeodesyError::InvalidInput(format!(
                "radius must be positive, got {radius_km}"
            )));
        }
        Ok(DistanceMode::Spherical { radius_km })
    }

    pub fn distance_km(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            DistanceMode::Geodesic(e) => geodesic_distance(a, b, e),
            DistanceMode::Spherical { radius_km } => radius_km * central_angle(a, b),
        }
    }
}

impl Default for DistanceMode {
    fn default() -> Self {
        DistanceMode::geodesic()
    }
}

/// State of one inverse problem on the auxiliary sphere.
struct InverseProblem {
    /// Longitude difference on the ellipsoid, folded into `[0, pi]`.
    lon_diff: f64,
    sin_u1: f64,
    cos_u1: f64,
    sin_u2: f64,
    cos_u2: f64,
    f: f64,
    b: f64,
    /// Second eccentricity squared, (a^2 - b^2) / b^2.
    ep2: f64,
}

/// Auxiliary-sphere quantities for a trial value of lambda.
struct Trial {
    sigma: f64,
    sin_sigma: f64,
    cos_sigma: f64,
    sin_alpha: f64,
    cos2_alpha: f64,
    cos_2sigma_m: f64,
}

impl InverseProblem {
    fn new(p: GeoPoint, q: GeoPoint, e: &Ellipsoid) -> Self {
        let f = e.flattening;
        let a = e.semi_major_axis_km;
        let b = e.semi_minor_axis_km();
        let (sin_u1, cos_u1) = reduced_latitude(p.lat.to_radians(), f);
        let (sin_u2, cos_u2) = reduced_latitude(q.lat.to_radians(), f);
        // The distance is unchanged by mirroring in longitude.
        let lon_diff = wrap_pi((q.lon - p.lon).to_radians()).abs();
        InverseProblem {
            lon_diff,
            sin_u1,
            cos_u1,
            sin_u2,
            cos_u2,
            f,
            b,
            ep2: (a * a - b * b) / (b * b),
        }
    }

    fn solve(&self) -> f64 {
        // Beyond this longitude difference lambda may reach pi and the
        // fixed-point map can stall or settle on a non-minimal geodesic.
        let antipodal_threshold = PI - 1.01 * PI * self.f;
        if self.lon_diff < antipodal_threshold {
            if let Some(d) = self.solve_fixed_point() {
                return d;
            }
        }
        self.solve_bracketed()
    }

    fn trial(&self, lambda: f64) -> Trial {
        let (sin_l, cos_l) = lambda.sin_cos();
        let t1 = self.cos_u2 * sin_l;
        let t2 = self.cos_u1 * self.sin_u2 - self.sin_u1 * self.cos_u2 * cos_l;
        let sin_sigma = (t1 * t1 + t2 * t2).sqrt();
        let cos_sigma = self.sin_u1 * self.sin_u2 + self.cos_u1 * self.cos_u2 * cos_l;
        let sigma = sin_sigma.atan2(cos_sigma);
        // sin_sigma vanishes only for coincident or exactly antipodal
        // auxiliary points; the meridional geodesic (alpha = 0) is the
        // shortest one there.
        let sin_alpha = if sin_sigma < DEGENERATE_SIN_SIGMA {
            0.0
        } else {
            (self.cos_u1 * self.cos_u2 * sin_l / sin_sigma).clamp(-1.0, 1.0)
        };
        let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
        let cos_2sigma_m = if cos2_alpha == 0.0 {
            // equatorial line
            0.0
        } else {
            cos_sigma - 2.0 * self.sin_u1 * self.sin_u2 / cos2_alpha
        };
        Trial {
            sigma,
            sin_sigma,
            cos_sigma,
            sin_alpha,
            cos2_alpha,
            cos_2sigma_m,
        }
    }

    /// The right-hand side of lambda = L + correction(lambda).
    fn correction(&self, t: &Trial) -> f64 {
        let f = self.f;
        let c = f / 16.0 * t.cos2_alpha * (4.0 + f * (4.0 - 3.0 * t.cos2_alpha));
        (1.0 - c)
            * f
            * t.sin_alpha
            * (t.sigma
                + c * t.sin_sigma
                    * (t.cos_2sigma_m + c * t.cos_sigma * (-1.0 + 2.0 * t.cos_2sigma_m * t.cos_2sigma_m)))
    }

    fn length(&self, t: &Trial) -> f64 {
        let u2 = t.cos2_alpha * self.ep2;
        let big_a = 1.0 + u2 / 16384.0 * (4096.0 + u2 * (-768.0 + u2 * (320.0 - 175.0 * u2)));
        let big_b = u2 / 1024.0 * (256.0 + u2 * (-128.0 + u2 * (74.0 - 47.0 * u2)));
        let c2m = t.cos_2sigma_m;
        let delta_sigma = big_b
            * t.sin_sigma
            * (c2m
                + big_b / 4.0
                    * (t.cos_sigma * (-1.0 + 2.0 * c2m * c2m)
                        - big_b / 6.0
                            * c2m
                            * (-3.0 + 4.0 * t.sin_sigma * t.sin_sigma)
                            * (-3.0 + 4.0 * c2m * c2m)));
        (self.b * big_a * (t.sigma - delta_sigma)).max(0.0)
    }

    fn solve_fixed_point(&self) -> Option<f64> {
        let mut lambda = self.lon_diff;
        for _ in 0..MAX_ITERATIONS {
            let t = self.trial(lambda);
            if t.sin_sigma < DEGENERATE_SIN_SIGMA {
                return None;
            }
            let next = self.lon_diff + self.correction(&t);
            if !next.is_finite() || next > PI {
                return None;
            }
            if (next - lambda).abs() <= LAMBDA_TOLERANCE {
                return Some(self.length(&self.trial(next)));
            }
            lambda = next;
        }
        None
    }

    /// Solves the inverse problem by shooting on the departure azimuth.
    ///
    /// The points are first arranged so the first has the larger absolute
    /// latitude and lies in the southern hemisphere. Then, for an azimuth
    /// `alpha1` in `[0, pi]`, the geodesic leaving the first point reaches the
    /// second point's latitude after a well-defined arc, and the ellipsoidal
    /// longitude gained there rises from 0 (due north) to pi (over the south
    /// pole). Every root of `longitude(alpha1) = L` is bracketed by sampling
    /// and bisection, and the shortest resulting geodesic is returned. At least
    /// one sign change always exists, so this terminates with a finite answer.
    fn solve_bracketed(&self) -> f64 {
        let (mut s1, c1, mut s2, c2) = if self.sin_u1.abs() >= self.sin_u2.abs() {
            (self.sin_u1, self.cos_u1, self.sin_u2, self.cos_u2)
        } else {
            (self.sin_u2, self.cos_u2, self.sin_u1, self.cos_u1)
        };
        if s1 > 0.0 {
            s1 = -s1;
            s2 = -s2;
        }
        let shoot = |alpha1: f64| self.shoot(alpha1, s1, c1, s2, c2);
        let g = |alpha1: f64| shoot(alpha1).0 - self.lon_diff;

        let mut best = f64::INFINITY;
        let mut consider = |alpha1: f64| {
            let (lon, t) = shoot(alpha1);
            if (lon - self.lon_diff).abs() < 1e-9 {
                best = best.min(self.length(&t));
            }
        };

        let step = PI / BRACKET_SAMPLES as f64;
        let mut x0 = 0.0;
        let mut g0 = g(x0);
        if g0 == 0.0 {
            consider(x0);
        }
        for i in 1..=BRACKET_SAMPLES {
            let x1 = if i == BRACKET_SAMPLES { PI } else { step * i as f64 };
            let g1 = g(x1);
            if g1 == 0.0 {
                consider(x1);
            } else if g0 != 0.0 && (g0 < 0.0) != (g1 < 0.0) {
                consider(bisect(&g, x0, g0, x1));
            }
            x0 = x1;
            g0 = g1;
        }
        // Both points on the equator: the equator itself is a geodesic while
        // its auxiliary longitude L / (1 - f) stays within pi.
        if s1 == 0.0 && s2 == 0.0 && self.lon_diff <= (1.0 - self.f) * PI {
            best = best.min(self.b / (1.0 - self.f) * self.lon_diff);
        }
        if best.is_finite() {
            best
        } else {
            // Unreachable in practice; the meridional route is always a geodesic.
            self.length(&shoot(PI).1)
        }
    }

    /// Follows the geodesic leaving (s1, c1) with azimuth `alpha1` to the
    /// latitude (s2, c2). Returns the ellipsoidal longitude gained and the arc.
    fn shoot(&self, alpha1: f64, s1: f64, c1: f64, s2: f64, c2: f64) -> (f64, Trial) {
        let (sin_a1, cos_a1) = alpha1.sin_cos();
        let sin_a0 = sin_a1 * c1;
        let cos_a0 = cos_a1.hypot(sin_a1 * s1);

        // cos(alpha2) * cos(beta2) at the crossing of the second latitude.
        let cos_a2_c2 = if c2 != c1 || s2.abs() != -s1 {
            let diff = if c1 < -s1 {
                (c2 - c1) * (c1 + c2)
            } else {
                (s1 - s2) * (s1 + s2)
            };
            ((cos_a1 * c1).powi(2) + diff).max(0.0).sqrt()
        } else {
            cos_a1.abs() * c1
        };

        let n1 = s1.hypot(cos_a1 * c1);
        let (ss1, cs1) = (s1 / n1, cos_a1 * c1 / n1);
        let (so1, co1) = (sin_a0 * s1 / n1, cs1);
        let n2 = s2.hypot(cos_a2_c2);
        let (ss2, cs2) = (s2 / n2, cos_a2_c2 / n2);
        let (so2, co2) = (sin_a0 * s2 / n2, cs2);

        let sin_sigma = (cs1 * ss2 - ss1 * cs2).max(0.0);
        let cos_sigma = cs1 * cs2 + ss1 * ss2;
        let omega = (co1 * so2 - so1 * co2).max(0.0).atan2(co1 * co2 + so1 * so2);
        let t = Trial {
            sigma: sin_sigma.atan2(cos_sigma),
            sin_sigma,
            cos_sigma,
            sin_alpha: sin_a0,
            cos2_alpha: cos_a0 * cos_a0,
            cos_2sigma_m: cs1 * cs2 - ss1 * ss2,
        };
        (omega - self.correction(&t), t)
    }
}

fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut ga: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Sine and cosine of the reduced latitude for geodetic latitude `phi`.
fn reduced_latitude(phi: f64, f: f64) -> (f64, f64) {
    let (sin_phi, cos_phi) = phi.sin_cos();
    let y = (1.0 - f) * sin_phi;
    let x = cos_phi;
    let r = y.hypot(x);
    (y / r, x / r)
}
