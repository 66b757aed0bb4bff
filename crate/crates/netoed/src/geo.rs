//! Geographic domain, distances, polygon constraints, and quasi-Monte Carlo
//! event sampling.
//!
//! # Units
//!
//! Latitudes and longitudes are degrees (north/east positive), depths are
//! kilometres, and angular distances are degrees of arc. The detection model
//! consumes distances in degrees; the signal-to-noise and correlation models
//! consume kilometres. The two are linked by the fixed conversion
//! [`KM_PER_DEGREE`] = 111.19 km/°; the Earth is treated as spherical, which
//! is accurate to far below the travel-time uncertainties at regional scale.
//!
//! # Sampling
//!
//! [`sobol_events`] lays a 4-dimensional Owen-scrambled Sobol sequence over
//! the design domain `(lat, lon, depth, mag)`. The all-zeros first point of
//! the raw sequence is skipped and scrambling is keyed by the seed, so runs
//! are reproducible yet free of the degenerate corner sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::Event;

/// Fixed spherical conversion between degrees of arc and kilometres.
pub const KM_PER_DEGREE: f64 = 111.19;

/// The Sobol sampler is a 2^16-point sequence; one index is reserved for the
/// skipped all-zeros sample.
pub const MAX_SOBOL_POINTS: usize = (1 << 16) - 1;

// ---------------------------------------------------------------------------
// Points and distances
// ---------------------------------------------------------------------------

/// A point on the sphere: latitude and longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// Degrees north, in [-90, 90].
    pub lat: f64,
    /// Degrees east, in [-180, 180].
    pub lon: f64,
}

impl GeoPoint {
    /// Creates a point, validating finiteness and coordinate bounds.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidInput(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidInput(format!(
                "longitude {lon} outside [-180, 180]"
            )));
        }
        Ok(Self { lat, lon })
    }
}

/// Great-circle central angle between two points, in degrees of arc.
///
/// Computed with the haversine formula, which is well conditioned for the
/// small separations typical of a regional monitoring network. Symmetric,
/// non-negative, and zero exactly when the points coincide.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlam = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlam / 2.0).sin().powi(2);
    let central = 2.0 * h.sqrt().min(1.0).asin();
    central.to_degrees()
}

/// Converts degrees of arc to kilometres at the fixed spherical rate.
pub fn degrees_to_km(d: f64) -> f64 {
    d * KM_PER_DEGREE
}

// ---------------------------------------------------------------------------
// Design domain
// ---------------------------------------------------------------------------

/// Axis-aligned design domain over `(lat, lon, depth, mag)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    /// Southern edge, degrees north.
    pub lat_min: f64,
    /// Northern edge, degrees north.
    pub lat_max: f64,
    /// Western edge, degrees east.
    pub lon_min: f64,
    /// Eastern edge, degrees east.
    pub lon_max: f64,
    /// Shallowest source depth, km (≥ 0).
    pub depth_min: f64,
    /// Deepest source depth, km.
    pub depth_max: f64,
    /// Smallest magnitude on the sampling axis.
    pub mag_min: f64,
    /// Largest magnitude on the sampling axis.
    pub mag_max: f64,
}

impl Domain {
    /// Checks the min < max ordering on every axis and depth_min ≥ 0.
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("lat", self.lat_min, self.lat_max),
            ("lon", self.lon_min, self.lon_max),
            ("depth", self.depth_min, self.depth_max),
            ("mag", self.mag_min, self.mag_max),
        ];
        for (name, lo, hi) in axes {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidInput(format!(
                    "domain {name} range [{lo}, {hi}] is not an ordered finite interval"
                )));
            }
        }
        if self.depth_min < 0.0 {
            return Err(Error::InvalidInput(format!(
                "domain depth_min {} must be non-negative",
                self.depth_min
            )));
        }
        GeoPoint::new(self.lat_min, self.lon_min)?;
        GeoPoint::new(self.lat_max, self.lon_max)?;
        Ok(())
    }

    /// True when the event lies inside the closed domain box.
    pub fn contains(&self, e: &Event) -> bool {
        (self.lat_min..=self.lat_max).contains(&e.loc.lat)
            && (self.lon_min..=self.lon_max).contains(&e.loc.lon)
            && (self.depth_min..=self.depth_max).contains(&e.depth_km)
            && (self.mag_min..=self.mag_max).contains(&e.mag)
    }

    /// Horizontal area of the domain box in square degrees.
    pub fn area_deg2(&self) -> f64 {
        (self.lat_max - self.lat_min) * (self.lon_max - self.lon_min)
    }

    /// Largest possible epicentral distance inside the box, in km.
    pub fn diagonal_km(&self) -> f64 {
        degrees_to_km(great_circle_distance(
            GeoPoint {
                lat: self.lat_min,
                lon: self.lon_min,
            },
            GeoPoint {
                lat: self.lat_max,
                lon: self.lon_max,
            },
        ))
    }
}

/// Maps a unit-cube coordinate to an event by the affine stretch of each
/// domain axis: `(u0, u1, u2, u3) → (lat, lon, depth, mag)`.
pub fn map_unit_to_domain(u: [f64; 4], domain: &Domain) -> Event {
    Event {
        loc: GeoPoint {
            lat: domain.lat_min + u[0] * (domain.lat_max - domain.lat_min),
            lon: domain.lon_min + u[1] * (domain.lon_max - domain.lon_min),
        },
        depth_km: domain.depth_min + u[2] * (domain.depth_max - domain.depth_min),
        mag: domain.mag_min + u[3] * (domain.mag_max - domain.mag_min),
    }
}

// ---------------------------------------------------------------------------
// Quasi-Monte Carlo sampling
// ---------------------------------------------------------------------------

/// Unit-cube points of the Owen-scrambled Sobol sequence.
///
/// Point `i` of the output is sequence index `i + 1`: the raw sequence's
/// all-zeros first point is skipped, and scrambling is keyed by `seed`.
pub(crate) fn sobol_unit<const D: usize>(n: usize, seed: u64) -> Result<Vec<[f64; D]>> {
    if n == 0 {
        return Err(Error::EmptySet("quasi-Monte Carlo sample of size zero"));
    }
    if n > MAX_SOBOL_POINTS {
        return Err(Error::InvalidInput(format!(
            "requested {n} Sobol points; the sequence supports at most {MAX_SOBOL_POINTS}"
        )));
    }
    let key = crate::rng::fold_seed(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut point = [0.0; D];
        for (dim, coord) in point.iter_mut().enumerate() {
            *coord = f64::from(sobol_burley::sample((i + 1) as u32, dim as u32, key));
        }
        out.push(point);
    }
    Ok(out)
}

/// Draws `n` quasi-Monte Carlo events covering the domain.
///
/// The four unit axes map affinely onto `(lat, lon, depth, mag)`; every
/// returned event satisfies the domain bounds, and the list is a pure
/// function of `(n, domain, seed)`. Prior-aware sampling that maps the
/// magnitude axis through a quantile function instead lives in
/// [`crate::priors::qmc_event_set`].
pub fn sobol_events(n: usize, domain: &Domain, seed: u64) -> Result<Vec<Event>> {
    domain.validate()?;
    let unit = sobol_unit::<4>(n, seed)?;
    Ok(unit
        .into_iter()
        .map(|u| map_unit_to_domain(u, domain))
        .collect())
}

// ---------------------------------------------------------------------------
// Polygon regions
// ---------------------------------------------------------------------------

/// A polygonal placement constraint: one outer ring plus optional holes,
/// each a closed loop of vertices in the (lon, lat) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRegion {
    rings: Vec<Vec<GeoPoint>>,
}

/// Tolerance for the boundary-inclusive point-on-edge test, expressed as a
/// cross-product bound scaled by the edge length (≈ degrees off the line).
const EDGE_EPS: f64 = 1e-9;

impl PolygonRegion {
    /// Builds a region from vertex loops, normalizing closure.
    ///
    /// Each ring must have at least three distinct vertices and nonzero
    /// area; a ring whose last vertex repeats its first is accepted and
    /// stored in closed form (first vertex == last vertex).
    pub fn new(rings: Vec<Vec<GeoPoint>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::InvalidRegion("polygon has no rings".into()));
        }
        let mut closed = Vec::with_capacity(rings.len());
        for (ri, mut ring) in rings.into_iter().enumerate() {
            if ring.first() == ring.last() {
                ring.pop();
            }
            let mut distinct = ring.clone();
            distinct.dedup_by(|a, b| a == b);
            if distinct.len() < 3 {
                return Err(Error::InvalidRegion(format!(
                    "ring {ri} has fewer than 3 distinct vertices"
                )));
            }
            if shoelace_area(&ring).abs() < 1e-15 {
                return Err(Error::InvalidRegion(format!(
                    "ring {ri} is degenerate (zero area; vertices collinear)"
                )));
            }
            ring.push(ring[0]);
            closed.push(ring);
        }
        Ok(Self { rings: closed })
    }

    /// Builds a region from GeoJSON-style rings of `[lon, lat]` pairs.
    pub fn from_lon_lat_rings(rings: &[Vec<[f64; 2]>]) -> Result<Self> {
        let converted = rings
            .iter()
            .map(|ring| {
                ring.iter()
                    .map(|&[lon, lat]| GeoPoint::new(lat, lon))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(converted)
    }

    /// The closed vertex loops (first vertex == last vertex).
    pub fn rings(&self) -> &[Vec<GeoPoint>] {
        &self.rings
    }

    /// Even-odd containment test in the (lon, lat) plane.
    ///
    /// Points on any ring boundary count as inside, so an optimizer may sit
    /// a sensor exactly on an edge.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for edge in ring.windows(2) {
                let (a, b) = (edge[0], edge[1]);
                if on_segment(p, a, b) {
                    return true;
                }
                // Half-open vertical rule: each vertex is counted by exactly
                // one of its two incident edges.
                if (a.lat > p.lat) != (b.lat > p.lat) {
                    let t = (p.lat - a.lat) / (b.lat - a.lat);
                    let lon_cross = a.lon + t * (b.lon - a.lon);
                    if lon_cross > p.lon {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Shortest planar distance (degrees) from `p` to any ring edge.
    pub fn boundary_distance_deg(&self, p: GeoPoint) -> f64 {
        let mut best = f64::INFINITY;
        for ring in &self.rings {
            for edge in ring.windows(2) {
                best = best.min(point_segment_distance(p, edge[0], edge[1]));
            }
        }
        best
    }

    /// Axis-aligned bounding box as `(lat_min, lat_max, lon_min, lon_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut lat_min = f64::INFINITY;
        let mut lat_max = f64::NEG_INFINITY;
        let mut lon_min = f64::INFINITY;
        let mut lon_max = f64::NEG_INFINITY;
        for ring in &self.rings {
            for v in ring {
                lat_min = lat_min.min(v.lat);
                lat_max = lat_max.max(v.lat);
                lon_min = lon_min.min(v.lon);
                lon_max = lon_max.max(v.lon);
            }
        }
        (lat_min, lat_max, lon_min, lon_max)
    }
}

/// Twice the signed area of a ring in the (lon, lat) plane.
fn shoelace_area(ring: &[GeoPoint]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.lon * b.lat - b.lon * a.lat;
    }
    acc
}

/// True when `p` lies on the segment `a`-`b` to within [`EDGE_EPS`].
fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let cross = dx * (p.lat - a.lat) - dy * (p.lon - a.lon);
    let scale = dx.abs() + dy.abs();
    if cross.abs() > EDGE_EPS * scale.max(1.0) {
        return false;
    }
    let dot = (p.lon - a.lon) * dx + (p.lat - a.lat) * dy;
    dot >= -EDGE_EPS && dot <= dx * dx + dy * dy + EDGE_EPS
}

/// Planar distance (degrees) from a point to a segment in (lon, lat).
fn point_segment_distance(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.lon + t * dx, a.lat + t * dy);
    ((p.lon - cx).powi(2) + (p.lat - cy).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Placement regions
// ---------------------------------------------------------------------------

/// Feasible region for new sensors: the domain's horizontal box, or an
/// explicit polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlacementRegion {
    /// The rectangle `[lat_min, lat_max] × [lon_min, lon_max]`.
    Box {
        /// Southern edge, degrees north.
        lat_min: f64,
        /// Northern edge, degrees north.
        lat_max: f64,
        /// Western edge, degrees east.
        lon_min: f64,
        /// Eastern edge, degrees east.
        lon_max: f64,
    },
    /// An arbitrary polygon with optional holes.
    Polygon(PolygonRegion),
}

impl PlacementRegion {
    /// The domain's horizontal extent as a box region.
    pub fn from_domain(d: &Domain) -> Self {
        PlacementRegion::Box {
            lat_min: d.lat_min,
            lat_max: d.lat_max,
            lon_min: d.lon_min,
            lon_max: d.lon_max,
        }
    }

    /// Boundary-inclusive containment test.
    pub fn contains(&self, p: GeoPoint) -> bool {
        match self {
            PlacementRegion::Box {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            } => {
                (*lat_min..=*lat_max).contains(&p.lat) && (*lon_min..=*lon_max).contains(&p.lon)
            }
            PlacementRegion::Polygon(poly) => poly.contains(p),
        }
    }

    /// Axis-aligned bounding box as `(lat_min, lat_max, lon_min, lon_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self {
            PlacementRegion::Box {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            } => (*lat_min, *lat_max, *lon_min, *lon_max),
            PlacementRegion::Polygon(poly) => poly.bounding_box(),
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
