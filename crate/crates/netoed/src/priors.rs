//! Prior distributions over seismic events and importance-sampling weights.
//!
//! Two spatial priors are provided. The **uniform** prior spreads epicenters
//! evenly over the design domain. The **fault-box mixture** concentrates
//! mass on a point source (a truncated bivariate Gaussian) and a
//! north–south fault strip (a truncated Gaussian in longitude times a
//! uniform latitude), on top of a small uniform background. Both priors use
//! a uniform depth and an exponential magnitude distribution with rate
//! `mag_rate` above `mag_min`, so small events dominate.
//!
//! Gaussian components are truncated to the domain box and renormalized, so
//! every prior here is proper. Event sets for the EIG engine come from
//! [`qmc_event_set`], which pairs a quasi-Monte Carlo proposal with
//! self-normalized importance weights `w ∝ p/q` — the same weighting that
//! lets one event set serve any target prior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Domain, GeoPoint};
use crate::stats::{norm_cdf, normalize_log_weights};

/// Default magnitude-frequency rate: a tenfold drop per magnitude unit.
pub fn default_mag_rate() -> f64 {
    std::f64::consts::LN_10
}

/// Default smallest magnitude the priors consider.
pub fn default_mag_min() -> f64 {
    0.5
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A candidate seismic source. Origin time is not a field: the arrival
/// likelihood marginalizes it out, and synthesis fixes it at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Epicenter.
    #[serde(flatten)]
    pub loc: GeoPoint,
    /// Source depth, km (non-negative).
    pub depth_km: f64,
    /// Moment magnitude (dimensionless).
    pub mag: f64,
}

/// Parameters of the fault-box spatial mixture.
///
/// Weights must sum to one. The Gaussian components are truncated to the
/// domain box and renormalized when densities are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// Point-source component: bivariate Gaussian over (lat, lon).
    pub gauss2d: Gauss2d,
    /// Fault-strip component: Gaussian in longitude, uniform in latitude.
    pub gauss_strip: GaussStrip,
    /// Weight of the uniform background component.
    pub background_weight: f64,
}

/// Bivariate Gaussian spatial component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauss2d {
    /// Component mean.
    pub center: GeoPoint,
    /// Covariance over (lat, lon), degrees²; row-major `[[s_ll, s_lo], [s_lo, s_oo]]`.
    pub covariance: [[f64; 2]; 2],
    /// Mixture weight.
    pub weight: f64,
}

/// Fault-strip spatial component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussStrip {
    /// Mean longitude of the strip, degrees east.
    pub lon_mean: f64,
    /// Standard deviation of the strip longitude, degrees.
    pub lon_std: f64,
    /// Mixture weight.
    pub weight: f64,
}

impl Default for MixtureSpec {
    /// The reference fault-box setting: a point source near the eastern
    /// edge, a fault strip near the domain center, and a 2% background.
    fn default() -> Self {
        Self {
            gauss2d: Gauss2d {
                center: GeoPoint {
                    lat: 40.25,
                    lon: -109.0,
                },
                covariance: [[0.125, 0.0], [0.0, 0.125]],
                weight: 0.49,
            },
            gauss_strip: GaussStrip {
                lon_mean: -110.19,
                lon_std: 0.125,
                weight: 0.49,
            },
            background_weight: 0.02,
        }
    }
}

/// A prior over events: spatial kind, domain box, and magnitude law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// Epicenters and depth uniform over the domain box.
    Uniform {
        /// The domain box.
        domain: Domain,
        /// Exponential magnitude rate λ (per magnitude unit).
        #[serde(default = "default_mag_rate")]
        mag_rate: f64,
        /// Lower magnitude support.
        #[serde(default = "default_mag_min")]
        mag_min: f64,
    },
    /// The fault-box mixture over epicenters; depth and magnitude as above.
    FaultBoxMixture {
        /// The domain box.
        domain: Domain,
        /// Exponential magnitude rate λ (per magnitude unit).
        #[serde(default = "default_mag_rate")]
        mag_rate: f64,
        /// Lower magnitude support.
        #[serde(default = "default_mag_min")]
        mag_min: f64,
        /// Spatial mixture parameters.
        #[serde(default)]
        mixture: MixtureSpec,
    },
}

impl PriorSpec {
    /// A uniform prior over the domain with default magnitude law.
    pub fn uniform(domain: Domain) -> Self {
        PriorSpec::Uniform {
            domain,
            mag_rate: default_mag_rate(),
            mag_min: default_mag_min(),
        }
    }

    /// The fault-box mixture prior with default components.
    pub fn fault_box(domain: Domain) -> Self {
        PriorSpec::FaultBoxMixture {
            domain,
            mag_rate: default_mag_rate(),
            mag_min: default_mag_min(),
            mixture: MixtureSpec::default(),
        }
    }

    /// The domain box this prior lives on.
    pub fn domain(&self) -> &Domain {
        match self {
            PriorSpec::Uniform { domain, .. } | PriorSpec::FaultBoxMixture { domain, .. } => {
                domain
            }
        }
    }

    /// Exponential magnitude rate λ.
    pub fn mag_rate(&self) -> f64 {
        match self {
            PriorSpec::Uniform { mag_rate, .. } | PriorSpec::FaultBoxMixture { mag_rate, .. } => {
                *mag_rate
            }
        }
    }

    /// Lower magnitude support.
    pub fn mag_min(&self) -> f64 {
        match self {
            PriorSpec::Uniform { mag_min, .. } | PriorSpec::FaultBoxMixture { mag_min, .. } => {
                *mag_min
            }
        }
    }

    /// Validates domain, magnitude law, and mixture parameters.
    pub fn validate(&self) -> Result<()> {
        self.domain().validate()?;
        if !(self.mag_rate() > 0.0) || !self.mag_rate().is_finite() {
            return Err(Error::InvalidInput(format!(
                "magnitude rate {} must be positive and finite",
                self.mag_rate()
            )));
        }
        if !self.mag_min().is_finite() {
            return Err(Error::InvalidInput("mag_min must be finite".into()));
        }
        if let PriorSpec::FaultBoxMixture { mixture, .. } = self {
            let w_sum =
                mixture.gauss2d.weight + mixture.gauss_strip.weight + mixture.background_weight;
            if (w_sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "mixture weights sum to {w_sum}, expected 1"
                )));
            }
            if mixture.gauss2d.weight < 0.0
                || mixture.gauss_strip.weight < 0.0
                || mixture.background_weight < 0.0
            {
                return Err(Error::InvalidInput("mixture weights must be ≥ 0".into()));
            }
            let c = &mixture.gauss2d.covariance;
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            if (c[0][1] - c[1][0]).abs() > 1e-12 || c[0][0] <= 0.0 || det <= 0.0 {
                return Err(Error::InvalidInput(
                    "gauss2d covariance must be symmetric positive-definite".into(),
                ));
            }
            if !(mixture.gauss_strip.lon_std > 0.0) {
                return Err(Error::InvalidInput("strip lon_std must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Events with self-normalized importance weights (weights sum to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEventSet {
    events: Vec<Event>,
    /// Normalized: `logsumexp(log_weights) == 0`.
    log_weights: Vec<f64>,
}

impl WeightedEventSet {
    /// Builds a set from events and unnormalized log weights.
    pub fn new(events: Vec<Event>, mut log_weights: Vec<f64>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::EmptySet("weighted event set"));
        }
        if events.len() != log_weights.len() {
            return Err(Error::DimensionMismatch {
                expected: events.len(),
                got: log_weights.len(),
            });
        }
        normalize_log_weights(&mut log_weights)?;
        Ok(Self {
            events,
            log_weights,
        })
    }

    /// Number of events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// True when the set has no events (never holds for a constructed set).
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The support events.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Normalized log weight of event `k`.
    pub fn log_weight(&self, k: usize) -> f64 {
        self.log_weights[k]
    }

    /// All normalized log weights.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Normalized weight of event `k`.
    pub fn weight(&self, k: usize) -> f64 {
        self.log_weights[k].exp()
    }

    /// All normalized weights.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

/// Cached log box-masses of the truncated Gaussian components.
///
/// Truncation renormalizes each Gaussian by the probability mass it puts in
/// the domain box; computing those masses once makes density evaluation over
/// large event sets cheap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SpatialNormalizers {
    /// Log mass of the untruncated gauss2d component inside the box.
    gauss2d_log_mass: f64,
    /// Log mass of the untruncated strip longitude Gaussian inside the box.
    strip_log_mass: f64,
}

impl SpatialNormalizers {
    /// Computes the truncation masses for `spec` (trivial for the uniform prior).
    pub(crate) fn for_spec(spec: &PriorSpec) -> Self {
        match spec {
            PriorSpec::Uniform { .. } => Self {
                gauss2d_log_mass: 0.0,
                strip_log_mass: 0.0,
            },
            PriorSpec::FaultBoxMixture {
                domain, mixture, ..
            } => {
                let g = &mixture.gauss2d;
                let c = &g.covariance;
                let gauss2d_log_mass = if c[0][1].abs() < 1e-14 {
                    // Independent axes: the box mass is a product of 1-D masses.
                    let m_lat = gaussian_interval_mass(
                        g.center.lat,
                        c[0][0].sqrt(),
                        domain.lat_min,
                        domain.lat_max,
                    );
                    let m_lon = gaussian_interval_mass(
                        g.center.lon,
                        c[1][1].sqrt(),
                        domain.lon_min,
                        domain.lon_max,
                    );
                    (m_lat * m_lon).ln()
                } else {
                    bivariate_box_mass(g, domain).ln()
                };
                let strip_log_mass = gaussian_interval_mass(
                    mixture.gauss_strip.lon_mean,
                    mixture.gauss_strip.lon_std,
                    domain.lon_min,
                    domain.lon_max,
                )
                .ln();
                Self {
                    gauss2d_log_mass,
                    strip_log_mass,
                }
            }
        }
    }
}

/// Probability a 1-D Gaussian puts on `[lo, hi]`.
fn gaussian_interval_mass(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    norm_cdf((hi - mean) / sd) - norm_cdf((lo - mean) / sd)
}

/// Box mass of a correlated bivariate Gaussian by 2-D Simpson quadrature.
///
/// Only used for non-diagonal covariances; 257 nodes per axis put the
/// quadrature error far below the Monte Carlo tolerances downstream.
fn bivariate_box_mass(g: &Gauss2d, domain: &Domain) -> f64 {
    const N: usize = 257;
    let c = &g.covariance;
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let inv = [
        [c[1][1] / det, -c[0][1] / det],
        [-c[1][0] / det, c[0][0] / det],
    ];
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let h_lat = (domain.lat_max - domain.lat_min) / (N - 1) as f64;
    let h_lon = (domain.lon_max - domain.lon_min) / (N - 1) as f64;
    let simpson_w = |i: usize| -> f64 {
        if i == 0 || i == N - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut acc = 0.0;
    for i in 0..N {
        let lat = domain.lat_min + i as f64 * h_lat;
        let dlat = lat - g.center.lat;
        for j in 0..N {
            let lon = domain.lon_min + j as f64 * h_lon;
            let dlon = lon - g.center.lon;
            let quad = inv[0][0] * dlat * dlat
                + 2.0 * inv[0][1] * dlat * dlon
                + inv[1][1] * dlon * dlon;
            acc += simpson_w(i) * simpson_w(j) * norm * (-0.5 * quad).exp();
        }
    }
    acc * h_lat * h_lon / 9.0
}

/// Log spatial density of the prior at `(lat, lon)`, assuming the point is
/// inside the domain box.
pub(crate) fn spatial_log_density(
    lat: f64,
    lon: f64,
    spec: &PriorSpec,
    norms: &SpatialNormalizers,
) -> f64 {
    let domain = spec.domain();
    match spec {
        PriorSpec::Uniform { .. } => -domain.area_deg2().ln(),
        PriorSpec::FaultBoxMixture { mixture, .. } => {
            let g = &mixture.gauss2d;
            let c = &g.covariance;
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            let inv = [
                [c[1][1] / det, -c[0][1] / det],
                [-c[1][0] / det, c[0][0] / det],
            ];
            let (dlat, dlon) = (lat - g.center.lat, lon - g.center.lon);
            let quad = inv[0][0] * dlat * dlat
                + 2.0 * inv[0][1] * dlat * dlon
                + inv[1][1] * dlon * dlon;
            let log_phi2 = -(2.0 * std::f64::consts::PI * det.sqrt()).ln() - 0.5 * quad
                - norms.gauss2d_log_mass;

            let s = &mixture.gauss_strip;
            let z = (lon - s.lon_mean) / s.lon_std;
            let log_strip_lon = -0.5 * z * z
                - (s.lon_std * (2.0 * std::f64::consts::PI).sqrt()).ln()
                - norms.strip_log_mass;
            let log_strip = log_strip_lon - (domain.lat_max - domain.lat_min).ln();

            let log_bg = -domain.area_deg2().ln();

            crate::stats::logsumexp(&[
                g.weight.ln() + log_phi2,
                s.weight.ln() + log_strip,
                mixture.background_weight.ln() + log_bg,
            ])
        }
    }
}

/// Log prior density of a full event, with cached truncation masses.
pub(crate) fn log_prior_density_with(
    e: &Event,
    spec: &PriorSpec,
    norms: &SpatialNormalizers,
) -> f64 {
    let d = spec.domain();
    let in_space = (d.lat_min..=d.lat_max).contains(&e.loc.lat)
        && (d.lon_min..=d.lon_max).contains(&e.loc.lon)
        && (d.depth_min..=d.depth_max).contains(&e.depth_km);
    if !in_space || e.mag < spec.mag_min() {
        return f64::NEG_INFINITY;
    }
    let spatial = spatial_log_density(e.loc.lat, e.loc.lon, spec, norms);
    let depth = -(d.depth_max - d.depth_min).ln();
    let lambda = spec.mag_rate();
    let mag = lambda.ln() - lambda * (e.mag - spec.mag_min());
    spatial + depth + mag
}

/// Log density of the prior at an event; `-inf` outside the support.
///
/// The support is the domain box in space and depth, and `[mag_min, ∞)` in
/// magnitude — the exponential magnitude law is not truncated above.
pub fn log_prior_density(e: &Event, spec: &PriorSpec) -> f64 {
    log_prior_density_with(e, spec, &SpatialNormalizers::for_spec(spec))
}

// ---------------------------------------------------------------------------
// Importance weights
// ---------------------------------------------------------------------------

/// Self-normalized importance weights `w_k ∝ p(θ_k) / q(θ_k)`.
///
/// `events` are assumed drawn from `proposal`; the returned set reweights
/// them so that weighted averages estimate expectations under `target`.
/// Errors if the proposal density vanishes at any event.
pub fn importance_weights(
    events: &[Event],
    target: &PriorSpec,
    proposal: &PriorSpec,
) -> Result<WeightedEventSet> {
    if events.is_empty() {
        return Err(Error::EmptySet("importance-weight input"));
    }
    target.validate()?;
    proposal.validate()?;
    let t_norms = SpatialNormalizers::for_spec(target);
    let p_norms = SpatialNormalizers::for_spec(proposal);
    let mut log_w = Vec::with_capacity(events.len());
    for (index, e) in events.iter().enumerate() {
        let lq = log_prior_density_with(e, proposal, &p_norms);
        if lq == f64::NEG_INFINITY {
            return Err(Error::UnsupportedSample { index });
        }
        let lp = log_prior_density_with(e, target, &t_norms);
        log_w.push(lp - lq);
    }
    WeightedEventSet::new(events.to_vec(), log_w)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Which mixture component generated a fault-box draw (for diagnostics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MixtureComponent {
    PointSource,
    Strip,
    Background,
}

/// Inverse CDF of the exponential magnitude law at `u ∈ [0, 1)`.
fn exponential_mag_quantile(u: f64, mag_min: f64, rate: f64) -> f64 {
    mag_min - (1.0 - u).ln() / rate
}

/// Inverse CDF of the exponential magnitude law truncated to
/// `[mag_min, mag_max]`, used to map the bounded QMC magnitude axis.
pub(crate) fn truncated_mag_quantile(u: f64, mag_min: f64, mag_max: f64, rate: f64) -> f64 {
    let z = 1.0 - (-rate * (mag_max - mag_min)).exp();
    mag_min - (1.0 - u * z).ln() / rate
}

/// Log density of the truncated exponential magnitude law.
fn truncated_mag_log_density(m: f64, mag_min: f64, mag_max: f64, rate: f64) -> f64 {
    if m < mag_min || m > mag_max {
        return f64::NEG_INFINITY;
    }
    let z = 1.0 - (-rate * (mag_max - mag_min)).exp();
    rate.ln() - rate * (m - mag_min) - z.ln()
}

/// Draws one fault-box epicenter, reporting which component produced it.
fn sample_fault_box_spatial(
    domain: &Domain,
    mixture: &MixtureSpec,
    rng: &mut impl rand::Rng,
) -> (GeoPoint, MixtureComponent) {
    let pick: f64 = rng.gen_range(0.0..1.0);
    if pick < mixture.gauss2d.weight {
        // Truncation by rejection against the domain box.
        let g = &mixture.gauss2d;
        let c = &g.covariance;
        // Lower Cholesky factor of the 2×2 covariance.
        let l00 = c[0][0].sqrt();
        let l10 = c[1][0] / l00;
        let l11 = (c[1][1] - l10 * l10).sqrt();
        loop {
            let z0: f64 = rng.sample(rand_distr::StandardNormal);
            let z1: f64 = rng.sample(rand_distr::StandardNormal);
            let lat = g.center.lat + l00 * z0;
            let lon = g.center.lon + l10 * z0 + l11 * z1;
            if (domain.lat_min..=domain.lat_max).contains(&lat)
                && (domain.lon_min..=domain.lon_max).contains(&lon)
            {
                return (GeoPoint { lat, lon }, MixtureComponent::PointSource);
            }
        }
    } else if pick < mixture.gauss2d.weight + mixture.gauss_strip.weight {
        let s = &mixture.gauss_strip;
        let lon = loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let lon = s.lon_mean + s.lon_std * z;
            if (domain.lon_min..=domain.lon_max).contains(&lon) {
                break lon;
            }
        };
        let lat = rng.gen_range(domain.lat_min..domain.lat_max);
        (GeoPoint { lat, lon }, MixtureComponent::Strip)
    } else {
        let lat = rng.gen_range(domain.lat_min..domain.lat_max);
        let lon = rng.gen_range(domain.lon_min..domain.lon_max);
        (GeoPoint { lat, lon }, MixtureComponent::Background)
    }
}

/// Draws one event, reporting the spatial component for diagnostics.
pub(crate) fn sample_one_labeled(
    spec: &PriorSpec,
    rng: &mut impl rand::Rng,
) -> (Event, MixtureComponent) {
    let domain = spec.domain();
    let (loc, component) = match spec {
        PriorSpec::Uniform { .. } => (
            GeoPoint {
                lat: rng.gen_range(domain.lat_min..domain.lat_max),
                lon: rng.gen_range(domain.lon_min..domain.lon_max),
            },
            MixtureComponent::Background,
        ),
        PriorSpec::FaultBoxMixture { mixture, .. } => {
            sample_fault_box_spatial(domain, mixture, rng)
        }
    };
    let depth_km = rng.gen_range(domain.depth_min..domain.depth_max);
    let u: f64 = rng.gen_range(0.0..1.0);
    let mag = exponential_mag_quantile(u, spec.mag_min(), spec.mag_rate());
    (
        Event {
            loc,
            depth_km,
            mag,
        },
        component,
    )
}

/// Draws `n` i.i.d. events from the prior; deterministic in `seed`.
pub fn sample_prior(spec: &PriorSpec, n: usize, seed: u64) -> Result<Vec<Event>> {
    spec.validate()?;
    let mut rng = crate::rng::stream(seed, PRIOR_SAMPLE_LANE, 0);
    Ok((0..n)
        .map(|_| sample_one_labeled(spec, &mut rng).0)
        .collect())
}

/// RNG lane reserved for prior sampling (see [`crate::rng::stream`]).
const PRIOR_SAMPLE_LANE: u64 = 0x5052_494f_52;

/// Builds the EIG event set: a quasi-Monte Carlo proposal with importance
/// weights against the prior.
///
/// Epicenters and depth map affinely onto the domain; the magnitude axis
/// maps through the quantile function of the exponential law truncated at
/// the domain's `mag_max`, so the proposal already concentrates where the
/// magnitude prior does. Weights are `p/q` self-normalized — exactly equal
/// for the uniform prior, and the fault-box density ratio otherwise.
pub fn qmc_event_set(spec: &PriorSpec, n: usize, seed: u64) -> Result<WeightedEventSet> {
    spec.validate()?;
    let domain = spec.domain();
    let unit = crate::geo::sobol_unit::<4>(n, seed)?;
    let norms = SpatialNormalizers::for_spec(spec);
    let mut events = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    let log_q_space = -domain.area_deg2().ln() - (domain.depth_max - domain.depth_min).ln();
    for u in unit {
        let mut e = crate::geo::map_unit_to_domain(u, domain);
        e.mag = truncated_mag_quantile(u[3], spec.mag_min(), domain.mag_max, spec.mag_rate());
        let lq = log_q_space
            + truncated_mag_log_density(e.mag, spec.mag_min(), domain.mag_max, spec.mag_rate());
        let lp = log_prior_density_with(&e, spec, &norms);
        log_w.push(lp - lq);
        events.push(e);
    }
    WeightedEventSet::new(events, log_w)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn example_domain() -> Domain {
        Domain {
            lat_min: 40.0,
            lat_max: 42.0,
            lon_min: -112.0,
            lon_max: -108.36,
            depth_min: 0.0,
            depth_max: 40.0,
            mag_min: 0.5,
            mag_max: 6.0,
        }
    }

    fn event(lat: f64, lon: f64, depth_km: f64, mag: f64) -> Event {
        Event {
            loc: GeoPoint { lat, lon },
            depth_km,
            mag,
        }
    }

    // ---- densities ----

    #[test]
    fn uniform_density_factorizes() {
        let spec = PriorSpec::uniform(example_domain());
        let e = event(41.0, -110.0, 10.0, 1.5);
        let expected = -(2.0f64 * 3.64).ln() - 40.0f64.ln() + default_mag_rate().ln()
            - default_mag_rate() * (1.5 - 0.5);
        assert!((log_prior_density(&e, &spec) - expected).abs() < 1e-12);
    }

    #[test]
    fn magnitude_factor_at_origin_is_log_lambda() {
        // At m = mag_min the exponential density equals its rate λ = ln 10.
        let spec = PriorSpec::uniform(example_domain());
        let e = event(41.0, -110.0, 10.0, 0.5);
        let spatial_depth = -(2.0f64 * 3.64).ln() - 40.0f64.ln();
        let mag_factor = log_prior_density(&e, &spec) - spatial_depth;
        assert!(
            (mag_factor - 0.834_032_445_247_956_4).abs() < 1e-12,
            "ln(ln 10) = 0.8340…, got {mag_factor}"
        );
    }

    #[test]
    fn density_vanishes_outside_support() {
        let spec = PriorSpec::uniform(example_domain());
        assert_eq!(
            log_prior_density(&event(43.0, -110.0, 10.0, 1.0), &spec),
            f64::NEG_INFINITY
        );
        assert_eq!(
            log_prior_density(&event(41.0, -110.0, 50.0, 1.0), &spec),
            f64::NEG_INFINITY
        );
        assert_eq!(
            log_prior_density(&event(41.0, -110.0, 10.0, 0.3), &spec),
            f64::NEG_INFINITY,
            "below mag_min"
        );
        assert!(
            log_prior_density(&event(41.0, -110.0, 10.0, 9.0), &spec).is_finite(),
            "magnitude support is not truncated above"
        );
    }

    #[test]
    fn fault_box_spatial_density_integrates_to_one() {
        let spec = PriorSpec::fault_box(example_domain());
        let norms = SpatialNormalizers::for_spec(&spec);
        let domain = example_domain();
        use rand::Rng;
        let mut rng = crate::rng::stream(11, 0, 0);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let lat = rng.gen_range(domain.lat_min..domain.lat_max);
            let lon = rng.gen_range(domain.lon_min..domain.lon_max);
            acc += spatial_log_density(lat, lon, &spec, &norms).exp();
        }
        let integral = acc / n as f64 * domain.area_deg2();
        assert!(
            (integral - 1.0).abs() < 0.01,
            "spatial integral {integral} should be 1 within 1%"
        );
    }

    #[test]
    fn correlated_gauss2d_mass_matches_diagonal_limit() {
        // The Simpson path with a hair of correlation must agree with the
        // closed-form CDF product at zero correlation.
        let domain = example_domain();
        let diag = Gauss2d {
            center: GeoPoint {
                lat: 40.25,
                lon: -109.0,
            },
            covariance: [[0.125, 0.0], [0.0, 0.125]],
            weight: 1.0,
        };
        let mut tilted = diag.clone();
        tilted.covariance[0][1] = 1e-6;
        tilted.covariance[1][0] = 1e-6;
        let exact = gaussian_interval_mass(40.25, 0.125f64.sqrt(), 40.0, 42.0)
            * gaussian_interval_mass(-109.0, 0.125f64.sqrt(), -112.0, -108.36);
        let quad = bivariate_box_mass(&tilted, &domain);
        assert!(
            (quad - exact).abs() < 1e-6,
            "quadrature {quad} vs closed form {exact}"
        );
    }

    // ---- importance weights ----

    #[test]
    fn identical_target_and_proposal_give_equal_weights() {
        let spec = PriorSpec::uniform(example_domain());
        let events = sample_prior(&spec, 50, 3).unwrap();
        let set = importance_weights(&events, &spec, &spec).unwrap();
        for k in 0..set.len() {
            assert!((set.weight(k) - 0.02).abs() < 1e-14);
        }
    }

    #[test]
    fn density_ratio_one_to_three_normalizes_to_quarter_and_three_quarters() {
        let set = WeightedEventSet::new(
            vec![event(41.0, -110.0, 1.0, 1.0), event(41.1, -110.0, 1.0, 1.0)],
            vec![1.0f64.ln(), 3.0f64.ln()],
        )
        .unwrap();
        assert!((set.weight(0) - 0.25).abs() < 1e-14);
        assert!((set.weight(1) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn zero_proposal_density_is_an_error() {
        let big = PriorSpec::uniform(example_domain());
        let mut small_domain = example_domain();
        small_domain.lat_max = 41.0;
        let small = PriorSpec::uniform(small_domain);
        // In the target's support but outside the proposal's.
        let events = vec![event(41.5, -110.0, 10.0, 1.0)];
        match importance_weights(&events, &big, &small) {
            Err(Error::UnsupportedSample { index }) => assert_eq!(index, 0),
            other => panic!("expected UnsupportedSample, got {other:?}"),
        }
    }

    #[test]
    fn fault_box_target_from_uniform_proposal_matches_direct_sampling() {
        // Weighted mean of a bounded test function under reweighted uniform
        // draws vs. the direct fault-box Monte Carlo estimate.
        let domain = example_domain();
        let uniform = PriorSpec::uniform(domain);
        let fault = PriorSpec::fault_box(domain);
        let n = 40_000;
        let proposal_events = sample_prior(&uniform, n, 17).unwrap();
        let set = importance_weights(&proposal_events, &fault, &uniform).unwrap();
        let test_fn = |e: &Event| (e.loc.lon + 110.0).tanh();

        let weighted: f64 = set
            .events()
            .iter()
            .zip(set.weights())
            .map(|(e, w)| w * test_fn(e))
            .sum();

        let direct_events = sample_prior(&fault, n, 18).unwrap();
        let direct_vals: Vec<f64> = direct_events.iter().map(test_fn).collect();
        let (direct_mean, direct_sd) = crate::stats::mean_and_sample_sd(&direct_vals);
        let se = direct_sd / (n as f64).sqrt();

        // Importance estimate has its own (larger) variance; allow both.
        let tol = 3.0 * se * 4.0;
        assert!(
            (weighted - direct_mean).abs() < tol,
            "importance {weighted} vs direct {direct_mean} ± {tol}"
        );
    }

    // ---- sampling ----

    #[test]
    fn sample_prior_zero_is_empty() {
        let spec = PriorSpec::uniform(example_domain());
        assert!(sample_prior(&spec, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn uniform_marginals_pass_chi_square() {
        let domain = example_domain();
        let spec = PriorSpec::uniform(domain);
        let n = 10_000;
        let events = sample_prior(&spec, n, 5).unwrap();
        // 10 equiprobable bins per axis; critical value for 9 dof at 1%.
        const CHI2_CRIT: f64 = 21.666;
        let axes: [(&str, Box<dyn Fn(&Event) -> f64>); 4] = [
            ("lat", Box::new(move |e| (e.loc.lat - 40.0) / 2.0)),
            ("lon", Box::new(move |e| (e.loc.lon + 112.0) / 3.64)),
            ("depth", Box::new(move |e| e.depth_km / 40.0)),
            (
                "mag",
                Box::new(move |e| 1.0 - (-default_mag_rate() * (e.mag - 0.5)).exp()),
            ),
        ];
        for (name, to_unit) in axes {
            let mut counts = [0usize; 10];
            for e in &events {
                let u = to_unit(e).clamp(0.0, 1.0 - 1e-12);
                counts[(u * 10.0) as usize] += 1;
            }
            let expected = n as f64 / 10.0;
            let chi2: f64 = counts
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            assert!(chi2 < CHI2_CRIT, "{name} axis chi2 {chi2} ≥ {CHI2_CRIT}");
        }
    }

    #[test]
    fn fault_box_component_fractions_match_weights() {
        let spec = PriorSpec::fault_box(example_domain());
        let mut rng = crate::rng::stream(23, 0, 0);
        let n = 10_000;
        let mut point = 0usize;
        for _ in 0..n {
            if sample_one_labeled(&spec, &mut rng).1 == MixtureComponent::PointSource {
                point += 1;
            }
        }
        let frac = point as f64 / n as f64;
        assert!(
            (frac - 0.49).abs() < 0.015,
            "point-source fraction {frac} should be 0.49 ± 0.015"
        );
    }

    /// Spearman rank correlation between two equal-length samples.
    fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        let (rx, ry) = (ranks(xs), ranks(ys));
        let n = xs.len() as f64;
        let mean = (n - 1.0) / 2.0;
        let mut num = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for (a, b) in rx.iter().zip(&ry) {
            num += (a - mean) * (b - mean);
            dx += (a - mean).powi(2);
            dy += (b - mean).powi(2);
        }
        num / (dx * dy).sqrt()
    }

    #[test]
    fn location_is_independent_of_depth_and_magnitude() {
        for spec in [
            PriorSpec::uniform(example_domain()),
            PriorSpec::fault_box(example_domain()),
        ] {
            let events = sample_prior(&spec, 10_000, 29).unwrap();
            let lats: Vec<f64> = events.iter().map(|e| e.loc.lat).collect();
            let lons: Vec<f64> = events.iter().map(|e| e.loc.lon).collect();
            let depths: Vec<f64> = events.iter().map(|e| e.depth_km).collect();
            let mags: Vec<f64> = events.iter().map(|e| e.mag).collect();
            for (name, loc, other) in [
                ("lat-depth", &lats, &depths),
                ("lat-mag", &lats, &mags),
                ("lon-depth", &lons, &depths),
                ("lon-mag", &lons, &mags),
            ] {
                let rho = spearman(loc, other);
                assert!(rho.abs() < 0.05, "{name} rank correlation {rho}");
            }
        }
    }

    // ---- QMC event sets ----

    #[test]
    fn qmc_uniform_prior_has_equal_weights() {
        let spec = PriorSpec::uniform(example_domain());
        let set = qmc_event_set(&spec, 128, 7).unwrap();
        for k in 0..set.len() {
            assert!(
                (set.weight(k) - 1.0 / 128.0).abs() < 1e-14,
                "weight {k} = {}",
                set.weight(k)
            );
        }
        let domain = example_domain();
        for e in set.events() {
            assert!(domain.contains(e));
        }
    }

    #[test]
    fn qmc_fault_box_weights_track_density_ratio() {
        let spec = PriorSpec::fault_box(example_domain());
        let set = qmc_event_set(&spec, 256, 7).unwrap();
        // Weights must be proportional to p/q with q the flat QMC proposal:
        // verify the ratio of two weights equals the ratio of p densities
        // after cancelling identical magnitude factors.
        let norms = SpatialNormalizers::for_spec(&spec);
        let e0 = &set.events()[0];
        let e1 = &set.events()[1];
        let lp0 = spatial_log_density(e0.loc.lat, e0.loc.lon, &spec, &norms);
        let lp1 = spatial_log_density(e1.loc.lat, e1.loc.lon, &spec, &norms);
        let expected = lp0 - lp1;
        let got = set.log_weight(0) - set.log_weight(1);
        assert!(
            (got - expected).abs() < 1e-10,
            "log-weight ratio {got} vs spatial density ratio {expected}"
        );
    }

    #[test]
    fn truncated_quantile_spans_the_magnitude_axis() {
        let (m0, m1, rate) = (0.5, 6.0, default_mag_rate());
        assert!((truncated_mag_quantile(0.0, m0, m1, rate) - m0).abs() < 1e-12);
        assert!(truncated_mag_quantile(1.0 - 1e-12, m0, m1, rate) <= m1);
        let mid = truncated_mag_quantile(0.5, m0, m1, rate);
        assert!(mid > m0 && mid < 1.0, "median {mid} should sit low, near m0");
    }

    #[test]
    fn weighted_event_set_validates_inputs() {
        assert!(matches!(
            WeightedEventSet::new(vec![], vec![]),
            Err(Error::EmptySet(_))
        ));
        let e = event(41.0, -110.0, 1.0, 1.0);
        assert!(matches!(
            WeightedEventSet::new(vec![e], vec![0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(WeightedEventSet::new(vec![e], vec![f64::NAN]).is_err());
    }

    #[test]
    fn mixture_weight_validation() {
        let mut spec = PriorSpec::fault_box(example_domain());
        if let PriorSpec::FaultBoxMixture { mixture, .. } = &mut spec {
            mixture.background_weight = 0.5;
        }
        assert!(spec.validate().is_err());
    }
}
