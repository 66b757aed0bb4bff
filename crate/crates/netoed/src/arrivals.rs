//! Arrival-time likelihoods and the measurement-noise model feeding them.
//!
//! A detecting station reports one first-arrival time. Its error has two
//! independent parts: travel-time model error (correlated across stations,
//! from the velocity-ensemble spread σ_model and the kernel correlation
//! Γ_GP) and pick measurement error (independent, σ_meas, driven by the
//! signal-to-noise ratio at the station). Stacked over the detecting
//! stations this gives a multivariate normal with covariance
//!
//! ```text
//! Σ = σ_model Γ_GP σ_modelᵀ + diag(σ²_meas) + nugget·I
//! ```
//!
//! The event's unknown origin time shifts every arrival equally; under an
//! improper uniform prior it integratesout analytically, leaving the
//! origin-time-marginalized likelihood ([`arrival_loglik_marginal`]) that
//! the information-gain machinery evaluates. The conditional form
//! ([`arrival_loglik_conditional`]) is kept for synthesis and validation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::detection::DetectionVector;
use crate::earthmodel::{CorrelationMode, CorrelationModel, kernel_correlation};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, degrees_to_km, great_circle_distance};
use crate::network::SensorNetwork;
use crate::priors::Event;

/// Diagonal nugget added to every assembled covariance, s². Keeps Σ
/// positive definite when the optimizer proposes near-coincident stations.
pub const COVARIANCE_NUGGET_S2: f64 = 1e-6;

/// Distances below this clamp to it inside [`snr_mean`]'s logarithm.
pub const SNR_DISTANCE_FLOOR_KM: f64 = 1.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

// ---------------------------------------------------------------------------
// Noise models
// ---------------------------------------------------------------------------

/// Linear model for the expected signal-to-noise ratio of a pick:
/// `SNR = a·mag − b·ln(Δ km) + c + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrModel {
    /// Per-magnitude slope.
    pub a: f64,
    /// Per-log-km distance slope.
    pub b: f64,
    /// Intercept.
    pub c: f64,
    /// Optional per-station additive offsets, indexed like the network;
    /// stations beyond the list length get 0. Offsets configured on the
    /// stations themselves (see [`crate::network::Station::snr_offset`])
    /// are added on top by the model-bundle evaluation path, so populate
    /// only one of the two.
    #[serde(default)]
    pub station_offsets: Vec<f64>,
}

impl Default for SnrModel {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.2,
            c: 6.0,
            station_offsets: Vec::new(),
        }
    }
}

/// Expected SNR at `station` for an event of magnitude `mag` at `delta_km`.
/// Distances below [`SNR_DISTANCE_FLOOR_KM`] clamp to it (the near field is
/// outside model validity; the clamp keeps the logarithm total).
pub fn snr_mean(m: &SnrModel, delta_km: f64, mag: f64, station: usize) -> f64 {
    let offset = m.station_offsets.get(station).copied().unwrap_or(0.0);
    m.a * mag - m.b * delta_km.max(SNR_DISTANCE_FLOOR_KM).ln() + m.c + offset
}

/// Piecewise pick-noise curve: σ_meas is σ₀ for weak signals, shrinks
/// log-linearly through the transition band, and saturates at shrink·σ₀
/// for strong ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickNoiseModel {
    /// Weak-signal pick standard deviation, seconds.
    pub sigma0: f64,
    /// Strong-signal multiplier in (0, 1): strong picks have σ = shrink·σ₀.
    pub shrink: f64,
    /// SNR below which σ_meas = σ₀.
    pub t_lower: f64,
    /// SNR above which σ_meas = shrink·σ₀.
    pub t_upper: f64,
}

impl Default for PickNoiseModel {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            shrink: 0.1,
            t_lower: 1.0,
            t_upper: 10.0,
        }
    }
}

impl PickNoiseModel {
    /// Validates the piecewise-curve invariants.
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma0.is_finite()
            && self.sigma0 > 0.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.t_lower.is_finite()
            && self.t_upper.is_finite()
            && self.t_lower < self.t_upper
            && self.t_lower > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "pick-noise model needs sigma0 > 0, shrink in (0,1), 0 < t_lower < t_upper".into(),
            ))
        }
    }
}

/// Pick measurement standard deviation for a given SNR. Continuous and
/// non-increasing over the whole real line; the weak-signal branch is
/// checked first so non-positive SNRs never reach the logarithm.
pub fn sigma_meas(p: &PickNoiseModel, snr: f64) -> f64 {
    if snr <= p.t_lower {
        p.sigma0
    } else if snr >= p.t_upper {
        p.shrink * p.sigma0
    } else {
        let frac = (snr.ln() - p.t_lower.ln()) / (p.t_upper.ln() - p.t_lower.ln());
        p.sigma0 - (p.sigma0 - p.shrink * p.sigma0) * frac
    }
}

/// Total per-station arrival standard deviation: model and measurement
/// errors are independent, so variances add.
pub fn total_sigma(model_sigma: f64, meas_sigma: f64) -> f64 {
    model_sigma.hypot(meas_sigma)
}

// ---------------------------------------------------------------------------
// Arrival vectors and covariance
// ---------------------------------------------------------------------------

/// Arrival times (seconds past the reference epoch) for the detecting
/// stations only, ordered by station index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalVector {
    /// One entry per detecting station.
    pub times: Vec<f64>,
}

impl ArrivalVector {
    /// Wraps a time list.
    pub fn new(times: Vec<f64>) -> Self {
        Self { times }
    }

    /// Number of arrivals.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when no station detected.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Arrival covariance over the detecting stations, seconds².
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    /// The |D|×|D| symmetric positive-definite matrix.
    pub sigma: DMatrix<f64>,
}

/// Correlation matrix over the detecting stations per the bundle's mode:
/// kernel of epicentral-distance differences, kernel of station
/// separations, or the identity.
pub(crate) fn station_correlation(
    model: &CorrelationModel,
    deltas_km: &[f64],
    locs: &[GeoPoint],
) -> DMatrix<f64> {
    let k = deltas_km.len();
    let mut corr = DMatrix::<f64>::identity(k, k);
    match model.mode {
        CorrelationMode::Independent => {}
        CorrelationMode::EpicentralDifference => {
            for a in 0..k {
                for b in (a + 1)..k {
                    let r = kernel_correlation(model, deltas_km[a], deltas_km[b]);
                    corr[(a, b)] = r;
                    corr[(b, a)] = r;
                }
            }
        }
        CorrelationMode::StationSeparation => {
            for a in 0..k {
                for b in (a + 1)..k {
                    let sep = degrees_to_km(great_circle_distance(locs[a], locs[b]));
                    let r = kernel_correlation(model, sep, 0.0);
                    corr[(a, b)] = r;
                    corr[(b, a)] = r;
                }
            }
        }
    }
    corr
}

/// Builds Σ from per-station parts:
/// `Σ_jk = σ_model,j Γ_jk σ_model,k + 1{j=k}(σ²_meas,j + nugget)`.
pub(crate) fn covariance_from_parts(
    sigma_model: &[f64],
    sigma_meas_vals: &[f64],
    corr: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = sigma_model.len();
    let mut sigma = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            sigma[(a, b)] = sigma_model[a] * corr[(a, b)] * sigma_model[b];
        }
        sigma[(a, a)] += sigma_meas_vals[a] * sigma_meas_vals[a] + COVARIANCE_NUGGET_S2;
    }
    sigma
}

/// Assembles the arrival covariance for the detecting stations of `d`.
pub fn assemble_covariance(
    e: &Event,
    net: &SensorNetwork,
    d: &DetectionVector,
    bundle: &ModelBundle,
) -> Result<CovarianceMatrix> {
    if d.len() != net.len() {
        return Err(Error::DimensionMismatch {
            expected: net.len(),
            got: d.len(),
        });
    }
    if d.count_detected() == 0 {
        return Err(Error::EmptySet("detections"));
    }
    let mut deltas = Vec::new();
    let mut locs = Vec::new();
    let mut s_model = Vec::new();
    let mut s_meas = Vec::new();
    for (i, (flag, station)) in d.flags.iter().zip(&net.stations).enumerate() {
        if !flag {
            continue;
        }
        let stats = bundle.station_stats(e, station, i)?;
        deltas.push(stats.delta_km);
        locs.push(station.loc);
        s_model.push(stats.sigma_model);
        s_meas.push(stats.sigma_meas);
    }
    let corr = station_correlation(&bundle.correlation, &deltas, &locs);
    let sigma = covariance_from_parts(&s_model, &s_meas, &corr);
    // Trial factorization up front so callers get a typed error rather
    // than a failure deep inside a likelihood evaluation.
    factorize(&sigma)?;
    Ok(CovarianceMatrix { sigma })
}

// ---------------------------------------------------------------------------
// Likelihoods
// ---------------------------------------------------------------------------

fn factorize(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(sigma.clone()).ok_or_else(|| {
        Error::SingularCovariance(format!(
            "{}×{} arrival covariance is not positive definite",
            sigma.nrows(),
            sigma.ncols()
        ))
    })
}

fn ln_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l_dirty()
        .diagonal()
        .iter()
        .map(|v| 2.0 * v.ln())
        .sum()
}

/// Multivariate normal log-density of a residual vector under covariance
/// `sigma`.
pub fn mvn_logpdf(residual: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    let k = residual.len();
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: sigma.nrows(),
        });
    }
    if k == 0 {
        return Ok(0.0);
    }
    let chol = factorize(sigma)?;
    let quad = residual.dot(&chol.solve(residual));
    Ok(-0.5 * (k as f64 * LN_2PI + ln_det(&chol) + quad))
}

/// Origin-time-marginalized multivariate normal log-density.
///
/// The arrival model is `a = μ + t_o·1 + ε`, `ε ~ N(0, Σ)`, with unknown
/// origin time `t_o` under an improper uniform prior. Integrating `t_o`
/// out of the joint density gives, for `k ≥ 2` arrivals and residual
/// `r = a − μ`:
///
/// ```text
/// log L = −(k−1)/2·ln 2π − ½ ln|Σ| − ½ ln β − ½ r̃ᵀΣ⁻¹r̃
/// ```
///
/// with `β = 1ᵀΣ⁻¹1`, `t* = (1ᵀΣ⁻¹r)/β`, and `r̃ = r − t*·1`. Centering at
/// the profiled origin time `t*` is algebraically identical to the
/// textbook `−½rᵀΣ⁻¹r + α²/(2β)` expansion but immune to the catastrophic
/// cancellation that form suffers when arrivals carry a large common
/// offset.
///
/// One arrival fixes `t_o` and carries no information beyond detection:
/// the `k = 1` density is identically 1 (the ½ln|Σ| and ½lnβ terms cancel
/// exactly), so the function returns 0 without factorizing. `k = 0` is the
/// empty product, also 0.
pub fn mvn_marginal_logpdf(residual: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    let k = residual.len();
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: sigma.nrows(),
        });
    }
    if k <= 1 {
        return Ok(0.0);
    }
    let chol = factorize(sigma)?;
    let ones = DVector::<f64>::repeat(k, 1.0);
    let sigma_inv_ones = chol.solve(&ones);
    let beta = ones.dot(&sigma_inv_ones);
    if beta <= 0.0 {
        return Err(Error::SingularCovariance(
            "origin-time precision 1ᵀΣ⁻¹1 is not positive".into(),
        ));
    }
    let alpha = residual.dot(&sigma_inv_ones);
    let centered = residual - &ones * (alpha / beta);
    let quad = centered.dot(&chol.solve(&centered));
    Ok(-0.5 * ((k - 1) as f64 * LN_2PI + ln_det(&chol) + beta.ln() + quad))
}

/// Gathers the per-detecting-station surrogate means and the covariance,
/// shared by the two likelihood entry points.
fn residual_and_cov(
    a: &ArrivalVector,
    e: &Event,
    net: &SensorNetwork,
    d: &DetectionVector,
    bundle: &ModelBundle,
) -> Result<(DVector<f64>, CovarianceMatrix)> {
    if a.len() != d.count_detected() {
        return Err(Error::DimensionMismatch {
            expected: d.count_detected(),
            got: a.len(),
        });
    }
    let cov = assemble_covariance(e, net, d, bundle)?;
    let mut residual = DVector::<f64>::zeros(a.len());
    let mut j = 0;
    for (i, (flag, station)) in d.flags.iter().zip(&net.stations).enumerate() {
        if !flag {
            continue;
        }
        let stats = bundle.station_stats(e, station, i)?;
        residual[j] = a.times[j] - stats.mu;
        j += 1;
    }
    Ok((residual, cov))
}

/// Log-density of the arrivals given a known origin time `t_o`.
pub fn arrival_loglik_conditional(
    a: &ArrivalVector,
    t_o: f64,
    e: &Event,
    d: &DetectionVector,
    net: &SensorNetwork,
    bundle: &ModelBundle,
) -> Result<f64> {
    if d.count_detected() == 0 {
        return Err(Error::EmptySet("detections"));
    }
    let (mut residual, cov) = residual_and_cov(a, e, net, d, bundle)?;
    residual.add_scalar_mut(-t_o);
    mvn_logpdf(&residual, &cov.sigma)
}

/// Log-density of the arrivals with the origin time integrated out under
/// an improper uniform prior. Zero detections give log 1 = 0 (the empty
/// product); a single detection likewise carries no arrival information
/// (see [`mvn_marginal_logpdf`]).
pub fn arrival_loglik_marginal(
    a: &ArrivalVector,
    e: &Event,
    d: &DetectionVector,
    net: &SensorNetwork,
    bundle: &ModelBundle,
) -> Result<f64> {
    if d.count_detected() == 0 {
        if a.is_empty() {
            return Ok(0.0);
        }
        return Err(Error::DimensionMismatch {
            expected: 0,
            got: a.len(),
        });
    }
    let (residual, cov) = residual_and_cov(a, e, net, d, bundle)?;
    mvn_marginal_logpdf(&residual, &cov.sigma)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
