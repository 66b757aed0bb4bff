//! Expected information gain: discrete-support posteriors, KL divergence,
//! per-event sensitivity, and the network-level EIG aggregate.
//!
//! The weighted event set plays three roles at once — prior sample,
//! candidate-event loop, and posterior support — so every likelihood
//! evaluation is reused across all three. For each support event θ′,
//! hypothetical datasets are synthesized, the posterior over the same
//! support is formed by reweighting, and the KL divergence from the prior
//! is averaged:
//!
//! ```text
//! I(S | θ′) ≈ (1/n) Σ_j KL( p(θ | D_j, S) ‖ p(θ) ),   D_j ~ p(D | θ′, S)
//! I(S)      ≈ Σ_k w_k · I(S | θ_k)                     (importance weights)
//! ```
//!
//! Work is split into one task per (event, replicate) pair, each with a
//! pre-assigned RNG stream, and reduced in index order — results are
//! identical regardless of worker count.
//!
//! Datasets whose posterior mass underflows entirely (possible only when
//! the prior support is wildly inconsistent with the synthesized data)
//! are skipped and counted in the report rather than poisoning the
//! average; an event whose replicates *all* underflow is an error.

use serde::{Deserialize, Serialize};

use crate::arrivals::{covariance_from_parts, mvn_marginal_logpdf, station_correlation};
use crate::bundle::ModelBundle;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, great_circle_distance};
use crate::network::SensorNetwork;
use crate::priors::{Event, WeightedEventSet};
use crate::stats::{mean_and_sample_sd, normalize_log_weights};
use crate::synth::{SyntheticDataset, synth_one};

/// Posterior-concentration threshold above which the discrete support is
/// too coarse for the event data (most mass on a single grid point).
pub const POSTERIOR_MASS_WARN_THRESHOLD: f64 = 0.5;

/// A probability distribution over the events of a weighted support set.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution<'a> {
    support: &'a WeightedEventSet,
    probs: Vec<f64>,
}

impl<'a> DiscreteDistribution<'a> {
    /// The prior itself: normalized support weights.
    pub fn prior(support: &'a WeightedEventSet) -> Self {
        Self {
            support,
            probs: support.weights(),
        }
    }

    /// Normalizes unnormalized log weights into a distribution.
    pub fn from_log_weights(
        support: &'a WeightedEventSet,
        mut log_weights: Vec<f64>,
    ) -> Result<Self> {
        if log_weights.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: log_weights.len(),
            });
        }
        if log_weights.iter().all(|lw| *lw == f64::NEG_INFINITY) {
            return Err(Error::ZeroPosteriorMass);
        }
        normalize_log_weights(&mut log_weights)?;
        Ok(Self {
            support,
            probs: log_weights.iter().map(|lw| lw.exp()).collect(),
        })
    }

    /// Builds from already-normalized probabilities (sum 1 ± 1e-10, all ≥ 0).
    pub fn from_probs(support: &'a WeightedEventSet, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput(
                "distribution probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "distribution probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { support, probs })
    }

    /// The support this distribution lives on.
    pub fn support(&self) -> &'a WeightedEventSet {
        self.support
    }

    /// Per-event probabilities, aligned with the support's event order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Per-event sensitivity: how much a network is expected to learn about
/// an event at this location and magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    /// The candidate event θ′.
    pub event: Event,
    /// Expected information gain, nats.
    pub eig: f64,
    /// Monte Carlo standard error of `eig`, nats.
    pub mc_std_error: f64,
    /// Number of dataset realizations that entered the average.
    pub n_realizations: usize,
}

/// Settings snapshot embedded in every report for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigSettings {
    /// Support size (events in the grid and the θ′ loop).
    pub n_events: usize,
    /// Dataset realizations requested per event.
    pub n_realizations: usize,
    /// Base RNG seed.
    pub seed: u64,
    /// Number of stations in the analyzed network.
    pub n_stations: usize,
    /// Whether arrival times entered the likelihood (false = detection-only).
    pub use_arrivals: bool,
}

/// Network-level EIG with its per-event breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigReport {
    /// Importance-weighted average of the record eigs, nats.
    pub total_eig: f64,
    /// Pooled Monte Carlo standard error of `total_eig`, nats.
    pub total_mc_se: f64,
    /// Largest posterior mass any single support event received in any
    /// replicate — above [`POSTERIOR_MASS_WARN_THRESHOLD`] the grid is too
    /// coarse for the data and the KL estimates are biased.
    pub max_posterior_mass: f64,
    /// Datasets skipped because their posterior mass underflowed.
    pub zero_mass_datasets: usize,
    /// One record per support event, in support order.
    pub records: Vec<SensitivityRecord>,
    /// Run settings for provenance.
    pub settings: EigSettings,
}

/// One sensitivity-map row (CSV column order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub lat: f64,
    pub lon: f64,
    pub depth_km: f64,
    pub mag: f64,
    pub eig_nats: f64,
    pub mc_se_nats: f64,
}

// ---------------------------------------------------------------------------
// Precomputed per-(event, station) likelihood terms
// ---------------------------------------------------------------------------

/// Likelihood ingredients for one (support event, station) pair.
#[derive(Debug, Clone, Copy)]
struct StationTerms {
    /// log p(detect) under the detection model.
    lp_det: f64,
    /// log p(miss).
    lp_miss: f64,
    /// Predicted arrival mean, seconds (0 when arrivals are off).
    mu: f64,
    /// Travel-time model standard deviation, seconds.
    sigma_model: f64,
    /// Pick measurement standard deviation, seconds.
    sigma_meas: f64,
    /// Epicentral distance, km (kernel input).
    delta_km: f64,
}

/// Everything the hot loop needs, computed once per (support, network).
pub(crate) struct SupportContext<'a> {
    support: &'a WeightedEventSet,
    net: &'a SensorNetwork,
    bundle: &'a ModelBundle,
    /// `terms[k][i]`: support event k against station i.
    terms: Vec<Vec<StationTerms>>,
}

impl<'a> SupportContext<'a> {
    pub(crate) fn new(
        support: &'a WeightedEventSet,
        net: &'a SensorNetwork,
        bundle: &'a ModelBundle,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySet("EIG support"));
        }
        let terms = support
            .events()
            .iter()
            .map(|e| {
                net.stations
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        if bundle.use_arrivals {
                            let st = bundle.station_stats(e, s, i)?;
                            Ok(StationTerms {
                                lp_det: bundle.detection.log_prob_detect(
                                    st.delta_deg,
                                    e.depth_km,
                                    e.mag,
                                ),
                                lp_miss: bundle.detection.log_prob_miss(
                                    st.delta_deg,
                                    e.depth_km,
                                    e.mag,
                                ),
                                mu: st.mu,
                                sigma_model: st.sigma_model,
                                sigma_meas: st.sigma_meas,
                                delta_km: st.delta_km,
                            })
                        } else {
                            // Detection-only analysis never touches the
                            // travel-time surrogates, so events beyond the
                            // surrogate grid stay usable.
                            let delta_deg = great_circle_distance(e.loc, s.loc);
                            Ok(StationTerms {
                                lp_det: bundle.detection.log_prob_detect(
                                    delta_deg,
                                    e.depth_km,
                                    e.mag,
                                ),
                                lp_miss: bundle.detection.log_prob_miss(
                                    delta_deg,
                                    e.depth_km,
                                    e.mag,
                                ),
                                mu: 0.0,
                                sigma_model: 0.0,
                                sigma_meas: 0.0,
                                delta_km: crate::geo::degrees_to_km(delta_deg),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            support,
            net,
            bundle,
            terms,
        })
    }

    /// Unnormalized posterior log weights for one dataset, over the whole
    /// support; `None` when every weight underflowed to zero mass.
    fn posterior_log_weights(&self, ds: &SyntheticDataset) -> Result<Option<Vec<f64>>> {
        let flags = &ds.detections.flags;
        if flags.len() != self.net.len() {
            return Err(Error::DimensionMismatch {
                expected: self.net.len(),
                got: flags.len(),
            });
        }
        let det_idx: Vec<usize> = (0..flags.len()).filter(|&i| flags[i]).collect();
        let k_det = det_idx.len();
        let with_arrivals = self.bundle.use_arrivals && k_det >= 2;
        if with_arrivals && ds.arrivals.len() != k_det {
            return Err(Error::DimensionMismatch {
                expected: k_det,
                got: ds.arrivals.len(),
            });
        }

        // Correlation independent of the candidate event can be built once
        // per dataset; the epicentral-difference kernel cannot.
        let shared_corr = if with_arrivals {
            use crate::earthmodel::CorrelationMode;
            match self.bundle.correlation.mode {
                CorrelationMode::EpicentralDifference => None,
                _ => {
                    let locs: Vec<GeoPoint> = det_idx
                        .iter()
                        .map(|&i| self.net.stations[i].loc)
                        .collect();
                    Some(station_correlation(
                        &self.bundle.correlation,
                        &vec![0.0; k_det],
                        &locs,
                    ))
                }
            }
        } else {
            None
        };

        let mut lw = Vec::with_capacity(self.support.len());
        let mut scratch_deltas = vec![0.0; k_det];
        let mut scratch_model = vec![0.0; k_det];
        let mut scratch_meas = vec![0.0; k_det];
        for (k, terms) in self.terms.iter().enumerate() {
            let mut ll = self.support.log_weights()[k];
            for (i, t) in terms.iter().enumerate() {
                ll += if flags[i] { t.lp_det } else { t.lp_miss };
            }
            if with_arrivals {
                for (slot, &i) in det_idx.iter().enumerate() {
                    scratch_deltas[slot] = terms[i].delta_km;
                    scratch_model[slot] = terms[i].sigma_model;
                    scratch_meas[slot] = terms[i].sigma_meas;
                }
                let corr = match &shared_corr {
                    Some(c) => c.clone(),
                    None => {
                        let locs: Vec<GeoPoint> = det_idx
                            .iter()
                            .map(|&i| self.net.stations[i].loc)
                            .collect();
                        station_correlation(&self.bundle.correlation, &scratch_deltas, &locs)
                    }
                };
                let sigma = covariance_from_parts(&scratch_model, &scratch_meas, &corr);
                let residual = nalgebra::DVector::from_iterator(
                    k_det,
                    det_idx
                        .iter()
                        .enumerate()
                        .map(|(slot, &i)| ds.arrivals.times[slot] - terms[i].mu),
                );
                ll += mvn_marginal_logpdf(&residual, &sigma)?;
            }
            lw.push(ll);
        }
        if lw.iter().any(|w| w.is_nan()) {
            return Err(Error::InvalidInput(
                "posterior log weight is NaN".into(),
            ));
        }
        if lw.iter().all(|w| *w == f64::NEG_INFINITY) {
            return Ok(None);
        }
        Ok(Some(lw))
    }

    /// KL(posterior ‖ prior) for one dataset, plus the largest posterior
    /// mass on any single support event; `None` on posterior underflow.
    fn kl_against_prior(&self, ds: &SyntheticDataset) -> Result<Option<(f64, f64)>> {
        let Some(mut lw) = self.posterior_log_weights(ds)? else {
            return Ok(None);
        };
        normalize_log_weights(&mut lw)?;
        let prior_lw = self.support.log_weights();
        let mut kl = 0.0;
        let mut max_mass = 0.0f64;
        for (post_lw, p_lw) in lw.iter().zip(prior_lw) {
            let p = post_lw.exp();
            if p > 0.0 {
                kl += p * (post_lw - p_lw);
                max_mass = max_mass.max(p);
            }
        }
        // Gibbs' inequality guarantees KL ≥ 0; only rounding can dip below.
        Ok(Some((kl.max(0.0), max_mass)))
    }
}

// ---------------------------------------------------------------------------
// Deterministic parallel map
// ---------------------------------------------------------------------------

/// Order-preserving map over task indices; parallel when the `parallel`
/// feature is enabled. Combined with pre-assigned RNG streams and a
/// sequential reduction, results are identical for any worker count.
#[cfg(feature = "parallel")]
pub(crate) fn map_tasks<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is off.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_tasks<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Posterior over the support given one dataset:
/// `probs_k ∝ w_k · exp(detection loglik + marginal arrival loglik)`.
pub fn posterior_weights<'a>(
    ds: &SyntheticDataset,
    support: &'a WeightedEventSet,
    net: &SensorNetwork,
    bundle: &ModelBundle,
) -> Result<DiscreteDistribution<'a>> {
    let ctx = SupportContext::new(support, net, bundle)?;
    let lw = ctx
        .posterior_log_weights(ds)?
        .ok_or(Error::ZeroPosteriorMass)?;
    DiscreteDistribution::from_log_weights(support, lw)
}

/// `KL(post ‖ prior) = Σ_k post_k · ln(post_k / prior_k)` in nats, with
/// `0 · ln(0/q) = 0`. Both distributions must share a support; posterior
/// mass on a zero-prior event is an absolute-continuity violation.
pub fn kl_divergence(post: &DiscreteDistribution, prior: &DiscreteDistribution) -> Result<f64> {
    if post.probs.len() != prior.probs.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.probs.len(),
            got: post.probs.len(),
        });
    }
    let mut kl = 0.0;
    for (index, (&p, &q)) in post.probs.iter().zip(&prior.probs).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::AbsoluteContinuity { index });
        }
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

/// Internal accumulation for one support event.
struct EventAccumulator {
    kls: Vec<f64>,
    zero_mass: usize,
    max_mass: f64,
}

fn reduce_event(
    theta_prime: &Event,
    outcomes: Vec<Result<Option<(f64, f64)>>>,
) -> Result<(SensitivityRecord, usize, f64)> {
    let mut acc = EventAccumulator {
        kls: Vec::with_capacity(outcomes.len()),
        zero_mass: 0,
        max_mass: 0.0,
    };
    for outcome in outcomes {
        match outcome? {
            Some((kl, mass)) => {
                acc.kls.push(kl);
                acc.max_mass = acc.max_mass.max(mass);
            }
            None => acc.zero_mass += 1,
        }
    }
    if acc.kls.is_empty() {
        return Err(Error::ZeroPosteriorMass);
    }
    let n_used = acc.kls.len();
    let (mean, sd) = mean_and_sample_sd(&acc.kls);
    Ok((
        SensitivityRecord {
            event: *theta_prime,
            eig: mean,
            mc_std_error: sd / (n_used as f64).sqrt(),
            n_realizations: n_used,
        },
        acc.zero_mass,
        acc.max_mass,
    ))
}

/// Expected information gain about a single candidate event: the mean KL
/// divergence from prior to posterior over `n_realizations` hypothetical
/// datasets synthesized from `theta_prime`.
///
/// Replicate j draws from the (seed, lane 0, j) stream; inside
/// [`eig_total`] the lane is the support row index instead, so a
/// standalone call reproduces the first row of a total-EIG run.
pub fn eig_event(
    theta_prime: &Event,
    support: &WeightedEventSet,
    net: &SensorNetwork,
    bundle: &ModelBundle,
    n_realizations: usize,
    seed: u64,
) -> Result<SensitivityRecord> {
    if n_realizations == 0 {
        return Err(Error::InvalidInput(
            "n_realizations must be at least 1".into(),
        ));
    }
    let ctx = SupportContext::new(support, net, bundle)?;
    let outcomes = map_tasks(n_realizations, |j| {
        let mut rng = crate::rng::stream(seed, 0, j as u64);
        let ds = synth_one(theta_prime, net, bundle, &mut rng)?;
        ctx.kl_against_prior(&ds)
    });
    let (record, _, _) = reduce_event(theta_prime, outcomes)?;
    Ok(record)
}

pub(crate) fn eig_total_with_context(
    ctx: &SupportContext<'_>,
    n_realizations: usize,
    seed: u64,
) -> Result<EigReport> {
    if n_realizations == 0 {
        return Err(Error::InvalidInput(
            "n_realizations must be at least 1".into(),
        ));
    }
    let support = ctx.support;
    let net = ctx.net;
    let bundle = ctx.bundle;
    let n_events = support.len();

    // One task per (event, replicate): lane = event row, index = replicate.
    let mut outcomes = map_tasks(n_events * n_realizations, |t| {
        let (k, j) = (t / n_realizations, t % n_realizations);
        let mut rng = crate::rng::stream(seed, k as u64, j as u64);
        let ds = synth_one(&support.events()[k], net, bundle, &mut rng)?;
        ctx.kl_against_prior(&ds)
    });

    let mut records = Vec::with_capacity(n_events);
    let mut zero_mass_datasets = 0;
    let mut max_posterior_mass = 0.0f64;
    for (k, theta_prime) in support.events().iter().enumerate().rev() {
        let event_outcomes = outcomes.split_off(k * n_realizations);
        let (record, zeros, mass) = reduce_event(theta_prime, event_outcomes)?;
        records.push(record);
        zero_mass_datasets += zeros;
        max_posterior_mass = max_posterior_mass.max(mass);
    }
    records.reverse();

    let weights = support.weights();
    let total_eig: f64 = records
        .iter()
        .zip(&weights)
        .map(|(r, w)| w * r.eig)
        .sum();
    let total_mc_se: f64 = records
        .iter()
        .zip(&weights)
        .map(|(r, w)| (w * r.mc_std_error).powi(2))
        .sum::<f64>()
        .sqrt();

    Ok(EigReport {
        total_eig,
        total_mc_se,
        max_posterior_mass,
        zero_mass_datasets,
        records,
        settings: EigSettings {
            n_events,
            n_realizations,
            seed,
            n_stations: net.len(),
            use_arrivals: bundle.use_arrivals,
        },
    })
}

/// Network-level EIG: the importance-weighted average of [`eig_event`]
/// over every support event, reusing the support as the inference grid.
pub fn eig_total(
    support: &WeightedEventSet,
    net: &SensorNetwork,
    bundle: &ModelBundle,
    n_realizations: usize,
    seed: u64,
) -> Result<EigReport> {
    let ctx = SupportContext::new(support, net, bundle)?;
    eig_total_with_context(&ctx, n_realizations, seed)
}

/// Flattens a report into sensitivity-map rows, one per support event.
pub fn sensitivity_map(report: &EigReport) -> Vec<SensitivityRow> {
    report
        .records
        .iter()
        .map(|r| SensitivityRow {
            lat: r.event.loc.lat,
            lon: r.event.loc.lon,
            depth_km: r.event.depth_km,
            mag: r.event.mag,
            eig_nats: r.eig,
            mc_se_nats: r.mc_std_error,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::arrival_loglik_marginal;
    use crate::detection::{DetectionModel, detection_loglik, detection_probability};
    use crate::earthmodel::{CorrelationMode, SurrogateGrid, synthetic_ensemble};
    use crate::geo::Domain;
    use crate::network::Station;
    use crate::priors::PriorSpec;
    use crate::synth::synth_dataset;

    fn test_bundle() -> ModelBundle {
        ModelBundle::from_ensemble(
            synthetic_ensemble(24, 5).unwrap(),
            &SurrogateGrid::default(),
        )
        .unwrap()
    }

    fn station(lat: f64, lon: f64) -> Station {
        Station {
            loc: GeoPoint { lat, lon },
            snr_offset: 0.0,
        }
    }

    fn event(lat: f64, lon: f64) -> Event {
        Event {
            loc: GeoPoint { lat, lon },
            depth_km: 8.0,
            mag: 2.5,
        }
    }

    /// Steep distance cutoff: a station detects (only) a co-located event.
    fn identifying_detection() -> DetectionModel {
        DetectionModel {
            alpha: -50.0,
            beta: 0.0,
            gamma_m: 0.0,
            delta0: 25.0,
        }
    }

    /// K well-separated events, each with its own co-located station, and
    /// a detection model sharp enough to identify the source exactly.
    fn identifying_setup(k: usize) -> (WeightedEventSet, SensorNetwork, ModelBundle) {
        let events: Vec<Event> = (0..k).map(|i| event(34.0 + 3.0 * i as f64, -110.0)).collect();
        let net = SensorNetwork::new(
            events
                .iter()
                .map(|e| station(e.loc.lat, e.loc.lon))
                .collect(),
        )
        .unwrap();
        let support = WeightedEventSet::new(events, vec![0.0; k]).unwrap();
        let mut bundle = test_bundle();
        bundle.detection = identifying_detection();
        bundle.use_arrivals = false;
        (support, net, bundle)
    }

    #[test]
    fn prior_distribution_is_normalized() {
        let support = WeightedEventSet::new(
            vec![event(40.0, -110.0), event(41.0, -110.0), event(42.0, -110.0)],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let prior = DiscreteDistribution::prior(&support);
        assert!((prior.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(prior.probs().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn from_log_weights_matches_hand_normalization() {
        let support = WeightedEventSet::new(
            vec![event(40.0, -110.0), event(41.0, -110.0), event(42.0, -110.0)],
            vec![0.0; 3],
        )
        .unwrap();
        let lw = vec![-1.25, 0.5, -3.0];
        let dist = DiscreteDistribution::from_log_weights(&support, lw.clone()).unwrap();
        let z: f64 = lw.iter().map(|w| w.exp()).sum();
        for (p, w) in dist.probs().iter().zip(&lw) {
            assert!((p - w.exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_from_one_surviving_weight() {
        let support = WeightedEventSet::new(
            vec![event(40.0, -110.0), event(41.0, -110.0), event(42.0, -110.0)],
            vec![0.0; 3],
        )
        .unwrap();
        let dist = DiscreteDistribution::from_log_weights(
            &support,
            vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY],
        )
        .unwrap();
        assert_eq!(dist.probs(), &[1.0, 0.0, 0.0]);
        assert!(matches!(
            DiscreteDistribution::from_log_weights(&support, vec![f64::NEG_INFINITY; 3]),
            Err(Error::ZeroPosteriorMass)
        ));
    }

    #[test]
    fn posterior_equals_prior_when_events_are_indistinguishable() {
        // Identical support events ⇒ equal likelihoods ⇒ the data cannot
        // move the prior, whatever its weights.
        let bundle = test_bundle();
        let net = SensorNetwork::new(vec![station(40.5, -110.0), station(41.2, -109.5)]).unwrap();
        let e = event(40.8, -110.2);
        let support = WeightedEventSet::new(vec![e; 4], vec![0.1, 1.4, -0.3, 0.9]).unwrap();
        let ds = &synth_dataset(&e, &net, &bundle, 1, 7).unwrap()[0];
        let post = posterior_weights(ds, &support, &net, &bundle).unwrap();
        let prior = DiscreteDistribution::prior(&support);
        for (p, q) in post.probs().iter().zip(prior.probs()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_matches_direct_likelihood_evaluation() {
        // Hand oracle: recompute each support weight with the public
        // likelihood functions and normalize exhaustively.
        let bundle = test_bundle();
        let net = SensorNetwork::new(vec![
            station(40.5, -110.0),
            station(41.2, -109.5),
            station(40.9, -110.7),
        ])
        .unwrap();
        let support = WeightedEventSet::new(
            vec![event(40.8, -110.2), event(41.0, -109.8), event(40.4, -110.4)],
            vec![0.2, -0.1, 0.7],
        )
        .unwrap();
        let ds = &synth_dataset(&event(40.8, -110.2), &net, &bundle, 1, 3).unwrap()[0];
        let post = posterior_weights(ds, &support, &net, &bundle).unwrap();

        let lw: Vec<f64> = support
            .events()
            .iter()
            .enumerate()
            .map(|(k, e)| {
                support.log_weights()[k]
                    + detection_loglik(&bundle.detection, &ds.detections, e, &net).unwrap()
                    + arrival_loglik_marginal(&ds.arrivals, e, &ds.detections, &net, &bundle)
                        .unwrap()
            })
            .collect();
        let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lw.iter().map(|w| (w - m).exp()).sum();
        for (p, w) in post.probs().iter().zip(&lw) {
            assert!((p - (w - m).exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let support = WeightedEventSet::new(
            vec![event(40.0, -110.0), event(41.0, -110.0)],
            vec![0.3, -0.6],
        )
        .unwrap();
        let prior = DiscreteDistribution::prior(&support);
        assert_eq!(kl_divergence(&prior, &prior).unwrap(), 0.0);
    }

    #[test]
    fn kl_point_mass_against_uniform_is_ln2() {
        let support = WeightedEventSet::new(
            vec![event(40.0, -110.0), event(41.0, -110.0)],
            vec![0.0, 0.0],
        )
        .unwrap();
        let prior = DiscreteDistribution::prior(&support);
        let post = DiscreteDistribution::from_probs(&support, vec![1.0, 0.0]).unwrap();
        assert!((kl_divergence(&post, &prior).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_over_random_pairs() {
        let support = WeightedEventSet::new(vec![event(40.0, -110.0); 6], vec![0.0; 6]).unwrap();
        for trial in 0..1000u64 {
            let mut rng = crate::rng::stream(41, 7, trial);
            let mut draw = || {
                use rand::Rng;
                let mut v: Vec<f64> = (0..6).map(|_| rng.r#gen::<f64>() + 1e-3).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            };
            let post = DiscreteDistribution::from_probs(&support, draw()).unwrap();
            let prior = DiscreteDistribution::from_probs(&support, draw()).unwrap();
            assert!(kl_divergence(&post, &prior).unwrap() >= 0.0);
        }
    }

    #[test]
    fn kl_detects_absolute_continuity_violations() {
        let support =
            WeightedEventSet::new(vec![event(40.0, -110.0); 2], vec![0.0, 0.0]).unwrap();
        let post = DiscreteDistribution::from_probs(&support, vec![0.5, 0.5]).unwrap();
        let prior = DiscreteDistribution::from_probs(&support, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            kl_divergence(&post, &prior),
            Err(Error::AbsoluteContinuity { index: 1 })
        ));
    }

    #[test]
    fn single_event_support_gains_nothing() {
        let bundle = test_bundle();
        let net = SensorNetwork::new(vec![station(40.5, -110.0)]).unwrap();
        let e = event(40.8, -110.2);
        let support = WeightedEventSet::new(vec![e], vec![0.0]).unwrap();
        let rec = eig_event(&e, &support, &net, &bundle, 16, 11).unwrap();
        assert_eq!(rec.eig, 0.0);
        assert_eq!(rec.mc_std_error, 0.0);
        let report = eig_total(&support, &net, &bundle, 16, 11).unwrap();
        assert_eq!(report.total_eig, 0.0);
    }

    #[test]
    fn identifying_likelihood_yields_ln_k() {
        for k in [2usize, 4] {
            let (support, net, bundle) = identifying_setup(k);
            let rec = eig_event(&support.events()[0], &support, &net, &bundle, 64, 19).unwrap();
            assert!(
                (rec.eig - (k as f64).ln()).abs() < 1e-6,
                "k={k}: eig {} vs ln k {}",
                rec.eig,
                (k as f64).ln()
            );
            assert!(rec.mc_std_error < 1e-6);
        }
    }

    #[test]
    fn two_identified_events_average_to_ln2() {
        let (support, net, bundle) = identifying_setup(2);
        let report = eig_total(&support, &net, &bundle, 32, 23).unwrap();
        for rec in &report.records {
            assert!((rec.eig - std::f64::consts::LN_2).abs() < 1e-6);
        }
        assert!((report.total_eig - std::f64::consts::LN_2).abs() < 1e-6);
        let weighted: f64 = report
            .records
            .iter()
            .zip(support.weights())
            .map(|(r, w)| w * r.eig)
            .sum();
        assert!((report.total_eig - weighted).abs() < 1e-12);
    }

    #[test]
    fn detection_only_toy_matches_exhaustive_enumeration() {
        // 3 events, 2 stations, detection-only: 4 possible datasets, so
        // the exact EIG is a finite sum we can enumerate by hand.
        let mut bundle = test_bundle();
        bundle.use_arrivals = false;
        let net = SensorNetwork::new(vec![station(40.2, -110.1), station(41.5, -109.4)]).unwrap();
        let support = WeightedEventSet::new(
            vec![event(40.3, -110.0), event(41.2, -109.6), event(40.9, -110.5)],
            vec![0.0; 3],
        )
        .unwrap();
        let theta_prime = &support.events()[1];
        let prior = DiscreteDistribution::prior(&support);

        // p(detect at station i | event k) for all pairs.
        let p: Vec<Vec<f64>> = support
            .events()
            .iter()
            .map(|e| {
                net.stations
                    .iter()
                    .map(|s| detection_probability(&bundle.detection, e, s.loc))
                    .collect()
            })
            .collect();
        let mut exact = 0.0;
        for pattern in 0..4u32 {
            let flags = [(pattern & 1) != 0, (pattern & 2) != 0];
            let lik = |k: usize| -> f64 {
                (0..2)
                    .map(|i| if flags[i] { p[k][i] } else { 1.0 - p[k][i] })
                    .product()
            };
            let p_data = lik(1);
            let z: f64 = (0..3).map(|k| lik(k) / 3.0).sum();
            let probs: Vec<f64> = (0..3).map(|k| lik(k) / 3.0 / z).collect();
            let post = DiscreteDistribution::from_probs(&support, probs).unwrap();
            exact += p_data * kl_divergence(&post, &prior).unwrap();
        }

        let rec = eig_event(theta_prime, &support, &net, &bundle, 4096, 31).unwrap();
        assert!(
            (rec.eig - exact).abs() < 2.0 * rec.mc_std_error,
            "MC {} ± {} vs exact {}",
            rec.eig,
            rec.mc_std_error,
            exact
        );
    }

    #[test]
    fn eig_event_is_invariant_to_support_permutation() {
        let bundle = test_bundle();
        let net = SensorNetwork::new(vec![station(40.5, -110.0), station(41.2, -109.5)]).unwrap();
        let events = vec![
            event(40.3, -110.0),
            event(41.2, -109.6),
            event(40.9, -110.5),
            event(40.6, -109.8),
        ];
        let weights = vec![0.4, -0.2, 0.1, 0.6];
        let support = WeightedEventSet::new(events.clone(), weights.clone()).unwrap();
        let perm = [2usize, 0, 3, 1];
        let support_perm = WeightedEventSet::new(
            perm.iter().map(|&i| events[i]).collect(),
            perm.iter().map(|&i| weights[i]).collect(),
        )
        .unwrap();
        let theta = &events[1];
        let a = eig_event(theta, &support, &net, &bundle, 24, 43).unwrap();
        let b = eig_event(theta, &support_perm, &net, &bundle, 24, 43).unwrap();
        assert!((a.eig - b.eig).abs() <= 1e-12 * a.eig.abs().max(1.0));
        assert!((a.mc_std_error - b.mc_std_error).abs() <= 1e-12);
    }

    #[test]
    fn mc_error_shrinks_like_inverse_sqrt_n() {
        let mut bundle = test_bundle();
        bundle.use_arrivals = false;
        let net = SensorNetwork::new(vec![station(40.2, -110.1), station(41.5, -109.4)]).unwrap();
        let support = WeightedEventSet::new(
            vec![event(40.3, -110.0), event(41.2, -109.6), event(40.9, -110.5)],
            vec![0.0; 3],
        )
        .unwrap();
        let theta = &support.events()[0];
        let mut se_small = 0.0;
        let mut se_large = 0.0;
        for rep in 0..10u64 {
            se_small += eig_event(theta, &support, &net, &bundle, 64, 100 + rep)
                .unwrap()
                .mc_std_error;
            se_large += eig_event(theta, &support, &net, &bundle, 128, 100 + rep)
                .unwrap()
                .mc_std_error;
        }
        let ratio = se_large / se_small;
        let target = std::f64::consts::FRAC_1_SQRT_2;
        assert!(
            (ratio - target).abs() < 0.2 * target,
            "se ratio {ratio} vs {target}"
        );
    }

    #[test]
    fn more_sensors_never_hurt_with_independent_errors() {
        let mut bundle = test_bundle();
        bundle.correlation.mode = CorrelationMode::Independent;
        let domain = Domain {
            lat_min: 40.0,
            lat_max: 41.5,
            lon_min: -110.5,
            lon_max: -109.0,
            depth_min: 0.0,
            depth_max: 30.0,
            mag_min: 0.5,
            mag_max: 5.0,
        };
        let support = crate::priors::qmc_event_set(&PriorSpec::uniform(domain), 48, 2).unwrap();
        let stations = [
            station(40.3, -110.2),
            station(41.1, -109.4),
            station(40.8, -109.9),
        ];
        let mut totals = Vec::new();
        let mut ses = Vec::new();
        for n in 1..=3 {
            let net = SensorNetwork::new(stations[..n].to_vec()).unwrap();
            let report = eig_total(&support, &net, &bundle, 24, 57).unwrap();
            totals.push(report.total_eig);
            ses.push(report.total_mc_se);
        }
        for i in 1..totals.len() {
            let pooled = (ses[i].powi(2) + ses[i - 1].powi(2)).sqrt();
            assert!(
                totals[i] >= totals[i - 1] - 3.0 * pooled,
                "adding sensor {i} decreased EIG: {totals:?}"
            );
        }
        let gain1 = totals[1] - totals[0];
        let gain2 = totals[2] - totals[1];
        let pooled: f64 = ses.iter().map(|s| s.powi(2)).sum::<f64>().sqrt();
        assert!(
            gain2 <= gain1 + 3.0 * pooled,
            "marginal gains increased: {gain1} then {gain2}"
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn results_are_identical_for_any_worker_count() {
        let bundle = test_bundle();
        let net = SensorNetwork::new(vec![
            station(40.5, -110.0),
            station(41.2, -109.5),
            station(40.9, -110.7),
        ])
        .unwrap();
        let domain = Domain {
            lat_min: 40.0,
            lat_max: 41.5,
            lon_min: -110.5,
            lon_max: -109.0,
            depth_min: 0.0,
            depth_max: 30.0,
            mag_min: 0.5,
            mag_max: 5.0,
        };
        let support = crate::priors::qmc_event_set(&PriorSpec::uniform(domain), 32, 9).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| eig_total(&support, &net, &bundle, 8, 77).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }

    #[test]
    fn sensitivity_rows_mirror_the_records() {
        let (support, net, bundle) = identifying_setup(3);
        let report = eig_total(&support, &net, &bundle, 16, 5).unwrap();
        let rows = sensitivity_map(&report);
        assert_eq!(rows.len(), support.len());
        for (row, rec) in rows.iter().zip(&report.records) {
            assert_eq!(row.lat, rec.event.loc.lat);
            assert_eq!(row.eig_nats, rec.eig);
        }
        // Equal importance weights: the plain mean of rows reproduces the
        // reported total.
        let mean = rows.iter().map(|r| r.eig_nats).sum::<f64>() / rows.len() as f64;
        assert!((mean - report.total_eig).abs() < 1e-12);
    }

    #[test]
    fn zero_prior_weight_events_never_gain_posterior_mass() {
        let bundle = test_bundle();
        let net = SensorNetwork::new(vec![station(40.5, -110.0)]).unwrap();
        let e = event(40.8, -110.2);
        let support = WeightedEventSet::new(
            vec![e, event(41.0, -109.8)],
            vec![0.0, f64::NEG_INFINITY],
        )
        .unwrap();
        let ds = &synth_dataset(&e, &net, &bundle, 1, 13).unwrap()[0];
        let post = posterior_weights(ds, &support, &net, &bundle).unwrap();
        assert_eq!(post.probs()[1], 0.0);
        assert!((post.probs()[0] - 1.0).abs() < 1e-12);
    }
}
