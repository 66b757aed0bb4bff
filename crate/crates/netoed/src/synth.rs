//! Generative sampling of hypothetical datasets: which stations detect a
//! candidate event, and what arrival times they report.
//!
//! Sampling follows the same models the likelihood evaluates — Bernoulli
//! detections from the logistic model, then arrivals `μ + t_o·1 + L z` with
//! `L` the Cholesky factor of the assembled covariance — so synthesized
//! data and likelihood agree by construction. The origin time is fixed at
//! zero: the marginalized likelihood is shift-invariant, so any other
//! choice produces identical posteriors.
//!
//! Draws are keyed by (seed, lane, replicate index) through
//! [`crate::rng::stream`], one stream per replicate: results never depend
//! on evaluation order, and a network extended by one trailing station
//! replays identical draws for the shared prefix (common random numbers
//! for the placement optimizer). To keep that alignment, one detection
//! uniform and one arrival normal are drawn per station — in station
//! order — and the normals of non-detecting stations are simply unused.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arrivals::{ArrivalVector, assemble_covariance};
use crate::bundle::ModelBundle;
use crate::detection::{DetectionModel, DetectionVector, detection_probability};
use crate::error::Result;
use crate::network::SensorNetwork;
use crate::priors::Event;

/// Default number of hypothetical data realizations per candidate event.
pub const DEFAULT_N_REALIZATIONS: usize = 32;

/// Stream lane for standalone dataset synthesis (see [`crate::rng::stream`]).
const SYNTH_LANE: u64 = 0x53_59_4e_54_48; // "SYNTH"

/// One hypothetical dataset for a candidate event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    /// Per-station detection flags.
    pub detections: DetectionVector,
    /// Arrival times of the detecting stations, in station order.
    pub arrivals: ArrivalVector,
    /// Origin time used during synthesis (bookkeeping only; always 0 in
    /// the shipped pipeline).
    pub origin_time_used: f64,
}

/// Independent Bernoulli detection draw per station.
pub fn sample_detections(
    e: &Event,
    net: &SensorNetwork,
    dm: &DetectionModel,
    rng: &mut impl Rng,
) -> DetectionVector {
    let flags = net
        .stations
        .iter()
        .map(|s| rng.r#gen::<f64>() < detection_probability(dm, e, s.loc))
        .collect();
    DetectionVector::new(flags)
}

/// Lower-triangular factor `L` with `L·Lᵀ = Σ`, accepting positive
/// *semi*definite input: a zero pivot is fine when the rest of its column
/// vanishes with it (perfectly correlated stations collapse to rank
/// deficiency — their draws must coincide exactly, not blow up).
/// Production covariances carry a nugget and never hit that branch.
pub(crate) fn psd_triangular_factor(
    sigma: &nalgebra::DMatrix<f64>,
) -> Result<nalgebra::DMatrix<f64>> {
    let n = sigma.nrows();
    let tol = sigma.diagonal().amax() * 1e-12;
    let mut l = nalgebra::DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let residual = |i: usize, l: &nalgebra::DMatrix<f64>| {
            let mut v = sigma[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            v
        };
        let d = residual(j, &l);
        if d > tol {
            let root = d.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..n {
                l[(i, j)] = residual(i, &l) / root;
            }
        } else if d >= -tol {
            for i in (j + 1)..n {
                if residual(i, &l).abs() > tol {
                    return Err(crate::error::Error::SingularCovariance(format!(
                        "synthesis covariance has a zero variance pivot at {j} \
                         but nonzero covariance with station {i}"
                    )));
                }
            }
        } else {
            return Err(crate::error::Error::SingularCovariance(format!(
                "synthesis covariance is indefinite (pivot {d:.3e} at {j})"
            )));
        }
    }
    Ok(l)
}

/// Draws a zero-mean sample from N(0, Σ) via the triangular factor,
/// feeding it one standard normal per entry of `z`.
pub(crate) fn correlated_normals(
    sigma: &nalgebra::DMatrix<f64>,
    z: nalgebra::DVector<f64>,
) -> Result<nalgebra::DVector<f64>> {
    Ok(psd_triangular_factor(sigma)? * z)
}

/// Samples arrival times for the detecting stations of `d`, at origin time
/// `t_o`: `A = μ + t_o·1 + L z`. Consumes one normal per station (not per
/// detection) so draws stay aligned across networks sharing a prefix;
/// returns an empty vector when nothing detected.
pub fn sample_arrivals(
    e: &Event,
    d: &DetectionVector,
    net: &SensorNetwork,
    bundle: &ModelBundle,
    t_o: f64,
    rng: &mut impl Rng,
) -> Result<ArrivalVector> {
    let z_all: Vec<f64> = (0..net.len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let k = d.count_detected();
    if k == 0 {
        return Ok(ArrivalVector::new(Vec::new()));
    }
    let cov = assemble_covariance(e, net, d, bundle)?;
    let z = nalgebra::DVector::from_iterator(
        k,
        d.flags
            .iter()
            .zip(&z_all)
            .filter(|(flag, _)| **flag)
            .map(|(_, z)| *z),
    );
    let noise = correlated_normals(&cov.sigma, z)?;

    let mut times = Vec::with_capacity(k);
    let mut j = 0;
    for (i, (flag, station)) in d.flags.iter().zip(&net.stations).enumerate() {
        if !flag {
            continue;
        }
        let stats = bundle.station_stats(e, station, i)?;
        times.push(stats.mu + t_o + noise[j]);
        j += 1;
    }
    Ok(ArrivalVector::new(times))
}

/// One full dataset draw (detections then arrivals) from a caller-supplied
/// stream, at origin time zero. Bundles configured for detection-only
/// analysis (`use_arrivals = false`) skip arrival synthesis, mirroring the
/// likelihood they will be scored with.
pub(crate) fn synth_one(
    e: &Event,
    net: &SensorNetwork,
    bundle: &ModelBundle,
    rng: &mut impl Rng,
) -> Result<SyntheticDataset> {
    let detections = sample_detections(e, net, &bundle.detection, rng);
    let arrivals = if bundle.use_arrivals {
        sample_arrivals(e, &detections, net, bundle, 0.0, rng)?
    } else {
        ArrivalVector::new(Vec::new())
    };
    Ok(SyntheticDataset {
        detections,
        arrivals,
        origin_time_used: 0.0,
    })
}

/// Draws `n_realizations` independent hypothetical datasets for `e`.
/// Replicate `j` uses its own (seed, j)-keyed stream, so results are
/// reproducible and independent of evaluation order.
pub fn synth_dataset(
    e: &Event,
    net: &SensorNetwork,
    bundle: &ModelBundle,
    n_realizations: usize,
    seed: u64,
) -> Result<Vec<SyntheticDataset>> {
    (0..n_realizations)
        .map(|j| {
            let mut rng = crate::rng::stream(seed, SYNTH_LANE, j as u64);
            synth_one(e, net, bundle, &mut rng)
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
    use crate::detection::detection_loglik;
    use crate::earthmodel::{SurrogateGrid, synthetic_ensemble};
    use crate::geo::GeoPoint;
    use crate::network::Station;
    use nalgebra::{DMatrix, DVector};

    fn test_bundle() -> ModelBundle {
        ModelBundle::from_ensemble(
            synthetic_ensemble(24, 5).unwrap(),
            &SurrogateGrid::default(),
        )
        .unwrap()
    }

    fn five_station_net() -> SensorNetwork {
        let coords = [
            (40.2, -110.0),
            (41.0, -110.8),
            (41.6, -109.2),
            (40.6, -109.0),
            (41.3, -110.1),
        ];
        SensorNetwork::new(
            coords
                .iter()
                .map(|&(lat, lon)| Station {
                    loc: GeoPoint { lat, lon },
                    snr_offset: 0.0,
                })
                .collect(),
        )
        .unwrap()
    }

    fn test_event() -> Event {
        Event {
            loc: GeoPoint { lat: 40.8, lon: -110.2 },
            depth_km: 10.0,
            mag: 2.8,
        }
    }

    #[test]
    fn forced_probabilities_force_the_flags() {
        let net = five_station_net();
        let e = test_event();
        let mut rng = crate::rng::stream(1, 0, 0);
        let sure = DetectionModel {
            alpha: 0.0,
            beta: 0.0,
            gamma_m: 0.0,
            delta0: 1e3,
        };
        assert!(
            sample_detections(&e, &net, &sure, &mut rng)
                .flags
                .iter()
                .all(|&f| f)
        );
        let never = DetectionModel {
            delta0: -1e3,
            ..sure
        };
        assert!(
            sample_detections(&e, &net, &never, &mut rng)
                .flags
                .iter()
                .all(|&f| !f)
        );
    }

    #[test]
    fn detection_rates_match_the_model_probabilities() {
        let net = five_station_net();
        let e = test_event();
        let dm = DetectionModel::default();
        let n = 10_000usize;
        let mut counts = vec![0usize; net.len()];
        for j in 0..n {
            let mut rng = crate::rng::stream(17, 0, j as u64);
            for (i, flag) in sample_detections(&e, &net, &dm, &mut rng).flags.iter().enumerate() {
                counts[i] += usize::from(*flag);
            }
        }
        for (i, s) in net.stations.iter().enumerate() {
            let p = detection_probability(&dm, &e, s.loc);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let rate = counts[i] as f64 / n as f64;
            assert!(
                (rate - p).abs() < 3.0 * se.max(1e-4),
                "station {i}: rate {rate} vs p {p}"
            );
        }
    }

    #[test]
    fn nugget_only_covariance_pins_draws_to_the_mean() {
        // Σ = 1e-6·I: draws live within a few milliseconds of zero.
        let sigma = DMatrix::<f64>::identity(3, 3) * 1e-6;
        for j in 0..100 {
            let mut rng = crate::rng::stream(3, 0, j);
            let z = DVector::<f64>::from_fn(3, |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let noise = correlated_normals(&sigma, z).unwrap();
            assert!(noise.amax() < 3.0e-3 * 3.0);
        }
    }

    #[test]
    fn perfectly_correlated_stations_share_their_residual() {
        // Exactly rank-one covariance, no nugget: both entries must carry
        // the same draw.
        let s = 0.7f64;
        let sigma = DMatrix::<f64>::from_element(2, 2, s * s);
        for j in 0..100 {
            let mut rng = crate::rng::stream(5, 1, j);
            let z = DVector::<f64>::from_fn(2, |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let noise = correlated_normals(&sigma, z).unwrap();
            assert!((noise[0] - noise[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_arrival_covariance_matches_sigma() {
        let bundle = test_bundle();
        let net = SensorNetwork::new(five_station_net().stations[..3].to_vec()).unwrap();
        let e = test_event();
        let d = DetectionVector::new(vec![true, true, true]);
        let cov = assemble_covariance(&e, &net, &d, &bundle).unwrap();
        let mus: Vec<f64> = (0..3)
            .map(|i| bundle.station_stats(&e, &net.stations[i], i).unwrap().mu)
            .collect();

        let n = 10_000usize;
        let mut sum = [0.0f64; 3];
        let mut cross = [[0.0f64; 3]; 3];
        for j in 0..n {
            let mut rng = crate::rng::stream(29, 2, j as u64);
            let a = sample_arrivals(&e, &d, &net, &bundle, 0.0, &mut rng).unwrap();
            let r: Vec<f64> = (0..3).map(|i| a.times[i] - mus[i]).collect();
            for i in 0..3 {
                sum[i] += r[i];
                for k in 0..3 {
                    cross[i][k] += r[i] * r[k];
                }
            }
        }
        for i in 0..3 {
            for k in 0..3 {
                let emp = cross[i][k] / n as f64 - (sum[i] / n as f64) * (sum[k] / n as f64);
                let truth = cov.sigma[(i, k)];
                assert!(
                    (emp - truth).abs() / truth.abs() < 0.05,
                    "({i},{k}): empirical {emp} vs {truth}"
                );
            }
        }
    }

    #[test]
    fn datasets_are_reproducible_and_replicates_differ() {
        let bundle = test_bundle();
        let net = five_station_net();
        let e = test_event();
        let a = synth_dataset(&e, &net, &bundle, 32, 99).unwrap();
        let b = synth_dataset(&e, &net, &bundle, 32, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 32);
        let distinct = a
            .iter()
            .zip(&a[1..])
            .filter(|(x, y)| x != y)
            .count();
        assert!(distinct > 0, "replicates must differ");
        for ds in &a {
            assert_eq!(ds.arrivals.len(), ds.detections.count_detected());
            assert_eq!(ds.origin_time_used, 0.0);
        }
    }

    #[test]
    fn appending_a_station_replays_the_shared_prefix() {
        let bundle = test_bundle();
        let net = five_station_net();
        let bigger = net.with_station(GeoPoint { lat: 40.9, lon: -109.6 }, 0.0);
        let e = test_event();
        let base = synth_dataset(&e, &net, &bundle, 16, 4).unwrap();
        let ext = synth_dataset(&e, &bigger, &bundle, 16, 4).unwrap();
        for (a, b) in base.iter().zip(&ext) {
            assert_eq!(a.detections.flags, b.detections.flags[..5]);
        }
    }

    #[test]
    fn likelihood_prefers_the_generating_event() {
        // Generative model and likelihood must agree: data synthesized at
        // the true event scores higher (on average) than at a displaced
        // event.
        let bundle = test_bundle();
        let net = five_station_net();
        let truth = test_event();
        let displaced = Event {
            loc: GeoPoint {
                lat: truth.loc.lat + 1.0,
                lon: truth.loc.lon,
            },
            ..truth
        };
        let datasets = synth_dataset(&truth, &net, &bundle, 500, 12).unwrap();
        let mut margin = 0.0;
        for ds in &datasets {
            let at = |e: &Event| -> f64 {
                detection_loglik(&bundle.detection, &ds.detections, e, &net).unwrap()
                    + arrival_loglik_marginal(&ds.arrivals, e, &ds.detections, &net, &bundle)
                        .unwrap()
            };
            margin += at(&truth) - at(&displaced);
        }
        assert!(
            margin / 500.0 > 0.0,
            "mean log-likelihood margin {} must favor the truth",
            margin / 500.0
        );
    }
}
