//! Browser bindings for the netoed library.
//!
//! Every export takes a JSON request string and returns a JSON response
//! string, so a page can drive the module with `JSON.stringify` and
//! `JSON.parse` alone — no generated TypeScript, no framework. The logic
//! lives in plain `*_impl` functions that compile and run on any target
//! (`cargo test` exercises them natively); the `#[wasm_bindgen]` exports
//! are one-line wrappers that surface errors as JavaScript exceptions.
//!
//! Three operations are exposed:
//!
//! * [`model_curves`] — detection probability, expected SNR, and pick noise
//!   as a function of epicentral distance (cheap; safe to call per slider
//!   tick).
//! * [`sensitivity`] — per-event expected information gain over a prior
//!   sample for a given network (the sensitivity map behind `netoed
//!   analyze`, at demo scale).
//! * [`propose_sensor`] — one greedy Bayesian-optimization step proposing
//!   where the next sensor should go (the first step of `netoed optimize`).
//!
//! All three are deterministic in the request: identical JSON in, identical
//! JSON out, in the browser and in native tests alike.

use std::cell::RefCell;
use std::rc::Rc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use netoed::arrivals::{PickNoiseModel, SnrModel, sigma_meas, snr_mean};
use netoed::bundle::ModelBundle;
use netoed::detection::DetectionModel;
use netoed::eig::{eig_total, sensitivity_map};
use netoed::geo::{Domain, GeoPoint, KM_PER_DEGREE, PlacementRegion};
use netoed::network::{SensorNetwork, Station};
use netoed::optimize::{PlacementOptions, greedy_place};
use netoed::priors::{PriorSpec, default_mag_rate, qmc_event_set};

/// Seed for the shared demo model bundle (velocity-model ensemble,
/// travel-time surrogates, correlation fit). Fixed so every page load and
/// every native test sees the same physics.
const DEMO_BUNDLE_SEED: u64 = 3;

thread_local! {
    /// The demo bundle is ~a second of surrogate fitting; build it once per
    /// thread (wasm has exactly one) and hand out cheap clones.
    static DEMO_BUNDLE: RefCell<Option<Rc<ModelBundle>>> = const { RefCell::new(None) };
}

fn demo_bundle(use_arrivals: Option<bool>) -> Result<ModelBundle, String> {
    let base = DEMO_BUNDLE.with(|cell| -> Result<Rc<ModelBundle>, String> {
        let mut slot = cell.borrow_mut();
        if let Some(b) = slot.as_ref() {
            return Ok(Rc::clone(b));
        }
        let built = Rc::new(
            ModelBundle::synthetic_default(DEMO_BUNDLE_SEED).map_err(|e| e.to_string())?,
        );
        *slot = Some(Rc::clone(&built));
        Ok(built)
    })?;
    let mut bundle = (*base).clone();
    if let Some(flag) = use_arrivals {
        bundle.use_arrivals = flag;
    }
    Ok(bundle)
}

fn parse_request<T: DeserializeOwned>(input: &str, op: &str) -> Result<T, String> {
    serde_json::from_str(input).map_err(|e| format!("bad {op} request: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("response types serialize")
}

/// A station as the page sends it: coordinates plus an optional per-station
/// SNR offset (dB-like, added to the SNR model's site term).
#[derive(Debug, Clone, Copy, Deserialize)]
struct StationSpec {
    lat: f64,
    lon: f64,
    #[serde(default)]
    snr_offset: f64,
}

fn build_network(specs: &[StationSpec]) -> Result<SensorNetwork, String> {
    let stations = specs
        .iter()
        .map(|s| {
            GeoPoint::new(s.lat, s.lon).map(|loc| Station {
                loc,
                snr_offset: s.snr_offset,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    SensorNetwork::new(stations).map_err(|e| e.to_string())
}

fn uniform_prior(domain: Domain) -> PriorSpec {
    PriorSpec::Uniform {
        domain,
        mag_rate: default_mag_rate(),
        mag_min: domain.mag_min,
    }
}

// ---------------------------------------------------------------------------
// model_curves
// ---------------------------------------------------------------------------

fn default_dist_max_deg() -> f64 {
    3.0
}

fn default_n_samples() -> usize {
    120
}

#[derive(Debug, Deserialize)]
struct CurvesRequest {
    /// Logistic detection model; the fitted default when omitted.
    #[serde(default)]
    detection: Option<DetectionModel>,
    /// Expected-SNR model; the default calibration when omitted.
    #[serde(default)]
    snr: Option<SnrModel>,
    /// SNR → pick-noise curve; the default when omitted.
    #[serde(default)]
    pick: Option<PickNoiseModel>,
    /// Event magnitude the curves are drawn for.
    mag: f64,
    /// Event depth, km.
    depth_km: f64,
    /// Largest epicentral distance sampled, degrees.
    #[serde(default = "default_dist_max_deg")]
    dist_max_deg: f64,
    /// Number of distance samples.
    #[serde(default = "default_n_samples")]
    n_samples: usize,
}

#[derive(Debug, Serialize)]
struct CurvesResponse {
    dist_deg: Vec<f64>,
    /// Detection probability at each distance.
    p_detect: Vec<f64>,
    /// Expected signal-to-noise ratio at each distance.
    snr: Vec<f64>,
    /// Pick measurement standard deviation, seconds, at each distance.
    sigma_meas_s: Vec<f64>,
}

fn model_curves_impl(input: &str) -> Result<String, String> {
    let req: CurvesRequest = parse_request(input, "model_curves")?;
    if !(req.dist_max_deg > 0.0 && req.dist_max_deg.is_finite()) {
        return Err("dist_max_deg must be positive and finite".into());
    }
    if req.n_samples < 2 {
        return Err("n_samples must be at least 2".into());
    }
    if !(req.mag.is_finite() && req.depth_km.is_finite() && req.depth_km >= 0.0) {
        return Err("mag must be finite and depth_km finite and non-negative".into());
    }
    let detection = req.detection.unwrap_or_default();
    let snr_model = req.snr.unwrap_or_default();
    let pick = req.pick.unwrap_or_default();
    pick.validate().map_err(|e| e.to_string())?;

    let n = req.n_samples;
    let mut resp = CurvesResponse {
        dist_deg: Vec::with_capacity(n),
        p_detect: Vec::with_capacity(n),
        snr: Vec::with_capacity(n),
        sigma_meas_s: Vec::with_capacity(n),
    };
    for i in 0..n {
        // Start one step in: the SNR model is logarithmic in distance.
        let d = req.dist_max_deg * (i + 1) as f64 / n as f64;
        let s = snr_mean(&snr_model, d * KM_PER_DEGREE, req.mag, 0);
        resp.dist_deg.push(d);
        resp.p_detect.push(detection.probability(d, req.depth_km, req.mag));
        resp.snr.push(s);
        resp.sigma_meas_s.push(sigma_meas(&pick, s));
    }
    Ok(to_json(&resp))
}

// ---------------------------------------------------------------------------
// sensitivity
// ---------------------------------------------------------------------------

fn default_n_events() -> usize {
    192
}

fn default_n_realizations() -> usize {
    8
}

#[derive(Debug, Deserialize)]
struct SensitivityRequest {
    domain: Domain,
    #[serde(default)]
    stations: Vec<StationSpec>,
    /// Prior support size (QMC events).
    #[serde(default = "default_n_events")]
    n_events: usize,
    /// Synthetic dataset replicates per support event.
    #[serde(default = "default_n_realizations")]
    n_realizations: usize,
    #[serde(default)]
    seed: u64,
    /// Override the bundle's arrival switch (detections-only when false).
    #[serde(default)]
    use_arrivals: Option<bool>,
}

#[derive(Debug, Serialize)]
struct SensitivityResponse {
    total_eig_nats: f64,
    total_mc_se_nats: f64,
    n_stations: usize,
    rows: Vec<SensitivityPoint>,
}

#[derive(Debug, Serialize)]
struct SensitivityPoint {
    lat: f64,
    lon: f64,
    depth_km: f64,
    mag: f64,
    eig_nats: f64,
    mc_se_nats: f64,
}

fn sensitivity_impl(input: &str) -> Result<String, String> {
    let req: SensitivityRequest = parse_request(input, "sensitivity")?;
    req.domain.validate().map_err(|e| e.to_string())?;
    if req.n_events == 0 || req.n_realizations == 0 {
        return Err("n_events and n_realizations must be at least 1".into());
    }
    let net = build_network(&req.stations)?;
    let bundle = demo_bundle(req.use_arrivals)?;
    let support = qmc_event_set(&uniform_prior(req.domain), req.n_events, req.seed)
        .map_err(|e| e.to_string())?;
    let report = eig_total(&support, &net, &bundle, req.n_realizations, req.seed)
        .map_err(|e| e.to_string())?;
    let rows = sensitivity_map(&report)
        .into_iter()
        .map(|r| SensitivityPoint {
            lat: r.lat,
            lon: r.lon,
            depth_km: r.depth_km,
            mag: r.mag,
            eig_nats: r.eig_nats,
            mc_se_nats: r.mc_se_nats,
        })
        .collect();
    Ok(to_json(&SensitivityResponse {
        total_eig_nats: report.total_eig,
        total_mc_se_nats: report.total_mc_se,
        n_stations: net.len(),
        rows,
    }))
}

// ---------------------------------------------------------------------------
// propose_sensor
// ---------------------------------------------------------------------------

fn default_propose_events() -> usize {
    96
}

fn default_propose_realizations() -> usize {
    6
}

fn default_budget() -> usize {
    14
}

#[derive(Debug, Deserialize)]
struct ProposeRequest {
    domain: Domain,
    /// Existing network the new sensor is added to (may be empty).
    #[serde(default)]
    stations: Vec<StationSpec>,
    #[serde(default = "default_propose_events")]
    n_events: usize,
    #[serde(default = "default_propose_realizations")]
    n_realizations: usize,
    /// EIG evaluations the optimizer may spend (QMC seeding included).
    #[serde(default = "default_budget")]
    budget: usize,
    #[serde(default)]
    seed: u64,
    /// SNR offset assigned to the proposed sensor.
    #[serde(default)]
    station_offset: f64,
    #[serde(default)]
    use_arrivals: Option<bool>,
}

#[derive(Debug, Serialize)]
struct ProposeResponse {
    /// Committed location of the proposed sensor.
    lat: f64,
    lon: f64,
    /// Total network EIG with the proposal committed, nats.
    eig_total_nats: f64,
    mc_se_nats: f64,
    /// Every EIG evaluation the optimizer made, in order.
    evaluations: Vec<EvaluationPoint>,
}

#[derive(Debug, Serialize)]
struct EvaluationPoint {
    iter: usize,
    lat: f64,
    lon: f64,
    eig_nats: f64,
}

fn propose_sensor_impl(input: &str) -> Result<String, String> {
    let req: ProposeRequest = parse_request(input, "propose_sensor")?;
    req.domain.validate().map_err(|e| e.to_string())?;
    if req.n_events == 0 || req.n_realizations == 0 {
        return Err("n_events and n_realizations must be at least 1".into());
    }
    let net = build_network(&req.stations)?;
    let bundle = demo_bundle(req.use_arrivals)?;
    let support = qmc_event_set(&uniform_prior(req.domain), req.n_events, req.seed)
        .map_err(|e| e.to_string())?;
    let region = PlacementRegion::from_domain(&req.domain);
    let opts = PlacementOptions {
        n_realizations: req.n_realizations,
        station_offset: req.station_offset,
        ..PlacementOptions::default()
    };
    let (placed, trace) = greedy_place(
        &net,
        1,
        &region,
        &support,
        &bundle,
        req.budget,
        req.seed,
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let step = trace.steps.last().expect("one placement step for k = 1");
    let new_station = placed.stations.last().expect("placed network is non-empty");
    Ok(to_json(&ProposeResponse {
        lat: new_station.loc.lat,
        lon: new_station.loc.lon,
        eig_total_nats: step.eig_total,
        mc_se_nats: step.mc_std_error,
        evaluations: trace
            .evaluations
            .iter()
            .map(|e| EvaluationPoint {
                iter: e.iter,
                lat: e.lat,
                lon: e.lon,
                eig_nats: e.eig_nats,
            })
            .collect(),
    }))
}

// ---------------------------------------------------------------------------
// wasm exports
// ---------------------------------------------------------------------------

/// Detection/SNR/pick-noise curves vs. distance. JSON in, JSON out.
#[wasm_bindgen]
pub fn model_curves(request: &str) -> Result<String, JsError> {
    model_curves_impl(request).map_err(|e| JsError::new(&e))
}

/// Per-event EIG sensitivity map for a network. JSON in, JSON out.
#[wasm_bindgen]
pub fn sensitivity(request: &str) -> Result<String, JsError> {
    sensitivity_impl(request).map_err(|e| JsError::new(&e))
}

/// Greedy next-sensor proposal. JSON in, JSON out.
#[wasm_bindgen]
pub fn propose_sensor(request: &str) -> Result<String, JsError> {
    propose_sensor_impl(request).map_err(|e| JsError::new(&e))
}

/// Library version, for the page footer.
#[wasm_bindgen]
pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

// ---------------------------------------------------------------------------
// Tests (run natively; the impls are target-independent)
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_domain_json() -> &'static str {
        r#"{"lat_min": 40.0, "lat_max": 42.0, "lon_min": -111.0, "lon_max": -109.0,
            "depth_min": 0.0, "depth_max": 20.0, "mag_min": 2.0, "mag_max": 5.0}"#
    }

    #[test]
    fn curves_shapes_and_monotonicity() {
        let req = r#"{"mag": 3.0, "depth_km": 8.0, "dist_max_deg": 2.5, "n_samples": 64}"#;
        let out = model_curves_impl(req).unwrap();
        let resp: serde_json::Value = serde_json::from_str(&out).unwrap();
        let p: Vec<f64> = resp["p_detect"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let snr: Vec<f64> = resp["snr"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let sig: Vec<f64> = resp["sigma_meas_s"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert_eq!(p.len(), 64);
        assert_eq!(snr.len(), 64);
        assert_eq!(sig.len(), 64);
        for w in p.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "detection probability rises with distance");
        }
        for w in snr.windows(2) {
            assert!(w[1] < w[0], "SNR rises with distance");
        }
        for w in sig.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "pick noise shrinks with distance");
        }
        for &v in &p {
            assert!((0.0..=1.0).contains(&v));
        }
        let pick = PickNoiseModel::default();
        for &v in &sig {
            assert!(v >= pick.shrink * pick.sigma0 - 1e-12 && v <= pick.sigma0 + 1e-12);
        }
    }

    #[test]
    fn curves_rejects_bad_requests() {
        assert!(model_curves_impl("not json").unwrap_err().contains("model_curves"));
        let bad = r#"{"mag": 3.0, "depth_km": 8.0, "dist_max_deg": -1.0}"#;
        assert!(model_curves_impl(bad).is_err());
        let bad = r#"{"mag": 3.0, "depth_km": 8.0, "n_samples": 1}"#;
        assert!(model_curves_impl(bad).is_err());
    }

    #[test]
    fn sensitivity_rows_and_determinism() {
        let req = format!(
            r#"{{"domain": {}, "stations": [{{"lat": 40.8, "lon": -110.4}},
                {{"lat": 41.3, "lon": -109.7, "snr_offset": 1.0}}],
                "n_events": 64, "n_realizations": 4, "seed": 9}}"#,
            demo_domain_json()
        );
        let out1 = sensitivity_impl(&req).unwrap();
        let out2 = sensitivity_impl(&req).unwrap();
        assert_eq!(out1, out2, "identical request must give identical JSON");
        let resp: serde_json::Value = serde_json::from_str(&out1).unwrap();
        assert_eq!(resp["rows"].as_array().unwrap().len(), 64);
        assert_eq!(resp["n_stations"].as_u64().unwrap(), 2);
        assert!(resp["total_eig_nats"].as_f64().unwrap() > 0.0);
        assert!(resp["total_mc_se_nats"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn sensitivity_of_empty_network_is_zero() {
        let req = format!(
            r#"{{"domain": {}, "n_events": 16, "n_realizations": 2, "seed": 1}}"#,
            demo_domain_json()
        );
        let resp: serde_json::Value =
            serde_json::from_str(&sensitivity_impl(&req).unwrap()).unwrap();
        assert_eq!(resp["total_eig_nats"].as_f64().unwrap(), 0.0);
        assert_eq!(resp["n_stations"].as_u64().unwrap(), 0);
    }

    #[test]
    fn propose_lands_inside_domain_and_is_deterministic() {
        let req = format!(
            r#"{{"domain": {}, "stations": [{{"lat": 41.0, "lon": -110.0}}],
                "n_events": 48, "n_realizations": 4, "budget": 10, "seed": 5}}"#,
            demo_domain_json()
        );
        let out1 = propose_sensor_impl(&req).unwrap();
        let out2 = propose_sensor_impl(&req).unwrap();
        assert_eq!(out1, out2);
        let resp: serde_json::Value = serde_json::from_str(&out1).unwrap();
        let lat = resp["lat"].as_f64().unwrap();
        let lon = resp["lon"].as_f64().unwrap();
        assert!((40.0..=42.0).contains(&lat));
        assert!((-111.0..=-109.0).contains(&lon));
        let evals = resp["evaluations"].as_array().unwrap();
        assert_eq!(evals.len(), 10, "budget 10 spends exactly the seed evaluations");
        // The committed EIG is the best evaluation seen for this sensor.
        let best = evals
            .iter()
            .map(|e| e["eig_nats"].as_f64().unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((resp["eig_total_nats"].as_f64().unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn propose_rejects_invalid_domain() {
        let req = r#"{"domain": {"lat_min": 42.0, "lat_max": 40.0, "lon_min": -111.0,
            "lon_max": -109.0, "depth_min": 0.0, "depth_max": 20.0,
            "mag_min": 2.0, "mag_max": 5.0}}"#;
        assert!(propose_sensor_impl(req).is_err());
    }

    #[test]
    fn version_matches_package() {
        assert_eq!(version(), env!("CARGO_PKG_VERSION"));
    }
}
