//! The model bundle: every fitted ingredient of the likelihood in one
//! serializable value.
//!
//! A [`ModelBundle`] carries the detection model, the travel-time ensemble
//! with its μ and σ surrogates, the station correlation model, and the
//! SNR/pick-noise models. `fit` writes one to JSON; `analyze`, `optimize`,
//! and `synth` read it back. Given a bundle, an event, and a station,
//! [`ModelBundle::station_stats`] produces the per-station quantities
//! (distance, predicted arrival mean, model σ, measurement σ) that the
//! detection and arrival likelihoods consume.

use serde::{Deserialize, Serialize};

use crate::arrivals::{PickNoiseModel, SnrModel, sigma_meas, snr_mean};
use crate::detection::DetectionModel;
use crate::earthmodel::{
    CorrelationModel, DEFAULT_CORRELATION_DEPTH_COUNT, DEFAULT_ENSEMBLE_SIZE,
    Ensemble, MeanSurrogate, SigmaSurrogate, SurrogateGrid, empirical_correlation,
    fit_kernel_length, fit_surrogates, synthetic_ensemble,
};
use crate::error::{Error, Result};
use crate::geo::{degrees_to_km, great_circle_distance};
use crate::network::Station;
use crate::priors::Event;

fn default_true() -> bool {
    true
}

/// Per-(event, station) quantities feeding the likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationStats {
    /// Epicentral distance, great-circle degrees.
    pub delta_deg: f64,
    /// Epicentral distance, km.
    pub delta_km: f64,
    /// Predicted arrival mean μ(Δ, x), seconds after origin.
    pub mu: f64,
    /// Travel-time model standard deviation σ_model(Δ, x), seconds.
    pub sigma_model: f64,
    /// Pick measurement standard deviation σ_meas, seconds.
    pub sigma_meas: f64,
}

/// Everything the likelihood needs, fitted once and serialized together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    /// Version tag of the writer, for provenance.
    pub version: String,
    /// Logistic detection model.
    pub detection: DetectionModel,
    /// The velocity-model ensemble the surrogates were fitted from.
    pub ensemble: Ensemble,
    /// Tabulated travel-time mean μ(Δ, x).
    pub mean_tt: MeanSurrogate,
    /// Polynomial travel-time spread σ_model(Δ, x).
    pub sigma_tt: SigmaSurrogate,
    /// Inter-station correlation model.
    pub correlation: CorrelationModel,
    /// Expected-SNR model.
    pub snr: SnrModel,
    /// SNR → pick-noise curve.
    pub pick_noise: PickNoiseModel,
    /// When false, likelihoods use detections only and ignore arrival
    /// times entirely (diagnostic mode; defaults to true).
    #[serde(default = "default_true")]
    pub use_arrivals: bool,
}

impl ModelBundle {
    /// Builds a self-contained bundle from the synthetic default ensemble:
    /// [`DEFAULT_ENSEMBLE_SIZE`] members, surrogates over the default grid,
    /// correlation length fitted to the ensemble's own station correlation,
    /// and default detection/noise models. Deterministic in `seed`.
    pub fn synthetic_default(seed: u64) -> Result<Self> {
        Self::from_ensemble(
            synthetic_ensemble(DEFAULT_ENSEMBLE_SIZE, seed)?,
            &SurrogateGrid::default(),
        )
    }

    /// Fits surrogates and the correlation length over `grid` for a given
    /// ensemble, with default detection and noise models.
    pub fn from_ensemble(ensemble: Ensemble, grid: &SurrogateGrid) -> Result<Self> {
        let (mean_tt, sigma_tt) = fit_surrogates(&ensemble, grid)?;

        // Probe geometry for the correlation fit: distances spanning the
        // grid, correlations averaged over equispaced depths.
        let n_probe = 12;
        let deltas: Vec<f64> = (0..n_probe)
            .map(|i| {
                grid.delta_min_km
                    + (grid.delta_max_km - grid.delta_min_km) * i as f64 / (n_probe - 1) as f64
            })
            .collect();
        let depths: Vec<f64> = (0..DEFAULT_CORRELATION_DEPTH_COUNT)
            .map(|i| {
                grid.depth_min_km
                    + (grid.depth_max_km - grid.depth_min_km) * i as f64
                        / (DEFAULT_CORRELATION_DEPTH_COUNT - 1) as f64
            })
            .collect();
        let gamma = empirical_correlation(&ensemble, &deltas, &depths)?;
        let correlation = fit_kernel_length(&gamma, &deltas)?;

        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            detection: DetectionModel::default(),
            ensemble,
            mean_tt,
            sigma_tt,
            correlation,
            snr: SnrModel::default(),
            pick_noise: PickNoiseModel::default(),
            use_arrivals: true,
        })
    }

    /// Per-station likelihood inputs for one event.
    ///
    /// Distances below the surrogate grid's lower edge clamp up to it (an
    /// event under a station is physically fine; the surrogates just were
    /// not fitted below the edge), while distances beyond the upper edge
    /// are a genuine out-of-domain error — the bundle was fitted for a
    /// smaller footprint than the query.
    pub fn station_stats(&self, e: &Event, station: &Station, index: usize) -> Result<StationStats> {
        let delta_deg = great_circle_distance(e.loc, station.loc);
        let delta_km = degrees_to_km(delta_deg);
        let grid = self.sigma_tt.grid();
        let delta_eval = delta_km.max(grid.delta_min_km);
        let mu = self.mean_tt.eval(delta_eval, e.depth_km)?;
        let sigma_model = self.sigma_tt.eval(delta_eval, e.depth_km)?;
        let snr = snr_mean(&self.snr, delta_km, e.mag, index) + station.snr_offset;
        Ok(StationStats {
            delta_deg,
            delta_km,
            mu,
            sigma_model,
            sigma_meas: sigma_meas(&self.pick_noise, snr),
        })
    }

    /// Serializes the bundle to pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a bundle from JSON, validating basic invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(text)?;
        bundle.validate()?;
        Ok(bundle)
    }

    /// Checks cross-field invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.pick_noise.validate()?;
        if self.ensemble.len() < 2 {
            return Err(Error::InvalidInput(
                "bundle ensemble needs >= 2 members".into(),
            ));
        }
        if !(self.correlation.length_scale_km > 0.0) {
            return Err(Error::InvalidInput(
                "correlation length scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
