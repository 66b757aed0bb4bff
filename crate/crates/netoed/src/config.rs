//! Run configuration: one JSON document drives every command-line
//! workflow. The domain is stated once and threaded into the prior and
//! the default placement region, so the pieces cannot drift apart.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arrivals::{PickNoiseModel, SnrModel};
use crate::bundle::ModelBundle;
use crate::earthmodel::{CorrelationMode, SurrogateGrid};
use crate::error::{Error, Result};
use crate::geo::{Domain, PlacementRegion, PolygonRegion};
use crate::network::SensorNetwork;
use crate::optimize::Acquisition;
use crate::priors::{MixtureSpec, PriorSpec, default_mag_rate};

/// The parsed configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Event domain: the box the prior and the QMC support live in.
    pub domain: Domain,
    /// Prior kind and magnitude-law parameters (domain comes from above).
    #[serde(default)]
    pub prior: PriorConfig,
    /// The sensor network to analyze or extend.
    pub network: SensorNetwork,
    /// Optional overrides of the bundle's SNR and pick-noise models.
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Optional override of the bundle's correlation mode / length scale.
    #[serde(default)]
    pub correlation: Option<CorrelationConfig>,
    /// Optional override of whether arrival times enter the likelihood.
    #[serde(default)]
    pub use_arrivals: Option<bool>,
    /// Monte Carlo settings for EIG estimation. The seed is mandatory.
    pub eig: EigRunSettings,
    /// Sensor-placement settings.
    #[serde(default)]
    pub optimize: OptimizeSettings,
    /// Model-fitting settings.
    #[serde(default)]
    pub fit: FitSettings,
    /// Output file names (resolved against the `--out` directory).
    #[serde(default)]
    pub output: OutputPaths,
}

/// Prior selection; the spatial domain is supplied by [`RunConfig::domain`].
///
/// `mag_min` is the magnitude-law floor; when omitted it follows the
/// domain's `mag_min`, keeping the sampled support inside the domain box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorConfig {
    /// Uniform epicenters and depth over the domain.
    Uniform {
        #[serde(default = "default_mag_rate")]
        mag_rate: f64,
        #[serde(default)]
        mag_min: Option<f64>,
    },
    /// Fault-box spatial mixture.
    FaultBoxMixture {
        #[serde(default = "default_mag_rate")]
        mag_rate: f64,
        #[serde(default)]
        mag_min: Option<f64>,
        #[serde(default)]
        mixture: MixtureSpec,
    },
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Uniform {
            mag_rate: default_mag_rate(),
            mag_min: None,
        }
    }
}

impl PriorConfig {
    /// Combines the prior kind with the run domain.
    pub fn to_spec(&self, domain: Domain) -> PriorSpec {
        match self {
            PriorConfig::Uniform { mag_rate, mag_min } => PriorSpec::Uniform {
                domain,
                mag_rate: *mag_rate,
                mag_min: mag_min.unwrap_or(domain.mag_min),
            },
            PriorConfig::FaultBoxMixture {
                mag_rate,
                mag_min,
                mixture,
            } => PriorSpec::FaultBoxMixture {
                domain,
                mag_rate: *mag_rate,
                mag_min: mag_min.unwrap_or(domain.mag_min),
                mixture: mixture.clone(),
            },
        }
    }
}

/// Optional overrides for the observation-noise models in the bundle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Replaces the bundle's SNR model when present.
    #[serde(default)]
    pub snr: Option<SnrModel>,
    /// Replaces the bundle's pick-noise model when present.
    #[serde(default)]
    pub pick: Option<PickNoiseModel>,
}

/// Correlation override: the mode always applies; the length scale only
/// when given (otherwise the bundle keeps its fitted value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub mode: CorrelationMode,
    #[serde(default)]
    pub length_scale_km: Option<f64>,
}

/// Monte Carlo budget for EIG runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigRunSettings {
    /// QMC support size (events in the grid and the θ′ loop).
    #[serde(default = "default_n_events")]
    pub n_events: usize,
    /// Hypothetical dataset realizations per event.
    #[serde(default = "default_n_realizations")]
    pub n_realizations: usize,
    /// Base RNG seed. Mandatory: every published number must be
    /// attributable to an explicit seed.
    pub seed: u64,
}

fn default_n_events() -> usize {
    1024
}

fn default_n_realizations() -> usize {
    crate::synth::DEFAULT_N_REALIZATIONS
}

/// Placement region in config form. The polygon variant takes
/// GeoJSON-style rings: arrays of `[lon, lat]` pairs, first ring the
/// boundary, subsequent rings holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionConfig {
    Box {
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
    },
    Polygon {
        rings: Vec<Vec<[f64; 2]>>,
    },
}

impl RegionConfig {
    /// Builds the geometric region, validating polygon rings.
    pub fn to_region(&self) -> Result<PlacementRegion> {
        match self {
            RegionConfig::Box {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            } => Ok(PlacementRegion::Box {
                lat_min: *lat_min,
                lat_max: *lat_max,
                lon_min: *lon_min,
                lon_max: *lon_max,
            }),
            RegionConfig::Polygon { rings } => Ok(PlacementRegion::Polygon(
                PolygonRegion::from_lon_lat_rings(rings)?,
            )),
        }
    }
}

/// Sensor-placement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    /// Sensors to add. 0 is allowed and echoes the input network.
    #[serde(default = "default_k")]
    pub k: usize,
    /// EIG evaluations per sensor (surrogate seeding included).
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Constraint region; the domain's horizontal box when omitted.
    #[serde(default)]
    pub region: Option<RegionConfig>,
    /// Dataset realizations per placement evaluation; the EIG setting
    /// when omitted.
    #[serde(default)]
    pub n_realizations: Option<usize>,
    /// SNR offset assigned to every placed sensor.
    #[serde(default)]
    pub station_offset: f64,
    /// Acquisition criterion.
    #[serde(default)]
    pub acquisition: Acquisition,
}

fn default_k() -> usize {
    1
}

fn default_budget() -> usize {
    crate::optimize::DEFAULT_PLACEMENT_BUDGET
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            k: default_k(),
            budget: default_budget(),
            region: None,
            n_realizations: None,
            station_offset: 0.0,
            acquisition: Acquisition::default(),
        }
    }
}

/// Where the earth-model ensemble for `fit` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleSpec {
    /// Draw a synthetic two-layer ensemble (crust over mantle halfspace).
    Synthetic {
        #[serde(default = "default_ensemble_size")]
        n_members: usize,
    },
    /// Load velocity profiles from a JSON file:
    /// `[{"layers": [[thickness_km, vp_km_s], ...], "halfspace_vp": v}, ...]`.
    File { path: PathBuf },
}

fn default_ensemble_size() -> usize {
    crate::earthmodel::DEFAULT_ENSEMBLE_SIZE
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec::Synthetic {
            n_members: default_ensemble_size(),
        }
    }
}

/// Model-fitting settings for the `fit` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Weight on detected rows in the detection-model loss.
    #[serde(default = "default_detection_weight")]
    pub detection_weight: f64,
    /// Earth-model ensemble source.
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    /// Travel-time surrogate grid.
    #[serde(default)]
    pub grid: SurrogateGrid,
}

fn default_detection_weight() -> f64 {
    crate::detection::DEFAULT_DETECTION_WEIGHT
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            detection_weight: default_detection_weight(),
            ensemble: EnsembleSpec::default(),
            grid: SurrogateGrid::default(),
        }
    }
}

/// Output file names, resolved against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default = "default_bundle_name")]
    pub bundle: String,
    #[serde(default = "default_sensitivity_name")]
    pub sensitivity: String,
    #[serde(default = "default_report_name")]
    pub report: String,
    #[serde(default = "default_network_name")]
    pub network: String,
    #[serde(default = "default_trace_name")]
    pub trace: String,
    #[serde(default = "default_datasets_name")]
    pub datasets: String,
}

fn default_bundle_name() -> String {
    "bundle.json".into()
}
fn default_sensitivity_name() -> String {
    "sensitivity.csv".into()
}
fn default_report_name() -> String {
    "eig_report.json".into()
}
fn default_network_name() -> String {
    "network_optimized.json".into()
}
fn default_trace_name() -> String {
    "trace.csv".into()
}
fn default_datasets_name() -> String {
    "datasets.csv".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            bundle: default_bundle_name(),
            sensitivity: default_sensitivity_name(),
            report: default_report_name(),
            network: default_network_name(),
            trace: default_trace_name(),
            datasets: default_datasets_name(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidInput(format!("config {} is not valid: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Cross-field validation beyond what the schema enforces.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.prior.to_spec(self.domain).validate()?;
        SensorNetwork::new(self.network.stations.clone())?;
        if let Some(noise) = &self.noise.pick {
            noise.validate()?;
        }
        if let Some(corr) = &self.correlation
            && let Some(l) = corr.length_scale_km
            && !(l > 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "correlation length_scale_km must be positive, got {l}"
            )));
        }
        if self.eig.n_events == 0 {
            return Err(Error::InvalidInput("eig.n_events must be at least 1".into()));
        }
        if self.eig.n_realizations == 0 {
            return Err(Error::InvalidInput(
                "eig.n_realizations must be at least 1".into(),
            ));
        }
        if let Some(region) = &self.optimize.region {
            region.to_region()?;
        }
        Ok(())
    }

    /// The prior over events implied by this configuration.
    pub fn prior_spec(&self) -> PriorSpec {
        self.prior.to_spec(self.domain)
    }

    /// The placement region: the configured one, or the domain box.
    pub fn placement_region(&self) -> Result<PlacementRegion> {
        match &self.optimize.region {
            Some(region) => region.to_region(),
            None => Ok(PlacementRegion::from_domain(&self.domain)),
        }
    }

    /// Applies the configured observation-model overrides to a loaded
    /// bundle (noise, correlation, arrival usage).
    pub fn apply_overrides(&self, bundle: &mut ModelBundle) {
        if let Some(snr) = &self.noise.snr {
            bundle.snr = snr.clone();
        }
        if let Some(pick) = &self.noise.pick {
            bundle.pick_noise = *pick;
        }
        if let Some(corr) = &self.correlation {
            bundle.correlation.mode = corr.mode;
            if let Some(l) = corr.length_scale_km {
                bundle.correlation.length_scale_km = l;
            }
        }
        if let Some(use_arrivals) = self.use_arrivals {
            bundle.use_arrivals = use_arrivals;
        }
    }

    /// Stable 16-hex-digit hash of the full configuration, embedded in
    /// every output file so results can be traced to their settings.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:016x}", fnv1a64(&bytes))
    }
}

/// FNV-1a, 64-bit.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The crate version, embedded in outputs next to the config hash.
pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
