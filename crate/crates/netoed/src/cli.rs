//! Command-line front end: argument parsing, the four workflows (`fit`,
//! `analyze`, `optimize`, `synth`), and CSV/JSON emission.
//!
//! Every command takes `--config`; `analyze`, `optimize`, and `synth` also
//! take `--bundle`. `--seed` overrides the config seed, `--out` picks the
//! output directory. Exit codes: 0 ok, 2 input error, 3 infeasible
//! placement region, 4 numerical failure.
//!
//! Reproducibility: every command with a fixed seed is bit-reproducible
//! across runs and worker counts (`NETOED_THREADS` changes wall-clock
//! time only), and every output file embeds the config hash and tool
//! version — CSV as a leading `#` comment, JSON as top-level fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bundle::ModelBundle;
use crate::config::{EnsembleSpec, RunConfig, tool_version};
use crate::detection::{CatalogRow, fit_detection_model};
use crate::earthmodel::{Ensemble, VelocityProfile, synthetic_ensemble};
use crate::eig::{EigReport, POSTERIOR_MASS_WARN_THRESHOLD, eig_total, sensitivity_map};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::network::SensorNetwork;
use crate::optimize::{OptimizationTrace, PlacementOptions, greedy_place};
use crate::priors::{Event, qmc_event_set};
use crate::synth::{SyntheticDataset, synth_dataset};

/// Bayesian experimental design for seismic monitoring networks.
#[derive(Debug, Parser)]
#[command(name = "netoed", version, about)]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Fitted model bundle (JSON); required by analyze, optimize, synth.
    #[arg(long, global = true, value_name = "PATH")]
    pub bundle: Option<PathBuf>,

    /// Overrides the seed in the config file.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

/// The four workflows.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit detection model, travel-time surrogates, and correlation
    /// length; write the model bundle.
    Fit(FitArgs),
    /// Estimate the network's expected information gain and write the
    /// sensitivity map.
    Analyze,
    /// Greedily place sensors to maximize expected information gain.
    Optimize,
    /// Synthesize hypothetical datasets for one event.
    Synth(SynthArgs),
}

/// Arguments specific to `fit`.
#[derive(Debug, Args)]
pub struct FitArgs {
    /// Pick catalog CSV: dist_deg,depth_km,mag,mag_missing,detected.
    #[arg(long, value_name = "PATH")]
    pub catalog: PathBuf,

    /// Velocity-profile ensemble JSON; overrides the config's ensemble.
    #[arg(long, value_name = "PATH")]
    pub ensemble: Option<PathBuf>,
}

/// Arguments specific to `synth`: the event to synthesize data for.
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Event latitude, degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,

    /// Event longitude, degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,

    /// Event depth, km.
    #[arg(long, allow_hyphen_values = true)]
    pub depth_km: f64,

    /// Event magnitude.
    #[arg(long, allow_hyphen_values = true)]
    pub mag: f64,

    /// Dataset replicates; defaults to the config's n_realizations.
    #[arg(long, value_name = "N")]
    pub n_realizations: Option<usize>,
}

/// Full process entry: parse arguments, size the thread pool, dispatch,
/// and map errors to exit codes. Returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Sizes the global worker pool from `NETOED_THREADS` (default: machine
/// parallelism). Results never depend on the value; only wall-clock time
/// does.
fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("NETOED_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "NETOED_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("cannot size thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let mut config = load_config(cli)?;
    if let Some(seed) = cli.seed {
        // The override becomes part of the effective configuration, so
        // the hash embedded in outputs reflects what actually ran.
        config.eig.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Fit(args) => cmd_fit(&config, cli, args),
        Command::Analyze => cmd_analyze(&config, cli),
        Command::Optimize => cmd_optimize(&config, cli),
        Command::Synth(args) => cmd_synth(&config, cli, args),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("--config PATH is required".into()))?;
    RunConfig::load(path)
}

fn load_bundle(config: &RunConfig, cli: &Cli) -> Result<ModelBundle> {
    let path = cli.bundle.as_deref().ok_or_else(|| {
        Error::InvalidInput("--bundle PATH is required for this command".into())
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read bundle {}: {e}", path.display()))
    })?;
    let mut bundle = ModelBundle::from_json(&text)?;
    config.apply_overrides(&mut bundle);
    Ok(bundle)
}

/// `# netoed v<version> config=<hash> seed=<seed>` — the provenance
/// comment leading every CSV output.
fn csv_provenance(config: &RunConfig) -> String {
    format!(
        "# netoed v{} config={} seed={}\n",
        tool_version(),
        config.hash(),
        config.eig.seed
    )
}

/// Attaches `tool_version` and `config_hash` fields to a serialized
/// value and pretty-prints it (keys emit in sorted order).
fn json_with_provenance<T: serde::Serialize>(value: &T, config: &RunConfig) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    let obj = v
        .as_object_mut()
        .expect("provenance wrapper needs a JSON object");
    obj.insert("tool_version".into(), tool_version().into());
    obj.insert("config_hash".into(), config.hash().into());
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Raw catalog CSV row; `mag` is empty exactly when `mag_missing` is 1.
#[derive(Debug, Deserialize)]
struct RawCatalogRow {
    dist_deg: f64,
    depth_km: f64,
    mag: Option<f64>,
    mag_missing: u8,
    detected: u8,
}

/// Reads a pick catalog CSV (`dist_deg,depth_km,mag,mag_missing,detected`).
pub fn read_catalog(path: &Path) -> Result<Vec<CatalogRow>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read catalog {}: {e}", path.display()))
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<RawCatalogRow>().enumerate() {
        let raw = record?;
        if raw.mag_missing > 1 || raw.detected > 1 {
            return Err(Error::InvalidInput(format!(
                "catalog row {i}: mag_missing and detected must be 0 or 1"
            )));
        }
        if raw.mag.is_some() == (raw.mag_missing == 1) {
            return Err(Error::InvalidInput(format!(
                "catalog row {i}: mag must be present exactly when mag_missing=0"
            )));
        }
        rows.push(CatalogRow {
            dist_deg: raw.dist_deg,
            depth_km: raw.depth_km,
            mag: raw.mag,
            detected: raw.detected == 1,
        });
    }
    Ok(rows)
}

/// Writes a pick catalog CSV in the format [`read_catalog`] accepts.
pub fn write_catalog(path: &Path, rows: &[CatalogRow]) -> Result<()> {
    let mut text = String::from("dist_deg,depth_km,mag,mag_missing,detected\n");
    for r in rows {
        let mag = r.mag.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.dist_deg,
            r.depth_km,
            mag,
            u8::from(r.mag.is_none()),
            u8::from(r.detected)
        );
    }
    Ok(std::fs::write(path, text)?)
}

fn load_ensemble(spec: &EnsembleSpec, seed: u64) -> Result<Ensemble> {
    match spec {
        EnsembleSpec::Synthetic { n_members } => synthetic_ensemble(*n_members, seed),
        EnsembleSpec::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidInput(format!("cannot read ensemble {}: {e}", path.display()))
            })?;
            let profiles: Vec<VelocityProfile> = serde_json::from_str(&text).map_err(|e| {
                Error::InvalidInput(format!("ensemble {} is not valid: {e}", path.display()))
            })?;
            Ensemble::new(profiles)
        }
    }
}

/// `fit`: detection model from the catalog, travel-time surrogates and
/// correlation length from the ensemble; writes the bundle JSON.
pub fn cmd_fit(config: &RunConfig, cli: &Cli, args: &FitArgs) -> Result<()> {
    let rows = read_catalog(&args.catalog)?;
    let detection = fit_detection_model(&rows, config.fit.detection_weight)?;

    let ensemble_spec = match &args.ensemble {
        Some(path) => EnsembleSpec::File { path: path.clone() },
        None => config.fit.ensemble.clone(),
    };
    let ensemble = load_ensemble(&ensemble_spec, config.eig.seed)?;
    let mut bundle = ModelBundle::from_ensemble(ensemble, &config.fit.grid)?;
    bundle.detection = detection;
    config.apply_overrides(&mut bundle);

    println!(
        "detection: alpha={} beta={} gamma_m={} delta0={}  ({} rows, weight {})",
        bundle.detection.alpha,
        bundle.detection.beta,
        bundle.detection.gamma_m,
        bundle.detection.delta0,
        rows.len(),
        config.fit.detection_weight,
    );
    println!(
        "travel-time spread fit: rms residual {:.4} s",
        bundle.sigma_tt.rms_residual
    );
    println!(
        "correlation length: {:.2} km ({:?} mode)",
        bundle.correlation.length_scale_km, bundle.correlation.mode
    );

    let path = cli.out.join(&config.output.bundle);
    std::fs::write(&path, json_with_provenance(&bundle, config)?)?;

    // A bundle that does not read back identically is useless for reruns.
    let reread = ModelBundle::from_json(&std::fs::read_to_string(&path)?)?;
    if reread != bundle {
        return Err(Error::InvalidInput(
            "bundle round-trip mismatch: written file does not reproduce the fit".into(),
        ));
    }
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn sensitivity_csv(report: &EigReport, config: &RunConfig) -> String {
    let mut text = csv_provenance(config);
    text.push_str("lat,lon,depth_km,mag,eig_nats,mc_se_nats\n");
    for row in sensitivity_map(report) {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            row.lat, row.lon, row.depth_km, row.mag, row.eig_nats, row.mc_se_nats
        );
    }
    text
}

/// `analyze`: EIG of the configured network over the prior support;
/// writes the sensitivity CSV and the report JSON.
pub fn cmd_analyze(config: &RunConfig, cli: &Cli) -> Result<()> {
    let bundle = load_bundle(config, cli)?;
    let support = qmc_event_set(&config.prior_spec(), config.eig.n_events, config.eig.seed)?;
    let report = eig_total(
        &support,
        &config.network,
        &bundle,
        config.eig.n_realizations,
        config.eig.seed,
    )?;

    println!(
        "total EIG: {:.6} nats (mc se {:.6}, {} events x {} realizations)",
        report.total_eig, report.total_mc_se, config.eig.n_events, config.eig.n_realizations
    );
    warn_on_diagnostics(&report);

    let csv_path = cli.out.join(&config.output.sensitivity);
    std::fs::write(&csv_path, sensitivity_csv(&report, config))?;
    let report_path = cli.out.join(&config.output.report);
    std::fs::write(&report_path, json_with_provenance(&report, config)?)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", report_path.display());
    Ok(())
}

/// Prints warnings for degraded Monte Carlo diagnostics: a zero-mass
/// dataset rate above 1%, or a posterior concentrating on single support
/// events (both signal that the support is too sparse for the data).
fn warn_on_diagnostics(report: &EigReport) {
    let n_datasets = report.settings.n_events * report.settings.n_realizations;
    let rate = report.zero_mass_datasets as f64 / n_datasets.max(1) as f64;
    if rate > 0.01 {
        eprintln!(
            "warning: {} of {} synthesized datasets ({:.1}%) had zero posterior mass \
             and were skipped; the support is too sparse for the likelihood",
            report.zero_mass_datasets,
            n_datasets,
            100.0 * rate
        );
    }
    if report.max_posterior_mass > POSTERIOR_MASS_WARN_THRESHOLD {
        eprintln!(
            "warning: a posterior put {:.0}% of its mass on one support event; \
             EIG may be underestimated at this support size",
            100.0 * report.max_posterior_mass
        );
    }
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

fn trace_csv(trace: &OptimizationTrace, config: &RunConfig) -> String {
    let mut text = csv_provenance(config);
    text.push_str("sensor_idx,iter,lat,lon,eig_nats\n");
    for e in &trace.evaluations {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            e.sensor_idx, e.iter, e.lat, e.lon, e.eig_nats
        );
    }
    text
}

/// `optimize`: greedy sensor placement; writes the extended network JSON
/// and the evaluation trace CSV. `k = 0` echoes the input network.
pub fn cmd_optimize(config: &RunConfig, cli: &Cli) -> Result<()> {
    let bundle = load_bundle(config, cli)?;
    let region = config.placement_region()?;
    let network_path = cli.out.join(&config.output.network);
    let trace_path = cli.out.join(&config.output.trace);

    if config.optimize.k == 0 {
        println!("k = 0: echoing the input network unchanged");
        std::fs::write(&network_path, json_with_provenance(&config.network, config)?)?;
        std::fs::write(&trace_path, trace_csv(&OptimizationTrace::default(), config))?;
        println!("wrote {}", network_path.display());
        println!("wrote {}", trace_path.display());
        return Ok(());
    }

    let support = qmc_event_set(&config.prior_spec(), config.eig.n_events, config.eig.seed)?;
    let opts = PlacementOptions {
        n_realizations: config
            .optimize
            .n_realizations
            .unwrap_or(config.eig.n_realizations),
        station_offset: config.optimize.station_offset,
        acquisition: config.optimize.acquisition,
    };
    let (network, trace) = greedy_place(
        &config.network,
        config.optimize.k,
        &region,
        &support,
        &bundle,
        config.optimize.budget,
        config.eig.seed,
        &opts,
    )?;

    for step in &trace.steps {
        println!(
            "sensor {}: placed at ({:.4}, {:.4}), network EIG {:.6} nats (mc se {:.6}, {} evaluations)",
            step.sensor_idx,
            step.location.lat,
            step.location.lon,
            step.eig_total,
            step.mc_std_error,
            step.n_evaluations
        );
    }

    std::fs::write(&network_path, json_with_provenance(&network, config)?)?;
    std::fs::write(&trace_path, trace_csv(&trace, config))?;
    println!("wrote {}", network_path.display());
    println!("wrote {}", trace_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn datasets_csv(
    datasets: &[SyntheticDataset],
    n_stations: usize,
    config: &RunConfig,
) -> String {
    let mut text = csv_provenance(config);
    text.push_str("station_idx,detected,arrival_s\n");
    for (j, ds) in datasets.iter().enumerate() {
        let _ = writeln!(text, "# replicate {j}");
        let mut arrival = ds.arrivals.times.iter();
        for s in 0..n_stations {
            let detected = ds.detections.flags[s];
            // Arrivals are stored for detecting stations in station
            // order; non-detections leave the field empty (as does
            // detection-only synthesis).
            let time = if detected {
                arrival.next().map(|t| t.to_string()).unwrap_or_default()
            } else {
                String::new()
            };
            let _ = writeln!(text, "{},{},{}", s, u8::from(detected), time);
        }
    }
    text
}

/// `synth`: hypothetical datasets for one event; writes the datasets CSV.
pub fn cmd_synth(config: &RunConfig, cli: &Cli, args: &SynthArgs) -> Result<()> {
    let bundle = load_bundle(config, cli)?;
    let event = Event {
        loc: GeoPoint::new(args.lat, args.lon)?,
        depth_km: args.depth_km,
        mag: args.mag,
    };
    if !config.domain.contains(&event) {
        return Err(Error::InvalidInput(format!(
            "event (lat {}, lon {}, depth {} km, mag {}) lies outside the configured domain",
            args.lat, args.lon, args.depth_km, args.mag
        )));
    }
    let n_realizations = args.n_realizations.unwrap_or(config.eig.n_realizations);
    let datasets = synth_dataset(
        &event,
        &config.network,
        &bundle,
        n_realizations,
        config.eig.seed,
    )?;

    let path = cli.out.join(&config.output.datasets);
    std::fs::write(
        &path,
        datasets_csv(&datasets, config.network.stations.len(), config),
    )?;
    println!(
        "wrote {} ({} replicates x {} stations)",
        path.display(),
        n_realizations,
        config.network.stations.len()
    );
    Ok(())
}

/// Echoes a network as JSON (used by tests to compare against command
/// output).
pub fn network_json(network: &SensorNetwork, config: &RunConfig) -> Result<String> {
    json_with_provenance(network, config)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectionModel;
    use crate::network::Station;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "netoed-cli-{tag}-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn test_config() -> RunConfig {
        serde_json::from_str(
            r#"{
                "domain": {
                    "lat_min": 40.0, "lat_max": 42.0,
                    "lon_min": -111.0, "lon_max": -109.0,
                    "depth_min": 0.0, "depth_max": 20.0,
                    "mag_min": 2.0, "mag_max": 5.0
                },
                "network": {"stations": [
                    {"lat": 40.5, "lon": -110.5},
                    {"lat": 41.5, "lon": -109.5, "snr_offset": 0.5}
                ]},
                "eig": {"n_events": 16, "n_realizations": 4, "seed": 7}
            }"#,
        )
        .unwrap()
    }

    fn cli_for(dir: &Path, command: Command) -> Cli {
        Cli {
            config: None,
            bundle: None,
            seed: None,
            out: dir.to_path_buf(),
            command,
        }
    }

    #[test]
    fn catalog_round_trips_including_missing_mags() {
        let dir = scratch_dir("catalog");
        let path = dir.join("catalog.csv");
        let rows = vec![
            CatalogRow {
                dist_deg: 1.25,
                depth_km: 10.0,
                mag: Some(3.5),
                detected: true,
            },
            CatalogRow {
                dist_deg: 4.0,
                depth_km: 0.0,
                mag: None,
                detected: false,
            },
        ];
        write_catalog(&path, &rows).unwrap();
        let reread = read_catalog(&path).unwrap();
        assert_eq!(reread, rows);
    }

    #[test]
    fn missing_catalog_names_the_path_and_exits_2() {
        let err = read_catalog(Path::new("/no/such/catalog.csv")).unwrap_err();
        assert!(err.to_string().contains("/no/such/catalog.csv"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn inconsistent_mag_missing_flag_is_rejected() {
        let dir = scratch_dir("badcat");
        let path = dir.join("catalog.csv");
        std::fs::write(
            &path,
            "dist_deg,depth_km,mag,mag_missing,detected\n1.0,5.0,3.0,1,1\n",
        )
        .unwrap();
        let err = read_catalog(&path).unwrap_err();
        assert!(err.to_string().contains("mag_missing"), "{err}");
    }

    #[test]
    fn ensemble_file_round_trips() {
        let dir = scratch_dir("ens");
        let path = dir.join("ensemble.json");
        let profiles = vec![
            VelocityProfile::new(vec![(20.0, 5.8), (15.0, 6.5)], 8.0).unwrap(),
            VelocityProfile::new(vec![(18.0, 5.6), (17.0, 6.4)], 8.1).unwrap(),
        ];
        std::fs::write(&path, serde_json::to_string(&profiles).unwrap()).unwrap();
        let ens = load_ensemble(&EnsembleSpec::File { path }, 0).unwrap();
        assert_eq!(ens.len(), 2);
    }

    #[test]
    fn synth_command_is_deterministic_and_in_format() {
        let dir = scratch_dir("synth");
        let config = test_config();
        let bundle = ModelBundle::synthetic_default(3).unwrap();
        let bundle_path = dir.join("bundle.json");
        std::fs::write(&bundle_path, bundle.to_json().unwrap()).unwrap();

        let args = SynthArgs {
            lat: 41.0,
            lon: -110.0,
            depth_km: 5.0,
            mag: 4.0,
            n_realizations: Some(3),
        };
        let mut cli = cli_for(&dir, Command::Analyze);
        cli.bundle = Some(bundle_path);
        cmd_synth(&config, &cli, &args).unwrap();
        let first = std::fs::read(dir.join("datasets.csv")).unwrap();
        cmd_synth(&config, &cli, &args).unwrap();
        let second = std::fs::read(dir.join("datasets.csv")).unwrap();
        assert_eq!(first, second);

        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        let provenance = lines.next().unwrap();
        assert!(provenance.starts_with("# netoed v"), "{provenance}");
        assert!(provenance.contains(&format!("config={}", config.hash())));
        assert_eq!(lines.next().unwrap(), "station_idx,detected,arrival_s");
        // 3 replicates x (1 comment + 2 station rows).
        assert_eq!(text.lines().count(), 2 + 3 * 3);
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 3, "{line}");
            let detected = fields[1] == "1";
            assert_eq!(detected, !fields[2].is_empty(), "{line}");
        }
    }

    #[test]
    fn synth_rejects_event_outside_domain() {
        let dir = scratch_dir("synth-out");
        let config = test_config();
        let bundle = ModelBundle::synthetic_default(3).unwrap();
        let bundle_path = dir.join("bundle.json");
        std::fs::write(&bundle_path, bundle.to_json().unwrap()).unwrap();
        let mut cli = cli_for(&dir, Command::Analyze);
        cli.bundle = Some(bundle_path);
        let args = SynthArgs {
            lat: 50.0,
            lon: -110.0,
            depth_km: 5.0,
            mag: 4.0,
            n_realizations: Some(1),
        };
        let err = cmd_synth(&config, &cli, &args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("outside"), "{err}");
    }

    #[test]
    fn analyze_writes_provenance_and_echoes_rows() {
        let dir = scratch_dir("analyze");
        let config = test_config();
        let bundle = ModelBundle::synthetic_default(3).unwrap();
        let bundle_path = dir.join("bundle.json");
        std::fs::write(&bundle_path, bundle.to_json().unwrap()).unwrap();
        let mut cli = cli_for(&dir, Command::Analyze);
        cli.bundle = Some(bundle_path);

        cmd_analyze(&config, &cli).unwrap();
        let csv = std::fs::read_to_string(dir.join("sensitivity.csv")).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# netoed v"));
        assert_eq!(
            lines.next().unwrap(),
            "lat,lon,depth_km,mag,eig_nats,mc_se_nats"
        );
        assert_eq!(lines.count(), config.eig.n_events);

        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("eig_report.json")).unwrap())
                .unwrap();
        assert_eq!(report["tool_version"], tool_version());
        assert_eq!(report["config_hash"], config.hash());
        assert!(report["total_eig"].as_f64().unwrap() >= 0.0);
        assert_eq!(
            report["records"].as_array().unwrap().len(),
            config.eig.n_events
        );
    }

    #[test]
    fn optimize_with_k_zero_echoes_the_input_network() {
        let dir = scratch_dir("k0");
        let mut config = test_config();
        config.optimize.k = 0;
        let bundle = ModelBundle::synthetic_default(3).unwrap();
        let bundle_path = dir.join("bundle.json");
        std::fs::write(&bundle_path, bundle.to_json().unwrap()).unwrap();
        let mut cli = cli_for(&dir, Command::Optimize);
        cli.bundle = Some(bundle_path);

        cmd_optimize(&config, &cli).unwrap();
        let text = std::fs::read_to_string(dir.join("network_optimized.json")).unwrap();
        let echoed: SensorNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(echoed, config.network);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["config_hash"], config.hash());
        let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
        assert_eq!(trace.lines().count(), 2, "header only: {trace}");
    }

    #[test]
    fn fit_command_round_trips_a_synthetic_catalog() {
        let dir = scratch_dir("fit");
        let mut config = test_config();
        // Small grid and ensemble keep the unit test fast; the catalog
        // is what this test is about.
        config.fit.ensemble = EnsembleSpec::Synthetic { n_members: 24 };
        let truth = DetectionModel::default();
        let rows = crate::detection::synth_catalog(6000, &truth, 0.1, 11).unwrap();
        let catalog_path = dir.join("catalog.csv");
        write_catalog(&catalog_path, &rows).unwrap();

        let cli = cli_for(&dir, Command::Analyze);
        let args = FitArgs {
            catalog: catalog_path,
            ensemble: None,
        };
        cmd_fit(&config, &cli, &args).unwrap();

        let text = std::fs::read_to_string(dir.join("bundle.json")).unwrap();
        let bundle = ModelBundle::from_json(&text).unwrap();
        assert!((bundle.detection.alpha - truth.alpha).abs() < 0.5);
        assert!((bundle.detection.gamma_m - truth.gamma_m).abs() < 0.5);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["config_hash"], config.hash());
    }

    #[test]
    fn cli_parses_global_flags_and_subcommands() {
        let cli = Cli::try_parse_from([
            "netoed",
            "synth",
            "--config",
            "run.json",
            "--bundle",
            "bundle.json",
            "--seed",
            "9",
            "--out",
            "results",
            "--lat",
            "41.0",
            "--lon",
            "-110.0",
            "--depth-km",
            "5.0",
            "--mag",
            "3.2",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.out, PathBuf::from("results"));
        match &cli.command {
            Command::Synth(args) => {
                assert_eq!(args.lon, -110.0);
                assert_eq!(args.n_realizations, None);
            }
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from(["netoed", "fit"]).is_err(), "fit needs --catalog");
    }

    #[test]
    fn seed_override_changes_effective_config_and_hash() {
        let dir = scratch_dir("seedflag");
        let config_path = dir.join("run.json");
        let config = test_config();
        std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
        let bundle = ModelBundle::synthetic_default(3).unwrap();
        let bundle_path = dir.join("bundle.json");
        std::fs::write(&bundle_path, bundle.to_json().unwrap()).unwrap();

        let cli = Cli {
            config: Some(config_path),
            bundle: Some(bundle_path),
            seed: Some(99),
            out: dir.clone(),
            command: Command::Synth(SynthArgs {
                lat: 41.0,
                lon: -110.0,
                depth_km: 5.0,
                mag: 4.0,
                n_realizations: Some(1),
            }),
        };
        run(&cli).unwrap();
        let text = std::fs::read_to_string(dir.join("datasets.csv")).unwrap();
        let mut heeded = config.clone();
        heeded.eig.seed = 99;
        assert!(text.starts_with(&csv_provenance(&heeded)), "{text}");
    }

    #[test]
    fn station_offsets_survive_the_network_json() {
        let config = test_config();
        let text = network_json(&config.network, &config).unwrap();
        let parsed: SensorNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.stations[1].snr_offset, 0.5);
        assert_eq!(
            parsed.stations[0],
            Station {
                loc: GeoPoint {
                    lat: 40.5,
                    lon: -110.5
                },
                snr_offset: 0.0
            }
        );
    }
}
