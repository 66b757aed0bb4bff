//! Greedy sensor placement by Bayesian optimization.
//!
//! Each new sensor is chosen by maximizing the network EIG over candidate
//! (lat, lon) locations inside a constraint region. The EIG surface is
//! expensive — every evaluation runs the full synthesize-and-reweight
//! pipeline — so a Gaussian-process surrogate is fit to the evaluations
//! made so far, and an acquisition function (Expected Improvement by
//! default) picks the next candidate, trading off exploring uncertain
//! areas against refining the best known one.
//!
//! Every EIG evaluation for one placement run reuses the same base seed,
//! so candidate networks are compared under common random numbers: the
//! hypothetical datasets drawn for the shared stations are identical
//! across candidates and the EIG surface stays smooth in the candidate
//! location. The committed location is always the best *evaluated* one,
//! never a surrogate prediction.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::eig::eig_total;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, PlacementRegion};
use crate::network::SensorNetwork;
use crate::priors::WeightedEventSet;
use crate::stats::{norm_cdf, norm_pdf};

/// Default EIG evaluations per placed sensor (seed evaluations included).
pub const DEFAULT_PLACEMENT_BUDGET: usize = 100;

/// QMC candidates scored per acquisition maximization.
const N_ACQUISITION_CANDIDATES: usize = 2048;

/// Surrogate-seeding evaluations per sensor before the surrogate loop.
const N_SEED_EVALUATIONS: usize = 10;

/// Pattern-search refinement steps after the candidate sweep.
const N_PATTERN_STEPS: usize = 20;

/// Stream lane for the per-sensor proposal RNG (see [`crate::rng::stream`]).
const PLACEMENT_LANE: u64 = 0x50_4c_41_43_45; // "PLACE"

/// Fixed seed for the deterministic hyperparameter restarts of [`gp_fit`].
const GP_RESTART_SEED: u64 = 0x47_50_46_49_54; // "GPFIT"

// ---------------------------------------------------------------------------
// Gaussian-process surrogate
// ---------------------------------------------------------------------------

/// Kernel hyperparameters in log space, on unit-square inputs and
/// standardized outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyperParams {
    /// Per-axis squared-exponential length scales (lat, lon), ln units.
    pub ln_length: [f64; 2],
    /// Signal standard deviation, ln units.
    pub ln_signal_sd: f64,
    /// Noise standard deviation, ln units.
    pub ln_noise_sd: f64,
}

/// Box bounds keeping the hyperparameter search sane on the unit square;
/// the noise lower bound is the 1e-8 variance floor that keeps duplicate
/// training points harmless.
const LN_LENGTH_BOUNDS: (f64, f64) = (-3.912023005428146, 1.6094379124341003); // (ln 0.02, ln 5)
const LN_SIGNAL_BOUNDS: (f64, f64) = (-6.907755278982137, 4.605170185988092); // (ln 1e-3, ln 1e2)
const LN_NOISE_BOUNDS: (f64, f64) = (-9.210340371976182, 2.302585092994046); // (ln 1e-4, ln 10)

impl GpHyperParams {
    fn clamped(mut self) -> Self {
        self.ln_length[0] = self.ln_length[0].clamp(LN_LENGTH_BOUNDS.0, LN_LENGTH_BOUNDS.1);
        self.ln_length[1] = self.ln_length[1].clamp(LN_LENGTH_BOUNDS.0, LN_LENGTH_BOUNDS.1);
        self.ln_signal_sd = self.ln_signal_sd.clamp(LN_SIGNAL_BOUNDS.0, LN_SIGNAL_BOUNDS.1);
        self.ln_noise_sd = self.ln_noise_sd.clamp(LN_NOISE_BOUNDS.0, LN_NOISE_BOUNDS.1);
        self
    }

    fn to_vec(self) -> [f64; 4] {
        [
            self.ln_length[0],
            self.ln_length[1],
            self.ln_signal_sd,
            self.ln_noise_sd,
        ]
    }

    fn from_vec(v: [f64; 4]) -> Self {
        Self {
            ln_length: [v[0], v[1]],
            ln_signal_sd: v[2],
            ln_noise_sd: v[3],
        }
    }
}

/// Affine map from (lat, lon) onto the unit square spanned by the
/// training data.
#[derive(Debug, Clone, Copy)]
struct UnitScale {
    lat0: f64,
    lat_span: f64,
    lon0: f64,
    lon_span: f64,
}

impl UnitScale {
    fn from_points(points: &[(f64, f64)]) -> Self {
        let (mut lat_min, mut lat_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut lon_min, mut lon_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(lat, lon) in points {
            lat_min = lat_min.min(lat);
            lat_max = lat_max.max(lat);
            lon_min = lon_min.min(lon);
            lon_max = lon_max.max(lon);
        }
        Self {
            lat0: lat_min,
            lat_span: (lat_max - lat_min).max(1e-12),
            lon0: lon_min,
            lon_span: (lon_max - lon_min).max(1e-12),
        }
    }

    fn to_unit(&self, p: (f64, f64)) -> [f64; 2] {
        [
            (p.0 - self.lat0) / self.lat_span,
            (p.1 - self.lon0) / self.lon_span,
        ]
    }
}

/// Gaussian-process surrogate of the EIG surface over (lat, lon).
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    train_unit: Vec<[f64; 2]>,
    train_values: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    scale: UnitScale,
    hyper: GpHyperParams,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `(K + σ_n² I)⁻¹ ỹ` on standardized targets.
    alpha: nalgebra::DVector<f64>,
    log_marginal: f64,
}

/// Squared-exponential covariance `s²·exp(−½ Σ_d (Δ_d / l_d)²)` between
/// two unit-square points.
fn kernel(h: &GpHyperParams, a: [f64; 2], b: [f64; 2]) -> f64 {
    let s2 = (2.0 * h.ln_signal_sd).exp();
    let l0 = h.ln_length[0].exp();
    let l1 = h.ln_length[1].exp();
    let r2 = ((a[0] - b[0]) / l0).powi(2) + ((a[1] - b[1]) / l1).powi(2);
    s2 * (-0.5 * r2).exp()
}

/// Training-covariance pieces for one hyperparameter setting.
struct GpFactored {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: nalgebra::DVector<f64>,
    log_marginal: f64,
    /// Signal-only covariance (no noise), needed by the gradient.
    k_signal: nalgebra::DMatrix<f64>,
}

fn factor_gp(
    h: &GpHyperParams,
    d_lat: &nalgebra::DMatrix<f64>,
    d_lon: &nalgebra::DMatrix<f64>,
    y: &nalgebra::DVector<f64>,
) -> Option<GpFactored> {
    let n = y.len();
    let s2 = (2.0 * h.ln_signal_sd).exp();
    let inv_l0_sq = (-2.0 * h.ln_length[0]).exp();
    let inv_l1_sq = (-2.0 * h.ln_length[1]).exp();
    let n2 = (2.0 * h.ln_noise_sd).exp();
    let k_signal = nalgebra::DMatrix::from_fn(n, n, |a, b| {
        s2 * (-0.5 * (d_lat[(a, b)] * inv_l0_sq + d_lon[(a, b)] * inv_l1_sq)).exp()
    });
    let mut k = k_signal.clone();
    for i in 0..n {
        k[(i, i)] += n2;
    }
    let chol = nalgebra::Cholesky::new(k)?;
    let alpha = chol.solve(y);
    let ln_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let log_marginal = -0.5 * y.dot(&alpha)
        - ln_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Some(GpFactored {
        chol,
        alpha,
        log_marginal,
        k_signal,
    })
}

/// Gradient of the log marginal likelihood with respect to the four log
/// hyperparameters: `½ tr((ααᵀ − K⁻¹) ∂K/∂θ)`.
fn gp_gradient(
    h: &GpHyperParams,
    f: &GpFactored,
    d_lat: &nalgebra::DMatrix<f64>,
    d_lon: &nalgebra::DMatrix<f64>,
) -> [f64; 4] {
    let n = f.alpha.len();
    let k_inv = f.chol.inverse();
    let inv_l0_sq = (-2.0 * h.ln_length[0]).exp();
    let inv_l1_sq = (-2.0 * h.ln_length[1]).exp();
    let n2 = (2.0 * h.ln_noise_sd).exp();
    let mut g = [0.0f64; 4];
    for a in 0..n {
        for b in 0..n {
            // (ααᵀ − K⁻¹) entry, times ∂K/∂θ entries.
            let m = f.alpha[a] * f.alpha[b] - k_inv[(a, b)];
            let ks = f.k_signal[(a, b)];
            g[0] += m * ks * d_lat[(a, b)] * inv_l0_sq;
            g[1] += m * ks * d_lon[(a, b)] * inv_l1_sq;
            g[2] += m * 2.0 * ks;
            if a == b {
                g[3] += m * 2.0 * n2;
            }
        }
    }
    g.iter_mut().for_each(|v| *v *= 0.5);
    g
}

/// Maximizes the log marginal likelihood from one start by projected
/// gradient ascent with backtracking.
fn ascend(
    start: GpHyperParams,
    d_lat: &nalgebra::DMatrix<f64>,
    d_lon: &nalgebra::DMatrix<f64>,
    y: &nalgebra::DVector<f64>,
) -> Option<(GpHyperParams, f64)> {
    let mut h = start.clamped();
    let mut f = factor_gp(&h, d_lat, d_lon, y)?;
    let mut step = 0.1;
    for _ in 0..60 {
        let g = gp_gradient(&h, &f, d_lat, d_lon);
        let g_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g_norm < 1e-5 {
            break;
        }
        let mut improved = false;
        while step > 1e-6 {
            let v = h.to_vec();
            let mut trial = [0.0f64; 4];
            for i in 0..4 {
                trial[i] = v[i] + step * g[i];
            }
            let h_trial = GpHyperParams::from_vec(trial).clamped();
            if let Some(f_trial) = factor_gp(&h_trial, d_lat, d_lon, y)
                && f_trial.log_marginal > f.log_marginal
            {
                h = h_trial;
                f = f_trial;
                step = (step * 1.2).min(1.0);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Some((h, f.log_marginal))
}

fn standardize(values: &[f64]) -> (f64, f64, nalgebra::DVector<f64>) {
    let (mean, sd) = crate::stats::mean_and_sample_sd(values);
    let sd = if sd > 1e-15 * (mean.abs() + 1.0) { sd } else { 1.0 };
    let y = nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|v| (v - mean) / sd),
    );
    (mean, sd, y)
}

fn build_surrogate(
    points: &[(f64, f64)],
    values: &[f64],
    hyper: GpHyperParams,
    scale: UnitScale,
) -> Result<GpSurrogate> {
    let train_unit: Vec<[f64; 2]> = points.iter().map(|&p| scale.to_unit(p)).collect();
    let (y_mean, y_sd, y) = standardize(values);
    let (d_lat, d_lon) = squared_distance_tables(&train_unit);
    let f = factor_gp(&hyper, &d_lat, &d_lon, &y).ok_or_else(|| {
        Error::SingularCovariance("surrogate training covariance is not positive definite".into())
    })?;
    Ok(GpSurrogate {
        train_unit,
        train_values: values.to_vec(),
        y_mean,
        y_sd,
        scale,
        hyper,
        alpha: f.alpha,
        chol: f.chol,
        log_marginal: f.log_marginal,
    })
}

fn squared_distance_tables(
    unit: &[[f64; 2]],
) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    let n = unit.len();
    let d_lat = nalgebra::DMatrix::from_fn(n, n, |a, b| (unit[a][0] - unit[b][0]).powi(2));
    let d_lon = nalgebra::DMatrix::from_fn(n, n, |a, b| (unit[a][1] - unit[b][1]).powi(2));
    (d_lat, d_lon)
}

/// Fits the surrogate: inputs are rescaled to the unit square over their
/// bounding box, targets standardized, and the kernel hyperparameters
/// maximize the marginal likelihood via gradient ascent from 8
/// deterministic restarts. Duplicate training points are harmless — the
/// noise variance is floored at 1e-8.
pub fn gp_fit(points: &[(f64, f64)], values: &[f64]) -> Result<GpSurrogate> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    if points.len() < 2 {
        return Err(Error::EmptySet("surrogate needs at least two training points"));
    }
    if points
        .iter()
        .any(|p| !p.0.is_finite() || !p.1.is_finite())
        || values.iter().any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput(
            "surrogate training data must be finite".into(),
        ));
    }
    let scale = UnitScale::from_points(points);
    let train_unit: Vec<[f64; 2]> = points.iter().map(|&p| scale.to_unit(p)).collect();
    let (_, _, y) = standardize(values);
    let (d_lat, d_lon) = squared_distance_tables(&train_unit);

    let mut starts = vec![GpHyperParams {
        ln_length: [0.3f64.ln(), 0.3f64.ln()],
        ln_signal_sd: 0.0,
        ln_noise_sd: 0.1f64.ln(),
    }];
    let mut rng = crate::rng::stream(GP_RESTART_SEED, 0, 0);
    for _ in 1..8 {
        let draw = |rng: &mut rand_chacha::ChaCha12Rng, (lo, hi): (f64, f64)| {
            rng.r#gen::<f64>() * (hi - lo) + lo
        };
        starts.push(GpHyperParams {
            ln_length: [
                draw(&mut rng, LN_LENGTH_BOUNDS),
                draw(&mut rng, LN_LENGTH_BOUNDS),
            ],
            ln_signal_sd: draw(&mut rng, (-2.0, 2.0)),
            ln_noise_sd: draw(&mut rng, (LN_NOISE_BOUNDS.0, 0.0)),
        });
    }

    let mut best: Option<(GpHyperParams, f64)> = None;
    for start in starts {
        if let Some((h, lm)) = ascend(start, &d_lat, &d_lon, &y)
            && best.as_ref().is_none_or(|(_, cur)| lm > *cur)
        {
            best = Some((h, lm));
        }
    }
    let (hyper, _) = best.ok_or_else(|| {
        Error::SingularCovariance(
            "no hyperparameter start produced a positive-definite surrogate".into(),
        )
    })?;
    build_surrogate(points, values, hyper, scale)
}

/// Fits with caller-supplied hyperparameters (no marginal-likelihood
/// search) — oracle comparisons and degenerate-surface tests.
#[cfg(test)]
pub(crate) fn gp_fit_fixed(
    points: &[(f64, f64)],
    values: &[f64],
    hyper: GpHyperParams,
) -> Result<GpSurrogate> {
    build_surrogate(points, values, hyper.clamped(), UnitScale::from_points(points))
}

impl GpSurrogate {
    /// Fitted hyperparameters (unit-square inputs, standardized outputs).
    pub fn hyperparams(&self) -> GpHyperParams {
        self.hyper
    }

    /// Log marginal likelihood at the fitted hyperparameters.
    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    /// Largest training value — the incumbent for improvement-based
    /// acquisitions.
    pub fn best_value(&self) -> f64 {
        self.train_values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Posterior mean and standard deviation of the latent surface at
/// (lat, lon), in the output (EIG) scale.
pub fn gp_predict(s: &GpSurrogate, p: (f64, f64)) -> (f64, f64) {
    let u = s.scale.to_unit(p);
    let n = s.train_unit.len();
    let kstar = nalgebra::DVector::from_iterator(
        n,
        s.train_unit.iter().map(|&t| kernel(&s.hyper, u, t)),
    );
    let mean_unit = kstar.dot(&s.alpha);
    let w = s.chol.solve(&kstar);
    let s2 = (2.0 * s.hyper.ln_signal_sd).exp();
    let var_unit = (s2 - kstar.dot(&w)).max(0.0);
    (s.y_mean + s.y_sd * mean_unit, s.y_sd * var_unit.sqrt())
}

// ---------------------------------------------------------------------------
// Acquisition functions
// ---------------------------------------------------------------------------

/// Acquisition criterion for proposing the next candidate. Expected
/// Improvement is the tested default; the others are offered for
/// experimentation with no tuning promises.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Acquisition {
    /// `E[max(f − best, 0)]` under the GP posterior.
    #[default]
    ExpectedImprovement,
    /// Optimistic bound `mean + kappa·std`.
    ConfidenceBound { kappa: f64 },
    /// `P(f > best)` under the GP posterior.
    ProbabilityOfImprovement,
}

/// Expected improvement over `best_so_far` for a maximization problem:
/// `std·(φ(z) + z·Φ(z))` with `z = (mean − best)/std`, degrading to
/// `max(mean − best, 0)` when the uncertainty vanishes.
pub fn expected_improvement(mean: f64, std: f64, best_so_far: f64) -> f64 {
    if std <= 0.0 {
        return (mean - best_so_far).max(0.0);
    }
    let z = (mean - best_so_far) / std;
    (std * (norm_pdf(z) + z * norm_cdf(z))).max(0.0)
}

fn acquisition_value(acq: Acquisition, mean: f64, std: f64, best: f64) -> f64 {
    match acq {
        Acquisition::ExpectedImprovement => expected_improvement(mean, std, best),
        Acquisition::ConfidenceBound { kappa } => mean + kappa * std,
        Acquisition::ProbabilityOfImprovement => {
            if std <= 0.0 {
                f64::from(u8::from(mean > best))
            } else {
                norm_cdf((mean - best) / std)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Proposal
// ---------------------------------------------------------------------------

/// Feasible QMC candidates over the region's bounding box.
fn feasible_candidates(
    region: &PlacementRegion,
    seed: u64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    let (lat_min, lat_max, lon_min, lon_max) = region.bounding_box();
    let unit = crate::geo::sobol_unit::<2>(n, seed)?;
    let feasible: Vec<(f64, f64)> = unit
        .into_iter()
        .map(|u| {
            (
                lat_min + u[0] * (lat_max - lat_min),
                lon_min + u[1] * (lon_max - lon_min),
            )
        })
        .filter(|&(lat, lon)| region.contains(GeoPoint { lat, lon }))
        .collect();
    if feasible.is_empty() {
        return Err(Error::InfeasibleRegion(format!(
            "no feasible candidate among {n} quasi-Monte Carlo points in the region's bounding box"
        )));
    }
    Ok(feasible)
}

/// Proposes the next location to evaluate: the acquisition argmax over
/// 2048 QMC candidates inside the region, refined by 20 pattern-search
/// steps. Falls back to the maximum-uncertainty candidate when every
/// improvement-based score underflows to zero.
pub fn propose_next(
    s: &GpSurrogate,
    region: &PlacementRegion,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    propose_with(s, region, Acquisition::ExpectedImprovement, rng)
}

/// [`propose_next`] with an explicit acquisition criterion.
pub fn propose_with(
    s: &GpSurrogate,
    region: &PlacementRegion,
    acq: Acquisition,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let candidates = feasible_candidates(region, rng.next_u64(), N_ACQUISITION_CANDIDATES)?;
    let best = s.best_value();
    let improvement_based = !matches!(acq, Acquisition::ConfidenceBound { .. });

    let score_acq = |p: (f64, f64)| {
        let (mean, std) = gp_predict(s, p);
        acquisition_value(acq, mean, std, best)
    };
    let score_std = |p: (f64, f64)| gp_predict(s, p).1;

    let mut top = candidates[0];
    let mut top_score = score_acq(top);
    for &c in &candidates[1..] {
        let v = score_acq(c);
        if v > top_score {
            top = c;
            top_score = v;
        }
    }

    // A surrogate certain that nothing beats the incumbent zeroes out
    // every improvement score; explore the most uncertain point instead.
    let explore = improvement_based && !(top_score > 0.0);
    if explore {
        top_score = score_std(candidates[0]);
        top = candidates[0];
        for &c in &candidates[1..] {
            let v = score_std(c);
            if v > top_score {
                top = c;
                top_score = v;
            }
        }
    }

    let score: &dyn Fn((f64, f64)) -> f64 = if explore { &score_std } else { &score_acq };
    let (lat_min, lat_max, lon_min, lon_max) = region.bounding_box();
    let mut step_lat = (lat_max - lat_min).max(1e-9) / 32.0;
    let mut step_lon = (lon_max - lon_min).max(1e-9) / 32.0;
    for _ in 0..N_PATTERN_STEPS {
        let mut improved = false;
        for (dlat, dlon) in [
            (step_lat, 0.0),
            (-step_lat, 0.0),
            (0.0, step_lon),
            (0.0, -step_lon),
        ] {
            let cand = (top.0 + dlat, top.1 + dlon);
            if region.contains(GeoPoint {
                lat: cand.0,
                lon: cand.1,
            }) {
                let v = score(cand);
                if v > top_score {
                    top = cand;
                    top_score = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step_lat *= 0.5;
            step_lon *= 0.5;
        }
    }
    Ok(top)
}

// ---------------------------------------------------------------------------
// Greedy placement
// ---------------------------------------------------------------------------

/// Knobs for [`greedy_place`] beyond the required arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementOptions {
    /// Dataset realizations per EIG evaluation.
    pub n_realizations: usize,
    /// `snr_offset` assigned to every placed sensor (fixed, not optimized).
    pub station_offset: f64,
    /// Acquisition criterion for the surrogate loop.
    pub acquisition: Acquisition,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            n_realizations: crate::synth::DEFAULT_N_REALIZATIONS,
            station_offset: 0.0,
            acquisition: Acquisition::ExpectedImprovement,
        }
    }
}

/// One EIG evaluation in the placement loop (trace CSV row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    /// Which sensor addition this evaluation served (0-based).
    pub sensor_idx: usize,
    /// Evaluation counter within the sensor (0-based; seeds come first).
    pub iter: usize,
    pub lat: f64,
    pub lon: f64,
    /// Total network EIG with the candidate added, nats.
    pub eig_nats: f64,
    /// Monte Carlo standard error of `eig_nats`.
    pub mc_se_nats: f64,
}

/// One committed sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementStep {
    /// 0-based index of the added sensor.
    pub sensor_idx: usize,
    /// Committed location.
    pub location: GeoPoint,
    /// Network EIG with this sensor committed, nats.
    pub eig_total: f64,
    /// Monte Carlo standard error of `eig_total`.
    pub mc_std_error: f64,
    /// EIG evaluations spent on this sensor.
    pub n_evaluations: usize,
}

/// Full history of a placement run: every evaluation plus the committed
/// step per sensor. The step list has exactly one entry per added sensor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub evaluations: Vec<EvaluationRecord>,
    pub steps: Vec<PlacementStep>,
}

/// Greedily adds `k` sensors to `initial`, each chosen by Bayesian
/// optimization of the total EIG inside `region` with `budget` EIG
/// evaluations per sensor (the 10 QMC seed evaluations included).
///
/// All evaluations reuse `seed` for the EIG Monte Carlo draws (common
/// random numbers), and every random choice derives from `(seed, sensor
/// index)` streams — reruns are bit-identical for any worker count.
#[allow(clippy::too_many_arguments)]
pub fn greedy_place(
    initial: &SensorNetwork,
    k: usize,
    region: &PlacementRegion,
    support: &WeightedEventSet,
    bundle: &ModelBundle,
    budget: usize,
    seed: u64,
    opts: &PlacementOptions,
) -> Result<(SensorNetwork, OptimizationTrace)> {
    if k == 0 {
        return Err(Error::InvalidInput("placement needs k ≥ 1 sensors".into()));
    }
    if budget < N_SEED_EVALUATIONS {
        return Err(Error::InvalidInput(format!(
            "budget {budget} is below the {N_SEED_EVALUATIONS} surrogate-seeding evaluations"
        )));
    }
    let mut net = initial.clone();
    let mut trace = OptimizationTrace::default();

    for sensor_idx in 0..k {
        let mut rng = crate::rng::stream(seed, PLACEMENT_LANE, sensor_idx as u64);
        let seeds: Vec<(f64, f64)> =
            feasible_candidates(region, rng.next_u64(), N_ACQUISITION_CANDIDATES)?
                .into_iter()
                .take(N_SEED_EVALUATIONS)
                .collect();

        let mut points: Vec<(f64, f64)> = Vec::with_capacity(budget);
        let mut values: Vec<f64> = Vec::with_capacity(budget);
        let mut errors: Vec<f64> = Vec::with_capacity(budget);
        let evaluate = |loc: (f64, f64),
                            points: &mut Vec<(f64, f64)>,
                            values: &mut Vec<f64>,
                            errors: &mut Vec<f64>,
                            trace: &mut OptimizationTrace|
         -> Result<()> {
            let candidate = net.with_station(
                GeoPoint {
                    lat: loc.0,
                    lon: loc.1,
                },
                opts.station_offset,
            );
            let report = eig_total(support, &candidate, bundle, opts.n_realizations, seed)?;
            trace.evaluations.push(EvaluationRecord {
                sensor_idx,
                iter: points.len(),
                lat: loc.0,
                lon: loc.1,
                eig_nats: report.total_eig,
                mc_se_nats: report.total_mc_se,
            });
            points.push(loc);
            values.push(report.total_eig);
            errors.push(report.total_mc_se);
            Ok(())
        };

        for &loc in &seeds {
            evaluate(loc, &mut points, &mut values, &mut errors, &mut trace)?;
        }
        while points.len() < budget && points.len() >= 2 {
            let gp = gp_fit(&points, &values)?;
            let proposal = propose_with(&gp, region, opts.acquisition, &mut rng)?;
            evaluate(proposal, &mut points, &mut values, &mut errors, &mut trace)?;
        }

        let best = values
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.total_cmp(b))
            .map(|(i, _)| i)
            .expect("at least one seed evaluation");
        let location = GeoPoint {
            lat: points[best].0,
            lon: points[best].1,
        };
        net = net.with_station(location, opts.station_offset);
        trace.steps.push(PlacementStep {
            sensor_idx,
            location,
            eig_total: values[best],
            mc_std_error: errors[best],
            n_evaluations: points.len(),
        });
    }
    Ok((net, trace))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
