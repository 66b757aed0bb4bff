//! Velocity-model ensemble and travel-time machinery.
//!
//! Travel-time predictions are uncertain because the earth is: this module
//! represents that uncertainty as an ensemble of 1-D layered velocity
//! models. Each member predicts a first-arrival time analytically (direct
//! wave vs. refracted head waves), and ensemble statistics give the
//! travel-time mean μ(Δ, x) and standard deviation σ_model(Δ, x) that the
//! arrival-time likelihood consumes. Because evaluating 100+ members per
//! query is wasteful inside Monte Carlo loops, both fields are fitted once
//! into cheap surrogates:
//!
//! * [`MeanSurrogate`] — μ tabulated on a regular (Δ, x) grid, bilinear
//!   interpolation;
//! * [`SigmaSurrogate`] — σ_model as a total-degree-5 bivariate polynomial,
//!   clipped below at a positive floor.
//!
//! The same ensemble induces correlations between the travel-time errors of
//! different stations (all members mis-predict nearby paths in the same
//! way). [`empirical_correlation`] measures that correlation matrix and
//! [`fit_kernel_length`] compresses it into a squared-exponential kernel
//! with one length scale, which generalizes to station geometries not seen
//! during the fit.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean_and_sample_sd;

/// Default number of ensemble members.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 121;

/// Default lower clip for the σ surrogate, in seconds. Prevents singular
/// arrival covariances where the fitted polynomial dips toward zero.
pub const DEFAULT_SIGMA_FLOOR: f64 = 0.05;

/// Default number of equispaced depths averaged over when measuring the
/// inter-station correlation matrix.
pub const DEFAULT_CORRELATION_DEPTH_COUNT: usize = 9;

/// Search range for the correlation kernel length scale, km.
const KERNEL_LENGTH_BOUNDS_KM: (f64, f64) = (1.0, 1.0e4);

// ---------------------------------------------------------------------------
// Velocity profiles and travel times
// ---------------------------------------------------------------------------

/// A 1-D layered P-velocity model: a stack of constant-velocity layers over
/// an infinite halfspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    /// Layers from the surface down, as `(thickness_km, vp_km_s)` pairs.
    pub layers: Vec<(f64, f64)>,
    /// P velocity of the halfspace below the deepest layer, km/s.
    pub halfspace_vp: f64,
}

impl VelocityProfile {
    /// Builds a profile, enforcing positive thicknesses and velocities and a
    /// non-decreasing velocity with depth (the analytic first-arrival model
    /// assumes no low-velocity zones).
    pub fn new(layers: Vec<(f64, f64)>, halfspace_vp: f64) -> Result<Self> {
        let mut prev_vp = 0.0;
        for (i, &(h, vp)) in layers.iter().enumerate() {
            if !(h.is_finite() && h > 0.0 && vp.is_finite() && vp > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "layer {i}: thickness and vp must be finite and positive"
                )));
            }
            if vp < prev_vp {
                return Err(Error::InvalidInput(format!(
                    "layer {i}: velocity decreases with depth ({vp} < {prev_vp})"
                )));
            }
            prev_vp = vp;
        }
        if !(halfspace_vp.is_finite() && halfspace_vp > 0.0 && halfspace_vp >= prev_vp) {
            return Err(Error::InvalidInput(
                "halfspace vp must be finite, positive, and >= the deepest layer".into(),
            ));
        }
        Ok(Self {
            layers,
            halfspace_vp,
        })
    }

    /// Layer boundaries from the surface down: `[0, z_1, ..., z_n]`.
    fn boundaries(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.layers.len() + 1);
        z.push(0.0);
        for &(h, _) in &self.layers {
            z.push(z.last().unwrap() + h);
        }
        z
    }

    /// Velocity of the interval starting at boundary index `i` (the
    /// halfspace when `i` indexes the deepest boundary).
    fn interval_vp(&self, i: usize) -> f64 {
        self.layers.get(i).map_or(self.halfspace_vp, |&(_, vp)| vp)
    }
}

/// First-arrival travel time from a source at depth `x` km to a surface
/// station at epicentral distance `delta` km.
///
/// The arrival is the minimum over:
///
/// * the **direct wave** — a straight ray from source to station timed with
///   the slowness of each crossed depth interval (for a surface source this
///   degenerates to a horizontal ray in the top layer);
/// * one **head wave** per interface below the source — down at the
///   critical angle, along the interface at the refractor velocity, and
///   back up; included only beyond its geometric critical distance, where
///   the refracted geometry first closes.
///
/// Sources may sit in any layer or in the halfspace (where only the direct
/// branch exists); negative or non-finite depths are outside the model.
pub fn travel_time(p: &VelocityProfile, delta: f64, x: f64) -> Result<f64> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidInput(format!(
            "epicentral distance must be finite and non-negative, got {delta}"
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::OutOfModel(format!(
            "source depth {x} km lies above the surface or is not finite"
        )));
    }

    let z = p.boundaries();
    let n_layers = p.layers.len();

    // Direct wave: straight chord from (0, x) to (delta, 0). The chord
    // crosses each depth interval in proportion to the interval's share of
    // the source depth, so the time is chord · Σ dz_i/v_i / x.
    let direct = if x == 0.0 {
        delta / p.interval_vp(0)
    } else {
        let chord = delta.hypot(x);
        let mut slowness_depth = 0.0; // Σ dz_i / v_i over [0, x]
        for i in 0..=n_layers {
            let top = z[i];
            let bottom = if i == n_layers { f64::INFINITY } else { z[i + 1] };
            let dz = (x.min(bottom) - top).max(0.0);
            if dz > 0.0 {
                slowness_depth += dz / p.interval_vp(i);
            }
            if bottom >= x {
                break;
            }
        }
        chord * slowness_depth / x
    };

    // Head waves: one candidate per interface strictly below the source.
    let mut best = direct;
    for m in 0..n_layers {
        let interface = z[m + 1];
        if x > interface {
            continue; // source below this interface: no head wave from it
        }
        let v_r = p.interval_vp(m + 1);

        // Per-interval path thickness above the refractor: the up-going leg
        // crosses every interval fully; the down-going leg crosses only the
        // part below the source.
        let mut time = delta / v_r;
        let mut critical = 0.0;
        let mut valid = true;
        for i in 0..=m {
            let v = p.interval_vp(i);
            if v >= v_r {
                valid = false; // no velocity jump: no refracted branch
                break;
            }
            let up = z[i + 1] - z[i];
            let down = (z[i + 1] - x.max(z[i])).max(0.0);
            let g = up + down;
            let sin = v / v_r;
            let cos = (1.0 - sin * sin).sqrt();
            time += g * cos / v; // η_i = √(1/v_i² − 1/v_r²) = cos θ_i / v_i
            critical += g * sin / cos;
        }
        if valid && delta >= critical && time < best {
            best = time;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

/// An ensemble of velocity profiles representing earth-model uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    /// The member profiles.
    pub profiles: Vec<VelocityProfile>,
}

impl Ensemble {
    /// Wraps a member list; sample statistics need at least two members.
    pub fn new(profiles: Vec<VelocityProfile>) -> Result<Self> {
        if profiles.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "ensemble needs >= 2 members for sample statistics, got {}",
                profiles.len()
            )));
        }
        Ok(Self { profiles })
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    /// True when there are no members (never true for validated ensembles).
    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Stream lane for ensemble generation (see [`crate::rng::stream`]).
const ENSEMBLE_LANE: u64 = 0x454e_5345_4d42_4c45; // "ENSEMBLE"

/// Draws a synthetic crust-over-mantle ensemble: crust vp ~ N(6.0, 0.25²)
/// km/s, crust thickness ~ N(35, 4²) km, mantle vp ~ N(8.0, 0.15²) km/s,
/// redrawn (per member) until the profile is monotone with positive
/// thickness. Member `i` uses its own random stream, so the ensemble is
/// reproducible and order-independent.
pub fn synthetic_ensemble(n: usize, seed: u64) -> Result<Ensemble> {
    let crust_vp = Normal::new(6.0, 0.25).expect("valid normal");
    let thickness = Normal::new(35.0, 4.0).expect("valid normal");
    let mantle_vp = Normal::new(8.0, 0.15).expect("valid normal");
    let profiles = (0..n)
        .map(|i| {
            let mut rng = crate::rng::stream(seed, ENSEMBLE_LANE, i as u64);
            loop {
                let vc = crust_vp.sample(&mut rng);
                let h = thickness.sample(&mut rng);
                let vm = mantle_vp.sample(&mut rng);
                if h > 0.0 && 0.0 < vc && vc <= vm {
                    return VelocityProfile {
                        layers: vec![(h, vc)],
                        halfspace_vp: vm,
                    };
                }
            }
        })
        .collect();
    Ensemble::new(profiles)
}

/// Sample mean and (N−1)-denominator sample standard deviation of the
/// member travel times at one (distance, depth) point.
pub fn ensemble_stats(ens: &Ensemble, delta: f64, x: f64) -> Result<(f64, f64)> {
    let mut times = Vec::with_capacity(ens.len());
    for p in &ens.profiles {
        times.push(travel_time(p, delta, x)?);
    }
    Ok(mean_and_sample_sd(&times))
}

// ---------------------------------------------------------------------------
// Surrogates
// ---------------------------------------------------------------------------

/// Regular evaluation lattice for surrogate fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateGrid {
    /// Distance range, km. The lower bound must stay off (0, 0) jointly
    /// with the depth range so travel times are positive.
    pub delta_min_km: f64,
    /// Upper distance bound, km.
    pub delta_max_km: f64,
    /// Number of distance samples (>= 2).
    pub n_delta: usize,
    /// Depth range, km.
    pub depth_min_km: f64,
    /// Upper depth bound, km.
    pub depth_max_km: f64,
    /// Number of depth samples (>= 2).
    pub n_depth: usize,
}

impl Default for SurrogateGrid {
    /// Covers a regional monitoring footprint: 0.1–600 km distance, 0–40 km
    /// depth.
    fn default() -> Self {
        Self {
            delta_min_km: 0.1,
            delta_max_km: 600.0,
            n_delta: 49,
            depth_min_km: 0.0,
            depth_max_km: 40.0,
            n_depth: 9,
        }
    }
}

impl SurrogateGrid {
    fn validate(&self) -> Result<()> {
        let ok = self.delta_min_km.is_finite()
            && self.delta_max_km.is_finite()
            && self.depth_min_km.is_finite()
            && self.depth_max_km.is_finite()
            && self.delta_min_km >= 0.0
            && self.depth_min_km >= 0.0
            && self.delta_min_km < self.delta_max_km
            && self.depth_min_km < self.depth_max_km
            && self.n_delta >= 2
            && self.n_depth >= 2;
        if !ok {
            return Err(Error::InvalidInput("malformed surrogate grid".into()));
        }
        if self.n_delta * self.n_depth < SIGMA_COEF_COUNT {
            return Err(Error::DegenerateGrid(format!(
                "grid has {} points but the degree-5 fit needs {SIGMA_COEF_COUNT}",
                self.n_delta * self.n_depth
            )));
        }
        Ok(())
    }

    fn delta_values(&self) -> Vec<f64> {
        linspace(self.delta_min_km, self.delta_max_km, self.n_delta)
    }

    fn depth_values(&self) -> Vec<f64> {
        linspace(self.depth_min_km, self.depth_max_km, self.n_depth)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Travel-time mean μ(Δ, x) tabulated on a regular grid with bilinear
/// interpolation between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSurrogate {
    grid: SurrogateGrid,
    /// Node values, row-major over (delta index, depth index).
    values: Vec<f64>,
}

impl MeanSurrogate {
    /// Interpolated μ at `(delta, x)`; errors outside the fitted grid.
    pub fn eval(&self, delta: f64, x: f64) -> Result<f64> {
        let u = grid_coord(
            delta,
            self.grid.delta_min_km,
            self.grid.delta_max_km,
            self.grid.n_delta,
            "distance",
        )?;
        let v = grid_coord(
            x,
            self.grid.depth_min_km,
            self.grid.depth_max_km,
            self.grid.n_depth,
            "depth",
        )?;
        let (i, fu) = (u.0, u.1);
        let (j, fv) = (v.0, v.1);
        let nd = self.grid.n_depth;
        let at = |a: usize, b: usize| self.values[a * nd + b];
        Ok(at(i, j) * (1.0 - fu) * (1.0 - fv)
            + at(i + 1, j) * fu * (1.0 - fv)
            + at(i, j + 1) * (1.0 - fu) * fv
            + at(i + 1, j + 1) * fu * fv)
    }

    /// The fitted grid.
    pub fn grid(&self) -> &SurrogateGrid {
        &self.grid
    }
}

/// Locates `value` in a regular axis: cell index and fractional offset.
fn grid_coord(
    value: f64,
    lo: f64,
    hi: f64,
    n: usize,
    what: &'static str,
) -> Result<(usize, f64)> {
    if !value.is_finite() || value < lo - 1e-9 || value > hi + 1e-9 {
        return Err(Error::OutOfDomain {
            what,
            value,
            lo,
            hi,
        });
    }
    let step = (hi - lo) / (n - 1) as f64;
    let t = ((value - lo) / step).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    Ok((i, t - i as f64))
}

/// Number of coefficients of a total-degree-5 bivariate polynomial.
const SIGMA_COEF_COUNT: usize = 21;

/// Travel-time standard deviation σ_model(Δ, x) as a total-degree-5
/// bivariate polynomial, fitted by least squares and clipped below at
/// `sigma_floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSurrogate {
    /// Polynomial coefficients over inputs scaled to [−1, 1]², ordered by
    /// ascending total degree, then ascending distance power (Δ⁰x⁰, Δ⁰x¹,
    /// Δ¹x⁰, Δ⁰x², ...).
    coeffs: Vec<f64>,
    grid: SurrogateGrid,
    /// Lower clip, seconds.
    pub sigma_floor: f64,
    /// Root-mean-square fit residual over the grid, seconds.
    pub rms_residual: f64,
}

impl SigmaSurrogate {
    /// σ_model at `(delta, x)`, clipped below at [`Self::sigma_floor`];
    /// errors outside the fitted domain.
    pub fn eval(&self, delta: f64, x: f64) -> Result<f64> {
        let (lo_d, hi_d) = (self.grid.delta_min_km, self.grid.delta_max_km);
        let (lo_x, hi_x) = (self.grid.depth_min_km, self.grid.depth_max_km);
        if !delta.is_finite() || delta < lo_d - 1e-9 || delta > hi_d + 1e-9 {
            return Err(Error::OutOfDomain {
                what: "distance",
                value: delta,
                lo: lo_d,
                hi: hi_d,
            });
        }
        if !x.is_finite() || x < lo_x - 1e-9 || x > hi_x + 1e-9 {
            return Err(Error::OutOfDomain {
                what: "depth",
                value: x,
                lo: lo_x,
                hi: hi_x,
            });
        }
        let u = rescale(delta, lo_d, hi_d);
        let v = rescale(x, lo_x, hi_x);
        let mut raw = 0.0;
        for (k, (i, j)) in sigma_basis_powers().enumerate() {
            raw += self.coeffs[k] * u.powi(i) * v.powi(j);
        }
        Ok(raw.max(self.sigma_floor))
    }

    /// The fitted grid.
    pub fn grid(&self) -> &SurrogateGrid {
        &self.grid
    }
}

/// Maps `value` from `[lo, hi]` to `[-1, 1]`.
fn rescale(value: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (value - lo) / (hi - lo) - 1.0
}

/// `(distance power, depth power)` pairs of the degree-5 basis, in
/// coefficient order.
fn sigma_basis_powers() -> impl Iterator<Item = (i32, i32)> {
    (0..=5).flat_map(|total| (0..=total).map(move |i| (i, total - i)))
}

/// Least-squares fit of the degree-5 σ polynomial over scaled inputs.
/// `points` are (Δ, x) pairs in physical units; `values` the target σ.
fn fit_sigma_polynomial(
    points: &[(f64, f64)],
    values: &[f64],
    grid: SurrogateGrid,
    sigma_floor: f64,
) -> Result<SigmaSurrogate> {
    let n = points.len();
    let mut design = DMatrix::<f64>::zeros(n, SIGMA_COEF_COUNT);
    for (r, &(d, x)) in points.iter().enumerate() {
        let u = rescale(d, grid.delta_min_km, grid.delta_max_km);
        let v = rescale(x, grid.depth_min_km, grid.depth_max_km);
        for (k, (i, j)) in sigma_basis_powers().enumerate() {
            design[(r, k)] = u.powi(i) * v.powi(j);
        }
    }
    let rhs = DMatrix::<f64>::from_column_slice(n, 1, values);
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-10;
    if svd.rank(eps) < SIGMA_COEF_COUNT {
        return Err(Error::DegenerateGrid(
            "sigma fit grid does not span the degree-5 basis".into(),
        ));
    }
    let coeffs_mat = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::DegenerateGrid(e.to_string()))?;
    let coeffs: Vec<f64> = coeffs_mat.column(0).iter().copied().collect();

    let residual = &design * &coeffs_mat - &rhs;
    let rms_residual = (residual.norm_squared() / n as f64).sqrt();

    Ok(SigmaSurrogate {
        coeffs,
        grid,
        sigma_floor,
        rms_residual,
    })
}

/// Fits both travel-time surrogates over a regular grid: tabulated μ and
/// the degree-5 σ polynomial (clipped at [`DEFAULT_SIGMA_FLOOR`]).
pub fn fit_surrogates(ens: &Ensemble, grid: &SurrogateGrid) -> Result<(MeanSurrogate, SigmaSurrogate)> {
    grid.validate()?;
    let deltas = grid.delta_values();
    let depths = grid.depth_values();

    let mut mu_values = Vec::with_capacity(deltas.len() * depths.len());
    let mut points = Vec::with_capacity(mu_values.capacity());
    let mut sigma_values = Vec::with_capacity(mu_values.capacity());
    for &d in &deltas {
        for &x in &depths {
            let (mu, sigma) = ensemble_stats(ens, d, x)?;
            if mu <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "grid reaches non-positive travel time at ({d} km, {x} km); \
                     keep the grid off the zero-offset point"
                )));
            }
            mu_values.push(mu);
            points.push((d, x));
            sigma_values.push(sigma);
        }
    }

    let mean = MeanSurrogate {
        grid: *grid,
        values: mu_values,
    };
    let sigma = fit_sigma_polynomial(&points, &sigma_values, *grid, DEFAULT_SIGMA_FLOOR)?;
    Ok((mean, sigma))
}

// ---------------------------------------------------------------------------
// Station correlation
// ---------------------------------------------------------------------------

/// How kernel arguments are derived from station geometry when assembling
/// arrival covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    /// Kernel argument is the difference of epicentral distances,
    /// |Δ_j − Δ_k|. This is the form the length scale is fitted to.
    #[default]
    EpicentralDifference,
    /// Kernel argument is the station–station separation.
    StationSeparation,
    /// No inter-station correlation: the correlation matrix is the
    /// identity regardless of geometry.
    Independent,
}

/// Squared-exponential correlation model for inter-station travel-time
/// errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    /// Kernel length scale, km.
    pub length_scale_km: f64,
    /// Geometry convention used when assembling covariances. The scalar
    /// kernel itself is mode-free; `Independent` short-circuits assembly
    /// to the identity matrix.
    pub mode: CorrelationMode,
}

/// Squared-exponential kernel value for two distance arguments:
/// exp(−(Δ_j − Δ_k)² / (2𝔩²)). In (0, 1], and 1 iff the arguments match.
pub fn kernel_correlation(model: &CorrelationModel, delta_j: f64, delta_k: f64) -> f64 {
    let d = delta_j - delta_k;
    (-(d * d) / (2.0 * model.length_scale_km * model.length_scale_km)).exp()
}

/// Correlation matrix across stations from per-member samples.
/// `samples[(i, j)]` is member `i`'s travel time at station `j`; columns
/// with zero variance have undefined correlation.
pub(crate) fn correlation_from_samples(samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = samples.shape();
    if n < 2 {
        return Err(Error::InvalidInput(
            "correlation needs >= 2 ensemble members".into(),
        ));
    }
    let means: Vec<f64> = (0..k).map(|j| samples.column(j).mean()).collect();
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut s = 0.0;
            for i in 0..n {
                s += (samples[(i, a)] - means[a]) * (samples[(i, b)] - means[b]);
            }
            let c = s / (n - 1) as f64;
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let mut corr = DMatrix::<f64>::identity(k, k);
    for a in 0..k {
        if cov[(a, a)] <= 0.0 {
            return Err(Error::UndefinedCorrelation(format!(
                "station {a} has zero travel-time variance across the ensemble"
            )));
        }
    }
    for a in 0..k {
        for b in (a + 1)..k {
            let r = cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt();
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    Ok(corr)
}

/// Measures the inter-station travel-time correlation matrix induced by
/// ensemble spread: the per-depth correlation of member travel times across
/// stations (at epicentral distances `deltas`), averaged over `depths`.
/// Unit diagonal, symmetric.
pub fn empirical_correlation(
    ens: &Ensemble,
    deltas: &[f64],
    depths: &[f64],
) -> Result<DMatrix<f64>> {
    if deltas.is_empty() {
        return Err(Error::EmptySet("station distances"));
    }
    if depths.is_empty() {
        return Err(Error::EmptySet("correlation depths"));
    }
    let k = deltas.len();
    let mut acc = DMatrix::<f64>::zeros(k, k);
    for &x in depths {
        let mut samples = DMatrix::<f64>::zeros(ens.len(), k);
        for (i, p) in ens.profiles.iter().enumerate() {
            for (j, &d) in deltas.iter().enumerate() {
                samples[(i, j)] = travel_time(p, d, x)?;
            }
        }
        acc += correlation_from_samples(&samples)?;
    }
    Ok(acc / depths.len() as f64)
}

/// Fits the kernel length scale to a measured correlation matrix by
/// golden-section search on log 𝔩 over [1, 10⁴] km, minimizing the
/// Frobenius distance between `gamma` and the kernel matrix over `deltas`.
pub fn fit_kernel_length(gamma: &DMatrix<f64>, deltas: &[f64]) -> Result<CorrelationModel> {
    let k = deltas.len();
    if gamma.shape() != (k, k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: gamma.nrows(),
        });
    }
    if gamma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "correlation matrix has non-finite entries".into(),
        ));
    }
    for a in 0..k {
        if (gamma[(a, a)] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "correlation matrix must have unit diagonal".into(),
            ));
        }
    }

    let objective = |log_l: f64| {
        let model = CorrelationModel {
            length_scale_km: log_l.exp(),
            mode: CorrelationMode::EpicentralDifference,
        };
        let mut sq = 0.0;
        for a in 0..k {
            for b in 0..k {
                let diff = gamma[(a, b)] - kernel_correlation(&model, deltas[a], deltas[b]);
                sq += diff * diff;
            }
        }
        sq
    };

    let (mut lo, mut hi) = (
        KERNEL_LENGTH_BOUNDS_KM.0.ln(),
        KERNEL_LENGTH_BOUNDS_KM.1.ln(),
    );
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..120 {
        // Ties resolve toward smaller lengths so that a flat objective
        // (e.g. an identity Γ over well-separated stations) lands on the
        // lower bound instead of an arbitrary plateau point.
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = objective(d);
        }
    }
    Ok(CorrelationModel {
        length_scale_km: ((lo + hi) / 2.0).exp(),
        mode: CorrelationMode::EpicentralDifference,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
