//! Sample paths of G-Brownian motion under explicit volatility scenarios.
//!
//! A G-Brownian motion carries volatility ambiguity over a band
//! `[lo, hi]`. Each [`ScenarioPolicy`] picks one adapted, piecewise-constant
//! volatility process inside the band; under that scenario the driver is a
//! classical Brownian motion whose increment over step `n` has variance
//! `sigma_n^2 * dt_n`, and the quadratic variation grows by exactly
//! `sigma_n^2 * dt_n`.
//!
//! The sublinear expectation of a path functional is estimated by
//! [`sublinear_expect`] as the maximum of per-scenario Monte Carlo means.
//! The scenario family is finite while the true sublinear expectation is a
//! supremum over all adapted volatility selections, so the estimator is
//! biased low: it lower-bounds the true value, up to Monte Carlo noise.
//! Every "empirical value stays below a theoretical bound" experiment in
//! this crate remains valid under that bias direction, and reports carry a
//! note saying so.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats::mean_and_std_error;

/// Draw-coordinate channel for per-step volatility selection.
const CHANNEL_POLICY: u64 = 0;
/// Draw-coordinate channel for the Gaussian driving the increment.
const CHANNEL_NOISE: u64 = 1;

/// Hard cap on grid size, to keep misconfigured resolutions from
/// exhausting memory.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Volatility uncertainty interval `[lo, hi]` with `0 <= lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolatilityBand {
    lo: f64,
    hi: f64,
}

impl VolatilityBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Band(format!("endpoints must be finite, got [{lo}, {hi}]")));
        }
        if lo < 0.0 || lo > hi {
            return Err(Error::Band(format!("need 0 <= lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(VolatilityBand { lo, hi })
    }

    /// Degenerate band `[sigma, sigma]`, i.e. a classical Brownian driver.
    pub fn fixed(sigma: f64) -> Result<Self> {
        VolatilityBand::new(sigma, sigma)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, sigma: f64) -> bool {
        sigma >= self.lo && sigma <= self.hi
    }
}

/// Adapted volatility selection rule within a band.
///
/// The constant policies pin the volatility to an endpoint or the midpoint
/// for the whole path; the per-step policies redraw it independently on
/// every subinterval, which exercises genuinely path-dependent quadratic
/// variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioPolicy {
    ConstantLo,
    ConstantHi,
    ConstantMid,
    PerStepUniform,
    PerStepBangBang,
}

impl ScenarioPolicy {
    pub const ALL: [ScenarioPolicy; 5] = [
        ScenarioPolicy::ConstantLo,
        ScenarioPolicy::ConstantHi,
        ScenarioPolicy::ConstantMid,
        ScenarioPolicy::PerStepUniform,
        ScenarioPolicy::PerStepBangBang,
    ];

    /// Stable numeric id, also used as the RNG stream for this scenario.
    /// Changing these would silently change every simulation, so they are
    /// part of the output contract.
    pub fn id(self) -> u32 {
        match self {
            ScenarioPolicy::ConstantLo => 0,
            ScenarioPolicy::ConstantHi => 1,
            ScenarioPolicy::ConstantMid => 2,
            ScenarioPolicy::PerStepUniform => 3,
            ScenarioPolicy::PerStepBangBang => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioPolicy::ConstantLo => "constant-lo",
            ScenarioPolicy::ConstantHi => "constant-hi",
            ScenarioPolicy::ConstantMid => "constant-mid",
            ScenarioPolicy::PerStepUniform => "per-step-uniform",
            ScenarioPolicy::PerStepBangBang => "per-step-bang-bang",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        ScenarioPolicy::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario policy `{name}`")))
    }

    /// Volatility for one step. `draw` must lie in (0, 1); it is only
    /// consumed by the per-step policies.
    fn sigma(self, band: &VolatilityBand, draw: f64) -> f64 {
        match self {
            ScenarioPolicy::ConstantLo => band.lo,
            ScenarioPolicy::ConstantHi => band.hi,
            ScenarioPolicy::ConstantMid => band.mid(),
            ScenarioPolicy::PerStepUniform => {
                // The affine map can escape the band by an ulp; clamp so the
                // in-band invariant holds exactly.
                (band.lo + draw * (band.hi - band.lo)).clamp(band.lo, band.hi)
            }
            ScenarioPolicy::PerStepBangBang => {
                if draw < 0.5 {
                    band.lo
                } else {
                    band.hi
                }
            }
        }
    }

    fn is_per_step(self) -> bool {
        matches!(
            self,
            ScenarioPolicy::PerStepUniform | ScenarioPolicy::PerStepBangBang
        )
    }
}

/// Strictly increasing simulation times `t_0 < t_1 < ... < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid from explicit points. Prefer [`make_grid`] for the
    /// standard uniform-with-capped-final-step construction.
    pub fn from_points(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid(format!(
                "need at least 2 points, got {}",
                times.len()
            )));
        }
        if times.len() > MAX_GRID_POINTS {
            return Err(Error::Grid(format!(
                "grid has {} points, cap is {MAX_GRID_POINTS}",
                times.len()
            )));
        }
        for pair in times.windows(2) {
            if !pair[0].is_finite() || !pair[1].is_finite() || pair[0] >= pair[1] {
                return Err(Error::Grid(format!(
                    "points must be finite and strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(TimeGrid { times })
    }

    pub fn points(&self) -> &[f64] {
        &self.times
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    /// Index of `t` among the grid points, by exact floating-point match.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
            .ok()
    }

    /// For each point of `self`, its index in the finer grid.
    ///
    /// Matching is exact: refinements produced by [`make_grid`] share the
    /// coarse points bit-for-bit (same rounded division, same addition), so
    /// no tolerance is needed and none is applied.
    pub fn indices_into(&self, fine: &TimeGrid) -> Result<Vec<usize>> {
        let fp = fine.points();
        let mut indices = Vec::with_capacity(self.times.len());
        let mut j = 0usize;
        for &t in &self.times {
            while j < fp.len() && fp[j] < t {
                j += 1;
            }
            if j >= fp.len() || fp[j] != t {
                return Err(Error::GridMismatch(format!(
                    "point t = {t} is not on the finer grid"
                )));
            }
            indices.push(j);
        }
        Ok(indices)
    }
}

/// Uniform grid on `[t0, t_end]` with step `1/resolution`, the final step
/// capped at `t_end`.
///
/// Interior points are computed as `t0 + n / resolution` (one rounded
/// division, one rounded addition each), never by accumulation, so the
/// grids for resolutions `q` and `m * q` share the coarse points exactly.
/// An interior point landing within a relative `1e-12` of `t_end` is
/// dropped in favor of the endpoint, so a degenerate final sliver cannot
/// arise from rounding in `t_end - t0`.
pub fn make_grid(t0: f64, t_end: f64, resolution: u32) -> Result<TimeGrid> {
    if !t0.is_finite() || !t_end.is_finite() || t0 >= t_end {
        return Err(Error::Grid(format!(
            "need finite t0 < t_end, got [{t0}, {t_end}]"
        )));
    }
    if resolution == 0 {
        return Err(Error::Grid("resolution must be positive".into()));
    }
    let q = f64::from(resolution);
    if (t_end - t0) * q >= (MAX_GRID_POINTS - 2) as f64 {
        return Err(Error::Grid(format!(
            "resolution {resolution} over [{t0}, {t_end}] exceeds {MAX_GRID_POINTS} grid points"
        )));
    }
    let tiny = 1e-12 * t0.abs().max(t_end.abs()).max(1.0);
    let mut times = vec![t0];
    let mut n = 1u64;
    loop {
        let t = t0 + (n as f64) / q;
        if t >= t_end - tiny {
            break;
        }
        times.push(t);
        n += 1;
    }
    times.push(t_end);
    TimeGrid::from_points(times)
}

/// One simulated driver path: per-step volatility choices, the Brownian
/// sample `W`, and its quadratic variation `QV`, all on a [`TimeGrid`].
///
/// Stored per step is the squared volatility, the quantity the quadratic
/// variation is built from: `QV[n+1] - QV[n]` equals `sigma_sq[n] * dt_n`
/// exactly as floating-point values for generated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct GPath {
    grid: TimeGrid,
    policy: ScenarioPolicy,
    sigma_sq: Vec<f64>,
    w: Vec<f64>,
    qv: Vec<f64>,
}

impl GPath {
    /// Assembles a path from raw parts, checking the structural invariants
    /// (lengths, zero initial values, monotone quadratic variation).
    pub fn from_parts(
        grid: TimeGrid,
        policy: ScenarioPolicy,
        sigma_sq: Vec<f64>,
        w: Vec<f64>,
        qv: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.n_points();
        if w.len() != n || qv.len() != n || sigma_sq.len() != n - 1 {
            return Err(Error::LengthMismatch(format!(
                "grid has {n} points; got {} W values, {} QV values, {} volatilities",
                w.len(),
                qv.len(),
                sigma_sq.len()
            )));
        }
        if w[0] != 0.0 || qv[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "path must start at W = 0, QV = 0".into(),
            ));
        }
        if qv.windows(2).any(|p| !(p[1] >= p[0])) {
            return Err(Error::InvalidArgument(
                "quadratic variation must be nondecreasing".into(),
            ));
        }
        if sigma_sq.iter().any(|&s| !s.is_finite() || s < 0.0) {
            return Err(Error::InvalidArgument(
                "squared volatilities must be finite and nonnegative".into(),
            ));
        }
        Ok(GPath {
            grid,
            policy,
            sigma_sq,
            w,
            qv,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn policy(&self) -> ScenarioPolicy {
        self.policy
    }

    pub fn scenario_id(&self) -> u32 {
        self.policy.id()
    }

    /// Squared volatility per step.
    pub fn sigma_sq(&self) -> &[f64] {
        &self.sigma_sq
    }

    /// Driver values per grid point, `w()[0] == 0`.
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Quadratic variation per grid point, `qv()[0] == 0`.
    pub fn qv(&self) -> &[f64] {
        &self.qv
    }

    pub fn w_end(&self) -> f64 {
        *self.w.last().unwrap()
    }

    pub fn qv_end(&self) -> f64 {
        *self.qv.last().unwrap()
    }
}

/// Simulates one path of the scenario's driver on `grid`.
///
/// All randomness is a pure function of `(seed, policy id, path_index,
/// step)`: regenerating any path needs no other state, and paths for
/// different indices or scenarios never share draws. The step's Gaussian
/// increment uses the actual step length, including a shortened final step.
pub fn generate_path(
    grid: &TimeGrid,
    band: &VolatilityBand,
    policy: ScenarioPolicy,
    seed: u64,
    path_index: u64,
) -> GPath {
    let rng = CounterRng::new(seed, u64::from(policy.id()), path_index);
    let pts = grid.points();
    let steps = pts.len() - 1;
    let mut sigma_sq = Vec::with_capacity(steps);
    let mut w = Vec::with_capacity(steps + 1);
    let mut qv = Vec::with_capacity(steps + 1);
    w.push(0.0);
    qv.push(0.0);
    for n in 0..steps {
        let dt = pts[n + 1] - pts[n];
        let draw = if policy.is_per_step() {
            rng.uniform(n as u64, CHANNEL_POLICY)
        } else {
            0.0
        };
        let sigma = policy.sigma(band, draw);
        let var = sigma * sigma;
        let dw = sigma * dt.sqrt() * rng.gaussian(n as u64, CHANNEL_NOISE);
        sigma_sq.push(var);
        w.push(w[n] + dw);
        qv.push(qv[n] + var * dt);
    }
    GPath {
        grid: grid.clone(),
        policy,
        sigma_sq,
        w,
        qv,
    }
}

/// Restricts a fine path to a coarser grid, keeping the same noise.
///
/// `W` and `QV` are read off at the shared points, so the coarse path is
/// the fine path's restriction, not a new simulation: this is the coupling
/// used for strong-error measurements. The coarse squared volatility over a
/// step is its quadratic-variation increment divided by the step length (copied
/// directly when the step contains exactly one fine step, which also makes
/// restriction to the identical grid an identity).
///
/// Fails if some coarse point is not a fine grid point.
pub fn refine_couple(fine: &GPath, coarse_grid: &TimeGrid) -> Result<GPath> {
    let indices = coarse_grid.indices_into(fine.grid())?;
    let cp = coarse_grid.points();
    let mut sigma_sq = Vec::with_capacity(cp.len() - 1);
    let mut w = Vec::with_capacity(cp.len());
    let mut qv = Vec::with_capacity(cp.len());
    w.push(0.0);
    qv.push(0.0);
    if indices[0] != 0 {
        return Err(Error::GridMismatch(
            "coarse grid must start at the fine grid's origin".into(),
        ));
    }
    for k in 0..cp.len() - 1 {
        let (j0, j1) = (indices[k], indices[k + 1]);
        w.push(fine.w[j1]);
        qv.push(fine.qv[j1]);
        if j1 == j0 + 1 {
            sigma_sq.push(fine.sigma_sq[j0]);
        } else {
            sigma_sq.push((fine.qv[j1] - fine.qv[j0]) / (cp[k + 1] - cp[k]));
        }
    }
    GPath::from_parts(coarse_grid.clone(), fine.policy, sigma_sq, w, qv)
}

/// Forward Ito sum `sum_n integrand[n] * (W[n+1] - W[n])`.
///
/// `integrand` holds one value per grid point; the final entry is unused by
/// the sum but required, so callers can pass a process sampled on the same
/// grid without slicing.
pub fn ito_sum(integrand: &[f64], path: &GPath) -> Result<f64> {
    let w = path.w();
    if integrand.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "integrand has {} values, path has {} grid points",
            integrand.len(),
            w.len()
        )));
    }
    let mut acc = 0.0;
    for n in 0..w.len() - 1 {
        acc += integrand[n] * (w[n + 1] - w[n]);
    }
    Ok(acc)
}

/// Monte Carlo mean and standard error of a functional under one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMean {
    pub scenario: ScenarioPolicy,
    pub mean: f64,
    pub std_error: f64,
}

/// Result of [`sublinear_expect`]: the estimate is the maximum of the
/// per-scenario means, which lower-bounds the true sublinear expectation
/// (see the module docs).
#[derive(Debug, Clone, PartialEq)]
pub struct SublinearEstimate {
    pub value: f64,
    pub per_scenario: Vec<ScenarioMean>,
    pub argmax: ScenarioPolicy,
    pub n_paths: u64,
}

/// Estimates the sublinear expectation of `functional` over the scenario
/// family: simulate `n_paths` paths per scenario, average, take the
/// maximum mean.
///
/// Paths are keyed by `(seed, scenario, path index)` alone, so two
/// functionals evaluated with the same arguments see identical paths
/// (shared randomness across functionals), while different scenarios use
/// disjoint draws. Results are bit-identical for any rayon thread count:
/// path values are collected in index order and reduced sequentially.
pub fn sublinear_expect<F>(
    functional: F,
    band: &VolatilityBand,
    grid: &TimeGrid,
    family: &[ScenarioPolicy],
    n_paths: u64,
    seed: u64,
) -> Result<SublinearEstimate>
where
    F: Fn(&GPath) -> f64 + Sync,
{
    if family.is_empty() {
        return Err(Error::InvalidArgument("scenario family is empty".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 paths for a standard error, got {n_paths}"
        )));
    }
    let mut per_scenario = Vec::with_capacity(family.len());
    for &policy in family {
        let values: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|i| functional(&generate_path(grid, band, policy, seed, i)))
            .collect();
        let (mean, std_error) = mean_and_std_error(&values);
        per_scenario.push(ScenarioMean {
            scenario: policy,
            mean,
            std_error,
        });
    }
    let mut best = &per_scenario[0];
    for s in &per_scenario[1..] {
        if s.mean > best.mean {
            best = s;
        }
    }
    Ok(SublinearEstimate {
        value: best.mean,
        argmax: best.scenario,
        per_scenario,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    #[test]
    fn band_rejects_bad_endpoints() {
        assert!(VolatilityBand::new(-0.1, 1.0).is_err());
        assert!(VolatilityBand::new(2.0, 1.0).is_err());
        assert!(VolatilityBand::new(0.0, f64::NAN).is_err());
        assert!(VolatilityBand::new(0.0, f64::INFINITY).is_err());
        assert!(VolatilityBand::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn uniform_grid_points_are_exact() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.n_steps(), 4);
    }

    #[test]
    fn final_step_is_capped_at_the_horizon() {
        let g = make_grid(0.0, 0.75, 2).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 0.75]);

        // Horizon shorter than one step: a single capped interval.
        let g = make_grid(0.0, 0.3, 2).unwrap();
        assert_eq!(g.points(), &[0.0, 0.3]);

        let g = make_grid(0.25, 1.1, 4).unwrap();
        assert_eq!(g.t0(), 0.25);
        assert_eq!(g.t_end(), 1.1);
        assert_eq!(g.n_steps(), 4);
        assert!(g.step(3) <= 0.25 + 1e-15);
    }

    #[test]
    fn rounding_slivers_are_absorbed_into_the_endpoint() {
        // 0.1 + 3/10 lands one ulp above 0.4 in binary; the grid must not
        // emit a degenerate final step next to the horizon.
        let g = make_grid(0.1, 0.4, 10).unwrap();
        assert_eq!(g.n_steps(), 3);
        assert_eq!(g.t_end(), 0.4);
    }

    #[test]
    fn refinements_share_coarse_points_exactly() {
        for (t0, t_end, q, m) in [
            (0.0, 1.0, 4u32, 4u32),
            (0.1, 0.9, 3, 7),
            (-2.5, 1.25, 5, 16),
            (0.0, 0.77, 2, 12),
        ] {
            let coarse = make_grid(t0, t_end, q).unwrap();
            let fine = make_grid(t0, t_end, q * m).unwrap();
            let idx = coarse.indices_into(&fine).unwrap();
            for (k, &j) in idx.iter().enumerate() {
                assert_eq!(coarse.points()[k].to_bits(), fine.points()[j].to_bits());
            }
        }
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(make_grid(0.0, 0.0, 4).is_err());
        assert!(make_grid(1.0, 0.0, 4).is_err());
        assert!(make_grid(0.0, 1.0, 0).is_err());
        assert!(make_grid(0.0, f64::INFINITY, 4).is_err());
        assert!(make_grid(0.0, 1e9, 100).is_err());
        assert!(TimeGrid::from_points(vec![0.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn generated_paths_are_reproducible() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let b = band(0.5, 1.0);
        for policy in ScenarioPolicy::ALL {
            let p1 = generate_path(&g, &b, policy, 99, 7);
            let p2 = generate_path(&g, &b, policy, 99, 7);
            assert_eq!(p1, p2);
            let p3 = generate_path(&g, &b, policy, 99, 8);
            assert_ne!(p1.w(), p3.w());
        }
    }

    #[test]
    fn volatility_stays_in_band_exactly() {
        let g = make_grid(0.0, 1.0, 64).unwrap();
        let b = band(0.3, 0.9);
        let lo_sq = 0.3f64 * 0.3;
        let hi_sq = 0.9f64 * 0.9;
        for policy in ScenarioPolicy::ALL {
            for path in 0..20 {
                let p = generate_path(&g, &b, policy, 5, path);
                for &v in p.sigma_sq() {
                    assert!(v >= lo_sq && v <= hi_sq, "{policy:?}: sigma^2 = {v}");
                }
            }
        }
    }

    #[test]
    fn quadratic_variation_accumulates_volatility_increments_exactly() {
        let g = make_grid(0.0, 1.3, 7).unwrap();
        let b = band(0.5, 1.0);
        for policy in ScenarioPolicy::ALL {
            let p = generate_path(&g, &b, policy, 11, 3);
            let mut acc = 0.0f64;
            for n in 0..g.n_steps() {
                acc += p.sigma_sq()[n] * g.step(n);
                assert_eq!(p.qv()[n + 1].to_bits(), acc.to_bits(), "step {n}");
            }
        }
    }

    #[test]
    fn degenerate_band_gives_classical_quadratic_variation() {
        let b = band(1.0, 1.0);
        let g = make_grid(0.0, 1.0, 1).unwrap();
        let p = generate_path(&g, &b, ScenarioPolicy::PerStepUniform, 1, 0);
        assert_eq!(p.qv_end(), 1.0);

        let g = make_grid(0.0, 1.0, 7).unwrap();
        let p = generate_path(&g, &b, ScenarioPolicy::PerStepBangBang, 1, 0);
        for (n, &t) in g.points().iter().enumerate() {
            assert!((p.qv()[n] - t).abs() <= 1e-12 * t.max(1.0));
        }
    }

    #[test]
    fn zero_band_freezes_the_path() {
        let g = make_grid(0.0, 1.0, 16).unwrap();
        let p = generate_path(&g, &band(0.0, 0.0), ScenarioPolicy::PerStepUniform, 3, 0);
        assert!(p.w().iter().all(|&x| x == 0.0));
        assert!(p.qv().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn restriction_to_the_same_grid_is_identity() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let p = generate_path(&g, &band(0.5, 1.0), ScenarioPolicy::PerStepUniform, 21, 4);
        let r = refine_couple(&p, &g).unwrap();
        assert_eq!(p, r);
    }

    #[test]
    fn restriction_keeps_shared_noise_and_averages_volatility() {
        let coarse_grid = make_grid(0.0, 1.0, 4).unwrap();
        let fine_grid = make_grid(0.0, 1.0, 16).unwrap();
        let fine = generate_path(
            &fine_grid,
            &band(0.5, 1.0),
            ScenarioPolicy::PerStepBangBang,
            8,
            0,
        );
        let coarse = refine_couple(&fine, &coarse_grid).unwrap();
        for (k, &j) in [0usize, 4, 8, 12, 16].iter().enumerate() {
            assert_eq!(coarse.w()[k], fine.w()[j]);
            assert_eq!(coarse.qv()[k], fine.qv()[j]);
        }
        for k in 0..4 {
            let dqv = coarse.qv()[k + 1] - coarse.qv()[k];
            let dt = coarse_grid.step(k);
            assert_eq!(coarse.sigma_sq()[k].to_bits(), (dqv / dt).to_bits());
            assert!(coarse.sigma_sq()[k] >= 0.25 - 1e-12);
            assert!(coarse.sigma_sq()[k] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn restriction_rejects_alien_grids() {
        let fine_grid = make_grid(0.0, 1.0, 16).unwrap();
        let fine = generate_path(&fine_grid, &band(0.5, 1.0), ScenarioPolicy::ConstantHi, 8, 0);
        let alien = make_grid(0.0, 1.0, 3).unwrap();
        assert!(matches!(
            refine_couple(&fine, &alien),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn ito_sum_of_ones_telescopes_to_the_endpoint() {
        let g = make_grid(0.0, 1.0, 32).unwrap();
        let p = generate_path(&g, &band(0.5, 1.0), ScenarioPolicy::ConstantMid, 13, 2);
        let ones = vec![1.0; g.n_points()];
        let s = ito_sum(&ones, &p).unwrap();
        assert!((s - p.w_end()).abs() < 1e-12);
        assert_eq!(ito_sum(&vec![0.0; g.n_points()], &p).unwrap(), 0.0);
        assert!(ito_sum(&[1.0, 2.0], &p).is_err());
    }

    #[test]
    fn estimate_is_the_maximum_scenario_mean() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        let est = sublinear_expect(
            |p: &GPath| p.qv_end(),
            &band(0.5, 1.0),
            &g,
            &ScenarioPolicy::ALL,
            50,
            17,
        )
        .unwrap();
        let max = est
            .per_scenario
            .iter()
            .map(|s| s.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(est.value, max);
        assert_eq!(est.argmax, ScenarioPolicy::ConstantHi);
        assert_eq!(est.per_scenario.len(), 5);

        // QV(T) is deterministic under the constant policies.
        assert_eq!(est.per_scenario[1].mean, 1.0);
        assert!((est.per_scenario[0].mean - 0.25).abs() < 1e-12);
    }

    #[test]
    fn estimate_rejects_degenerate_requests() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        let f = |p: &GPath| p.w_end();
        assert!(sublinear_expect(f, &band(0.5, 1.0), &g, &[], 10, 0).is_err());
        assert!(
            sublinear_expect(f, &band(0.5, 1.0), &g, &ScenarioPolicy::ALL, 1, 0).is_err()
        );
    }

    #[test]
    fn scenario_names_round_trip() {
        for p in ScenarioPolicy::ALL {
            assert_eq!(ScenarioPolicy::from_name(p.name()).unwrap(), p);
        }
        assert!(ScenarioPolicy::from_name("constant").is_err());
    }
}
