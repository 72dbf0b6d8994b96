//! The experiments behind each CLI subcommand.
//!
//! Every experiment draws `n_paths` driver paths per scenario, solves the
//! scheme along them, and reduces path statistics against the matching
//! theoretical bound. All of them report Monte Carlo estimates of
//! quantities whose bounds hold for the supremum over the whole scenario
//! class, so the estimates sit below the truth on both counts: finitely
//! many paths and finitely many scenarios. A bound violation here is
//! therefore meaningful evidence of a defect; a pass is consistency, not
//! proof.

use rayon::prelude::*;

use crate::bounds::{strong_error_bound, BoundSet};
use crate::emsolver::{coupled_solve, em_solve, sup_square_diff, EmSolution};
use crate::error::{Error, Result};
use crate::gshock::{generate_path, refine_couple, ScenarioPolicy, TimeGrid};
use crate::problem::SdeProblem;
use crate::rng::CounterRng;
use crate::stats::mean_and_std_error;

/// Shared Monte Carlo inputs: which problem, which scenario subfamily,
/// how many paths, and the seed everything is keyed from.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: SdeProblem,
    pub scenarios: Vec<ScenarioPolicy>,
    pub n_paths: u64,
    pub seed: u64,
}

/// Per-scenario detail attached to the moment report.
#[derive(Debug, Clone)]
pub struct ScenarioMoments {
    pub scenario: ScenarioPolicy,
    /// max_n mean |Z_n|^2: moments first, then the sup over grid times.
    pub sup_of_moments: f64,
    /// mean sup_n |Z_n|^2: pathwise sup first, then the mean.
    pub moment_of_sup: f64,
}

#[derive(Debug, Clone)]
pub struct MomentReport {
    pub problem_label: String,
    pub resolution: u32,
    pub n_paths: u64,
    pub per_scenario: Vec<ScenarioMoments>,
    /// Largest sup-of-moments across scenarios.
    pub sup_of_moments: f64,
    /// Largest moment-of-sup across scenarios.
    pub moment_of_sup: f64,
    pub moment_bound: f64,
    pub bounds: BoundSet,
    pub pass: bool,
}

/// Runs the scheme for one scenario and returns, per path, the running
/// square-norm maximum and the per-time-point mean square norms.
///
/// Solver failures abort unless `count_failures` is set, in which case
/// they are tallied so the caller can report an explosion rate.
fn scenario_second_moments(
    spec: &RunSpec,
    resolution: u32,
    policy: ScenarioPolicy,
    failures: Option<&mut u64>,
) -> Result<ScenarioMoments> {
    let grid = spec.problem.grid(resolution)?;
    let n_points = grid.n_points();

    let outcomes: Vec<Result<(Vec<f64>, f64)>> = (0..spec.n_paths)
        .into_par_iter()
        .map(|path_index| {
            let path = generate_path(&grid, &spec.problem.band, policy, spec.seed, path_index);
            let solution = em_solve(&spec.problem, resolution, &path)?;
            let mut squares = Vec::with_capacity(n_points);
            let mut sup = f64::NEG_INFINITY;
            for i in 0..n_points {
                let s = solution.square_norm(i);
                sup = sup.max(s);
                squares.push(s);
            }
            Ok((squares, sup))
        })
        .collect();

    let mut sum_squares = vec![0.0; n_points];
    let mut sup_values = Vec::with_capacity(outcomes.len());
    let mut failed = 0u64;
    let counting = failures.is_some();
    for outcome in outcomes {
        match outcome {
            Ok((squares, sup)) => {
                for (acc, s) in sum_squares.iter_mut().zip(&squares) {
                    *acc += s;
                }
                sup_values.push(sup);
            }
            Err(e) if counting && matches!(e, Error::NonFinite { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if let Some(slot) = failures {
        *slot += failed;
    }
    if sup_values.is_empty() {
        return Ok(ScenarioMoments {
            scenario: policy,
            sup_of_moments: f64::NAN,
            moment_of_sup: f64::NAN,
        });
    }

    let survivors = sup_values.len() as f64;
    let sup_of_moments = sum_squares
        .iter()
        .map(|s| s / survivors)
        .fold(f64::NEG_INFINITY, f64::max);
    let moment_of_sup = sup_values.iter().sum::<f64>() / survivors;
    Ok(ScenarioMoments {
        scenario: policy,
        sup_of_moments,
        moment_of_sup,
    })
}

/// Estimates both orderings of (sup over time, second moment) for the
/// scheme and checks them against the moment bound.
///
/// Paths where the scheme leaves the finite range are counted across all
/// scenarios and reported as a single explosion error, since a moment
/// estimate over survivors only would be biased low.
pub fn moment_experiment(spec: &RunSpec, resolution: u32) -> Result<MomentReport> {
    let bounds = BoundSet::for_problem(&spec.problem);
    let mut per_scenario = Vec::with_capacity(spec.scenarios.len());
    let mut failed = 0u64;
    for &policy in &spec.scenarios {
        per_scenario.push(scenario_second_moments(
            spec,
            resolution,
            policy,
            Some(&mut failed),
        )?);
    }
    if failed > 0 {
        return Err(Error::Explosion {
            failed,
            total: spec.n_paths * spec.scenarios.len() as u64,
        });
    }

    let sup_of_moments = per_scenario
        .iter()
        .map(|s| s.sup_of_moments)
        .fold(f64::NEG_INFINITY, f64::max);
    let moment_of_sup = per_scenario
        .iter()
        .map(|s| s.moment_of_sup)
        .fold(f64::NEG_INFINITY, f64::max);
    let moment_bound = bounds.moment_bound;
    let pass = sup_of_moments <= moment_bound && moment_of_sup <= moment_bound;
    Ok(MomentReport {
        problem_label: spec.problem.label.clone(),
        resolution,
        n_paths: spec.n_paths,
        per_scenario,
        sup_of_moments,
        moment_of_sup,
        moment_bound,
        bounds,
        pass,
    })
}

#[derive(Debug, Clone)]
pub struct IncrementRow {
    pub r: f64,
    pub t: f64,
    /// Largest across scenarios of the mean square increment |Z_t - Z_r|^2.
    pub empirical: f64,
    /// increment_rate * (t - r).
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct IncrementReport {
    pub problem_label: String,
    pub resolution: u32,
    pub n_paths: u64,
    pub scenarios: Vec<ScenarioPolicy>,
    pub increment_rate: f64,
    pub rows: Vec<IncrementRow>,
    pub bounds: BoundSet,
    pub pass: bool,
}

/// Draws `count` ordered grid-point pairs (r, t) with r < t, keyed off a
/// stream of its own so pair selection never perturbs path noise.
pub fn random_grid_pairs(grid: &TimeGrid, count: usize, seed: u64) -> Vec<(usize, usize)> {
    const PAIR_STREAM: u64 = 0x5041_4952_5f52_4e47;
    let n = grid.n_points() as u64;
    assert!(n >= 2, "need at least two grid points to form a pair");
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let rng = CounterRng::new(seed, PAIR_STREAM, k as u64);
        let i = (rng.word(0, 0) % n) as usize;
        let mut j = (rng.word(0, 1) % (n - 1)) as usize;
        if j >= i {
            j += 1;
        }
        pairs.push((i.min(j), i.max(j)));
    }
    pairs
}

/// Estimates mean square increments of the scheme over the given grid
/// index pairs and compares each against the linear-in-time bound.
pub fn increment_experiment(
    spec: &RunSpec,
    resolution: u32,
    pairs: &[(usize, usize)],
) -> Result<IncrementReport> {
    let bounds = BoundSet::for_problem(&spec.problem);
    let grid = spec.problem.grid(resolution)?;
    let n_points = grid.n_points();
    for &(i, j) in pairs {
        if i >= j || j >= n_points {
            return Err(Error::InvalidArgument(format!(
                "pair ({i}, {j}) is not an ordered pair of indices into a grid of {n_points} points"
            )));
        }
    }

    let dim = spec.problem.dim();
    let mut empirical = vec![f64::NEG_INFINITY; pairs.len()];
    for &policy in &spec.scenarios {
        let sums: Vec<f64> = (0..spec.n_paths)
            .into_par_iter()
            .map(|path_index| {
                let path = generate_path(&grid, &spec.problem.band, policy, spec.seed, path_index);
                let solution = em_solve(&spec.problem, resolution, &path)?;
                let mut per_pair = Vec::with_capacity(pairs.len());
                for &(i, j) in pairs {
                    let a = solution.state(i);
                    let b = solution.state(j);
                    let mut d2 = 0.0;
                    for k in 0..dim {
                        let d = b[k] - a[k];
                        d2 += d * d;
                    }
                    per_pair.push(d2);
                }
                Ok(per_pair)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
            .into_iter()
            .fold(vec![0.0; pairs.len()], |mut acc, per_pair| {
                for (a, v) in acc.iter_mut().zip(&per_pair) {
                    *a += v;
                }
                acc
            });
        for (slot, sum) in empirical.iter_mut().zip(&sums) {
            *slot = slot.max(sum / spec.n_paths as f64);
        }
    }

    let rate = bounds.increment_rate;
    let points = grid.points();
    let rows: Vec<IncrementRow> = pairs
        .iter()
        .zip(&empirical)
        .map(|(&(i, j), &value)| {
            let r = points[i];
            let t = points[j];
            let bound = rate * (t - r);
            IncrementRow {
                r,
                t,
                empirical: value,
                bound,
                pass: value <= bound,
            }
        })
        .collect();
    let pass = rows.iter().all(|row| row.pass);
    Ok(IncrementReport {
        problem_label: spec.problem.label.clone(),
        resolution,
        n_paths: spec.n_paths,
        scenarios: spec.scenarios.clone(),
        increment_rate: rate,
        rows,
        bounds,
        pass,
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub resolution: u32,
    /// Largest across scenarios of the mean sup-square-difference from
    /// the reference resolution.
    pub mse_empirical: f64,
    /// Standard error of that mean, from the maximizing scenario.
    pub std_error: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub problem_label: String,
    pub reference_resolution: u32,
    pub n_paths: u64,
    pub scenarios: Vec<ScenarioPolicy>,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln(mse) against ln(q); absent when an
    /// empirical mse is zero or negative, as for problems the scheme
    /// solves exactly.
    pub slope: Option<f64>,
    pub bounds: BoundSet,
    pub pass: bool,
}

/// Ordinary least squares slope of ln(values) against ln(resolutions).
pub fn slope_fit(resolutions: &[u32], values: &[f64]) -> Result<f64> {
    if resolutions.len() != values.len() {
        return Err(Error::LengthMismatch(format!(
            "{} resolutions against {} values",
            resolutions.len(),
            values.len()
        )));
    }
    if resolutions.len() < 2 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least two points".into(),
        ));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "slope fit needs strictly positive values".into(),
        ));
    }
    let xs: Vec<f64> = resolutions.iter().map(|&q| f64::from(q).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|&v| v.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - x_mean) * (y - y_mean);
        sxx += (x - x_mean) * (x - x_mean);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least two distinct resolutions".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Estimates the strong error of the scheme at each ladder resolution
/// against a common fine reference, and checks each estimate against the
/// theoretical error bound at that resolution.
///
/// The reference solve at `q_ref` stands in for the exact solution, so
/// each mse underestimates the true error by at most the reference's own
/// error; `q_ref` is required to sit well above the ladder to keep that
/// contamination small.
pub fn convergence_experiment(
    spec: &RunSpec,
    ladder: &[u32],
    q_ref: u32,
) -> Result<ConvergenceReport> {
    if ladder.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "resolution ladder needs at least 3 entries for a meaningful fit, got {}",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "resolution ladder must be strictly increasing".into(),
        ));
    }
    let q_max = *ladder.last().unwrap();
    if q_ref < q_max.saturating_mul(16) {
        return Err(Error::InvalidArgument(format!(
            "reference resolution {q_ref} is too close to the ladder top {q_max}; \
             it must be at least 16 times larger for the reference to stand in \
             for the exact solution"
        )));
    }
    for &q in ladder {
        if q_ref % q != 0 {
            return Err(Error::InvalidArgument(format!(
                "reference resolution {q_ref} is not a multiple of ladder entry {q}"
            )));
        }
    }

    let bounds = BoundSet::for_problem(&spec.problem);
    let fine_grid = spec.problem.grid(q_ref)?;

    // One fine path and reference solve per (scenario, path), restricted
    // to every ladder grid. Bitwise identical to solving each rung with
    // its own coupled pair, but q_ref work is done once, not once per rung.
    let mut per_scenario: Vec<Vec<(f64, f64)>> = Vec::with_capacity(spec.scenarios.len());
    for &policy in &spec.scenarios {
        let errors: Vec<Vec<f64>> = (0..spec.n_paths)
            .into_par_iter()
            .map(|path_index| {
                let fine_path =
                    generate_path(&fine_grid, &spec.problem.band, policy, spec.seed, path_index);
                let fine = em_solve(&spec.problem, q_ref, &fine_path)?;
                let mut per_rung = Vec::with_capacity(ladder.len());
                for &q in ladder {
                    let coarse_grid = spec.problem.grid(q)?;
                    let coarse_path = refine_couple(&fine_path, &coarse_grid)?;
                    let coarse = em_solve(&spec.problem, q, &coarse_path)?;
                    per_rung.push(sup_square_diff(&coarse, &fine)?);
                }
                Ok(per_rung)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let stats: Vec<(f64, f64)> = (0..ladder.len())
            .map(|rung| {
                let column: Vec<f64> = errors.iter().map(|row| row[rung]).collect();
                mean_and_std_error(&column)
            })
            .collect();
        per_scenario.push(stats);
    }

    let rows: Vec<ConvergenceRow> = ladder
        .iter()
        .enumerate()
        .map(|(rung, &q)| {
            let (mse_empirical, std_error) = per_scenario
                .iter()
                .map(|stats| stats[rung])
                .fold((f64::NEG_INFINITY, 0.0), |best, candidate| {
                    if candidate.0 > best.0 {
                        candidate
                    } else {
                        best
                    }
                });
            let bound = strong_error_bound(&spec.problem, q);
            let ratio = if bound == 0.0 && mse_empirical == 0.0 {
                0.0
            } else {
                mse_empirical / bound
            };
            ConvergenceRow {
                resolution: q,
                mse_empirical,
                std_error,
                bound,
                ratio,
            }
        })
        .collect();

    let mses: Vec<f64> = rows.iter().map(|r| r.mse_empirical).collect();
    let slope = if mses.iter().all(|&v| v > 0.0) && ladder.len() >= 2 {
        Some(slope_fit(ladder, &mses)?)
    } else {
        None
    };
    let pass = rows.iter().all(|row| row.ratio <= 1.0);
    Ok(ConvergenceReport {
        problem_label: spec.problem.label.clone(),
        reference_resolution: q_ref,
        n_paths: spec.n_paths,
        scenarios: spec.scenarios.clone(),
        rows,
        slope,
        bounds,
        pass,
    })
}

#[derive(Debug, Clone)]
pub struct PathsReport {
    pub problem_label: String,
    pub resolution: u32,
    pub n_paths: u64,
    pub grid: Vec<f64>,
    /// One entry per (scenario, path), scenario-major, carrying the
    /// driver samples for each grid point.
    pub paths: Vec<PathTrace>,
}

#[derive(Debug, Clone)]
pub struct PathTrace {
    pub scenario: ScenarioPolicy,
    pub path_id: u64,
    pub w: Vec<f64>,
    pub qv: Vec<f64>,
}

/// Samples raw driver paths (no scheme involved) for inspection or
/// plotting.
pub fn paths_experiment(spec: &RunSpec, resolution: u32) -> Result<PathsReport> {
    let grid = spec.problem.grid(resolution)?;
    let mut paths = Vec::with_capacity(spec.scenarios.len() * spec.n_paths as usize);
    for &policy in &spec.scenarios {
        for path_index in 0..spec.n_paths {
            let path = generate_path(&grid, &spec.problem.band, policy, spec.seed, path_index);
            paths.push(PathTrace {
                scenario: policy,
                path_id: path_index,
                w: path.w().to_vec(),
                qv: path.qv().to_vec(),
            });
        }
    }
    Ok(PathsReport {
        problem_label: spec.problem.label.clone(),
        resolution,
        n_paths: spec.n_paths,
        grid: grid.points().to_vec(),
        paths,
    })
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub problem_label: String,
    pub bounds: BoundSet,
    /// (resolution, strong error bound) rows when resolutions were given.
    pub table: Vec<(u32, f64)>,
}

/// Evaluates every explicit constant for the problem, plus the strong
/// error bound at any requested resolutions. Purely arithmetic; no paths
/// are drawn.
pub fn bounds_report(problem: &SdeProblem, resolutions: &[u32]) -> Result<BoundsReport> {
    let bounds = BoundSet::for_problem(problem);
    let table = if resolutions.is_empty() {
        Vec::new()
    } else {
        crate::bounds::bound_table(problem, resolutions)?
    };
    Ok(BoundsReport {
        problem_label: problem.label.clone(),
        bounds,
        table,
    })
}

/// Convenience used by tests: terminal-time square error between a
/// coarse and fine solve sharing one driver path.
pub fn terminal_square_error(coarse: &EmSolution, fine: &EmSolution) -> Result<f64> {
    if coarse.dim() != fine.dim() {
        return Err(Error::LengthMismatch(format!(
            "coarse dimension {} against fine dimension {}",
            coarse.dim(),
            fine.dim()
        )));
    }
    let a = coarse.terminal();
    let b = fine.terminal();
    let mut d2 = 0.0;
    for k in 0..coarse.dim() {
        let d = b[k] - a[k];
        d2 += d * d;
    }
    Ok(d2)
}

/// Like `convergence_experiment` for a single rung, solving the pair
/// directly; kept for spot checks against the shared-reference fast path.
pub fn single_rung_mse(
    spec: &RunSpec,
    q: u32,
    q_ref: u32,
    policy: ScenarioPolicy,
) -> Result<(f64, f64)> {
    let errors: Vec<f64> = (0..spec.n_paths)
        .into_par_iter()
        .map(|path_index| {
            let (coarse, fine) =
                coupled_solve(&spec.problem, q, q_ref, spec.seed, path_index, policy)?;
            sup_square_diff(&coarse, &fine)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_std_error(&errors))
}
