//! Euler-Maruyama stepping driven by a G-Brownian path.
//!
//! One step advances the state with all three coefficients frozen at the
//! left endpoint:
//!
//! ```text
//! Z[n+1] = Z[n] + drift(t_n, Z[n]) dt + qv_drift(t_n, Z[n]) dQV + diffusion(t_n, Z[n]) dW
//! ```
//!
//! where `dQV` and `dW` are the path's quadratic-variation and driver
//! increments over the step. States are recorded at grid points only; the
//! sup statistics taken over grid points lower-bound their continuous-time
//! counterparts, which keeps every "empirical below bound" experiment
//! conservative.
//!
//! Non-finite states abort the path with the offending step index rather
//! than being dropped: coefficients outside the globally Lipschitz regime
//! can explode, and the experiment layer reports those counts.

use crate::error::{Error, Result};
use crate::gshock::{generate_path, make_grid, refine_couple, GPath, ScenarioPolicy, TimeGrid};
use crate::problem::SdeProblem;

/// One Euler-Maruyama trajectory on its grid.
///
/// `frozen` stores the state each step's coefficients were evaluated at
/// (the left endpoint), kept as its own list because the frozen process is
/// a first-class object in the error analysis, not just an implementation
/// detail of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EmSolution {
    grid: TimeGrid,
    dim: usize,
    resolution: u32,
    states: Vec<f64>,
    frozen: Vec<f64>,
}

impl EmSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Steps per unit time used to build the grid.
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    /// State at grid point `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Left-endpoint state frozen for step `n`.
    pub fn frozen(&self, n: usize) -> &[f64] {
        &self.frozen[n * self.dim..(n + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.n_points() - 1)
    }

    /// Squared Euclidean norm of the state at grid point `i`.
    pub fn square_norm(&self, i: usize) -> f64 {
        self.state(i).iter().map(|x| x * x).sum()
    }
}

struct StepBuffers {
    drift: Vec<f64>,
    qv_drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl StepBuffers {
    fn new(dim: usize) -> Self {
        StepBuffers {
            drift: vec![0.0; dim],
            qv_drift: vec![0.0; dim],
            diffusion: vec![0.0; dim],
        }
    }
}

fn step_into(
    problem: &SdeProblem,
    state: &[f64],
    t_left: f64,
    dt: f64,
    dqv: f64,
    dw: f64,
    step_index: usize,
    bufs: &mut StepBuffers,
    out: &mut [f64],
) -> Result<()> {
    (problem.coefficients.drift)(t_left, state, &mut bufs.drift);
    (problem.coefficients.qv_drift)(t_left, state, &mut bufs.qv_drift);
    (problem.coefficients.diffusion)(t_left, state, &mut bufs.diffusion);
    for k in 0..state.len() {
        let next = state[k] + bufs.drift[k] * dt + bufs.qv_drift[k] * dqv + bufs.diffusion[k] * dw;
        if !next.is_finite() {
            return Err(Error::NonFinite {
                step: step_index,
                t: t_left,
                detail: format!("state component {k} became {next}"),
            });
        }
        out[k] = next;
    }
    Ok(())
}

/// One Euler-Maruyama step with coefficients frozen at `(t_left, state)`.
pub fn em_step(
    problem: &SdeProblem,
    state: &[f64],
    t_left: f64,
    dt: f64,
    dqv: f64,
    dw: f64,
) -> Result<Vec<f64>> {
    if state.len() != problem.dim() {
        return Err(Error::LengthMismatch(format!(
            "state has {} components, problem has {}",
            state.len(),
            problem.dim()
        )));
    }
    if !(dt > 0.0) || !(dqv >= 0.0) || !dw.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0, dqv >= 0, finite dw; got dt = {dt}, dqv = {dqv}, dw = {dw}"
        )));
    }
    let mut bufs = StepBuffers::new(problem.dim());
    let mut out = vec![0.0; problem.dim()];
    step_into(problem, state, t_left, dt, dqv, dw, 0, &mut bufs, &mut out)?;
    Ok(out)
}

/// Runs the scheme along `path`, which must live on the problem's grid at
/// this resolution.
pub fn em_solve(problem: &SdeProblem, resolution: u32, path: &GPath) -> Result<EmSolution> {
    let expected = make_grid(problem.t0, problem.t_end, resolution)?;
    if path.grid().points() != expected.points() {
        return Err(Error::GridMismatch(format!(
            "path grid does not match the problem's grid at resolution {resolution}"
        )));
    }
    let dim = problem.dim();
    let pts = path.grid().points();
    let w = path.w();
    let qv = path.qv();
    let n_steps = pts.len() - 1;

    let mut states = Vec::with_capacity(pts.len() * dim);
    states.extend_from_slice(&problem.initial_state);
    let mut frozen = Vec::with_capacity(n_steps * dim);
    let mut bufs = StepBuffers::new(dim);
    let mut cur = problem.initial_state.clone();
    let mut next = vec![0.0; dim];

    for n in 0..n_steps {
        frozen.extend_from_slice(&cur);
        step_into(
            problem,
            &cur,
            pts[n],
            pts[n + 1] - pts[n],
            qv[n + 1] - qv[n],
            w[n + 1] - w[n],
            n,
            &mut bufs,
            &mut next,
        )?;
        states.extend_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }

    Ok(EmSolution {
        grid: path.grid().clone(),
        dim,
        resolution,
        states,
        frozen,
    })
}

/// Solves the same noise at two resolutions: one fine path is generated,
/// restricted to the coarse grid, and both restrictions are integrated.
///
/// Returns `(coarse, fine)`. This is the coupling behind the strong-error
/// experiments; with equal resolutions it degenerates to solving the same
/// path twice and the results are identical.
pub fn coupled_solve(
    problem: &SdeProblem,
    coarse_resolution: u32,
    fine_resolution: u32,
    seed: u64,
    path_index: u64,
    policy: ScenarioPolicy,
) -> Result<(EmSolution, EmSolution)> {
    if coarse_resolution == 0 || fine_resolution == 0 {
        return Err(Error::InvalidArgument("resolutions must be positive".into()));
    }
    if fine_resolution % coarse_resolution != 0 {
        return Err(Error::InvalidArgument(format!(
            "fine resolution {fine_resolution} is not a multiple of coarse resolution {coarse_resolution}"
        )));
    }
    let fine_grid = make_grid(problem.t0, problem.t_end, fine_resolution)?;
    let fine_path = generate_path(&fine_grid, &problem.band, policy, seed, path_index);
    let coarse_grid = make_grid(problem.t0, problem.t_end, coarse_resolution)?;
    let coarse_path = refine_couple(&fine_path, &coarse_grid)?;
    let fine = em_solve(problem, fine_resolution, &fine_path)?;
    let coarse = em_solve(problem, coarse_resolution, &coarse_path)?;
    Ok((coarse, fine))
}

/// Largest squared Euclidean norm over the solution's grid points.
pub fn sup_square_norm(sol: &EmSolution) -> f64 {
    let mut best = 0.0f64;
    for i in 0..sol.n_points() {
        let sq: f64 = sol.state(i).iter().map(|x| x * x).sum();
        best = best.max(sq);
    }
    best
}

/// Largest squared distance between two solutions over `a`'s grid points;
/// `b` is read at the matching points of its (equal or finer) grid.
pub fn sup_square_diff(a: &EmSolution, b: &EmSolution) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::LengthMismatch(format!(
            "dimension mismatch: {} vs {}",
            a.dim, b.dim
        )));
    }
    let indices = a.grid.indices_into(&b.grid)?;
    let mut best = 0.0f64;
    for (i, &j) in indices.iter().enumerate() {
        let sq: f64 = a
            .state(i)
            .iter()
            .zip(b.state(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        best = best.max(sq);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gshock::VolatilityBand;
    use crate::problem::{
        builtin, linear_coefficient, zero_coefficient, BuiltinParams, Coefficients, Moduli,
        SdeProblem,
    };
    use std::sync::{Arc, Mutex};

    fn band() -> VolatilityBand {
        VolatilityBand::new(0.5, 1.0).unwrap()
    }

    fn linear_drift_problem(t_end: f64) -> SdeProblem {
        SdeProblem::new(
            "linear drift only",
            Coefficients {
                drift: linear_coefficient(1.0),
                qv_drift: zero_coefficient(),
                diffusion: zero_coefficient(),
            },
            vec![1.0],
            0.0,
            t_end,
            Moduli {
                lip_const: 0.0,
                lip_slope: 3.0,
                growth_bound: 0.0,
            },
            band(),
        )
        .unwrap()
    }

    fn path_for(problem: &SdeProblem, resolution: u32, seed: u64, index: u64) -> GPath {
        let grid = make_grid(problem.t0, problem.t_end, resolution).unwrap();
        generate_path(&grid, &problem.band, ScenarioPolicy::PerStepUniform, seed, index)
    }

    #[test]
    fn step_with_zero_coefficients_is_identity() {
        let p = builtin("zero", &BuiltinParams::default()).unwrap();
        let out = em_step(&p, &[2.5], 0.0, 0.25, 0.1, -0.3).unwrap();
        assert_eq!(out, vec![2.5]);
    }

    #[test]
    fn constant_drift_step_moves_by_a_dt() {
        let p = builtin("pure-drift", &BuiltinParams::default()).unwrap();
        let out = em_step(&p, &[0.0], 0.0, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(out, vec![0.5]);
    }

    #[test]
    fn linear_drift_step_matches_hand_recursion() {
        let p = linear_drift_problem(1.0);
        let out = em_step(&p, &[1.5], 0.5, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(out, vec![2.25]);
    }

    #[test]
    fn step_rejects_bad_increments_and_shapes() {
        let p = builtin("zero", &BuiltinParams::default()).unwrap();
        assert!(em_step(&p, &[0.0, 0.0], 0.0, 0.5, 0.0, 0.0).is_err());
        assert!(em_step(&p, &[0.0], 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(em_step(&p, &[0.0], 0.0, 0.5, -0.1, 0.0).is_err());
        assert!(em_step(&p, &[0.0], 0.0, 0.5, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn linear_drift_solution_matches_hand_recursion() {
        // Two steps of z <- z + z * dt from 1 with dt = 1/2: 1, 1.5, 2.25.
        let p = linear_drift_problem(1.0);
        let path = path_for(&p, 2, 9, 0);
        let sol = em_solve(&p, 2, &path).unwrap();
        assert_eq!(sol.state(0), &[1.0]);
        assert_eq!(sol.state(1), &[1.5]);
        assert_eq!(sol.state(2), &[2.25]);
        assert_eq!(sup_square_norm(&sol), 5.0625);
    }

    #[test]
    fn zero_problem_stays_at_the_initial_state() {
        let p = builtin("zero", &BuiltinParams::default()).unwrap();
        let path = path_for(&p, 16, 3, 5);
        let sol = em_solve(&p, 16, &path).unwrap();
        for i in 0..sol.n_points() {
            assert_eq!(sol.state(i), &[1.0]);
        }
        assert_eq!(sup_square_norm(&sol), 1.0);
    }

    #[test]
    fn frozen_states_are_the_left_endpoints() {
        let p = builtin("linear-lipschitz", &BuiltinParams::default()).unwrap();
        let path = path_for(&p, 8, 17, 2);
        let sol = em_solve(&p, 8, &path).unwrap();
        for n in 0..path.grid().n_steps() {
            assert_eq!(sol.frozen(n), sol.state(n));
        }
    }

    #[test]
    fn coefficients_see_exactly_the_left_endpoint_arguments() {
        let calls: Arc<Mutex<Vec<(f64, f64)>>> = Arc::new(Mutex::new(Vec::new()));
        let log = calls.clone();
        let p = SdeProblem::new(
            "instrumented",
            Coefficients {
                drift: Arc::new(move |t, z, out| {
                    log.lock().unwrap().push((t, z[0]));
                    out[0] = z[0];
                }),
                qv_drift: zero_coefficient(),
                diffusion: zero_coefficient(),
            },
            vec![1.0],
            0.0,
            1.0,
            Moduli {
                lip_const: 0.0,
                lip_slope: 3.0,
                growth_bound: 0.0,
            },
            band(),
        )
        .unwrap();
        let path = path_for(&p, 4, 21, 0);
        let sol = em_solve(&p, 4, &path).unwrap();
        let seen = calls.lock().unwrap();
        assert_eq!(seen.len(), 4);
        for (n, &(t, z)) in seen.iter().enumerate() {
            assert_eq!(t, path.grid().points()[n]);
            assert_eq!(z, sol.state(n)[0]);
        }
    }

    #[test]
    fn unit_drift_telescopes_exactly_for_every_resolution() {
        // With drift 1 from 0 on [0, 1], each step adds the exact step
        // length and the partial sums are the grid points themselves, so
        // the terminal state is exactly 1 at any resolution.
        let p = SdeProblem::new(
            "unit drift",
            Coefficients {
                drift: crate::problem::constant_coefficient(1.0),
                qv_drift: zero_coefficient(),
                diffusion: zero_coefficient(),
            },
            vec![0.0],
            0.0,
            1.0,
            Moduli {
                lip_const: 0.0,
                lip_slope: 0.0,
                growth_bound: 1.0,
            },
            band(),
        )
        .unwrap();
        for q in [1u32, 2, 3, 4, 5, 6, 7, 8, 13, 64, 100, 997, 1024] {
            let path = path_for(&p, q, 1, 0);
            let sol = em_solve(&p, q, &path).unwrap();
            assert_eq!(sol.terminal(), &[1.0], "resolution {q}");
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = builtin("zero", &BuiltinParams::default()).unwrap();
        let path = path_for(&p, 8, 3, 0);
        assert!(matches!(
            em_solve(&p, 16, &path),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn explosions_surface_the_step_index() {
        let p = builtin(
            "quadratic",
            &BuiltinParams {
                initial_value: 3.0,
                ..BuiltinParams::default()
            },
        )
        .unwrap();
        let path = path_for(&p, 32, 5, 0);
        match em_solve(&p, 32, &path) {
            Err(Error::NonFinite { step, .. }) => assert!(step < 32, "step {step}"),
            other => panic!("expected a non-finite failure, got {other:?}"),
        }
    }

    #[test]
    fn coupling_at_equal_resolutions_is_an_identity() {
        let p = builtin("gbm-like", &BuiltinParams::default()).unwrap();
        let (coarse, fine) =
            coupled_solve(&p, 8, 8, 77, 1, ScenarioPolicy::PerStepBangBang).unwrap();
        assert_eq!(coarse, fine);
        assert_eq!(sup_square_diff(&coarse, &fine).unwrap(), 0.0);
    }

    #[test]
    fn coupling_rejects_non_multiple_resolutions() {
        let p = builtin("gbm-like", &BuiltinParams::default()).unwrap();
        assert!(coupled_solve(&p, 8, 12, 0, 0, ScenarioPolicy::ConstantHi).is_err());
        assert!(coupled_solve(&p, 0, 8, 0, 0, ScenarioPolicy::ConstantHi).is_err());
    }

    #[test]
    fn coupled_error_shrinks_as_the_coarse_grid_refines() {
        let p = builtin(
            "gbm-like",
            &BuiltinParams {
                c: 0.2,
                ..BuiltinParams::default()
            },
        )
        .unwrap();
        let mut mean = [0.0f64; 2];
        let n_paths = 1000;
        for (slot, coarse_q) in [(0usize, 4u32), (1, 8)] {
            let mut acc = 0.0;
            for i in 0..n_paths {
                let (coarse, fine) =
                    coupled_solve(&p, coarse_q, 512, 4242, i, ScenarioPolicy::PerStepUniform)
                        .unwrap();
                acc += sup_square_diff(&coarse, &fine).unwrap();
            }
            mean[slot] = acc / n_paths as f64;
        }
        assert!(mean[1] > 0.0);
        assert!(mean[1] < mean[0], "coupling not monotone: {mean:?}");
    }

    #[test]
    fn fine_solution_approaches_the_geometric_closed_form() {
        // Under a pinned scenario the diffusion-only problem is classical
        // geometric Brownian motion: Z(T) = exp(c W(T) - c^2 sigma^2 T / 2).
        // The mean-square gap should fall roughly like 1/q.
        let sigma = 0.7;
        let c = 0.2;
        let p = builtin(
            "gbm-like",
            &BuiltinParams {
                c,
                band: VolatilityBand::fixed(sigma).unwrap(),
                ..BuiltinParams::default()
            },
        )
        .unwrap();
        let n_paths = 1000;
        let mut gap = [0.0f64; 2];
        for (slot, q) in [(0usize, 32u32), (1, 512)] {
            let grid = make_grid(0.0, 1.0, q).unwrap();
            let mut acc = 0.0;
            for i in 0..n_paths {
                let path = generate_path(&grid, &p.band, ScenarioPolicy::ConstantHi, 99, i);
                let sol = em_solve(&p, q, &path).unwrap();
                let exact = (c * path.w_end() - 0.5 * c * c * sigma * sigma).exp();
                let d = sol.terminal()[0] - exact;
                acc += d * d;
            }
            gap[slot] = acc / n_paths as f64;
        }
        assert!(
            gap[1] * 4.0 <= gap[0],
            "expected at least a 4x drop from q=32 to q=512: {gap:?}"
        );
    }

    #[test]
    fn sup_square_diff_is_symmetric_on_equal_grids() {
        let p = builtin("linear-lipschitz", &BuiltinParams::default()).unwrap();
        let path_a = path_for(&p, 8, 31, 0);
        let path_b = path_for(&p, 8, 31, 1);
        let a = em_solve(&p, 8, &path_a).unwrap();
        let b = em_solve(&p, 8, &path_b).unwrap();
        assert_eq!(
            sup_square_diff(&a, &b).unwrap(),
            sup_square_diff(&b, &a).unwrap()
        );
        assert_eq!(sup_square_diff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn scaling_states_scales_the_sup_square_norm_quadratically() {
        let p = linear_drift_problem(1.0);
        let path = path_for(&p, 4, 2, 0);
        let sol = em_solve(&p, 4, &path).unwrap();
        let scaled = EmSolution {
            grid: sol.grid.clone(),
            dim: sol.dim,
            resolution: sol.resolution,
            states: sol.states.iter().map(|x| 3.0 * x).collect(),
            frozen: sol.frozen.iter().map(|x| 3.0 * x).collect(),
        };
        let lhs = sup_square_norm(&scaled);
        let rhs = 9.0 * sup_square_norm(&sol);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }
}
