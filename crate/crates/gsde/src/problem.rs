//! G-SDE problem instances and validation of their standing assumptions.
//!
//! A problem bundles the three coefficient functions of
//!
//! ```text
//! dZ = drift dt + qv_drift d<W> + diffusion dW
//! ```
//!
//! (time drift, quadratic-variation drift, diffusion) together with initial
//! data, a horizon, a volatility band, and the modulus constants the
//! boundedness and error theory is stated in terms of: the squared
//! coefficient differences must be dominated by `lip_const + lip_slope *
//! |u - v|^2` and the squared coefficient norms at the origin by
//! `growth_bound`, both summed over the three coefficients.
//!
//! Declared constants are trusted by the bound formulas, so [`validate`]
//! exists to spot-check them on sampled points before a long run.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gshock::VolatilityBand;
use crate::rng::CounterRng;

/// Coefficient function: writes the value at `(t, state)` into `out`.
///
/// `out` always has the problem's dimension. Implementations must be pure;
/// the solver and the validator call them from multiple threads.
pub type Coefficient = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// The three coefficient functions of a G-SDE.
#[derive(Clone)]
pub struct Coefficients {
    /// Coefficient of `dt`.
    pub drift: Coefficient,
    /// Coefficient of the quadratic-variation increment `d<W>`.
    pub qv_drift: Coefficient,
    /// Coefficient of the driver increment `dW`.
    pub diffusion: Coefficient,
}

/// Modulus constants of the standing assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moduli {
    /// Additive constant of the linear majorant (kept 0 for genuinely
    /// Lipschitz coefficients).
    pub lip_const: f64,
    /// Slope of the linear majorant on the squared state difference.
    pub lip_slope: f64,
    /// Bound on the summed squared coefficient norms at the origin.
    pub growth_bound: f64,
}

impl Moduli {
    pub const ZERO: Moduli = Moduli {
        lip_const: 0.0,
        lip_slope: 0.0,
        growth_bound: 0.0,
    };
}

/// A fully specified G-SDE problem instance.
#[derive(Clone)]
pub struct SdeProblem {
    pub label: String,
    pub coefficients: Coefficients,
    pub initial_state: Vec<f64>,
    /// Second moment of the initial state. Autofilled with
    /// `|initial_state|^2` (the deterministic case); override via
    /// [`SdeProblem::with_initial_second_moment`] when modeling random
    /// initial data in the bound formulas.
    pub initial_second_moment: f64,
    pub t0: f64,
    pub t_end: f64,
    pub moduli: Moduli,
    pub band: VolatilityBand,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("label", &self.label)
            .field("initial_state", &self.initial_state)
            .field("initial_second_moment", &self.initial_second_moment)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("moduli", &self.moduli)
            .field("band", &self.band)
            .finish_non_exhaustive()
    }
}

impl SdeProblem {
    pub fn new(
        label: impl Into<String>,
        coefficients: Coefficients,
        initial_state: Vec<f64>,
        t0: f64,
        t_end: f64,
        moduli: Moduli,
        band: VolatilityBand,
    ) -> Result<Self> {
        if initial_state.is_empty() {
            return Err(Error::InvalidArgument("initial state is empty".into()));
        }
        if initial_state.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "initial state must be finite".into(),
            ));
        }
        // The bound formulas are stated for horizons inside [0, T] with
        // T > 0; negative times are out of scope.
        if !t0.is_finite() || !t_end.is_finite() || t0 < 0.0 || t0 >= t_end {
            return Err(Error::InvalidArgument(format!(
                "need finite 0 <= t0 < t_end, got [{t0}, {t_end}]"
            )));
        }
        for (name, value) in [
            ("lip_const", moduli.lip_const),
            ("lip_slope", moduli.lip_slope),
            ("growth_bound", moduli.growth_bound),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        let initial_second_moment = initial_state.iter().map(|x| x * x).sum();
        Ok(SdeProblem {
            label: label.into(),
            coefficients,
            initial_state,
            initial_second_moment,
            t0,
            t_end,
            moduli,
            band,
        })
    }

    pub fn with_initial_second_moment(mut self, value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "initial second moment must be finite and nonnegative, got {value}"
            )));
        }
        self.initial_second_moment = value;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.initial_state.len()
    }

    pub fn horizon(&self) -> f64 {
        self.t_end - self.t0
    }

    /// The uniform grid over this problem's time interval at the given
    /// resolution (steps per unit time).
    pub fn grid(&self, resolution: u32) -> Result<crate::gshock::TimeGrid> {
        crate::gshock::make_grid(self.t0, self.t_end, resolution)
    }
}

/// Coefficient that is identically zero.
pub fn zero_coefficient() -> Coefficient {
    Arc::new(|_t, _state, out| out.fill(0.0))
}

/// Coefficient with the constant value `value` in every component.
pub fn constant_coefficient(value: f64) -> Coefficient {
    Arc::new(move |_t, _state, out| out.fill(value))
}

/// Coefficient `slope * state`, componentwise.
pub fn linear_coefficient(slope: f64) -> Coefficient {
    Arc::new(move |_t, state, out| {
        for (o, &z) in out.iter_mut().zip(state) {
            *o = slope * z;
        }
    })
}

/// Scalar parameters for the builtin catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub initial_value: f64,
    pub t0: f64,
    pub t_end: f64,
    pub band: VolatilityBand,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            initial_value: 1.0,
            t0: 0.0,
            t_end: 1.0,
            band: VolatilityBand::new(0.5, 1.0).unwrap(),
        }
    }
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "zero",
    "pure-drift",
    "linear-lipschitz",
    "gbm-like",
    "quadratic",
];

/// Builds a problem from the builtin catalog (all scalar-state).
///
/// - `zero`: all coefficients vanish; every statistic is exactly the
///   initial data.
/// - `pure-drift`: constant drift `a`, no noise; the solver telescopes to
///   the exact solution on any grid.
/// - `linear-lipschitz`: drift `a z`, quadratic-variation drift `b z`,
///   diffusion `c z`; declared slope `3 max(a^2, b^2, c^2)` dominates the
///   summed condition.
/// - `gbm-like`: diffusion `c z` only, geometric dynamics driven purely by
///   the uncertain volatility.
/// - `quadratic`: drift `z^2` with deliberately under-declared constants
///   (slope 1). Not globally Lipschitz: validation fails at radius >= 2
///   and large initial values explode, which is exactly what it is for.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<SdeProblem> {
    for (key, value) in [
        ("a", params.a),
        ("b", params.b),
        ("c", params.c),
        ("z0", params.initial_value),
    ] {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "parameter {key} must be finite, got {value}"
            )));
        }
    }
    let BuiltinParams {
        a,
        b,
        c,
        initial_value,
        t0,
        t_end,
        band,
    } = *params;
    let init = vec![initial_value];
    match name {
        "zero" => SdeProblem::new(
            "zero",
            Coefficients {
                drift: zero_coefficient(),
                qv_drift: zero_coefficient(),
                diffusion: zero_coefficient(),
            },
            init,
            t0,
            t_end,
            Moduli::ZERO,
            band,
        ),
        "pure-drift" => SdeProblem::new(
            format!("pure-drift(a={a})"),
            Coefficients {
                drift: constant_coefficient(a),
                qv_drift: zero_coefficient(),
                diffusion: zero_coefficient(),
            },
            init,
            t0,
            t_end,
            Moduli {
                lip_const: 0.0,
                lip_slope: 0.0,
                growth_bound: a * a,
            },
            band,
        ),
        "linear-lipschitz" => SdeProblem::new(
            format!("linear-lipschitz(a={a}, b={b}, c={c})"),
            Coefficients {
                drift: linear_coefficient(a),
                qv_drift: linear_coefficient(b),
                diffusion: linear_coefficient(c),
            },
            init,
            t0,
            t_end,
            Moduli {
                lip_const: 0.0,
                lip_slope: 3.0 * (a * a).max(b * b).max(c * c),
                growth_bound: 0.0,
            },
            band,
        ),
        "gbm-like" => SdeProblem::new(
            format!("gbm-like(c={c})"),
            Coefficients {
                drift: zero_coefficient(),
                qv_drift: zero_coefficient(),
                diffusion: linear_coefficient(c),
            },
            init,
            t0,
            t_end,
            Moduli {
                lip_const: 0.0,
                lip_slope: 3.0 * c * c,
                growth_bound: 0.0,
            },
            band,
        ),
        "quadratic" => SdeProblem::new(
            "quadratic",
            Coefficients {
                drift: Arc::new(|_t, state: &[f64], out: &mut [f64]| {
                    for (o, &z) in out.iter_mut().zip(state) {
                        *o = z * z;
                    }
                }),
                qv_drift: zero_coefficient(),
                diffusion: zero_coefficient(),
            },
            init,
            t0,
            t_end,
            Moduli {
                lip_const: 0.0,
                lip_slope: 1.0,
                growth_bound: 0.0,
            },
            band,
        ),
        other => Err(Error::UnknownBuiltin(other.into())),
    }
}

/// Problem with zero coefficients but explicitly declared constants.
///
/// The dynamics are trivial (the state never moves), which makes every
/// declared constant a valid majorant; the point is to evaluate the bound
/// formulas for an arbitrary `(m0, C, D, M)` combination, e.g. from the
/// `bounds` subcommand.
pub fn declared(
    initial_value: f64,
    initial_second_moment: Option<f64>,
    t0: f64,
    t_end: f64,
    moduli: Moduli,
    band: VolatilityBand,
) -> Result<SdeProblem> {
    let p = SdeProblem::new(
        format!(
            "declared(C={}, D={}, M={})",
            moduli.lip_const, moduli.lip_slope, moduli.growth_bound
        ),
        Coefficients {
            drift: zero_coefficient(),
            qv_drift: zero_coefficient(),
            diffusion: zero_coefficient(),
        },
        vec![initial_value],
        t0,
        t_end,
        moduli,
        band,
    )?;
    match initial_second_moment {
        Some(m) => p.with_initial_second_moment(m),
        None => Ok(p),
    }
}

/// Tolerance on the validation inequalities, absorbing floating-point
/// rounding in cases where the declared constants are attained with
/// equality (the linear builtins are exactly tight).
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

/// Result of spot-checking the standing assumptions on sampled points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// Worst sampled value of (summed squared coefficient differences) /
    /// (lip_const + lip_slope * |u - v|^2).
    pub lipschitz_worst_ratio: f64,
    /// Worst sampled value of the summed squared coefficient norms at the
    /// origin.
    pub growth_worst: f64,
    pub pass: bool,
    pub samples_used: u32,
}

const VALIDATE_STREAM: u64 = 0x5641_4c49_4441_5445;

/// Checks the Lipschitz-majorant and growth conditions on `n_samples`
/// random points: times uniform on the horizon, state pairs uniform in the
/// centered ball of radius `sample_radius`.
///
/// A sampled check cannot prove the declared constants correct, but it
/// reliably catches under-declared ones (see the `quadratic` builtin).
/// Deterministic for a given seed.
pub fn validate(
    problem: &SdeProblem,
    n_samples: u32,
    sample_radius: f64,
    seed: u64,
) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !sample_radius.is_finite() || sample_radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sample radius must be positive and finite, got {sample_radius}"
        )));
    }
    let dim = problem.dim();
    let origin = vec![0.0; dim];
    let mut out_u = vec![0.0; dim];
    let mut out_v = vec![0.0; dim];
    let mut worst_ratio = 0.0f64;
    let mut worst_growth = 0.0f64;

    for i in 0..n_samples {
        let rng = CounterRng::new(seed, VALIDATE_STREAM, u64::from(i));
        let t = problem.t0 + rng.uniform(0, 0) * problem.horizon();
        let u = ball_point(&rng, 1, dim, sample_radius);
        let v = ball_point(&rng, 2, dim, sample_radius);

        let mut growth = 0.0;
        let mut lhs = 0.0;
        let dist_sq: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        for coeff in [
            &problem.coefficients.drift,
            &problem.coefficients.qv_drift,
            &problem.coefficients.diffusion,
        ] {
            coeff(t, &origin, &mut out_u);
            growth += out_u.iter().map(|x| x * x).sum::<f64>();
            coeff(t, &u, &mut out_u);
            coeff(t, &v, &mut out_v);
            lhs += out_u
                .iter()
                .zip(&out_v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let denom = problem.moduli.lip_const + problem.moduli.lip_slope * dist_sq;
        let ratio = if denom > 0.0 {
            lhs / denom
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_ratio = worst_ratio.max(ratio);
        worst_growth = worst_growth.max(growth);
    }

    Ok(ValidationReport {
        lipschitz_worst_ratio: worst_ratio,
        growth_worst: worst_growth,
        pass: worst_ratio <= 1.0 + VALIDATION_TOLERANCE
            && worst_growth <= problem.moduli.growth_bound + VALIDATION_TOLERANCE,
        samples_used: n_samples,
    })
}

/// Uniform point in the centered ball: Gaussian direction, radius scaled
/// by U^(1/dim).
fn ball_point(rng: &CounterRng, tag: u64, dim: usize, radius: f64) -> Vec<f64> {
    let mut point: Vec<f64> = (0..dim)
        .map(|k| rng.gaussian(tag, 1 + k as u64))
        .collect();
    let norm = point.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return point;
    }
    let r = radius * rng.uniform(tag, 0).powf(1.0 / dim as f64);
    for x in &mut point {
        *x *= r / norm;
    }
    point
}
