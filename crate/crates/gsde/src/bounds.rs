//! Closed-form boundedness and error constants for the Euler-Maruyama
//! scheme under G-Brownian noise.
//!
//! With `m0` the initial second moment, `T` the terminal time, `t0` the
//! start, and `(C, D, M)` the problem's moduli (additive Lipschitz
//! constant, Lipschitz slope, growth bound), the library computes
//!
//! ```text
//! moment_base    = 4 m0 + 16 T (T + 2) (M + C)
//! moment_rate    = 16 D (T + 2)
//! moment_bound   = moment_base * exp(moment_rate * T)
//! increment_rate = 12 (T + 2) (M + C + moment_bound * D)
//! error_bound(q) = 6 T (T + 2) (C + 2 D increment_rate / q)
//!                    * exp(12 (T + 2) D (T - t0))
//! ```
//!
//! `moment_bound` caps the scheme's second moments uniformly in time,
//! `increment_rate` scales mean-square increments linearly in the time
//! gap, and `error_bound(q)` dominates the mean-square distance to the
//! exact solution at resolution `q`. All are evaluated exactly as written
//! so tests can compare against independently coded expressions; when the
//! exponential overflows double precision the value is carried in
//! log-space and reported as infinity with a usable logarithm alongside.

use crate::error::{Error, Result};
use crate::problem::SdeProblem;

/// Bounds whose base-10 logarithm exceeds this are flagged as
/// astronomically loose in reports: they are still correct, just useless
/// for comparison against simulation.
pub const ASTRONOMICAL_LOG10: f64 = 300.0;

/// ln(f64::MAX); exp of anything above this overflows.
const MAX_FINITE_EXP: f64 = 709.782_712_893_384;

/// All the problem's constants in one place, with logarithmic companions
/// that stay finite when the plain values overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    pub moment_base: f64,
    pub moment_rate: f64,
    pub moment_bound: f64,
    pub increment_rate: f64,
    /// Natural log of `moment_bound` (-inf when the bound is 0).
    pub ln_moment_bound: f64,
    /// Natural log of `increment_rate`.
    pub ln_increment_rate: f64,
    pub astronomically_loose: bool,
}

impl BoundSet {
    pub fn for_problem(problem: &SdeProblem) -> BoundSet {
        let (moment_base, moment_rate, moment_bound) = moment_bound_constants(problem);
        let t = problem.t_end;
        let d = problem.moduli.lip_slope;
        let mc = problem.moduli.growth_bound + problem.moduli.lip_const;

        let ln_moment_bound = if moment_bound.is_finite() {
            moment_bound.ln()
        } else {
            moment_base.ln() + moment_rate * t
        };

        let rate = increment_rate(problem, moment_bound);
        let ln_increment_rate = if rate.is_finite() {
            rate.ln()
        } else {
            let ln_kd = if d == 0.0 {
                f64::NEG_INFINITY
            } else {
                ln_moment_bound + d.ln()
            };
            (12.0 * (t + 2.0)).ln() + ln_add_exp(mc.ln(), ln_kd)
        };

        BoundSet {
            moment_base,
            moment_rate,
            moment_bound,
            increment_rate: rate,
            ln_moment_bound,
            ln_increment_rate,
            astronomically_loose: is_astronomical(ln_moment_bound)
                || is_astronomical(ln_increment_rate),
        }
    }
}

/// `(moment_base, moment_rate, moment_bound)` for the problem.
pub fn moment_bound_constants(problem: &SdeProblem) -> (f64, f64, f64) {
    let t = problem.t_end;
    let mc = problem.moduli.growth_bound + problem.moduli.lip_const;
    let base = 4.0 * problem.initial_second_moment + 16.0 * t * (t + 2.0) * mc;
    let rate = 16.0 * problem.moduli.lip_slope * (t + 2.0);
    (base, rate, scaled_exp(base, rate * t))
}

/// Mean-square increment rate `12 (T + 2) (M + C + moment_bound * D)`.
///
/// With slope `D = 0` the moment bound drops out entirely, including when
/// it is infinite.
pub fn increment_rate(problem: &SdeProblem, moment_bound: f64) -> f64 {
    let t = problem.t_end;
    let d = problem.moduli.lip_slope;
    let mc = problem.moduli.growth_bound + problem.moduli.lip_const;
    let kd = if d == 0.0 { 0.0 } else { moment_bound * d };
    12.0 * (t + 2.0) * (mc + kd)
}

/// Mean-square error bound at resolution `q`, evaluated at the terminal
/// time.
pub fn strong_error_bound(problem: &SdeProblem, q: u32) -> f64 {
    assert!(q > 0, "resolution must be positive");
    let t = problem.t_end;
    let c = problem.moduli.lip_const;
    let d = problem.moduli.lip_slope;
    let h = increment_rate(problem, moment_bound_constants(problem).2);
    let inner = if d == 0.0 {
        c
    } else {
        c + 2.0 * d * h / f64::from(q)
    };
    if inner == 0.0 {
        return 0.0;
    }
    scaled_exp(
        6.0 * t * (t + 2.0) * inner,
        12.0 * (t + 2.0) * d * (t - problem.t0),
    )
}

/// Natural log of [`strong_error_bound`], finite whenever the bound is
/// positive, even when the plain value overflows to infinity.
pub fn strong_error_bound_ln(problem: &SdeProblem, q: u32) -> f64 {
    assert!(q > 0, "resolution must be positive");
    let t = problem.t_end;
    let c = problem.moduli.lip_const;
    let d = problem.moduli.lip_slope;
    let set = BoundSet::for_problem(problem);
    let ln_slope_term = if d == 0.0 {
        f64::NEG_INFINITY
    } else {
        (2.0 * d / f64::from(q)).ln() + set.ln_increment_rate
    };
    let ln_inner = ln_add_exp(c.ln(), ln_slope_term);
    (6.0 * t * (t + 2.0)).ln() + ln_inner + 12.0 * (t + 2.0) * d * (t - problem.t0)
}

/// Limit of [`strong_error_bound`] as the resolution grows: the bound
/// never vanishes when the additive constant `C` is positive.
pub fn strong_error_bound_limit(problem: &SdeProblem) -> f64 {
    let t = problem.t_end;
    let c = problem.moduli.lip_const;
    let d = problem.moduli.lip_slope;
    if c == 0.0 {
        return 0.0;
    }
    scaled_exp(
        6.0 * t * (t + 2.0) * c,
        12.0 * (t + 2.0) * d * (t - problem.t0),
    )
}

/// [`strong_error_bound`] evaluated per resolution.
pub fn bound_table(problem: &SdeProblem, resolutions: &[u32]) -> Result<Vec<(u32, f64)>> {
    if resolutions.is_empty() {
        return Err(Error::InvalidArgument("resolution list is empty".into()));
    }
    Ok(resolutions
        .iter()
        .map(|&q| (q, strong_error_bound(problem, q)))
        .collect())
}

/// `ln(exp(a) + exp(b))` without overflow; `-inf` inputs behave as ln(0).
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Whether a natural-log value exceeds the astronomically-loose cutoff.
pub fn is_astronomical(ln_value: f64) -> bool {
    ln_value > ASTRONOMICAL_LOG10 * std::f64::consts::LN_10
}

/// `base * exp(arg)` for nonnegative `base`, rescued through log-space
/// when `exp(arg)` alone would overflow but the product is representable.
fn scaled_exp(base: f64, arg: f64) -> f64 {
    if base == 0.0 {
        return 0.0;
    }
    if arg <= 709.0 {
        return base * arg.exp();
    }
    let ln = base.ln() + arg;
    if ln >= MAX_FINITE_EXP {
        f64::INFINITY
    } else {
        ln.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gshock::VolatilityBand;
    use crate::problem::{declared, Moduli};

    fn problem(z0m: f64, t0: f64, t_end: f64, c: f64, d: f64, m: f64) -> SdeProblem {
        declared(
            z0m.sqrt(),
            Some(z0m),
            t0,
            t_end,
            Moduli {
                lip_const: c,
                lip_slope: d,
                growth_bound: m,
            },
            VolatilityBand::new(0.5, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn unit_constants_give_the_textbook_values() {
        let p = problem(1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        let (base, rate, bound) = moment_bound_constants(&p);
        assert_eq!(base, 100.0);
        assert_eq!(rate, 48.0);
        assert_eq!(bound, 100.0 * 48.0f64.exp());
        let h = increment_rate(&p, bound);
        assert_eq!(h, 36.0 * (2.0 + bound));
    }

    #[test]
    fn small_slope_constants_match_hand_arithmetic() {
        let p = problem(1.0, 0.0, 1.0, 0.0, 0.01, 0.0);
        let (base, rate, bound) = moment_bound_constants(&p);
        assert_eq!(base, 4.0);
        assert_eq!(rate, 0.48);
        assert!((bound - 6.46430).abs() < 1e-4);
        let h = increment_rate(&p, bound);
        assert!((h - 2.32715).abs() < 1e-4);
        let b = strong_error_bound(&p, 100);
        assert!((b - 1.2008e-2).abs() < 1e-4 * 1.2008e-2);
    }

    #[test]
    fn formulas_match_independent_expressions_bitwise() {
        for (z0m, t0, t_end, c, d, m) in [
            (1.0, 0.0, 1.0, 1.0, 1.0, 1.0),
            (1.0, 0.0, 1.0, 0.0, 0.01, 0.0),
            (0.37, 0.25, 2.25, 0.07, 0.013, 0.11),
            (2.0, 0.5, 3.0, 0.0, 0.2, 0.9),
        ] {
            let p = problem(z0m, t0, t_end, c, d, m);
            let t = t_end;
            let g1 = 4.0 * z0m + 16.0 * t * (t + 2.0) * (m + c);
            let g2 = 16.0 * d * (t + 2.0);
            let k = g1 * (g2 * t).exp();
            let h1 = 12.0 * (t + 2.0) * (m + c + k * d);
            let (base, rate, bound) = moment_bound_constants(&p);
            assert_eq!(base.to_bits(), g1.to_bits());
            assert_eq!(rate.to_bits(), g2.to_bits());
            assert_eq!(bound.to_bits(), k.to_bits());
            assert_eq!(increment_rate(&p, bound).to_bits(), h1.to_bits());
            for q in [1u32, 7, 100] {
                let direct = 6.0 * t * (t + 2.0) * (c + 2.0 * d * h1 / f64::from(q))
                    * (12.0 * (t + 2.0) * d * (t - t0)).exp();
                assert_eq!(strong_error_bound(&p, q).to_bits(), direct.to_bits());
            }
        }
    }

    #[test]
    fn degenerate_problem_has_zero_constants() {
        let p = problem(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let set = BoundSet::for_problem(&p);
        assert_eq!(set.moment_base, 0.0);
        assert_eq!(set.moment_rate, 0.0);
        assert_eq!(set.moment_bound, 0.0);
        assert_eq!(set.increment_rate, 0.0);
        assert_eq!(set.ln_moment_bound, f64::NEG_INFINITY);
        assert_eq!(set.ln_increment_rate, f64::NEG_INFINITY);
        assert!(!set.astronomically_loose);
        assert_eq!(strong_error_bound(&p, 4), 0.0);
    }

    #[test]
    fn zero_slope_drops_the_moment_bound_from_the_increment_rate() {
        let p = problem(1.0, 0.0, 1.0, 0.5, 0.0, 0.25);
        let expected = 12.0 * 3.0 * 0.75;
        assert_eq!(increment_rate(&p, 1.0), expected);
        assert_eq!(increment_rate(&p, f64::INFINITY), expected);
    }

    #[test]
    fn ordering_invariants_hold() {
        for (z0m, c, d, m) in [(1.0, 1.0, 1.0, 1.0), (0.5, 0.0, 0.3, 0.2), (0.0, 0.0, 0.0, 0.0)] {
            let p = problem(z0m, 0.0, 1.0, c, d, m);
            let set = BoundSet::for_problem(&p);
            assert!(set.moment_bound >= set.moment_base);
            assert!(set.moment_base >= 4.0 * z0m);
            assert!(set.increment_rate >= 0.0);
            assert!(strong_error_bound(&p, 3) >= 0.0);
        }
    }

    #[test]
    fn quadrupling_the_resolution_quarters_the_bound_exactly_when_c_is_zero() {
        // Scaling by 4 commutes with rounding, so this holds bitwise.
        let p = problem(1.0, 0.0, 1.0, 0.0, 0.01, 0.0);
        for q in [1u32, 3, 7, 25, 100] {
            let b1 = strong_error_bound(&p, q);
            let b4 = strong_error_bound(&p, 4 * q);
            assert_eq!(b1.to_bits(), (4.0 * b4).to_bits());
        }
    }

    #[test]
    fn bound_decreases_toward_its_limit() {
        let p = problem(1.0, 0.0, 1.0, 0.3, 0.01, 0.1);
        let limit = strong_error_bound_limit(&p);
        assert!(limit > 0.0);
        let mut prev = f64::INFINITY;
        for q in [1u32, 2, 4, 8, 1 << 10, 1 << 20, 1 << 30] {
            let b = strong_error_bound(&p, q);
            assert!(b <= prev);
            assert!(b >= limit);
            prev = b;
        }
        let near = strong_error_bound(&p, u32::MAX);
        assert!((near - limit).abs() <= 1e-8 * limit);

        let c0 = problem(1.0, 0.0, 1.0, 0.0, 0.01, 0.0);
        assert_eq!(strong_error_bound_limit(&c0), 0.0);
    }

    #[test]
    fn table_is_strictly_decreasing_when_the_slope_term_is_active() {
        let p = problem(1.0, 0.0, 1.0, 0.0, 0.01, 0.0);
        let table = bound_table(&p, &[4, 8, 16]).unwrap();
        assert_eq!(table.len(), 3);
        assert!(table[0].1 > table[1].1 && table[1].1 > table[2].1);

        let flat = problem(1.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let table = bound_table(&flat, &[4, 8, 16]).unwrap();
        assert!(table.iter().all(|&(_, b)| b == 0.0));

        let single = bound_table(&p, &[100]).unwrap();
        assert_eq!(single, vec![(100, strong_error_bound(&p, 100))]);

        assert!(bound_table(&p, &[]).is_err());
    }

    #[test]
    fn overflowing_constants_become_flagged_infinities_with_finite_logs() {
        // moment_rate * T = 16 * 50 * 3 = 2400, far beyond exp() range.
        let p = problem(1.0, 0.0, 1.0, 1.0, 50.0, 1.0);
        let set = BoundSet::for_problem(&p);
        assert!(set.moment_bound.is_infinite());
        assert!(set.increment_rate.is_infinite());
        assert!(set.astronomically_loose);
        let expected_ln_k = set.moment_base.ln() + 2400.0;
        assert!((set.ln_moment_bound - expected_ln_k).abs() < 1e-9);
        assert!(set.ln_increment_rate.is_finite());
        assert!(set.ln_increment_rate > set.ln_moment_bound);
        assert!(strong_error_bound(&p, 10).is_infinite());
        assert!(strong_error_bound_ln(&p, 10).is_finite());
    }

    #[test]
    fn log_form_agrees_with_the_plain_bound_when_finite() {
        for (c, d) in [(0.0, 0.01), (0.3, 0.05), (1.0, 1.0)] {
            let p = problem(1.0, 0.0, 1.0, c, d, 0.2);
            for q in [1u32, 10, 1000] {
                let plain = strong_error_bound(&p, q);
                let ln = strong_error_bound_ln(&p, q);
                assert!(
                    (ln - plain.ln()).abs() < 1e-10,
                    "c={c} d={d} q={q}: {ln} vs {}",
                    plain.ln()
                );
            }
        }
    }

    #[test]
    fn ln_add_exp_handles_extremes() {
        assert_eq!(ln_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(ln_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert_eq!(ln_add_exp(3.0, f64::NEG_INFINITY), 3.0);
        let x = ln_add_exp(0.0, 0.0);
        assert!((x - std::f64::consts::LN_2).abs() < 1e-15);
        let big = ln_add_exp(1000.0, 999.0);
        assert!((big - (1000.0 + (1.0f64 + (-1.0f64).exp()).ln())).abs() < 1e-12);
    }
}
