//! Simulation of scalar and vector SDEs driven by a Brownian motion with
//! volatility uncertainty, together with the explicit moment and
//! strong-error bounds of the underlying scheme and a harness that checks
//! simulated statistics against those bounds.
//!
//! The crate is organized around the pipeline the CLI exposes:
//!
//! * [`gshock`]: driver paths. A volatility band, scenario policies that
//!   pick a volatility inside it, and simulated paths carrying both the
//!   driver and its quadratic variation. The sublinear expectation of a
//!   path functional is estimated as the largest scenario mean.
//! * [`problem`]: SDE problems (coefficients, initial data, horizon) plus
//!   the declared regularity constants the bounds are computed from, a
//!   small builtin catalog, and a sampling validator for the declarations.
//! * [`emsolver`]: the Euler-Maruyama scheme along a driver path, and the
//!   coupling of one path across two resolutions used for error studies.
//! * [`bounds`]: the explicit constants: the second-moment bound, the
//!   increment rate, and the strong-error bound as a function of the
//!   resolution.
//! * [`harness`]: JSON-configured experiments comparing Monte Carlo
//!   estimates against the bounds, with CSV/JSON reports and a CLI.
//!
//! Every run is a pure function of its config and seed: path noise comes
//! from a counter-based generator keyed by (seed, scenario, path, step),
//! so results are byte-identical across repeats and thread counts.

pub mod bounds;
pub mod emsolver;
pub mod error;
pub mod gshock;
pub mod harness;
pub mod problem;
pub mod rng;

mod stats;

pub use error::{Error, Result};
