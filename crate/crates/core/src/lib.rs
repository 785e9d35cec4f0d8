//! Critical continuous-time Markov branching with infinite-variance
//! reproduction and discrete-stable (infinite-mean) immigration.
//!
//! * [`distributions`]: Sibuya, offspring and discrete-stable samplers.
//! * [`analytic`]: closed-form p.g.f.s, extinction probabilities and limits.
//! * [`simulator`]: exact event-driven simulation of `X(t)` and `Y(t)`.
//! * [`verify`]: oracles, Monte Carlo estimators and the verification suite.
//! * [`cli`]: command implementations behind the `stable-branching` binary.

pub mod analytic;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod rng;
pub mod simulator;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use rng::{derive_seed, RngStream};
