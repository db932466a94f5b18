//! Anomaly ranking by two-sample rank statistics and Mass-Volume curves.
//!
//! The library learns real-valued scoring functions whose level sets
//! concentrate on the high-density region of the data. Training maximizes a
//! linear rank statistic that contrasts observed points against a synthetic
//! uniform (or adversarially placed) negative sample; the quality of a scorer
//! is read off its Mass-Volume curve. Modules:
//!
//! * [`datagen`] — Gaussian, uniform-cube, and radial Beta-law samplers.
//! * [`scoregen`] — the six score-generating functions `phi`.
//! * [`rankstats`] — pooled ranks, the rank-sum statistic and its smooth proxy.
//! * [`mvcurve`] — empirical and analytic Mass-Volume curves.
//! * [`model`] — a small MLP scorer with hand-rolled backprop.
//! * [`procedure`] — the two-stage fit/rank experiment driver.
//! * [`config`], [`io`], [`cli`] — experiment configuration and the
//!   command-line pipeline around it.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod io;
pub mod model;
pub mod mvcurve;
pub mod procedure;
pub mod rankstats;
pub mod rng;
pub mod scoregen;

pub use error::{Error, Result};
