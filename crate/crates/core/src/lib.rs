//! Core library for quantifying how much the type-I error of a one-sample
//! test inflates when the experimenter may append up to `k` extra
//! observations after an initial sample of size `n`, re-testing after each
//! one and reporting a rejection as soon as any test fires.
//!
//! The crate provides three independent routes to the inflated level and to
//! the relative inflation `rho`:
//!
//! * closed-form asymptotic predictors ([`asymptotics`]),
//! * deterministic quadrature for the one-extra-observation Gaussian case
//!   ([`asymptotics::exact_gauss_k1`]),
//! * a reproducible Monte Carlo engine over the exact finite-sample test
//!   sequence ([`mc`]).
//!
//! Supporting modules supply the special functions ([`special`]), the test
//! families and their sequential state ([`families`]), and exact rational
//! random-walk identities used as an independent cross-check ([`walk`]).

#![allow(clippy::excessive_precision)]

pub mod asymptotics;
pub mod families;
pub mod mc;
pub mod special;
pub mod walk;
