//! Reward-aligned sampling from a base distribution under two geometries.
//!
//! * KL alignment (`q ∝ p·exp(f(Ax))` for convex, Lipschitz `f`) is sampled
//!   by rejection from a log-sum-exp envelope whose tilt is an explicit
//!   mixture of linear exponential tilts of the base ([`kl`]).
//! * Wasserstein alignment is sampled by pushing base draws through the
//!   proximal transport map `y ↦ argmax_x r(x) − λ‖x−y‖²` ([`w2`]).
//!
//! Base laws ([`model`]) come with exact samplers and closed-form scores so
//! that every stage can also be checked against brute-force oracles
//! ([`metrics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod io;
pub mod kl;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rewards;
pub mod rng;
pub mod tilt;
pub mod validate;
pub mod w2;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
