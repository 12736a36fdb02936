//! Vector-perturbation precoding for the multiuser MIMO broadcast channel.
//!
//! The crate covers the whole chain from a channel matrix to a sum rate:
//!
//! * [`linalg`]: complex matrices, pseudoinverse, Gram determinants and the
//!   `H = D·V·Q` factorisation.
//! * [`lattice`]: the modulo map and the sphere encoder that finds the
//!   perturbation minimising transmit power.
//! * [`precoder`]: encoding, demodulation and Monte-Carlo estimation of the
//!   mean sphere-encoded power `E_se`.
//! * [`rates`]: the modulo-Gaussian correction `Ω`, exact sum rate and its bounds.
//! * [`scheduler`]: greedy user selection (GRM, SUS, greedy ZF) and exhaustive search.
//! * [`alloc`]: iterative waterfilling for per-user rate weights.
//! * [`sim`]: channel generation, experiment configs and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod precoder;
pub mod rates;
pub mod scheduler;
pub mod seeding;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
