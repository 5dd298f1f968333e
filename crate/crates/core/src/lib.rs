//! Intrinsic Lipschitz graphs in the Heisenberg group `H^n`.
//!
//! The crate covers group arithmetic and intrinsic Lipschitz verification
//! ([`heisenberg`]), tame maps ([`tame`], [`grid`]), C^{1,1} Whitney and McShane
//! extension ([`whitney`]), the extension pipeline for maps `V -> W` ([`extension`]),
//! corona decompositions of one-dimensional graphs ([`corona`]) and file formats,
//! generators and the command-line driver ([`cli_io`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! `f64`, which is what the command-line tool uses.

pub mod cli_io;
pub mod corona;
pub mod error;
pub mod extension;
pub mod grid;
pub mod heisenberg;
pub mod rng;
pub mod scalar;
pub mod tame;
pub mod whitney;

pub use error::{IlgError, Result};
pub use scalar::Scalar;

pub type HeisPoint = heisenberg::HeisPoint<f64>;
pub type SampledMap = heisenberg::SampledMap<f64>;
pub type ResidualPair = heisenberg::ResidualPair<f64>;
pub type TameConstants = tame::TameConstants<f64>;
pub type TameReport = tame::TameReport<f64>;
pub type GridFunction = grid::GridFunction<f64>;
pub type ExtendedTameMap = extension::ExtendedTameMap<f64>;
