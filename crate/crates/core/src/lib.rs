//! Exact event-driven simulation and verification of a decentralized
//! perimeter-surveillance protocol: `n` drones patrol `[0, 1]` at unit speed,
//! exchange border estimates only when they meet, and should settle into
//! patrolling equal sub-intervals.
//!
//! The numeric core is generic over [`Scalar`], an exact ordered field. The
//! aliases below fix the arbitrary-precision instantiation used by the file
//! formats, the scenario generators and the verification suites.

pub mod algebra;
pub mod analysis;
pub mod engine;
pub mod estimates;
pub mod format;
pub mod scalar;
pub mod scenarios;
pub mod svg;
pub mod verify;

pub use scalar::{ParseRationalError, Scalar};

/// Arbitrary-precision exact fraction.
pub type Rational = num_rational::BigRational;
/// Fixed-width fraction; fine for small grids, overflows on large constructions.
pub type Rational64 = num_rational::Ratio<i64>;
pub type Rational128 = num_rational::Ratio<i128>;

pub type BorderEstimate = estimates::BorderEstimate<Rational>;
pub type EstimatePair = estimates::EstimatePair<Rational>;
pub type DroneState = engine::DroneState<Rational>;
pub type Configuration = engine::Configuration<Rational>;
pub type Event = engine::Event<Rational>;
pub type Trace = engine::Trace<Rational>;


pub type SyncReport = analysis::SyncReport<Rational>;
pub type WeightedBorder = algebra::WeightedBorder<Rational>;
