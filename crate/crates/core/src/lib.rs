//! Exact constructions for sums and differences of homogeneous Cantor sets:
//! renormalization dynamics, recurrent sets, perturbation search and
//! replayable interval certificates.

pub mod baselines;
pub mod certificate;
pub mod configuration;
pub mod constants;
pub mod density;
pub mod error;
pub mod ifs;
pub mod interval;
pub mod io;
pub mod pipeline;
pub mod rational;
pub mod recurrent;
pub mod search;

pub use error::{Error, Result};
pub use ifs::{HomogeneousIfs, Word};
pub use interval::IntervalUnion;
pub use rational::Rational;
