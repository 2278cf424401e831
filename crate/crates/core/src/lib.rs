//! Sequence-driven structural causal models.
//!
//! Variables take values in finite sets of natural-language phrases, and
//! each endogenous variable is drawn from a language-model scorer restricted
//! to its phrase set, conditioned on the concatenated phrases of its parents.
//! The crate covers model construction ([`scm`], [`spec`]), sampling under
//! observation, intervention and counterfactual ([`sampling`]), benchmark
//! dataset generation ([`benchmark`]), baseline effect estimators
//! ([`estimators`]) and evaluation metrics ([`metrics`]).

pub mod benchmark;
pub mod estimators;
pub mod metrics;
pub mod mocks;
pub mod rng;
pub mod sampling;
pub mod scm;
pub mod scorer;
pub mod spec;
