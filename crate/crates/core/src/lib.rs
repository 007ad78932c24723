//! Pricing engine for insurance contracts that cover the errors of a binary
//! classifier.
//!
//! The pipeline turns a trained classifier's sensitivity and specificity plus
//! litigation-cost distributions into simulated claim scenarios
//! ([`claims`]), prices the contract by minimizing CVaR with a linear program
//! ([`pricing`], [`lpsolve`]), and offers adjustments for interpretability
//! ([`interpret`]) and stress tests on synthetic data ([`generalize`]).

pub mod claims;
pub mod classifier;
pub mod generalize;
pub mod interpret;
pub mod lpsolve;
#[cfg(any(test, feature = "oracles"))]
pub mod oracle;
pub mod pricing;
pub mod riskcore;
