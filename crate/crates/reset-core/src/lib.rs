//! Competition-based multiple hypothesis testing with semi-supervised rescoring.
//!
//! The library is organized around a simple pipeline: hypotheses carry a
//! ±1 label, a winning score, and optional side information
//! ([`model::HypothesisTable`]); a rescoring engine ([`reset`]) retrains the
//! scores against a held-out portion of the negative labels; and competition
//! filters ([`filters`]) turn the (re)scored table into a discovery list with
//! finite-sample false discovery rate or false discovery proportion
//! guarantees. P-value inputs are converted into competition form by
//! [`pvalue_adapter`], and [`simgen`] provides the synthetic generators and
//! Monte Carlo harness used to validate the error control empirically.

pub mod classifiers;
pub mod ensemble;
pub mod filters;
pub mod model;
pub mod numerics;
pub mod pvalue_adapter;
pub mod reset;
pub mod simgen;
