//! Model-based quantile regression for count data.
//!
//! The crate is layered bottom-up: [`specfun`] provides the incomplete gamma
//! and beta functions, [`countdist`] builds the discrete count families and
//! their continuous interpolations on top of them, [`mbqr`] fits quantile
//! regressions by maximum likelihood through the quantile-to-parameter map,
//! and [`jitterqr`] is the jittering comparator. [`experiment`] holds the
//! seeded simulation drivers shared by the CLI and the test suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod countdist;
pub mod experiment;
pub mod jitterqr;
pub mod mbqr;
pub mod specfun;
