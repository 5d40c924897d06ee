//! Large-deviation rate functions for the empirical mean of i.i.d.
//! replications of the total progeny of a subcritical Galton-Watson
//! process, with a random initial population, plus a Monte Carlo harness
//! for checking them against simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod montecarlo;
pub mod offspring;
mod optimize;
pub mod progeny;
pub mod ratefn;

pub use error::{Error, Result};
pub use offspring::{DistSpec, Family, FamilyParams, FamilyTag, Pmf};
pub use progeny::{
    compound_pgf, compound_progeny_pmf, extinction_probability, progeny_mean, total_progeny_pgf,
    total_progeny_pmf_dwass, ProgenyModel,
};
pub use ratefn::{RateFunction, RateKind, RateValue, Route};
