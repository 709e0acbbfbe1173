//! Feature-driven social contact networks: synthetic populations, fuzzy
//! feature representations, rank-based network formation, calibration
//! against survey contact matrices and SI epidemic resilience.

pub mod bayes;
pub mod calibration;
pub mod contact;
pub mod epidemic;
pub mod error;
pub mod formation;
pub mod fuzzy;
pub mod metrics;
pub mod population;
pub mod sampling;
pub mod scoring;
pub mod sensitivity;

pub use error::{Error, Result};
