//! Benchmarking toolkit for automated verbal-autopsy cause-of-death assignment.
//!
//! The pipeline: parse labeled deaths ([`data`]), estimate symptom-cause
//! information ([`sci`]), assign causes with one of five algorithm variants
//! ([`classifiers`]), score the assignments ([`metrics`]) over a cross-site
//! train/test grid ([`experiment`]), and decompose the metric variance by
//! training site, test site and algorithm ([`stats`]). [`synth`] generates
//! multi-site populations with known ground truth for verification.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod sampling;
pub mod sci;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
