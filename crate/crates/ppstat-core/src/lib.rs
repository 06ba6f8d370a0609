//! Analysis of inhomogeneous spatial point patterns in rectangular windows.
//!
//! The crate provides the building blocks of a screening pipeline for mapped
//! point data (tree censuses and the like):
//!
//! * [`geometry`] — windows, translation edge-correction weights, torus
//!   arithmetic;
//! * [`pattern`] — point patterns, census records and CSV ingestion;
//! * [`intensity`] — Gaussian kernel intensity estimation with local edge
//!   correction, bandwidth selection and null-intensity construction;
//! * [`sumstats`] — inhomogeneous K-, F-, G- and J-functions and their cross
//!   versions;
//! * [`simulate`] — inhomogeneous Poisson and Thomas cluster generators with
//!   reproducible seeded streams;
//! * [`mctest`] — pointwise envelopes, global deviation tests with rank
//!   p-values, the Lotwick–Silverman independence test, and batch screening.

pub mod error;
pub mod geometry;
pub mod intensity;
pub mod mctest;
pub mod pattern;
pub mod simulate;
pub mod sumstats;

pub use error::{Error, Result};
pub use geometry::{Point, RectWindow};
pub use intensity::IntensitySurface;
pub use pattern::{CensusRecord, MultiTypePattern, PointPattern, Status};
pub use simulate::RngSeed;
pub use sumstats::{RGrid, SummaryFunction, SummaryKind};
