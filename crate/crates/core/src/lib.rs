//! Continuous-time cell-division tessellation processes in convex planar
//! windows, and a harness that tests their spatial consistency.
//!
//! A process is fixed by a [`rules::SelectionRule`] giving each cell its
//! division rate and a [`rules::DivisionRule`] giving the law of the line
//! that splits it. Using one translation-invariant line measure for both
//! yields the STIT tessellation, the consistent member of the family.
//!
//! ```
//! use std::sync::Arc;
//! use celldiv::engine::Process;
//! use celldiv::geometry::Polygon;
//! use celldiv::measures::HyperplaneMeasure;
//! use celldiv::rules::RulePair;
//!
//! let measure = Arc::new(HyperplaneMeasure::isotropic(1.0).unwrap());
//! let window = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
//! let mut process = Process::new(window, RulePair::stit(measure), 42).unwrap();
//! process.advance(3.0).unwrap();
//! assert_eq!(process.cell_count(), process.division_count() + 1);
//! ```

pub mod analysis;
pub mod engine;
pub mod geometry;
pub mod measures;
pub mod rng;
pub mod rules;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Measure(#[from] measures::MeasureError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}
