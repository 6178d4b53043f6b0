//! Functionals of cropped tessellations and the statistical machinery that
//! compares their laws across windows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{CroppedTessellation, EngineError};
use crate::geometry::{GeometryError, Point, Polygon, Segment};

pub mod consistency;
pub mod identities;
pub mod stats;

pub use consistency::{consistency_test, ConsistencyConfig, ConsistencyReport, Verdict};
pub use identities::{nu_limit, rate_estimate, NuEstimate, RateEstimate};
pub use stats::{chi_square_2x2, holm_adjust, ks_one_sample, ks_two_sample, TestResult};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient samples: {got} < {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{aborted} of {total} replicates aborted (limit 1%)")]
    TooManyAborts { aborted: usize, total: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A probe set; a tessellation hits it when some segment meets it.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Region(Polygon),
    Segment(Segment),
}

impl Probe {
    pub fn hit_by(&self, s: &Segment, tol: f64) -> bool {
        match self {
            Probe::Region(poly) => poly.intersects_segment(s, tol),
            Probe::Segment(seg) => seg.intersects(s, tol),
        }
    }

    fn inside(&self, v: &Polygon) -> bool {
        match self {
            Probe::Region(poly) => v.contains_polygon(poly),
            Probe::Segment(seg) => {
                let tol = crate::geometry::SNAP_TOLERANCE * v.scale();
                v.contains_point(seg.p, tol) && v.contains_point(seg.q, tol)
            }
        }
    }
}

/// A 3×3 grid of 32-gon disks of radius `0.1 · side` over the bounding box
/// of `v`, where `side` is the shorter box side.
pub fn default_probes(v: &Polygon) -> Vec<Probe> {
    let (lo, hi) = v.bounding_box();
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let r = 0.1 * w.min(h);
    let mut probes = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            let c = Point::new(
                lo.x + w * (2 * i + 1) as f64 / 6.0,
                lo.y + h * (2 * j + 1) as f64 / 6.0,
            );
            let verts = (0..32)
                .map(|k| c + Point::unit(2.0 * PI * k as f64 / 32.0) * r)
                .collect();
            probes.push(Probe::Region(
                Polygon::new(verts).expect("regular 32-gon is valid"),
            ));
        }
    }
    probes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub total_length: f64,
    pub segment_count: usize,
    /// Segment endpoints strictly inside the window.
    pub interior_endpoints: usize,
    pub probe_hits: Vec<bool>,
}

/// Computes the measurable functionals used by the consistency tests.
pub fn window_stats(
    t: &CroppedTessellation,
    probes: &[Probe],
) -> Result<WindowStats, AnalysisError> {
    if let Some(i) = probes.iter().position(|p| !p.inside(&t.window)) {
        return Err(GeometryError::ContainmentViolation(format!(
            "probe {i} is not inside the window"
        ))
        .into());
    }
    Ok(window_stats_unchecked(t, probes))
}

pub(crate) fn window_stats_unchecked(t: &CroppedTessellation, probes: &[Probe]) -> WindowStats {
    let tol = crate::engine::MERGE_TOLERANCE * t.window.scale();
    let interior_endpoints = t
        .segments
        .iter()
        .flat_map(|s| [s.p, s.q])
        .filter(|&p| !t.window.on_boundary(p, tol))
        .count();
    WindowStats {
        total_length: t.segments.iter().map(Segment::length).sum(),
        segment_count: t.segments.len(),
        interior_endpoints,
        probe_hits: probes
            .iter()
            .map(|probe| t.segments.iter().any(|s| probe.hit_by(s, 0.0)))
            .collect(),
    }
}
