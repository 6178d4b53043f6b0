//! Two-sample spatial-consistency test: the process run in `V` against the
//! process run in `W ⊃ V` and cropped to `V`, compared at fixed times on a
//! pre-registered family of functionals with Holm correction.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{chi_square_2x2, holm_adjust, ks_two_sample};
use super::{window_stats, window_stats_unchecked, AnalysisError, Probe, WindowStats};
use crate::engine::{self, EngineError, Process};
use crate::geometry::Polygon;
use crate::rng::derive_seed;
use crate::rules::RulePair;

/// Significance level for declaring inconsistency.
pub const DETECTION_ALPHA: f64 = 0.001;

/// Significance level for non-rejection claims.
pub const NON_REJECTION_ALPHA: f64 = 0.01;

pub const MIN_REPLICATES: usize = 100;

/// Fraction of aborted replicates tolerated before the run fails.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

const TAG_INNER: u64 = 0x5f_696e;
const TAG_OUTER: u64 = 0x5f_6f75;

#[derive(Debug, Clone)]
pub struct ConsistencyConfig {
    pub rules: RulePair,
    /// Observation window `V`.
    pub inner: Polygon,
    /// Construction window `W ⊇ V`.
    pub outer: Polygon,
    pub times: Vec<f64>,
    pub n_reps: usize,
    pub probes: Vec<Probe>,
    pub seed: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentNotRejected,
    InconsistentDetected,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::ConsistentNotRejected => "consistent-not-rejected",
            Verdict::InconsistentDetected => "inconsistent-detected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticTest {
    pub time: f64,
    pub statistic: String,
    /// `"ks"` or `"chi2"`.
    pub method: String,
    pub test_statistic: f64,
    pub p_value: f64,
    pub p_holm: f64,
    pub mean_inner: f64,
    pub mean_outer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub schema: String,
    pub rules: String,
    pub inner_window: Vec<[f64; 2]>,
    pub outer_window: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub seed: u64,
    pub n_reps: usize,
    pub replicates_inner: usize,
    pub replicates_outer: usize,
    pub aborted_inner: usize,
    pub aborted_outer: usize,
    pub alpha: f64,
    pub tests: Vec<StatisticTest>,
    pub min_p_holm: f64,
    pub verdict: Verdict,
}

pub const REPORT_SCHEMA: &str = "celldiv-consistency-report/1";

impl ConsistencyReport {
    /// Human-readable table, one row per test.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rules: {}", self.rules);
        let _ = writeln!(
            out,
            "replicates: inner {} (aborted {}), outer {} (aborted {})",
            self.replicates_inner, self.aborted_inner, self.replicates_outer, self.aborted_outer
        );
        let _ = writeln!(
            out,
            "{:>6}  {:<20} {:>5} {:>10} {:>11} {:>11} {:>11} {:>11}",
            "time", "statistic", "test", "value", "p", "p_holm", "mean_V", "mean_W∩V"
        );
        for t in &self.tests {
            let _ = writeln!(
                out,
                "{:>6.3}  {:<20} {:>5} {:>10.5} {:>11.4e} {:>11.4e} {:>11.5} {:>11.5}",
                t.time,
                t.statistic,
                t.method,
                t.test_statistic,
                t.p_value,
                t.p_holm,
                t.mean_inner,
                t.mean_outer
            );
        }
        let _ = writeln!(
            out,
            "min Holm-adjusted p = {:.4e} at alpha = {}: {}",
            self.min_p_holm,
            self.alpha,
            self.verdict.as_str()
        );
        out
    }
}

/// Stats at every time for one replicate, or `None` if it aborted.
fn run_replicate(
    window: &Polygon,
    crop_to: &Polygon,
    rules: &RulePair,
    times: &[f64],
    probes: &[Probe],
    seed: u64,
) -> Result<Option<Vec<WindowStats>>, AnalysisError> {
    let mut p = Process::new(window.clone(), rules.clone(), seed)?;
    match p.snapshots_in(times, crop_to) {
        Ok(snaps) => Ok(Some(
            snaps
                .iter()
                .map(|s| window_stats_unchecked(s, probes))
                .collect(),
        )),
        Err(EngineError::ReplicateAborted { .. } | EngineError::EventCap) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn run_family(
    cfg: &ConsistencyConfig,
    window: &Polygon,
    tag: u64,
) -> Result<(Vec<Vec<WindowStats>>, usize), AnalysisError> {
    let runs: Vec<Option<Vec<WindowStats>>> = (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|i| {
            run_replicate(
                window,
                &cfg.inner,
                &cfg.rules,
                &cfg.times,
                &cfg.probes,
                derive_seed(cfg.seed, tag, i),
            )
        })
        .collect::<Result<_, _>>()?;
    let aborted = runs.iter().filter(|r| r.is_none()).count();
    if aborted as f64 > MAX_ABORT_FRACTION * cfg.n_reps as f64 {
        return Err(AnalysisError::TooManyAborts {
            aborted,
            total: cfg.n_reps,
        });
    }
    Ok((runs.into_iter().flatten().collect(), aborted))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs `n_reps` replicates in `V` and `n_reps` in `W` cropped to `V`, and
/// tests every functional at every time. The verdict is
/// `InconsistentDetected` iff the smallest Holm-adjusted p-value is below
/// `alpha`.
pub fn consistency_test(cfg: &ConsistencyConfig) -> Result<ConsistencyReport, AnalysisError> {
    if !cfg.outer.contains_polygon(&cfg.inner) {
        return Err(crate::geometry::GeometryError::ContainmentViolation(
            "inner window is not inside the outer window".into(),
        )
        .into());
    }
    if cfg.n_reps < MIN_REPLICATES {
        return Err(AnalysisError::InsufficientSamples {
            got: cfg.n_reps,
            need: MIN_REPLICATES,
        });
    }
    if cfg.times.is_empty()
        || cfg.times.iter().any(|t| !(*t > 0.0 && t.is_finite()))
        || cfg.times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(AnalysisError::InvalidInput(
            "times must be positive, finite and ascending".into(),
        ));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(AnalysisError::InvalidInput(format!("alpha {} not in (0,1)", cfg.alpha)));
    }
    // Validates probe containment once, up front.
    window_stats(
        &engine::CroppedTessellation::empty(cfg.inner.clone(), 0.0),
        &cfg.probes,
    )?;
    engine::guard_rules(&cfg.rules, &cfg.outer, cfg.seed)?;

    let (inner, aborted_inner) = run_family(cfg, &cfg.inner, TAG_INNER)?;
    let (outer, aborted_outer) = run_family(cfg, &cfg.outer, TAG_OUTER)?;

    let mut tests = Vec::new();
    for (k, &time) in cfg.times.iter().enumerate() {
        let scalar = |runs: &[Vec<WindowStats>], f: fn(&WindowStats) -> f64| -> Vec<f64> {
            runs.iter().map(|r| f(&r[k])).collect()
        };
        #[allow(clippy::type_complexity)]
        let functionals: [(&str, fn(&WindowStats) -> f64); 3] = [
            ("total_length", |s| s.total_length),
            ("segment_count", |s| s.segment_count as f64),
            ("interior_endpoints", |s| s.interior_endpoints as f64),
        ];
        for (name, f) in functionals {
            let a = scalar(&inner, f);
            let b = scalar(&outer, f);
            let r = ks_two_sample(&a, &b)?;
            tests.push(StatisticTest {
                time,
                statistic: name.into(),
                method: "ks".into(),
                test_statistic: r.statistic,
                p_value: r.p_value,
                p_holm: f64::NAN,
                mean_inner: mean(&a),
                mean_outer: mean(&b),
            });
        }
        for j in 0..cfg.probes.len() {
            let ha = inner.iter().filter(|r| r[k].probe_hits[j]).count();
            let hb = outer.iter().filter(|r| r[k].probe_hits[j]).count();
            let r = chi_square_2x2(ha, inner.len(), hb, outer.len());
            tests.push(StatisticTest {
                time,
                statistic: format!("probe_{j}"),
                method: "chi2".into(),
                test_statistic: r.statistic,
                p_value: r.p_value,
                p_holm: f64::NAN,
                mean_inner: ha as f64 / inner.len() as f64,
                mean_outer: hb as f64 / outer.len() as f64,
            });
        }
    }
    let adjusted = holm_adjust(&tests.iter().map(|t| t.p_value).collect::<Vec<_>>());
    for (t, p) in tests.iter_mut().zip(&adjusted) {
        t.p_holm = *p;
    }
    let min_p_holm = adjusted.iter().copied().fold(1.0, f64::min);
    let verdict = if min_p_holm < cfg.alpha {
        Verdict::InconsistentDetected
    } else {
        Verdict::ConsistentNotRejected
    };
    let coords = |p: &Polygon| p.vertices().iter().map(|v| [v.x, v.y]).collect();
    Ok(ConsistencyReport {
        schema: REPORT_SCHEMA.into(),
        rules: cfg.rules.describe(),
        inner_window: coords(&cfg.inner),
        outer_window: coords(&cfg.outer),
        times: cfg.times.clone(),
        seed: cfg.seed,
        n_reps: cfg.n_reps,
        replicates_inner: inner.len(),
        replicates_outer: outer.len(),
        aborted_inner,
        aborted_outer,
        alpha: cfg.alpha,
        tests,
        min_p_holm,
        verdict,
    })
}
