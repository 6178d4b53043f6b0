//! The continuous-time cell-division process `Y(t, W)`.
//!
//! Each cell draws its life time `τ / λ(C)` with `τ ~ Exp(1)` when it is born.
//! The process jumps whenever the earliest death time elapses: that cell is
//! divided by a line drawn from the division rule and replaced by its two
//! pieces, and the chord is recorded together with its birth time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::geometry::{GeometryError, Point, Polygon, Segment};
use crate::rng;
use crate::rules::{self, RulePair};

pub mod dump;

/// Hard cap on divisions per replicate.
pub const MAX_EVENTS: u64 = 10_000_000;

/// Relative tolerance for merging collinear segments when cropping.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// Chords used by the mis-specification guard in [`guard_rules`].
const GUARD_SAMPLES: usize = 64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("replicate aborted (seed {seed}, cell {cell}): {source}")]
    ReplicateAborted {
        seed: u64,
        cell: u64,
        source: GeometryError,
    },
    #[error("replicate exceeded {MAX_EVENTS} divisions")]
    EventCap,
    #[error("cannot advance to t = {target} from clock {clock}")]
    TimeReversal { target: f64, clock: f64 },
    #[error("selection rule mis-specified: sampled k_C = {0} exceeds limit")]
    Misspecified(f64),
    #[error("selection rule returned non-positive rate {0}")]
    NonPositiveRate(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub polygon: Polygon,
    pub birth_time: f64,
    pub death_time: f64,
    pub index: u64,
    /// Rate used when the death time was scheduled.
    pub rate: f64,
}

/// Min-heap entry ordered by death time, ties broken by insertion index.
#[derive(Debug, Clone)]
struct Queued(Cell);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .0
            .death_time
            .total_cmp(&self.0.death_time)
            .then(other.0.index.cmp(&self.0.index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSegment {
    pub segment: Segment,
    pub birth_time: f64,
}

/// `Y(W, t) ∩ V`: maximal closed segments clipped to `V`, without the
/// boundary of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct CroppedTessellation {
    pub window: Polygon,
    pub segments: Vec<Segment>,
    pub time: f64,
}

impl CroppedTessellation {
    pub fn empty(window: Polygon, time: f64) -> Self {
        CroppedTessellation {
            window,
            segments: Vec::new(),
            time,
        }
    }

    pub fn crop(&self, v: &Polygon) -> Result<CroppedTessellation, GeometryError> {
        if !self.window.contains_polygon(v) {
            return Err(GeometryError::ContainmentViolation(
                "crop window is not inside the tessellation window".into(),
            ));
        }
        Ok(crop_segments(self.segments.iter(), v, self.time))
    }
}

/// Clips segments to `v`, drops pieces lying on `∂v`, and merges collinear
/// touching pieces into maximal segments in canonical order.
pub fn crop_segments<'a>(
    segments: impl IntoIterator<Item = &'a Segment>,
    v: &Polygon,
    time: f64,
) -> CroppedTessellation {
    let tol = MERGE_TOLERANCE * v.scale();
    let clipped: Vec<Segment> = segments
        .into_iter()
        .filter_map(|s| v.clip_segment(&s.canonical(), tol))
        .filter(|s| !along_boundary(v, s, tol))
        .collect();
    CroppedTessellation {
        window: v.clone(),
        segments: merge_collinear(clipped, tol),
        time,
    }
}

fn along_boundary(v: &Polygon, s: &Segment, tol: f64) -> bool {
    v.edges().any(|(a, b)| {
        let e = b - a;
        let en = e.norm();
        (e.cross(s.p - a) / en).abs() <= tol && (e.cross(s.q - a) / en).abs() <= tol
    })
}

/// Line key `(angle of the normal in [0, π), offset)` of a segment's carrier.
fn line_key(s: &Segment) -> (f64, f64) {
    let d = s.direction();
    let n = Point::new(-d.y, d.x);
    let mut theta = n.y.atan2(n.x);
    if theta < 0.0 {
        theta += std::f64::consts::PI;
    }
    if theta >= std::f64::consts::PI - 1e-9 {
        theta -= std::f64::consts::PI;
    }
    let u = Point::unit(theta);
    (theta, s.p.dot(u))
}

fn merge_collinear(segments: Vec<Segment>, tol: f64) -> Vec<Segment> {
    if segments.len() < 2 {
        return segments.into_iter().map(|s| s.canonical()).collect();
    }
    let mut keyed: Vec<((f64, f64), Segment)> =
        segments.into_iter().map(|s| (line_key(&s), s)).collect();
    keyed.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));

    // Chain by angle, then by offset within each angle run.
    let mut out = Vec::with_capacity(keyed.len());
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 .0 - keyed[end - 1].0 .0 <= MERGE_TOLERANCE {
            end += 1;
        }
        let run = &mut keyed[start..end];
        run.sort_by(|a, b| a.0 .1.total_cmp(&b.0 .1));
        let mut s = 0;
        while s < run.len() {
            let mut e = s + 1;
            while e < run.len() && run[e].0 .1 - run[e - 1].0 .1 <= tol {
                e += 1;
            }
            merge_line_group(&run[s..e], tol, &mut out);
            s = e;
        }
        start = end;
    }
    out.sort_by(|a: &Segment, b: &Segment| {
        a.p.x
            .total_cmp(&b.p.x)
            .then(a.p.y.total_cmp(&b.p.y))
            .then(a.q.x.total_cmp(&b.q.x))
            .then(a.q.y.total_cmp(&b.q.y))
    });
    out
}

/// Merges overlapping or touching intervals of segments on one line, keeping
/// the original extreme endpoints.
fn merge_line_group(group: &[((f64, f64), Segment)], tol: f64, out: &mut Vec<Segment>) {
    if group.len() == 1 {
        out.push(group[0].1.canonical());
        return;
    }
    let dir = {
        let d = group[0].1.canonical().direction();
        d * (1.0 / d.norm())
    };
    let mut iv: Vec<(f64, Point, f64, Point)> = group
        .iter()
        .map(|(_, s)| {
            let (a, b) = (s.p.dot(dir), s.q.dot(dir));
            if a <= b {
                (a, s.p, b, s.q)
            } else {
                (b, s.q, a, s.p)
            }
        })
        .collect();
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut cur = iv[0];
    for next in iv.into_iter().skip(1) {
        if next.0 <= cur.2 + tol {
            if next.2 > cur.2 {
                cur.2 = next.2;
                cur.3 = next.3;
            }
        } else {
            out.push(Segment { p: cur.1, q: cur.3 }.canonical());
            cur = next;
        }
    }
    out.push(Segment { p: cur.1, q: cur.3 }.canonical());
}

/// Refuses rules whose sampled split-rate bound `k_C` on `window` explodes.
/// Returns the sampled `k_C`.
pub fn guard_rules(rules: &RulePair, window: &Polygon, seed: u64) -> Result<f64, EngineError> {
    let mut guard_rng = rng::cell_stream(seed, u64::MAX);
    let k_hat = rules::check_bound(&rules.selection, window, GUARD_SAMPLES, &mut guard_rng);
    if !(k_hat <= rules::K_HAT_LIMIT) {
        return Err(EngineError::Misspecified(k_hat));
    }
    Ok(k_hat)
}

/// State of one replicate of the cell-division process in a window.
#[derive(Debug, Clone)]
pub struct Process {
    window: Polygon,
    rules: RulePair,
    seed: u64,
    clock: f64,
    queue: BinaryHeap<Queued>,
    segments: Vec<TimedSegment>,
    next_index: u64,
    redraws: u64,
    check_invariants: bool,
}

impl Process {
    /// One live cell, the window itself, dying at `Exp(1) / λ(W)`.
    pub fn new(window: Polygon, rules: RulePair, seed: u64) -> Result<Self, EngineError> {
        let mut p = Process {
            window: window.clone(),
            rules,
            seed,
            clock: 0.0,
            queue: BinaryHeap::new(),
            segments: Vec::new(),
            next_index: 0,
            redraws: 0,
            check_invariants: false,
        };
        p.spawn(window, 0.0)?;
        Ok(p)
    }

    /// Enables the tiling/containment check after every division.
    pub fn with_invariant_checks(mut self) -> Self {
        self.check_invariants = true;
        self
    }

    fn spawn(&mut self, polygon: Polygon, birth_time: f64) -> Result<(), EngineError> {
        let index = self.next_index;
        self.next_index += 1;
        let rate = self.rules.selection.rate(&polygon);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(EngineError::NonPositiveRate(rate));
        }
        let tau: f64 = rng::cell_stream(self.seed, index).sample(Exp1);
        self.queue.push(Queued(Cell {
            polygon,
            birth_time,
            death_time: birth_time + tau / rate,
            index,
            rate,
        }));
        Ok(())
    }

    pub fn window(&self) -> &Polygon {
        &self.window
    }

    pub fn rules(&self) -> &RulePair {
        &self.rules
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn segments(&self) -> &[TimedSegment] {
        &self.segments
    }

    pub fn division_count(&self) -> usize {
        self.segments.len()
    }

    /// Redraws spent on degenerate dividing lines so far.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    pub fn live_cells(&self) -> impl Iterator<Item = &Cell> {
        self.queue.iter().map(|q| &q.0)
    }

    pub fn cell_count(&self) -> usize {
        self.queue.len()
    }

    /// Earliest pending death time.
    pub fn next_event(&self) -> Option<f64> {
        self.queue.peek().map(|q| q.0.death_time)
    }

    /// Performs every division with death time `<= t`, then sets the clock.
    pub fn advance(&mut self, t: f64) -> Result<(), EngineError> {
        if !(t >= self.clock) {
            return Err(EngineError::TimeReversal {
                target: t,
                clock: self.clock,
            });
        }
        while self.queue.peek().is_some_and(|q| q.0.death_time <= t) {
            let Queued(cell) = self.queue.pop().expect("peeked");
            if self.segments.len() as u64 >= MAX_EVENTS {
                return Err(EngineError::EventCap);
            }
            let mut stream = rng::division_stream(self.seed, cell.index);
            let division = rules::divide_cell(&self.rules.division, &cell.polygon, &mut stream)
                .map_err(|source| EngineError::ReplicateAborted {
                    seed: self.seed,
                    cell: cell.index,
                    source,
                })?;
            self.redraws += division.redraws as u64;
            self.segments.push(TimedSegment {
                segment: division.trace,
                birth_time: cell.death_time,
            });
            self.spawn(division.plus, cell.death_time)?;
            self.spawn(division.minus, cell.death_time)?;
            if self.check_invariants {
                if let Err(msg) = self.verify_invariants() {
                    panic!("process invariant violated after division: {msg}");
                }
            }
        }
        self.clock = t;
        Ok(())
    }

    /// Checks tiling, segment containment and queue consistency.
    pub fn verify_invariants(&self) -> Result<(), String> {
        let area: f64 = self.live_cells().map(|c| c.polygon.area()).sum();
        let wa = self.window.area();
        if (area - wa).abs() > 1e-9 * wa {
            return Err(format!("cell areas sum to {area}, window area {wa}"));
        }
        let tol = 1e-9 * self.window.scale();
        for s in &self.segments {
            if !self.window.contains_point(s.segment.p, tol)
                || !self.window.contains_point(s.segment.q, tol)
            {
                return Err(format!("segment {:?} leaves the window", s.segment));
            }
        }
        for c in self.live_cells() {
            if c.death_time < self.clock {
                return Err(format!("cell {} overdue at clock {}", c.index, self.clock));
            }
            if c.death_time <= c.birth_time {
                return Err(format!("cell {} dies before birth", c.index));
            }
            let r = self.rules.selection.rate(&c.polygon);
            if (r - c.rate).abs() > 1e-10 * r.abs().max(1.0) {
                return Err(format!("cell {} rate drifted: {r} vs {}", c.index, c.rate));
            }
        }
        Ok(())
    }

    /// Segments present at time `t <= clock`.
    pub fn segments_at(&self, t: f64) -> impl Iterator<Item = &Segment> {
        self.segments
            .iter()
            .filter(move |s| s.birth_time <= t)
            .map(|s| &s.segment)
    }

    /// Current state as a tessellation of the full window.
    pub fn snapshot(&self) -> CroppedTessellation {
        crop_segments(self.segments.iter().map(|s| &s.segment), &self.window, self.clock)
    }

    /// `Y(W, clock) ∩ V`.
    pub fn crop(&self, v: &Polygon) -> Result<CroppedTessellation, GeometryError> {
        if !self.window.contains_polygon(v) {
            return Err(GeometryError::ContainmentViolation(
                "crop window is not inside the process window".into(),
            ));
        }
        Ok(crop_segments(
            self.segments.iter().map(|s| &s.segment),
            v,
            self.clock,
        ))
    }

    /// Advances through ascending `times`, cropping each state to `v`. All
    /// snapshots come from this one trajectory.
    pub fn snapshots_in(
        &mut self,
        times: &[f64],
        v: &Polygon,
    ) -> Result<Vec<CroppedTessellation>, EngineError> {
        if !self.window.contains_polygon(v) {
            return Err(GeometryError::ContainmentViolation(
                "crop window is not inside the process window".into(),
            )
            .into());
        }
        times
            .iter()
            .map(|&t| {
                self.advance(t)?;
                Ok(crop_segments(self.segments.iter().map(|s| &s.segment), v, t))
            })
            .collect()
    }

    pub fn snapshots(&mut self, times: &[f64]) -> Result<Vec<CroppedTessellation>, EngineError> {
        let w = self.window.clone();
        self.snapshots_in(times, &w)
    }
}
