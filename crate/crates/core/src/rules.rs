//! Selection rules (cell life-time rates) and division rules (laws of the
//! dividing line), and the empirical check of the split-rate bound
//! `λ(C ∩ h±) ≤ k_C λ(C)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::geometry::{GeometryError, Hyperplane, Polygon};
use crate::measures::{DirectionalDistribution, HyperplaneMeasure};

/// Maximum number of redraws of a dividing line after degenerate splits.
pub const MAX_SPLIT_ATTEMPTS: usize = 100;

/// Sampled `k_C` above this marks a rule as mis-specified.
pub const K_HAT_LIMIT: f64 = 1e3;

#[derive(Debug, Clone)]
pub enum SelectionRule {
    /// `i`-th intrinsic volume, `i ∈ {0, 1, 2}`.
    IntrinsicVolume(usize),
    VertexCount,
    /// `λ(C) = Λ*([C])`.
    HittingMeasure(Arc<HyperplaneMeasure>),
}

impl SelectionRule {
    pub fn intrinsic_volume(index: usize) -> Option<Self> {
        (index <= 2).then_some(SelectionRule::IntrinsicVolume(index))
    }

    pub fn rate(&self, c: &Polygon) -> f64 {
        match self {
            SelectionRule::IntrinsicVolume(i) => c.intrinsic_volumes()[*i],
            SelectionRule::VertexCount => c.vertex_count() as f64,
            SelectionRule::HittingMeasure(m) => m.hitting_mass(c),
        }
    }

    /// Whether sub-polygons never have a larger rate.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, SelectionRule::VertexCount)
    }

    pub fn name(&self) -> String {
        match self {
            SelectionRule::IntrinsicVolume(i) => format!("intrinsic_volume({i})"),
            SelectionRule::VertexCount => "vertex_count".into(),
            SelectionRule::HittingMeasure(_) => "hitting_measure".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DivisionRule {
    /// `Λ_[C] = Λ(· ∩ [C]) / Λ([C])`.
    RestrictedMeasure(Arc<HyperplaneMeasure>),
    /// Uniform point in `C`, then a line through it with the given
    /// directional law.
    PointDriven(DirectionalDistribution),
}

impl DivisionRule {
    /// Draws a dividing line for `c`. May return a line that touches `c`
    /// only at its boundary with probability zero.
    pub fn divide<R: Rng + ?Sized>(&self, c: &Polygon, rng: &mut R) -> Hyperplane {
        match self {
            DivisionRule::RestrictedMeasure(m) => m.sample_hitting(c, rng),
            DivisionRule::PointDriven(dirs) => {
                let x = c.sample_uniform_point(rng);
                let theta = dirs.sample(rng);
                Hyperplane::through(theta, x).expect("finite point and angle in range")
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            DivisionRule::RestrictedMeasure(_) => "restricted_measure".into(),
            DivisionRule::PointDriven(_) => "point_driven".into(),
        }
    }
}

/// Outcome of dividing a cell: both pieces, the chord and the number of
/// redraws spent on degenerate lines.
#[derive(Debug, Clone)]
pub struct Division {
    pub line: Hyperplane,
    pub plus: Polygon,
    pub minus: Polygon,
    pub trace: crate::geometry::Segment,
    pub redraws: usize,
}

/// Draws dividing lines until one splits `c` into two proper pieces.
pub fn divide_cell<R: Rng + ?Sized>(
    rule: &DivisionRule,
    c: &Polygon,
    rng: &mut R,
) -> Result<Division, GeometryError> {
    let mut last = GeometryError::DegenerateSplit { fraction: 0.0 };
    for redraws in 0..MAX_SPLIT_ATTEMPTS {
        let line = rule.divide(c, rng);
        match c.split(&line) {
            Ok(s) => {
                if let (Some(plus), Some(minus), Some(trace)) = (s.plus, s.minus, s.trace) {
                    return Ok(Division {
                        line,
                        plus,
                        minus,
                        trace,
                        redraws,
                    });
                }
            }
            Err(e @ GeometryError::DegenerateSplit { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[derive(Debug, Clone)]
pub struct RulePair {
    pub selection: SelectionRule,
    pub division: DivisionRule,
    stit: bool,
}

impl RulePair {
    pub fn new(selection: SelectionRule, division: DivisionRule) -> Self {
        let stit = match (&selection, &division) {
            (SelectionRule::HittingMeasure(a), DivisionRule::RestrictedMeasure(b)) => {
                Arc::ptr_eq(a, b)
            }
            _ => false,
        };
        RulePair {
            selection,
            division,
            stit,
        }
    }

    /// STIT rules: one shared measure drives both selection and division.
    pub fn stit(measure: Arc<HyperplaneMeasure>) -> Self {
        Self::new(
            SelectionRule::HittingMeasure(measure.clone()),
            DivisionRule::RestrictedMeasure(measure),
        )
    }

    /// True iff selection and division use the identical measure object.
    pub fn is_stit(&self) -> bool {
        self.stit
    }

    pub fn describe(&self) -> String {
        format!(
            "selection={} division={}{}",
            self.selection.name(),
            self.division.name(),
            if self.stit { " (stit)" } else { "" }
        )
    }
}

/// Estimates `k_C` from `n_samples` isotropic chords of `c`: the largest
/// ratio `rate(piece) / rate(c)` over both pieces.
pub fn check_bound<R: Rng + ?Sized>(
    rule: &SelectionRule,
    c: &Polygon,
    n_samples: usize,
    rng: &mut R,
) -> f64 {
    assert!(n_samples >= 1, "check_bound needs at least one sample");
    let reference = HyperplaneMeasure::isotropic(1.0).expect("unit intensity");
    let base = rule.rate(c);
    let mut k_hat = 0.0f64;
    let mut taken = 0;
    while taken < n_samples {
        let h = reference.sample_hitting(c, rng);
        let Ok(split) = c.split(&h) else { continue };
        taken += 1;
        for piece in [split.plus, split.minus].into_iter().flatten() {
            k_hat = k_hat.max(rule.rate(&piece) / base);
        }
    }
    k_hat
}

/// Bound `check_bound` must respect: 1 for monotone rules, `(n+2)/n` for
/// vertex counts.
pub fn k_bound(rule: &SelectionRule, c: &Polygon) -> f64 {
    match rule {
        SelectionRule::VertexCount => {
            let n = c.vertex_count() as f64;
            (n + 2.0) / n
        }
        _ => 1.0,
    }
}

/// Probability that a line drawn by `rule` for cell `c` meets convex `b ⊂ c`.
///
/// Restricted measures: `Λ([B]) / Λ([C])`. Point-driven: for each direction
/// the offset of the line through a uniform point has density
/// `chord_C(θ, a) / area(C)`, and `chord_C` is piecewise linear in `a` with
/// breaks at vertex projections, so the inner integral is exact; the outer
/// direction integral is exact for atoms and Gauss–Legendre for isotropic.
pub fn division_hit_prob(rule: &DivisionRule, c: &Polygon, b: &Polygon) -> f64 {
    match rule {
        DivisionRule::RestrictedMeasure(m) => m.joint_hitting_mass(b, c) / m.hitting_mass(c),
        DivisionRule::PointDriven(dirs) => {
            let f = |t: f64| offset_mass_through_uniform_point(c, b, t);
            match dirs {
                DirectionalDistribution::Atoms(atoms) => atoms.iter().map(|&(t, w)| w * f(t)).sum(),
                DirectionalDistribution::Isotropic => gauss_legendre(&f, 0.0, PI, 2048) / PI,
            }
        }
    }
}

/// `P(line through a uniform point of c at angle θ meets b)`.
fn offset_mass_through_uniform_point(c: &Polygon, b: &Polygon, theta: f64) -> f64 {
    let (clo, chi) = c.offset_interval(theta);
    let (blo, bhi) = b.offset_interval(theta);
    let (lo, hi) = (clo.max(blo), chi.min(bhi));
    if hi <= lo {
        return 0.0;
    }
    let u = crate::geometry::Point::unit(theta);
    let mut knots: Vec<f64> = c
        .vertices()
        .iter()
        .map(|v| v.dot(u))
        .filter(|&a| a > lo && a < hi)
        .collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    let integral: f64 = knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (chord_length(c, theta, w[0]) + chord_length(c, theta, w[1])))
        .sum();
    integral / c.area()
}

/// Length of `c ∩ {x : <x, u(θ)> = a}`.
pub fn chord_length(c: &Polygon, theta: f64, a: f64) -> f64 {
    let u = crate::geometry::Point::unit(theta);
    let mut pts = Vec::with_capacity(2);
    for (p, q) in c.edges() {
        let (dp, dq) = (p.dot(u) - a, q.dot(u) - a);
        if (dp >= 0.0 && dq < 0.0) || (dp < 0.0 && dq >= 0.0) {
            pts.push(p + (q - p) * (dp / (dp - dq)));
        }
    }
    match pts.as_slice() {
        [x, y] => x.dist(*y),
        _ => 0.0,
    }
}

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    // 5-point rule per panel.
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}
