//! Translation-invariant line measures `Λ = intensity · φ(dθ) ⊗ da` on the
//! plane, their hitting masses `Λ([C])` and exact samplers for the restricted
//! laws `Λ_[C] = Λ(· ∩ [C]) / Λ([C])`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Hyperplane, Point, Polygon};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasureError {
    #[error("intensity must be positive and finite, got {0}")]
    Intensity(f64),
    #[error("directional atoms: {0}")]
    Atoms(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Law of the normal direction on `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionalDistribution {
    /// Uniform density `1/π`.
    Isotropic,
    /// Finite mixture of directions; weights sum to one.
    Atoms(Vec<(f64, f64)>),
}

impl DirectionalDistribution {
    /// Builds a discrete directional law. Weights are normalized if they sum
    /// to one within `1e-12`; at least two distinct angles are required so
    /// lines are not all parallel.
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        if atoms.iter().any(|&(t, _)| !(0.0..PI).contains(&t)) {
            return Err(MeasureError::Atoms("angles must lie in [0, pi)".into()));
        }
        if atoms.iter().any(|&(_, w)| !(w > 0.0 && w.is_finite())) {
            return Err(MeasureError::Atoms("weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::Atoms(format!("weights sum to {total}, not 1")));
        }
        let first = atoms.first().map(|a| a.0);
        if !atoms.iter().any(|&(t, _)| Some(t) != first) {
            return Err(MeasureError::Atoms(
                "need at least two distinct directions".into(),
            ));
        }
        Ok(DirectionalDistribution::Atoms(atoms))
    }

    /// `½δ₀ + ½δ_{π/2}`.
    pub fn axis_aligned() -> Self {
        DirectionalDistribution::Atoms(vec![(0.0, 0.5), (PI / 2.0, 0.5)])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DirectionalDistribution::Isotropic => rng.random::<f64>() * PI,
            DirectionalDistribution::Atoms(atoms) => {
                let mut u = rng.random::<f64>();
                for &(t, w) in atoms {
                    if u < w {
                        return t;
                    }
                    u -= w;
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// `∫ f(θ) φ(dθ)` for a function whose integral against the uniform law
    /// is supplied by `isotropic`.
    fn integrate(&self, f: impl Fn(f64) -> f64, isotropic: impl FnOnce() -> f64) -> f64 {
        match self {
            DirectionalDistribution::Isotropic => isotropic(),
            DirectionalDistribution::Atoms(atoms) => atoms.iter().map(|&(t, w)| w * f(t)).sum(),
        }
    }
}

/// Serialized form used in experiment configs:
/// `{"intensity": 1.0, "directions": "isotropic" | [[theta, weight], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub intensity: f64,
    pub directions: DirectionsSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionsSpec {
    Named(String),
    Atoms(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneMeasure {
    intensity: f64,
    directions: DirectionalDistribution,
}

impl HyperplaneMeasure {
    pub fn new(intensity: f64, directions: DirectionalDistribution) -> Result<Self, MeasureError> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(MeasureError::Intensity(intensity));
        }
        Ok(HyperplaneMeasure {
            intensity,
            directions,
        })
    }

    pub fn isotropic(intensity: f64) -> Result<Self, MeasureError> {
        Self::new(intensity, DirectionalDistribution::Isotropic)
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self, MeasureError> {
        let directions = match &spec.directions {
            DirectionsSpec::Named(name) if name == "isotropic" => DirectionalDistribution::Isotropic,
            DirectionsSpec::Named(name) => {
                return Err(MeasureError::Atoms(format!(
                    "unknown direction family {name:?}"
                )))
            }
            DirectionsSpec::Atoms(atoms) => DirectionalDistribution::atoms(atoms.clone())?,
        };
        Self::new(spec.intensity, directions)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            intensity: self.intensity,
            directions: match &self.directions {
                DirectionalDistribution::Isotropic => DirectionsSpec::Named("isotropic".into()),
                DirectionalDistribution::Atoms(a) => DirectionsSpec::Atoms(a.clone()),
            },
        }
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn directions(&self) -> &DirectionalDistribution {
        &self.directions
    }

    /// `Λ([C]) = intensity · ∫ width(C, θ) φ(dθ)`; the isotropic case uses
    /// the Cauchy formula `perimeter / π`.
    pub fn hitting_mass(&self, c: &Polygon) -> f64 {
        self.intensity
            * self
                .directions
                .integrate(|t| c.width(t), || c.perimeter() / PI)
    }

    /// `Λ([A] ∩ [B])`: mass of lines meeting both `a` and `b`.
    pub fn joint_hitting_mass(&self, a: &Polygon, b: &Polygon) -> f64 {
        let overlap = |t: f64| {
            let (alo, ahi) = a.offset_interval(t);
            let (blo, bhi) = b.offset_interval(t);
            (ahi.min(bhi) - alo.max(blo)).max(0.0)
        };
        self.intensity
            * self
                .directions
                .integrate(overlap, || joint_width_integral(a, b) / PI)
    }

    /// Draws a line from `Λ_[C]`: direction with density proportional to
    /// `width(C, θ) φ(dθ)`, then a uniform offset over the hitting interval.
    pub fn sample_hitting<R: Rng + ?Sized>(&self, c: &Polygon, rng: &mut R) -> Hyperplane {
        let theta = match &self.directions {
            DirectionalDistribution::Isotropic => {
                let envelope = c.diameter();
                loop {
                    let t = rng.random::<f64>() * PI;
                    if rng.random::<f64>() * envelope < c.width(t) {
                        break t;
                    }
                }
            }
            DirectionalDistribution::Atoms(atoms) => {
                let weights: Vec<f64> = atoms.iter().map(|&(t, w)| w * c.width(t)).collect();
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = atoms.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = i;
                        break;
                    }
                    u -= w;
                }
                atoms[pick].0
            }
        };
        let (lo, hi) = c.offset_interval(theta);
        let a = lo + rng.random::<f64>() * (hi - lo);
        Hyperplane::new(theta, a).expect("angle in [0, pi) and finite offset")
    }
}

/// `∫₀^π |[lo_A, hi_A] ∩ [lo_B, hi_B]| dθ`, integrated exactly.
///
/// Between consecutive edge-normal angles every support value is `<v, u(θ)>`
/// for a fixed vertex `v`, so the integrand is a min/max of sinusoids. Split
/// further at every crossing of those sinusoids and integrate each smooth
/// piece in closed form.
pub fn joint_width_integral(a: &Polygon, b: &Polygon) -> f64 {
    let mut breaks = vec![0.0, PI];
    for poly in [a, b] {
        for (p, q) in poly.edges() {
            let e = q - p;
            // Edge normal directions, folded into [0, π).
            let t = (-e.x).atan2(e.y).rem_euclid(PI);
            breaks.push(t);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let extreme = |poly: &Polygon, t: f64, max: bool| -> Point {
        let u = Point::unit(t);
        let key = |p: &&Point| p.dot(u);
        let it = poly.vertices().iter();
        *if max {
            it.max_by(|x, y| key(x).total_cmp(&key(y)))
        } else {
            it.min_by(|x, y| key(x).total_cmp(&key(y)))
        }
        .expect("nonempty polygon")
    };

    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= 0.0 {
            continue;
        }
        let mid = 0.5 * (t0 + t1);
        let tops = [extreme(a, mid, true), extreme(b, mid, true)];
        let bots = [extreme(a, mid, false), extreme(b, mid, false)];

        let mut sub = vec![t0, t1];
        let mut diffs = vec![tops[0] - tops[1], bots[0] - bots[1]];
        for top in tops {
            for bot in bots {
                diffs.push(top - bot);
            }
        }
        for d in diffs {
            // Roots of <d, u(θ)> = 0 are θ = atan2(d.x, -d.y) mod π.
            if d.x == 0.0 && d.y == 0.0 {
                continue;
            }
            let r = d.x.atan2(-d.y).rem_euclid(PI);
            if r > t0 && r < t1 {
                sub.push(r);
            }
        }
        sub.sort_by(f64::total_cmp);
        for s in sub.windows(2) {
            let (s0, s1) = (s[0], s[1]);
            if s1 - s0 <= 0.0 {
                continue;
            }
            let u = Point::unit(0.5 * (s0 + s1));
            let top = if tops[0].dot(u) <= tops[1].dot(u) { tops[0] } else { tops[1] };
            let bot = if bots[0].dot(u) >= bots[1].dot(u) { bots[0] } else { bots[1] };
            let d = top - bot;
            if d.dot(u) <= 0.0 {
                continue;
            }
            // ∫ <d, u(θ)> dθ = d.x (sin s1 − sin s0) − d.y (cos s1 − cos s0)
            total += d.x * (s1.sin() - s0.sin()) - d.y * (s1.cos() - s0.cos());
        }
    }
    total
}

/// A measure together with a window and the cached `Λ([window])`.
#[derive(Debug, Clone)]
pub struct MeasureOnWindow {
    base: Arc<HyperplaneMeasure>,
    window: Polygon,
    total: f64,
}

impl MeasureOnWindow {
    pub fn new(base: Arc<HyperplaneMeasure>, window: Polygon) -> Self {
        let total = base.hitting_mass(&window);
        MeasureOnWindow {
            base,
            window,
            total,
        }
    }

    pub fn base(&self) -> &Arc<HyperplaneMeasure> {
        &self.base
    }

    pub fn window(&self) -> &Polygon {
        &self.window
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `Λ_[W]([B]) = Λ([B]) / Λ([W])` for convex `B ⊂ W`.
    pub fn hitting_prob(&self, b: &Polygon) -> Result<f64, GeometryError> {
        if !self.window.contains_polygon(b) {
            return Err(GeometryError::ContainmentViolation(
                "probe set is not inside the window".into(),
            ));
        }
        Ok((self.base.hitting_mass(b) / self.total).clamp(0.0, 1.0))
    }
}
