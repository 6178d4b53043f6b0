//! Experiment configuration: a versioned JSON document, validated in full
//! before anything runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use celldiv::analysis::identities::Identity;
use celldiv::analysis::{default_probes, Probe};
use celldiv::geometry::{Point, Polygon};
use celldiv::measures::{DirectionalDistribution, DirectionsSpec, HyperplaneMeasure, MeasureSpec};
use celldiv::rules::{DivisionRule, RulePair, SelectionRule};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    pub rules: RulesConfig,
    pub simulate: Option<SimulateConfig>,
    pub consistency: Option<ConsistencyBlock>,
    pub verify: Option<VerifyConfig>,
    pub rate: Option<RateConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesConfig {
    pub selection: SelectionConfig,
    pub division: DivisionConfig,
}

/// A measure given by name from the `measures` table, or inline. Selection
/// and division naming the same table entry share one measure (STIT).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureRef {
    Named(String),
    Inline(MeasureSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionConfig {
    IntrinsicVolume { index: usize },
    VertexCount,
    HittingMeasure { measure: MeasureRef },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DivisionConfig {
    RestrictedMeasure { measure: MeasureRef },
    PointDriven { directions: DirectionsSpec },
}

pub type VertexList = Vec<[f64; 2]>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub window: VertexList,
    pub time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyBlock {
    pub inner: VertexList,
    pub outer: VertexList,
    pub times: Vec<f64>,
    pub n_reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Probe regions inside `inner`; the default 3×3 disk grid when absent.
    pub probes: Option<Vec<VertexList>>,
}

fn default_alpha() -> f64 {
    celldiv::analysis::consistency::NON_REJECTION_ALPHA
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub identities: Vec<Identity>,
    #[serde(default = "default_configs")]
    pub n_configs: usize,
}

fn default_configs() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub window: VertexList,
    pub probe: VertexList,
    pub dt: Vec<f64>,
    pub n_reps: usize,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if cfg.version != CONFIG_VERSION {
        return Err(CliError::Config(format!(
            "version: unsupported config version {} (expected {CONFIG_VERSION})",
            cfg.version
        )));
    }
    cfg.build_rules()?;
    Ok(cfg)
}

pub fn polygon(field: &str, v: &VertexList) -> Result<Polygon, CliError> {
    Polygon::new(v.iter().map(|&[x, y]| Point::new(x, y)).collect())
        .map_err(|e| CliError::Config(format!("{field}: {e}")))
}

fn block<'a, T>(name: &str, b: &'a Option<T>) -> Result<&'a T, CliError> {
    b.as_ref()
        .ok_or_else(|| CliError::Config(format!("{name}: block missing from config")))
}

impl ExperimentConfig {
    pub fn build_rules(&self) -> Result<RulePair, CliError> {
        let mut named: BTreeMap<&str, Arc<HyperplaneMeasure>> = BTreeMap::new();
        for (name, spec) in &self.measures {
            let m = HyperplaneMeasure::from_spec(spec)
                .map_err(|e| CliError::Config(format!("measures.{name}: {e}")))?;
            named.insert(name, Arc::new(m));
        }
        let resolve = |field: &str, r: &MeasureRef| -> Result<Arc<HyperplaneMeasure>, CliError> {
            match r {
                MeasureRef::Named(n) => named
                    .get(n.as_str())
                    .cloned()
                    .ok_or_else(|| CliError::Config(format!("{field}: unknown measure {n:?}"))),
                MeasureRef::Inline(spec) => HyperplaneMeasure::from_spec(spec)
                    .map(Arc::new)
                    .map_err(|e| CliError::Config(format!("{field}: {e}"))),
            }
        };
        let selection = match &self.rules.selection {
            SelectionConfig::IntrinsicVolume { index } => SelectionRule::intrinsic_volume(*index)
                .ok_or_else(|| {
                    CliError::Config(format!("rules.selection.index: {index} is not in 0..=2"))
                })?,
            SelectionConfig::VertexCount => SelectionRule::VertexCount,
            SelectionConfig::HittingMeasure { measure } => {
                SelectionRule::HittingMeasure(resolve("rules.selection.measure", measure)?)
            }
        };
        let division = match &self.rules.division {
            DivisionConfig::RestrictedMeasure { measure } => {
                DivisionRule::RestrictedMeasure(resolve("rules.division.measure", measure)?)
            }
            DivisionConfig::PointDriven { directions } => {
                let spec = MeasureSpec {
                    intensity: 1.0,
                    directions: directions.clone(),
                };
                let d: DirectionalDistribution = HyperplaneMeasure::from_spec(&spec)
                    .map_err(|e| CliError::Config(format!("rules.division.directions: {e}")))?
                    .directions()
                    .clone();
                DivisionRule::PointDriven(d)
            }
        };
        Ok(RulePair::new(selection, division))
    }

    /// The rules as recorded in output headers, with named measures inlined.
    pub fn rules_record(&self) -> serde_json::Value {
        serde_json::json!({
            "selection": self.rules.selection,
            "division": self.rules.division,
            "measures": self.measures,
        })
    }

    pub fn simulate(&self) -> Result<(Polygon, f64), CliError> {
        let b = block("simulate", &self.simulate)?;
        let w = polygon("simulate.window", &b.window)?;
        if !(b.time >= 0.0 && b.time.is_finite()) {
            return Err(CliError::Config(format!(
                "simulate.time: {} is not a finite non-negative time",
                b.time
            )));
        }
        Ok((w, b.time))
    }

    pub fn consistency(
        &self,
    ) -> Result<(&ConsistencyBlock, Polygon, Polygon, Vec<Probe>), CliError> {
        let b = block("consistency", &self.consistency)?;
        let inner = polygon("consistency.inner", &b.inner)?;
        let outer = polygon("consistency.outer", &b.outer)?;
        if !outer.contains_polygon(&inner) {
            return Err(CliError::Config(
                "consistency.inner: window is not contained in consistency.outer".into(),
            ));
        }
        let probes = match &b.probes {
            None => default_probes(&inner),
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, v)| polygon(&format!("consistency.probes[{i}]"), v).map(Probe::Region))
                .collect::<Result<_, _>>()?,
        };
        Ok((b, inner, outer, probes))
    }

    pub fn verify(&self) -> Result<&VerifyConfig, CliError> {
        let b = block("verify", &self.verify)?;
        if b.identities.is_empty() {
            return Err(CliError::Config(
                "verify.identities: empty list, nothing to verify".into(),
            ));
        }
        if b.n_configs == 0 {
            return Err(CliError::Config("verify.n_configs: must be positive".into()));
        }
        Ok(b)
    }

    pub fn rate(&self) -> Result<(&RateConfig, Polygon, Polygon), CliError> {
        let b = block("rate", &self.rate)?;
        let w = polygon("rate.window", &b.window)?;
        let p = polygon("rate.probe", &b.probe)?;
        if b.dt.is_empty() {
            return Err(CliError::Config("rate.dt: empty list".into()));
        }
        Ok((b, w, p))
    }
}
