//! Experiment configuration: one JSON document plus `--set key=value`
//! overrides addressed by dotted paths.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use maml_lqr::engine::{BetaRule, EtaSchedule, StepSizeConfig};
use maml_lqr::tasks::{self, FamilySpec};
use maml_lqr::{InitStateModel, Mat, Policy, TaskSet};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPolicy {
    pub label: String,
    #[serde(with = "maml_lqr::tasks::rows")]
    pub w0: Policy,
    /// Per-run replacement for the shared inner step-size schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub task_file: Option<PathBuf>,
    /// Inline family; the default is the two-state example family at `seed`.
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default, with = "opt_rows")]
    pub sigma0: Option<Mat>,
    pub initial_policies: Vec<InitialPolicy>,
    pub step: StepSizeConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_seed() -> u64 {
    7
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_max_iters() -> usize {
    50
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

mod opt_rows {
    use maml_lqr::tasks::{from_rows, to_rows};
    use maml_lqr::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|rows| from_rows(&rows).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl ExperimentConfig {
    /// Four starts around the example family's optimum; the last starts
    /// closest to the stability boundary and ramps the inner step size.
    pub fn paper_default() -> Self {
        let start = |label: &str, w: [f64; 2], eta: EtaSchedule| InitialPolicy {
            label: label.into(),
            w0: Mat::from_row_slice(1, 2, &w),
            eta: Some(eta),
            beta: None,
        };
        ExperimentConfig {
            seed: default_seed(),
            task_file: None,
            family: None,
            sigma0: None,
            initial_policies: vec![
                start("W0_1", [1.0, -3.0], EtaSchedule::Constant { eta: 2e-5 }),
                start("W0_2", [1.75, -1.75], EtaSchedule::Constant { eta: 5e-5 }),
                start("W0_3", [2.0, -1.5], EtaSchedule::Constant { eta: 5e-5 }),
                start("W0_4", [1.2, -1.8], EtaSchedule::ramp(5e-5, 1e-4, 50)),
            ],
            step: StepSizeConfig::constant(5e-5, 4e-6),
            epsilon: default_epsilon(),
            max_iters: default_max_iters(),
            out: default_out(),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Value> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| anyhow!(UsageError(format!("config {}: {e}", path.display()))))
    }

    pub fn from_value(value: Value) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| anyhow!(UsageError(format!("invalid config: {e}"))))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.initial_policies.is_empty() {
            bail!(UsageError("config lists no initial policies".into()));
        }
        if !(self.epsilon > 0.0) {
            bail!(UsageError(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            bail!(UsageError("max_iters must be at least 1".into()));
        }
        self.step
            .validate()
            .map_err(|e| anyhow!(UsageError(e.to_string())))?;
        for p in &self.initial_policies {
            let mut cfg = self.step.clone();
            if let Some(eta) = &p.eta {
                cfg.eta = eta.clone();
            }
            if let Some(beta) = &p.beta {
                cfg.beta = beta.clone();
            }
            cfg.validate()
                .map_err(|e| anyhow!(UsageError(format!("{}: {e}", p.label))))?;
        }
        Ok(())
    }

    pub fn step_for(&self, policy: &InitialPolicy) -> StepSizeConfig {
        let mut cfg = self.step.clone();
        if let Some(eta) = &policy.eta {
            cfg.eta = eta.clone();
        }
        if let Some(beta) = &policy.beta {
            cfg.beta = beta.clone();
        }
        cfg
    }

    pub fn init_model(&self, n: usize) -> anyhow::Result<InitStateModel> {
        match &self.sigma0 {
            None => Ok(InitStateModel::identity(n)),
            Some(s) => InitStateModel::new(s.clone()).map_err(|e| anyhow!(UsageError(e.to_string()))),
        }
    }

    pub fn tasks(&self) -> anyhow::Result<TaskSet> {
        if let Some(path) = &self.task_file {
            return load_tasks(path);
        }
        let spec = self
            .family
            .clone()
            .unwrap_or_else(|| FamilySpec::paper(self.seed));
        Ok(tasks::generate(&spec)?.tasks)
    }
}

pub fn load_tasks(path: &Path) -> anyhow::Result<TaskSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading task file {}", path.display()))?;
    tasks::from_json(&text)
        .map(|(t, _)| t)
        .map_err(|e| anyhow!(UsageError(format!("{}: {e}", path.display()))))
}

/// Applies `key=value`; the value is parsed as JSON and falls back to a
/// string. Numeric path segments index arrays.
pub fn apply_override(doc: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!(UsageError(format!("--set expects key=value, got `{assignment}`"))))?;
    if key.is_empty() {
        bail!(UsageError("--set with empty key".into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    anyhow!(UsageError(format!("`{key}`: `{seg}` is not an array index")))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    anyhow!(UsageError(format!("`{key}`: index {idx} out of range ({len})")))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => bail!(UsageError(format!("`{key}`: `{seg}` is not inside an object or array"))),
        };
    }
    Ok(())
}
