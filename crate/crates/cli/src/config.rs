//! Declarative run configuration, loaded from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use triage_core::backend::{
    check_threshold, BaselineBackend, BaselineModel, ClassifierBackend, Hyperparameters, RemoteBackend, RemoteOptions,
    DEFAULT_THRESHOLD,
};
use triage_core::cascade::{Member, TierConfig, DEFAULT_BATCH_SIZE};
use triage_core::preprocess::{Pipeline, PipelineVariant, DEFAULT_TOKEN_BUDGET};
use triage_core::sampler::{T1_RATIO, T2_RATIO};
use triage_core::sectioner::{SectionSynonymTable, Sectioner};
use triage_core::Task;

use crate::CliError;

pub const ENDPOINT_ENV_T1: &str = "TRIAGE_REMOTE_ENDPOINT_T1";
pub const ENDPOINT_ENV_T2: &str = "TRIAGE_REMOTE_ENDPOINT_T2";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Used by randomized commands when `--seed` is absent.
    pub seed: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Extra header synonyms, one `raw = name` per line.
    pub section_synonyms: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub training: Hyperparameters,
    #[serde(default)]
    pub remote: RemoteConfig,
    #[serde(default)]
    pub tiers: TiersConfig,
}

fn default_workers() -> usize {
    4
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub train_fraction: f64,
    pub stratified: bool,
    pub t1_ratio: f64,
    pub t2_ratio: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            train_fraction: 0.8,
            stratified: true,
            t1_ratio: T1_RATIO,
            t2_ratio: T2_RATIO,
        }
    }
}

impl SamplerConfig {
    pub fn ratio(&self, task: Task) -> f64 {
        match task {
            Task::T1 => self.t1_ratio,
            Task::T2 => self.t2_ratio,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub timeout_ms: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        let d = RemoteOptions::default();
        RemoteConfig {
            timeout_ms: d.timeout.as_millis() as u64,
            retries: d.retries,
            retry_backoff_ms: d.retry_backoff.as_millis() as u64,
        }
    }
}

impl RemoteConfig {
    fn options(&self) -> RemoteOptions {
        RemoteOptions {
            timeout: Duration::from_millis(self.timeout_ms),
            retries: self.retries,
            retry_backoff: Duration::from_millis(self.retry_backoff_ms),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiersConfig {
    pub t1: Option<TierSpec>,
    pub t2: Option<TierSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSpec {
    pub members: Vec<MemberSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Baseline,
    Remote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub backend_id: String,
    pub variant: PipelineVariant,
    pub kind: MemberKind,
    /// Baseline model file; defaults to `{out}/models/{tier}_{A|B}.bin`.
    pub model: Option<PathBuf>,
    /// Remote endpoint; the tier's environment variable takes precedence.
    pub endpoint: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_budget")]
    pub token_budget: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_budget() -> usize {
    DEFAULT_TOKEN_BUDGET
}

pub fn default_model_path(out_dir: &Path, task: Task, variant: PipelineVariant) -> PathBuf {
    out_dir.join("models").join(format!("{task}_{}.bin", variant.short()))
}

fn default_tier(task: Task) -> TierSpec {
    TierSpec {
        members: PipelineVariant::ALL
            .iter()
            .map(|&variant| MemberSpec {
                backend_id: format!("{task}-baseline-{}", variant.short()),
                variant,
                kind: MemberKind::Baseline,
                model: None,
                endpoint: None,
                threshold: DEFAULT_THRESHOLD,
                token_budget: DEFAULT_TOKEN_BUDGET,
            })
            .collect(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 || self.batch_size == 0 {
            return Err(CliError::validation("workers and batch_size must be positive"));
        }
        for (name, r) in [("t1_ratio", self.sampler.t1_ratio), ("t2_ratio", self.sampler.t2_ratio)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::validation(format!(
                    "sampler.{name} must be positive, got {r}"
                )));
            }
        }
        self.training.validate()?;
        for task in [Task::T1, Task::T2] {
            let tier = self.tier(task);
            if tier.members.len() != 2 {
                return Err(CliError::validation(format!(
                    "tiers.{task} must have exactly two members, found {}",
                    tier.members.len()
                )));
            }
            for m in &tier.members {
                check_threshold(m.threshold)?;
                if m.token_budget == 0 {
                    return Err(CliError::validation(format!(
                        "{}: token_budget must be positive",
                        m.backend_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn tier(&self, task: Task) -> TierSpec {
        let spec = match task {
            Task::T1 => &self.tiers.t1,
            Task::T2 => &self.tiers.t2,
        };
        spec.clone().unwrap_or_else(|| default_tier(task))
    }

    pub fn sectioner(&self) -> Result<Sectioner, CliError> {
        let table = match &self.section_synonyms {
            Some(path) => SectionSynonymTable::from_config_file(path)?,
            None => SectionSynonymTable::default(),
        };
        Ok(Sectioner::new(table))
    }

    /// Member of `task` using `variant`, if configured.
    pub fn member(&self, task: Task, variant: PipelineVariant) -> Option<MemberSpec> {
        self.tier(task).members.into_iter().find(|m| m.variant == variant)
    }

    pub fn model_path(&self, out_dir: &Path, task: Task, member: &MemberSpec) -> PathBuf {
        member
            .model
            .clone()
            .unwrap_or_else(|| default_model_path(out_dir, task, member.variant))
    }

    /// Instantiates both members of a tier. Model files must exist.
    pub fn build_tier(&self, task: Task, out_dir: &Path) -> Result<TierConfig, CliError> {
        let members: Vec<Member> = self
            .tier(task)
            .members
            .iter()
            .map(|m| self.build_member(task, m, out_dir))
            .collect::<Result<_, _>>()?;
        let [a, b]: [Member; 2] = members
            .try_into()
            .map_err(|_| CliError::validation(format!("tiers.{task} must have exactly two members")))?;
        Ok(TierConfig::new(task, a, b)?.with_batching(self.batch_size, self.workers))
    }

    fn build_member(&self, task: Task, m: &MemberSpec, out_dir: &Path) -> Result<Member, CliError> {
        let backend: Arc<dyn ClassifierBackend> = match m.kind {
            MemberKind::Baseline => {
                let path = self.model_path(out_dir, task, m);
                if !path.exists() {
                    return Err(CliError::validation(format!(
                        "{}: model file {} does not exist (run train-baseline first)",
                        m.backend_id,
                        path.display()
                    )));
                }
                let model = BaselineModel::load(&path)?;
                Arc::new(BaselineBackend::new(m.backend_id.clone(), Arc::new(model)))
            }
            MemberKind::Remote => {
                let var = match task {
                    Task::T1 => ENDPOINT_ENV_T1,
                    Task::T2 => ENDPOINT_ENV_T2,
                };
                let endpoint = std::env::var(var)
                    .ok()
                    .filter(|v| !v.is_empty())
                    .or_else(|| m.endpoint.clone())
                    .ok_or_else(|| {
                        CliError::validation(format!("{}: no endpoint configured and {var} is unset", m.backend_id))
                    })?;
                let remote = RemoteBackend::new(m.backend_id.clone(), endpoint, self.remote.options())
                    .map_err(|e| CliError::runtime(format!("{}: {e}", m.backend_id)))?;
                Arc::new(remote)
            }
        };
        let pipeline = Pipeline::new(m.variant).with_budget(m.token_budget);
        Ok(Member::new(backend, pipeline, m.threshold))
    }
}
