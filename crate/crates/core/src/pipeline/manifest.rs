use serde::{Deserialize, Serialize};

use super::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// `ok`, or the error message of the stage that stopped the run.
    pub status: String,
}

/// Everything needed to rerun a command exactly. Carries no timestamps or
/// absolute output paths so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub stages: Vec<StageRecord>,
    pub exit_code: i32,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            tool: "ancestral".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn stage_ok(&mut self, stage: &str) {
        self.stages.push(StageRecord {
            stage: stage.into(),
            status: "ok".into(),
        });
    }

    pub fn stage_failed(&mut self, stage: &str, message: &str) {
        self.stages.push(StageRecord {
            stage: stage.into(),
            status: message.into(),
        });
    }
}
