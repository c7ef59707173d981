//! Run summary: effective config, per-stage wall time, external tool
//! command lines, written outputs, results and the error category.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use turntable_core::numfmt::to_stable_json;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

/// Pipeline stage a step belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Train,
    PcdReconstruction,
    Evaluation,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub step: String,
    /// `None` for work done outside this tool.
    pub wall_seconds: Option<f64>,
    pub external: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInvocation {
    pub tool: String,
    pub argv: Vec<String>,
    pub exit_status: Option<i32>,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
struct ErrorReport {
    category: &'static str,
    exit_code: i32,
    message: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'a str,
    argv: &'a [String],
    status: &'static str,
    config: &'a PipelineConfig,
    stages: &'a [StageTiming],
    tool_invocations: &'a [ToolInvocation],
    outputs: &'a [PathBuf],
    results: &'a Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorReport>,
}

/// Collects everything the summary reports while a command runs.
#[derive(Debug)]
pub struct Run {
    pub command: String,
    pub argv: Vec<String>,
    pub config: PipelineConfig,
    pub force: bool,
    stages: Vec<StageTiming>,
    tools: Vec<ToolInvocation>,
    outputs: Vec<PathBuf>,
    results: Map<String, Value>,
}

impl Run {
    pub fn new(command: &str, argv: Vec<String>, config: PipelineConfig, force: bool) -> Self {
        Run {
            command: command.into(),
            argv,
            config,
            force,
            stages: Vec::new(),
            tools: Vec::new(),
            outputs: Vec::new(),
            results: Map::new(),
        }
    }

    /// Runs `f` and records its wall time under `stage`, also on failure.
    pub fn step<T>(
        &mut self,
        stage: Stage,
        step: &str,
        f: impl FnOnce(&mut Self) -> CliResult<T>,
    ) -> CliResult<T> {
        log::info!("{step}: start");
        let t0 = Instant::now();
        let out = f(self);
        let secs = t0.elapsed().as_secs_f64();
        log::info!("{step}: {:.3} s", secs);
        self.stages.push(StageTiming {
            stage,
            step: step.into(),
            wall_seconds: Some(secs),
            external: false,
            note: None,
        });
        out
    }

    /// Records a stage performed by another program.
    pub fn external(&mut self, stage: Stage, step: &str, note: &str) {
        self.stages.push(StageTiming {
            stage,
            step: step.into(),
            wall_seconds: None,
            external: true,
            note: Some(note.into()),
        });
    }

    pub fn tool(&mut self, inv: ToolInvocation) {
        self.tools.push(inv);
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("result values serialize");
        self.results.insert(key.into(), v);
    }

    /// Fails with `OutputExists` unless `path` is absent or `--force` was given.
    pub fn claim(&self, path: &Path) -> CliResult<()> {
        if path.exists() && !self.force {
            return Err(CliError::OutputExists(path.to_path_buf()));
        }
        Ok(())
    }

    pub fn wrote(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn to_json(&self, error: Option<&CliError>) -> String {
        let summary = Summary {
            command: &self.command,
            argv: &self.argv,
            status: if error.is_some() { "error" } else { "ok" },
            config: &self.config,
            stages: &self.stages,
            tool_invocations: &self.tools,
            outputs: &self.outputs,
            results: &self.results,
            error: error.map(|e| ErrorReport {
                category: e.category(),
                exit_code: e.exit_code(),
                message: e.to_string(),
            }),
        };
        to_stable_json(&summary).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_failed_steps_and_errors() {
        let mut run = Run::new(
            "sor",
            vec!["turntable".into()],
            PipelineConfig::default(),
            false,
        );
        let r: CliResult<()> = run.step(Stage::PcdReconstruction, "sor", |_| {
            Err(CliError::Numeric("x".into()))
        });
        let e = r.unwrap_err();
        run.external(Stage::Train, "train", "elsewhere");
        let v: Value = serde_json::from_str(&run.to_json(Some(&e))).unwrap();
        assert_eq!(v["status"], "error");
        assert_eq!(v["error"]["exit_code"], 7);
        assert_eq!(v["error"]["category"], "numeric");
        assert_eq!(v["stages"][0]["stage"], "pcd_reconstruction");
        assert!(v["stages"][0]["wall_seconds"].is_f64());
        assert!(v["stages"][1]["wall_seconds"].is_null());
        assert_eq!(v["stages"][1]["external"], true);
        assert_eq!(v["config"]["sfm"]["mapper_threads"], 64);
    }

    #[test]
    fn claim_respects_force() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        let run = Run::new("x", vec![], PipelineConfig::default(), false);
        assert!(matches!(
            run.claim(tmp.path()),
            Err(CliError::OutputExists(_))
        ));
        let forced = Run::new("x", vec![], PipelineConfig::default(), true);
        assert!(forced.claim(tmp.path()).is_ok());
    }
}
