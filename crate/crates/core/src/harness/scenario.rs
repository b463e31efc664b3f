use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{AgentTask, TaskType};
use crate::env::{DriftFault, Environment, FaultKind, GroundTruth, Surface};
use crate::spec::{parse_spec, Specification};
use crate::toolkit::{available_paths, ToolRegistry};

/// Corrections to the oracle for faults it cannot attribute on its own.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faulty_component: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_cause: Option<FaultKind>,
}

/// On-disk scenario description. Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub spec_path: PathBuf,
    pub seed: u64,
    pub task_type: TaskType,
    /// Observation surfaces the environment answers on.
    pub surfaces: Vec<Surface>,
    /// Declared upper bound on the diagnostic tools available per property.
    pub surfaces_per_property: usize,
    #[serde(default)]
    pub faults: Vec<DriftFault>,
    /// Other accepted names for the faulty component.
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_overrides: Option<GroundTruthOverrides>,
    /// Scripted-backend rules for this scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub path: PathBuf,
    pub spec: Specification,
    pub spec_text: String,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_file(file, path)
    }

    pub fn from_file(file: ScenarioFile, path: &Path) -> Result<Self, HarnessError> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let spec_path = dir.join(&file.spec_path);
        let spec_text = std::fs::read_to_string(&spec_path).map_err(|e| HarnessError::io(&spec_path, e))?;
        let spec = parse_spec(&spec_text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", spec_path.display())))?;
        let s = Self { file, path: path.to_path_buf(), spec, spec_text };
        s.environment(s.file.seed)?;
        Ok(s)
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn script_path(&self) -> Option<PathBuf> {
        let dir = self.path.parent().unwrap_or(Path::new("."));
        self.file.script.as_ref().map(|p| dir.join(p))
    }

    /// Deployed environment with the scenario's surfaces and faults.
    pub fn environment(&self, seed: u64) -> Result<Environment, HarnessError> {
        let mut env = Environment::deploy(&self.spec, seed).with_surfaces(self.file.surfaces.iter().copied());
        for f in &self.file.faults {
            env.inject_drift(f.clone())
                .map_err(|e| HarnessError::Config(format!("scenario {}: {e}", self.file.name)))?;
        }
        Ok(env)
    }

    pub fn ground_truth(&self, env: &Environment) -> GroundTruth {
        let mut gt = env.ground_truth();
        if let Some(o) = &self.file.ground_truth_overrides {
            if let Some(c) = &o.faulty_component {
                gt.faulty_component = Some(c.clone());
            }
            if let Some(k) = o.root_cause {
                gt.root_cause = Some(k);
            }
        }
        gt
    }

    pub fn agent_task(&self) -> AgentTask {
        AgentTask {
            id: self.file.name.clone(),
            task_type: self.file.task_type,
            spec: self.spec.clone(),
            spec_text: self.spec_text.clone(),
        }
    }

    /// Tools able to check each property given the exposed surfaces.
    pub fn available_tools(&self) -> Vec<(String, Vec<String>)> {
        let env = self.environment(self.file.seed).expect("validated at load");
        let registry = ToolRegistry::standard();
        self.spec
            .properties
            .iter()
            .map(|p| {
                let tools = available_paths(&registry, &env, p).into_iter().map(|c| c.tool_name).collect();
                (p.id.to_string(), tools)
            })
            .collect()
    }
}
