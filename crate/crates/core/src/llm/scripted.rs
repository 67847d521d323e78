use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{read_script_file, Backend, BackendError, ChatRequest, ErrorKind, LlmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailKind {
    Transient,
    Fatal,
}

/// One scripted outcome. Serialized as `{"reply": "..."}` or `{"fail": "transient"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptStep {
    Reply(String),
    Fail(FailKind),
}

impl ScriptStep {
    pub fn reply(text: impl Into<String>) -> Self {
        ScriptStep::Reply(text.into())
    }
}

/// Test double that answers calls from a fixed list, strictly in order.
/// Every request it receives is kept for inspection.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    steps: Mutex<VecDeque<ScriptStep>>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self { steps: Mutex::new(steps.into_iter().collect()), calls: Mutex::new(Vec::new()) }
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.steps.lock().expect("script poisoned").len()
    }
}

impl Backend for ScriptedBackend {
    fn call(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.calls.lock().expect("call log poisoned").push(request.clone());
        let step = self.steps.lock().expect("script poisoned").pop_front();
        match step {
            Some(ScriptStep::Reply(text)) => Ok(text),
            Some(ScriptStep::Fail(FailKind::Transient)) => Err(BackendError::transient("scripted transient failure")),
            Some(ScriptStep::Fail(FailKind::Fatal)) => Err(BackendError::fatal("scripted fatal failure")),
            None => Err(BackendError { kind: ErrorKind::ScriptExhausted, message: "no scripted replies left".into() }),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Steps(Vec<ScriptStep>),
    Keyed(BTreeMap<String, Vec<ScriptStep>>),
}

/// Loads a script file. The file is either a JSON array of steps, used for
/// every run, or an object of arrays keyed by `pipeline:model_id`, `pipeline`
/// or `default`, tried in that order.
pub fn load_script(path: &Path, key: &str, pipeline: &str) -> Result<Vec<ScriptStep>, LlmError> {
    let text = read_script_file(path)?;
    let file: ScriptFile = serde_json::from_str(&text)
        .map_err(|e| LlmError::Configuration(format!("invalid script {}: {e}", path.display())))?;
    match file {
        ScriptFile::Steps(steps) => Ok(steps),
        ScriptFile::Keyed(mut map) => [key, pipeline, "default"]
            .iter()
            .find_map(|k| map.remove(*k))
            .ok_or_else(|| LlmError::Configuration(format!("script {} has no entry for `{key}`", path.display()))),
    }
}
