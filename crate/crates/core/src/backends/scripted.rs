//! Backend that answers from a hand-written script, used to author replay
//! fixtures. Script layout:
//!
//! ```json
//! {
//!   "identity": {"backend": "scripted", "model": "fixture"},
//!   "files": {
//!     "src/app.py": {
//!       "units": {"BasicInfo": "FIELD: Base Model\nVALUE: ...\nREFERENCE: ..."},
//!       "reflections": {"DataRetention": ["round 1 reply", "round 2 reply"]}
//!     }
//!   }
//! }
//! ```
//!
//! Units without a scripted reply answer N/A for every field. Reflection
//! rounds are served in order per (file, field).

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::extract::{BackendError, BackendIdentity, CompletionBackend, CompletionRequest};
use crate::schema::{LabelField, LabelSection};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileScript {
    #[serde(default)]
    pub units: BTreeMap<LabelSection, String>,
    #[serde(default)]
    pub reflections: BTreeMap<LabelField, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub identity: BackendIdentity,
    pub files: BTreeMap<String, FileScript>,
}

pub struct ScriptedBackend {
    script: Script,
    rounds: Mutex<HashMap<(String, LabelField), usize>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend { script, rounds: Mutex::new(HashMap::new()) }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let script = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Self::new(script))
    }
}

fn all_na(section: LabelSection) -> String {
    section
        .fields()
        .iter()
        .map(|f| format!("FIELD: {}\nVALUE: N/A\nREFERENCE: N/A", f.display_name()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let path = &request.prompt.file_path;
        let file = self.script.files.get(path);
        match request.focus {
            None => Ok(file
                .and_then(|f| f.units.get(&request.prompt.section).cloned())
                .unwrap_or_else(|| all_na(request.prompt.section))),
            Some(field) => {
                let replies = file.and_then(|f| f.reflections.get(&field)).ok_or_else(|| {
                    BackendError::Fatal(format!("no scripted reflection for {} in {path}", field.display_name()))
                })?;
                let mut rounds = self.rounds.lock().unwrap();
                let round = rounds.entry((path.clone(), field)).or_insert(0);
                let reply = replies.get(*round).or(replies.last()).cloned().ok_or_else(|| {
                    BackendError::Fatal(format!("empty reflection script for {} in {path}", field.display_name()))
                })?;
                *round += 1;
                Ok(reply)
            }
        }
    }

    fn identity(&self) -> BackendIdentity {
        self.script.identity.clone()
    }
}
