//! Task suites: JSON lines, one task per line.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub prompt: String,
    /// Tokens to emit. Zero is allowed: the run then measures prefill only.
    pub max_new_tokens: usize,
}

/// Read a suite from a JSON-lines file. An empty file is an empty suite;
/// blank lines are skipped. Any malformed line fails with its line number,
/// and ids must be unique and non-empty.
pub fn load_tasks(path: &Path) -> Result<Vec<Task>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tasks = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::TaskParse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let task: Task = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if task.id.is_empty() {
            return Err(parse_err("task id is empty".to_string()));
        }
        if !seen.insert(task.id.clone()) {
            return Err(Error::TaskValidation(format!(
                "duplicate task id {:?} (line {})",
                task.id,
                idx + 1
            )));
        }
        tasks.push(task);
    }
    Ok(tasks)
}
