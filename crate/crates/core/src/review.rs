//! Review build directories and the verdict log behind the review service.
//!
//! A build directory holds `tasks.jsonl`, a `screenshots/` folder with a copy
//! of every referenced screenshot, and `verdicts.jsonl`, an append-only log.
//! The current verdict for a task is the last one logged for it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_records, write_records, FieldError, ReadMode, ReviewTask, ReviewVerdict, TaskStatus};
use crate::error::{Error, Result};

pub const TASKS_FILE: &str = "tasks.jsonl";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const SCREENSHOT_DIR: &str = "screenshots";

/// Create a build directory from `tasks`, copying their screenshots in and
/// rewriting each `screenshot_path` to the copy's file name.
pub fn create_build(dir: &Path, tasks: &[ReviewTask]) -> Result<Vec<ReviewTask>> {
    let shots = dir.join(SCREENSHOT_DIR);
    fs::create_dir_all(&shots).map_err(|e| Error::io(&shots, e))?;
    let mut names: HashMap<String, String> = HashMap::new();
    let mut out = Vec::with_capacity(tasks.len());
    for t in tasks {
        let n = names.len();
        let name = match names.get(&t.screenshot_path) {
            Some(name) => name.clone(),
            None => {
                let src = Path::new(&t.screenshot_path);
                let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("png");
                let name = format!("{n:05}.{ext}");
                let dst = shots.join(&name);
                fs::copy(src, &dst).map_err(|e| Error::io(src, e))?;
                names.insert(t.screenshot_path.clone(), name.clone());
                name
            }
        };
        out.push(ReviewTask {
            screenshot_path: name,
            status: TaskStatus::Pending,
            ..t.clone()
        });
    }
    write_records(dir.join(TASKS_FILE), &out)?;
    let log = dir.join(VERDICTS_FILE);
    File::create(&log).map_err(|e| Error::io(&log, e))?;
    Ok(out)
}

/// Replay a verdict log, keeping the last verdict per task. A torn final
/// line (an interrupted append) is ignored; corruption elsewhere is an error.
pub fn load_verdict_log(path: &Path) -> Result<BTreeMap<String, ReviewVerdict>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ReviewVerdict>(line) {
            Ok(v) => {
                out.insert(v.task_id.clone(), v);
            }
            Err(e) if i == last => {
                tracing::warn!(path = %path.display(), "ignoring torn last verdict line: {e}");
            }
            Err(e) => {
                return Err(Error::Record {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Cut an unterminated last line so later appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<()> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(path, e)),
    };
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
        f.sync_all().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum SubmitError {
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("verdict violates field rules")]
    Invalid(Vec<FieldError>),
    #[error(transparent)]
    Store(#[from] Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub pending: usize,
    pub done: usize,
    pub total: usize,
}

struct State {
    verdicts: BTreeMap<String, ReviewVerdict>,
    log: File,
}

/// A build directory opened for reviewing. Appends are serialized and
/// fsynced before `submit` returns; the verdict log stays exclusively locked
/// while the store is open.
pub struct ReviewStore {
    dir: PathBuf,
    tasks: Vec<ReviewTask>,
    index: HashMap<String, usize>,
    state: Mutex<State>,
}

impl ReviewStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let tasks: Vec<ReviewTask> = read_records(dir.join(TASKS_FILE), ReadMode::Strict)?.records;
        let index: HashMap<String, usize> = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.task_id.clone(), i))
            .collect();
        if index.len() != tasks.len() {
            return Err(Error::Data("duplicate task_id in tasks.jsonl".into()));
        }
        let log_path = dir.join(VERDICTS_FILE);
        let verdicts = load_verdict_log(&log_path)?;
        drop_torn_tail(&log_path)?;
        if let Some(id) = verdicts.keys().find(|id| !index.contains_key(*id)) {
            return Err(Error::Data(format!("verdict log names unknown task {id}")));
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        // one writer per build; plain readers go through load_verdict_log
        match log.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => {
                return Err(Error::Data(format!(
                    "{} is already open for review by another process",
                    dir.display()
                )))
            }
            Err(std::fs::TryLockError::Error(e)) => return Err(Error::io(&log_path, e)),
        }
        Ok(Self {
            dir,
            tasks,
            index,
            state: Mutex::new(State { verdicts, log }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn screenshot_dir(&self) -> PathBuf {
        self.dir.join(SCREENSHOT_DIR)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn with_status(&self, task: &ReviewTask, state: &State) -> ReviewTask {
        let status = if state.verdicts.contains_key(&task.task_id) {
            TaskStatus::Done
        } else {
            TaskStatus::Pending
        };
        ReviewTask {
            status,
            ..task.clone()
        }
    }

    /// Tasks in id order, optionally filtered by status, then paged.
    pub fn list(&self, status: Option<TaskStatus>, offset: usize, limit: usize) -> Vec<ReviewTask> {
        let state = self.lock();
        self.tasks
            .iter()
            .map(|t| self.with_status(t, &state))
            .filter(|t| status.is_none_or(|s| t.status == s))
            .skip(offset)
            .take(limit)
            .collect()
    }

    pub fn task(&self, id: &str) -> Option<(ReviewTask, Option<ReviewVerdict>)> {
        let i = *self.index.get(id)?;
        let state = self.lock();
        Some((self.with_status(&self.tasks[i], &state), state.verdicts.get(id).cloned()))
    }

    pub fn progress(&self) -> Progress {
        let done = self.lock().verdicts.len();
        Progress {
            pending: self.tasks.len() - done,
            done,
            total: self.tasks.len(),
        }
    }

    /// Record `verdict` for task `id`. Re-submitting the current verdict is a
    /// no-op.
    pub fn submit(&self, id: &str, verdict: &ReviewVerdict) -> Result<(), SubmitError> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| SubmitError::UnknownTask(id.to_string()))?;
        verdict
            .validate(Some(&self.tasks[i]))
            .map_err(SubmitError::Invalid)?;
        let mut state = self.lock();
        if state.verdicts.get(id) == Some(verdict) {
            return Ok(());
        }
        let mut line = serde_json::to_vec(verdict).map_err(Error::from)?;
        line.push(b'\n');
        let path = self.dir.join(VERDICTS_FILE);
        state.log.write_all(&line).map_err(|e| Error::io(&path, e))?;
        state.log.sync_data().map_err(|e| Error::io(&path, e))?;
        state.verdicts.insert(id.to_string(), verdict.clone());
        Ok(())
    }

    pub fn tasks(&self) -> &[ReviewTask] {
        &self.tasks
    }

    /// Current verdicts in task-id order.
    pub fn verdicts(&self) -> Vec<ReviewVerdict> {
        self.lock().verdicts.values().cloned().collect()
    }
}
