use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::RunError;

pub const SNAPSHOT_FILE: &str = "config.snapshot";
pub const METRICS_FILE: &str = "metrics.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// `<root>/<project>/<experiment>/<run-id>/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    path: PathBuf,
    run_id: String,
}

impl RunDir {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn snapshot(&self) -> PathBuf {
        self.path.join(SNAPSHOT_FILE)
    }

    pub fn metrics(&self) -> PathBuf {
        self.path.join(METRICS_FILE)
    }

    pub fn episodes(&self) -> PathBuf {
        self.path.join(EPISODES_FILE)
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.path.join(CHECKPOINT_DIR)
    }
}

/// Letters, digits, `-`, `_` and `.`, but not `.` or `..` alone.
pub fn is_safe_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Creates a fresh run directory. The run id is the UTC time as
/// `YYYYMMDD-HHMMSS` plus four random hex digits; a collision draws again.
pub fn create_run_dir(root: &Path, project: &str, experiment: &str) -> Result<RunDir, RunError> {
    for (what, name) in [("project", project), ("experiment", experiment)] {
        if !is_safe_name(name) {
            return Err(RunError::Usage(format!(
                "runner.{what} {name:?} is not a safe directory name"
            )));
        }
    }
    let parent = root.join(project).join(experiment);
    let startup = |e: io::Error, p: &Path| {
        RunError::Startup(format!("cannot create run directory under {}: {e}", p.display()))
    };
    fs::create_dir_all(&parent).map_err(|e| startup(e, &parent))?;
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S").to_string();
    for _ in 0..256 {
        let run_id = format!("{stamp}-{:04x}", rand::random::<u16>());
        let path = parent.join(&run_id);
        match fs::create_dir(&path) {
            Ok(()) => {
                fs::create_dir(path.join(CHECKPOINT_DIR)).map_err(|e| startup(e, &path))?;
                return Ok(RunDir { path, run_id });
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(startup(e, &parent)),
        }
    }
    Err(RunError::Startup(format!(
        "no free run id under {} for {stamp}",
        parent.display()
    )))
}
