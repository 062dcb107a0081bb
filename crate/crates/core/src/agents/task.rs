use std::path::{Path, PathBuf};

use crate::formal::{parse_user_assertions, UserAssertion};
use crate::rtl::{parse_module, RtlModule, SourceUnit};
use crate::tools::{parse_testbench, Testbench};

use super::backend::Script;

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header: {0}")]
    HeaderUnparseable(String),
    #[error("testbench: {0}")]
    Testbench(String),
    #[error("props.json: {0}")]
    Props(String),
    #[error("script.json: {0}")]
    Script(String),
}

/// `(S, H, t_off)` plus optional sidecars.
#[derive(Debug, Clone)]
pub struct TaskBundle {
    pub id: String,
    pub spec: String,
    pub header: SourceUnit,
    /// Port-only skeleton parsed from `header`.
    pub header_module: RtlModule,
    pub tb: SourceUnit,
    pub testbench: Testbench,
    pub props: Vec<UserAssertion>,
    pub script: Option<Script>,
    pub dir: Option<PathBuf>,
}

impl TaskBundle {
    pub fn new(
        id: impl Into<String>,
        spec: impl Into<String>,
        header: &str,
        tb: &str,
    ) -> Result<Self, TaskError> {
        let header = SourceUnit::new("header.v", header);
        let header_module =
            parse_module(&header).map_err(|e| TaskError::HeaderUnparseable(e.to_string()))?;
        let tb = SourceUnit::new("tb.v", tb);
        let testbench = parse_testbench(&tb).map_err(|e| TaskError::Testbench(e.to_string()))?;
        Ok(TaskBundle {
            id: id.into(),
            spec: spec.into(),
            header,
            header_module,
            tb,
            testbench,
            props: Vec::new(),
            script: None,
            dir: None,
        })
    }

    /// Reads `spec.md`, `header.v`, `tb.v`, and the optional `props.json` and
    /// `script.json`. The task id is the directory name.
    pub fn load(dir: &Path) -> Result<Self, TaskError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| TaskError::Io { path, source })
        };
        let id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "task".into());
        let mut t = TaskBundle::new(id, read("spec.md")?, &read("header.v")?, &read("tb.v")?)?;
        if dir.join("props.json").exists() {
            t.props = parse_user_assertions(&read("props.json")?)
                .map_err(|e| TaskError::Props(e.to_string()))?;
        }
        let script = dir.join("script.json");
        if script.exists() {
            t.script = Some(Script::load(&script).map_err(|e| TaskError::Script(e.to_string()))?);
        }
        t.dir = Some(dir.to_path_buf());
        Ok(t)
    }
}
