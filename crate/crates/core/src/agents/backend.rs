use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const API_URL_ENV: &str = "HDLFORGE_API_URL";
pub const API_KEY_ENV: &str = "HDLFORGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Planner,
    Coder,
    Reflexion,
    StageB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub text: String,
    /// Reported generation time; used by the virtual clock when present.
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend returned an error: {0}")]
    Failed(String),
}

/// A text generator behind one or more agent roles.
pub trait Backend: Send + Sync {
    fn identity(&self) -> String;
    fn complete(&self, req: &Request) -> Result<Response, BackendError>;
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Text(String),
    Detailed {
        #[serde(default)]
        text: Option<String>,
        /// Path relative to the script file; read at load time.
        #[serde(default)]
        file: Option<String>,
        #[serde(default)]
        error: Option<String>,
        #[serde(default)]
        latency_s: Option<f64>,
    },
}

impl ScriptEntry {
    pub fn text(t: impl Into<String>) -> Self {
        ScriptEntry::Text(t.into())
    }

    pub fn error(e: impl Into<String>) -> Self {
        ScriptEntry::Detailed {
            text: None,
            file: None,
            error: Some(e.into()),
            latency_s: None,
        }
    }

    pub fn with_latency(t: impl Into<String>, latency_s: f64) -> Self {
        ScriptEntry::Detailed {
            text: Some(t.into()),
            file: None,
            error: None,
            latency_s: Some(latency_s),
        }
    }
}

/// Per-role reply lists. Each role walks its list in order and repeats the
/// last entry once exhausted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Script {
    pub planner: Vec<ScriptEntry>,
    pub coder: Vec<ScriptEntry>,
    pub reflexion: Vec<ScriptEntry>,
    pub stage_b: Vec<ScriptEntry>,
}

impl Script {
    fn entries(&self, role: Role) -> &[ScriptEntry] {
        match role {
            Role::Planner => &self.planner,
            Role::Coder => &self.coder,
            Role::Reflexion => &self.reflexion,
            Role::StageB => &self.stage_b,
        }
    }

    /// Loads a script and inlines `file` entries.
    pub fn load(path: &Path) -> Result<Script, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", path.display())))?;
        let mut s: Script = serde_json::from_str(&text)
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for list in [
            &mut s.planner,
            &mut s.coder,
            &mut s.reflexion,
            &mut s.stage_b,
        ] {
            for e in list.iter_mut() {
                if let ScriptEntry::Detailed {
                    text,
                    file: Some(f),
                    ..
                } = e
                {
                    let p = base.join(&*f);
                    *text = Some(std::fs::read_to_string(&p).map_err(|err| {
                        BackendError::Unavailable(format!("{}: {err}", p.display()))
                    })?);
                }
            }
        }
        Ok(s)
    }
}

pub struct ScriptedBackend {
    name: String,
    script: Script,
    cursor: Mutex<HashMap<Role, usize>>,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, script: Script) -> Self {
        ScriptedBackend {
            name: name.into(),
            script,
            cursor: Mutex::new(HashMap::new()),
        }
    }
}

impl Backend for ScriptedBackend {
    fn identity(&self) -> String {
        format!("scripted:{}", self.name)
    }

    fn complete(&self, req: &Request) -> Result<Response, BackendError> {
        let entries = self.script.entries(req.role);
        if entries.is_empty() {
            return Err(BackendError::Unavailable(format!(
                "no scripted {:?} replies",
                req.role
            )));
        }
        let i = {
            let mut c = self.cursor.lock().expect("cursor lock");
            let slot = c.entry(req.role).or_insert(0);
            let i = (*slot).min(entries.len() - 1);
            *slot += 1;
            i
        };
        match &entries[i] {
            ScriptEntry::Text(t) => Ok(Response {
                text: t.clone(),
                latency_s: None,
            }),
            ScriptEntry::Detailed { error: Some(e), .. } => Err(BackendError::Failed(e.clone())),
            ScriptEntry::Detailed {
                text, latency_s, ..
            } => Ok(Response {
                text: text.clone().unwrap_or_default(),
                latency_s: *latency_s,
            }),
        }
    }
}

/// Chat-completion client. The request body is
/// `{model, messages, temperature, seed}`; the reply text is read from
/// `choices[0].message.content`, falling back to a top-level `content`.
pub struct HttpBackend {
    url: String,
    key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(
        url: impl Into<String>,
        key: Option<String>,
        model: impl Into<String>,
        timeout_s: f64,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            url: url.into(),
            key,
            model: model.into(),
            agent,
        }
    }

    /// Endpoint and key from `HDLFORGE_API_URL` / `HDLFORGE_API_KEY`.
    pub fn from_env(model: impl Into<String>, timeout_s: f64) -> Result<Self, BackendError> {
        let url = std::env::var(API_URL_ENV)
            .map_err(|_| BackendError::Unavailable(format!("{API_URL_ENV} is not set")))?;
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(HttpBackend::new(url, key, model, timeout_s))
    }

    pub fn request_body(&self, req: &Request) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "seed": req.seed,
        })
    }
}

pub fn reply_text(v: &serde_json::Value) -> Option<String> {
    v.pointer("/choices/0/message/content")
        .or_else(|| v.get("content"))
        .and_then(|c| c.as_str())
        .map(String::from)
}

impl Backend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}@{}", self.model, self.url)
    }

    fn complete(&self, req: &Request) -> Result<Response, BackendError> {
        let start = std::time::Instant::now();
        let mut call = self.agent.post(&self.url);
        if let Some(k) = &self.key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call
            .send_json(self.request_body(req))
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let body: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Failed(format!("status {status}: {e}")))?;
        if !status.is_success() {
            return Err(BackendError::Failed(format!("status {status}: {body}")));
        }
        let text = reply_text(&body)
            .ok_or_else(|| BackendError::Failed(format!("no reply text in {body}")))?;
        Ok(Response {
            text,
            latency_s: Some(start.elapsed().as_secs_f64()),
        })
    }
}

/// One backend exchange as persisted in transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub attempt: usize,
    pub backend: String,
    pub request: Request,
    pub response: Option<String>,
    pub error: Option<String>,
}
