use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    BackendError, BackendReply, Capabilities, EvaluateRequest, EvaluatorBackend, ProposeRequest,
    ProposerBackend,
};

pub const API_KEY_ENV: &str = "DT_API_KEY";

/// Bearer token. Never printed, serialized or logged.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .map(Self)
    }

    fn bearer(&self) -> String {
        format!("Bearer {}", self.0)
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

/// Exponential backoff: the wait before retry `k` (0-based) is
/// `base_s · factor^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub limit: u32,
    pub base_s: f64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            limit: 3,
            base_s: 1.0,
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        Duration::from_secs_f64(self.base_s * self.factor.powi(retry as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_s: f64,
    pub retry: RetryPolicy,
    /// Request field that carries the denoising step count, if the server
    /// understands one.
    pub denoise_param: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: "default".into(),
            timeout_s: 120.0,
            retry: RetryPolicy::default(),
            denoise_param: None,
        }
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint. Serves as
/// either role.
pub struct RemoteBackend {
    cfg: RemoteConfig,
    key: Option<ApiKey>,
    agent: ureq::Agent,
    warned_hint: AtomicBool,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("cfg", &self.cfg)
            .field("key", &self.key)
            .finish()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::Http { status, .. } => *status >= 500 || *status == 429,
        BackendError::Timeout(_) | BackendError::Transport(_) => true,
        _ => false,
    }
}

impl RemoteBackend {
    /// Key from `DT_API_KEY` when set.
    pub fn new(cfg: RemoteConfig) -> Self {
        Self::with_key(cfg, ApiKey::from_env())
    }

    pub fn with_key(cfg: RemoteConfig, key: Option<ApiKey>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            cfg,
            key,
            agent,
            warned_hint: AtomicBool::new(false),
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn once(&self, body: &Value) -> Result<Vec<String>, BackendError> {
        let mut req = self.agent.post(&self.endpoint());
        if let Some(k) = &self.key {
            req = req.header("Authorization", k.bearer());
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(t) => BackendError::Timeout(t.to_string()),
            other => BackendError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let body: String = text.chars().take(200).collect();
            return Err(BackendError::Http { status, body });
        }
        let mut parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        parsed.choices.sort_by_key(|c| c.index);
        Ok(parsed
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect())
    }

    fn chat(&self, body: Value) -> Result<Vec<String>, BackendError> {
        let policy = self.cfg.retry;
        let mut retry = 0;
        loop {
            match self.once(&body) {
                Ok(texts) => return Ok(texts),
                Err(e) if retryable(&e) && retry < policy.limit => {
                    let wait = policy.delay(retry);
                    tracing::warn!(
                        endpoint = %self.endpoint(),
                        error = %e,
                        retry = retry + 1,
                        wait_s = wait.as_secs_f64(),
                        "retrying backend request"
                    );
                    std::thread::sleep(wait);
                    retry += 1;
                }
                Err(e) if retryable(&e) => {
                    return Err(BackendError::Exhausted {
                        attempts: retry + 1,
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn body(&self, prompt: &str, n: usize, temperature: f64, max_tokens: u32) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "n": n,
            "temperature": temperature,
            "max_tokens": max_tokens,
        })
    }
}

impl ProposerBackend for RemoteBackend {
    fn identity(&self) -> String {
        format!("remote:{}@{}", self.cfg.model, self.cfg.base_url)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_parallel_samples: usize::MAX,
            supports_step_hint: self.cfg.denoise_param.is_some(),
        }
    }

    /// Servers may return fewer choices than `n`; the shortfall is requested
    /// again and appended, keeping server order within each response.
    fn propose(&self, req: &ProposeRequest<'_>) -> Result<BackendReply<Vec<String>>, BackendError> {
        let mut out: Vec<String> = Vec::with_capacity(req.n);
        while out.len() < req.n {
            let mut body = self.body(req.prompt, req.n - out.len(), req.decode.temperature, req.decode.max_tokens);
            match &self.cfg.denoise_param {
                Some(name) => body[name.as_str()] = json!(req.decode.denoise_steps),
                None => {
                    if !self.warned_hint.swap(true, Ordering::Relaxed) {
                        tracing::warn!(
                            backend = %ProposerBackend::identity(self),
                            "no denoise_param configured; dropping the step-count hint"
                        );
                    }
                }
            }
            let texts = self.chat(body)?;
            if texts.is_empty() {
                return Err(BackendError::Protocol("response has no choices".into()));
            }
            let room = req.n - out.len();
            out.extend(texts.into_iter().take(room));
        }
        Ok(BackendReply::new(out))
    }
}

impl EvaluatorBackend for RemoteBackend {
    fn identity(&self) -> String {
        format!("remote:{}@{}", self.cfg.model, self.cfg.base_url)
    }

    fn evaluate(&self, req: &EvaluateRequest<'_>) -> Result<BackendReply<String>, BackendError> {
        let texts = self.chat(self.body(req.prompt, 1, req.temperature, req.max_tokens))?;
        texts
            .into_iter()
            .next()
            .map(BackendReply::new)
            .ok_or_else(|| BackendError::Protocol("response has no choices".into()))
    }
}
