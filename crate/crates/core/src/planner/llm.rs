//! Client for OpenAI-compatible `/v1/completions` endpoints.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Planner, PlannerError, StepView};
use crate::prompt::{stop_sequences, truncate_at_stop};

pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const BASE_URL_ENV: &str = "OPENAI_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBackendConfig {
    pub base_url: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    /// Upper bound on concurrent requests from one client.
    pub max_in_flight: usize,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        LlmBackendConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            model: "text-davinci-003".to_string(),
            max_tokens: 64,
            temperature: 0.0,
            stop: stop_sequences(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_in_flight: 4,
            api_key: None,
        }
    }
}

impl LlmBackendConfig {
    /// Defaults with the API key and base URL taken from the environment.
    pub fn from_env() -> Self {
        let mut cfg = LlmBackendConfig {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            ..Self::default()
        };
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.is_empty() {
                cfg.base_url = url;
            }
        }
        cfg
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    stop: &'a [String],
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

/// Shareable completion client.
pub struct LlmClient {
    config: LlmBackendConfig,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

impl LlmClient {
    pub fn new(config: LlmBackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let in_flight = Semaphore::new(config.max_in_flight);
        LlmClient {
            config,
            agent,
            in_flight,
        }
    }

    pub fn config(&self) -> &LlmBackendConfig {
        &self.config
    }

    fn attempt(&self, prompt: &str) -> Result<String, String> {
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
            stop: &self.config.stop,
        };
        let mut req = self.agent.post(self.config.endpoint());
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {}", status.as_u16()));
        }
        let json: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("malformed body: {e}"))?;
        let text = json
            .pointer("/choices/0/text")
            .and_then(Value::as_str)
            .ok_or_else(|| "malformed body: missing choices[0].text".to_string())?;
        // some compatible servers ignore `stop`
        let text = truncate_at_stop(text, &self.config.stop).trim();
        if text.is_empty() {
            return Err("empty completion".into());
        }
        Ok(text.to_string())
    }

    /// Complete `prompt`, retrying with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let _slot = self.in_flight.acquire();
        let attempts = self.config.max_retries + 1;
        let mut delay = self.config.initial_backoff;
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
            if i + 1 < attempts {
                thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
        Err(LlmError::Exhausted { attempts, last })
    }
}

/// One completion with a throwaway client.
pub fn llm_complete(config: &LlmBackendConfig, context: &str) -> Result<String, LlmError> {
    LlmClient::new(config.clone()).complete(context)
}

pub struct LlmPlanner {
    client: Arc<LlmClient>,
}

impl LlmPlanner {
    pub fn new(client: Arc<LlmClient>) -> Self {
        LlmPlanner { client }
    }
}

impl Planner for LlmPlanner {
    fn next_command(&mut self, view: &StepView<'_>) -> Result<String, PlannerError> {
        let context = view.context()?;
        self.client
            .complete(&context)
            .map_err(|e| PlannerError::Backend(e.to_string()))
    }
}
