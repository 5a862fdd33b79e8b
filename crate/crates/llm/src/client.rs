//! Blocking chat-completion client with retries, caching and bounded
//! concurrency.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use aigcbias::corpus::{Article, Origin};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cache::Cache;
use crate::prompt::PromptSpec;
use crate::refusal::RefusalDetector;
use crate::{LlmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Stable name recorded with every generation.
    pub id: String,
    pub url: String,
    pub model: String,
    /// Environment variable holding a bearer token, if the endpoint needs one.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub concurrency: usize,
}

impl EndpointConfig {
    pub fn new(id: impl Into<String>, url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            url: url.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: 120,
            max_attempts: 3,
            backoff_base_ms: 1000,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: PromptSpec,
    pub rendered_prompt: String,
    pub endpoint_id: String,
    pub model: String,
    pub params: DecodingParams,
    pub response_text: String,
    pub refused: bool,
    pub timestamp_unix: u64,
    pub cache_key: String,
}

impl GenerationRecord {
    /// Refused generations keep an empty body.
    pub fn to_article(&self, generator: &str) -> Article {
        Article {
            id: self.prompt.id.clone(),
            source: self.endpoint_id.clone(),
            headline: self.prompt.headline.clone(),
            body: if self.refused {
                String::new()
            } else {
                self.response_text.clone()
            },
            origin: Origin::Generated,
            generator: Some(generator.to_string()),
            prompt_kind: self.prompt.kind,
        }
    }
}

/// Hash of everything that determines a response.
pub fn cache_key(endpoint: &EndpointConfig, rendered_prompt: &str, params: &DecodingParams) -> String {
    let material = json!({
        "endpoint_id": endpoint.id,
        "model": endpoint.model,
        "prompt": rendered_prompt,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    });
    hex::encode(Sha256::digest(material.to_string().as_bytes()))
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

pub struct Client {
    endpoint: EndpointConfig,
    params: DecodingParams,
    cache: Option<Cache>,
    detector: RefusalDetector,
    agent: ureq::Agent,
    api_key: Option<String>,
    requests: AtomicUsize,
}

impl Client {
    pub fn new(
        endpoint: EndpointConfig,
        params: DecodingParams,
        cache: Option<Cache>,
        detector: RefusalDetector,
    ) -> Result<Self> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::BadResponse {
                endpoint: endpoint.id.clone(),
                message: format!("environment variable {var} is not set"),
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .build()
            .into();
        Ok(Self {
            endpoint,
            params,
            cache,
            detector,
            agent,
            api_key,
            requests: AtomicUsize::new(0),
        })
    }

    /// HTTP requests sent so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    fn attempt(&self, body: &str) -> std::result::Result<String, Attempt> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut req = self
            .agent
            .post(&self.endpoint.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(LlmError::Status {
                endpoint: self.endpoint.id.clone(),
                status,
                body: text.chars().take(200).collect(),
            }));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| Attempt::Fatal(self.bad(e.to_string())))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(self.bad("missing choices[0].message.content".into())))
    }

    fn bad(&self, message: String) -> LlmError {
        LlmError::BadResponse {
            endpoint: self.endpoint.id.clone(),
            message,
        }
    }

    fn request(&self, rendered: &str) -> Result<String> {
        let body = json!({
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": rendered}],
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_tokens,
        })
        .to_string();
        let attempts = self.endpoint.max_attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                thread::sleep(Duration::from_millis(self.endpoint.backoff_base_ms << (i - 1)));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(why)) => {
                    log::warn!("endpoint {}: attempt {} failed: {why}", self.endpoint.id, i + 1);
                    last = why;
                }
            }
        }
        Err(LlmError::RetryExhausted {
            endpoint: self.endpoint.id.clone(),
            attempts,
            last,
        })
    }

    /// Cached generations are returned without touching the network.
    pub fn generate(&self, prompt: &PromptSpec) -> Result<GenerationRecord> {
        let rendered = prompt.render()?;
        let key = cache_key(&self.endpoint, &rendered, &self.params);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key)? {
                return Ok(hit);
            }
        }
        let text = self.request(&rendered)?;
        let record = GenerationRecord {
            prompt: prompt.clone(),
            refused: self.detector.detect(&text),
            rendered_prompt: rendered,
            endpoint_id: self.endpoint.id.clone(),
            model: self.endpoint.model.clone(),
            params: self.params,
            response_text: text,
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            cache_key: key,
        };
        if let Some(cache) = &self.cache {
            cache.put(&record)?;
        }
        Ok(record)
    }

    /// Generates every prompt with at most `concurrency` requests in
    /// flight; results keep the input order.
    pub fn generate_all(&self, prompts: &[PromptSpec]) -> Vec<Result<GenerationRecord>> {
        let workers = self.endpoint.concurrency.clamp(1, prompts.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<GenerationRecord>>>> =
            Mutex::new((0..prompts.len()).map(|_| None).collect());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= prompts.len() {
                        break;
                    }
                    let r = self.generate(&prompts[i]);
                    slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect()
    }
}
