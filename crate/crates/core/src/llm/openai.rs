//! OpenAI-style chat-completions over HTTP. Also serves Gemini through its
//! OpenAI-compatible endpoint.

use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendError, ChatRequest};
use crate::config::ProviderKind;

const OPENAI_BASE: &str = "https://api.openai.com/v1";
const GEMINI_BASE: &str = "https://generativelanguage.googleapis.com/v1beta/openai";

pub struct OpenAiCompatible {
    provider: ProviderKind,
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl OpenAiCompatible {
    pub fn new(provider: ProviderKind, base_url: Option<String>, api_key: String, timeout: Duration) -> Self {
        let default_base = match provider {
            ProviderKind::Gemini => GEMINI_BASE,
            _ => OPENAI_BASE,
        };
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self {
            provider,
            base_url: base_url.unwrap_or_else(|| default_base.to_string()).trim_end_matches('/').to_string(),
            api_key,
            agent,
        }
    }

    fn chat_body(&self, request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
        });
        match self.provider {
            ProviderKind::Gemini => {
                body["max_tokens"] = json!(request.max_output_tokens);
                body["temperature"] = json!(request.temperature);
            }
            _ => {
                body["max_completion_tokens"] = json!(request.max_output_tokens);
                // reasoning model families only accept their default temperature
                if !is_reasoning_model(&request.model_id) {
                    body["temperature"] = json!(request.temperature);
                }
            }
        }
        body
    }

    fn post(&self, endpoint: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}/{endpoint}", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(classify_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify_transport)?;
        if !(200..300).contains(&status) {
            let msg = format!("HTTP {status} from {url}: {}", truncate(&text, 500));
            return Err(if is_transient_status(status) {
                BackendError::transient(msg)
            } else {
                BackendError::fatal(msg)
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::fatal(format!("malformed JSON from {url}: {e}")))
    }

    /// Calls the embeddings endpoint for a single input.
    pub fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>, BackendError> {
        let value = self.post("embeddings", &json!({"model": model, "input": text}))?;
        value["data"][0]["embedding"]
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| BackendError::fatal("embeddings response lacks data[0].embedding"))
    }
}

impl Backend for OpenAiCompatible {
    fn call(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let value = self.post("chat/completions", &self.chat_body(request))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::fatal("response lacks choices[0].message.content"))
    }
}

fn is_reasoning_model(model: &str) -> bool {
    ["gpt-5", "o1", "o3", "o4"].iter().any(|p| model.starts_with(p))
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

fn classify_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            BackendError::transient(e.to_string())
        }
        other => BackendError::fatal(other.to_string()),
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
