//! Chat transports for the remote judge.

use std::sync::Mutex;
use std::time::Duration;

use crate::error::{Error, Result};

/// One prompt in, one completion text out.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Chat-completion-style HTTP transport: posts the rendered prompt as a
/// single user message and reads `choices[0].message.content` back.
/// Request/response shapes in docs/formats.md.
pub struct HttpChatTransport {
    endpoint: String,
    model_id: String,
    api_key_env: String,
    temperature: f64,
    agent: ureq::Agent,
}

impl HttpChatTransport {
    pub fn new(endpoint: String, model_id: String, api_key_env: String, temperature: f64) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        HttpChatTransport {
            endpoint,
            model_id,
            api_key_env,
            temperature,
            agent,
        }
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&self, prompt: &str) -> Result<String> {
        let key = std::env::var(&self.api_key_env).map_err(|_| {
            Error::Config(format!(
                "environment variable {} is not set",
                self.api_key_env
            ))
        })?;
        let body = serde_json::json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => Error::Provider {
                    status: Some(code),
                    retries: 0,
                    message: format!("HTTP status {code}"),
                },
                ureq::Error::Transport(t) => Error::Provider {
                    status: None,
                    retries: 0,
                    message: t.to_string(),
                },
            })?;
        let value: serde_json::Value = response.into_json().map_err(|e| Error::Provider {
            status: None,
            retries: 0,
            message: format!("invalid JSON response: {e}"),
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Provider {
                status: None,
                retries: 0,
                message: "response missing choices[0].message.content".to_string(),
            })
    }
}

/// Test transport that serves a fixed sequence of canned outcomes.
pub struct ScriptedTransport {
    responses: Mutex<std::vec::IntoIter<Result<String>>>,
}

impl ScriptedTransport {
    pub fn new(responses: Vec<Result<String>>) -> Self {
        ScriptedTransport {
            responses: Mutex::new(responses.into_iter()),
        }
    }

    pub fn of_texts(texts: &[&str]) -> Self {
        ScriptedTransport::new(texts.iter().map(|t| Ok(t.to_string())).collect())
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, _prompt: &str) -> Result<String> {
        self.responses
            .lock()
            .expect("scripted transport lock")
            .next()
            .unwrap_or_else(|| {
                Err(Error::Provider {
                    status: None,
                    retries: 0,
                    message: "scripted transport exhausted".to_string(),
                })
            })
    }
}
