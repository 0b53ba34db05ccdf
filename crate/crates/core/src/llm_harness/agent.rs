//! Provider abstraction: text in, text out. The structured-output contract
//! lives in the prompt itself, so any completion-style endpoint works.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub prompt: String,
    /// Case ids carried for journaling and mock routing; never extra prompt
    /// content.
    pub case_ids: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("empty completion")]
    EmptyCompletion,
}

pub trait Agent: Sync {
    fn complete(&self, request: &AgentRequest) -> Result<String, AgentError>;
    fn name(&self) -> &str;
}

/// Chat-completions style HTTP adapter. Request body:
/// `{"model", "messages": [{"role": "user", "content": <prompt>}], "temperature"}`;
/// the completion is read from `choices[0].message.content` when present,
/// otherwise the raw body is treated as the completion text.
pub struct HttpAgent {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    client: reqwest::blocking::Client,
}

impl HttpAgent {
    pub fn new(
        endpoint: &str,
        model: &str,
        api_key: Option<String>,
        temperature: f64,
        timeout_secs: u64,
    ) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(timeout_secs))
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            temperature,
            client,
        })
    }

    pub fn from_config(cfg: &crate::config::AgentConfig) -> Result<Self, AgentError> {
        let api_key = std::env::var(&cfg.api_key_env).ok();
        Self::new(
            &cfg.endpoint,
            &cfg.model,
            api_key,
            cfg.temperature,
            cfg.timeout_secs,
        )
    }
}

impl Agent for HttpAgent {
    fn complete(&self, request: &AgentRequest) -> Result<String, AgentError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.temperature,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req
            .send()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(AgentError::Http {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let completion = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| {
                v.pointer("/choices/0/message/content")
                    .and_then(|c| c.as_str())
                    .map(|s| s.to_string())
            })
            .unwrap_or(text);
        if completion.trim().is_empty() {
            return Err(AgentError::EmptyCompletion);
        }
        Ok(completion)
    }

    fn name(&self) -> &str {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// One-shot HTTP server returning a canned body; hands back the request
    /// it saw.
    fn serve_once(body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let mut seen = Vec::new();
            loop {
                let n = stream.read(&mut buf).unwrap();
                seen.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&seen);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                        .unwrap_or(0);
                    if seen.len() >= header_end + 4 + content_length {
                        break;
                    }
                }
            }
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(response.as_bytes()).unwrap();
            String::from_utf8_lossy(&seen).to_string()
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    #[test]
    fn chat_completion_content_is_extracted() {
        let (endpoint, handle) = serve_once(
            r#"{"choices": [{"message": {"content": "{\"detections\": []}"}}]}"#,
        );
        let agent = HttpAgent::new(&endpoint, "test-model", Some("sk-test".into()), 0.0, 5).unwrap();
        let completion = agent
            .complete(&AgentRequest {
                prompt: "Day T+0 ok".into(),
                case_ids: vec!["c1".into()],
            })
            .unwrap();
        assert_eq!(completion, r#"{"detections": []}"#);
        let request = handle.join().unwrap();
        assert!(request.contains("authorization: Bearer sk-test") || request.contains("Authorization: Bearer sk-test"));
        assert!(request.contains("test-model"));
        assert!(request.contains("Day T+0 ok"));
    }

    #[test]
    fn non_chat_body_is_passed_through() {
        let (endpoint, handle) = serve_once(r#"{"detections": []}"#);
        let agent = HttpAgent::new(&endpoint, "m", None, 0.0, 5).unwrap();
        let completion = agent
            .complete(&AgentRequest {
                prompt: "p".into(),
                case_ids: vec![],
            })
            .unwrap();
        assert_eq!(completion, r#"{"detections": []}"#);
        handle.join().unwrap();
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let agent = HttpAgent::new("http://127.0.0.1:1/nope", "m", None, 0.0, 1).unwrap();
        let err = agent
            .complete(&AgentRequest {
                prompt: "p".into(),
                case_ids: vec![],
            })
            .unwrap_err();
        assert!(matches!(err, AgentError::Transport(_)));
    }
}
