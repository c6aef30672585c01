//! OpenAI-compatible HTTP provider.

use std::time::Duration;

use serde_json::{json, Value};

use super::{Provider, ProviderError};

pub struct HttpProvider {
    agent: ureq::Agent,
    endpoint: String,
    chat_model: String,
    embed_model: String,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn new(endpoint: &str, chat_model: &str, embed_model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            agent,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            chat_model: chat_model.to_string(),
            embed_model: embed_model.to_string(),
            api_key,
        }
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, ProviderError> {
        let url = format!("{}/{}", self.endpoint, path);
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| ProviderError::Unavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ProviderError::Unavailable(format!("{url}: HTTP {status}")));
        }
        if status >= 400 {
            return Err(ProviderError::BadReply(format!("{url}: HTTP {status}")));
        }
        resp.body_mut().read_json::<Value>().map_err(|e| ProviderError::BadReply(format!("{url}: {e}")))
    }
}

impl Provider for HttpProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let reply = self.post(
            "chat/completions",
            json!({ "model": self.chat_model, "messages": [{ "role": "user", "content": prompt }] }),
        )?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadReply("missing choices[0].message.content".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let reply = self.post("embeddings", json!({ "model": self.embed_model, "input": texts }))?;
        let data = reply["data"].as_array().ok_or_else(|| ProviderError::BadReply("missing data".into()))?;
        if data.len() != texts.len() {
            return Err(ProviderError::BadReply(format!("expected {} embeddings, got {}", texts.len(), data.len())));
        }
        data.iter()
            .map(|d| {
                d["embedding"]
                    .as_array()
                    .ok_or_else(|| ProviderError::BadReply("missing embedding".into()))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| ProviderError::BadReply("non-numeric embedding".into())))
                    .collect()
            })
            .collect()
    }
}
