//! Judge backends and the on-disk response cache.
//!
//! The HTTP backend talks to an OpenAI-compatible chat-completions
//! endpoint: POST {"model", "messages": [{"role": "user", "content":
//! prompt}], "temperature"}, reply text read from the first choice's
//! message content. The API key comes from `GEC_JUDGE_API_KEY`.
//!
//! Mock backends answer deterministically from the structured request and
//! exist so the full pipeline runs reproducibly without a network.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::{PromptSpec, PromptTarget};
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "GEC_JUDGE_API_KEY";

/// Endpoint and run parameters for the judge stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint_url: String,
    pub model_id: String,
    /// Never serialized; read from the environment.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint_url: String::new(),
            model_id: String::new(),
            api_key: None,
            temperature: 0.0,
            max_retries: 2,
            max_in_flight: 4,
            cache_dir: None,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(Error::validation("max_in_flight must be at least 1"));
        }
        Ok(())
    }
}

/// One scoring request. HTTP backends must use only `prompt` (that is the
/// wire contract); mocks may inspect the structured fields.
pub struct JudgeRequest<'a> {
    pub prompt: &'a str,
    pub sentence_id: &'a str,
    pub targets: &'a [PromptTarget],
    pub spec: &'a PromptSpec,
}

pub trait JudgeBackend: Sync {
    fn model_id(&self) -> &str;
    /// Returns the raw response text for one prompt.
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String>;
}

/// Blocking client for an OpenAI-compatible chat-completions endpoint with
/// exponential backoff on 429/5xx and transport errors.
pub struct HttpJudgeClient {
    config: ClientConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpJudgeClient {
    pub fn new(config: ClientConfig) -> Result<Self> {
        config.validate()?;
        if config.endpoint_url.is_empty() {
            return Err(Error::validation("endpoint_url required for HTTP judge"));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Endpoint(e.to_string()))?;
        Ok(HttpJudgeClient { config, client })
    }

    fn attempt(&self, prompt: &str) -> std::result::Result<String, (bool, String)> {
        let body = json!({
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let mut request = self
            .client
            .post(&self.config.endpoint_url)
            .header("Content-Type", "application/json")
            .json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| (true, format!("transport: {e}")))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err((true, format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err((false, format!("endpoint returned {status}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| (false, format!("malformed endpoint reply: {e}")))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or((false, "endpoint reply has no choices".into()))
    }
}

impl JudgeBackend for HttpJudgeClient {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String> {
        let mut delay = Duration::from_millis(250);
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.attempt(request.prompt) {
                Ok(text) => return Ok(text),
                Err((retryable, msg)) => {
                    last_error = msg;
                    if !retryable {
                        break;
                    }
                    if attempt < self.config.max_retries {
                        std::thread::sleep(delay);
                        delay = (delay * 2).min(Duration::from_secs(8));
                    }
                }
            }
        }
        Err(Error::Endpoint(last_error))
    }
}

/// Deterministic offline judges.
pub enum MockJudge {
    /// score = 5 - min(4, number of edits in the target).
    EditCount,
    /// Scores from a latent quality table in [0, 1], mapped to 1..=5.
    /// Missing entries are endpoint errors.
    QualityTable(BTreeMap<(String, String), f64>),
}

impl MockJudge {
    pub fn from_quality_scores(scores: BTreeMap<(String, String), f64>) -> Self {
        MockJudge::QualityTable(scores)
    }

    fn score(&self, request: &JudgeRequest<'_>, target: &PromptTarget) -> Result<i64> {
        match self {
            MockJudge::EditCount => Ok(5 - (target.edits.len() as i64).min(4)),
            MockJudge::QualityTable(table) => {
                let key = (target.system.clone(), request.sentence_id.to_string());
                let quality = table.get(&key).copied().ok_or_else(|| {
                    Error::Endpoint(format!(
                        "mock quality table misses ({}, {})",
                        key.0, key.1
                    ))
                })?;
                Ok(1 + (quality.clamp(0.0, 1.0) * 4.0).round() as i64)
            }
        }
    }
}

impl JudgeBackend for MockJudge {
    fn model_id(&self) -> &str {
        match self {
            MockJudge::EditCount => "mock-edit-count",
            MockJudge::QualityTable(_) => "mock-quality",
        }
    }

    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String> {
        let scores: Vec<i64> = request
            .targets
            .iter()
            .map(|t| self.score(request, t))
            .collect::<Result<_>>()?;
        Ok(serde_json::to_string(&json!({ "scores": scores }))?)
    }
}

/// One cache file per (model, prompt hash).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt: String,
    pub raw_response: String,
    pub model_id: String,
    pub timestamp: u64,
}

/// Directory-backed response cache keyed by (model_id, prompt_hash).
pub struct ResponseCache {
    dir: PathBuf,
}

fn sanitize(component: &str) -> String {
    component
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    fn entry_path(&self, model_id: &str, prompt_hash: &str) -> PathBuf {
        self.dir.join(sanitize(model_id)).join(format!("{prompt_hash}.json"))
    }

    pub fn get(&self, model_id: &str, prompt_hash: &str) -> Option<CacheEntry> {
        let path = self.entry_path(model_id, prompt_hash);
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, prompt_hash: &str, entry: &CacheEntry) -> Result<()> {
        let path = self.entry_path(&entry.model_id, prompt_hash);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomically(&path, &serde_json::to_string_pretty(entry)?)
    }
}

fn write_atomically(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Granularity;
    use crate::judge::prompt::Criterion;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn request<'a>(
        targets: &'a [PromptTarget],
        spec: &'a PromptSpec,
    ) -> JudgeRequest<'a> {
        JudgeRequest {
            prompt: "p",
            sentence_id: "s1",
            targets,
            spec,
        }
    }

    #[test]
    fn edit_count_mock_scores_by_edit_count() {
        let spec = PromptSpec::new(Granularity::EditBased, Criterion::None).unwrap();
        let targets = vec![
            PromptTarget {
                system: "clean".into(),
                hypothesis: toks("a b"),
                edits: vec![],
            },
            PromptTarget {
                system: "busy".into(),
                hypothesis: toks("x y"),
                edits: (0..6)
                    .map(|i| crate::align::Edit::new(i, i + 1, toks("z")))
                    .collect(),
            },
        ];
        let mock = MockJudge::EditCount;
        let raw = mock.complete(&request(&targets, &spec)).unwrap();
        assert_eq!(raw, r#"{"scores":[5,1]}"#);
    }

    #[test]
    fn quality_mock_maps_to_five_point_scale() {
        let table: BTreeMap<(String, String), f64> = [
            (("good".to_string(), "s1".to_string()), 1.0),
            (("mid".to_string(), "s1".to_string()), 0.5),
            (("bad".to_string(), "s1".to_string()), 0.0),
        ]
        .into_iter()
        .collect();
        let spec = PromptSpec::new(Granularity::SentenceBased, Criterion::None).unwrap();
        let targets: Vec<PromptTarget> = ["good", "mid", "bad"]
            .iter()
            .map(|s| PromptTarget {
                system: s.to_string(),
                hypothesis: toks("a"),
                edits: vec![],
            })
            .collect();
        let mock = MockJudge::from_quality_scores(table);
        let raw = mock.complete(&request(&targets, &spec)).unwrap();
        assert_eq!(raw, r#"{"scores":[5,3,1]}"#);

        let unknown = vec![PromptTarget {
            system: "ghost".into(),
            hypothesis: toks("a"),
            edits: vec![],
        }];
        assert!(mock.complete(&request(&unknown, &spec)).is_err());
    }

    #[test]
    fn cache_round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        assert!(cache.get("model/x", "abc").is_none());
        let entry = CacheEntry {
            prompt: "p".into(),
            raw_response: r#"{"scores":[3]}"#.into(),
            model_id: "model/x".into(),
            timestamp: 0,
        };
        cache.put("abc", &entry).unwrap();
        let back = cache.get("model/x", "abc").unwrap();
        assert_eq!(back.raw_response, entry.raw_response);
        // Different model, same hash: distinct entry.
        assert!(cache.get("other", "abc").is_none());
    }
}
