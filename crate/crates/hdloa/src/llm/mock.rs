//! Deterministic scripted backend for testing orchestration paths without
//! network access or cost.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, CompletionRequest, LlmError};

/// SHA-256 hex digest of a prompt, used both for exact-match scripting and
/// for naming unmatched prompts in errors.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Matches when `prompt_digest(prompt)` equals this hex digest.
    ExactPromptDigest(String),
    /// Matches when the prompt contains this substring.
    Substring(String),
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::ExactPromptDigest(digest) => prompt_digest(prompt) == *digest,
            Matcher::Substring(needle) => prompt.contains(needle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub response: String,
}

/// Ordered rules; first match wins. With no `default_response`, an
/// unmatched prompt is a scripting error naming the prompt digest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_response: Option<String>,
}

impl MockScript {
    pub fn respond_with(text: impl Into<String>) -> Self {
        MockScript {
            rules: Vec::new(),
            default_response: Some(text.into()),
        }
    }

    pub fn rule(mut self, matcher: Matcher, response: impl Into<String>) -> Self {
        self.rules.push(MockRule {
            matcher,
            response: response.into(),
        });
        self
    }

    pub fn on_substring(self, needle: impl Into<String>, response: impl Into<String>) -> Self {
        self.rule(Matcher::Substring(needle.into()), response)
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Config(format!("mock script: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("mock script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Immutable script plus an atomic call counter.
pub struct MockBackend {
    script: MockScript,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of completions served so far (cache hits never reach here).
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        for rule in &self.script.rules {
            if rule.matcher.matches(&request.prompt) {
                return Ok(rule.response.clone());
            }
        }
        match &self.script.default_response {
            Some(text) => Ok(text.clone()),
            None => Err(LlmError::MockUnmatched {
                digest: prompt_digest(&request.prompt),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Client, ResponseCache};
    use std::sync::Arc;

    #[test]
    fn first_matching_rule_wins() {
        let script = MockScript::default()
            .on_substring("giver", "first")
            .on_substring("giver", "second");
        let backend = MockBackend::new(script);
        let req = CompletionRequest::new("m", "Extract the event arguments of giver");
        assert_eq!(backend.complete(&req).unwrap(), "first");
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn exact_digest_rule_matches_only_that_prompt() {
        let digest = prompt_digest("exact prompt");
        let script = MockScript::default().rule(Matcher::ExactPromptDigest(digest), "scripted");
        let backend = MockBackend::new(script);
        assert_eq!(
            backend
                .complete(&CompletionRequest::new("m", "exact prompt"))
                .unwrap(),
            "scripted"
        );
        assert!(backend
            .complete(&CompletionRequest::new("m", "other prompt"))
            .is_err());
    }

    #[test]
    fn unmatched_prompt_without_default_errors_with_digest() {
        let backend = MockBackend::new(MockScript::default());
        let req = CompletionRequest::new("m", "mystery");
        let err = backend.complete(&req).unwrap_err();
        match err {
            LlmError::MockUnmatched { digest } => {
                assert_eq!(digest, prompt_digest("mystery"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn script_round_trips_through_json() {
        let script = MockScript {
            rules: vec![
                MockRule {
                    matcher: Matcher::Substring("x".into()),
                    response: "y".into(),
                },
                MockRule {
                    matcher: Matcher::ExactPromptDigest("ab12".into()),
                    response: "z".into(),
                },
            ],
            default_response: None,
        };
        let json = serde_json::to_string(&script).unwrap();
        assert_eq!(MockScript::from_json(&json).unwrap(), script);

        let literal =
            r#"{"rules":[{"substring":"giver","response":"ok"}],"default_response":"fallback"}"#;
        let parsed = MockScript::from_json(literal).unwrap();
        assert_eq!(parsed.rules.len(), 1);
        assert_eq!(parsed.default_response.as_deref(), Some("fallback"));
    }

    #[test]
    fn identical_cached_calls_hit_backend_once() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(MockBackend::new(MockScript::respond_with("stable")));
        let client =
            Client::new(backend.clone()).with_cache(ResponseCache::open(dir.path()).unwrap());
        let req = CompletionRequest::new("m", "same prompt");
        let first = client.complete(&req).unwrap();
        assert!(!first.cached);
        for _ in 0..5 {
            let again = client.complete(&req).unwrap();
            assert!(again.cached);
            assert_eq!(again.text, "stable");
        }
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn concurrent_identical_calls_collapse_to_one_backend_call() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(MockBackend::new(MockScript::respond_with("stable")));
        let client = Client::new(backend.clone())
            .with_cache(ResponseCache::open(dir.path()).unwrap())
            .with_max_in_flight(8);
        let req = CompletionRequest::new("m", "racy prompt");
        std::thread::scope(|scope| {
            for _ in 0..8 {
                scope.spawn(|| {
                    client.complete(&req).unwrap();
                });
            }
        });
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn nonzero_temperature_bypasses_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(MockBackend::new(MockScript::respond_with("sampled")));
        let client =
            Client::new(backend.clone()).with_cache(ResponseCache::open(dir.path()).unwrap());
        let req = CompletionRequest {
            temperature: 0.7,
            ..CompletionRequest::new("m", "p")
        };
        assert!(!client.complete(&req).unwrap().cached);
        assert!(!client.complete(&req).unwrap().cached);
        assert_eq!(backend.calls(), 2);
    }
}
