//! Chat-completion HTTP clients for the judge and the generator.
//!
//! Wire shape is the common chat-completions JSON: POST to the configured
//! endpoint with `{"model", "messages", ...}`, bearer credential read from
//! an environment variable. The transport is a trait so retry, parsing and
//! rate limiting are testable without a network.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, GeneratorClient, JudgeClient, RetryPolicy};
use crate::rewards::{JudgeGrade, JudgeVerdict};

/// Connection settings for one remote client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Model identifier sent in the request body.
    pub model: String,
    /// Name of the environment variable holding the bearer credential.
    /// Credentials never live in config files.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retry_budget: u32,
    /// Token-bucket rate limit; `None` disables limiting.
    pub requests_per_minute: Option<u32>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: "http://localhost:8080/v1/chat/completions".to_string(),
            model: "judge-model".to_string(),
            api_key_env: "HFACS_GATEWAY_API_KEY".to_string(),
            timeout_secs: 30,
            retry_budget: 3,
            requests_per_minute: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponseMessage {
    content: String,
}

#[derive(Debug)]
pub struct TransportError(pub String);

/// One round trip to a chat endpoint, returning the assistant text.
pub trait ChatTransport: Send + Sync {
    fn send_chat(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Real transport over blocking HTTP.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    bearer: Option<String>,
}

impl HttpTransport {
    pub fn new(config: &GatewayConfig) -> Result<HttpTransport, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let bearer = std::env::var(&config.api_key_env).ok();
        if bearer.is_none() {
            warn!(
                "credential variable {} is unset; sending unauthenticated requests",
                config.api_key_env
            );
        }
        Ok(HttpTransport {
            client,
            endpoint: config.endpoint.clone(),
            bearer,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn send_chat(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(token) = &self.bearer {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError(format!("HTTP {status}")));
        }
        let body: ChatResponse = response.json().map_err(|e| TransportError(e.to_string()))?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError("response had no choices".to_string()))
    }
}

/// Blocking token bucket. Refills continuously at `rpm` tokens per minute
/// with burst capacity `rpm`.
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(rpm: u32) -> TokenBucket {
        let capacity = rpm.max(1) as f64;
        TokenBucket {
            capacity,
            refill_per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let (ref mut tokens, ref mut last) = *state;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.refill_per_sec)
                    .min(self.capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.refill_per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

/// Grading rubric sent to the remote judge. The grade is requested as a
/// single constrained word so no free-form score parsing is needed.
pub const JUDGE_SYSTEM_PROMPT: &str = "You grade the quality of a short reasoning passage written \
about an aviation accident narrative. Grade `good` when the reasoning is logically coherent and \
clearly grounded in details of the narrative. Grade `okay` when the reasoning is plausible but \
shallow, generic, or only loosely tied to the narrative. Grade `bad` when the reasoning is \
incoherent, irrelevant, or missing. Reply with exactly one word: bad, okay, or good.";

fn parse_grade(text: &str) -> Option<JudgeGrade> {
    let word = text
        .trim()
        .split_whitespace()
        .next()?
        .trim_matches(|c: char| !c.is_ascii_alphabetic())
        .to_ascii_lowercase();
    match word.as_str() {
        "bad" => Some(JudgeGrade::Bad),
        "okay" => Some(JudgeGrade::Okay),
        "good" => Some(JudgeGrade::Good),
        _ => None,
    }
}

/// Remote judge over any [`ChatTransport`].
pub struct HttpJudge {
    transport: Box<dyn ChatTransport>,
    model: String,
    retry: RetryPolicy,
    limiter: Option<TokenBucket>,
}

impl HttpJudge {
    pub fn new(config: &GatewayConfig) -> Result<HttpJudge, GatewayError> {
        Ok(HttpJudge::with_transport(
            Box::new(HttpTransport::new(config)?),
            config,
        ))
    }

    pub fn with_transport(transport: Box<dyn ChatTransport>, config: &GatewayConfig) -> HttpJudge {
        HttpJudge {
            transport,
            model: config.model.clone(),
            retry: RetryPolicy {
                budget: config.retry_budget,
                ..RetryPolicy::default()
            },
            limiter: config.requests_per_minute.map(TokenBucket::per_minute),
        }
    }

    #[cfg(test)]
    fn immediate_retries(mut self) -> HttpJudge {
        self.retry = RetryPolicy::immediate(self.retry.budget);
        self
    }
}

impl JudgeClient for HttpJudge {
    fn evaluate(&self, reasoning_text: &str, narrative: &str) -> Result<JudgeVerdict, GatewayError> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".to_string(),
                    content: JUDGE_SYSTEM_PROMPT.to_string(),
                },
                ChatMessage {
                    role: "user".to_string(),
                    content: format!(
                        "Accident narrative:\n{narrative}\n\nReasoning to grade:\n{reasoning_text}\n\n\
                         One word (bad, okay, or good):"
                    ),
                },
            ],
            max_tokens: Some(4),
            temperature: Some(1.0),
        };
        let content = self
            .retry
            .run(|| {
                if let Some(limiter) = &self.limiter {
                    limiter.acquire();
                }
                self.transport.send_chat(&request)
            })
            .map_err(|(err, attempts)| {
                warn!("judge request failed on all {attempts} attempts: {}", err.0);
                GatewayError::JudgeUnavailable { attempts }
            })?;
        let grade = parse_grade(&content).unwrap_or_else(|| {
            warn!("unparseable judge reply {content:?}; grading bad");
            JudgeGrade::Bad
        });
        Ok(JudgeVerdict { grade })
    }
}

/// Remote narrative generator over any [`ChatTransport`].
pub struct HttpGenerator {
    transport: Box<dyn ChatTransport>,
    model: String,
    retry: RetryPolicy,
    limiter: Option<TokenBucket>,
}

impl HttpGenerator {
    pub fn new(config: &GatewayConfig) -> Result<HttpGenerator, GatewayError> {
        Ok(HttpGenerator::with_transport(
            Box::new(HttpTransport::new(config)?),
            config,
        ))
    }

    pub fn with_transport(
        transport: Box<dyn ChatTransport>,
        config: &GatewayConfig,
    ) -> HttpGenerator {
        HttpGenerator {
            transport,
            model: config.model.clone(),
            retry: RetryPolicy {
                budget: config.retry_budget,
                ..RetryPolicy::default()
            },
            limiter: config.requests_per_minute.map(TokenBucket::per_minute),
        }
    }

    #[cfg(test)]
    fn immediate_retries(mut self) -> HttpGenerator {
        self.retry = RetryPolicy::immediate(self.retry.budget);
        self
    }
}

impl GeneratorClient for HttpGenerator {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: prompt.to_string(),
            }],
            max_tokens: None,
            temperature: Some(1.0),
        };
        let content = self
            .retry
            .run(|| {
                if let Some(limiter) = &self.limiter {
                    limiter.acquire();
                }
                self.transport.send_chat(&request)
            })
            .map_err(|(err, attempts)| GatewayError::GenerationFailed {
                attempts,
                detail: err.0,
            })?;
        if content.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        Ok(content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct ScriptedTransport {
        calls: AtomicU32,
        fail_first: u32,
        reply: String,
    }

    impl ScriptedTransport {
        fn new(fail_first: u32, reply: &str) -> ScriptedTransport {
            ScriptedTransport {
                calls: AtomicU32::new(0),
                fail_first,
                reply: reply.to_string(),
            }
        }
    }

    impl ChatTransport for ScriptedTransport {
        fn send_chat(&self, _request: &ChatRequest) -> Result<String, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(TransportError("503".to_string()))
            } else {
                Ok(self.reply.clone())
            }
        }
    }

    fn config() -> GatewayConfig {
        GatewayConfig {
            retry_budget: 3,
            ..GatewayConfig::default()
        }
    }

    #[test]
    fn judge_parses_grade_word() {
        for (reply, grade) in [
            ("good", JudgeGrade::Good),
            ("Okay", JudgeGrade::Okay),
            (" bad.\n", JudgeGrade::Bad),
            ("GOOD", JudgeGrade::Good),
        ] {
            let judge =
                HttpJudge::with_transport(Box::new(ScriptedTransport::new(0, reply)), &config())
                    .immediate_retries();
            let verdict = judge.evaluate("reasoning", "narrative").unwrap();
            assert_eq!(verdict.grade, grade, "reply {reply:?}");
        }
    }

    #[test]
    fn unparseable_reply_grades_bad() {
        let judge = HttpJudge::with_transport(
            Box::new(ScriptedTransport::new(0, "score: 7/10")),
            &config(),
        )
        .immediate_retries();
        let verdict = judge.evaluate("reasoning", "narrative").unwrap();
        assert_eq!(verdict.grade, JudgeGrade::Bad);
    }

    #[test]
    fn judge_retries_then_gives_up() {
        let transport = ScriptedTransport::new(10, "good");
        let judge = HttpJudge::with_transport(Box::new(transport), &config()).immediate_retries();
        match judge.evaluate("reasoning", "narrative") {
            Err(GatewayError::JudgeUnavailable { attempts }) => assert_eq!(attempts, 4),
            other => panic!("expected JudgeUnavailable, got {other:?}"),
        }
    }

    #[test]
    fn judge_recovers_within_budget() {
        let judge =
            HttpJudge::with_transport(Box::new(ScriptedTransport::new(2, "okay")), &config())
                .immediate_retries();
        let verdict = judge.evaluate("reasoning", "narrative").unwrap();
        assert_eq!(verdict.grade, JudgeGrade::Okay);
    }

    #[test]
    fn generator_rejects_empty_response() {
        let generator =
            HttpGenerator::with_transport(Box::new(ScriptedTransport::new(0, "  ")), &config())
                .immediate_retries();
        match generator.complete("prompt") {
            Err(GatewayError::EmptyResponse) => {}
            other => panic!("expected EmptyResponse, got {other:?}"),
        }
    }

    #[test]
    fn generator_exhausts_budget() {
        let generator =
            HttpGenerator::with_transport(Box::new(ScriptedTransport::new(10, "x")), &config())
                .immediate_retries();
        match generator.complete("prompt") {
            Err(GatewayError::GenerationFailed { attempts, .. }) => assert_eq!(attempts, 4),
            other => panic!("expected GenerationFailed, got {other:?}"),
        }
    }

    #[test]
    fn token_bucket_allows_burst_up_to_capacity() {
        let bucket = TokenBucket::per_minute(600);
        let start = Instant::now();
        for _ in 0..5 {
            bucket.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(100));
    }
}
