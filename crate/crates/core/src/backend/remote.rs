//! Chat-completion client with bounded concurrency and retry/backoff.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendConfig, BackendError, Session};

/// Exponential backoff schedule, independent of any executor: callers supply
/// the sleep function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

/// Outcome of a single failed attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptError<E> {
    Transient(E),
    Permanent(E),
}

/// Why a retried operation gave up.
#[derive(Debug, Clone, PartialEq)]
pub enum RetryError<E> {
    Permanent(E),
    Exhausted { attempts: u32, last: E },
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 2u32.checked_pow(retry).unwrap_or(u32::MAX);
        self.base_delay
            .checked_mul(factor)
            .unwrap_or(self.max_delay)
            .min(self.max_delay)
    }

    pub fn run<T, E>(
        &self,
        mut attempt: impl FnMut(u32) -> Result<T, AttemptError<E>>,
        mut sleep: impl FnMut(Duration),
    ) -> Result<T, RetryError<E>> {
        let mut n = 0;
        loop {
            match attempt(n) {
                Ok(v) => return Ok(v),
                Err(AttemptError::Permanent(e)) => return Err(RetryError::Permanent(e)),
                Err(AttemptError::Transient(e)) => {
                    if n >= self.max_retries {
                        return Err(RetryError::Exhausted {
                            attempts: n + 1,
                            last: e,
                        });
                    }
                    sleep(self.delay(n));
                    n += 1;
                }
            }
        }
    }
}

/// Counting semaphore capping the number of outstanding requests.
#[derive(Debug)]
pub struct InFlightLimiter {
    capacity: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(capacity: usize) -> Self {
        InFlightLimiter {
            capacity: capacity.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.capacity {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        Permit(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.used.lock().unwrap()
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportFailure {
    pub status: Option<u16>,
    pub message: String,
    pub timed_out: bool,
}

/// 429 and 5xx are worth retrying; every other 4xx is not.
pub fn is_transient_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

pub struct RemoteChatBackend {
    config: BackendConfig,
    url: String,
    agent: ureq::Agent,
    limiter: InFlightLimiter,
    policy: RetryPolicy,
}

impl RemoteChatBackend {
    pub fn new(config: BackendConfig) -> Self {
        let timeout = Duration::from_secs_f64(config.request_timeout_secs.max(0.001));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!(
            "{}/v1/chat/completions",
            config.endpoint_url.trim_end_matches('/')
        );
        let policy = RetryPolicy {
            max_retries: config.max_retries,
            base_delay: Duration::from_millis(config.retry_base_delay_ms),
            ..RetryPolicy::default()
        };
        RemoteChatBackend {
            limiter: InFlightLimiter::new(config.max_in_flight),
            config,
            url,
            agent,
            policy,
        }
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.effective_model(),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
            "messages": [{"role": "user", "content": prompt}],
        })
    }

    fn send_once(&self, body: &Value) -> Result<String, AttemptError<TransportFailure>> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => {
                let timed_out = matches!(e, ureq::Error::Timeout(_));
                return Err(AttemptError::Transient(TransportFailure {
                    status: None,
                    message: e.to_string(),
                    timed_out,
                }));
            }
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        if status == 200 {
            return extract_content(&text).map_err(|message| {
                AttemptError::Permanent(TransportFailure {
                    status: Some(status),
                    message,
                    timed_out: false,
                })
            });
        }
        let failure = TransportFailure {
            status: Some(status),
            message: text.chars().take(200).collect(),
            timed_out: false,
        };
        if is_transient_status(status) {
            Err(AttemptError::Transient(failure))
        } else {
            Err(AttemptError::Permanent(failure))
        }
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion reply.
pub fn extract_content(body: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("reply is not JSON: {e}"))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "reply lacks choices[0].message.content".to_string())
}

impl Backend for RemoteChatBackend {
    fn complete(&self, session: &Session<'_>) -> Result<String, BackendError> {
        let body = self.request_body(session.prompt);
        self.policy
            .run(|_| self.send_once(&body), thread::sleep)
            .map_err(|e| match e {
                RetryError::Permanent(f) => BackendError::Permanent {
                    status: f.status,
                    message: f.message,
                },
                RetryError::Exhausted { last, .. } if last.timed_out => {
                    BackendError::Timeout(self.config.request_timeout_secs)
                }
                RetryError::Exhausted { attempts, last } => BackendError::Exhausted {
                    attempts,
                    status: last.status,
                    message: last.message,
                },
            })
    }
}
