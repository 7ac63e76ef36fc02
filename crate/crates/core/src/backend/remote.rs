//! Client for remote scoring services.
//!
//! Wire contract: `POST {endpoint}/v1/classify` with body
//! `{"task":"t1","texts":["...",...]}` and header
//! `x-client: reportable-triage/1`; a successful response is status 200 with
//! body `{"scores":[p,...]}`, one probability per text. Transport failures
//! (connection errors, timeouts) are retried; every other failure is final.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendKind, ClassifierBackend, ClassifierScore};
use crate::error::BackendErrorKind;
use crate::preprocess::NormalizedInput;
use crate::Task;

pub const CLIENT_HEADER: &str = "x-client";
pub const CLIENT_ID: &str = "reportable-triage/1";
pub const CLASSIFY_PATH: &str = "/v1/classify";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemoteOptions {
    #[serde(with = "millis")]
    pub timeout: Duration,
    /// Extra attempts after the first one fails at the transport level.
    pub retries: u32,
    #[serde(with = "millis")]
    pub retry_backoff: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            timeout: Duration::from_secs(30),
            retries: 2,
            retry_backoff: Duration::from_millis(200),
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    task: Task,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct ClassifyResponse {
    scores: Vec<f64>,
}

/// Exact request body sent for `(task, texts)`.
pub fn request_body(task: Task, texts: &[&str]) -> Vec<u8> {
    serde_json::to_vec(&ClassifyRequest { task, texts }).expect("request serializes")
}

fn classify_url(endpoint: &str) -> String {
    format!("{}{CLASSIFY_PATH}", endpoint.trim_end_matches('/'))
}

/// Validates a response body against the number of texts sent.
pub fn parse_response(body: &[u8], expected: usize) -> Result<Vec<ClassifierScore>, BackendErrorKind> {
    let resp: ClassifyResponse =
        serde_json::from_slice(body).map_err(|e| BackendErrorKind::MalformedBody(e.to_string()))?;
    if resp.scores.len() != expected {
        return Err(BackendErrorKind::CountMismatch {
            expected,
            got: resp.scores.len(),
        });
    }
    resp.scores
        .iter()
        .enumerate()
        .map(|(index, &value)| ClassifierScore::new(value).ok_or(BackendErrorKind::ScoreOutOfRange { index, value }))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    id: String,
    endpoint: String,
    options: RemoteOptions,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(
        id: impl Into<String>,
        endpoint: impl Into<String>,
        options: RemoteOptions,
    ) -> Result<Self, BackendErrorKind> {
        let client = reqwest::blocking::Client::builder()
            .timeout(options.timeout)
            .build()
            .map_err(|e| BackendErrorKind::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(RemoteBackend {
            id: id.into(),
            endpoint: endpoint.into(),
            options,
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn options(&self) -> &RemoteOptions {
        &self.options
    }

    pub fn score_texts(&self, task: Task, texts: &[&str]) -> Result<Vec<ClassifierScore>, BackendErrorKind> {
        let url = classify_url(&self.endpoint);
        let body = request_body(task, texts);
        let max_attempts = self.options.retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let sent = self
                .client
                .post(&url)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .header(CLIENT_HEADER, CLIENT_ID)
                .body(body.clone())
                .send()
                .and_then(|resp| {
                    let status = resp.status();
                    resp.bytes().map(|b| (status, b))
                });
            match sent {
                Ok((status, bytes)) => {
                    if status != reqwest::StatusCode::OK {
                        return Err(BackendErrorKind::Status(status.as_u16()));
                    }
                    return parse_response(&bytes, texts.len());
                }
                Err(e) => {
                    log::warn!("{}: attempt {attempt}/{max_attempts} failed: {e}", self.id);
                    if attempt >= max_attempts {
                        return Err(if e.is_timeout() {
                            BackendErrorKind::Timeout { attempts: attempt }
                        } else {
                            BackendErrorKind::Transport {
                                attempts: attempt,
                                message: e.to_string(),
                            }
                        });
                    }
                    thread::sleep(self.options.retry_backoff);
                }
            }
        }
    }
}

impl ClassifierBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn score(&self, task: Task, inputs: &[NormalizedInput]) -> Result<Vec<ClassifierScore>, BackendErrorKind> {
        let texts: Vec<&str> = inputs.iter().map(|x| x.text.as_str()).collect();
        self.score_texts(task, &texts)
    }
}

/// One-shot scoring call against `endpoint`.
pub fn remote_score(
    endpoint: &str,
    task: Task,
    texts: &[&str],
    timeout: Duration,
) -> Result<Vec<ClassifierScore>, BackendErrorKind> {
    let options = RemoteOptions {
        timeout,
        ..Default::default()
    };
    RemoteBackend::new("remote", endpoint, options)?.score_texts(task, texts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_request_body() {
        let body = request_body(Task::T1, &["invasive carcinoma", "benign \"nevus\""]);
        assert_eq!(
            std::str::from_utf8(&body).unwrap(),
            r#"{"task":"t1","texts":["invasive carcinoma","benign \"nevus\""]}"#
        );
        assert_eq!(request_body(Task::T2, &[]), br#"{"task":"t2","texts":[]}"#);
    }

    #[test]
    fn response_validation() {
        let ok = parse_response(br#"{"scores":[0.9,0.0,1]}"#, 3).unwrap();
        assert_eq!(ok.iter().map(|s| s.probability()).collect::<Vec<_>>(), [0.9, 0.0, 1.0]);
        assert_eq!(
            parse_response(br#"{"scores":[0.1,0.2]}"#, 3).unwrap_err(),
            BackendErrorKind::CountMismatch { expected: 3, got: 2 }
        );
        assert_eq!(
            parse_response(br#"{"scores":[1.5]}"#, 1).unwrap_err(),
            BackendErrorKind::ScoreOutOfRange { index: 0, value: 1.5 }
        );
        assert!(matches!(
            parse_response(b"<html>", 1).unwrap_err(),
            BackendErrorKind::MalformedBody(_)
        ));
        assert!(matches!(
            parse_response(br#"{"scores":["x"]}"#, 1).unwrap_err(),
            BackendErrorKind::MalformedBody(_)
        ));
    }

    #[test]
    fn url_join() {
        assert_eq!(classify_url("http://h:1/"), "http://h:1/v1/classify");
        assert_eq!(classify_url("http://h:1"), "http://h:1/v1/classify");
    }

    #[test]
    fn options_serde_in_millis() {
        let o: RemoteOptions = serde_json::from_str(r#"{"timeout":250,"retries":3,"retry_backoff":10}"#).unwrap();
        assert_eq!(o.timeout, Duration::from_millis(250));
        assert_eq!(o.retries, 3);
    }
}
