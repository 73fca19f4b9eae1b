//! Client for external classifiers behind a small JSON-over-HTTP contract.
//!
//! Request: `{"text": ...}` or `{"features": [...]}`. Response:
//! `{"class": "mixed" | "negative" | "neutral" | "positive", "score": ...}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::label::{Polarity, Vote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawClass {
    Mixed,
    Negative,
    Neutral,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalVerdict {
    #[serde(rename = "class")]
    pub raw_class: RawClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl ExternalVerdict {
    pub fn polarity(&self) -> Polarity {
        match self.raw_class {
            RawClass::Negative => Polarity::Negative,
            RawClass::Mixed | RawClass::Neutral | RawClass::Positive => Polarity::Nonnegative,
        }
    }

    /// Mixed verdicts are kept out of training data.
    pub fn training_polarity(&self) -> Option<Polarity> {
        match self.raw_class {
            RawClass::Mixed => None,
            _ => Some(self.polarity()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalOutcome {
    pub vote: Vote,
    pub verdict: Option<ExternalVerdict>,
}

impl ExternalOutcome {
    fn abstain() -> Self {
        ExternalOutcome {
            vote: Vote::Abstain,
            verdict: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExternalClassifier {
    endpoint: String,
    agent: ureq::Agent,
}

impl ExternalClassifier {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);

    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Self::DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).build();
        ExternalClassifier {
            endpoint: endpoint.into(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Never fails: transport errors, timeouts, non-2xx statuses, and
    /// malformed bodies all become an abstention.
    pub fn classify_request(&self, request: &ExternalRequest<'_>) -> ExternalOutcome {
        let verdict = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .and_then(|resp| resp.into_body().read_json::<ExternalVerdict>());
        match verdict {
            Ok(v) => ExternalOutcome {
                vote: v.polarity().into(),
                verdict: Some(v),
            },
            Err(e) => {
                log::warn!("external classifier {}: abstaining: {e}", self.endpoint);
                ExternalOutcome::abstain()
            }
        }
    }

    pub fn classify(&self, text: &str) -> ExternalOutcome {
        self.classify_request(&ExternalRequest {
            text: Some(text),
            features: None,
        })
    }

    pub fn classify_features(&self, features: &[f64]) -> ExternalOutcome {
        self.classify_request(&ExternalRequest {
            text: None,
            features: Some(features),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned body per connection after an optional delay.
    fn serve(responses: Vec<(u64, &'static str, &'static str)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (delay_ms, status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut req = vec![0; len];
                let _ = reader.read_exact(&mut req);
                std::thread::sleep(Duration::from_millis(delay_ms));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        format!("http://{addr}/classify")
    }

    #[test]
    fn mapping_is_total() {
        for (raw, neg) in [
            (RawClass::Negative, true),
            (RawClass::Neutral, false),
            (RawClass::Positive, false),
            (RawClass::Mixed, false),
        ] {
            let v = ExternalVerdict { raw_class: raw, score: None };
            assert_eq!(v.polarity().is_negative(), neg);
        }
        let mixed = ExternalVerdict { raw_class: RawClass::Mixed, score: Some(0.1) };
        assert_eq!(mixed.training_polarity(), None);
    }

    #[test]
    fn http_round_trip() {
        let url = serve(vec![
            (0, "200 OK", r#"{"class":"negative","score":-0.8}"#),
            (0, "200 OK", r#"{"class":"neutral"}"#),
            (0, "200 OK", r#"{"label":"what"}"#),
            (0, "500 Internal Server Error", r#"{"class":"negative"}"#),
            (800, "200 OK", r#"{"class":"negative"}"#),
        ]);
        let c = ExternalClassifier::with_timeout(url, Duration::from_millis(300));
        let first = c.classify("this is terrible");
        assert_eq!(first.vote, Vote::Negative);
        assert_eq!(first.verdict.unwrap().score, Some(-0.8));
        assert_eq!(c.classify("ok").vote, Vote::Nonnegative);
        assert_eq!(c.classify("malformed").vote, Vote::Abstain);
        assert_eq!(c.classify("server error").vote, Vote::Abstain);
        assert_eq!(c.classify_features(&[1.0, 2.0]).vote, Vote::Abstain);
    }

    #[test]
    fn unreachable_abstains() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let c = ExternalClassifier::with_timeout(format!("http://{addr}/"), Duration::from_millis(300));
        assert_eq!(c.classify("x").vote, Vote::Abstain);
    }

    #[test]
    fn request_shape() {
        let r = ExternalRequest { text: Some("hi"), features: None };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"text":"hi"}"#);
    }
}
