//! Client for the embedding sidecar.
//!
//! `POST {endpoint}/embed` with `{"model", "texts"}` answers
//! `{"model", "dim", "vectors"}`; `GET {endpoint}/health` answers
//! `{"status", "models"}`. Non-200 responses are retryable transport errors.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ProviderKind;
use crate::error::{Error, Result};

/// Environment variable consulted for the default endpoint.
pub const ENDPOINT_ENV: &str = "SENTIPIPE_ENDPOINT";

#[derive(Clone, Debug)]
pub struct SidecarOptions {
    /// Texts per request.
    pub batch_size: usize,
    /// Upper bound on concurrent requests.
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub timeout: Duration,
    pub retry_backoff: Duration,
}

impl Default for SidecarOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_in_flight: 4,
            max_attempts: 3,
            timeout: Duration::from_secs(60),
            retry_backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    model: String,
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub status: String,
    pub models: Vec<String>,
}

pub struct SidecarClient {
    endpoint: String,
    model: ProviderKind,
    dim: usize,
    options: SidecarOptions,
    agent: ureq::Agent,
}

impl SidecarClient {
    pub fn new(endpoint: impl Into<String>, model: ProviderKind, dim: usize, options: SidecarOptions) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            model,
            dim,
            options,
            agent,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn health(&self) -> Result<Health> {
        let url = format!("{}/health", self.endpoint);
        self.with_retries(|| {
            let mut resp = self.agent.get(&url).call().map_err(transport)?;
            check_status(resp.status().as_u16())?;
            resp.body_mut()
                .read_json::<Health>()
                .map_err(|e| Error::format(url.as_str(), 0, e.to_string()))
        })
    }

    /// Embeds `texts` in request-sized chunks with at most `max_in_flight`
    /// concurrent requests. Row order always matches `texts`.
    pub fn embed(&self, texts: &[&str]) -> Result<Array2<f64>> {
        let chunks: Vec<&[&str]> = texts.chunks(self.options.batch_size.max(1)).collect();
        let results: Vec<Mutex<Option<Result<Vec<Vec<f64>>>>>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.options.max_in_flight.clamp(1, chunks.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= chunks.len() {
                        break;
                    }
                    let r = self.with_retries(|| self.post_chunk(chunks[i]));
                    *results[i].lock().unwrap() = Some(r);
                });
            }
        });
        let mut out = Array2::zeros((texts.len(), self.dim));
        let mut row = 0;
        for slot in results {
            let vectors = slot.into_inner().unwrap().expect("every chunk processed")?;
            for v in vectors {
                out.row_mut(row).assign(&ndarray::ArrayView1::from(&v));
                row += 1;
            }
        }
        Ok(out)
    }

    fn post_chunk(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embed", self.endpoint);
        let body = EmbedRequest {
            model: self.model.as_str(),
            texts,
        };
        let mut resp = self.agent.post(&url).send_json(&body).map_err(transport)?;
        check_status(resp.status().as_u16())?;
        let parsed: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::format(url.as_str(), 0, e.to_string()))?;
        if parsed.model != self.model.as_str() {
            return Err(Error::format(
                url.as_str(),
                0,
                format!("asked for model `{}`, got `{}`", self.model, parsed.model),
            ));
        }
        if parsed.dim != self.dim {
            return Err(Error::Config(format!(
                "sidecar reports dim {} for `{}` but {} was configured",
                parsed.dim, self.model, self.dim
            )));
        }
        if parsed.vectors.len() != texts.len() {
            return Err(Error::format(
                url.as_str(),
                0,
                format!("sent {} texts, received {} vectors", texts.len(), parsed.vectors.len()),
            ));
        }
        if let Some(i) = parsed.vectors.iter().position(|v| v.len() != self.dim) {
            return Err(Error::Config(format!(
                "vector {i} has length {}, expected {}",
                parsed.vectors[i].len(),
                self.dim
            )));
        }
        Ok(parsed.vectors)
    }

    fn with_retries<T>(&self, mut attempt: impl FnMut() -> Result<T>) -> Result<T> {
        let max = self.options.max_attempts.max(1);
        let mut tries = 0;
        loop {
            tries += 1;
            match attempt() {
                Err(Error::Transport { message, .. }) if tries < max => {
                    log::warn!("sidecar attempt {tries}/{max} failed: {message}");
                    std::thread::sleep(self.options.retry_backoff * tries);
                }
                Err(Error::Transport { message, .. }) => {
                    return Err(Error::Transport {
                        attempts: tries,
                        message,
                    })
                }
                other => return other,
            }
        }
    }
}

fn transport(e: ureq::Error) -> Error {
    Error::Transport {
        attempts: 1,
        message: e.to_string(),
    }
}

fn check_status(status: u16) -> Result<()> {
    if status == 200 {
        Ok(())
    } else {
        Err(Error::Transport {
            attempts: 1,
            message: format!("HTTP status {status}"),
        })
    }
}
