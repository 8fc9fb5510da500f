//! Remote-teacher client: preference elicitation over an OpenAI-compatible
//! chat endpoint.
//!
//! Each query is a two-stage conversation. The first request sends both
//! rasterized observations with a summary prompt; the second sends the
//! elicitation prompt with the model's own summary spliced in and parses the
//! reply as `0` (first), `1` (second) or `-1` (indifferent). Indifferent
//! verdicts are excluded from training downstream. Verdicts are cached in an
//! append-only JSON-lines file keyed by (pair ids, model name); a cache hit
//! never touches the transport.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use base64::Engine;
use prefnoise_core::envs::{EnvKind, EnvSpec, Trajectory, TrajectoryPair};
use prefnoise_core::teachers::PreferenceLabel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Point-mass raster edge length in pixels; gridworld rasters are one pixel
/// per cell.
pub const POINT_RASTER_SIZE: usize = 64;

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unparseable teacher reply: {raw:?}")]
    Parse { raw: String },
    #[error("verdict and oracle sequences differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("indifferent verdicts must be excluded before measuring noise")]
    IndifferentPresent,
    #[error("cache file {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error("{0}")]
    Render(String),
}

/// Connection settings for the remote teacher.
#[derive(Debug, Clone)]
pub struct RemoteTeacherConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token; requests go out
    /// unauthenticated when it is unset (local endpoints).
    pub api_key_env_var: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub cache_path: PathBuf,
    pub prompt: PromptTemplate,
}

/// Which prompt pair to use; the goal description differs per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptTemplate {
    CartPole,
    Soccer,
}

pub const CARTPOLE_SUMMARY_PROMPT: &str = "1. What is shown in Image 1?\n\n2. What is shown in Image 2?\n\n3. The goal is to balance the brown pole on the black cart to be upright. Are there any differences between Image 1 and Image 2 in terms of achieving the goal?\n\n<Image 1>\n\n<Image 2>";

pub const CARTPOLE_ELICITATION_PROMPT: &str = "Based on the text below to the questions:\n\n1. What is shown in Image 1?\n\n2. What is shown in Image 2?\n\n3. The goal is to balance the brown pole on the black cart to be upright. Are there any differences between Image 1 and Image 2 in terms of achieving the goal?\n\n<Text Summary of Image Observations>\n\nIs the goal better achieved in Image 1 or Image 2?\nReply with a single line of 0 if Image 1 achieves the goal better, or 1 if Image 2 achieves the goal better.\nReply -1 if unsure or there is no difference.";

pub const SOCCER_SUMMARY_PROMPT: &str = "1. What is shown in Image 1?\n\n2. What is shown in Image 2?\n\n3. The goal is to move the soccer ball into the goal. Are there any differences between Image 1 and Image 2 in terms of achieving the goal?\n\n<Image 1>\n\n<Image 2>";

pub const SOCCER_ELICITATION_PROMPT: &str = "Based on the text below to the questions:\n\n1. What is shown in Image 1?\n\n2. What is shown in Image 2?\n\n3. The goal is to move the soccer ball into the goal. Are there any differences between Image 1 and Image 2 in terms of achieving the goal?\n\n<Text Summary of Image Observations>\n\nIs the goal better achieved in Image 1 or Image 2?\nReply a single line of 0 if Image 1 achieves the goal better, or 1 if Image 2 achieves the goal better.\nReply -1 if unsure or there is no difference.";

/// The placeholder in the elicitation prompt that receives the stage-one
/// summary.
pub const SUMMARY_PLACEHOLDER: &str = "<Text Summary of Image Observations>";

impl PromptTemplate {
    pub fn summary_prompt(&self) -> &'static str {
        match self {
            PromptTemplate::CartPole => CARTPOLE_SUMMARY_PROMPT,
            PromptTemplate::Soccer => SOCCER_SUMMARY_PROMPT,
        }
    }

    pub fn elicitation_prompt(&self) -> &'static str {
        match self {
            PromptTemplate::CartPole => CARTPOLE_ELICITATION_PROMPT,
            PromptTemplate::Soccer => SOCCER_ELICITATION_PROMPT,
        }
    }
}

/// Parsed teacher reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictLabel {
    First,
    Second,
    /// Reply of -1: no usable preference; excluded from training.
    Indifferent,
}

impl VerdictLabel {
    pub fn to_preference(self) -> Option<PreferenceLabel> {
        match self {
            VerdictLabel::First => Some(PreferenceLabel::First),
            VerdictLabel::Second => Some(PreferenceLabel::Second),
            VerdictLabel::Indifferent => None,
        }
    }
}

/// One teacher answer with its raw text and wall-clock latency (zero on
/// cache hits).
#[derive(Debug, Clone)]
pub struct RemoteVerdict {
    pub label: VerdictLabel,
    pub raw_response: String,
    pub latency: Duration,
}

/// A single chat round trip. The production implementation posts to
/// `<endpoint>/chat/completions`; tests substitute a scripted mock.
pub trait Transport {
    fn chat(&mut self, body: &serde_json::Value) -> Result<String, RemoteError>;
}

/// Blocking HTTP transport for OpenAI-compatible servers.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    bearer: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &RemoteTeacherConfig) -> Result<Self, RemoteError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| RemoteError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpTransport {
            client,
            url: format!("{}/chat/completions", cfg.endpoint_url.trim_end_matches('/')),
            bearer: std::env::var(&cfg.api_key_env_var).ok(),
        })
    }
}

impl Transport for HttpTransport {
    fn chat(&mut self, body: &serde_json::Value) -> Result<String, RemoteError> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(token) = &self.bearer {
            req = req.bearer_auth(token);
        }
        let response = req.send().map_err(|e| RemoteError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| RemoteError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(RemoteError::Transport {
                attempts: 1,
                message: format!("status {status}: {text}"),
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| RemoteError::Transport {
                attempts: 1,
                message: format!("invalid response json: {e}"),
            })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| RemoteError::Transport {
                attempts: 1,
                message: "response has no choices[0].message.content".into(),
            })
    }
}

/// Scripted transport for tests; pops one canned reply per call, counts
/// calls, and keeps every request body for inspection.
#[derive(Debug, Default)]
pub struct MockTransport {
    pub responses: std::collections::VecDeque<String>,
    pub calls: usize,
    pub requests: Vec<serde_json::Value>,
    /// Transport failures to simulate before answers start flowing.
    pub failures_before_success: u32,
}

impl MockTransport {
    pub fn with_responses<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Self {
        MockTransport {
            responses: items.into_iter().map(Into::into).collect(),
            ..MockTransport::default()
        }
    }

    /// One summary plus one verdict per pair, in order.
    pub fn scripted_verdicts<I: IntoIterator<Item = S>, S: Into<String>>(verdicts: I) -> Self {
        let mut responses = std::collections::VecDeque::new();
        for v in verdicts {
            responses.push_back("summary of both observations".to_string());
            responses.push_back(v.into());
        }
        MockTransport {
            responses,
            ..MockTransport::default()
        }
    }
}

impl Transport for MockTransport {
    fn chat(&mut self, body: &serde_json::Value) -> Result<String, RemoteError> {
        self.calls += 1;
        self.requests.push(body.clone());
        if self.failures_before_success > 0 {
            self.failures_before_success -= 1;
            return Err(RemoteError::Transport {
                attempts: 1,
                message: "simulated outage".into(),
            });
        }
        self.responses.pop_front().ok_or(RemoteError::Transport {
            attempts: 1,
            message: "mock transport exhausted".into(),
        })
    }
}

/// Renders both trajectories of a pair to portable graymaps (P5).
/// Gridworlds map one pixel per cell with the agent's final cell at 255 and
/// the goal at 128; the point mass marks its final position on a 64x64
/// canvas.
pub fn render_pair(spec: &EnvSpec, pair: &TrajectoryPair) -> Result<(Vec<u8>, Vec<u8>), RemoteError> {
    Ok((
        render_trajectory(spec, pair.first())?,
        render_trajectory(spec, pair.second())?,
    ))
}

fn render_trajectory(spec: &EnvSpec, traj: &Trajectory) -> Result<Vec<u8>, RemoteError> {
    let final_state = traj.state(traj.len());
    match spec.kind {
        EnvKind::Gridworld { size } => {
            let denom = (size - 1) as f64;
            let row = (final_state[0] * denom).round() as usize;
            let col = (final_state[1] * denom).round() as usize;
            if row >= size || col >= size {
                return Err(RemoteError::Render(format!(
                    "final state ({}, {}) outside a {size}x{size} grid",
                    final_state[0], final_state[1]
                )));
            }
            let mut pixels = vec![0u8; size * size];
            pixels[size * size - 1] = 128; // goal cell
            pixels[row * size + col] = 255; // agent overrides the goal mark
            Ok(encode_pgm(size, size, &pixels))
        }
        EnvKind::PointMass { half_width } => {
            let n = POINT_RASTER_SIZE;
            let to_pixel = |v: f64| {
                (((v + half_width) / (2.0 * half_width)) * (n - 1) as f64)
                    .round()
                    .clamp(0.0, (n - 1) as f64) as usize
            };
            let (r, c) = (to_pixel(final_state[0]), to_pixel(final_state[1]));
            let mut pixels = vec![0u8; n * n];
            pixels[r * n + c] = 255;
            Ok(encode_pgm(n, n, &pixels))
        }
    }
}

fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn image_part(pgm: &[u8]) -> serde_json::Value {
    let b64 = base64::engine::general_purpose::STANDARD.encode(pgm);
    serde_json::json!({
        "type": "image_url",
        "image_url": {"url": format!("data:image/x-portable-graymap;base64,{b64}")}
    })
}

fn chat_body(model: &str, content: Vec<serde_json::Value>) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "temperature": 0,
        "messages": [{"role": "user", "content": content}]
    })
}

/// Parses a teacher reply: the first non-empty line must be `0`, `1` or
/// `-1`.
pub fn parse_verdict(raw: &str) -> Result<VerdictLabel, RemoteError> {
    let token = raw.lines().map(str::trim).find(|l| !l.is_empty());
    match token {
        Some("0") => Ok(VerdictLabel::First),
        Some("1") => Ok(VerdictLabel::Second),
        Some("-1") => Ok(VerdictLabel::Indifferent),
        _ => Err(RemoteError::Parse { raw: raw.into() }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    first_id: u64,
    second_id: u64,
    model: String,
    label: String,
    raw: String,
}

/// Preference elicitation client with an append-only verdict cache.
pub struct RemoteTeacher {
    cfg: RemoteTeacherConfig,
    cache: HashMap<(u64, u64, String), (VerdictLabel, String)>,
}

impl RemoteTeacher {
    /// Loads any existing cache file; missing files are fine.
    pub fn new(cfg: RemoteTeacherConfig) -> Result<Self, RemoteError> {
        let mut cache = HashMap::new();
        if cfg.cache_path.exists() {
            let file = std::fs::File::open(&cfg.cache_path).map_err(|e| RemoteError::Cache {
                path: cfg.cache_path.clone(),
                message: e.to_string(),
            })?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| RemoteError::Cache {
                    path: cfg.cache_path.clone(),
                    message: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry =
                    serde_json::from_str(&line).map_err(|e| RemoteError::Cache {
                        path: cfg.cache_path.clone(),
                        message: format!("line {}: {e}", i + 1),
                    })?;
                let label = match entry.label.as_str() {
                    "first" => VerdictLabel::First,
                    "second" => VerdictLabel::Second,
                    "indifferent" => VerdictLabel::Indifferent,
                    other => {
                        return Err(RemoteError::Cache {
                            path: cfg.cache_path.clone(),
                            message: format!("line {}: unknown label {other:?}", i + 1),
                        })
                    }
                };
                cache.insert(
                    (entry.first_id, entry.second_id, entry.model),
                    (label, entry.raw),
                );
            }
        }
        Ok(RemoteTeacher { cfg, cache })
    }

    pub fn config(&self) -> &RemoteTeacherConfig {
        &self.cfg
    }

    /// Elicits a preference for one pair: renders both observations, runs
    /// the two-stage prompt, parses the verdict. Cached verdicts skip the
    /// transport entirely. Transport failures are retried up to the
    /// configured budget; parse failures are not retried.
    pub fn query_preference(
        &mut self,
        env: &EnvSpec,
        pair: &TrajectoryPair,
        transport: &mut dyn Transport,
    ) -> Result<RemoteVerdict, RemoteError> {
        let key = (
            pair.first().id(),
            pair.second().id(),
            self.cfg.model_name.clone(),
        );
        if let Some((label, raw)) = self.cache.get(&key) {
            return Ok(RemoteVerdict {
                label: *label,
                raw_response: raw.clone(),
                latency: Duration::ZERO,
            });
        }

        let started = Instant::now();
        let (img1, img2) = render_pair(env, pair)?;
        let summary_body = chat_body(
            &self.cfg.model_name,
            vec![
                serde_json::json!({"type": "text", "text": self.cfg.prompt.summary_prompt()}),
                image_part(&img1),
                image_part(&img2),
            ],
        );
        let summary = self.chat_with_retries(transport, &summary_body)?;

        let elicitation_text = self
            .cfg
            .prompt
            .elicitation_prompt()
            .replace(SUMMARY_PLACEHOLDER, &summary);
        let verdict_body = chat_body(
            &self.cfg.model_name,
            vec![serde_json::json!({"type": "text", "text": elicitation_text})],
        );
        let raw = self.chat_with_retries(transport, &verdict_body)?;
        let label = parse_verdict(&raw)?;

        self.append_cache(&key, label, &raw)?;
        self.cache.insert(key, (label, raw.clone()));
        Ok(RemoteVerdict {
            label,
            raw_response: raw,
            latency: started.elapsed(),
        })
    }

    fn chat_with_retries(
        &self,
        transport: &mut dyn Transport,
        body: &serde_json::Value,
    ) -> Result<String, RemoteError> {
        let mut last = String::new();
        for _attempt in 0..=self.cfg.max_retries {
            match transport.chat(body) {
                Ok(text) => return Ok(text),
                Err(RemoteError::Transport { message, .. }) => last = message,
                Err(other) => return Err(other),
            }
        }
        Err(RemoteError::Transport {
            attempts: self.cfg.max_retries + 1,
            message: last,
        })
    }

    fn append_cache(
        &self,
        key: &(u64, u64, String),
        label: VerdictLabel,
        raw: &str,
    ) -> Result<(), RemoteError> {
        if let Some(dir) = self.cfg.cache_path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| RemoteError::Cache {
                    path: self.cfg.cache_path.clone(),
                    message: e.to_string(),
                })?;
            }
        }
        let entry = CacheEntry {
            first_id: key.0,
            second_id: key.1,
            model: key.2.clone(),
            label: match label {
                VerdictLabel::First => "first".into(),
                VerdictLabel::Second => "second".into(),
                VerdictLabel::Indifferent => "indifferent".into(),
            },
            raw: raw.into(),
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.cfg.cache_path)
            .map_err(|e| RemoteError::Cache {
                path: self.cfg.cache_path.clone(),
                message: e.to_string(),
            })?;
        let line = serde_json::to_string(&entry).map_err(|e| RemoteError::Cache {
            path: self.cfg.cache_path.clone(),
            message: e.to_string(),
        })?;
        writeln!(file, "{line}").map_err(|e| RemoteError::Cache {
            path: self.cfg.cache_path.clone(),
            message: e.to_string(),
        })
    }
}

/// Fraction of verdicts disagreeing with the scripted oracle. Indifferent
/// verdicts must already be excluded; sequences must align.
pub fn measure_noise(
    verdicts: &[RemoteVerdict],
    oracle_labels: &[PreferenceLabel],
) -> Result<f64, RemoteError> {
    if verdicts.len() != oracle_labels.len() {
        return Err(RemoteError::LengthMismatch {
            left: verdicts.len(),
            right: oracle_labels.len(),
        });
    }
    if verdicts
        .iter()
        .any(|v| v.label == VerdictLabel::Indifferent)
    {
        return Err(RemoteError::IndifferentPresent);
    }
    if verdicts.is_empty() {
        return Ok(0.0);
    }
    let disagreements = verdicts
        .iter()
        .zip(oracle_labels.iter())
        .filter(|(v, o)| v.label.to_preference() != Some(**o))
        .count();
    Ok(disagreements as f64 / verdicts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_parsing_contract() {
        assert_eq!(parse_verdict("0").unwrap(), VerdictLabel::First);
        assert_eq!(parse_verdict("1\n").unwrap(), VerdictLabel::Second);
        assert_eq!(parse_verdict("  -1  ").unwrap(), VerdictLabel::Indifferent);
        assert!(matches!(
            parse_verdict("maybe"),
            Err(RemoteError::Parse { .. })
        ));
        assert!(parse_verdict("").is_err());
    }

    #[test]
    fn templates_differ_only_in_goal_and_phrasing() {
        assert!(CARTPOLE_SUMMARY_PROMPT.contains("<Image 1>"));
        assert!(CARTPOLE_SUMMARY_PROMPT.contains("<Image 2>"));
        assert!(CARTPOLE_ELICITATION_PROMPT.contains(SUMMARY_PLACEHOLDER));
        assert!(SOCCER_ELICITATION_PROMPT.contains(SUMMARY_PLACEHOLDER));
        assert!(CARTPOLE_ELICITATION_PROMPT.contains("Reply with a single line of 0"));
        assert!(SOCCER_ELICITATION_PROMPT.contains("Reply a single line of 0"));
    }

    #[test]
    fn pgm_header_and_size() {
        let pgm = encode_pgm(8, 8, &[0u8; 64]);
        assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
        assert_eq!(pgm.len(), "P5\n8 8\n255\n".len() + 64);
    }
}
