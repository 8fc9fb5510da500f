//! Flat parameter files for reward networks and trajectory encoders.
//!
//! The format is a small CSV: one `# key,value...` metadata header line per
//! entry followed by one parameter value per line, full `f64` precision via
//! hex bit patterns alongside a readable decimal.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use prefnoise_core::latent::Encoder;
use prefnoise_core::reward::RewardNet;

use crate::{HarnessError, Result};

fn write_params(
    path: &Path,
    kind: &str,
    meta: &[(&str, String)],
    params: &[f64],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    let mut out = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let meta_str: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "# {kind} {}", meta_str.join(" ")).map_err(|e| HarnessError::io(path, e))?;
    writeln!(out, "bits,value").map_err(|e| HarnessError::io(path, e))?;
    for p in params {
        writeln!(out, "{:016x},{}", p.to_bits(), p).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(())
}

struct ParamFile {
    kind: String,
    meta: std::collections::BTreeMap<String, String>,
    params: Vec<f64>,
}

fn read_params(path: &Path) -> Result<ParamFile> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| HarnessError::io(path, e))?
        .ok_or_else(|| HarnessError::Csv {
            line: 1,
            message: "empty parameter file".into(),
        })?;
    let header = header.strip_prefix("# ").ok_or_else(|| HarnessError::Csv {
        line: 1,
        message: "parameter file must start with '# <kind> ...'".into(),
    })?;
    let mut parts = header.split_whitespace();
    let kind = parts
        .next()
        .ok_or_else(|| HarnessError::Csv {
            line: 1,
            message: "missing kind".into(),
        })?
        .to_string();
    let mut meta = std::collections::BTreeMap::new();
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::Csv {
            line: 1,
            message: format!("bad metadata entry {kv:?}"),
        })?;
        meta.insert(k.to_string(), v.to_string());
    }
    let mut params = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if i == 0 || line.trim().is_empty() {
            continue; // column header
        }
        let bits_str = line.split(',').next().unwrap_or("");
        let bits = u64::from_str_radix(bits_str, 16).map_err(|_| HarnessError::Csv {
            line: i + 3,
            message: format!("bad parameter bits {bits_str:?}"),
        })?;
        params.push(f64::from_bits(bits));
    }
    Ok(ParamFile {
        kind,
        meta,
        params,
    })
}

fn meta_usize(pf: &ParamFile, key: &str) -> Result<usize> {
    pf.meta
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| HarnessError::Csv {
            line: 1,
            message: format!("missing or invalid metadata key {key}"),
        })
}

fn meta_dims(pf: &ParamFile, key: &str) -> Result<Vec<usize>> {
    let raw = pf.meta.get(key).ok_or_else(|| HarnessError::Csv {
        line: 1,
        message: format!("missing metadata key {key}"),
    })?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split('-')
        .map(|d| {
            d.parse().map_err(|_| HarnessError::Csv {
                line: 1,
                message: format!("bad dimension list {raw:?}"),
            })
        })
        .collect()
}

/// Saves a reward network: architecture metadata plus its flat parameters.
pub fn save_reward_net(path: &Path, net: &RewardNet, hidden: &[usize]) -> Result<()> {
    let dims: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
    write_params(
        path,
        "reward_net",
        &[
            ("input_dim", net.input_dim().to_string()),
            ("hidden", dims.join("-")),
        ],
        &net.params(),
    )
}

/// Restores a reward network saved with [`save_reward_net`].
pub fn load_reward_net(path: &Path) -> Result<RewardNet> {
    let pf = read_params(path)?;
    if pf.kind != "reward_net" {
        return Err(HarnessError::Csv {
            line: 1,
            message: format!("expected a reward_net file, found {}", pf.kind),
        });
    }
    let input_dim = meta_usize(&pf, "input_dim")?;
    let hidden = meta_dims(&pf, "hidden")?;
    let mut rng = prefnoise_core::rng::rng_from_seed(0);
    let mut net = RewardNet::with_hidden(input_dim, &hidden, &mut rng);
    net.set_params(&pf.params)
        .map_err(|e| HarnessError::Csv {
            line: 1,
            message: format!("parameter count mismatch: {e}"),
        })?;
    Ok(net)
}

/// Saves an encoder's architecture and flat parameters.
pub fn save_encoder(path: &Path, enc: &Encoder) -> Result<()> {
    let dims: Vec<String> = enc.hidden_dims().iter().map(|h| h.to_string()).collect();
    write_params(
        path,
        "encoder",
        &[
            ("input_dim", enc.input_dim().to_string()),
            ("embedding_dim", enc.embedding_dim().to_string()),
            ("hidden", dims.join("-")),
        ],
        &enc.params(),
    )
}

/// Restores an encoder saved with [`save_encoder`]; the result is marked
/// trained.
pub fn load_encoder(path: &Path) -> Result<Encoder> {
    let pf = read_params(path)?;
    if pf.kind != "encoder" {
        return Err(HarnessError::Csv {
            line: 1,
            message: format!("expected an encoder file, found {}", pf.kind),
        });
    }
    let input_dim = meta_usize(&pf, "input_dim")?;
    let embedding_dim = meta_usize(&pf, "embedding_dim")?;
    let hidden = meta_dims(&pf, "hidden")?;
    Encoder::from_parts(input_dim, embedding_dim, hidden, &pf.params).map_err(|e| {
        HarnessError::Csv {
            line: 1,
            message: format!("cannot rebuild encoder: {e}"),
        }
    })
}
