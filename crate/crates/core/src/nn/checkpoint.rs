//! Versioned text checkpoint: a magic line, `meta` key/value lines and
//! `tensor` blocks with shape headers.
//!
//! ```text
//! FES-CKPT-1
//! meta kind rtpnn
//! tensor dense0.w 4x12
//! 0.1 -0.25 ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! reload is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;

pub const MAGIC: &str = "FES-CKPT-1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("bad magic line `{0}`; expected {MAGIC}")]
    BadMagic(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("missing metadata `{0}`")]
    MissingMeta(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let v = value.to_string();
        assert!(!key.contains(char::is_whitespace), "meta key must not contain whitespace");
        assert!(!v.contains('\n'), "meta value must be a single line");
        self.meta.insert(key.to_string(), v);
    }

    pub fn meta(&self, key: &str) -> Result<&str, CheckpointError> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CheckpointError::MissingMeta(key.to_string()))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CheckpointError> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| CheckpointError::Invalid(format!("metadata `{key}` = `{raw}` is malformed")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .get(name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    pub fn insert_store(&mut self, prefix: &str, store: &ParamStore) {
        for (k, t) in store.iter() {
            self.tensors.insert(format!("{prefix}{k}"), t.clone());
        }
    }

    /// Every tensor whose name starts with `prefix`, prefix stripped.
    pub fn extract_store(&self, prefix: &str) -> ParamStore {
        let mut store = ParamStore::new();
        for (k, t) in &self.tensors {
            if let Some(rest) = k.strip_prefix(prefix) {
                store.insert(rest, t.clone());
            }
        }
        store
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "tensor {name} {}", dims.join("x"));
            let vals: Vec<String> = t.data().iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| CheckpointError::BadMagic(String::new()))?;
        if first.trim() != MAGIC {
            return Err(CheckpointError::BadMagic(first.to_string()));
        }
        let mut ckpt = Checkpoint::new();
        let mut ended = false;
        while let Some((i, line)) = lines.next() {
            let lineno = i + 1;
            let parse_err = |msg: String| CheckpointError::Parse { line: lineno, msg };
            if line == "end" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ckpt.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split_whitespace();
                let name = parts.next().ok_or_else(|| parse_err("tensor name missing".into()))?;
                let dims = parts.next().ok_or_else(|| parse_err("tensor shape missing".into()))?;
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(format!("bad shape `{dims}`: {e}")))?;
                let (_, body) = lines
                    .next()
                    .ok_or_else(|| parse_err(format!("tensor `{name}` has no data line")))?;
                let data = body
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(format!("bad value in `{name}`: {e}")))?;
                let t = Tensor::from_shape(shape.clone(), data)
                    .ok_or_else(|| parse_err(format!("data length does not match shape {shape:?}")))?;
                ckpt.tensors.insert(name.to_string(), t);
            } else if !line.trim().is_empty() {
                return Err(parse_err(format!("unexpected line `{line}`")));
            }
        }
        if !ended {
            return Err(CheckpointError::Invalid("truncated checkpoint: no `end` line".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}
