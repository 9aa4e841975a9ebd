//! Uniform access to black-box classifiers.
//!
//! A [`Model`] answers three questions: which classes it predicts, the class
//! probabilities for a text, and per-wordpiece embeddings from each of its
//! exported layers. [`ReferenceModel`] is a deterministic in-process model
//! and [`ExternalModel`] talks to any child process that speaks the
//! newline-delimited JSON protocol in [`protocol`].

mod external;
pub mod protocol;
mod reference;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use external::ExternalModel;
pub use reference::{fnv1a_64, ref_hash_feature, ReferenceModel, ReferenceWeights};

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub class_names: Vec<String>,
    pub num_layers: usize,
    pub embed_dim: usize,
}

impl ModelInfo {
    pub fn new(class_names: Vec<String>, num_layers: usize, embed_dim: usize) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::ProtocolViolation(format!(
                "a classifier needs at least two classes, got {}",
                class_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return Err(Error::ProtocolViolation(format!(
                    "class names must be unique and non-empty: {class_names:?}"
                )));
            }
        }
        if num_layers == 0 || embed_dim == 0 {
            return Err(Error::ProtocolViolation(
                "num_layers and embed_dim must be positive".into(),
            ));
        }
        Ok(Self {
            class_names,
            num_layers,
            embed_dim,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Class probabilities for one input text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionVector {
    probs: Vec<f64>,
}

impl PredictionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::ProtocolViolation(format!(
                "probabilities must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::ProtocolViolation(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Numerically stable softmax.
    pub fn softmax(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Self {
            probs: exps.into_iter().map(|e| e / total).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.probs[class]
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-wordpiece embeddings for every exported layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredEmbeddings {
    pub pieces: Vec<String>,
    /// Index of the model token each piece belongs to.
    pub piece_to_token: Vec<usize>,
    /// The model's own word tokens; may be empty when the model does not
    /// report them.
    pub tokens: Vec<String>,
    /// One `(pieces x dim)` matrix per layer.
    pub layers: Vec<DMatrix<f64>>,
}

impl LayeredEmbeddings {
    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.piece_to_token.last().map_or(0, |t| t + 1)
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, DMatrix::ncols)
    }

    pub fn validate(&self) -> Result<()> {
        let violation = |msg: String| Err(Error::ProtocolViolation(msg));
        let wp = self.pieces.len();
        if wp == 0 {
            return violation("embedding has no pieces".into());
        }
        if self.piece_to_token.len() != wp {
            return violation(format!(
                "piece_to_token has {} entries for {wp} pieces",
                self.piece_to_token.len()
            ));
        }
        let mut expected_next = 0;
        for &t in &self.piece_to_token {
            if t != expected_next && t + 1 != expected_next {
                return violation(format!(
                    "piece_to_token must be non-decreasing and gap-free: {:?}",
                    self.piece_to_token
                ));
            }
            expected_next = t + 1;
        }
        if self.piece_to_token[0] != 0 {
            return violation("piece_to_token must start at token 0".into());
        }
        if !self.tokens.is_empty() && self.tokens.len() != self.num_tokens() {
            return violation(format!(
                "{} tokens reported but pieces cover {}",
                self.tokens.len(),
                self.num_tokens()
            ));
        }
        if self.layers.is_empty() {
            return violation("embedding has no layers".into());
        }
        let dim = self.dim();
        if dim == 0 {
            return violation("embedding dimension is zero".into());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.nrows() != wp || layer.ncols() != dim {
                return violation(format!(
                    "layer {i} has shape {}x{}, expected {wp}x{dim}",
                    layer.nrows(),
                    layer.ncols()
                ));
            }
            if layer.iter().any(|v| !v.is_finite()) {
                return violation(format!("layer {i} contains non-finite values"));
            }
        }
        Ok(())
    }
}

/// A black-box text classifier.
///
/// Implementations must be shareable across threads; calls may be issued
/// concurrently.
pub trait Model: Send + Sync {
    fn info(&self) -> Result<ModelInfo>;

    fn predict(&self, text: &str) -> Result<PredictionVector>;

    /// Scores several texts, returning results in input order.
    fn predict_batch(&self, texts: &[String]) -> Result<Vec<PredictionVector>> {
        texts.iter().map(|t| self.predict(t)).collect()
    }

    fn embed(&self, text: &str) -> Result<LayeredEmbeddings>;
}

/// How to reach a model: the builtin reference weights, a weights file, or
/// an external command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    ReferenceBuiltin,
    Reference(PathBuf),
    Command(String),
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ref" || s == "ref:" {
            return Ok(ModelSpec::ReferenceBuiltin);
        }
        if let Some(path) = s.strip_prefix("ref:") {
            return Ok(ModelSpec::Reference(PathBuf::from(path)));
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err(Error::BadConfig("empty model command".into()));
            }
            return Ok(ModelSpec::Command(cmd.to_string()));
        }
        Err(Error::BadConfig(format!(
            "model spec `{s}` must look like `ref`, `ref:<weights.json>` or `cmd:<command line>`"
        )))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::ReferenceBuiltin => f.write_str("ref"),
            ModelSpec::Reference(p) => write!(f, "ref:{}", p.display()),
            ModelSpec::Command(c) => write!(f, "cmd:{c}"),
        }
    }
}

impl ModelSpec {
    pub fn open(&self) -> Result<Box<dyn Model>> {
        Ok(match self {
            ModelSpec::ReferenceBuiltin => Box::new(ReferenceModel::builtin()),
            ModelSpec::Reference(path) => Box::new(ReferenceModel::load(path)?),
            ModelSpec::Command(cmd) => Box::new(ExternalModel::spawn(cmd)?),
        })
    }
}
