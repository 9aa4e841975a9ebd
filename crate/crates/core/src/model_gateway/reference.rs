use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LayeredEmbeddings, Model, ModelInfo, PredictionVector};
use crate::error::{Error, Result};
use crate::lexicon::{lexicon_error, BUILTIN_REFERENCE_WEIGHTS};
use crate::text_prep::tokenize;

pub const DEFAULT_NUM_LAYERS: usize = 4;
pub const DEFAULT_EMBED_DIM: usize = 32;
/// Tokens longer than this many characters are split into two wordpieces.
pub const SPLIT_ABOVE_CHARS: usize = 6;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Deterministic pseudo-feature in `[-1, 1]` for a wordpiece and component.
pub fn ref_hash_feature(piece: &str, component: usize) -> f64 {
    let key = format!("{piece}:{component}");
    let bucket = (fnv1a_64(key.as_bytes()) % 2001) as i64;
    (bucket - 1000) as f64 / 1000.0
}

/// On-disk form of the reference model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceWeights {
    pub classes: Vec<String>,
    pub bias: Vec<f64>,
    pub weights: HashMap<String, Vec<f64>>,
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    #[serde(default = "default_dim")]
    pub embed_dim: usize,
}

fn default_layers() -> usize {
    DEFAULT_NUM_LAYERS
}

fn default_dim() -> usize {
    DEFAULT_EMBED_DIM
}

/// Bag-of-words linear classifier with synthetic layered embeddings.
///
/// Logits are the bias plus the sum of per-token weight vectors (lowercased
/// lookup, unknown tokens weigh zero). The embedding of a piece at layer
/// `l` (1-based, of `L`) is a hash feature in its first `dim - |C|`
/// components and `(l / L) * w(token)` in the trailing `|C|` ones, so tokens
/// with similar class weights end up close together.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    info: ModelInfo,
    bias: Vec<f64>,
    weights: HashMap<String, Vec<f64>>,
}

impl ReferenceModel {
    pub fn new(weights: ReferenceWeights) -> Result<Self> {
        let info = ModelInfo::new(weights.classes, weights.num_layers, weights.embed_dim)
            .map_err(|e| Error::BadConfig(e.to_string()))?;
        let c = info.num_classes();
        if info.embed_dim < c {
            return Err(Error::BadConfig(format!(
                "embed_dim {} is smaller than the class count {c}",
                info.embed_dim
            )));
        }
        if weights.bias.len() != c {
            return Err(Error::BadConfig(format!(
                "bias has {} entries for {c} classes",
                weights.bias.len()
            )));
        }
        let mut table = HashMap::with_capacity(weights.weights.len());
        for (token, w) in weights.weights {
            if w.len() != c || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadConfig(format!(
                    "weight vector for `{token}` must hold {c} finite values"
                )));
            }
            table.insert(token.to_lowercase(), w);
        }
        Ok(Self {
            info,
            bias: weights.bias,
            weights: table,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let weights: ReferenceWeights =
            serde_json::from_str(json).map_err(|e| Error::BadConfig(e.to_string()))?;
        Self::new(weights)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| lexicon_error(path, e.to_string()))?;
        Self::from_json_str(&json)
    }

    /// The sentiment model shipped in `data/reference_weights.json`.
    pub fn builtin() -> Self {
        Self::from_json_str(BUILTIN_REFERENCE_WEIGHTS).expect("builtin reference weights")
    }

    /// Convenience constructor for the two-class sentiment setup.
    pub fn sentiment<I, S>(weights: I) -> Self
    where
        I: IntoIterator<Item = (S, [f64; 2])>,
        S: Into<String>,
    {
        Self::new(ReferenceWeights {
            classes: vec!["neg".into(), "pos".into()],
            bias: vec![0.0, 0.0],
            weights: weights
                .into_iter()
                .map(|(k, v)| (k.into(), v.to_vec()))
                .collect(),
            num_layers: DEFAULT_NUM_LAYERS,
            embed_dim: DEFAULT_EMBED_DIM,
        })
        .expect("valid sentiment weights")
    }

    fn weight(&self, token: &str) -> Option<&[f64]> {
        self.weights.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    pub fn logits(&self, text: &str) -> Vec<f64> {
        let mut logits = self.bias.clone();
        for tok in tokenize(text) {
            if let Some(w) = self.weight(&tok.text) {
                for (l, wi) in logits.iter_mut().zip(w) {
                    *l += wi;
                }
            }
        }
        logits
    }
}

fn split_pieces(token: &str) -> Vec<String> {
    let n = token.chars().count();
    if n <= SPLIT_ABOVE_CHARS {
        return vec![token.to_string()];
    }
    let head_len = n.div_ceil(2);
    let head: String = token.chars().take(head_len).collect();
    let tail: String = token.chars().skip(head_len).collect();
    vec![head, format!("##{tail}")]
}

impl Model for ReferenceModel {
    fn info(&self) -> Result<ModelInfo> {
        Ok(self.info.clone())
    }

    fn predict(&self, text: &str) -> Result<PredictionVector> {
        Ok(PredictionVector::softmax(&self.logits(text)))
    }

    fn embed(&self, text: &str) -> Result<LayeredEmbeddings> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut pieces = Vec::new();
        let mut piece_to_token = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            for piece in split_pieces(&tok.text) {
                pieces.push(piece);
                piece_to_token.push(i);
            }
        }

        let c = self.info.num_classes();
        let dim = self.info.embed_dim;
        let num_layers = self.info.num_layers;
        let hashed = dim - c;
        let zero = vec![0.0; c];

        let noise = DMatrix::from_fn(pieces.len(), hashed, |r, k| {
            ref_hash_feature(&pieces[r], k)
        });
        let layers = (1..=num_layers)
            .map(|layer| {
                let scale = layer as f64 / num_layers as f64;
                DMatrix::from_fn(pieces.len(), dim, |r, k| {
                    if k < hashed {
                        noise[(r, k)]
                    } else {
                        let w = self
                            .weight(&tokens[piece_to_token[r]].text)
                            .unwrap_or(&zero);
                        scale * w[k - hashed]
                    }
                })
            })
            .collect();

        Ok(LayeredEmbeddings {
            pieces,
            piece_to_token,
            tokens: tokens.into_iter().map(|t| t.text).collect(),
            layers,
        })
    }
}
