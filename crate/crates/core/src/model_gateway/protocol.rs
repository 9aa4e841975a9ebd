//! Newline-delimited JSON protocol spoken by external models.
//!
//! ```text
//! -> {"id": 1, "op": "info"}
//! <- {"id": 1, "classes": ["neg", "pos"], "num_layers": 4, "embed_dim": 768}
//! -> {"id": 2, "op": "predict", "text": "..."}
//! <- {"id": 2, "probabilities": [0.98, 0.02]}
//! -> {"id": 3, "op": "embed", "text": "..."}
//! <- {"id": 3, "pieces": [...], "piece_to_token": [...], "tokens": [...], "layers": [[[...]]]}
//! <- {"id": 4, "error": "message"}
//! ```
//!
//! `layers` is nested layer-major, then piece, then component.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{LayeredEmbeddings, Model, ModelInfo, PredictionVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RequestBody {
    Info,
    Predict { text: String },
    Embed { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoReply {
    pub id: u64,
    pub classes: Vec<String>,
    pub num_layers: usize,
    pub embed_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReply {
    pub id: u64,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedReply {
    pub id: u64,
    pub pieces: Vec<String>,
    pub piece_to_token: Vec<usize>,
    #[serde(default)]
    pub tokens: Vec<String>,
    pub layers: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub id: u64,
    pub error: String,
}

/// Reads the `id` of a reply line, if it has one.
pub fn reply_id(value: &Value) -> Option<u64> {
    value.get("id").and_then(Value::as_u64)
}

/// Turns an explicit `{"error": ...}` reply into an error.
pub fn check_error(value: &Value) -> Result<()> {
    match value.get("error") {
        Some(Value::String(msg)) => Err(Error::ModelError(msg.clone())),
        Some(other) => Err(Error::ModelError(other.to_string())),
        None => Ok(()),
    }
}

fn decode<T: serde::de::DeserializeOwned>(value: Value, what: &str) -> Result<T> {
    check_error(&value)?;
    serde_json::from_value(value)
        .map_err(|e| Error::ProtocolViolation(format!("malformed {what} reply: {e}")))
}

pub fn decode_info(value: Value) -> Result<ModelInfo> {
    let reply: InfoReply = decode(value, "info")?;
    ModelInfo::new(reply.classes, reply.num_layers, reply.embed_dim)
}

pub fn decode_predict(value: Value, num_classes: Option<usize>) -> Result<PredictionVector> {
    let reply: PredictReply = decode(value, "predict")?;
    if let Some(c) = num_classes {
        if reply.probabilities.len() != c {
            return Err(Error::ProtocolViolation(format!(
                "expected {c} probabilities, got {}",
                reply.probabilities.len()
            )));
        }
    }
    PredictionVector::new(reply.probabilities)
}

pub fn decode_embed(value: Value) -> Result<LayeredEmbeddings> {
    let reply: EmbedReply = decode(value, "embed")?;
    let wp = reply.pieces.len();
    let mut layers = Vec::with_capacity(reply.layers.len());
    for (i, layer) in reply.layers.iter().enumerate() {
        if layer.len() != wp {
            return Err(Error::ProtocolViolation(format!(
                "layer {i} has {} rows for {wp} pieces",
                layer.len()
            )));
        }
        let dim = layer.first().map_or(0, Vec::len);
        if layer.iter().any(|row| row.len() != dim) {
            return Err(Error::ProtocolViolation(format!("layer {i} is ragged")));
        }
        layers.push(DMatrix::from_fn(wp, dim, |r, c| layer[r][c]));
    }
    let emb = LayeredEmbeddings {
        pieces: reply.pieces,
        piece_to_token: reply.piece_to_token,
        tokens: reply.tokens,
        layers,
    };
    emb.validate()?;
    Ok(emb)
}

pub fn encode_embed(id: u64, emb: &LayeredEmbeddings) -> EmbedReply {
    EmbedReply {
        id,
        pieces: emb.pieces.clone(),
        piece_to_token: emb.piece_to_token.clone(),
        tokens: emb.tokens.clone(),
        layers: emb
            .layers
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|r| m.row(r).iter().copied().collect())
                    .collect()
            })
            .collect(),
    }
}

/// Answers one request line with one reply line.
pub fn answer(model: &dyn Model, line: &str) -> String {
    let request: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .as_ref()
                .and_then(reply_id)
                .unwrap_or(0);
            return error_line(id, &format!("malformed request: {e}"));
        }
    };
    let id = request.id;
    let reply = match request.body {
        RequestBody::Info => model.info().map(|info| {
            serde_json::to_string(&InfoReply {
                id,
                classes: info.class_names,
                num_layers: info.num_layers,
                embed_dim: info.embed_dim,
            })
        }),
        RequestBody::Predict { text } => model.predict(&text).map(|p| {
            serde_json::to_string(&PredictReply {
                id,
                probabilities: p.probs().to_vec(),
            })
        }),
        RequestBody::Embed { text } => model
            .embed(&text)
            .map(|e| serde_json::to_string(&encode_embed(id, &e))),
    };
    match reply {
        Ok(Ok(line)) => line,
        Ok(Err(e)) => error_line(id, &e.to_string()),
        Err(e) => error_line(id, &e.to_string()),
    }
}

fn error_line(id: u64, message: &str) -> String {
    serde_json::to_string(&ErrorReply {
        id,
        error: message.to_string(),
    })
    .expect("error reply serializes")
}

/// Serves `model` over the protocol until `input` is exhausted.
pub fn serve<R: BufRead, W: Write>(model: &dyn Model, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", answer(model, &line))?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_gateway::ReferenceModel;
    use serde_json::json;

    fn model() -> ReferenceModel {
        ReferenceModel::sentiment([("awful", [2.0, -2.0])])
    }

    #[test]
    fn request_wire_format() {
        let r = Request {
            id: 7,
            body: RequestBody::Predict {
                text: "hi".into(),
            },
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":7,"op":"predict","text":"hi"}"#
        );
        let info = Request {
            id: 1,
            body: RequestBody::Info,
        };
        assert_eq!(serde_json::to_string(&info).unwrap(), r#"{"id":1,"op":"info"}"#);
    }

    #[test]
    fn serve_answers_each_line_with_matching_id() {
        let input = concat!(
            r#"{"id":3,"op":"info"}"#,
            "\n",
            r#"{"id":9,"op":"predict","text":"awful"}"#,
            "\n",
            r#"{"id":11,"op":"embed","text":"awful film"}"#,
            "\n",
            r#"{"id":12,"op":"embed","text":""}"#,
            "\n",
            "not json\n",
            r#"{"id":5,"op":"dance"}"#,
            "\n"
        );
        let mut out = Vec::new();
        serve(&model(), input.as_bytes(), &mut out).unwrap();
        let replies: Vec<Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(replies.len(), 6);
        let ids: Vec<_> = replies.iter().map(|r| reply_id(r).unwrap()).collect();
        assert_eq!(ids, [3, 9, 11, 12, 0, 5]);

        let info = decode_info(replies[0].clone()).unwrap();
        assert_eq!(info.embed_dim, 32);
        let p = decode_predict(replies[1].clone(), Some(2)).unwrap();
        assert!(p.get(0) > 0.98);
        let e = decode_embed(replies[2].clone()).unwrap();
        assert_eq!(e.tokens, ["awful", "film"]);
        assert_eq!(e, model().embed("awful film").unwrap());
        for r in &replies[3..] {
            assert!(r.get("error").is_some());
        }
    }

    #[test]
    fn error_reply_surfaces_message() {
        let err = decode_predict(json!({"id": 1, "error": "boom"}), None).unwrap_err();
        assert!(matches!(err, Error::ModelError(m) if m == "boom"));
    }

    #[test]
    fn malformed_replies_are_protocol_violations() {
        let bad = [
            json!({"id": 1, "probabilities": "high"}),
            json!({"id": 1, "probabilities": [0.9, 0.9]}),
            json!({"id": 1, "probabilities": [1.0]}),
        ];
        for v in bad {
            assert!(matches!(
                decode_predict(v, Some(2)),
                Err(Error::ProtocolViolation(_))
            ));
        }
        let ragged = json!({
            "id": 1, "pieces": ["a", "b"], "piece_to_token": [0, 1],
            "layers": [[[1.0, 2.0], [3.0]]]
        });
        assert!(matches!(decode_embed(ragged), Err(Error::ProtocolViolation(_))));
        let gap = json!({
            "id": 1, "pieces": ["a", "b"], "piece_to_token": [0, 2],
            "layers": [[[1.0], [3.0]]]
        });
        assert!(matches!(decode_embed(gap), Err(Error::ProtocolViolation(_))));
    }
}
