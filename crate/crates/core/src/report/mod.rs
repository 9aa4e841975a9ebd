//! Machine-readable JSON and static HTML renderings of explanations.

mod canonical;
mod html;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{ClusterRef, FeatureMethod};
use crate::global_explainer::{ClusterEvidence, CorpusDocument, GlobalScores};
use crate::local_explainer::{ExplainConfig, ExplanationSet, LocalExplanation, MlweMeta};
use crate::perturbation::{PerturbationKind, Replacement};
use crate::text_prep::PosTag;

pub use canonical::{round6, to_canonical_json, FLOAT_DECIMALS};
pub use html::render_local_html;

pub const SCHEMA_VERSION: &str = "1";
pub const DEFAULT_TOP_N: usize = 50;
pub const LEMMA_COUNTING: &str = "per_occurrence";

pub fn local_json_name(document_id: &str) -> String {
    format!("{document_id}.explanation.json")
}

pub fn local_html_name(document_id: &str) -> String {
    format!("{document_id}.explanation.html")
}

pub const GLOBAL_JSON_NAME: &str = "global.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub position: usize,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub pos: PosTag,
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureToken {
    pub position: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub label: String,
    pub method: FeatureMethod,
    pub parent_labels: Vec<String>,
    pub cluster: Option<ClusterRef>,
    pub tokens: Vec<FeatureToken>,
    pub perturbation: PerturbationKind,
    pub perturbed_text: String,
    pub replacements: Vec<Replacement>,
    pub p_original: Vec<f64>,
    pub p_perturbed: Vec<f64>,
    pub label_original: usize,
    pub label_perturbed: usize,
    pub npir: Vec<f64>,
    pub informative: bool,
}

impl ExplanationRecord {
    fn from_explanation(e: &LocalExplanation, set: &ExplanationSet) -> Self {
        let round = |v: &[f64]| v.iter().copied().map(round6).collect::<Vec<_>>();
        Self {
            label: e.feature.label.clone(),
            method: e.feature.method,
            parent_labels: e.feature.parent_labels.clone(),
            cluster: e.feature.cluster,
            tokens: e
                .feature
                .token_positions
                .iter()
                .map(|&p| FeatureToken {
                    position: p,
                    text: set.tokens[p].text.clone(),
                })
                .collect(),
            perturbation: e.kind,
            perturbed_text: e.perturbed_text.clone(),
            replacements: e.replaced.clone(),
            p_original: round(e.p_original.probs()),
            p_perturbed: round(e.p_perturbed.probs()),
            label_original: e.label_original,
            label_perturbed: e.label_perturbed,
            npir: round(&e.npir),
            informative: e.informative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodExplanations {
    pub pos: Vec<ExplanationRecord>,
    pub sentence: Vec<ExplanationRecord>,
    pub mlwe: Vec<ExplanationRecord>,
}

impl MethodExplanations {
    pub fn all(&self) -> impl Iterator<Item = &ExplanationRecord> {
        self.pos.iter().chain(&self.sentence).chain(&self.mlwe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalReport {
    pub schema_version: String,
    pub document_id: String,
    pub original_text: String,
    pub class_names: Vec<String>,
    pub prediction: Vec<f64>,
    pub predicted_label: usize,
    pub class_of_interest: usize,
    pub tokens: Vec<TokenRecord>,
    pub explanations: MethodExplanations,
    pub mlwe_meta: Option<MlweMeta>,
    pub config: ExplainConfig,
}

impl LocalReport {
    pub fn new(set: &ExplanationSet, config: &ExplainConfig) -> Self {
        let records = |list: &[LocalExplanation]| {
            list.iter()
                .map(|e| ExplanationRecord::from_explanation(e, set))
                .collect()
        };
        let mlwe_meta = set.mlwe_meta.clone().map(|mut m| {
            for s in &mut m.k_scores {
                s.score = round6(s.score);
            }
            m
        });
        let mut config = config.clone();
        config.threshold = round6(config.threshold);
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            document_id: set.document_id.clone(),
            original_text: set.text.clone(),
            class_names: set.class_names.clone(),
            prediction: set.prediction.probs().iter().copied().map(round6).collect(),
            predicted_label: set.predicted_label,
            class_of_interest: set.class_of_interest,
            tokens: set
                .tokens
                .iter()
                .map(|t| TokenRecord {
                    position: t.position,
                    text: t.text.clone(),
                    start: t.char_span.0,
                    end: t.char_span.1,
                    pos: t.pos,
                    lemma: t.lemma.clone(),
                })
                .collect(),
            explanations: MethodExplanations {
                pos: records(&set.pos),
                sentence: records(&set.sentence),
                mlwe: records(&set.mlwe),
            },
            mlwe_meta,
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }

    pub fn to_html(&self) -> String {
        render_local_html(self)
    }

    /// Aggregation input built from the persisted single-cluster MLWE
    /// records.
    pub fn corpus_document(&self) -> CorpusDocument {
        let evidence = self
            .explanations
            .mlwe
            .iter()
            .filter_map(|r| {
                let cluster = r.cluster?;
                Some(ClusterEvidence {
                    k: cluster.k,
                    cluster_index: cluster.index,
                    lemmas: r
                        .tokens
                        .iter()
                        .map(|t| {
                            self.tokens
                                .get(t.position)
                                .map_or_else(|| t.text.to_lowercase(), |tok| tok.lemma.clone())
                        })
                        .collect(),
                    npir: r.npir.clone(),
                })
            })
            .collect();
        CorpusDocument {
            document_id: self.document_id.clone(),
            evidence,
        }
    }
}

fn check_schema(value: &Value) -> Result<()> {
    match value.get("schema_version") {
        Some(Value::String(v)) if v == SCHEMA_VERSION => Ok(()),
        Some(Value::String(v)) => Err(Error::SchemaVersion {
            found: v.clone(),
            expected: SCHEMA_VERSION.to_string(),
        }),
        Some(other) => Err(Error::SchemaVersion {
            found: other.to_string(),
            expected: SCHEMA_VERSION.to_string(),
        }),
        None => Err(Error::MalformedReport("missing schema_version".into())),
    }
}

fn parse_versioned<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T> {
    let value: Value = serde_json::from_str(json).map_err(|e| Error::MalformedReport(e.to_string()))?;
    check_schema(&value)?;
    serde_json::from_value(value).map_err(|e| Error::MalformedReport(e.to_string()))
}

pub fn parse_local(json: &str) -> Result<LocalReport> {
    parse_versioned(json)
}

pub fn parse_global(json: &str) -> Result<GlobalReport> {
    parse_versioned(json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaEntry {
    pub lemma: String,
    pub gai: f64,
    pub gri: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLemmas {
    pub class: String,
    /// Every lemma with a GAI entry, by GAI descending then lemma.
    pub lemmas: Vec<LemmaEntry>,
    /// First `top_n` entries by GAI.
    pub top_gai: Vec<LemmaEntry>,
    /// First `top_n` entries by GRI.
    pub top_gri: Vec<LemmaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub schema_version: String,
    pub class_names: Vec<String>,
    pub corpus_size: usize,
    pub skipped_documents: usize,
    pub lemma_counting: String,
    pub top_n: usize,
    pub classes: Vec<ClassLemmas>,
}

fn by_score<'a>(key: impl Fn(&LemmaEntry) -> f64 + 'a) -> impl Fn(&LemmaEntry, &LemmaEntry) -> Ordering + 'a {
    move |a, b| key(b).total_cmp(&key(a)).then_with(|| a.lemma.cmp(&b.lemma))
}

impl GlobalReport {
    pub fn new(scores: &GlobalScores, top_n: usize) -> Self {
        let classes = scores
            .class_names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let mut lemmas: Vec<LemmaEntry> = scores.gai[c]
                    .iter()
                    .map(|(lemma, gai)| LemmaEntry {
                        lemma: lemma.clone(),
                        gai: round6(*gai),
                        gri: round6(scores.gri[c].get(lemma).copied().unwrap_or(0.0)),
                    })
                    .collect();
                lemmas.sort_by(by_score(|e| e.gai));
                let top_gai = lemmas.iter().take(top_n).cloned().collect();
                let mut by_gri = lemmas.clone();
                by_gri.sort_by(by_score(|e| e.gri));
                by_gri.truncate(top_n);
                ClassLemmas {
                    class: name.clone(),
                    lemmas,
                    top_gai,
                    top_gri: by_gri,
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            class_names: scores.class_names.clone(),
            corpus_size: scores.corpus_size,
            skipped_documents: scores.skipped_documents,
            lemma_counting: LEMMA_COUNTING.to_string(),
            top_n,
            classes,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }
}
