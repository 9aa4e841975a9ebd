//! Corpus-level lemma influence: GAI and GRI per class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_explainer::ExplanationSet;

/// One MLWE cluster explanation, reduced to what aggregation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvidence {
    pub k: usize,
    pub cluster_index: usize,
    /// Lemma of every token in the cluster, repeats included.
    pub lemmas: Vec<String>,
    /// nPIR for every class.
    pub npir: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub document_id: String,
    pub evidence: Vec<ClusterEvidence>,
}

impl CorpusDocument {
    /// Collects the single-cluster MLWE explanations of `set`; combined
    /// cluster pairs are left out.
    pub fn from_explanation_set(set: &ExplanationSet) -> Self {
        let evidence = set
            .mlwe
            .iter()
            .filter_map(|e| {
                let cluster = e.feature.cluster?;
                Some(ClusterEvidence {
                    k: cluster.k,
                    cluster_index: cluster.index,
                    lemmas: e
                        .feature
                        .token_positions
                        .iter()
                        .map(|&p| set.tokens[p].lemma.clone())
                        .collect(),
                    npir: e.npir.clone(),
                })
            })
            .collect();
        Self {
            document_id: set.document_id.clone(),
            evidence,
        }
    }
}

pub type LemmaScores = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalScores {
    pub class_names: Vec<String>,
    /// Documents that contributed.
    pub corpus_size: usize,
    /// Documents dropped for lacking MLWE explanations.
    pub skipped_documents: usize,
    pub gai: Vec<LemmaScores>,
    pub gri: Vec<LemmaScores>,
}

fn best_for_class(evidence: &[ClusterEvidence], class: usize) -> Option<&ClusterEvidence> {
    evidence.iter().min_by(|a, b| {
        b.npir[class]
            .total_cmp(&a.npir[class])
            .then(a.k.cmp(&b.k))
            .then(a.cluster_index.cmp(&b.cluster_index))
    })
}

fn check_shape(docs: &[CorpusDocument], num_classes: usize) -> Result<()> {
    for d in docs {
        for e in &d.evidence {
            if e.npir.len() != num_classes {
                return Err(Error::MalformedReport(format!(
                    "document {}: cluster K{} c{} has {} nPIR values, expected {num_classes}",
                    d.document_id,
                    e.k,
                    e.cluster_index,
                    e.npir.len()
                )));
            }
        }
    }
    Ok(())
}

/// Global Absolute Influence.
///
/// For every class and document the cluster with the highest nPIR is
/// picked (ties: lower K, then lower cluster index) and `max(0, nPIR)` is
/// added to each of its lemmas, once per occurrence. Documents are visited
/// in id order so sums do not depend on input order. Documents without
/// evidence are ignored; if none has any, the corpus is empty.
pub fn gai(docs: &[CorpusDocument], num_classes: usize) -> Result<Vec<LemmaScores>> {
    check_shape(docs, num_classes)?;
    let mut ordered: Vec<&CorpusDocument> = docs.iter().filter(|d| !d.evidence.is_empty()).collect();
    if ordered.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ordered.sort_by(|a, b| a.document_id.cmp(&b.document_id));

    let mut scores = vec![LemmaScores::new(); num_classes];
    for (class, map) in scores.iter_mut().enumerate() {
        for doc in &ordered {
            let best = best_for_class(&doc.evidence, class).expect("non-empty evidence");
            let gain = best.npir[class].max(0.0);
            for lemma in &best.lemmas {
                *map.entry(lemma.clone()).or_insert(0.0) += gain;
            }
        }
    }
    Ok(scores)
}

/// Global Relative Influence: `max(0, GAI(c, l) - sum of GAI(c', l))` over
/// the other classes `c'`.
pub fn gri(gai: &[LemmaScores]) -> Vec<LemmaScores> {
    gai.iter()
        .enumerate()
        .map(|(c, own)| {
            own.iter()
                .map(|(lemma, score)| {
                    let others: f64 = gai
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != c)
                        .map(|(_, m)| m.get(lemma).copied().unwrap_or(0.0))
                        .sum();
                    (lemma.clone(), (score - others).max(0.0))
                })
                .collect()
        })
        .collect()
}

pub fn global_scores(docs: &[CorpusDocument], class_names: &[String]) -> Result<GlobalScores> {
    let gai = gai(docs, class_names.len())?;
    let gri = gri(&gai);
    let corpus_size = docs.iter().filter(|d| !d.evidence.is_empty()).count();
    Ok(GlobalScores {
        class_names: class_names.to_vec(),
        corpus_size,
        skipped_documents: docs.len() - corpus_size,
        gai,
        gri,
    })
}
