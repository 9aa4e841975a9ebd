//! Interpretable features: groups of token positions whose perturbation
//! probes the model.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_prep::{PosTag, SentenceSpan, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureMethod {
    Pos,
    Sentence,
    Mlwe,
    Combined,
}

impl FeatureMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMethod::Pos => "POS",
            FeatureMethod::Sentence => "SENTENCE",
            FeatureMethod::Mlwe => "MLWE",
            FeatureMethod::Combined => "COMBINED",
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies one cluster of one K-Means partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterRef {
    pub k: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretableFeature {
    pub method: FeatureMethod,
    pub label: String,
    /// Sorted, non-empty token positions.
    pub token_positions: Vec<usize>,
    /// For combined features, the labels of the two source features.
    pub parent_labels: Vec<String>,
    /// Set for MLWE cluster features.
    pub cluster: Option<ClusterRef>,
    /// Method of the parents, for combined features.
    pub parent_method: Option<FeatureMethod>,
}

impl InterpretableFeature {
    pub fn new(method: FeatureMethod, label: impl Into<String>, positions: BTreeSet<usize>) -> Self {
        Self {
            method,
            label: label.into(),
            token_positions: positions.into_iter().collect(),
            parent_labels: Vec::new(),
            cluster: None,
            parent_method: None,
        }
    }

    pub fn len(&self) -> usize {
        self.token_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_positions.is_empty()
    }

    /// The extraction family this feature belongs to; combined features
    /// report their parents' method.
    pub fn family(&self) -> FeatureMethod {
        self.parent_method.unwrap_or(self.method)
    }

    /// Checks that the feature is usable on a document of `n_tokens`.
    pub fn validate_for(&self, n_tokens: usize) -> Result<()> {
        if self.token_positions.is_empty() {
            return Err(Error::InvalidFeature(format!("`{}` has no tokens", self.label)));
        }
        if !self.token_positions.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidFeature(format!(
                "`{}` positions are not strictly increasing",
                self.label
            )));
        }
        if let Some(&last) = self.token_positions.last() {
            if last >= n_tokens {
                return Err(Error::InvalidFeature(format!(
                    "`{}` references position {last} but the document has {n_tokens} tokens",
                    self.label
                )));
            }
        }
        Ok(())
    }

    pub fn token_texts<'a>(&self, tokens: &'a [Token]) -> Vec<&'a str> {
        self.token_positions
            .iter()
            .map(|&p| tokens[p].text.as_str())
            .collect()
    }
}

/// One feature per non-empty POS group, in the order ADJ, NOUN, VERB, ADV,
/// OTHER.
pub fn extract_pos_features(tokens: &[Token]) -> Vec<InterpretableFeature> {
    PosTag::ALL
        .iter()
        .filter_map(|&tag| {
            let positions: BTreeSet<usize> = tokens
                .iter()
                .filter(|t| t.pos == tag)
                .map(|t| t.position)
                .collect();
            (!positions.is_empty())
                .then(|| InterpretableFeature::new(FeatureMethod::Pos, tag.as_str(), positions))
        })
        .collect()
}

/// One feature per sentence, labelled `sentence-<index>`.
pub fn extract_sentence_features(sentences: &[SentenceSpan]) -> Vec<InterpretableFeature> {
    sentences
        .iter()
        .filter(|s| !s.token_range.is_empty())
        .map(|s| {
            InterpretableFeature::new(
                FeatureMethod::Sentence,
                format!("sentence-{}", s.index),
                s.token_range.clone().collect(),
            )
        })
        .collect()
}

/// Unions every unordered pair of same-method features.
///
/// Pairs are emitted in input order (`i < j`), which for the extractors in
/// this module is the canonical feature order. A pair whose union equals an
/// input feature or an earlier pair is dropped.
pub fn combine_pairwise(features: &[InterpretableFeature]) -> Vec<InterpretableFeature> {
    let mut seen: BTreeSet<Vec<usize>> = features.iter().map(|f| f.token_positions.clone()).collect();
    let mut out = Vec::new();
    for (i, a) in features.iter().enumerate() {
        for b in &features[i + 1..] {
            if a.family() != b.family() {
                continue;
            }
            let union: BTreeSet<usize> = a
                .token_positions
                .iter()
                .chain(&b.token_positions)
                .copied()
                .collect();
            let positions: Vec<usize> = union.iter().copied().collect();
            if !seen.insert(positions) {
                continue;
            }
            let mut combined = InterpretableFeature::new(
                FeatureMethod::Combined,
                format!("{}+{}", a.label, b.label),
                union,
            );
            combined.parent_labels = vec![a.label.clone(), b.label.clone()];
            combined.parent_method = Some(a.family());
            out.push(combined);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Lexicons;
    use crate::text_prep::PreparedText;
    use proptest::prelude::*;

    const TOY: &str = "This film was very awful. I have never seen such a bad movie.";

    fn prepared(text: &str) -> PreparedText {
        let lex = Lexicons::builtin();
        PreparedText::new(text, &lex.pos, &lex.lemmas)
    }

    #[test]
    fn toy_adjective_feature() {
        let doc = prepared(TOY);
        let feats = extract_pos_features(&doc.tokens);
        let adj = feats.iter().find(|f| f.label == "ADJ").unwrap();
        assert_eq!(adj.token_texts(&doc.tokens), ["awful", "bad"]);
        assert_eq!(adj.token_positions, [4, 12]);
        let labels: Vec<_> = feats.iter().map(|f| f.label.as_str()).collect();
        assert_eq!(labels, ["ADJ", "NOUN", "VERB", "ADV", "OTHER"]);
    }

    #[test]
    fn punctuation_only_is_single_other_group() {
        let feats = extract_pos_features(&prepared("?! ... ,").tokens);
        assert_eq!(feats.len(), 1);
        assert_eq!(feats[0].label, "OTHER");
    }

    #[test]
    fn group_collects_all_occurrences() {
        let feats = extract_pos_features(&prepared("good good").tokens);
        assert_eq!(feats.len(), 1);
        assert_eq!(feats[0].label, "ADJ");
        assert_eq!(feats[0].token_positions, [0, 1]);
    }

    #[test]
    fn empty_document_has_no_features() {
        assert!(extract_pos_features(&[]).is_empty());
        assert!(extract_sentence_features(&[]).is_empty());
    }

    #[test]
    fn sentence_features() {
        let doc = prepared(TOY);
        let feats = extract_sentence_features(&doc.sentences);
        assert_eq!(feats.len(), 2);
        assert_eq!(feats[0].label, "sentence-0");
        assert_eq!(feats[1].token_positions, (6..15).collect::<Vec<_>>());

        let one = prepared("just one sentence here");
        let feats = extract_sentence_features(&one.sentences);
        assert_eq!(feats.len(), 1);
        assert_eq!(feats[0].len(), 4);

        let three = prepared("Bad! Sad? Ok.");
        let feats = extract_sentence_features(&three.sentences);
        let all: Vec<usize> = feats.iter().flat_map(|f| f.token_positions.clone()).collect();
        assert_eq!(all, (0..three.len()).collect::<Vec<_>>());
    }

    #[test]
    fn five_groups_give_ten_pairs() {
        let doc = prepared(TOY);
        let feats = extract_pos_features(&doc.tokens);
        let combos = combine_pairwise(&feats);
        assert_eq!(combos.len(), 10);
        let adj_noun = &combos[0];
        assert_eq!(adj_noun.label, "ADJ+NOUN");
        assert_eq!(adj_noun.parent_labels, ["ADJ", "NOUN"]);
        let words = adj_noun.token_texts(&doc.tokens);
        assert!(words.contains(&"bad") && words.contains(&"film"));
        assert_eq!(adj_noun.family(), FeatureMethod::Pos);
    }

    #[test]
    fn fewer_than_two_features_gives_nothing() {
        let doc = prepared("good good");
        assert!(combine_pairwise(&extract_pos_features(&doc.tokens)).is_empty());
        assert!(combine_pairwise(&[]).is_empty());
    }

    #[test]
    fn duplicate_unions_are_dropped() {
        let f = |label: &str, p: &[usize]| {
            InterpretableFeature::new(FeatureMethod::Mlwe, label, p.iter().copied().collect())
        };
        // a+b equals b; b+c and b+d repeat a+d
        let feats = [f("a", &[0, 1]), f("b", &[0, 1, 2]), f("c", &[3]), f("d", &[2, 3])];
        let combos = combine_pairwise(&feats);
        let labels: Vec<_> = combos.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["a+c", "a+d"]);
    }

    #[test]
    fn validation_catches_foreign_positions() {
        let f = InterpretableFeature::new(FeatureMethod::Pos, "ADJ", [3, 9].into_iter().collect());
        assert!(f.validate_for(10).is_ok());
        assert!(f.validate_for(5).is_err());
    }

    proptest! {
        #[test]
        fn pos_groups_partition_and_combos_are_unions(text in "[a-z ,.!]{1,80}") {
            let doc = prepared(&text);
            let feats = extract_pos_features(&doc.tokens);
            let mut all: Vec<usize> = feats.iter().flat_map(|f| f.token_positions.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..doc.len()).collect::<Vec<_>>());

            for c in combine_pairwise(&feats) {
                let parents: Vec<_> = feats.iter().filter(|f| c.parent_labels.contains(&f.label)).collect();
                prop_assert_eq!(parents.len(), 2);
                let union: BTreeSet<usize> = parents.iter().flat_map(|p| p.token_positions.clone()).collect();
                prop_assert_eq!(c.token_positions.clone(), union.into_iter().collect::<Vec<_>>());
                prop_assert!(c.len() >= parents[0].len().max(parents[1].len()));
            }
        }
    }
}
