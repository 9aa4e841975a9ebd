//! Perturbed variants of a document: the tokens of one feature are either
//! removed or swapped for antonyms.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::InterpretableFeature;
use crate::lexicon::{parse_json_map, read_lexicon_file};
use crate::text_prep::{detokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PerturbationKind {
    Removal,
    Substitution,
}

impl PerturbationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::Removal => "REMOVAL",
            PerturbationKind::Substitution => "SUBSTITUTION",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Word to ordered antonym list.
#[derive(Debug, Clone, Default)]
pub struct AntonymLexicon {
    entries: HashMap<String, Vec<String>>,
}

impl AntonymLexicon {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, Vec<V>)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.as_ref().to_lowercase(), v.into_iter().map(Into::into).collect()))
                .collect(),
        }
    }

    pub fn from_json_str(json: &str, origin: &Path) -> Result<Self> {
        let raw: HashMap<String, Vec<String>> = parse_json_map(json, origin)?;
        Ok(Self::new(raw))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&read_lexicon_file(path)?, path)
    }

    /// The first listed antonym of `word`, looked up case-insensitively.
    pub fn first(&self, word: &str) -> Option<&str> {
        self.entries
            .get(&word.to_lowercase())
            .and_then(|v| v.first())
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub position: usize,
    pub original: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbedVariant {
    pub feature: InterpretableFeature,
    pub kind: PerturbationKind,
    pub text: String,
    /// Substitutions applied; empty for removals.
    pub replaced: Vec<Replacement>,
}

/// Drops the feature's tokens and re-joins the rest.
pub fn perturb_removal(tokens: &[Token], feature: &InterpretableFeature) -> Result<PerturbedVariant> {
    feature.validate_for(tokens.len())?;
    let mut drop = feature.token_positions.iter().peekable();
    let kept = tokens.iter().filter(|t| {
        if drop.peek() == Some(&&t.position) {
            drop.next();
            false
        } else {
            true
        }
    });
    Ok(PerturbedVariant {
        feature: feature.clone(),
        kind: PerturbationKind::Removal,
        text: detokenize(kept.map(|t| t.text.as_str())),
        replaced: Vec::new(),
    })
}

fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let starts_upper = chars.next().is_some_and(char::is_uppercase);
    if starts_upper && chars.all(|c| !c.is_uppercase()) {
        let mut r = replacement.chars();
        match r.next() {
            Some(first) => first.to_uppercase().chain(r).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Replaces each feature token that has an antonym with its first listed
/// antonym. Tokens without one stay put. Returns `None` when nothing in
/// the feature can be replaced.
pub fn perturb_substitution(
    tokens: &[Token],
    feature: &InterpretableFeature,
    antonyms: &AntonymLexicon,
) -> Result<Option<PerturbedVariant>> {
    feature.validate_for(tokens.len())?;
    let mut replaced = Vec::new();
    let mut texts: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    for &p in &feature.token_positions {
        if let Some(ant) = antonyms.first(&tokens[p].text) {
            let replacement = match_case(&tokens[p].text, ant);
            replaced.push(Replacement {
                position: p,
                original: tokens[p].text.clone(),
                replacement: replacement.clone(),
            });
            texts[p] = replacement;
        }
    }
    if replaced.is_empty() {
        return Ok(None);
    }
    Ok(Some(PerturbedVariant {
        feature: feature.clone(),
        kind: PerturbationKind::Substitution,
        text: detokenize(texts.iter().map(String::as_str)),
        replaced,
    }))
}
