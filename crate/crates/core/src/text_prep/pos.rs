use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tokenize::Token;
use crate::error::Result;
use crate::lexicon::read_lexicon_file;

/// The five tag groups used for part-of-speech features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Adj,
    Noun,
    Verb,
    Adv,
    Other,
}

impl PosTag {
    /// Canonical group order.
    pub const ALL: [PosTag; 5] = [
        PosTag::Adj,
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adv,
        PosTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Adj => "ADJ",
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adv => "ADV",
            PosTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ADJ" => Ok(PosTag::Adj),
            "NOUN" => Ok(PosTag::Noun),
            "VERB" => Ok(PosTag::Verb),
            "ADV" => Ok(PosTag::Adv),
            "OTHER" => Ok(PosTag::Other),
            other => Err(format!("unknown POS tag `{other}`")),
        }
    }
}

// (suffix, tag); checked in order, longest suffixes first where they overlap.
const SUFFIX_RULES: &[(&str, PosTag)] = &[
    ("ly", PosTag::Adv),
    ("ing", PosTag::Verb),
    ("ed", PosTag::Verb),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ish", PosTag::Adj),
    ("ize", PosTag::Verb),
    ("ise", PosTag::Verb),
];

/// Suffix rules only fire when this many characters remain before the suffix.
const MIN_SUFFIX_STEM: usize = 2;

/// Function words that always fall in the OTHER group.
const CLOSED_CLASS: &[&str] = &[
    "a", "about", "above", "across", "after", "against", "all", "along", "although", "among",
    "an", "and", "another", "any", "anybody", "anyone", "anything", "around", "as", "at",
    "because", "before", "behind", "below", "beneath", "beside", "between", "beyond", "both",
    "but", "by", "each", "either", "every", "everybody", "everyone", "everything", "few", "for",
    "from", "he", "her", "hers", "herself", "him", "himself", "his", "i", "if", "in", "inside",
    "into", "it", "its", "itself", "me", "mine", "my", "myself", "neither", "nobody", "none",
    "nor", "nothing", "of", "off", "on", "onto", "or", "our", "ours", "ourselves", "out",
    "outside", "over", "several", "she", "since", "so", "some", "somebody", "someone",
    "something", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
    "these", "they", "this", "those", "though", "through", "throughout", "till", "to", "toward",
    "towards", "under", "unless", "until", "up", "upon", "us", "via", "we", "what", "whatever",
    "when", "where", "whether", "which", "while", "who", "whoever", "whom", "whose", "why",
    "with", "within", "without", "you", "your", "yours", "yourself", "yourselves",
];

/// Word-to-tag lexicon backing the rule-based tagger.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    words: HashMap<String, PosTag>,
}

impl PosLexicon {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, PosTag)>,
        S: AsRef<str>,
    {
        let words = entries
            .into_iter()
            .map(|(w, t)| (w.as_ref().to_lowercase(), t))
            .collect();
        Self { words }
    }

    /// Parses a JSON object of the form `{"word": "ADJ", ...}`.
    pub fn from_json_str(json: &str, origin: &Path) -> Result<Self> {
        let raw: HashMap<String, String> = crate::lexicon::parse_json_map(json, origin)?;
        let mut words = HashMap::with_capacity(raw.len());
        for (word, tag) in raw {
            let tag = tag
                .parse::<PosTag>()
                .map_err(|reason| crate::lexicon::lexicon_error(origin, reason))?;
            words.insert(word.to_lowercase(), tag);
        }
        Ok(Self { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&read_lexicon_file(path)?, path)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Tags a single word: lexicon, then suffix rules, then the closed
    /// class and punctuation, and NOUN for anything left.
    pub fn tag_word(&self, word: &str) -> PosTag {
        let lower = word.to_lowercase();
        if let Some(tag) = self.words.get(&lower) {
            return *tag;
        }
        if lower.chars().all(char::is_alphabetic) {
            let len = lower.chars().count();
            for (suffix, tag) in SUFFIX_RULES {
                if lower.ends_with(suffix) && len >= suffix.len() + MIN_SUFFIX_STEM {
                    return *tag;
                }
            }
        }
        if CLOSED_CLASS.contains(&lower.as_str()) || !lower.chars().any(char::is_alphabetic) {
            return PosTag::Other;
        }
        PosTag::Noun
    }
}

/// Assigns a group tag to every token.
pub fn pos_tag(tokens: &mut [Token], lexicon: &PosLexicon) {
    for tok in tokens.iter_mut() {
        tok.pos = lexicon.tag_word(&tok.text);
    }
}
