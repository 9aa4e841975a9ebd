use std::collections::HashMap;
use std::path::Path;

use crate::error::Result;
use crate::lexicon::{parse_json_map, read_lexicon_file};

/// Irregular forms mapped to their lemma, e.g. `was -> be`.
#[derive(Debug, Clone, Default)]
pub struct LemmaLexicon {
    exceptions: HashMap<String, String>,
}

impl LemmaLexicon {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let exceptions = entries
            .into_iter()
            .map(|(k, v)| (k.as_ref().to_lowercase(), v.as_ref().to_lowercase()))
            .collect();
        Self { exceptions }
    }

    pub fn from_json_str(json: &str, origin: &Path) -> Result<Self> {
        let raw: HashMap<String, String> = parse_json_map(json, origin)?;
        Ok(Self::new(raw))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&read_lexicon_file(path)?, path)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.exceptions.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.exceptions.get(word).map(String::as_str)
    }
}

const MIN_STEM: usize = 3;
const MAX_PASSES: usize = 16;

/// Lowercases a word and reduces it to its base form.
///
/// Each pass tries the exception lexicon, then one suffix rule; passes repeat
/// until nothing changes, so the result is a fixed point and the function is
/// idempotent.
pub fn lemmatize(token_text: &str, exceptions: &LemmaLexicon) -> String {
    let mut current = token_text.to_lowercase();
    for _ in 0..MAX_PASSES {
        let next = match exceptions.get(&current) {
            Some(lemma) => lemma.to_string(),
            None => match strip_suffix(&current) {
                Some(stem) => stem,
                None => break,
            },
        };
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn ends_with_sibilant(stem: &str) -> bool {
    ["s", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s))
}

/// Collapses a trailing doubled consonant (`runn -> run`), keeping the
/// common legitimate doubles.
fn undouble(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n > MIN_STEM {
        let (a, b) = (chars[n - 2], chars[n - 1]);
        if a == b && !"aeioulsz".contains(b) {
            return chars[..n - 1].iter().collect();
        }
    }
    stem.to_string()
}

fn strip_suffix(word: &str) -> Option<String> {
    if !word.chars().all(char::is_alphabetic) {
        return None;
    }
    let stem_ok = |stem: &str| char_len(stem) >= MIN_STEM;

    if let Some(stem) = word.strip_suffix("ies") {
        if stem_ok(stem) {
            return Some(format!("{stem}y"));
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if stem_ok(stem) {
            return Some(format!("{stem}y"));
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if stem_ok(stem) && ends_with_sibilant(stem) {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = word.strip_suffix('s') {
        let keeps_s = ["ss", "us", "is"].iter().any(|e| word.ends_with(e));
        if !keeps_s && stem_ok(stem) {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem_ok(stem) {
            return Some(undouble(stem));
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem_ok(stem) && !stem.ends_with('e') {
            return Some(undouble(stem));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Lexicons;
    use proptest::prelude::*;

    fn lex() -> LemmaLexicon {
        Lexicons::builtin().lemmas
    }

    #[test]
    fn plural_s() {
        assert_eq!(lemmatize("films", &lex()), "film");
        assert_eq!(lemmatize("Films", &lex()), "film");
    }

    #[test]
    fn irregular_from_exceptions() {
        assert_eq!(lemmatize("was", &lex()), "be");
        assert_eq!(lemmatize("Was", &lex()), "be");
    }

    #[test]
    fn base_form_unchanged() {
        assert_eq!(lemmatize("film", &lex()), "film");
        assert_eq!(lemmatize("class", &lex()), "class");
        assert_eq!(lemmatize("bus", &lex()), "bus");
    }

    #[test]
    fn suffix_table() {
        let none = LemmaLexicon::default();
        assert_eq!(lemmatize("studies", &none), "study");
        assert_eq!(lemmatize("boxes", &none), "box");
        assert_eq!(lemmatize("watches", &none), "watch");
        assert_eq!(lemmatize("hates", &none), "hate");
        assert_eq!(lemmatize("running", &none), "run");
        assert_eq!(lemmatize("stopped", &none), "stop");
        assert_eq!(lemmatize("calling", &none), "call");
        // stem would be shorter than three characters
        assert_eq!(lemmatize("sing", &none), "sing");
        assert_eq!(lemmatize("red", &none), "red");
        assert_eq!(lemmatize("speed", &none), "speed");
    }

    #[test]
    fn idempotent_over_builtin_lexicon() {
        let lex = lex();
        for (word, lemma) in lex.entries() {
            for w in [word, lemma] {
                let once = lemmatize(w, &lex);
                assert_eq!(lemmatize(&once, &lex), once, "input {w}");
            }
        }
    }

    proptest! {
        #[test]
        fn idempotent_on_random_words(word in "[a-zA-Z]{0,12}") {
            let lex = lex();
            let once = lemmatize(&word, &lex);
            prop_assert_eq!(lemmatize(&once, &lex), once);
        }
    }
}
