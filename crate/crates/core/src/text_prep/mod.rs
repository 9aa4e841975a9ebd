//! Tokenization, sentence segmentation, part-of-speech tagging and
//! lemmatization. Every interpretable feature is built on the token
//! positions produced here.

mod lemma;
mod pos;
mod tokenize;

pub use lemma::{lemmatize, LemmaLexicon};
pub use pos::{pos_tag, PosLexicon, PosTag};
pub use tokenize::{detokenize, split_sentences, tokenize, SentenceSpan, Token};

/// A tokenized, tagged and lemmatized document.
#[derive(Debug, Clone)]
pub struct PreparedText {
    pub text: String,
    pub tokens: Vec<Token>,
    pub sentences: Vec<SentenceSpan>,
}

impl PreparedText {
    pub fn new(text: &str, pos: &PosLexicon, lemmas: &LemmaLexicon) -> Self {
        let mut tokens = tokenize(text);
        pos_tag(&mut tokens, pos);
        for tok in &mut tokens {
            tok.lemma = lemmatize(&tok.text, lemmas);
        }
        let sentences = split_sentences(&tokens, text);
        Self {
            text: text.to_string(),
            tokens,
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
