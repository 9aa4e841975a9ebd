use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::PosTag;

/// A word occurrence anchored to its position in the original document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Zero-based index of the token within its document.
    pub position: usize,
    /// Byte offsets `(start, end)` into the original text.
    pub char_span: (usize, usize),
    pub pos: PosTag,
    pub lemma: String,
}

impl Token {
    pub fn is_punctuation(&self) -> bool {
        is_punctuation_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    /// Half-open range of token positions.
    pub token_range: Range<usize>,
    pub text: String,
}

pub(crate) fn is_punctuation_str(s: &str) -> bool {
    let mut chars = s.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if is_punct_char(c))
}

fn is_punct_char(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Splits text into word and punctuation tokens.
///
/// Maximal runs of alphanumeric characters form words; every other
/// non-whitespace character is a token of its own. Tokens come back with
/// `pos = Other` and an empty lemma; tagging fills those in.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;

    let push = |tokens: &mut Vec<Token>, start: usize, end: usize| {
        tokens.push(Token {
            text: text[start..end].to_string(),
            position: tokens.len(),
            char_span: (start, end),
            pos: PosTag::Other,
            lemma: String::new(),
        });
    };

    for (idx, c) in text.char_indices() {
        if c.is_alphanumeric() {
            word_start.get_or_insert(idx);
            continue;
        }
        if let Some(start) = word_start.take() {
            push(&mut tokens, start, idx);
        }
        if !c.is_whitespace() {
            push(&mut tokens, idx, idx + c.len_utf8());
        }
    }
    if let Some(start) = word_start {
        push(&mut tokens, start, text.len());
    }
    tokens
}

const NO_SPACE_BEFORE: [&str; 8] = [".", ",", "!", "?", ";", ":", "'", ")"];
const NO_SPACE_AFTER: [&str; 1] = ["("];

/// Joins token texts back into a string.
///
/// Tokens are separated by single spaces, except that no space is emitted
/// before `. , ! ? ; : ' )` nor after `(`. Perturbed documents are built with
/// this rule and fed to the model verbatim, so it must stay bit-exact.
pub fn detokenize<'a, I>(tokens: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in tokens {
        if let Some(p) = prev {
            if !NO_SPACE_BEFORE.contains(&tok) && !NO_SPACE_AFTER.contains(&p) {
                out.push(' ');
            }
        }
        out.push_str(tok);
        prev = Some(tok);
    }
    out
}

const TERMINATORS: [&str; 3] = [".", "!", "?"];

/// Groups tokens into sentences.
///
/// A sentence ends after a `.`, `!` or `?` token that is followed by
/// whitespace or by the end of the text. Trailing tokens without a
/// terminator form a final sentence.
pub fn split_sentences(tokens: &[Token], text: &str) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    let mut start = 0;

    let close = |spans: &mut Vec<SentenceSpan>, range: Range<usize>| {
        let begin = tokens[range.start].char_span.0;
        let end = tokens[range.end - 1].char_span.1;
        spans.push(SentenceSpan {
            index: spans.len(),
            token_range: range,
            text: text[begin..end].to_string(),
        });
    };

    for (i, tok) in tokens.iter().enumerate() {
        if !TERMINATORS.contains(&tok.text.as_str()) {
            continue;
        }
        let boundary = text[tok.char_span.1..]
            .chars()
            .next()
            .map_or(true, char::is_whitespace);
        if boundary {
            close(&mut spans, start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        close(&mut spans, start..tokens.len());
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenizes_toy_sentence() {
        let toks = tokenize("This film was very awful.");
        assert_eq!(texts(&toks), ["This", "film", "was", "very", "awful", "."]);
        assert_eq!(
            toks.iter().map(|t| t.position).collect::<Vec<_>>(),
            (0..6).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn hyphen_is_its_own_token() {
        assert_eq!(texts(&tokenize("good-bad")), ["good", "-", "bad"]);
    }

    #[test]
    fn spans_cover_multibyte_text() {
        let text = "Café — naïve!";
        for tok in tokenize(text) {
            assert_eq!(&text[tok.char_span.0..tok.char_span.1], tok.text);
        }
    }

    #[test]
    fn two_sentence_review() {
        let text = "This film was very awful. I have never seen such a bad movie.";
        let toks = tokenize(text);
        let sents = split_sentences(&toks, text);
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].text, "This film was very awful.");
        assert_eq!(sents[1].text, "I have never seen such a bad movie.");
        assert_eq!(sents[1].token_range, 6..15);
    }

    #[test]
    fn unterminated_sentence_is_one_span() {
        let text = "no terminator here";
        let toks = tokenize(text);
        let sents = split_sentences(&toks, text);
        assert_eq!(sents.len(), 1);
        assert_eq!(sents[0].token_range, 0..3);
    }

    #[test]
    fn each_terminator_closes_a_sentence() {
        let text = "Bad! Sad? Ok.";
        let sents = split_sentences(&tokenize(text), text);
        assert_eq!(sents.len(), 3);
        assert_eq!(sents[2].text, "Ok.");
    }

    #[test]
    fn decimal_point_does_not_split() {
        let text = "It scored 3.5 today. Fine";
        let sents = split_sentences(&tokenize(text), text);
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].text, "It scored 3.5 today.");
    }

    #[test]
    fn detokenize_rule() {
        assert_eq!(
            detokenize(["This", "film", "was", "very", "."]),
            "This film was very."
        );
        assert_eq!(detokenize(["a", "(", "b", ")", "c", ","]), "a (b) c,");
        assert_eq!(detokenize(Vec::<&str>::new()), "");
    }

    proptest! {
        #[test]
        fn detokenize_round_trip(text in "[a-zA-Z0-9 .,!?;:'()\\-\"]{0,60}") {
            let toks = tokenize(&text);
            let joined = detokenize(toks.iter().map(|t| t.text.as_str()));
            let again = tokenize(&joined);
            prop_assert_eq!(texts(&toks), texts(&again));
        }

        #[test]
        fn spans_and_positions_are_consistent(text in "\\PC{0,80}") {
            let toks = tokenize(&text);
            for (i, tok) in toks.iter().enumerate() {
                prop_assert_eq!(tok.position, i);
                prop_assert_eq!(&text[tok.char_span.0..tok.char_span.1], tok.text.as_str());
            }
        }

        #[test]
        fn sentences_partition_tokens(text in "[a-z .!?]{0,80}") {
            let toks = tokenize(&text);
            let sents = split_sentences(&toks, &text);
            let mut next = 0;
            for (i, s) in sents.iter().enumerate() {
                prop_assert_eq!(s.index, i);
                prop_assert_eq!(s.token_range.start, next);
                prop_assert!(s.token_range.end > s.token_range.start);
                next = s.token_range.end;
            }
            prop_assert_eq!(next, toks.len());
        }
    }
}
