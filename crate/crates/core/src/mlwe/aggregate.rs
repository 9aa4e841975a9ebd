use nalgebra::DMatrix;

use super::TokenEmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model_gateway::LayeredEmbeddings;
use crate::text_prep::Token;

/// Sums each piece over layers, then averages the pieces of each token.
///
/// Row `j` of the result belongs to model token `j`.
pub fn aggregate_layers(emb: &LayeredEmbeddings) -> TokenEmbeddingMatrix {
    let t = emb.num_tokens();
    let d = emb.dim();
    let wp = emb.num_pieces();

    let mut summed = DMatrix::<f64>::zeros(wp, d);
    for layer in &emb.layers {
        summed += layer;
    }

    let mut rows = DMatrix::<f64>::zeros(t, d);
    let mut counts = vec![0usize; t];
    for (piece, &tok) in emb.piece_to_token.iter().enumerate() {
        let mut row = rows.row_mut(tok);
        row += summed.row(piece);
        counts[tok] += 1;
    }
    for (tok, &n) in counts.iter().enumerate() {
        if n > 1 {
            rows.row_mut(tok).unscale_mut(n as f64);
        }
    }
    TokenEmbeddingMatrix {
        rows,
        token_positions: (0..t).collect(),
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Re-indexes model-token rows onto document token positions.
///
/// When the model reports exactly as many tokens as the document has, rows
/// map one to one. Otherwise both token streams are laid out over the
/// same whitespace-free, lowercased character stream and each model token
/// is attached to the document token containing its first character.
/// Document tokens that receive no model token are left out; tokens
/// receiving several are averaged.
pub fn align_to_document(
    matrix: &TokenEmbeddingMatrix,
    model_tokens: &[String],
    doc_tokens: &[Token],
) -> Result<TokenEmbeddingMatrix> {
    let t = matrix.rows.nrows();
    if t == doc_tokens.len() {
        return Ok(TokenEmbeddingMatrix {
            rows: matrix.rows.clone(),
            token_positions: doc_tokens.iter().map(|tok| tok.position).collect(),
        });
    }
    if model_tokens.len() != t {
        return Err(Error::ProtocolViolation(format!(
            "model embedded {t} tokens but the document has {} and no token texts were reported",
            doc_tokens.len()
        )));
    }

    // char offset -> document token
    let mut owner = Vec::new();
    for tok in doc_tokens {
        owner.extend(std::iter::repeat(tok.position).take(squash(&tok.text).chars().count()));
    }

    let d = matrix.rows.ncols();
    let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; doc_tokens.len()];
    let mut offset = 0usize;
    for (j, mt) in model_tokens.iter().enumerate() {
        let len = squash(mt.trim_start_matches("##")).chars().count();
        if len == 0 {
            continue;
        }
        let Some(&doc_pos) = owner.get(offset) else {
            return Err(Error::ProtocolViolation(format!(
                "model token `{mt}` runs past the end of the document"
            )));
        };
        offset += len;
        let slot = sums[doc_pos].get_or_insert_with(|| (vec![0.0; d], 0));
        for (acc, v) in slot.0.iter_mut().zip(matrix.rows.row(j).iter()) {
            *acc += v;
        }
        slot.1 += 1;
    }

    let kept: Vec<(usize, Vec<f64>)> = sums
        .into_iter()
        .enumerate()
        .filter_map(|(pos, s)| s.map(|(v, n)| (pos, v.into_iter().map(|x| x / n as f64).collect())))
        .collect();
    let rows = DMatrix::from_fn(kept.len(), d, |r, c| kept[r].1[c]);
    Ok(TokenEmbeddingMatrix {
        rows,
        token_positions: kept.into_iter().map(|(p, _)| p).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_prep::tokenize;
    use proptest::prelude::*;

    fn emb(piece_to_token: Vec<usize>, layers: Vec<Vec<Vec<f64>>>) -> LayeredEmbeddings {
        let wp = piece_to_token.len();
        LayeredEmbeddings {
            pieces: vec!["p".into(); wp],
            piece_to_token,
            tokens: vec![],
            layers: layers
                .into_iter()
                .map(|l| DMatrix::from_fn(wp, l[0].len(), |r, c| l[r][c]))
                .collect(),
        }
    }

    #[test]
    fn sums_over_layers() {
        let e = emb(vec![0], vec![vec![vec![1.0, 1.0]], vec![vec![3.0, 3.0]]]);
        let m = aggregate_layers(&e);
        assert_eq!(m.rows.row(0).iter().copied().collect::<Vec<_>>(), [4.0, 4.0]);
    }

    #[test]
    fn averages_pieces() {
        let e = emb(
            vec![0, 0],
            vec![vec![vec![1.0, 0.0], vec![2.0, 0.0]], vec![vec![1.0, 0.0], vec![2.0, 0.0]]],
        );
        let m = aggregate_layers(&e);
        assert_eq!(m.rows.shape(), (1, 2));
        assert_eq!(m.rows.row(0).iter().copied().collect::<Vec<_>>(), [3.0, 0.0]);
    }

    #[test]
    fn zero_layers_give_zero_rows() {
        let e = emb(vec![0, 1, 1], vec![vec![vec![0.0; 3]; 3]; 2]);
        let m = aggregate_layers(&e);
        assert_eq!(m.rows, DMatrix::zeros(2, 3));
    }

    #[test]
    fn identical_pieces_average_to_the_piece() {
        let e = emb(vec![0, 0, 0], vec![vec![vec![0.5, -2.0]; 3]]);
        let m = aggregate_layers(&e);
        assert_eq!(m.rows.row(0).iter().copied().collect::<Vec<_>>(), [0.5, -2.0]);
    }

    #[test]
    fn aligns_coarser_model_tokens() {
        // the model keeps "don't" as one token; the document splits it
        let doc = tokenize("I don't care");
        let model_tokens: Vec<String> = ["I", "don't", "care"].map(String::from).to_vec();
        let matrix = TokenEmbeddingMatrix {
            rows: DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]),
            token_positions: vec![0, 1, 2],
        };
        let aligned = align_to_document(&matrix, &model_tokens, &doc).unwrap();
        // doc: I, don, ', t, care -> only I, don, care receive rows
        assert_eq!(aligned.token_positions, [0, 1, 4]);
        assert_eq!(aligned.rows.as_slice(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn aligns_finer_model_tokens() {
        let doc = tokenize("state-of-art");
        let model_tokens: Vec<String> = ["state", "-", "of", "-", "art"].map(String::from).to_vec();
        let matrix = TokenEmbeddingMatrix {
            rows: DMatrix::from_row_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]),
            token_positions: (0..5).collect(),
        };
        // same count: identity
        let aligned = align_to_document(&matrix, &model_tokens, &doc).unwrap();
        assert_eq!(aligned.token_positions, [0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn aggregation_is_linear(
            alpha in -3.0f64..3.0,
            values in prop::collection::vec(-5.0f64..5.0, 12)
        ) {
            // 3 pieces over 2 tokens, 2 layers, dim 2
            let layers: Vec<Vec<Vec<f64>>> = values
                .chunks(6)
                .map(|l| l.chunks(2).map(<[f64]>::to_vec).collect())
                .collect();
            let scaled: Vec<Vec<Vec<f64>>> = layers
                .iter()
                .map(|l| l.iter().map(|r| r.iter().map(|v| v * alpha).collect()).collect())
                .collect();
            let base = aggregate_layers(&emb(vec![0, 0, 1], layers));
            let out = aggregate_layers(&emb(vec![0, 0, 1], scaled));
            let expected = base.rows * alpha;
            for (a, b) in out.rows.iter().zip(expected.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
