use std::collections::BTreeSet;
use std::fmt::Write;

use super::{ExplanationRecord, LocalReport};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Original text with the record's tokens wrapped in highlight spans.
fn highlighted_text(report: &LocalReport, record: &ExplanationRecord, class: usize) -> String {
    let text = &report.original_text;
    let marked: BTreeSet<usize> = record.tokens.iter().map(|t| t.position).collect();
    let npir = record.npir.get(class).copied().unwrap_or(0.0);
    let alpha = npir.max(0.0);

    let mut out = String::new();
    let mut cursor = 0;
    for tok in &report.tokens {
        let (start, end) = (tok.start, tok.end);
        if start < cursor || end > text.len() || !text.is_char_boundary(start) || !text.is_char_boundary(end) {
            continue;
        }
        out.push_str(&escape(&text[cursor..start]));
        let word = escape(&text[start..end]);
        if marked.contains(&tok.position) {
            write!(
                out,
                "<span class=\"feature\" data-npir=\"{npir:.6}\" style=\"background-color: rgba(220, 38, 38, {alpha:.3}); border-radius: 2px;\">{word}</span>"
            )
            .expect("writing to a String");
        } else {
            out.push_str(&word);
        }
        cursor = end;
    }
    out.push_str(&escape(&text[cursor.min(text.len())..]));
    out
}

fn fmt_probs(v: &[f64]) -> String {
    v.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" / ")
}

fn render_section(out: &mut String, report: &LocalReport, title: &str, records: &[ExplanationRecord]) {
    let class = report.class_of_interest;
    writeln!(out, "<h2>{}</h2>", escape(title)).unwrap();
    if records.is_empty() {
        out.push_str("<p class=\"empty\">No explanations.</p>\n");
        return;
    }
    out.push_str(
        "<table style=\"border-collapse: collapse; width: 100%;\">\n<tr><th>feature</th><th>perturbation</th><th>P original</th><th>P perturbed</th><th>nPIR</th><th>text</th></tr>\n",
    );
    for r in records {
        let npir = r.npir.get(class).copied().unwrap_or(0.0);
        let weight = if r.informative { "bold" } else { "normal" };
        writeln!(
            out,
            "<tr style=\"border-top: 1px solid #ddd; font-weight: {weight};\"><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{npir:.3}</td><td style=\"font-weight: normal;\">{}</td></tr>",
            escape(&r.label),
            r.perturbation,
            fmt_probs(&r.p_original),
            fmt_probs(&r.p_perturbed),
            highlighted_text(report, r, class),
        )
        .unwrap();
    }
    out.push_str("</table>\n");
}

/// Self-contained HTML page: inline styles only, no external resources.
pub fn render_local_html(report: &LocalReport) -> String {
    let class_name = |c: usize| report.class_names.get(c).map_or("?", String::as_str);
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    writeln!(out, "<title>Explanation: {}</title>", escape(&report.document_id)).unwrap();
    out.push_str("</head>\n<body style=\"font-family: sans-serif; margin: 2em; line-height: 1.5;\">\n");
    writeln!(out, "<h1>{}</h1>", escape(&report.document_id)).unwrap();
    writeln!(
        out,
        "<p>Predicted class: <strong>{}</strong> ({:.3}). Highlights show nPIR for class <strong>{}</strong>.</p>",
        escape(class_name(report.predicted_label)),
        report.prediction.get(report.predicted_label).copied().unwrap_or(0.0),
        escape(class_name(report.class_of_interest)),
    )
    .unwrap();
    writeln!(out, "<blockquote>{}</blockquote>", escape(&report.original_text)).unwrap();

    render_section(&mut out, report, "Part-of-speech features", &report.explanations.pos);
    render_section(&mut out, report, "Sentence features", &report.explanations.sentence);
    render_section(&mut out, report, "Embedding-cluster features", &report.explanations.mlwe);

    if let Some(meta) = &report.mlwe_meta {
        out.push_str("<h2>Clustering</h2>\n<p>");
        match (meta.chosen_k, &meta.skipped) {
            (Some(k), _) => write!(out, "Chosen K = {k}, seed {}.", meta.seed).unwrap(),
            (None, Some(why)) => write!(out, "Skipped: {}.", escape(why)).unwrap(),
            (None, None) => out.push_str("No partition."),
        }
        out.push_str("</p>\n");
        if !meta.k_scores.is_empty() {
            out.push_str("<ul>\n");
            for s in &meta.k_scores {
                writeln!(out, "<li>K = {}: score {:.6}</li>", s.k, s.score).unwrap();
            }
            out.push_str("</ul>\n");
        }
    }
    out.push_str("</body>\n</html>\n");
    out
}
