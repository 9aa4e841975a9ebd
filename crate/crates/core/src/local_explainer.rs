//! Per-document explanations.
//!
//! The model is queried on the original document and on every perturbed
//! variant; each variant yields one [`LocalExplanation`] carrying the nPIR
//! of the perturbed feature for every class.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    combine_pairwise, extract_pos_features, extract_sentence_features, FeatureMethod,
    InterpretableFeature,
};
use crate::lexicon::Lexicons;
use crate::mlwe::{
    aggregate_layers, align_to_document, cluster_tokens, k_max, k_score, pca_reduce,
    select_best_partition, KScore, Partition, DEFAULT_PCA_COMPONENTS, DEFAULT_SEED,
};
use crate::model_gateway::{Model, PredictionVector};
use crate::perturbation::{
    perturb_removal, perturb_substitution, PerturbationKind, PerturbedVariant, Replacement,
};
use crate::text_prep::{PreparedText, Token};

/// Lower clamp applied to probabilities before the nPIR ratios.
pub const NPIR_EPSILON: f64 = 1e-9;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_KMEANS_RESTARTS: usize = 10;

/// Normalised Perturbation Influence Relation.
///
/// With `a = 1 - P_o/P_f` and `b = 1 - P_f/P_o`, `PIR = P_f*b - P_o*a` and
/// the result is `softsign(PIR) = PIR / (1 + |PIR|)`. Positive values mean
/// the perturbed feature was supporting the class. Inputs are clamped to
/// `[NPIR_EPSILON, 1]` first.
pub fn npir(p_original: f64, p_perturbed: f64) -> f64 {
    let po = p_original.clamp(NPIR_EPSILON, 1.0);
    let pf = p_perturbed.clamp(NPIR_EPSILON, 1.0);
    let a = 1.0 - po / pf;
    let b = 1.0 - pf / po;
    let pir = pf * b - po * a;
    pir / (1.0 + pir.abs())
}

/// Feature extraction families that can be switched on and off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    Pos,
    Sentence,
    Mlwe,
}

impl ExtractionMethod {
    pub const ALL: [ExtractionMethod; 3] = [
        ExtractionMethod::Pos,
        ExtractionMethod::Sentence,
        ExtractionMethod::Mlwe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionMethod::Pos => "pos",
            ExtractionMethod::Sentence => "sentence",
            ExtractionMethod::Mlwe => "mlwe",
        }
    }
}

impl fmt::Display for ExtractionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" => Ok(ExtractionMethod::Pos),
            "sentence" => Ok(ExtractionMethod::Sentence),
            "mlwe" => Ok(ExtractionMethod::Mlwe),
            other => Err(Error::BadConfig(format!(
                "unknown method `{other}` (expected pos, sentence or mlwe)"
            ))),
        }
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "removal" => Ok(PerturbationKind::Removal),
            "substitution" => Ok(PerturbationKind::Substitution),
            other => Err(Error::BadConfig(format!(
                "unknown perturbation `{other}` (expected removal or substitution)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub methods: BTreeSet<ExtractionMethod>,
    pub perturbations: BTreeSet<PerturbationKind>,
    pub threshold: f64,
    pub seed: u64,
    pub pca_components: usize,
    pub combine_pos: bool,
    pub combine_sentence: bool,
    pub combine_mlwe: bool,
    pub kmeans_restarts: usize,
    /// Class judged for informativeness; the predicted class when unset.
    pub class_of_interest: Option<usize>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            methods: ExtractionMethod::ALL.into_iter().collect(),
            perturbations: [PerturbationKind::Removal, PerturbationKind::Substitution]
                .into_iter()
                .collect(),
            threshold: DEFAULT_THRESHOLD,
            seed: DEFAULT_SEED,
            pca_components: DEFAULT_PCA_COMPONENTS,
            combine_pos: true,
            combine_sentence: true,
            combine_mlwe: false,
            kmeans_restarts: DEFAULT_KMEANS_RESTARTS,
            class_of_interest: None,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::BadConfig("at least one method must be enabled".into()));
        }
        if self.perturbations.is_empty() {
            return Err(Error::BadConfig("at least one perturbation must be enabled".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::BadConfig(format!(
                "threshold {} is outside [0, 1]",
                self.threshold
            )));
        }
        if self.pca_components == 0 {
            return Err(Error::BadConfig("pca components must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalExplanation {
    pub document_id: String,
    pub feature: InterpretableFeature,
    pub kind: PerturbationKind,
    pub p_original: PredictionVector,
    pub p_perturbed: PredictionVector,
    pub label_original: usize,
    pub label_perturbed: usize,
    /// nPIR for every class.
    pub npir: Vec<f64>,
    /// `npir[class_of_interest] >= threshold`.
    pub informative: bool,
    pub perturbed_text: String,
    pub replaced: Vec<Replacement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlweMeta {
    pub n_words: usize,
    pub k_max: usize,
    pub seed: u64,
    pub chosen_k: Option<usize>,
    pub k_scores: Vec<KScore>,
    /// Why clustering did not run, if it did not.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationSet {
    pub document_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub class_names: Vec<String>,
    pub prediction: PredictionVector,
    pub predicted_label: usize,
    pub class_of_interest: usize,
    pub threshold: f64,
    pub pos: Vec<LocalExplanation>,
    pub sentence: Vec<LocalExplanation>,
    pub mlwe: Vec<LocalExplanation>,
    pub mlwe_meta: Option<MlweMeta>,
}

impl ExplanationSet {
    pub fn all(&self) -> impl Iterator<Item = &LocalExplanation> {
        self.pos.iter().chain(&self.sentence).chain(&self.mlwe)
    }
}

fn build_variants(
    doc: &PreparedText,
    features: &[InterpretableFeature],
    kinds: &BTreeSet<PerturbationKind>,
    lexicons: &Lexicons,
) -> Result<Vec<PerturbedVariant>> {
    let mut out = Vec::new();
    for f in features {
        for kind in kinds {
            match kind {
                PerturbationKind::Removal => out.push(perturb_removal(&doc.tokens, f)?),
                PerturbationKind::Substitution => {
                    if let Some(v) = perturb_substitution(&doc.tokens, f, &lexicons.antonyms)? {
                        out.push(v);
                    }
                }
            }
        }
    }
    Ok(out)
}

struct Scorer<'a> {
    model: &'a dyn Model,
    document_id: &'a str,
    original: &'a PredictionVector,
    class_of_interest: usize,
    threshold: f64,
}

impl Scorer<'_> {
    fn score(&self, variants: Vec<PerturbedVariant>) -> Result<Vec<LocalExplanation>> {
        if variants.is_empty() {
            return Ok(Vec::new());
        }
        let texts: Vec<String> = variants.iter().map(|v| v.text.clone()).collect();
        let predictions = self.model.predict_batch(&texts)?;
        if predictions.len() != variants.len() {
            return Err(Error::ProtocolViolation(format!(
                "{} predictions for {} inputs",
                predictions.len(),
                variants.len()
            )));
        }
        variants
            .into_iter()
            .zip(predictions)
            .map(|(v, p_f)| {
                if p_f.len() != self.original.len() {
                    return Err(Error::ProtocolViolation(format!(
                        "prediction has {} classes, expected {}",
                        p_f.len(),
                        self.original.len()
                    )));
                }
                let scores: Vec<f64> = self
                    .original
                    .probs()
                    .iter()
                    .zip(p_f.probs())
                    .map(|(po, pf)| npir(*po, *pf))
                    .collect();
                Ok(LocalExplanation {
                    document_id: self.document_id.to_string(),
                    informative: scores[self.class_of_interest] >= self.threshold,
                    label_original: self.original.argmax(),
                    label_perturbed: p_f.argmax(),
                    p_original: self.original.clone(),
                    p_perturbed: p_f,
                    npir: scores,
                    feature: v.feature,
                    kind: v.kind,
                    perturbed_text: v.text,
                    replaced: v.replaced,
                })
            })
            .collect()
    }
}

fn with_pairs(mut features: Vec<InterpretableFeature>, combine: bool) -> Vec<InterpretableFeature> {
    if combine {
        let pairs = combine_pairwise(&features);
        features.extend(pairs);
    }
    features
}

/// Runs every enabled extraction method and perturbation on one document.
pub fn explain_document(
    document_id: &str,
    text: &str,
    model: &dyn Model,
    lexicons: &Lexicons,
    config: &ExplainConfig,
) -> Result<ExplanationSet> {
    config.validate()?;
    let info = model.info()?;
    let doc = PreparedText::new(text, &lexicons.pos, &lexicons.lemmas);
    if doc.is_empty() {
        return Err(Error::EmptyDocument(document_id.to_string()));
    }

    let prediction = model.predict(text)?;
    if prediction.len() != info.num_classes() {
        return Err(Error::ProtocolViolation(format!(
            "prediction has {} classes, model reports {}",
            prediction.len(),
            info.num_classes()
        )));
    }
    let predicted_label = prediction.argmax();
    let class_of_interest = config.class_of_interest.unwrap_or(predicted_label);
    if class_of_interest >= info.num_classes() {
        return Err(Error::BadConfig(format!(
            "class of interest {class_of_interest} is out of range"
        )));
    }

    let scorer = Scorer {
        model,
        document_id,
        original: &prediction,
        class_of_interest,
        threshold: config.threshold,
    };

    let mut pos = Vec::new();
    if config.methods.contains(&ExtractionMethod::Pos) {
        let features = with_pairs(extract_pos_features(&doc.tokens), config.combine_pos);
        pos = scorer.score(build_variants(&doc, &features, &config.perturbations, lexicons)?)?;
    }

    let mut sentence = Vec::new();
    if config.methods.contains(&ExtractionMethod::Sentence) {
        let features = with_pairs(
            extract_sentence_features(&doc.sentences),
            config.combine_sentence,
        );
        sentence =
            scorer.score(build_variants(&doc, &features, &config.perturbations, lexicons)?)?;
    }

    let (mlwe, mlwe_meta) = if config.methods.contains(&ExtractionMethod::Mlwe) {
        let (expl, meta) = explain_mlwe(&doc, model, lexicons, config, &scorer, predicted_label)?;
        (expl, Some(meta))
    } else {
        (Vec::new(), None)
    };

    Ok(ExplanationSet {
        document_id: document_id.to_string(),
        text: text.to_string(),
        tokens: doc.tokens,
        class_names: info.class_names,
        prediction,
        predicted_label,
        class_of_interest,
        threshold: config.threshold,
        pos,
        sentence,
        mlwe,
        mlwe_meta,
    })
}

fn explain_mlwe(
    doc: &PreparedText,
    model: &dyn Model,
    lexicons: &Lexicons,
    config: &ExplainConfig,
    scorer: &Scorer<'_>,
    predicted_label: usize,
) -> Result<(Vec<LocalExplanation>, MlweMeta)> {
    let n_words = doc.len();
    let mut meta = MlweMeta {
        n_words,
        k_max: k_max(n_words),
        seed: config.seed,
        chosen_k: None,
        k_scores: Vec::new(),
        skipped: None,
    };
    if n_words < 2 {
        meta.skipped = Some("fewer than two words".into());
        return Ok((Vec::new(), meta));
    }

    let embeddings = match model.embed(&doc.text) {
        Ok(e) => e,
        Err(Error::EmptyInput) => {
            meta.skipped = Some("model produced no embeddings".into());
            return Ok((Vec::new(), meta));
        }
        Err(e) => return Err(e),
    };
    embeddings.validate()?;
    let per_token = aggregate_layers(&embeddings);
    let aligned = align_to_document(&per_token, &embeddings.tokens, &doc.tokens)?;
    if aligned.rows.nrows() < 2 {
        meta.skipped = Some("fewer than two embedded tokens".into());
        return Ok((Vec::new(), meta));
    }
    let (reduced, _) = pca_reduce(&aligned, config.pca_components);

    let upper = meta.k_max.min(reduced.rows.nrows());
    let mut partitions: Vec<Partition> = Vec::new();
    for k in 2..=upper {
        match cluster_tokens(&reduced, k, config.seed, config.kmeans_restarts) {
            Ok(p) if p.clusters.len() == k => partitions.push(p),
            Ok(p) => debug!("K={k} collapsed to {} clusters; skipped", p.clusters.len()),
            Err(Error::DegenerateInput(why)) => debug!("K={k} skipped: {why}"),
            Err(e) => return Err(e),
        }
    }
    if partitions.is_empty() {
        meta.skipped = Some("tokens could not be split into two or more clusters".into());
        return Ok((Vec::new(), meta));
    }

    let primary_kind = *config
        .perturbations
        .iter()
        .next()
        .expect("validated non-empty");
    let mut scored: Vec<(Partition, Vec<LocalExplanation>)> = Vec::new();
    for p in partitions {
        let variants = build_variants(doc, &p.clusters, &config.perturbations, lexicons)?;
        let explanations = scorer.score(variants)?;
        let entries: Vec<(f64, usize)> = explanations
            .iter()
            .filter(|e| e.kind == primary_kind)
            .map(|e| (e.npir[predicted_label], e.feature.len()))
            .collect();
        meta.k_scores.push(KScore {
            k: p.k,
            score: k_score(&entries),
        });
        scored.push((p, explanations));
    }

    let best = select_best_partition(&meta.k_scores).expect("at least one partition");
    let (partition, mut explanations) = scored.swap_remove(best);
    meta.chosen_k = Some(partition.k);

    if config.combine_mlwe {
        let pairs = combine_pairwise(&partition.clusters);
        explanations.extend(scorer.score(build_variants(doc, &pairs, &config.perturbations, lexicons)?)?);
    }
    Ok((explanations, meta))
}

fn method_rank(f: &InterpretableFeature) -> u8 {
    match f.method {
        FeatureMethod::Pos => 0,
        FeatureMethod::Sentence => 1,
        FeatureMethod::Mlwe => 2,
        FeatureMethod::Combined => 3,
    }
}

/// Explanations whose nPIR for `class` reaches `threshold`, strongest
/// first; ties prefer smaller features, then the method order POS,
/// SENTENCE, MLWE, COMBINED.
pub fn most_informative(set: &ExplanationSet, class: usize, threshold: f64) -> Vec<&LocalExplanation> {
    let mut out: Vec<&LocalExplanation> = set
        .all()
        .filter(|e| e.npir.get(class).is_some_and(|v| *v >= threshold))
        .collect();
    out.sort_by(|a, b| {
        b.npir[class]
            .total_cmp(&a.npir[class])
            .then(a.feature.len().cmp(&b.feature.len()))
            .then(method_rank(&a.feature).cmp(&method_rank(&b.feature)))
    });
    out
}
