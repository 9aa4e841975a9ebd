//! Perturbation-based explanations for black-box text classifiers.
//!
//! A document is split into interpretable features (part-of-speech groups,
//! sentences and clusters of multi-layer word embeddings). Each feature is
//! removed or replaced by antonyms, the model is queried again, and the
//! change in class probability is scored with nPIR. Cluster explanations
//! over a corpus aggregate into per-class lemma scores (GAI and GRI).

pub mod error;
pub mod features;
pub mod global_explainer;
pub mod lexicon;
pub mod local_explainer;
pub mod mlwe;
pub mod model_gateway;
pub mod perturbation;
pub mod report;
pub mod text_prep;

pub use error::{Error, Result};
pub use features::{FeatureMethod, InterpretableFeature};
pub use global_explainer::{global_scores, ClusterEvidence, CorpusDocument, GlobalScores};
pub use lexicon::{LexiconPaths, Lexicons};
pub use local_explainer::{
    explain_document, most_informative, npir, ExplainConfig, ExplanationSet, ExtractionMethod,
    LocalExplanation,
};
pub use model_gateway::{Model, ModelInfo, ModelSpec, PredictionVector};
pub use perturbation::PerturbationKind;
pub use report::{GlobalReport, LocalReport};
