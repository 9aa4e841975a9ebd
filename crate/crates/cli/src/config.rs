use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use ebano_core::report::DEFAULT_TOP_N;
use ebano_core::{Error, ExplainConfig, ExtractionMethod, LexiconPaths, ModelSpec, PerturbationKind, Result};

/// Settings that may come from `--config`; every field is optional and
/// command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub model: Option<String>,
    pub classes: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
    pub perturbations: Option<Vec<String>>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub pca_components: Option<usize>,
    pub combine_pos: Option<bool>,
    pub combine_sentence: Option<bool>,
    pub combine_mlwe: Option<bool>,
    pub kmeans_restarts: Option<usize>,
    pub antonyms: Option<PathBuf>,
    pub pos_lexicon: Option<PathBuf>,
    pub lemma_exceptions: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub top_n: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Args)]
pub struct CommonFlags {
    /// TOML file with defaults for any of these flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Comma-separated class names replacing the model's own.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ExplainFlags {
    /// `ref`, `ref:<weights.json>` or `cmd:<command line>`.
    #[arg(long)]
    pub model: Option<String>,

    /// Subset of pos,sentence,mlwe.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,

    /// Subset of removal,substitution.
    #[arg(long, value_delimiter = ',')]
    pub perturbations: Option<Vec<String>>,

    #[arg(long)]
    pub threshold: Option<f64>,

    /// K-Means seed.
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_name = "N")]
    pub pca_components: Option<usize>,

    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub combine_pos: Option<bool>,

    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub combine_sentence: Option<bool>,

    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub combine_mlwe: Option<bool>,

    #[arg(long, value_name = "FILE")]
    pub antonyms: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    pub pos_lexicon: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    pub lemma_exceptions: Option<PathBuf>,

    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub classes: Option<Vec<String>>,
    pub explain: ExplainConfig,
    pub lexicons: LexiconPaths,
    pub out: PathBuf,
    pub jobs: usize,
}

fn parse_set<T: std::str::FromStr<Err = Error> + Ord>(items: &[String]) -> Result<BTreeSet<T>> {
    items.iter().filter(|s| !s.trim().is_empty()).map(|s| s.parse()).collect()
}

fn check_classes(classes: &Option<Vec<String>>) -> Result<()> {
    if let Some(c) = classes {
        if c.len() < 2 || c.iter().any(|n| n.trim().is_empty()) {
            return Err(Error::BadConfig(
                "--classes needs at least two non-empty names".into(),
            ));
        }
    }
    Ok(())
}

pub const DEFAULT_OUT: &str = "out";

impl RunConfig {
    pub fn resolve(common: &CommonFlags, flags: &ExplainFlags) -> Result<Self> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let defaults = ExplainConfig::default();

        let model: ModelSpec = flags
            .model
            .clone()
            .or(file.model)
            .unwrap_or_else(|| "ref".into())
            .parse()?;

        let methods = match flags.methods.as_ref().or(file.methods.as_ref()) {
            Some(m) => parse_set::<ExtractionMethod>(m)?,
            None => defaults.methods.clone(),
        };
        let perturbations = match flags.perturbations.as_ref().or(file.perturbations.as_ref()) {
            Some(p) => parse_set::<PerturbationKind>(p)?,
            None => defaults.perturbations.clone(),
        };

        let explain = ExplainConfig {
            methods,
            perturbations,
            threshold: flags.threshold.or(file.threshold).unwrap_or(defaults.threshold),
            seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
            pca_components: flags
                .pca_components
                .or(file.pca_components)
                .unwrap_or(defaults.pca_components),
            combine_pos: flags.combine_pos.or(file.combine_pos).unwrap_or(defaults.combine_pos),
            combine_sentence: flags
                .combine_sentence
                .or(file.combine_sentence)
                .unwrap_or(defaults.combine_sentence),
            combine_mlwe: flags.combine_mlwe.or(file.combine_mlwe).unwrap_or(defaults.combine_mlwe),
            kmeans_restarts: file.kmeans_restarts.unwrap_or(defaults.kmeans_restarts),
            class_of_interest: None,
        };
        explain.validate()?;

        let classes = common.classes.clone().or(file.classes);
        check_classes(&classes)?;

        let jobs = flags.jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(Error::BadConfig("--jobs must be at least 1".into()));
        }

        Ok(Self {
            model,
            classes,
            explain,
            lexicons: LexiconPaths {
                pos: flags.pos_lexicon.clone().or(file.pos_lexicon),
                lemmas: flags.lemma_exceptions.clone().or(file.lemma_exceptions),
                antonyms: flags.antonyms.clone().or(file.antonyms),
            },
            out: common.out.clone().or(file.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            jobs,
        })
    }
}

#[derive(Debug)]
pub struct GlobalConfig {
    pub classes: Option<Vec<String>>,
    pub out: PathBuf,
    pub top_n: usize,
}

impl GlobalConfig {
    pub fn resolve(common: &CommonFlags, top_n: Option<usize>) -> Result<Self> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let classes = common.classes.clone().or(file.classes);
        check_classes(&classes)?;
        Ok(Self {
            classes,
            out: common.out.clone().or(file.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            top_n: top_n.or(file.top_n).unwrap_or(DEFAULT_TOP_N),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn common(config: Option<PathBuf>) -> CommonFlags {
        CommonFlags {
            config,
            out: None,
            classes: None,
        }
    }

    fn no_flags() -> ExplainFlags {
        ExplainFlags {
            model: None,
            methods: None,
            perturbations: None,
            threshold: None,
            seed: None,
            pca_components: None,
            combine_pos: None,
            combine_sentence: None,
            combine_mlwe: None,
            antonyms: None,
            pos_lexicon: None,
            lemma_exceptions: None,
            jobs: None,
        }
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::resolve(&common(None), &no_flags()).unwrap();
        assert_eq!(cfg.explain, ExplainConfig::default());
        assert_eq!(cfg.jobs, 1);
        assert_eq!(cfg.out, PathBuf::from("out"));
        assert_eq!(cfg.model, ModelSpec::ReferenceBuiltin);
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed = 7\nthreshold = 0.25\nmethods = [\"pos\"]\ncombine-mlwe = true").unwrap();
        let mut flags = no_flags();
        flags.seed = Some(9);
        let cfg = RunConfig::resolve(&common(Some(f.path().into())), &flags).unwrap();
        assert_eq!(cfg.explain.seed, 9);
        assert_eq!(cfg.explain.threshold, 0.25);
        assert!(cfg.explain.combine_mlwe);
        assert_eq!(cfg.explain.methods.len(), 1);
    }

    #[test]
    fn rejects_bad_values() {
        let mut flags = no_flags();
        flags.methods = Some(vec!["pos".into(), "lime".into()]);
        assert!(RunConfig::resolve(&common(None), &flags).is_err());

        let mut flags = no_flags();
        flags.threshold = Some(2.0);
        assert!(RunConfig::resolve(&common(None), &flags).is_err());

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "sede = 7").unwrap();
        assert!(RunConfig::resolve(&common(Some(f.path().into())), &no_flags()).is_err());
    }
}
