//! Loading of the JSON lexicons that drive tagging, lemmatization and
//! antonym substitution.
//!
//! Defaults are compiled into the crate from `data/`. Setting
//! `EBANO_DATA_DIR` points the loader at a directory holding files with the
//! same names; explicit per-file paths win over both.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::perturbation::AntonymLexicon;
use crate::text_prep::{LemmaLexicon, PosLexicon};

pub const DATA_DIR_ENV: &str = "EBANO_DATA_DIR";

pub const POS_LEXICON_FILE: &str = "pos_lexicon.json";
pub const LEMMA_EXCEPTIONS_FILE: &str = "lemma_exceptions.json";
pub const ANTONYMS_FILE: &str = "antonyms.json";
pub const REFERENCE_WEIGHTS_FILE: &str = "reference_weights.json";

pub(crate) const BUILTIN_POS: &str = include_str!("../data/pos_lexicon.json");
pub(crate) const BUILTIN_LEMMAS: &str = include_str!("../data/lemma_exceptions.json");
pub(crate) const BUILTIN_ANTONYMS: &str = include_str!("../data/antonyms.json");
pub(crate) const BUILTIN_REFERENCE_WEIGHTS: &str = include_str!("../data/reference_weights.json");

pub(crate) fn lexicon_error(origin: &Path, reason: impl Into<String>) -> Error {
    Error::MissingLexicon {
        path: origin.to_path_buf(),
        reason: reason.into(),
    }
}

pub(crate) fn read_lexicon_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| lexicon_error(path, e.to_string()))
}

pub(crate) fn parse_json_map<T: DeserializeOwned>(json: &str, origin: &Path) -> Result<T> {
    serde_json::from_str(json).map_err(|e| lexicon_error(origin, e.to_string()))
}

/// Optional per-file overrides.
#[derive(Debug, Clone, Default)]
pub struct LexiconPaths {
    pub pos: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub antonyms: Option<PathBuf>,
}

/// The directory named by `EBANO_DATA_DIR`, if set and non-empty.
pub fn data_dir_from_env() -> Option<PathBuf> {
    env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

#[derive(Debug, Clone)]
pub struct Lexicons {
    pub pos: PosLexicon,
    pub lemmas: LemmaLexicon,
    pub antonyms: AntonymLexicon,
}

impl Lexicons {
    /// The lexicons shipped with the crate.
    pub fn builtin() -> Self {
        let origin = Path::new("<builtin>");
        Self {
            pos: PosLexicon::from_json_str(BUILTIN_POS, origin).expect("builtin POS lexicon"),
            lemmas: LemmaLexicon::from_json_str(BUILTIN_LEMMAS, origin)
                .expect("builtin lemma lexicon"),
            antonyms: AntonymLexicon::from_json_str(BUILTIN_ANTONYMS, origin)
                .expect("builtin antonym lexicon"),
        }
    }

    /// Resolves each lexicon from an explicit path, then `data_dir`, then
    /// the builtin copy.
    pub fn load(paths: &LexiconPaths, data_dir: Option<&Path>) -> Result<Self> {
        let resolve = |explicit: &Option<PathBuf>, name: &str| -> Option<PathBuf> {
            explicit
                .clone()
                .or_else(|| data_dir.map(|dir| dir.join(name)))
        };
        let builtin = Self::builtin();
        Ok(Self {
            pos: match resolve(&paths.pos, POS_LEXICON_FILE) {
                Some(p) => PosLexicon::load(&p)?,
                None => builtin.pos,
            },
            lemmas: match resolve(&paths.lemmas, LEMMA_EXCEPTIONS_FILE) {
                Some(p) => LemmaLexicon::load(&p)?,
                None => builtin.lemmas,
            },
            antonyms: match resolve(&paths.antonyms, ANTONYMS_FILE) {
                Some(p) => AntonymLexicon::load(&p)?,
                None => builtin.antonyms,
            },
        })
    }
}
