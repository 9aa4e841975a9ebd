use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::{error, info, warn};
use rayon::prelude::*;

use ebano_core::global_explainer::CorpusDocument;
use ebano_core::lexicon::data_dir_from_env;
use ebano_core::model_gateway::protocol;
use ebano_core::report::{local_html_name, local_json_name, parse_local, GLOBAL_JSON_NAME};
use ebano_core::{
    explain_document, global_scores, Error, GlobalReport, Lexicons, LocalReport, ModelSpec, Result,
};

use crate::config::{GlobalConfig, RunConfig};
use crate::corpus::load_inputs;

/// Process exit status for a run that got past configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::PartialFailure => 2,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents).map_err(Error::from)
}

pub fn explain(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Outcome> {
    let lexicons = Lexicons::load(&cfg.lexicons, data_dir_from_env().as_deref())?;
    let entries = load_inputs(inputs)?;
    let model = cfg.model.open()?;
    let model_info = model.info()?;
    if let Some(names) = &cfg.classes {
        if names.len() != model_info.num_classes() {
            return Err(Error::BadConfig(format!(
                "--classes lists {} names but the model predicts {} classes",
                names.len(),
                model_info.num_classes()
            )));
        }
    }
    fs::create_dir_all(&cfg.out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::BadConfig(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    let results: Vec<_> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| match entry {
                Ok(doc) => explain_document(&doc.id, &doc.text, model.as_ref(), &lexicons, &cfg.explain)
                    .map_err(|e| (doc.id.clone(), e)),
                Err((label, e)) => Err((label.clone(), Error::MalformedReport(e.to_string()))),
            })
            .collect()
    });

    let mut failures = 0;
    for result in results {
        match result {
            Ok(mut set) => {
                if let Some(names) = &cfg.classes {
                    set.class_names = names.clone();
                }
                let report = LocalReport::new(&set, &cfg.explain);
                write_file(&cfg.out, &local_json_name(&set.document_id), &report.to_json()?)?;
                write_file(&cfg.out, &local_html_name(&set.document_id), &report.to_html())?;
                info!("{}: explained", set.document_id);
            }
            Err((label, e)) => {
                failures += 1;
                warn!("{label}: skipped: {e}");
            }
        }
    }
    Ok(if failures == 0 {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    })
}

fn report_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::BadConfig(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .is_some_and(|n| n.to_string_lossy().ends_with(".explanation.json"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn global(cfg: &GlobalConfig, dir: &Path) -> Result<Outcome> {
    let mut failures = 0;
    let mut class_names: Option<Vec<String>> = None;
    let mut docs: Vec<CorpusDocument> = Vec::new();
    for path in report_files(dir)? {
        let parsed = fs::read_to_string(&path)
            .map_err(Error::from)
            .and_then(|text| parse_local(&text));
        let report = match parsed {
            Ok(r) => r,
            Err(e) => {
                failures += 1;
                error!("{}: rejected: {e}", path.display());
                continue;
            }
        };
        match &class_names {
            None => class_names = Some(report.class_names.clone()),
            Some(names) if names.len() != report.class_names.len() => {
                failures += 1;
                error!(
                    "{}: rejected: {} classes, expected {}",
                    path.display(),
                    report.class_names.len(),
                    names.len()
                );
                continue;
            }
            Some(_) => {}
        }
        docs.push(report.corpus_document());
    }

    let mut names = class_names.ok_or(Error::EmptyCorpus)?;
    if let Some(over) = &cfg.classes {
        if over.len() != names.len() {
            return Err(Error::BadConfig(format!(
                "--classes lists {} names but reports carry {} classes",
                over.len(),
                names.len()
            )));
        }
        names = over.clone();
    }
    let scores = global_scores(&docs, &names)?;
    if scores.skipped_documents > 0 {
        warn!("{} documents had no MLWE explanations", scores.skipped_documents);
    }
    fs::create_dir_all(&cfg.out)?;
    let report = GlobalReport::new(&scores, cfg.top_n);
    write_file(&cfg.out, GLOBAL_JSON_NAME, &report.to_json()?)?;
    Ok(if failures == 0 {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    })
}

/// Answers wire-protocol requests on stdin with the reference model.
pub fn serve_reference(spec: &str) -> Result<()> {
    let spec: ModelSpec = spec.parse()?;
    if matches!(spec, ModelSpec::Command(_)) {
        return Err(Error::BadConfig("serve-reference only serves reference models".into()));
    }
    let model = spec.open()?;
    let stdin = io::stdin();
    protocol::serve(model.as_ref(), stdin.lock(), io::stdout().lock())?;
    Ok(())
}
