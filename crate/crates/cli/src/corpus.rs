use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use ebano_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
}

/// A document, or the reason it could not be read.
pub type Entry = std::result::Result<Document, (String, Error)>;

#[derive(Deserialize)]
struct JsonlRecord {
    id: serde_json::Value,
    text: String,
}

/// Restricts an id to characters that are safe in a file name.
pub fn sanitize_id(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    let s = s.trim_start_matches('.').to_string();
    if s.is_empty() {
        "doc".to_string()
    } else {
        s
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_jsonl(path: &Path, out: &mut Vec<Entry>) -> Result<()> {
    let text = fs::read_to_string(path)?;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let label = format!("{}:{}", path.display(), n + 1);
        match serde_json::from_str::<JsonlRecord>(line) {
            Ok(r) => {
                let id = match r.id {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                out.push(Ok(Document { id, text: r.text }));
            }
            Err(e) => out.push(Err((label, Error::MalformedReport(format!("bad record: {e}"))))),
        }
    }
    Ok(())
}

fn read_txt(path: &Path, out: &mut Vec<Entry>) {
    match fs::read_to_string(path) {
        Ok(text) => out.push(Ok(Document { id: stem(path), text })),
        Err(e) => out.push(Err((path.display().to_string(), e.into()))),
    }
}

fn read_path(path: &Path, out: &mut Vec<Entry>) -> Result<()> {
    if is_jsonl(path) {
        read_jsonl(path, out)
    } else {
        read_txt(path, out);
        Ok(())
    }
}

/// Loads `.txt` files (one document each) and `.jsonl` files with
/// `{"id", "text"}` records. Directories contribute their `.txt` and
/// `.jsonl` files in name order. Ids are made file-name safe and must be
/// unique.
pub fn load_inputs(paths: &[PathBuf]) -> Result<Vec<Entry>> {
    if paths.is_empty() {
        return Err(Error::BadConfig("no input paths given".into()));
    }
    let mut entries = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt" || e == "jsonl"))
                .collect();
            files.sort();
            for f in files {
                read_path(&f, &mut entries)?;
            }
        } else if path.is_file() {
            read_path(path, &mut entries)?;
        } else {
            return Err(Error::BadConfig(format!("input {} does not exist", path.display())));
        }
    }

    let mut seen = BTreeSet::new();
    for entry in entries.iter_mut().flatten() {
        entry.id = sanitize_id(&entry.id);
        if !seen.insert(entry.id.clone()) {
            return Err(Error::BadConfig(format!("duplicate document id `{}`", entry.id)));
        }
    }
    Ok(entries)
}
