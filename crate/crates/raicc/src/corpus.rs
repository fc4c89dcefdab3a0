//! Loading and integrity checks for the benchmark corpus shipped under
//! `corpus/` at the repository root: twenty apps exercising AICC methods,
//! plus the expected-results data the `bench` command consumes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::AiccCatalog;
use crate::mir::{parse_app, AppModel};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    BadJson {
        path: String,
        source: serde_json::Error,
    },
    #[error("{app}: {source}")]
    BadApp {
        app: String,
        source: crate::mir::MirError,
    },
    #[error("{app}: {message}")]
    Inconsistent { app: String, message: String },
}

/// One row of `expected.json`: per-app ground truth for the bench command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedEntry {
    pub leak: bool,
    pub min_components: usize,
}

pub type Expected = BTreeMap<String, ExpectedEntry>;

pub fn load_expected(path: &Path) -> Result<Expected, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::BadJson {
        path: path.display().to_string(),
        source,
    })
}

/// One row of the corpus manifest, mirroring the benchmark's shape: name,
/// whether a leak exists, component count, AICC methods used, and whether
/// the launch is user-interaction gated in the original app.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub leak: bool,
    pub components: usize,
    pub ui: bool,
    pub aicc_methods: Vec<String>,
}

/// Parse every `.mir` file in a directory, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<(String, AppModel)>, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "mir").unwrap_or(false))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model = parse_app(&text).map_err(|source| CorpusError::BadApp {
            app: name.clone(),
            source,
        })?;
        out.push((name, model));
    }
    Ok(out)
}

/// Load and cross-check the corpus manifest against the apps and the
/// expected-results file.
///
/// `dir` is the corpus root holding `benchmark/*.mir`, `expected.json` and
/// `manifest.json`. Every manifest row must name an app that parses, whose
/// component count and leak flag agree, and whose AICC methods are actually
/// found by the resolver.
pub fn corpus_manifest(dir: &Path, catalog: &AiccCatalog) -> Result<Vec<CorpusEntry>, CorpusError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|source| CorpusError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let entries: Vec<CorpusEntry> =
        serde_json::from_str(&text).map_err(|source| CorpusError::BadJson {
            path: manifest_path.display().to_string(),
            source,
        })?;
    let expected = load_expected(&dir.join("expected.json"))?;
    let apps: BTreeMap<String, AppModel> =
        load_dir(&dir.join("benchmark"))?.into_iter().collect();

    for entry in &entries {
        let model = apps.get(&entry.name).ok_or_else(|| CorpusError::Inconsistent {
            app: entry.name.clone(),
            message: "no .mir file in benchmark/".into(),
        })?;
        if model.manifest.components.len() != entry.components {
            return Err(CorpusError::Inconsistent {
                app: entry.name.clone(),
                message: format!(
                    "manifest says {} components, app declares {}",
                    entry.components,
                    model.manifest.components.len()
                ),
            });
        }
        let exp = expected.get(&entry.name).ok_or_else(|| CorpusError::Inconsistent {
            app: entry.name.clone(),
            message: "missing from expected.json".into(),
        })?;
        if exp.leak != entry.leak {
            return Err(CorpusError::Inconsistent {
                app: entry.name.clone(),
                message: "leak flag disagrees with expected.json".into(),
            });
        }
        if model.manifest.components.len() < exp.min_components {
            return Err(CorpusError::Inconsistent {
                app: entry.name.clone(),
                message: format!(
                    "fewer components than expected.json's min_components {}",
                    exp.min_components
                ),
            });
        }
        let prop = crate::coalprop::analyze(model).map_err(|e| CorpusError::Inconsistent {
            app: entry.name.clone(),
            message: e.to_string(),
        })?;
        let sites = crate::resolver::find_aicc_sites(model, catalog, &prop);
        for wanted in &entry.aicc_methods {
            if !sites.iter().any(|s| &s.entry.signature == wanted) {
                return Err(CorpusError::Inconsistent {
                    app: entry.name.clone(),
                    message: format!("AICC method {} not found in app", wanted),
                });
            }
        }
    }
    Ok(entries)
}
