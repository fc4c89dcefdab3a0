//! Corpus-wide AICC usage counting, with library-prefix exclusion so the
//! numbers reflect developer code rather than bundled libraries.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::catalog::AiccCatalog;
use crate::coalprop::PropConfig;
use crate::mir::AppModel;
use crate::resolver::find_aicc_sites;

/// Class-name prefixes excluded by default (well-known library namespaces).
const DEFAULT_EXCLUDES: &str = include_str!("../data/library_prefixes.txt");

pub fn default_exclude_prefixes() -> Vec<String> {
    DEFAULT_EXCLUDES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodUsageRow {
    pub signature: String,
    pub count: usize,
    /// Apps with at least one use.
    pub apps: usize,
    /// Share of all counted AICC sites, in percent.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub apps: usize,
    pub apps_with_aicc: usize,
    pub total_sites: usize,
    /// Sites per app, over apps with at least one site.
    pub sites_per_app: f64,
    pub methods: Vec<MethodUsageRow>,
}

/// Count AICC sites across a set of parsed apps. Sites inside classes whose
/// name starts with an excluded prefix are skipped.
pub fn corpus_stats(
    apps: &[(String, AppModel)],
    catalog: &AiccCatalog,
    exclude_prefixes: &[String],
    prop_config: &PropConfig,
) -> Result<CorpusStats, crate::coalprop::AnalysisError> {
    let mut per_method: BTreeMap<String, (usize, BTreeSet<String>)> = BTreeMap::new();
    let mut total_sites = 0usize;
    let mut apps_with = 0usize;

    for (name, model) in apps {
        let prop = crate::coalprop::analyze_with(model, prop_config)?;
        let sites = find_aicc_sites(model, catalog, &prop);
        let mut any = false;
        for site in sites {
            if exclude_prefixes
                .iter()
                .any(|p| site.class_name.starts_with(p.as_str()))
            {
                continue;
            }
            any = true;
            total_sites += 1;
            let entry = per_method
                .entry(site.entry.signature.clone())
                .or_insert_with(|| (0, BTreeSet::new()));
            entry.0 += 1;
            entry.1.insert(name.clone());
        }
        if any {
            apps_with += 1;
        }
    }

    let mut methods: Vec<MethodUsageRow> = per_method
        .into_iter()
        .map(|(signature, (count, apps))| MethodUsageRow {
            signature,
            count,
            apps: apps.len(),
            pct: if total_sites == 0 {
                0.0
            } else {
                (count as f64 / total_sites as f64 * 1000.0).round() / 10.0
            },
        })
        .collect();
    methods.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.signature.cmp(&b.signature)));

    Ok(CorpusStats {
        apps: apps.len(),
        apps_with_aicc: apps_with,
        total_sites,
        sites_per_app: if apps_with == 0 {
            0.0
        } else {
            (total_sites as f64 / apps_with as f64 * 10.0).round() / 10.0
        },
        methods,
    })
}
