//! The AICC method catalog.
//!
//! Each entry names one framework method that can atypically perform ICC,
//! annotated with where its ICC-carrying object sits (receiver or parameter
//! index), whether the object is a `PendingIntent` or an `IntentSender`,
//! whether an Activity target expects a result, and the API level history.
//!
//! The catalog is plain data; see `data/aicc_catalog.txt` for the shipped
//! list and the file format.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

/// Kind of the ICC-carrying object consumed by an AICC method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IccObjectKind {
    PendingIntent,
    IntentSender,
}

/// Where the ICC object sits in a call to the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IccPosition {
    /// The method is called on the ICC object itself, e.g. `pi.send()`.
    Receiver,
    /// Zero-based parameter index, e.g. `set(int, long, PendingIntent)` is 2.
    Param(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AiccCatalogEntry {
    /// Fully qualified method name, e.g. `android.app.AlarmManager.set`.
    pub signature: String,
    /// Declared parameter arity; disambiguates overloads.
    pub arity: usize,
    pub icc_object_kind: IccObjectKind,
    pub icc_position: IccPosition,
    /// True when an Activity target must be launched with
    /// `startActivityForResult` instead of `startActivity`.
    pub expects_result: bool,
    pub api_level_added: u32,
    pub api_level_removed: Option<u32>,
    /// Set for entries whose API history is not individually documented.
    pub provenance_assumed: bool,
}

impl AiccCatalogEntry {
    /// Unqualified method name (last signature segment).
    pub fn method_name(&self) -> &str {
        self.signature.rsplit('.').next().unwrap_or(&self.signature)
    }

    /// Class part of the signature (everything before the method name).
    pub fn class_name(&self) -> &str {
        match self.signature.rfind('.') {
            Some(pos) => &self.signature[..pos],
            None => "",
        }
    }
}

/// Immutable, load-once list of AICC methods indexed by `(signature, arity)`.
#[derive(Debug, Clone, Default)]
pub struct AiccCatalog {
    entries: Vec<AiccCatalogEntry>,
    index: BTreeMap<(String, usize), usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("catalog error at line {line}: {message}")]
pub struct CatalogError {
    pub line: usize,
    pub message: String,
}

const SHIPPED: &str = include_str!("../data/aicc_catalog.txt");

impl AiccCatalog {
    /// The catalog shipped with the crate (`data/aicc_catalog.txt`).
    pub fn shipped() -> AiccCatalog {
        load_catalog(SHIPPED).expect("shipped catalog must load")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AiccCatalogEntry] {
        &self.entries
    }

    /// Exact lookup by qualified signature and arity.
    pub fn lookup(&self, signature: &str, arity: usize) -> Option<&AiccCatalogEntry> {
        self.index
            .get(&(signature.to_string(), arity))
            .map(|&i| &self.entries[i])
    }

    /// First entry (in file order) whose unqualified method name and arity
    /// match. Used for receiver-style calls where the receiver's class is
    /// not statically known.
    pub fn lookup_by_method(&self, method: &str, arity: usize) -> Option<&AiccCatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.arity == arity && e.method_name() == method)
    }

    /// How many AICC methods were added per API level. The sum of the counts
    /// equals the catalog size.
    pub fn api_level_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for e in &self.entries {
            *hist.entry(e.api_level_added).or_insert(0) += 1;
        }
        hist
    }
}

/// Free-function form of [`AiccCatalog::lookup`].
pub fn lookup<'a>(
    catalog: &'a AiccCatalog,
    signature: &str,
    arity: usize,
) -> Option<&'a AiccCatalogEntry> {
    catalog.lookup(signature, arity)
}

/// Free-function form of [`AiccCatalog::api_level_histogram`].
pub fn api_level_histogram(catalog: &AiccCatalog) -> BTreeMap<u32, usize> {
    catalog.api_level_histogram()
}

/// Parse the catalog file format:
///
/// ```text
/// SIGNATURE | ARITY | {PendingIntent|IntentSender} | {receiver|param:N}
///           | {result|noresult} | added:N [| removed:N] [| provenance:assumed]
/// ```
///
/// Lines beginning with `#` are comments; blank lines are skipped.
pub fn load_catalog(text: &str) -> Result<AiccCatalog, CatalogError> {
    let mut catalog = AiccCatalog::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let entry = parse_entry(trimmed).map_err(|message| CatalogError { line, message })?;
        let key = (entry.signature.clone(), entry.arity);
        if catalog.index.contains_key(&key) {
            return Err(CatalogError {
                line,
                message: format!(
                    "duplicate signature {} with arity {}",
                    entry.signature, entry.arity
                ),
            });
        }
        catalog.index.insert(key, catalog.entries.len());
        catalog.entries.push(entry);
    }
    Ok(catalog)
}

fn parse_entry(line: &str) -> Result<AiccCatalogEntry, String> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() < 6 {
        return Err(format!("expected at least 6 fields, got {}", fields.len()));
    }
    let signature = fields[0].to_string();
    if signature.is_empty() {
        return Err("empty signature".into());
    }
    let arity: usize = fields[1]
        .parse()
        .map_err(|_| format!("bad arity '{}'", fields[1]))?;
    let icc_object_kind = match fields[2] {
        "PendingIntent" => IccObjectKind::PendingIntent,
        "IntentSender" => IccObjectKind::IntentSender,
        other => return Err(format!("bad ICC object kind '{}'", other)),
    };
    let icc_position = if fields[3] == "receiver" {
        IccPosition::Receiver
    } else if let Some(n) = fields[3].strip_prefix("param:") {
        let i: usize = n.parse().map_err(|_| format!("bad param index '{}'", n))?;
        if i >= arity {
            return Err(format!("param index {} out of range for arity {}", i, arity));
        }
        IccPosition::Param(i)
    } else {
        return Err(format!("bad ICC position '{}'", fields[3]));
    };
    let expects_result = match fields[4] {
        "result" => true,
        "noresult" => false,
        other => return Err(format!("bad result flag '{}'", other)),
    };
    let api_level_added: u32 = fields[5]
        .strip_prefix("added:")
        .ok_or_else(|| format!("expected 'added:N', got '{}'", fields[5]))?
        .parse()
        .map_err(|_| format!("bad API level in '{}'", fields[5]))?;

    let mut api_level_removed = None;
    let mut provenance_assumed = false;
    for extra in &fields[6..] {
        if let Some(n) = extra.strip_prefix("removed:") {
            let lvl: u32 = n.parse().map_err(|_| format!("bad API level '{}'", n))?;
            if lvl <= api_level_added {
                return Err(format!(
                    "removed level {} must be greater than added level {}",
                    lvl, api_level_added
                ));
            }
            api_level_removed = Some(lvl);
        } else if *extra == "provenance:assumed" {
            provenance_assumed = true;
        } else {
            return Err(format!("unknown field '{}'", extra));
        }
    }

    Ok(AiccCatalogEntry {
        signature,
        arity,
        icc_object_kind,
        icc_position,
        expects_result,
        api_level_added,
        api_level_removed,
        provenance_assumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_catalog_loads() {
        let cat = AiccCatalog::shipped();
        assert!(cat.len() >= 25, "catalog has only {} entries", cat.len());
    }

    #[test]
    fn lookup_alarm_manager_set() {
        let cat = AiccCatalog::shipped();
        let e = cat.lookup("android.app.AlarmManager.set", 3).unwrap();
        assert_eq!(e.icc_position, IccPosition::Param(2));
        assert_eq!(e.icc_object_kind, IccObjectKind::PendingIntent);
    }

    #[test]
    fn lookup_pending_intent_send() {
        let cat = AiccCatalog::shipped();
        let e = cat.lookup("android.app.PendingIntent.send", 0).unwrap();
        assert_eq!(e.icc_position, IccPosition::Receiver);
        assert_eq!(e.icc_object_kind, IccObjectKind::PendingIntent);
    }

    #[test]
    fn lookup_start_intent_sender_for_result() {
        let cat = AiccCatalog::shipped();
        let e = cat
            .lookup("android.app.Activity.startIntentSenderForResult", 6)
            .unwrap();
        assert_eq!(e.icc_object_kind, IccObjectKind::IntentSender);
        assert!(e.expects_result);
    }

    #[test]
    fn lookup_misses_non_aicc_method() {
        let cat = AiccCatalog::shipped();
        assert!(cat.lookup("java.lang.String.concat", 1).is_none());
    }

    #[test]
    fn empty_file_is_empty_catalog() {
        let cat = load_catalog("# only comments\n\n").unwrap();
        assert!(cat.is_empty());
        assert!(cat.api_level_histogram().is_empty());
    }

    #[test]
    fn single_entry_histogram() {
        let cat = load_catalog("a.B.c | 1 | PendingIntent | param:0 | noresult | added:5").unwrap();
        let hist = cat.api_level_histogram();
        assert_eq!(hist.get(&5), Some(&1));
        assert_eq!(hist.len(), 1);
    }

    #[test]
    fn duplicate_signature_rejected() {
        let text = "a.B.c | 1 | PendingIntent | param:0 | noresult | added:5\n\
                    a.B.c | 1 | PendingIntent | param:0 | noresult | added:6";
        let err = load_catalog(text).unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn overloads_differ_by_arity() {
        let text = "a.B.c | 0 | PendingIntent | receiver | noresult | added:1\n\
                    a.B.c | 1 | PendingIntent | receiver | noresult | added:1";
        let cat = load_catalog(text).unwrap();
        assert_eq!(cat.len(), 2);
    }

    #[test]
    fn bad_param_index_rejected() {
        let err =
            load_catalog("a.B.c | 1 | PendingIntent | param:1 | noresult | added:5").unwrap_err();
        assert!(err.message.contains("out of range"));
    }

    #[test]
    fn removed_must_exceed_added() {
        let err = load_catalog("a.B.c | 1 | PendingIntent | param:0 | noresult | added:5 | removed:5")
            .unwrap_err();
        assert!(err.message.contains("greater"));
    }

    #[test]
    fn exactly_two_entries_removed() {
        let cat = AiccCatalog::shipped();
        let removed: Vec<_> = cat
            .entries()
            .iter()
            .filter(|e| e.api_level_removed.is_some())
            .collect();
        assert_eq!(removed.len(), 2);
        for e in removed {
            assert!(e.api_level_removed.unwrap() > e.api_level_added);
        }
    }

    #[test]
    fn histogram_peaks_at_levels_1_and_28() {
        let cat = AiccCatalog::shipped();
        let hist = cat.api_level_histogram();
        assert_eq!(hist.values().sum::<usize>(), cat.len());
        let mut by_count: Vec<(usize, u32)> =
            hist.iter().map(|(&lvl, &n)| (n, lvl)).collect();
        by_count.sort_by(|a, b| b.cmp(a));
        let top2: Vec<u32> = by_count.iter().take(2).map(|&(_, l)| l).collect();
        assert!(top2.contains(&1), "top buckets {:?}", by_count);
        assert!(top2.contains(&28), "top buckets {:?}", by_count);
    }
}
