//! JSON views and table rendering for every report the toolchain emits.
//! Reports are JSON-first; `--table` switches to aligned-column text.

use serde::Serialize;

use crate::linker::IccLink;
use crate::mir::SiteId;

/// Serialized form of one ICC link, the `links.json` row shape.
#[derive(Debug, Clone, Serialize)]
pub struct LinkJson {
    pub source: LinkSourceJson,
    pub call: String,
    pub synthetic: bool,
    pub target_type: String,
    #[serde(rename = "match")]
    pub match_kind: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkSourceJson {
    pub class: String,
    pub method: String,
    pub site: SiteId,
}

pub fn link_json(link: &IccLink) -> LinkJson {
    LinkJson {
        source: LinkSourceJson {
            class: link.source_class.clone(),
            method: link.source_method.clone(),
            site: link.source_site.clone(),
        },
        call: link.icc_call.clone(),
        synthetic: link.synthetic,
        target_type: link.target_type.to_string(),
        match_kind: format!("{:?}", link.match_kind),
        targets: link.targets.clone(),
    }
}

pub fn links_json(links: &[IccLink]) -> Vec<LinkJson> {
    links.iter().map(link_json).collect()
}

/// Precision/recall/F1 over per-app leak classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// p = TP/(TP+FP), r = TP/(TP+FN), f1 = 2pr/(p+r); undefined ratios are
/// reported as 0. Rounded to four decimals.
pub fn bench_metrics(tp: usize, fp: usize, fn_: usize) -> Metrics {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        tp,
        fp,
        fn_,
        precision: round4(precision),
        recall: round4(recall),
        f1: round4(f1),
    }
}

pub fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Aligned-column text table.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
    }
    let mut out = String::new();
    let render_row = |cells: Vec<String>, widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if i + 1 < cells.len() {
                for _ in cell.chars().count()..widths[i] {
                    line.push(' ');
                }
            }
        }
        line
    };
    out.push_str(&render_row(
        headers.iter().map(|h| h.to_string()).collect(),
        &widths,
    ));
    out.push('\n');
    out.push_str(&render_row(
        widths.iter().map(|w| "-".repeat(*w)).collect(),
        &widths,
    ));
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row.clone(), &widths));
        out.push('\n');
    }
    out
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}
