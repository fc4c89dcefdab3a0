//! Command-line driver. The `raicc` binary is a thin wrapper around
//! [`run`]; every subcommand maps onto one pipeline stage and prints JSON
//! (or an aligned table with `--table`) to stdout.
//!
//! Exit codes: 0 success, 2 input error (parse, validation, bad config or
//! data files), 3 internal budget exceeded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::catalog::AiccCatalog;
use crate::coalprop::{analyze_with, AnalysisError, PropConfig, PropResult};
use crate::corpus::{load_dir, load_expected};
use crate::instrument::instrument;
use crate::linker::{build_links_with, link_stats, IccLink};
use crate::mir::{parse_app, serialize_app, AppModel};
use crate::report::{self, bench_metrics, render_table, to_json_string, Metrics};
use crate::resolver::{find_aicc_sites, site_report, AiccSite};
use crate::taint::{load_taint_config, run_taint_with, LeakReport, TaintConfig};
use crate::vulnscan::{scan, summarize, VulnFinding};

#[derive(Parser)]
#[command(name = "raicc", version, about = "Reveal atypical inter-component communication in MIR app models")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,

    /// Value-set size before a field widens to TOP (prop.widen_cap)
    #[arg(long, global = true)]
    widen_cap: Option<usize>,

    /// Fixpoint iteration budget (prop.max_iterations)
    #[arg(long, global = true)]
    max_iterations: Option<u64>,

    /// Levels of invoke inlining (prop.call_depth)
    #[arg(long, global = true)]
    call_depth: Option<usize>,

    /// Use an alternative AICC catalog file
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,

    /// Render a human-readable table instead of JSON
    #[arg(long, global = true)]
    table: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an app model
    Check { app: PathBuf },
    /// Report the AICC call sites of an app
    Analyze { app: PathBuf },
    /// Rewrite AICC sites into standard ICC calls (writes <app>.raicc.mir)
    Instrument {
        app: PathBuf,
        /// Write the instrumented model here instead of the sibling file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve ICC links; --compare contrasts before/after instrumentation
    Links {
        app: PathBuf,
        #[arg(long)]
        compare: bool,
    },
    /// Detect source-to-sink leaks; --raicc instruments first
    Taint {
        app: PathBuf,
        #[arg(long)]
        raicc: bool,
        /// Taint sources/sinks file (default: shipped configuration)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Scan for ICC vulnerabilities; --compare contrasts before/after
    Vulns {
        app: PathBuf,
        #[arg(long)]
        compare: bool,
    },
    /// AICC usage counts over a directory of .mir apps
    Stats {
        dir: PathBuf,
        /// Skip sites in classes with this name prefix (repeatable)
        #[arg(long = "exclude-prefix")]
        exclude_prefix: Vec<String>,
        /// Do not apply the built-in library prefix list
        #[arg(long)]
        no_default_excludes: bool,
    },
    /// Run the leak benchmark and emit the precision/recall table
    Bench {
        corpus_dir: PathBuf,
        expected: PathBuf,
        /// Taint sources/sinks file (default: shipped configuration)
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError {
            code: 3,
            message: e.to_string(),
        }
    }
}

macro_rules! input_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::input(e.to_string())
            }
        }
    )*};
}
input_error!(
    crate::mir::MirError,
    crate::catalog::CatalogError,
    crate::taint::TaintConfigError,
    crate::corpus::CorpusError,
    crate::instrument::InstrumentError,
    crate::linker::StatError,
    std::io::Error
);

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 2 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut prop_cfg = PropConfig::default();
    crate::config::from_env(&mut prop_cfg).map_err(CliError::input)?;
    if let Some(v) = cli.widen_cap {
        prop_cfg.widen_cap = v;
    }
    if let Some(v) = cli.max_iterations {
        prop_cfg.max_iterations = v;
    }
    if let Some(v) = cli.call_depth {
        prop_cfg.call_depth = v;
    }
    let catalog = match &cli.catalog {
        Some(path) => crate::catalog::load_catalog(&std::fs::read_to_string(path)?)?,
        None => AiccCatalog::shipped(),
    };
    let table = cli.table;

    match cli.cmd {
        Command::Check { app } => cmd_check(&app, table),
        Command::Analyze { app } => cmd_analyze(&app, &catalog, &prop_cfg, table),
        Command::Instrument { app, out } => {
            cmd_instrument(&app, out.as_deref(), &catalog, &prop_cfg, table)
        }
        Command::Links { app, compare } => {
            cmd_links(&app, compare, &catalog, &prop_cfg, table)
        }
        Command::Taint { app, raicc, config } => {
            cmd_taint(&app, raicc, config.as_deref(), &catalog, &prop_cfg, table)
        }
        Command::Vulns { app, compare } => {
            cmd_vulns(&app, compare, &catalog, &prop_cfg, table)
        }
        Command::Stats {
            dir,
            exclude_prefix,
            no_default_excludes,
        } => cmd_stats(&dir, exclude_prefix, no_default_excludes, &catalog, &prop_cfg, table),
        Command::Bench {
            corpus_dir,
            expected,
            config,
        } => cmd_bench(&corpus_dir, &expected, config.as_deref(), &catalog, &prop_cfg, table),
    }
}

fn load_model(path: &Path) -> Result<AppModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {}", path.display(), e)))?;
    parse_app(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e)))
}

fn taint_config(path: Option<&Path>) -> Result<TaintConfig, CliError> {
    match path {
        Some(p) => Ok(load_taint_config(&std::fs::read_to_string(p)?)?),
        None => Ok(TaintConfig::shipped()),
    }
}

/// Propagation must see the same sources the taint step uses, so tainted
/// extras are visible when links carry them.
fn prop_with_sources(base: &PropConfig, taint: &TaintConfig) -> PropConfig {
    PropConfig {
        taint_sources: taint.sources.clone(),
        ..base.clone()
    }
}

fn analyzed(model: &AppModel, cfg: &PropConfig) -> Result<PropResult, CliError> {
    Ok(analyze_with(model, cfg)?)
}

fn instrumented_model(
    model: &AppModel,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
) -> Result<(AppModel, Vec<AiccSite>), CliError> {
    let prop = analyzed(model, cfg)?;
    let sites = find_aicc_sites(model, catalog, &prop);
    let out = instrument(model, &sites)?;
    Ok((out, sites))
}

#[derive(Serialize)]
struct CheckReport {
    package: String,
    components: usize,
    classes: usize,
    methods: usize,
    statements: usize,
}

fn cmd_check(app: &Path, table: bool) -> Result<(), CliError> {
    let model = load_model(app)?;
    let report = CheckReport {
        package: model.package_name.clone(),
        components: model.manifest.components.len(),
        classes: model.classes.len(),
        methods: model.classes.iter().map(|c| c.methods.len()).sum(),
        statements: model.statements().count(),
    };
    if table {
        println!(
            "{}: OK ({} components, {} classes, {} statements)",
            report.package, report.components, report.classes, report.statements
        );
    } else {
        print!("{}", to_json_string(&report));
    }
    Ok(())
}

#[derive(Serialize)]
struct SiteJson {
    site: String,
    class: String,
    method: String,
    signature: String,
    arity: usize,
    unresolved: bool,
    resolved: Vec<ResolvedJson>,
}

#[derive(Serialize)]
struct ResolvedJson {
    target_type: String,
    intent: crate::coalprop::IntentValue,
}

#[derive(Serialize)]
struct AnalyzeReport {
    sites: Vec<SiteJson>,
    report: Vec<crate::resolver::SiteReportRow>,
}

fn site_json(site: &AiccSite) -> SiteJson {
    SiteJson {
        site: site.site_id.0.clone(),
        class: site.class_name.clone(),
        method: site.method_name.clone(),
        signature: site.entry.signature.clone(),
        arity: site.entry.arity,
        unresolved: site.unresolved,
        resolved: site
            .resolved
            .iter()
            .map(|l| ResolvedJson {
                target_type: l.target_type.coal_char().to_string(),
                intent: l.intent.clone(),
            })
            .collect(),
    }
}

fn cmd_analyze(
    app: &Path,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let model = load_model(app)?;
    let prop = analyzed(&model, cfg)?;
    let sites = find_aicc_sites(&model, catalog, &prop);
    let report = AnalyzeReport {
        sites: sites.iter().map(site_json).collect(),
        report: site_report(&sites),
    };
    if table {
        let rows: Vec<Vec<String>> = report
            .report
            .iter()
            .map(|r| {
                vec![
                    r.signature.clone(),
                    r.count.to_string(),
                    format!("{:.1}%", r.pct),
                    r.resolved.to_string(),
                    format!("a:{} s:{} r:{}", r.by_type.a, r.by_type.s, r.by_type.r),
                ]
            })
            .collect();
        print!(
            "{}",
            render_table(&["method", "count", "%", "resolved", "targets"], &rows)
        );
    } else {
        print!("{}", to_json_string(&report));
    }
    Ok(())
}

#[derive(Serialize)]
struct InstrumentReport {
    written: String,
    sites: usize,
    inserted: usize,
}

fn cmd_instrument(
    app: &Path,
    out: Option<&Path>,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let model = load_model(app)?;
    let (instrumented, sites) = instrumented_model(&model, catalog, cfg)?;
    let target: PathBuf = match out {
        Some(p) => p.to_path_buf(),
        None => app.with_extension("raicc.mir"),
    };
    std::fs::write(&target, serialize_app(&instrumented))?;
    let report = InstrumentReport {
        written: target.display().to_string(),
        sites: sites.len(),
        inserted: sites.iter().map(|s| s.insertion_count()).sum(),
    };
    if table {
        println!(
            "{} (sites: {}, inserted: {})",
            report.written, report.sites, report.inserted
        );
    } else {
        print!("{}", to_json_string(&report));
    }
    Ok(())
}

fn cmd_links(
    app: &Path,
    compare: bool,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let model = load_model(app)?;
    let prop = analyzed(&model, cfg)?;
    let before = build_links_with(&model, &prop);
    if !compare {
        if table {
            print_links_table(&before);
        } else {
            print!("{}", to_json_string(&report::links_json(&before)));
        }
        return Ok(());
    }
    let (instrumented, _) = instrumented_model(&model, catalog, cfg)?;
    let prop_after = analyzed(&instrumented, cfg)?;
    let after = build_links_with(&instrumented, &prop_after);
    let stats = link_stats(&before, &after)?;
    if table {
        let rows: Vec<Vec<String>> = stats
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.component_type.clone(),
                    r.count_before.to_string(),
                    format!("+{}", r.added),
                    r.increase_pct.clone(),
                ]
            })
            .collect();
        print!(
            "{}",
            render_table(&["component type", "before", "added", "increase"], &rows)
        );
    } else {
        print!("{}", to_json_string(&stats));
    }
    Ok(())
}

fn print_links_table(links: &[IccLink]) {
    let rows: Vec<Vec<String>> = links
        .iter()
        .map(|l| {
            vec![
                l.source_site.0.clone(),
                l.icc_call.clone(),
                if l.synthetic { "yes" } else { "no" }.to_string(),
                l.target_type.to_string(),
                format!("{:?}", l.match_kind),
                l.targets.join(","),
            ]
        })
        .collect();
    print!(
        "{}",
        render_table(&["site", "call", "synthetic", "type", "match", "targets"], &rows)
    );
}

fn cmd_taint(
    app: &Path,
    raicc: bool,
    config: Option<&Path>,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let model = load_model(app)?;
    let taint_cfg = taint_config(config)?;
    let prop_cfg = prop_with_sources(cfg, &taint_cfg);
    let subject = if raicc {
        instrumented_model(&model, catalog, &prop_cfg)?.0
    } else {
        model
    };
    let prop = analyzed(&subject, &prop_cfg)?;
    let links = build_links_with(&subject, &prop);
    let leaks = run_taint_with(&subject, &links, &taint_cfg, &prop_cfg)?;
    if table {
        print_leaks_table(&leaks);
    } else {
        print!("{}", to_json_string(&leaks));
    }
    Ok(())
}

fn print_leaks_table(leaks: &[LeakReport]) {
    let rows: Vec<Vec<String>> = leaks
        .iter()
        .map(|l| {
            vec![
                l.source_site.0.clone(),
                l.sink_site.0.clone(),
                l.path
                    .iter()
                    .map(|h| h.component.as_str())
                    .collect::<Vec<_>>()
                    .join(" -> "),
                if l.via_synthetic { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    print!(
        "{}",
        render_table(&["source", "sink", "path", "via synthetic"], &rows)
    );
}

#[derive(Serialize)]
struct VulnCompareReport {
    findings: Vec<VulnFinding>,
    summary: crate::vulnscan::VulnSummary,
}

fn cmd_vulns(
    app: &Path,
    compare: bool,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let model = load_model(app)?;
    let prop = analyzed(&model, cfg)?;
    let before_links = build_links_with(&model, &prop);
    let before = scan(&model, &before_links);
    if !compare {
        if table {
            print_vulns_table(&before);
        } else {
            print!("{}", to_json_string(&before));
        }
        return Ok(());
    }
    let (instrumented, _) = instrumented_model(&model, catalog, cfg)?;
    let prop_after = analyzed(&instrumented, cfg)?;
    let after_links = build_links_with(&instrumented, &prop_after);
    let after = scan(&instrumented, &after_links);
    let report = VulnCompareReport {
        summary: summarize(&before, &after),
        findings: after,
    };
    if table {
        println!(
            "before: {}  after: {}  increase: {}",
            report.summary.before_count, report.summary.after_count, report.summary.increase_pct
        );
        print_vulns_table(&report.findings);
    } else {
        print!("{}", to_json_string(&report));
    }
    Ok(())
}

fn print_vulns_table(findings: &[VulnFinding]) {
    let rows: Vec<Vec<String>> = findings
        .iter()
        .map(|f| {
            vec![
                format!("{:?}", f.kind),
                f.subject.clone(),
                f.detail.clone(),
                if f.via_synthetic { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    print!(
        "{}",
        render_table(&["kind", "subject", "detail", "via synthetic"], &rows)
    );
}

fn cmd_stats(
    dir: &Path,
    mut exclude_prefix: Vec<String>,
    no_default_excludes: bool,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let apps = load_dir(dir)?;
    if !no_default_excludes {
        exclude_prefix.extend(crate::stats::default_exclude_prefixes());
    }
    let stats = crate::stats::corpus_stats(&apps, catalog, &exclude_prefix, cfg)?;
    if table {
        println!(
            "apps: {}  with AICC: {}  sites: {}  sites/app: {:.1}",
            stats.apps, stats.apps_with_aicc, stats.total_sites, stats.sites_per_app
        );
        let rows: Vec<Vec<String>> = stats
            .methods
            .iter()
            .map(|m| {
                vec![
                    m.signature.clone(),
                    m.count.to_string(),
                    m.apps.to_string(),
                    format!("{:.1}%", m.pct),
                ]
            })
            .collect();
        print!("{}", render_table(&["method", "count", "apps", "%"], &rows));
    } else {
        print!("{}", to_json_string(&stats));
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchAppRow {
    name: String,
    expected_leak: bool,
    components: usize,
    before_leaks: usize,
    after_leaks: usize,
    before_class: String,
    after_class: String,
}

#[derive(Serialize)]
struct BenchReport {
    apps: Vec<BenchAppRow>,
    before: Metrics,
    after: Metrics,
}

fn classify(expected_leak: bool, found: bool) -> &'static str {
    match (expected_leak, found) {
        (true, true) => "TP",
        (true, false) => "FN",
        (false, true) => "FP",
        (false, false) => "TN",
    }
}

fn cmd_bench(
    corpus_dir: &Path,
    expected_path: &Path,
    config: Option<&Path>,
    catalog: &AiccCatalog,
    cfg: &PropConfig,
    table: bool,
) -> Result<(), CliError> {
    let apps = load_dir(corpus_dir)?;
    let expected = load_expected(expected_path)?;
    let taint_cfg = taint_config(config)?;
    let prop_cfg = prop_with_sources(cfg, &taint_cfg);

    let mut rows = Vec::new();
    let mut counts = BTreeMap::from([("before", [0usize; 3]), ("after", [0usize; 3])]);
    for (name, model) in &apps {
        let exp = expected.get(name).ok_or_else(|| {
            CliError::input(format!("{} missing from {}", name, expected_path.display()))
        })?;
        if model.manifest.components.len() < exp.min_components {
            return Err(CliError::input(format!(
                "{}: {} components, expected at least {}",
                name,
                model.manifest.components.len(),
                exp.min_components
            )));
        }

        let prop = analyzed(model, &prop_cfg)?;
        let links = build_links_with(model, &prop);
        let before_leaks = run_taint_with(model, &links, &taint_cfg, &prop_cfg)?;

        let sites = find_aicc_sites(model, catalog, &prop);
        let instrumented = instrument(model, &sites)?;
        let prop_after = analyzed(&instrumented, &prop_cfg)?;
        let links_after = build_links_with(&instrumented, &prop_after);
        let after_leaks = run_taint_with(&instrumented, &links_after, &taint_cfg, &prop_cfg)?;

        for (phase, found) in [("before", !before_leaks.is_empty()), ("after", !after_leaks.is_empty())] {
            let c = counts.get_mut(phase).unwrap();
            match classify(exp.leak, found) {
                "TP" => c[0] += 1,
                "FP" => c[1] += 1,
                "FN" => c[2] += 1,
                _ => {}
            }
        }
        rows.push(BenchAppRow {
            name: name.clone(),
            expected_leak: exp.leak,
            components: model.manifest.components.len(),
            before_leaks: before_leaks.len(),
            after_leaks: after_leaks.len(),
            before_class: classify(exp.leak, !before_leaks.is_empty()).to_string(),
            after_class: classify(exp.leak, !after_leaks.is_empty()).to_string(),
        });
    }

    let b = counts["before"];
    let a = counts["after"];
    let report = BenchReport {
        apps: rows,
        before: bench_metrics(b[0], b[1], b[2]),
        after: bench_metrics(a[0], a[1], a[2]),
    };
    if table {
        let rows: Vec<Vec<String>> = report
            .apps
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.components.to_string(),
                    if r.expected_leak { "leak" } else { "clean" }.to_string(),
                    format!("{} ({})", r.before_leaks, r.before_class),
                    format!("{} ({})", r.after_leaks, r.after_class),
                ]
            })
            .collect();
        print!(
            "{}",
            render_table(&["app", "#C", "expected", "before", "after"], &rows)
        );
        for (label, m) in [("before", &report.before), ("after", &report.after)] {
            println!(
                "{}: precision {:.4}  recall {:.4}  f1 {:.4}  (TP {} FP {} FN {})",
                label, m.precision, m.recall, m.f1, m.tp, m.fp, m.fn_
            );
        }
    } else {
        print!("{}", to_json_string(&report));
    }
    Ok(())
}
