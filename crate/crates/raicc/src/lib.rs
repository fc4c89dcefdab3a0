//! raicc — a static-analysis toolchain that reveals *atypical*
//! inter-component communication (AICC) in Android-style app models.
//!
//! Framework methods like `AlarmManager.set(int, long, PendingIntent)` can
//! launch another component even though launching is not their primary
//! purpose. Analyses that only know the standard ICC entry points
//! (`startActivity`, `startService`, `sendBroadcast`) miss those links.
//! This crate:
//!
//! 1. parses app models written in a small textual IR ([`mir`]),
//! 2. infers the values of `Intent`/`PendingIntent`/`IntentSender` locals
//!    with a composite constant propagation ([`coalprop`]),
//! 3. matches call sites against an annotated catalog of AICC methods
//!    ([`catalog`], [`resolver`]),
//! 4. rewrites each AICC site into the equivalent standard ICC call
//!    ([`instrument`]),
//! 5. and feeds the enriched model into ICC link resolution ([`linker`]),
//!    taint-based leak detection ([`taint`]) and ICC vulnerability scanning
//!    ([`vulnscan`]).
//!
//! Start with the runnable examples in `examples/` (one per capability), or
//! use the `raicc` binary whose subcommands mirror the pipeline stages.

pub mod catalog;
pub mod cli;
pub mod coalprop;
pub mod config;
pub mod corpus;
pub mod instrument;
pub mod linker;
pub mod mir;
pub mod report;
pub mod resolver;
pub mod stats;
pub mod taint;
pub mod vulnscan;

pub use catalog::{load_catalog, AiccCatalog, AiccCatalogEntry};
pub use coalprop::{analyze, AbstractValue, PropConfig, PropResult};
pub use instrument::{instrument, is_instrumented, strip_synthetic};
pub use linker::{build_links, link_stats, match_intent, IccLink};
pub use mir::{parse_app, serialize_app, AppModel};
pub use resolver::{find_aicc_sites, site_report, AiccSite};
pub use taint::{run_taint, LeakReport, TaintConfig};
pub use vulnscan::{scan, VulnFinding};
