//! ICC-aware taint analysis.
//!
//! Taint is tracked per extra key, never per whole intent: a tainted value
//! put under key `k` taints exactly the `getExtra("k")` reads reachable
//! through an ICC link, so components reading other keys stay clean.
//!
//! The engine iterates the constant propagation: each round seeds the
//! incoming-intent extras of every link target with the tainted tokens
//! currently flowing through the link's intent, until no new
//! (component, key, source) fact appears. Source-to-sink reachability is
//! then read off the final propagation result.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::coalprop::{
    analyze_with, AbstractValue, AnalysisError, IntentValue, PropConfig, ValueSet,
};
use crate::linker::IccLink;
use crate::mir::{AppModel, Operand, SiteId, StatementKind};

/// Source and sink API signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintConfig {
    pub sources: BTreeSet<String>,
    pub sinks: BTreeSet<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("taint config error at line {line}: {message}")]
pub struct TaintConfigError {
    pub line: usize,
    pub message: String,
}

const SHIPPED: &str = include_str!("../data/taint_default.txt");

impl TaintConfig {
    /// The configuration shipped with the crate (`data/taint_default.txt`).
    pub fn shipped() -> TaintConfig {
        load_taint_config(SHIPPED).expect("shipped taint config must load")
    }
}

impl Default for TaintConfig {
    fn default() -> Self {
        TaintConfig::shipped()
    }
}

/// Parse `source SIGNATURE` / `sink SIGNATURE` lines; `#` starts a comment.
pub fn load_taint_config(text: &str) -> Result<TaintConfig, TaintConfigError> {
    let mut sources = BTreeSet::new();
    let mut sinks = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (kind, sig) = trimmed.split_once(char::is_whitespace).ok_or_else(|| {
            TaintConfigError {
                line,
                message: "expected 'source SIGNATURE' or 'sink SIGNATURE'".into(),
            }
        })?;
        let sig = sig.trim().to_string();
        match kind {
            "source" => sources.insert(sig),
            "sink" => sinks.insert(sig),
            other => {
                return Err(TaintConfigError {
                    line,
                    message: format!("unknown directive '{}'", other),
                })
            }
        };
    }
    if let Some(overlap) = sources.intersection(&sinks).next() {
        return Err(TaintConfigError {
            line: 0,
            message: format!("'{}' is both a source and a sink", overlap),
        });
    }
    Ok(TaintConfig { sources, sinks })
}

/// One component boundary on a leak path: the component and the site where
/// the tainted value entered it (the source call itself, or the
/// `getExtra` read on the incoming intent).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PathHop {
    pub component: String,
    pub site: SiteId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LeakReport {
    pub source_site: SiteId,
    pub sink_site: SiteId,
    pub path: Vec<PathHop>,
    pub crosses_icc: bool,
    pub via_synthetic: bool,
}

#[derive(Debug, Clone)]
struct Seed {
    hops: Vec<PathHop>,
    via_synthetic: bool,
}

/// Run the taint analysis with default propagation tunables.
pub fn run_taint(
    model: &AppModel,
    links: &[IccLink],
    config: &TaintConfig,
) -> Result<Vec<LeakReport>, AnalysisError> {
    run_taint_with(model, links, config, &PropConfig::default())
}

/// Run the taint analysis; `base` supplies the propagation tunables.
pub fn run_taint_with(
    model: &AppModel,
    links: &[IccLink],
    config: &TaintConfig,
    base: &PropConfig,
) -> Result<Vec<LeakReport>, AnalysisError> {
    let site_class: BTreeMap<SiteId, String> = model
        .statements()
        .map(|(c, _, _, stmt)| (stmt.site_id.clone(), c.name.clone()))
        .collect();

    // (component, extra key, source site) -> how the taint got there.
    let mut seeds: BTreeMap<(String, String, SiteId), Seed> = BTreeMap::new();
    let mut prop;
    loop {
        let cfg = PropConfig {
            taint_sources: config.sources.clone(),
            incoming_extras: incoming_from_seeds(&seeds),
            ..base.clone()
        };
        prop = analyze_with(model, &cfg)?;

        let mut changed = false;
        for link in links {
            if link.targets.is_empty() {
                continue;
            }
            let Some(intent) = link_intent(model, &prop, link) else {
                continue;
            };
            for (key, vs) in &intent.extras {
                for token in vs.tainted_tokens() {
                    for target in &link.targets {
                        let seed_key = (target.clone(), key.clone(), token.clone());
                        if seeds.contains_key(&seed_key) {
                            continue;
                        }
                        let mut prefix = path_prefix(
                            &seeds,
                            &site_class,
                            &link.source_class,
                            token,
                        );
                        let via = prefix.1 || link.synthetic;
                        let entry = entry_hop_site(model, target, key)
                            .unwrap_or_else(|| link.source_site.clone());
                        prefix.0.push(PathHop {
                            component: target.clone(),
                            site: entry,
                        });
                        seeds.insert(
                            seed_key,
                            Seed {
                                hops: prefix.0,
                                via_synthetic: via,
                            },
                        );
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Every sink argument carrying a tainted token is one leak.
    let mut leaks: BTreeSet<LeakReport> = BTreeSet::new();
    for (class, _, _, stmt) in model.statements() {
        let StatementKind::ApiCall { callee, args, .. } = &stmt.kind else {
            continue;
        };
        if !config.sinks.contains(callee) {
            continue;
        }
        for arg in args {
            let Operand::Local(local) = arg else {
                continue;
            };
            let Ok(AbstractValue::Scalar(vs)) = prop.value_before(&stmt.site_id, local) else {
                continue;
            };
            for token in vs.tainted_tokens() {
                let (path, via) = path_prefix(&seeds, &site_class, &class.name, token);
                let components: BTreeSet<&str> =
                    path.iter().map(|h| h.component.as_str()).collect();
                leaks.insert(LeakReport {
                    source_site: token.clone(),
                    sink_site: stmt.site_id.clone(),
                    crosses_icc: components.len() > 1,
                    via_synthetic: via,
                    path,
                });
            }
        }
    }
    Ok(leaks.into_iter().collect())
}

fn incoming_from_seeds(
    seeds: &BTreeMap<(String, String, SiteId), Seed>,
) -> BTreeMap<String, BTreeMap<String, ValueSet>> {
    let mut out: BTreeMap<String, BTreeMap<String, ValueSet>> = BTreeMap::new();
    for (class, key, source) in seeds.keys() {
        out.entry(class.clone())
            .or_default()
            .entry(key.clone())
            .or_insert_with(ValueSet::empty)
            .insert(
                crate::coalprop::ScalarValue::Tainted(source.clone()),
                usize::MAX / 2,
            );
    }
    out
}

/// The intent currently flowing through a link's call site.
fn link_intent(model: &AppModel, prop: &crate::coalprop::PropResult, link: &IccLink) -> Option<IntentValue> {
    let index = model.site_index();
    let loc = index.get(&link.source_site)?;
    let stmt = &model.classes[loc.class_idx].methods[loc.method_idx].body[loc.stmt_idx];
    let StatementKind::ApiCall { args, .. } = &stmt.kind else {
        return None;
    };
    let Operand::Local(local) = args.first()? else {
        return None;
    };
    let value = prop.value_before(&link.source_site, local).ok()?;
    let set = value.reachable_intents()?;
    let mut iter = set.into_iter();
    let mut joined = iter.next()?;
    for iv in iter {
        joined.join(&iv, usize::MAX / 2);
    }
    Some(joined)
}

/// Hops from the source statement up to (and including) the given component.
fn path_prefix(
    seeds: &BTreeMap<(String, String, SiteId), Seed>,
    site_class: &BTreeMap<SiteId, String>,
    component: &str,
    source: &SiteId,
) -> (Vec<PathHop>, bool) {
    let source_class = site_class.get(source);
    if source_class.map(String::as_str) == Some(component) {
        return (
            vec![PathHop {
                component: component.to_string(),
                site: source.clone(),
            }],
            false,
        );
    }
    // The taint entered through an incoming intent; take the first recorded
    // seed for this component and source (deterministic by key order).
    for ((class, _, src), seed) in seeds {
        if class == component && src == source {
            return (seed.hops.clone(), seed.via_synthetic);
        }
    }
    // No recorded entry (source in a helper class): attribute the hop to the
    // class containing the source statement.
    (
        vec![PathHop {
            component: source_class.cloned().unwrap_or_else(|| component.to_string()),
            site: source.clone(),
        }],
        false,
    )
}

/// First `getExtra(key)` read of the incoming intent in the component.
fn entry_hop_site(model: &AppModel, class_name: &str, key: &str) -> Option<SiteId> {
    let class = model.class(class_name)?;
    let mut first_get_intent = None;
    for method in &class.methods {
        let mut incoming: BTreeSet<&str> = BTreeSet::new();
        for stmt in &method.body {
            match &stmt.kind {
                StatementKind::GetIncomingIntent { dest } => {
                    incoming.insert(dest);
                    if first_get_intent.is_none() {
                        first_get_intent = Some(stmt.site_id.clone());
                    }
                }
                StatementKind::GetExtra { intent, key: k, .. }
                    if k == key && incoming.contains(intent.as_str()) =>
                {
                    return Some(stmt.site_id.clone());
                }
                _ => {}
            }
        }
    }
    first_get_intent
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AiccCatalog;
    use crate::coalprop::analyze_with;
    use crate::instrument::instrument;
    use crate::linker::build_links_with;
    use crate::mir::parse_app;
    use crate::resolver::find_aicc_sites;

    fn leaks_of(model: &AppModel) -> Vec<LeakReport> {
        let config = TaintConfig::shipped();
        let cfg = PropConfig {
            taint_sources: config.sources.clone(),
            ..Default::default()
        };
        let prop = analyze_with(model, &cfg).unwrap();
        let links = build_links_with(model, &prop);
        run_taint_with(model, &links, &config, &cfg).unwrap()
    }

    fn instrumented(model: &AppModel) -> AppModel {
        let prop = analyze_with(model, &PropConfig::default()).unwrap();
        let sites = find_aicc_sites(model, &AiccCatalog::shipped(), &prop);
        instrument(model, &sites).unwrap()
    }

    const LEAK_APP: &str = r#"
app "leak"
manifest {
  activity com.l.Main {}
  activity com.l.Sinker {}
}
class com.l.Main extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.l.Sinker")
    imei = call android.telephony.TelephonyManager.getDeviceId()
    i.putExtra("DroidBench", imei)
    pi = PendingIntent.getActivity(i, 0)
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
  }
}
class com.l.Sinker extends Activity {
  method onCreate() {
    in = getIntent()
    v = in.getExtra("DroidBench")
    call sinkLog(v)
  }
}
"#;

    #[test]
    fn aicc_leak_appears_only_after_instrumentation() {
        let model = parse_app(LEAK_APP).unwrap();
        assert!(leaks_of(&model).is_empty(), "no leak before instrumentation");

        let inst = instrumented(&model);
        let leaks = leaks_of(&inst);
        assert_eq!(leaks.len(), 1);
        let leak = &leaks[0];
        assert!(leak.via_synthetic);
        assert!(leak.crosses_icc);
        assert_eq!(leak.source_site.as_str(), "com.l.Main.onCreate#2");
        assert_eq!(leak.path.len(), 2);
        assert_eq!(leak.path[0].component, "com.l.Main");
        assert_eq!(leak.path[1].component, "com.l.Sinker");
    }

    #[test]
    fn source_without_sink_is_clean() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method m() {
    imei = call android.telephony.TelephonyManager.getDeviceId()
  }
}
"#;
        let model = parse_app(src).unwrap();
        assert!(leaks_of(&model).is_empty());
    }

    #[test]
    fn intra_component_leak_is_single_hop() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method m() {
    imei = call android.telephony.TelephonyManager.getDeviceId()
    call sinkLog(imei)
  }
}
"#;
        let model = parse_app(src).unwrap();
        let leaks = leaks_of(&model);
        assert_eq!(leaks.len(), 1);
        assert!(!leaks[0].crosses_icc);
        assert!(!leaks[0].via_synthetic);
        assert_eq!(leaks[0].path.len(), 1);
    }

    #[test]
    fn three_component_chain_has_three_hops() {
        let src = r#"
app "chain"
manifest {
  activity com.c.First {}
  receiver com.c.Second {}
  service com.c.Third {}
}
class com.c.First extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.c.Second")
    imei = call android.telephony.TelephonyManager.getDeviceId()
    i.putExtra("step1", imei)
    pi = PendingIntent.getBroadcast(i, 0)
    t = const 0
    call android.app.AlarmManager.setExact(0, t, pi)
  }
}
class com.c.Second extends BroadcastReceiver {
  method onReceive() {
    in = getIntent()
    v = in.getExtra("step1")
    j = new Intent
    j.setClass("com.c.Third")
    j.putExtra("step2", v)
    call startService(j)
  }
}
class com.c.Third extends Service {
  method onStartCommand() {
    in = getIntent()
    w = in.getExtra("step2")
    call sinkLog(w)
  }
}
"#;
        let model = parse_app(src).unwrap();
        assert!(leaks_of(&model).is_empty());
        let leaks = leaks_of(&instrumented(&model));
        assert_eq!(leaks.len(), 1);
        let leak = &leaks[0];
        assert_eq!(leak.path.len(), 3);
        assert!(leak.via_synthetic);
        assert!(leak.crosses_icc);
        let comps: Vec<&str> = leak.path.iter().map(|h| h.component.as_str()).collect();
        assert_eq!(comps, vec!["com.c.First", "com.c.Second", "com.c.Third"]);
    }

    #[test]
    fn mismatched_extra_key_does_not_leak() {
        let src = LEAK_APP.replace("in.getExtra(\"DroidBench\")", "in.getExtra(\"other\")");
        let model = parse_app(&src).unwrap();
        assert!(leaks_of(&instrumented(&model)).is_empty());
    }

    #[test]
    fn no_source_no_leak() {
        let src = LEAK_APP.replace(
            "imei = call android.telephony.TelephonyManager.getDeviceId()",
            "imei = const \"benign\"",
        );
        let model = parse_app(&src).unwrap();
        assert!(leaks_of(&instrumented(&model)).is_empty());
    }

    #[test]
    fn tainted_sms_body_is_a_leak() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method m() {
    imei = call android.telephony.TelephonyManager.getDeviceId()
    pi = const 0
    z = const 0
    call android.telephony.SmsManager.sendTextMessage("1", "2", imei, pi, z)
  }
}
"#;
        let model = parse_app(src).unwrap();
        let leaks = leaks_of(&model);
        assert_eq!(leaks.len(), 1);
        assert!(!leaks[0].crosses_icc);
    }

    #[test]
    fn config_rejects_overlapping_source_and_sink() {
        let err = load_taint_config("source a.B.c\nsink a.B.c\n").unwrap_err();
        assert!(err.message.contains("both"));
    }

    #[test]
    fn config_parses_shipped_format() {
        let cfg = TaintConfig::shipped();
        assert!(cfg
            .sources
            .contains("android.telephony.TelephonyManager.getDeviceId"));
        assert!(cfg.sinks.contains("sinkLog"));
        assert!(cfg
            .sinks
            .contains("android.telephony.SmsManager.sendTextMessage"));
    }
}
