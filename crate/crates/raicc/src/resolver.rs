//! AICC site discovery: matches API call statements against the catalog and
//! recovers, for each site, the set of (target component type, wrapped
//! Intent) pairs reachable through the PendingIntent or IntentSender used
//! there.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::catalog::{AiccCatalog, AiccCatalogEntry, IccPosition};
use crate::coalprop::{AbstractValue, IntentValue, PendingIntentValue, PropResult, TargetType};
use crate::mir::{must_assigned_before, AppModel, Operand, SiteId, StatementKind};

/// One launch a synthetic ICC call will be generated for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedLaunch {
    pub target_type: TargetType,
    pub intent: IntentValue,
    /// Operand the instrumenter passes to the synthetic call: the intent's
    /// origin local when it is in scope at the site, otherwise an alias
    /// bound to the same allocation, otherwise the ICC object itself.
    pub operand: Operand,
}

/// One AICC call site with its recovered launches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AiccSite {
    pub site_id: SiteId,
    pub class_name: String,
    pub method_name: String,
    pub entry: AiccCatalogEntry,
    pub resolved: Vec<ResolvedLaunch>,
    /// True when the ICC object's value is TOP; such sites are instrumented
    /// with all three standard ICC calls as a fallback.
    pub unresolved: bool,
    /// The ICC object operand as written at the call.
    pub icc_operand: Operand,
}

impl AiccSite {
    pub fn is_fallback(&self) -> bool {
        self.unresolved
    }

    /// Number of synthetic statements instrumentation will insert here.
    pub fn insertion_count(&self) -> usize {
        if self.unresolved {
            3
        } else {
            self.resolved.len()
        }
    }
}

/// Scan the model for AICC call sites.
///
/// Every API call whose signature and arity match a catalog entry yields
/// exactly one site, in model statement order; unresolvable sites are kept
/// with `unresolved = true`, never dropped. Statements inserted by the
/// instrumenter are excluded, which makes instrumentation idempotent.
pub fn find_aicc_sites(
    model: &AppModel,
    catalog: &AiccCatalog,
    prop: &PropResult,
) -> Vec<AiccSite> {
    let origin_order = statement_order(model);
    let mut sites = Vec::new();

    for class in &model.classes {
        for method in &class.methods {
            let mut assigned: Option<Vec<_>> = None;
            for (idx, stmt) in method.body.iter().enumerate() {
                if stmt.is_synthetic() {
                    continue;
                }
                let StatementKind::ApiCall { callee, args, .. } = &stmt.kind else {
                    continue;
                };
                let Some((entry, icc_operand)) =
                    match_call(catalog, prop, &stmt.site_id, callee, args)
                else {
                    continue;
                };

                let value = match &icc_operand {
                    Operand::Local(l) => prop
                        .value_before(&stmt.site_id, l)
                        .unwrap_or(AbstractValue::Top),
                    _ => AbstractValue::Top,
                };
                let pendings: Vec<PendingIntentValue> = match value {
                    AbstractValue::Pendings(ps) => ps.into_iter().collect(),
                    AbstractValue::Senders(ss) => ss
                        .into_iter()
                        .flat_map(|s| s.wrapped_pending.into_iter())
                        .collect(),
                    _ => Vec::new(),
                };

                let mut resolved = Vec::new();
                if !pendings.is_empty() {
                    let assigned = assigned
                        .get_or_insert_with(|| must_assigned_before(method))
                        .clone();
                    let in_scope = assigned
                        .get(idx)
                        .cloned()
                        .flatten()
                        .unwrap_or_default();
                    let mut pairs: Vec<(TargetType, IntentValue)> = Vec::new();
                    for pv in &pendings {
                        for &t in &pv.target_type {
                            for iv in &pv.wrapped_intents {
                                if !pairs.iter().any(|(pt, pi)| *pt == t && pi == iv) {
                                    pairs.push((t, iv.clone()));
                                }
                            }
                        }
                    }
                    pairs.sort_by(|a, b| {
                        a.0.cmp(&b.0).then_with(|| {
                            origin_rank(&origin_order, &a.1)
                                .cmp(&origin_rank(&origin_order, &b.1))
                                .then_with(|| a.1.cmp(&b.1))
                        })
                    });
                    for (t, iv) in pairs {
                        let operand =
                            choose_operand(prop, &stmt.site_id, &iv, &icc_operand, &in_scope);
                        resolved.push(ResolvedLaunch {
                            target_type: t,
                            intent: iv,
                            operand,
                        });
                    }
                }

                let unresolved = resolved.is_empty();
                sites.push(AiccSite {
                    site_id: stmt.site_id.clone(),
                    class_name: class.name.clone(),
                    method_name: method.name.clone(),
                    entry: entry.clone(),
                    resolved,
                    unresolved,
                    icc_operand,
                });
            }
        }
    }
    sites
}

/// Match one API call against the catalog and locate its ICC object.
///
/// Two call shapes exist: a fully qualified callee
/// (`call android.app.AlarmManager.set(...)`), matched by exact signature
/// and arity, and a receiver-style callee (`call pi.send()`), where the
/// first segment names a local. For receiver-style calls the receiver's
/// abstract value picks the class when it is a known ICC object; otherwise
/// the unqualified method name and arity decide.
fn match_call<'c>(
    catalog: &'c AiccCatalog,
    prop: &PropResult,
    site: &SiteId,
    callee: &str,
    args: &[Operand],
) -> Option<(&'c AiccCatalogEntry, Operand)> {
    let segments: Vec<&str> = callee.split('.').collect();
    if segments.len() == 2 {
        // Receiver-style: `recv.method(...)`.
        let (recv, method) = (segments[0], segments[1]);
        let hint = match prop.value_before(site, recv) {
            Ok(AbstractValue::Pendings(_)) => Some("android.app.PendingIntent"),
            Ok(AbstractValue::Senders(_)) => Some("android.content.IntentSender"),
            _ => None,
        };
        let entry = hint
            .and_then(|class| catalog.lookup(&format!("{}.{}", class, method), args.len()))
            .or_else(|| catalog.lookup_by_method(method, args.len()))?;
        let operand = match entry.icc_position {
            IccPosition::Receiver => Operand::Local(recv.to_string()),
            IccPosition::Param(i) => args.get(i)?.clone(),
        };
        return Some((entry, operand));
    }

    // Qualified callee. Parameter-kind entries match the argument list
    // as written; receiver-kind entries expect the receiver prepended as
    // the first argument (`call android.app.PendingIntent.send(pi)`).
    if let Some(entry) = catalog.lookup(callee, args.len()) {
        if let IccPosition::Param(i) = entry.icc_position {
            return Some((entry, args.get(i)?.clone()));
        }
    }
    if !args.is_empty() {
        if let Some(entry) = catalog.lookup(callee, args.len() - 1) {
            if entry.icc_position == IccPosition::Receiver {
                return Some((entry, args[0].clone()));
            }
        }
    }
    if let Some(entry) = catalog.lookup(callee, args.len()) {
        if entry.icc_position == IccPosition::Receiver {
            // Receiver-kind method written without its receiver: still a
            // matching AICC call, reported as an unresolvable site.
            return Some((entry, Operand::Int(0)));
        }
    }
    None
}

fn choose_operand(
    prop: &PropResult,
    site: &SiteId,
    intent: &IntentValue,
    icc_operand: &Operand,
    in_scope: &std::collections::BTreeSet<String>,
) -> Operand {
    if let Some(origin) = &intent.origin_site {
        if let Some(pre) = prop.pre_values(site) {
            // Prefer the local whose current binding still covers the
            // intent's allocation; deterministic by name order.
            for (local, value) in pre {
                if !in_scope.contains(local) {
                    continue;
                }
                if let AbstractValue::Intents(ivs) = value {
                    if ivs.iter().any(|iv| iv.origin_site.as_ref() == Some(origin)) {
                        return Operand::Local(local.clone());
                    }
                }
            }
        }
    }
    icc_operand.clone()
}

fn statement_order(model: &AppModel) -> BTreeMap<SiteId, usize> {
    model
        .statements()
        .enumerate()
        .map(|(i, (_, _, _, stmt))| (stmt.site_id.clone(), i))
        .collect()
}

fn origin_rank(order: &BTreeMap<SiteId, usize>, iv: &IntentValue) -> usize {
    iv.origin_site
        .as_ref()
        .and_then(|s| order.get(s).copied())
        .unwrap_or(usize::MAX)
}

/// One row of the AICC usage report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteReportRow {
    pub signature: String,
    pub count: usize,
    /// Share of all AICC sites, in percent.
    pub pct: f64,
    /// Sites whose ICC object value was recovered.
    pub resolved: usize,
    /// Resolved launch pairs per target type.
    pub by_type: TypeBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TypeBreakdown {
    pub a: usize,
    pub s: usize,
    pub r: usize,
}

/// Aggregate sites by signature, most used first.
pub fn site_report(sites: &[AiccSite]) -> Vec<SiteReportRow> {
    let total = sites.len();
    let mut by_sig: BTreeMap<&str, SiteReportRow> = BTreeMap::new();
    for site in sites {
        let row = by_sig
            .entry(site.entry.signature.as_str())
            .or_insert_with(|| SiteReportRow {
                signature: site.entry.signature.clone(),
                count: 0,
                pct: 0.0,
                resolved: 0,
                by_type: TypeBreakdown::default(),
            });
        row.count += 1;
        if !site.unresolved {
            row.resolved += 1;
        }
        for launch in &site.resolved {
            match launch.target_type {
                TargetType::Activity => row.by_type.a += 1,
                TargetType::Service => row.by_type.s += 1,
                TargetType::BroadcastReceiver => row.by_type.r += 1,
            }
        }
    }
    let mut rows: Vec<SiteReportRow> = by_sig.into_values().collect();
    for row in &mut rows {
        row.pct = round1(row.count as f64 / total as f64 * 100.0);
    }
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.signature.cmp(&b.signature)));
    rows
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AiccCatalog;
    use crate::coalprop::analyze;
    use crate::mir::parse_app;

    fn sites_of(src: &str) -> Vec<AiccSite> {
        let model = parse_app(src).unwrap();
        let prop = analyze(&model).unwrap();
        find_aicc_sites(&model, &AiccCatalog::shipped(), &prop)
    }

    const ALARM_APP: &str = r#"
app "malware-sample"
manifest {
  receiver com.m.AlarmListener {}
}
class com.m.Main extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.m.AlarmListener")
    pi = PendingIntent.getBroadcast(i, 0)
    t = const 5000
    am = call com.m.Main.getSystemService("alarm")
    call am.set(0, t, pi)
  }
}
class com.m.AlarmListener extends BroadcastReceiver {}
"#;

    #[test]
    fn alarm_set_resolves_to_broadcast_pair() {
        let sites = sites_of(ALARM_APP);
        assert_eq!(sites.len(), 1);
        let site = &sites[0];
        assert_eq!(site.entry.signature, "android.app.AlarmManager.set");
        assert!(!site.unresolved);
        assert_eq!(site.resolved.len(), 1);
        let launch = &site.resolved[0];
        assert_eq!(launch.target_type.coal_char(), 'r');
        assert_eq!(
            launch.intent.target_class.singleton_str(),
            Some("com.m.AlarmListener")
        );
        assert_eq!(launch.operand, Operand::Local("i".into()));
    }

    #[test]
    fn intent_sender_unwraps_recursively() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.x.T")
    pi = PendingIntent.getActivity(i, 0)
    s = pi.getIntentSender()
    call android.app.Activity.startIntentSenderForResult(s, 1, 0, 0, 0, 0)
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites.len(), 1);
        let site = &sites[0];
        assert!(site.entry.expects_result);
        assert_eq!(site.resolved.len(), 1);
        assert_eq!(site.resolved[0].target_type.coal_char(), 'a');
        assert_eq!(
            site.resolved[0].intent.target_class.singleton_str(),
            Some("com.x.T")
        );
    }

    #[test]
    fn receiver_style_send_matches_by_value_kind() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    i = new Intent
    pi = PendingIntent.getService(i, 0)
    call pi.send()
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].entry.signature, "android.app.PendingIntent.send");
        assert_eq!(sites[0].resolved[0].target_type.coal_char(), 's');
    }

    #[test]
    fn qualified_receiver_kind_takes_first_argument() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    i = new Intent
    pi = PendingIntent.getActivity(i, 0)
    call android.app.PendingIntent.send(pi)
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].entry.arity, 0);
        assert!(!sites[0].unresolved);
    }

    #[test]
    fn top_icc_object_is_unresolved_not_dropped() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    pi = call com.x.Factory.opaque()
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites.len(), 1);
        assert!(sites[0].unresolved);
        assert!(sites[0].is_fallback());
        assert!(sites[0].resolved.is_empty());
        assert_eq!(sites[0].insertion_count(), 3);
    }

    #[test]
    fn synthetic_statements_are_not_matched() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    i = new Intent
    pi = PendingIntent.getActivity(i, 0)
    call android.app.AlarmManager.setExact(0, 0, pi)
    call startActivity(i) @synthetic(raicc)
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites.len(), 1);
    }

    #[test]
    fn multiple_intents_produce_multiple_pairs() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    c = const 1
    i1 = new Intent
    i1.setClass("com.x.A")
    i2 = new Intent
    i2.setClass("com.x.B")
    if c goto OTHER
    pi = PendingIntent.getActivity(i1, 0)
    goto DONE
    label OTHER
    pi = PendingIntent.getActivity(i2, 0)
    label DONE
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites[0].resolved.len(), 2);
        // Intents ordered by origin site: i1 before i2.
        assert_eq!(
            sites[0].resolved[0].intent.target_class.singleton_str(),
            Some("com.x.A")
        );
        assert_eq!(
            sites[0].resolved[1].intent.target_class.singleton_str(),
            Some("com.x.B")
        );
    }

    #[test]
    fn report_counts_and_percentages() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method a() {
    i = new Intent
    pi = PendingIntent.getBroadcast(i, 0)
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
    call android.app.AlarmManager.set(0, t, pi)
    call android.app.AlarmManager.set(0, t, pi)
    b = const "hi"
    z = const 0
    call android.telephony.SmsManager.sendTextMessage("1", "2", b, pi, z)
  }
}
"#;
        let rows = site_report(&sites_of(src));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].signature, "android.app.AlarmManager.set");
        assert_eq!(rows[0].count, 3);
        assert_eq!(rows[0].pct, 75.0);
        assert_eq!(rows[1].signature, "android.telephony.SmsManager.sendTextMessage");
        assert_eq!(rows[1].count, 1);
        assert_eq!(rows[1].pct, 25.0);
        assert_eq!(rows[0].by_type.r, 3);
    }

    #[test]
    fn empty_site_list_empty_report() {
        assert!(site_report(&[]).is_empty());
    }

    #[test]
    fn aicc_site_in_helper_resolves_through_inlining() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.x.T")
    pi = PendingIntent.getBroadcast(i, 0)
    invoke schedule(pi)
  }
  method schedule(p) {
    t = const 0
    call android.app.AlarmManager.set(0, t, p)
  }
}
"#;
        let sites = sites_of(src);
        assert_eq!(sites.len(), 1);
        assert!(!sites[0].unresolved);
        assert_eq!(sites[0].method_name, "schedule");
        // The origin local lives in the caller; the synthetic call falls
        // back to the ICC object local.
        assert_eq!(sites[0].resolved[0].operand, Operand::Local("p".into()));
    }
}
