//! Rewrites an app model by inserting standard ICC calls right after each
//! AICC call site, one per resolved (target type, intent) pair:
//! `startActivity` (or `startActivityForResult` when the catalog entry
//! expects a result), `startService`, `sendBroadcast`. Unresolved sites get
//! all three calls carrying the unresolved ICC object, so downstream
//! analyses keep an over-approximated link.
//!
//! Inserted statements carry `synthetic_tag = "raicc"` and fresh site ids;
//! original statements, their site ids and their order are untouched.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::coalprop::TargetType;
use crate::mir::{AppModel, SiteId, Statement, StatementKind};
use crate::resolver::AiccSite;

pub const SYNTHETIC_TAG: &str = "raicc";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstrumentError {
    /// The site list references statements that are not in the model.
    #[error("stale sites: {0:?}")]
    StaleSites(Vec<SiteId>),
}

/// Insert the synthetic standard-ICC calls for every site.
///
/// `sites` must come from [`crate::resolver::find_aicc_sites`] over this
/// exact model. The rewrite is idempotent: a site whose synthetic calls are
/// already in place is skipped, so instrumenting twice changes nothing.
pub fn instrument(model: &AppModel, sites: &[AiccSite]) -> Result<AppModel, InstrumentError> {
    let index = model.site_index();
    let stale: Vec<SiteId> = sites
        .iter()
        .filter(|s| !index.contains_key(&s.site_id))
        .map(|s| s.site_id.clone())
        .collect();
    if !stale.is_empty() {
        return Err(InstrumentError::StaleSites(stale));
    }

    let mut used_ids: BTreeSet<String> = index.keys().map(|s| s.0.clone()).collect();
    let by_site: BTreeMap<&SiteId, &AiccSite> =
        sites.iter().map(|s| (&s.site_id, s)).collect();

    let mut out = model.clone();
    for class in &mut out.classes {
        for method in &mut class.methods {
            if !method
                .body
                .iter()
                .any(|stmt| by_site.contains_key(&stmt.site_id))
            {
                continue;
            }
            let old_body = std::mem::take(&mut method.body);
            let len = old_body.len();
            let mut new_body = Vec::with_capacity(len);
            for (idx, stmt) in old_body.iter().enumerate() {
                new_body.push(stmt.clone());
                let Some(site) = by_site.get(&stmt.site_id) else {
                    continue;
                };
                let already_done = old_body
                    .get(idx + 1)
                    .map(|next| next.synthetic_tag.as_deref() == Some(SYNTHETIC_TAG))
                    .unwrap_or(false);
                if already_done {
                    continue;
                }
                for (k, (callee, operand)) in launches_for(site).into_iter().enumerate() {
                    let site_id = fresh_site_id(&mut used_ids, &site.site_id, k + 1);
                    new_body.push(Statement {
                        kind: StatementKind::ApiCall {
                            dest: None,
                            callee: callee.to_string(),
                            args: vec![operand],
                        },
                        site_id,
                        synthetic_tag: Some(SYNTHETIC_TAG.to_string()),
                    });
                }
            }
            method.body = new_body;
            method.rebuild_labels();
        }
    }
    debug_assert!(crate::mir::validate(&out).is_ok());
    Ok(out)
}

/// The synthetic calls for one site, in insertion order: activities before
/// services before broadcasts, intents in origin order.
fn launches_for(site: &AiccSite) -> Vec<(&'static str, crate::mir::Operand)> {
    let activity_call = if site.entry.expects_result {
        "startActivityForResult"
    } else {
        "startActivity"
    };
    if site.unresolved {
        return vec![
            (activity_call, site.icc_operand.clone()),
            ("startService", site.icc_operand.clone()),
            ("sendBroadcast", site.icc_operand.clone()),
        ];
    }
    site.resolved
        .iter()
        .map(|launch| {
            let callee = match launch.target_type {
                TargetType::Activity => activity_call,
                TargetType::Service => "startService",
                TargetType::BroadcastReceiver => "sendBroadcast",
            };
            (callee, launch.operand.clone())
        })
        .collect()
}

fn fresh_site_id(used: &mut BTreeSet<String>, base: &SiteId, k: usize) -> SiteId {
    let mut n = k;
    loop {
        let candidate = format!("{}#r{}", base, n);
        if used.insert(candidate.clone()) {
            return SiteId(candidate);
        }
        n += 1;
    }
}

/// True iff any statement carries the instrumenter's synthetic tag.
pub fn is_instrumented(model: &AppModel) -> bool {
    model
        .statements()
        .any(|(_, _, _, stmt)| stmt.synthetic_tag.as_deref() == Some(SYNTHETIC_TAG))
}

/// Remove every synthetic statement, recovering the pre-instrumentation
/// model.
pub fn strip_synthetic(model: &AppModel) -> AppModel {
    let mut out = model.clone();
    for class in &mut out.classes {
        for method in &mut class.methods {
            method.body.retain(|stmt| !stmt.is_synthetic());
            method.rebuild_labels();
        }
    }
    out
}

/// Total number of statements in the model.
pub fn statement_count(model: &AppModel) -> usize {
    model.statements().count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AiccCatalog;
    use crate::coalprop::analyze;
    use crate::mir::parse_app;
    use crate::resolver::find_aicc_sites;

    fn pipeline(src: &str) -> (AppModel, Vec<AiccSite>, AppModel) {
        let model = parse_app(src).unwrap();
        let prop = analyze(&model).unwrap();
        let sites = find_aicc_sites(&model, &AiccCatalog::shipped(), &prop);
        let out = instrument(&model, &sites).unwrap();
        (model, sites, out)
    }

    const LISTING_STYLE: &str = r#"
app "sample"
manifest {
  activity com.s.Target {}
}
class com.s.Main extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.s.Target")
    pi = PendingIntent.getActivity(i, 0)
    t = const 5000
    call android.app.AlarmManager.set(0, t, pi)
  }
}
class com.s.Target extends Activity {}
"#;

    #[test]
    fn start_activity_inserted_right_after_the_aicc_call() {
        let (_, _, out) = pipeline(LISTING_STYLE);
        let body = &out.class("com.s.Main").unwrap().methods[0].body;
        assert_eq!(body.len(), 6);
        let inserted = &body[5];
        assert_eq!(inserted.synthetic_tag.as_deref(), Some("raicc"));
        match &inserted.kind {
            StatementKind::ApiCall { callee, args, .. } => {
                assert_eq!(callee, "startActivity");
                assert_eq!(args, &vec![crate::mir::Operand::Local("i".into())]);
            }
            other => panic!("unexpected {:?}", other),
        }
        assert!(is_instrumented(&out));
    }

    #[test]
    fn model_without_sites_is_unchanged() {
        let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    x = const 1
  }
}
"#;
        let model = parse_app(src).unwrap();
        let out = instrument(&model, &[]).unwrap();
        assert_eq!(model, out);
        assert!(!is_instrumented(&out));
    }

    #[test]
    fn insertion_order_a_then_s_then_r_intents_by_origin() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    c = const 1
    i1 = new Intent
    i1.setClass("com.x.A")
    i2 = new Intent
    i2.setClass("com.x.B")
    if c goto P2
    pi = PendingIntent.getActivity(i1, 0)
    goto DONE
    label P2
    if c goto P3
    pi = PendingIntent.getActivity(i2, 0)
    goto DONE
    label P3
    pi = PendingIntent.getBroadcast(i1, 0)
    label DONE
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
  }
}
"#;
        let (before, sites, out) = pipeline(src);
        assert_eq!(sites[0].resolved.len(), 3);
        let body = &out.class("com.x.Main").unwrap().methods[0].body;
        let synth: Vec<(&str, &str)> = body
            .iter()
            .filter(|s| s.is_synthetic())
            .map(|s| match &s.kind {
                StatementKind::ApiCall { callee, args, .. } => {
                    (callee.as_str(), args[0].as_local().unwrap())
                }
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            synth,
            vec![
                ("startActivity", "i1"),
                ("startActivity", "i2"),
                ("sendBroadcast", "i1"),
            ]
        );
        // Count law: exactly |resolved| statements were added.
        assert_eq!(
            statement_count(&out) - statement_count(&before),
            sites.iter().map(|s| s.insertion_count()).sum::<usize>()
        );
        // Placement: consecutive indices right after the AICC statement.
        let aicc_idx = body
            .iter()
            .position(|s| matches!(&s.kind, StatementKind::ApiCall { callee, .. } if callee.contains("AlarmManager")))
            .unwrap();
        for k in 1..=3 {
            assert!(body[aicc_idx + k].is_synthetic());
        }
    }

    #[test]
    fn expects_result_uses_start_activity_for_result() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    i = new Intent
    pi = PendingIntent.getActivity(i, 0)
    s = pi.getIntentSender()
    call android.app.Activity.startIntentSenderForResult(s, 1, 0, 0, 0, 0)
  }
}
"#;
        let (_, _, out) = pipeline(src);
        let synth: Vec<String> = out
            .statements()
            .filter(|(_, _, _, s)| s.is_synthetic())
            .map(|(_, _, _, s)| match &s.kind {
                StatementKind::ApiCall { callee, .. } => callee.clone(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(synth, vec!["startActivityForResult".to_string()]);
    }

    #[test]
    fn fallback_inserts_all_three_calls() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method onCreate() {
    pi = call com.x.F.opaque()
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
  }
}
"#;
        let (before, _, out) = pipeline(src);
        let synth: Vec<String> = out
            .statements()
            .filter(|(_, _, _, s)| s.is_synthetic())
            .map(|(_, _, _, s)| match &s.kind {
                StatementKind::ApiCall { callee, args, .. } => {
                    assert_eq!(args[0], crate::mir::Operand::Local("pi".into()));
                    callee.clone()
                }
                _ => panic!(),
            })
            .collect();
        assert_eq!(synth, vec!["startActivity", "startService", "sendBroadcast"]);
        assert_eq!(statement_count(&out) - statement_count(&before), 3);
    }

    #[test]
    fn instrument_is_idempotent() {
        let (_, _, once) = pipeline(LISTING_STYLE);
        let prop = analyze(&once).unwrap();
        let sites2 = find_aicc_sites(&once, &AiccCatalog::shipped(), &prop);
        let twice = instrument(&once, &sites2).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stripping_synthetic_recovers_the_input() {
        let (before, _, out) = pipeline(LISTING_STYLE);
        assert_eq!(strip_synthetic(&out), before);
        assert!(!is_instrumented(&strip_synthetic(&out)));
    }

    #[test]
    fn stale_sites_rejected() {
        let model = parse_app(LISTING_STYLE).unwrap();
        let prop = analyze(&model).unwrap();
        let mut sites = find_aicc_sites(&model, &AiccCatalog::shipped(), &prop);
        sites[0].site_id = SiteId("gone#0".into());
        let err = instrument(&model, &sites).unwrap_err();
        assert!(matches!(err, InstrumentError::StaleSites(ref v) if v.len() == 1));
    }

    #[test]
    fn instrumented_output_reparses() {
        let (_, _, out) = pipeline(LISTING_STYLE);
        let text = crate::mir::serialize_app(&out);
        let reparsed = parse_app(&text).unwrap();
        assert_eq!(out, reparsed);
    }

    use crate::resolver::AiccSite;
}
