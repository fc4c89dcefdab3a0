//! ICC link model: edges from standard ICC call sites (original and
//! synthetic) to target components, via explicit target classes or
//! intent-filter matching.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::coalprop::{AbstractValue, IntentValue, PropConfig, PropResult};
use crate::mir::{AppModel, ComponentKind, Manifest, Operand, SiteId, StatementKind};

/// The four standard ICC entry points and the component type each launches.
pub const STANDARD_ICC: &[(&str, ComponentKind)] = &[
    ("startActivity", ComponentKind::Activity),
    ("startActivityForResult", ComponentKind::Activity),
    ("startService", ComponentKind::Service),
    ("sendBroadcast", ComponentKind::BroadcastReceiver),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatchKind {
    Explicit,
    Implicit,
}

/// One resolved edge from an ICC call site to its target components.
///
/// `targets` may be empty: a dangling explicit target (class not declared)
/// or an implicit intent nothing filters for is reported rather than
/// dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct IccLink {
    pub source_class: String,
    pub source_method: String,
    pub source_site: SiteId,
    pub icc_call: String,
    pub synthetic: bool,
    pub target_type: ComponentKind,
    pub targets: Vec<String>,
    pub match_kind: MatchKind,
    /// Joined abstract intent flowing through the call; `None` when the
    /// operand was TOP or not intent-shaped. Carried for the taint engine,
    /// not part of the serialized link.
    pub intent: Option<IntentValue>,
}

impl IccLink {
    /// Identity used for multiset comparisons (ignores the carried intent).
    pub fn key(&self) -> (String, String, String, String, ComponentKind, Vec<String>) {
        (
            self.source_class.clone(),
            self.source_method.clone(),
            self.source_site.0.clone(),
            self.icc_call.clone(),
            self.target_type,
            self.targets.clone(),
        )
    }
}

/// Match one abstract intent against the manifest.
///
/// A non-TOP singleton target class gives an explicit match (empty targets
/// when the class is not declared with the right kind — a dangling link).
/// Otherwise filters decide: some action value must be in the filter's
/// actions, every intent category must be accepted, and schemes must agree
/// when both sides declare one. A TOP action over-approximates to every
/// exported component of the requested type.
pub fn match_intent(
    intent: &IntentValue,
    manifest: &Manifest,
    target_type: ComponentKind,
) -> (MatchKind, Vec<String>) {
    if let Some(class) = intent.target_class.singleton_str() {
        let declared = manifest
            .components
            .iter()
            .any(|c| c.class_name == class && c.kind == target_type);
        let targets = if declared {
            vec![class.to_string()]
        } else {
            Vec::new()
        };
        return (MatchKind::Explicit, targets);
    }

    let mut targets = Vec::new();
    for comp in &manifest.components {
        if comp.kind != target_type {
            continue;
        }
        let matched = if intent.action.is_top() {
            comp.exported()
        } else {
            comp.filters.iter().any(|f| filter_matches(f, intent))
        };
        if matched {
            targets.push(comp.class_name.clone());
        }
    }
    (MatchKind::Implicit, targets)
}

fn filter_matches(filter: &crate::mir::IntentFilter, intent: &IntentValue) -> bool {
    // Action: at least one possible action value is declared by the filter.
    // A filter without actions matches no implicit intent, and an intent
    // without action values matches nothing.
    let action_ok = intent
        .action
        .strings()
        .any(|a| filter.actions.contains(a));
    if !action_ok {
        return false;
    }
    // Categories: every category attached to the intent must be acceptable.
    for category in &intent.categories {
        let ok = category.is_top()
            || category.strings().any(|c| filter.categories.contains(c));
        if !ok {
            return false;
        }
    }
    // Scheme: checked only when both sides declare one.
    if !intent.scheme.is_empty() && !filter.data_schemes.is_empty() {
        let ok = intent.scheme.is_top()
            || intent
                .scheme
                .strings()
                .any(|s| filter.data_schemes.contains(s));
        if !ok {
            return false;
        }
    }
    true
}

/// Build links with a default propagation run.
pub fn build_links(model: &AppModel) -> Result<Vec<IccLink>, crate::coalprop::AnalysisError> {
    let prop = crate::coalprop::analyze_with(model, &PropConfig::default())?;
    Ok(build_links_with(model, &prop))
}

/// One link per standard ICC call site, in model statement order.
pub fn build_links_with(model: &AppModel, prop: &PropResult) -> Vec<IccLink> {
    let mut links = Vec::new();
    for (class, method, _, stmt) in model.statements() {
        let StatementKind::ApiCall { callee, args, .. } = &stmt.kind else {
            continue;
        };
        let Some(&(_, target_type)) = STANDARD_ICC.iter().find(|(n, _)| n == callee) else {
            continue;
        };
        let Some(operand) = args.first() else {
            continue;
        };
        let value = match operand {
            Operand::Local(l) => prop
                .value_before(&stmt.site_id, l)
                .unwrap_or(AbstractValue::Top),
            _ => AbstractValue::Top,
        };
        let intent = joined_intent(&value);
        let (match_kind, targets) = match &intent {
            Some(iv) => match_intent(iv, &model.manifest, target_type),
            // TOP operand: over-approximate to every exported component of
            // the required type.
            None => (
                MatchKind::Implicit,
                model
                    .manifest
                    .components
                    .iter()
                    .filter(|c| c.kind == target_type && c.exported())
                    .map(|c| c.class_name.clone())
                    .collect(),
            ),
        };
        links.push(IccLink {
            source_class: class.name.clone(),
            source_method: method.name.clone(),
            source_site: stmt.site_id.clone(),
            icc_call: callee.clone(),
            synthetic: stmt.is_synthetic(),
            target_type,
            targets,
            match_kind,
            intent,
        });
    }
    links
}

/// Collapse an abstract value into a single intent by joining every intent
/// reachable through it (unwrapping PendingIntents and IntentSenders).
fn joined_intent(value: &AbstractValue) -> Option<IntentValue> {
    let set = value.reachable_intents()?;
    let mut iter = set.into_iter();
    let mut joined = iter.next()?;
    for iv in iter {
        joined.join(&iv, usize::MAX / 2);
    }
    Some(joined)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatError {
    /// `before` is not a sub-multiset of the non-synthetic links in `after`;
    /// the two lists were not built from the same model.
    #[error("link lists mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkStatRow {
    pub component_type: String,
    pub count_before: usize,
    pub added: usize,
    /// Rendered percentage: `+N.N%`, `+0.0%`, or `+∞` when nothing was
    /// there before.
    pub increase_pct: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkStats {
    pub rows: Vec<LinkStatRow>,
}

/// Before/after counting per component type, plus a total row.
pub fn link_stats(before: &[IccLink], after: &[IccLink]) -> Result<LinkStats, StatError> {
    let mut after_counts: BTreeMap<_, usize> = BTreeMap::new();
    for link in after.iter().filter(|l| !l.synthetic) {
        *after_counts.entry(link.key()).or_insert(0) += 1;
    }
    for link in before.iter().filter(|l| !l.synthetic) {
        let slot = after_counts.get_mut(&link.key());
        match slot {
            Some(n) if *n > 0 => *n -= 1,
            _ => {
                return Err(StatError::Mismatch(format!(
                    "link at {} missing from the after list",
                    link.source_site
                )))
            }
        }
    }

    let kinds = [
        ComponentKind::Activity,
        ComponentKind::BroadcastReceiver,
        ComponentKind::Service,
    ];
    let mut rows = Vec::new();
    let mut total_before = 0;
    let mut total_added = 0;
    for kind in kinds {
        let count_before = before.iter().filter(|l| l.target_type == kind).count();
        let added = after
            .iter()
            .filter(|l| l.synthetic && l.target_type == kind)
            .count();
        total_before += count_before;
        total_added += added;
        rows.push(LinkStatRow {
            component_type: kind.to_string(),
            count_before,
            added,
            increase_pct: render_increase(count_before, added),
        });
    }
    rows.push(LinkStatRow {
        component_type: "Total".to_string(),
        count_before: total_before,
        added: total_added,
        increase_pct: render_increase(total_before, total_added),
    });
    Ok(LinkStats { rows })
}

pub(crate) fn render_increase(before: usize, added: usize) -> String {
    if added == 0 {
        "+0.0%".to_string()
    } else if before == 0 {
        "+∞".to_string()
    } else {
        format!("+{:.1}%", added as f64 / before as f64 * 100.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AiccCatalog;
    use crate::coalprop::analyze;
    use crate::instrument::instrument;
    use crate::mir::parse_app;
    use crate::resolver::find_aicc_sites;

    fn links_of(src: &str) -> Vec<IccLink> {
        build_links(&parse_app(src).unwrap()).unwrap()
    }

    #[test]
    fn explicit_start_activity_link() {
        let src = r#"
app "icc-sample"
manifest {
  activity com.s.MainActivity {}
  activity com.s.TargetActivity {}
}
class com.s.MainActivity extends Activity {
  method onCreate() {
    intent = new Intent
    intent.setClass("com.s.TargetActivity")
    intent.putExtra("data", "secret")
    call startActivity(intent)
  }
}
class com.s.TargetActivity extends Activity {}
"#;
        let links = links_of(src);
        assert_eq!(links.len(), 1);
        let link = &links[0];
        assert_eq!(link.target_type, ComponentKind::Activity);
        assert_eq!(link.match_kind, MatchKind::Explicit);
        assert_eq!(link.targets, vec!["com.s.TargetActivity".to_string()]);
        assert!(!link.synthetic);
    }

    #[test]
    fn aicc_only_app_has_no_links_until_instrumented() {
        let src = r#"
app "alarm"
manifest {
  receiver com.m.AlarmListener {}
}
class com.m.Main extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.m.AlarmListener")
    pi = PendingIntent.getBroadcast(i, 0)
    t = const 5000
    call android.app.AlarmManager.set(0, t, pi)
  }
}
class com.m.AlarmListener extends BroadcastReceiver {}
"#;
        let model = parse_app(src).unwrap();
        let before = build_links(&model).unwrap();
        assert!(before.is_empty());

        let prop = analyze(&model).unwrap();
        let sites = find_aicc_sites(&model, &AiccCatalog::shipped(), &prop);
        let instrumented = instrument(&model, &sites).unwrap();
        let after = build_links(&instrumented).unwrap();
        assert_eq!(after.len(), 1);
        assert!(after[0].synthetic);
        assert_eq!(after[0].target_type, ComponentKind::BroadcastReceiver);
        assert_eq!(after[0].match_kind, MatchKind::Explicit);
        assert_eq!(after[0].targets, vec!["com.m.AlarmListener".to_string()]);
    }

    #[test]
    fn no_icc_calls_no_links() {
        let links = links_of(
            r#"app "x" manifest {} class C extends Plain { method m() { x = const 1 } }"#,
        );
        assert!(links.is_empty());
    }

    #[test]
    fn implicit_action_match() {
        let src = r#"
app "x"
manifest {
  receiver com.x.R {
    filter { action "com.x.PING" }
  }
  receiver com.x.Other {
    filter { action "com.x.PONG" }
  }
}
class com.x.Main extends Activity {
  method m() {
    i = new Intent
    i.setAction("com.x.PING")
    call sendBroadcast(i)
  }
}
class com.x.R extends BroadcastReceiver {}
class com.x.Other extends BroadcastReceiver {}
"#;
        let links = links_of(src);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].match_kind, MatchKind::Implicit);
        assert_eq!(links[0].targets, vec!["com.x.R".to_string()]);
    }

    #[test]
    fn category_and_scheme_must_agree() {
        let manifest = r#"
app "x"
manifest {
  activity com.x.A {
    filter { action "GO" category "CAT" scheme "https" }
  }
}
class com.x.A extends Activity {
  method m() {
    i = new Intent
    i.setAction("GO")
    i.addCategory("CAT")
    i.setScheme("https")
    call startActivity(i)
    j = new Intent
    j.setAction("GO")
    j.addCategory("OTHER")
    call startActivity(j)
    k = new Intent
    k.setAction("GO")
    k.setScheme("ftp")
    call startActivity(k)
  }
}
"#;
        let links = links_of(manifest);
        assert_eq!(links.len(), 3);
        assert_eq!(links[0].targets, vec!["com.x.A".to_string()]);
        assert!(links[1].targets.is_empty(), "category mismatch");
        assert!(links[2].targets.is_empty(), "scheme mismatch");
    }

    #[test]
    fn top_action_matches_every_exported_component_of_type() {
        let src = r#"
app "x"
manifest {
  receiver com.x.Exported {
    exported: true
  }
  receiver com.x.Hidden {}
  activity com.x.Act {
    exported: true
  }
}
class com.x.Main extends Activity {
  method m(i) {
    call sendBroadcast(i)
  }
}
class com.x.Exported extends BroadcastReceiver {}
class com.x.Hidden extends BroadcastReceiver {}
class com.x.Act extends Activity {}
"#;
        // The intent comes in as a TOP parameter.
        let links = links_of(src);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].match_kind, MatchKind::Implicit);
        assert_eq!(links[0].targets, vec!["com.x.Exported".to_string()]);
    }

    #[test]
    fn dangling_explicit_target_kept_with_empty_targets() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method m() {
    i = new Intent
    i.setClass("com.x.NotDeclared")
    call startService(i)
  }
}
"#;
        let links = links_of(src);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].match_kind, MatchKind::Explicit);
        assert!(links[0].targets.is_empty());
    }

    fn mk_link(kind: ComponentKind, synthetic: bool, n: usize) -> IccLink {
        IccLink {
            source_class: "C".into(),
            source_method: "m".into(),
            source_site: crate::mir::SiteId(format!("s{}{:?}{}", n, kind, synthetic)),
            icc_call: "startActivity".into(),
            synthetic,
            target_type: kind,
            targets: vec!["T".into()],
            match_kind: MatchKind::Explicit,
            intent: None,
        }
    }

    #[test]
    fn stats_arithmetic() {
        let before: Vec<IccLink> = (0..10).map(|n| mk_link(ComponentKind::Activity, false, n)).collect();
        let mut after = before.clone();
        after.extend((10..15).map(|n| mk_link(ComponentKind::Activity, true, n)));
        let stats = link_stats(&before, &after).unwrap();
        let activity = &stats.rows[0];
        assert_eq!(activity.component_type, "Activity");
        assert_eq!(activity.count_before, 10);
        assert_eq!(activity.added, 5);
        assert_eq!(activity.increase_pct, "+50.0%");
    }

    #[test]
    fn zero_denominator_renders_infinity() {
        let before: Vec<IccLink> = Vec::new();
        let after: Vec<IccLink> = (0..2).map(|n| mk_link(ComponentKind::Service, true, n)).collect();
        let stats = link_stats(&before, &after).unwrap();
        let service = stats
            .rows
            .iter()
            .find(|r| r.component_type == "Service")
            .unwrap();
        assert_eq!(service.increase_pct, "+∞");
    }

    #[test]
    fn mismatched_lists_rejected() {
        let before = vec![mk_link(ComponentKind::Activity, false, 0)];
        let after: Vec<IccLink> = Vec::new();
        assert!(link_stats(&before, &after).is_err());
    }
}
