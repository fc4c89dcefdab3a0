//! ICC vulnerability scan over the link model.
//!
//! Two finding classes: an implicit (or dangling) intent another app could
//! intercept, and an exported component with intent filters that a
//! malicious intent can activate.

use serde::Serialize;

use crate::linker::{IccLink, MatchKind};
use crate::mir::AppModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VulnKind {
    InterceptableIntent,
    ExposedComponent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnFinding {
    pub kind: VulnKind,
    /// The ICC call site, or the component name.
    pub subject: String,
    pub detail: String,
    pub via_synthetic: bool,
}

/// One InterceptableIntent per implicit or dangling link, one
/// ExposedComponent per exported component with at least one filter.
pub fn scan(model: &AppModel, links: &[IccLink]) -> Vec<VulnFinding> {
    let mut findings = Vec::new();
    for link in links {
        let interceptable =
            link.match_kind == MatchKind::Implicit || link.targets.is_empty();
        if !interceptable {
            continue;
        }
        let what = match link.match_kind {
            MatchKind::Implicit => "implicit intent",
            MatchKind::Explicit => "dangling explicit target",
        };
        findings.push(VulnFinding {
            kind: VulnKind::InterceptableIntent,
            subject: link.source_site.0.clone(),
            detail: format!(
                "{} sent by {} in {}.{}",
                what, link.icc_call, link.source_class, link.source_method
            ),
            via_synthetic: link.synthetic,
        });
    }
    for comp in &model.manifest.components {
        if comp.exported() && !comp.filters.is_empty() {
            findings.push(VulnFinding {
                kind: VulnKind::ExposedComponent,
                subject: comp.class_name.clone(),
                detail: format!(
                    "exported {} with {} intent filter(s)",
                    comp.kind.keyword(),
                    comp.filters.len()
                ),
                via_synthetic: false,
            });
        }
    }
    findings
}

/// Before/after summary when scanning in compare mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VulnSummary {
    pub before_count: usize,
    pub after_count: usize,
    pub increase_pct: String,
}

pub fn summarize(before: &[VulnFinding], after: &[VulnFinding]) -> VulnSummary {
    VulnSummary {
        before_count: before.len(),
        after_count: after.len(),
        increase_pct: crate::linker::render_increase(
            before.len(),
            after.len().saturating_sub(before.len()),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AiccCatalog;
    use crate::coalprop::analyze;
    use crate::instrument::instrument;
    use crate::linker::build_links;
    use crate::mir::parse_app;
    use crate::resolver::find_aicc_sites;

    fn scan_src(src: &str) -> Vec<VulnFinding> {
        let model = parse_app(src).unwrap();
        let links = build_links(&model).unwrap();
        scan(&model, &links)
    }

    #[test]
    fn quiet_app_has_no_findings() {
        let src = r#"
app "quiet"
manifest {
  activity com.q.A {}
  activity com.q.B {}
}
class com.q.A extends Activity {
  method m() {
    i = new Intent
    i.setClass("com.q.B")
    call startActivity(i)
  }
}
class com.q.B extends Activity {}
"#;
        assert!(scan_src(src).is_empty());
    }

    #[test]
    fn implicit_send_is_interceptable() {
        let src = r#"
app "x" manifest {}
class com.x.A extends Activity {
  method m() {
    i = new Intent
    i.setAction("com.x.GO")
    call sendBroadcast(i)
  }
}
"#;
        let findings = scan_src(src);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].kind, VulnKind::InterceptableIntent);
        assert!(!findings[0].via_synthetic);
    }

    #[test]
    fn exported_filtered_component_is_exposed() {
        let src = r#"
app "x"
manifest {
  receiver com.x.R {
    filter { action "A" }
  }
}
class com.x.R extends BroadcastReceiver {}
"#;
        let findings = scan_src(src);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].kind, VulnKind::ExposedComponent);
        assert_eq!(findings[0].subject, "com.x.R");
    }

    #[test]
    fn instrumentation_reveals_new_findings() {
        let src = r#"
app "x" manifest {}
class com.x.Main extends Activity {
  method m() {
    i = new Intent
    i.setAction("com.x.IMPLICIT")
    pi = PendingIntent.getBroadcast(i, 0)
    t = const 0
    call android.app.AlarmManager.set(0, t, pi)
  }
}
"#;
        let model = parse_app(src).unwrap();
        let before = scan(&model, &build_links(&model).unwrap());
        assert!(before.is_empty());

        let prop = analyze(&model).unwrap();
        let sites = find_aicc_sites(&model, &AiccCatalog::shipped(), &prop);
        let inst = instrument(&model, &sites).unwrap();
        let after = scan(&inst, &build_links(&inst).unwrap());
        assert_eq!(after.len(), 1);
        assert!(after[0].via_synthetic);

        let summary = summarize(&before, &after);
        assert_eq!(summary.before_count, 0);
        assert_eq!(summary.after_count, 1);
        assert_eq!(summary.increase_pct, "+∞");
    }
}
