use super::*;

const LISTING_APP: &str = r#"
app "alarm-sample"

manifest {
  receiver com.sample.AlarmListener {}
  activity com.sample.MainActivity {}
}

class com.sample.MainActivity extends Activity {
  method onCreate() {
    i = new Intent
    i.setClass("com.sample.AlarmListener")
    pi = PendingIntent.getBroadcast(i, 0)
    t = const 5000
    call android.app.AlarmManager.set(0, t, pi)
  }
}

class com.sample.AlarmListener extends BroadcastReceiver {
  method onReceive() {
    in = getIntent()
    return
  }
}
"#;

#[test]
fn minimal_empty_app() {
    let model = parse_app("app \"a\" manifest{}").unwrap();
    assert_eq!(model.package_name, "a");
    assert!(model.classes.is_empty());
    assert!(model.manifest.components.is_empty());
}

#[test]
fn alarm_sample_parses() {
    let model = parse_app(LISTING_APP).unwrap();
    assert_eq!(model.manifest.components.len(), 2);
    assert_eq!(model.manifest.components[0].kind, ComponentKind::BroadcastReceiver);
    let main = model.class("com.sample.MainActivity").unwrap();
    assert_eq!(main.methods[0].body.len(), 5);
    // One AICC call statement.
    let calls: Vec<_> = main.methods[0]
        .body
        .iter()
        .filter(|s| matches!(s.kind, StatementKind::ApiCall { .. }))
        .collect();
    assert_eq!(calls.len(), 1);
}

#[test]
fn generated_site_ids_are_stable() {
    let model = parse_app(LISTING_APP).unwrap();
    let main = model.class("com.sample.MainActivity").unwrap();
    assert_eq!(
        main.methods[0].body[0].site_id.as_str(),
        "com.sample.MainActivity.onCreate#0"
    );
}

#[test]
fn explicit_site_ids_win() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    x = const 1 @site(my.id)
  }
}
"#;
    let model = parse_app(src).unwrap();
    assert_eq!(model.classes[0].methods[0].body[0].site_id.as_str(), "my.id");
}

#[test]
fn dangling_label_rejected() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    c = const 1
    goto L9
  }
}
"#;
    let err = parse_app(src).unwrap_err();
    match err {
        MirError::Validation(msg) => assert!(msg.contains("dangling label L9"), "{}", msg),
        other => panic!("expected validation error, got {:?}", other),
    }
}

#[test]
fn duplicate_site_id_rejected() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    x = const 1 @site(dup)
    y = const 2 @site(dup)
  }
}
"#;
    assert!(matches!(parse_app(src), Err(MirError::Validation(_))));
}

#[test]
fn manifest_component_without_class_rejected() {
    let err = parse_app("app \"x\" manifest { activity com.gone.A {} }").unwrap_err();
    assert!(matches!(err, MirError::Validation(_)));
}

#[test]
fn use_before_assignment_rejected() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    i.setAction("a")
  }
}
"#;
    let err = parse_app(src).unwrap_err();
    match err {
        MirError::Validation(msg) => assert!(msg.contains("used before assignment"), "{}", msg),
        other => panic!("unexpected {:?}", other),
    }
}

#[test]
fn branch_merge_requires_assignment_on_both_paths() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    c = const 1
    if c goto L
    i = new Intent
    label L
    i.setAction("a")
  }
}
"#;
    assert!(matches!(parse_app(src), Err(MirError::Validation(_))));
}

#[test]
fn assignment_on_both_branches_accepted() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    c = const 1
    if c goto L
    i = new Intent
    goto M
    label L
    i = new Intent
    label M
    i.setAction("a")
  }
}
"#;
    parse_app(src).unwrap();
}

#[test]
fn parse_error_has_position() {
    let err = parse_app("app 42").unwrap_err();
    match err {
        MirError::Parse { line, col, .. } => {
            assert_eq!(line, 1);
            assert_eq!(col, 5);
        }
        other => panic!("unexpected {:?}", other),
    }
}

#[test]
fn return_value_must_share_the_line() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    x = const 1
    return
    x = const 2
  }
}
"#;
    let model = parse_app(src).unwrap();
    let body = &model.classes[0].methods[0].body;
    assert!(matches!(body[1].kind, StatementKind::Return { value: None }));

    let src2 = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    x = const 1
    return x
  }
}
"#;
    let model2 = parse_app(src2).unwrap();
    let body2 = &model2.classes[0].methods[0].body;
    assert!(matches!(
        &body2[1].kind,
        StatementKind::Return { value: Some(Operand::Local(n)) } if n == "x"
    ));
}

#[test]
fn default_export_rule() {
    let src = r#"
app "x"
manifest {
  receiver com.x.R {
    filter { action "A" }
  }
  receiver com.x.S {}
  receiver com.x.T {
    exported: false
    filter { action "A" }
  }
}
class com.x.R extends BroadcastReceiver {}
class com.x.S extends BroadcastReceiver {}
class com.x.T extends BroadcastReceiver {}
"#;
    let model = parse_app(src).unwrap();
    let comp = |name: &str| model.component(name).unwrap();
    assert!(comp("com.x.R").exported(), "filters imply exported");
    assert!(!comp("com.x.S").exported(), "no filters, not exported");
    assert!(!comp("com.x.T").exported(), "explicit attribute wins");
}

#[test]
fn round_trip_alarm_sample() {
    let model = parse_app(LISTING_APP).unwrap();
    let text = serialize_app(&model);
    let reparsed = parse_app(&text).unwrap();
    assert_eq!(model, reparsed);
}

#[test]
fn round_trip_preserves_synthetic_tags() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    i = new Intent @site(a)
    call startActivity(i) @site(b) @synthetic(raicc)
  }
}
"#;
    let model = parse_app(src).unwrap();
    assert_eq!(
        model.classes[0].methods[0].body[1].synthetic_tag.as_deref(),
        Some("raicc")
    );
    let reparsed = parse_app(&serialize_app(&model)).unwrap();
    assert_eq!(model, reparsed);
}

#[test]
fn round_trip_escapes() {
    let src = r#"
app "quo\"te"
manifest {}
class C extends Plain {
  method m() {
    x = const "line\nbreak\t\\"
  }
}
"#;
    let model = parse_app(src).unwrap();
    assert_eq!(model.package_name, "quo\"te");
    let reparsed = parse_app(&serialize_app(&model)).unwrap();
    assert_eq!(model, reparsed);
}

#[test]
fn reserved_words_cannot_name_locals() {
    let err = parse_app(
        r#"app "x" manifest {} class C extends Plain { method m() { call = const 1 } }"#,
    );
    assert!(err.is_err());
}

#[test]
fn unknown_invoke_target_rejected() {
    let src = r#"
app "x" manifest {}
class C extends Plain {
  method m() {
    invoke nothere()
  }
}
"#;
    let err = parse_app(src).unwrap_err();
    match err {
        MirError::Validation(msg) => assert!(msg.contains("unknown invoke target"), "{}", msg),
        other => panic!("unexpected {:?}", other),
    }
}

#[test]
fn qualified_invoke_target_resolves() {
    let src = r#"
app "x" manifest {}
class com.x.A extends Plain {
  method m() {
    invoke com.x.B.helper()
  }
}
class com.x.B extends Plain {
  method helper() {}
}
"#;
    let model = parse_app(src).unwrap();
    assert_eq!(
        model.resolve_invoke_target("com.x.A", "com.x.B.helper"),
        Some(("com.x.B", "helper"))
    );
}
