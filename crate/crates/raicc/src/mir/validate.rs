//! Model invariant checks run after parsing and after instrumentation.

use std::collections::BTreeSet;

use super::*;

/// Check every model invariant. Grammar-level problems never reach this
/// point; everything reported here is a [`MirError::Validation`].
pub fn validate(model: &AppModel) -> Result<(), MirError> {
    let mut class_names = BTreeSet::new();
    for class in &model.classes {
        if !class_names.insert(class.name.as_str()) {
            return Err(MirError::Validation(format!(
                "duplicate class {}",
                class.name
            )));
        }
    }

    let mut component_names = BTreeSet::new();
    for comp in &model.manifest.components {
        if !component_names.insert(comp.class_name.as_str()) {
            return Err(MirError::Validation(format!(
                "duplicate component {}",
                comp.class_name
            )));
        }
        if !class_names.contains(comp.class_name.as_str()) {
            return Err(MirError::Validation(format!(
                "component {} has no class definition",
                comp.class_name
            )));
        }
    }

    let mut site_ids = BTreeSet::new();
    for class in &model.classes {
        let mut method_names = BTreeSet::new();
        for method in &class.methods {
            if !method_names.insert(method.name.as_str()) {
                return Err(MirError::Validation(format!(
                    "duplicate method {} in class {}",
                    method.name, class.name
                )));
            }
            validate_method(model, class, method)?;
            for stmt in &method.body {
                if !site_ids.insert(stmt.site_id.clone()) {
                    return Err(MirError::Validation(format!(
                        "duplicate site id {}",
                        stmt.site_id
                    )));
                }
            }
        }
    }
    Ok(())
}

fn validate_method(model: &AppModel, class: &ClassDef, method: &MethodDef) -> Result<(), MirError> {
    // Duplicate labels.
    let mut seen = BTreeSet::new();
    for stmt in &method.body {
        if let StatementKind::Label { name } = &stmt.kind {
            if !seen.insert(name.as_str()) {
                return Err(MirError::Validation(format!(
                    "duplicate label {} in {}.{}",
                    name, class.name, method.name
                )));
            }
        }
    }

    for stmt in &method.body {
        match &stmt.kind {
            StatementKind::Goto { target } | StatementKind::IfGoto { target, .. } => {
                if !method.labels.contains_key(target) {
                    return Err(MirError::Validation(format!(
                        "dangling label {} in {}.{}",
                        target, class.name, method.name
                    )));
                }
            }
            StatementKind::LocalCall { target, .. } => {
                if model.resolve_invoke_target(&class.name, target).is_none() {
                    return Err(MirError::Validation(format!(
                        "unknown invoke target {} in {}.{}",
                        target, class.name, method.name
                    )));
                }
            }
            _ => {}
        }
    }

    // Assigned-before-use on the acyclic approximation of the CFG.
    let assigned = must_assigned_before(method);
    for (idx, stmt) in method.body.iter().enumerate() {
        let Some(in_set) = &assigned[idx] else {
            continue; // unreachable statement, nothing to check
        };
        for used in stmt.kind.uses() {
            if !in_set.contains(used) {
                return Err(MirError::Validation(format!(
                    "local {} used before assignment in {}.{} at {}",
                    used, class.name, method.name, stmt.site_id
                )));
            }
        }
    }
    Ok(())
}

/// For each statement index, the set of locals assigned on every acyclic
/// path reaching it (back edges dropped). `None` marks unreachable
/// statements. Index 0 starts from the method parameters.
///
/// Shared by the validator and the instrumenter, which must only reference
/// locals that are definitely assigned at the insertion point.
pub fn must_assigned_before(method: &MethodDef) -> Vec<Option<BTreeSet<String>>> {
    let n = method.body.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for s in successors(method, i) {
            if s > i {
                preds[s].push(i);
            }
        }
    }
    let mut ins: Vec<Option<BTreeSet<String>>> = vec![None; n];
    let mut outs: Vec<Option<BTreeSet<String>>> = vec![None; n];
    for i in 0..n {
        let in_set = if i == 0 {
            Some(method.params.iter().cloned().collect::<BTreeSet<_>>())
        } else {
            let mut acc: Option<BTreeSet<String>> = None;
            for &p in &preds[i] {
                if let Some(out) = &outs[p] {
                    acc = Some(match acc {
                        None => out.clone(),
                        Some(cur) => cur.intersection(out).cloned().collect(),
                    });
                }
            }
            acc
        };
        let out_set = in_set.as_ref().map(|s| {
            let mut s = s.clone();
            if let Some(d) = method.body[i].kind.dest() {
                s.insert(d.to_string());
            }
            s
        });
        ins[i] = in_set;
        outs[i] = out_set;
    }
    ins
}

