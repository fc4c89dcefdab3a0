//! Deterministic pretty printer.
//!
//! Site ids are always written out as `@site(...)`, which keeps them stable
//! across instrument/serialize/parse cycles even though statement indices
//! shift when synthetic statements are inserted.

use std::fmt::Write;

use super::*;

pub fn serialize_app(model: &AppModel) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "app {}", quote(&model.package_name)).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "manifest {{").unwrap();
    for comp in &model.manifest.components {
        let empty = comp.exported_attr.is_none() && comp.filters.is_empty();
        if empty {
            writeln!(w, "  {} {} {{}}", comp.kind.keyword(), comp.class_name).unwrap();
            continue;
        }
        writeln!(w, "  {} {} {{", comp.kind.keyword(), comp.class_name).unwrap();
        if let Some(b) = comp.exported_attr {
            writeln!(w, "    exported: {}", b).unwrap();
        }
        for f in &comp.filters {
            writeln!(w, "    filter {{").unwrap();
            for a in &f.actions {
                writeln!(w, "      action {}", quote(a)).unwrap();
            }
            for c in &f.categories {
                writeln!(w, "      category {}", quote(c)).unwrap();
            }
            for s in &f.data_schemes {
                writeln!(w, "      scheme {}", quote(s)).unwrap();
            }
            writeln!(w, "    }}").unwrap();
        }
        writeln!(w, "  }}").unwrap();
    }
    writeln!(w, "}}").unwrap();
    for class in &model.classes {
        writeln!(w).unwrap();
        writeln!(w, "class {} extends {} {{", class.name, class.extends.keyword()).unwrap();
        for (mi, method) in class.methods.iter().enumerate() {
            if mi > 0 {
                writeln!(w).unwrap();
            }
            writeln!(w, "  method {}({}) {{", method.name, method.params.join(", ")).unwrap();
            for stmt in &method.body {
                writeln!(w, "    {}", render_statement(stmt)).unwrap();
            }
            writeln!(w, "  }}").unwrap();
        }
        writeln!(w, "}}").unwrap();
    }
    out
}

fn render_statement(stmt: &Statement) -> String {
    let mut s = render_kind(&stmt.kind);
    write!(s, " @site({})", stmt.site_id).unwrap();
    if let Some(tag) = &stmt.synthetic_tag {
        write!(s, " @synthetic({})", tag).unwrap();
    }
    s
}

fn render_kind(kind: &StatementKind) -> String {
    match kind {
        StatementKind::ConstAssign { dest, value } => match value {
            ConstValue::Str(v) => format!("{} = const {}", dest, quote(v)),
            ConstValue::Int(v) => format!("{} = const {}", dest, v),
        },
        StatementKind::NewIntent { dest } => format!("{} = new Intent", dest),
        StatementKind::IntentMutate { receiver, mutation } => match mutation {
            Mutation::SetAction(v) => format!("{}.setAction({})", receiver, operand(v)),
            Mutation::AddCategory(v) => format!("{}.addCategory({})", receiver, operand(v)),
            Mutation::SetClass(v) => format!("{}.setClass({})", receiver, operand(v)),
            Mutation::SetScheme(v) => format!("{}.setScheme({})", receiver, operand(v)),
            Mutation::PutExtra(k, v) => {
                format!("{}.putExtra({}, {})", receiver, quote(k), operand(v))
            }
        },
        StatementKind::PendingIntentCreate {
            dest,
            method,
            intent,
            flags,
        } => format!(
            "{} = PendingIntent.{}({}, {})",
            dest,
            method.method_name(),
            intent,
            operand(flags)
        ),
        StatementKind::IntentSenderGet { dest, pending } => {
            format!("{} = {}.getIntentSender()", dest, pending)
        }
        StatementKind::ApiCall { dest, callee, args } => {
            let call = format!("call {}({})", callee, operands(args));
            match dest {
                Some(d) => format!("{} = {}", d, call),
                None => call,
            }
        }
        StatementKind::LocalCall { dest, target, args } => {
            let call = format!("invoke {}({})", target, operands(args));
            match dest {
                Some(d) => format!("{} = {}", d, call),
                None => call,
            }
        }
        StatementKind::GetIncomingIntent { dest } => format!("{} = getIntent()", dest),
        StatementKind::GetExtra { dest, intent, key } => {
            format!("{} = {}.getExtra({})", dest, intent, quote(key))
        }
        StatementKind::IfGoto { cond, target } => format!("if {} goto {}", cond, target),
        StatementKind::Goto { target } => format!("goto {}", target),
        StatementKind::Label { name } => format!("label {}", name),
        StatementKind::Return { value } => match value {
            Some(v) => format!("return {}", operand(v)),
            None => "return".to_string(),
        },
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Local(n) => n.clone(),
        Operand::Str(s) => quote(s),
        Operand::Int(v) => v.to_string(),
    }
}

fn operands(ops: &[Operand]) -> String {
    ops.iter().map(operand).collect::<Vec<_>>().join(", ")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}
