//! MIR, the textual intermediate representation for app models.
//!
//! A MIR file describes one app: its manifest (component declarations with
//! intent filters) and its classes with three-address method bodies. The
//! statement set is intentionally small: it covers Intent construction and
//! mutation, PendingIntent/IntentSender creation, framework API calls,
//! intra-app calls, and branches — exactly what the downstream analyses
//! consume.
//!
//! Parsing and serialization are pure; `parse_app(serialize_app(m)) == m`
//! holds structurally for every valid model, including site ids and
//! synthetic tags.

mod lexer;
mod parser;
mod serialize;
#[cfg(test)]
mod tests;
mod validate;

pub use parser::parse_app;
pub use serialize::serialize_app;
pub use validate::{must_assigned_before, validate};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable identifier of one statement within an app model.
///
/// Either author-assigned in source via `@site(ID)` or generated by the
/// parser as `<class>.<method>#<index>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub String);

impl SiteId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SiteId {
    fn from(s: &str) -> Self {
        SiteId(s.to_string())
    }
}

/// A parsed and validated app model: one MIR file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppModel {
    pub package_name: String,
    pub manifest: Manifest,
    pub classes: Vec<ClassDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub components: Vec<ComponentDecl>,
}

/// Declared kind of a manifest component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    Activity,
    Service,
    BroadcastReceiver,
}

impl ComponentKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ComponentKind::Activity => "activity",
            ComponentKind::Service => "service",
            ComponentKind::BroadcastReceiver => "receiver",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComponentKind::Activity => "Activity",
            ComponentKind::Service => "Service",
            ComponentKind::BroadcastReceiver => "BroadcastReceiver",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDecl {
    pub kind: ComponentKind,
    pub class_name: String,
    /// `exported:` attribute as written in source, if written at all.
    /// The effective value applies the default-export rule, see [`Self::exported`].
    pub exported_attr: Option<bool>,
    pub filters: Vec<IntentFilter>,
}

impl ComponentDecl {
    /// Effective export status: an explicit attribute wins; otherwise a
    /// component with at least one intent filter is exported by default.
    pub fn exported(&self) -> bool {
        self.exported_attr.unwrap_or(!self.filters.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntentFilter {
    pub actions: std::collections::BTreeSet<String>,
    pub categories: std::collections::BTreeSet<String>,
    pub data_schemes: std::collections::BTreeSet<String>,
}

/// Superclass of a MIR class. `Plain` classes hold helper methods only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassKind {
    Activity,
    Service,
    BroadcastReceiver,
    Plain,
}

impl ClassKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ClassKind::Activity => "Activity",
            ClassKind::Service => "Service",
            ClassKind::BroadcastReceiver => "BroadcastReceiver",
            ClassKind::Plain => "Plain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub extends: ClassKind,
    pub methods: Vec<MethodDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Statement>,
    /// Label name to statement index, derived from `Label` statements.
    pub labels: BTreeMap<String, usize>,
}

impl MethodDef {
    /// Rebuild the label map from the body. Must be called after any body edit.
    pub fn rebuild_labels(&mut self) {
        self.labels.clear();
        for (idx, stmt) in self.body.iter().enumerate() {
            if let StatementKind::Label { name } = &stmt.kind {
                self.labels.insert(name.clone(), idx);
            }
        }
    }
}

/// One three-address statement plus its stable site id and an optional
/// synthetic marker (set only by the instrumenter).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub kind: StatementKind,
    pub site_id: SiteId,
    pub synthetic_tag: Option<String>,
}

impl Statement {
    pub fn new(kind: StatementKind, site_id: SiteId) -> Self {
        Statement {
            kind,
            site_id,
            synthetic_tag: None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.synthetic_tag.is_some()
    }
}

/// Value operand of a statement: a local or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Operand {
    Local(String),
    Str(String),
    Int(i64),
}

impl Operand {
    pub fn as_local(&self) -> Option<&str> {
        match self {
            Operand::Local(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstValue {
    Str(String),
    Int(i64),
}

/// The Intent mutation family: `setAction`, `addCategory`, `setClass`,
/// `setScheme` and `putExtra`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    SetAction(Operand),
    AddCategory(Operand),
    SetClass(Operand),
    SetScheme(Operand),
    PutExtra(String, Operand),
}

/// PendingIntent factory method; encodes the launched component type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendingIntentKind {
    GetActivity,
    GetService,
    GetForegroundService,
    GetBroadcast,
}

impl PendingIntentKind {
    pub fn method_name(self) -> &'static str {
        match self {
            PendingIntentKind::GetActivity => "getActivity",
            PendingIntentKind::GetService => "getService",
            PendingIntentKind::GetForegroundService => "getForegroundService",
            PendingIntentKind::GetBroadcast => "getBroadcast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementKind {
    /// `x = const "s"` or `x = const 42`
    ConstAssign { dest: String, value: ConstValue },
    /// `x = new Intent`
    NewIntent { dest: String },
    /// `i.setAction(v)`, `i.putExtra("k", v)`, ...
    IntentMutate { receiver: String, mutation: Mutation },
    /// `pi = PendingIntent.getActivity(i, flags)`
    PendingIntentCreate {
        dest: String,
        method: PendingIntentKind,
        intent: String,
        flags: Operand,
    },
    /// `s = pi.getIntentSender()`
    IntentSenderGet { dest: String, pending: String },
    /// `call a.b.C.m(args)` — framework API call. The callee is either a
    /// qualified name or `<local>.<method>` (receiver-style instance call).
    ApiCall {
        dest: Option<String>,
        callee: String,
        args: Vec<Operand>,
    },
    /// `invoke helper(args)` — intra-app call, same class or qualified.
    LocalCall {
        dest: Option<String>,
        target: String,
        args: Vec<Operand>,
    },
    /// `i = getIntent()` — the incoming intent of a component entry method.
    GetIncomingIntent { dest: String },
    /// `v = i.getExtra("k")`
    GetExtra {
        dest: String,
        intent: String,
        key: String,
    },
    IfGoto { cond: String, target: String },
    Goto { target: String },
    Label { name: String },
    Return { value: Option<Operand> },
}

impl StatementKind {
    /// Local assigned by this statement, if any.
    pub fn dest(&self) -> Option<&str> {
        match self {
            StatementKind::ConstAssign { dest, .. }
            | StatementKind::NewIntent { dest }
            | StatementKind::PendingIntentCreate { dest, .. }
            | StatementKind::IntentSenderGet { dest, .. }
            | StatementKind::GetIncomingIntent { dest }
            | StatementKind::GetExtra { dest, .. } => Some(dest),
            StatementKind::ApiCall { dest, .. } | StatementKind::LocalCall { dest, .. } => {
                dest.as_deref()
            }
            _ => None,
        }
    }

    /// Locals read by this statement.
    pub fn uses(&self) -> Vec<&str> {
        fn op<'a>(o: &'a Operand, out: &mut Vec<&'a str>) {
            if let Operand::Local(n) = o {
                out.push(n.as_str());
            }
        }
        let mut out: Vec<&str> = Vec::new();
        match self {
            StatementKind::ConstAssign { .. }
            | StatementKind::NewIntent { .. }
            | StatementKind::GetIncomingIntent { .. }
            | StatementKind::Label { .. }
            | StatementKind::Goto { .. } => {}
            StatementKind::IntentMutate { receiver, mutation } => {
                out.push(receiver);
                match mutation {
                    Mutation::SetAction(v)
                    | Mutation::AddCategory(v)
                    | Mutation::SetClass(v)
                    | Mutation::SetScheme(v)
                    | Mutation::PutExtra(_, v) => op(v, &mut out),
                }
            }
            StatementKind::PendingIntentCreate { intent, flags, .. } => {
                out.push(intent);
                op(flags, &mut out);
            }
            StatementKind::IntentSenderGet { pending, .. } => out.push(pending),
            StatementKind::ApiCall { callee, args, .. } => {
                // A two-segment callee whose head is a lowercase identifier is
                // a receiver-style call; the head reads a local. Resolution
                // happens later, here we conservatively report it as a use
                // only when it cannot be a package segment (single '.').
                if let Some((head, _)) = callee.split_once('.') {
                    if !callee[head.len() + 1..].contains('.') {
                        out.push(head);
                    }
                }
                for a in args {
                    op(a, &mut out);
                }
            }
            StatementKind::LocalCall { args, .. } => {
                for a in args {
                    op(a, &mut out);
                }
            }
            StatementKind::GetExtra { intent, .. } => out.push(intent),
            StatementKind::IfGoto { cond, .. } => out.push(cond),
            StatementKind::Return { value } => {
                if let Some(v) = value {
                    op(v, &mut out);
                }
            }
        }
        out
    }
}

/// Errors raised by [`parse_app`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MirError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}

/// Location of a statement inside an [`AppModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatementLoc {
    pub class_idx: usize,
    pub method_idx: usize,
    pub stmt_idx: usize,
}

impl AppModel {
    /// Index every statement by site id.
    pub fn site_index(&self) -> BTreeMap<SiteId, StatementLoc> {
        let mut map = BTreeMap::new();
        for (ci, class) in self.classes.iter().enumerate() {
            for (mi, method) in class.methods.iter().enumerate() {
                for (si, stmt) in method.body.iter().enumerate() {
                    map.insert(
                        stmt.site_id.clone(),
                        StatementLoc {
                            class_idx: ci,
                            method_idx: mi,
                            stmt_idx: si,
                        },
                    );
                }
            }
        }
        map
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn component(&self, class_name: &str) -> Option<&ComponentDecl> {
        self.manifest
            .components
            .iter()
            .find(|c| c.class_name == class_name)
    }

    /// Iterate `(class, method, statement)` in model order.
    pub fn statements(&self) -> impl Iterator<Item = (&ClassDef, &MethodDef, usize, &Statement)> {
        self.classes.iter().flat_map(|c| {
            c.methods.iter().flat_map(move |m| {
                m.body
                    .iter()
                    .enumerate()
                    .map(move |(i, s)| (c, m, i, s))
            })
        })
    }

    /// Resolve an `invoke` target written as `name` or `pkg.Class.name`
    /// from inside `from_class`. Returns `(class_name, method_name)`.
    pub fn resolve_invoke_target<'a>(
        &'a self,
        from_class: &'a str,
        target: &'a str,
    ) -> Option<(&'a str, &'a str)> {
        match target.rfind('.') {
            None => {
                let class = self.class(from_class)?;
                class
                    .methods
                    .iter()
                    .find(|m| m.name == target)
                    .map(|m| (from_class, m.name.as_str()))
            }
            Some(pos) => {
                let (class_name, method_name) = (&target[..pos], &target[pos + 1..]);
                let class = self.class(class_name)?;
                class
                    .methods
                    .iter()
                    .find(|m| m.name == method_name)
                    .map(|m| (class.name.as_str(), m.name.as_str()))
            }
        }
    }
}

/// Successor statement indices within one method body.
///
/// Fallthrough for everything except `goto` and `return`; branch targets are
/// looked up in the label map.
pub fn successors(method: &MethodDef, idx: usize) -> Vec<usize> {
    let stmt = &method.body[idx];
    let mut out = Vec::new();
    match &stmt.kind {
        StatementKind::Goto { target } => {
            if let Some(&t) = method.labels.get(target) {
                out.push(t);
            }
        }
        StatementKind::IfGoto { target, .. } => {
            if idx + 1 < method.body.len() {
                out.push(idx + 1);
            }
            if let Some(&t) = method.labels.get(target) {
                out.push(t);
            }
        }
        StatementKind::Return { .. } => {}
        _ => {
            if idx + 1 < method.body.len() {
                out.push(idx + 1);
            }
        }
    }
    out
}
