//! Composite constant propagation over MIR.
//!
//! Forward, flow-sensitive, path-insensitive fixpoint per method CFG with
//! per-field set-union join. Interprocedural transfer inlines `invoke`
//! targets up to `call_depth` levels, binding argument abstract values to
//! parameter locals; recursion and deeper calls are cut to TOP. Loops
//! terminate because value sets widen to TOP past `widen_cap` and the whole
//! run is guarded by `max_iterations`.

pub mod domain;

pub use domain::{
    AbstractValue, IntentSenderValue, IntentValue, PendingIntentValue, ScalarValue, TargetType,
    ValueSet,
};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::mir::{
    successors, AppModel, ClassDef, MethodDef, Operand, PendingIntentKind, SiteId, Statement,
    StatementKind,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    /// The fixpoint did not settle within the configured iteration budget.
    /// A guard against non-termination, not a user error.
    #[error("analysis budget exceeded ({0} iterations)")]
    BudgetExceeded(u64),
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
}

/// Tunables for [`analyze`]. Exposed on the CLI as `prop.widen_cap`,
/// `prop.max_iterations` and `prop.call_depth`.
#[derive(Debug, Clone)]
pub struct PropConfig {
    /// Per-field value-set cardinality cap before widening to TOP.
    pub widen_cap: usize,
    /// Global transfer-application budget per `analyze` call.
    pub max_iterations: u64,
    /// Levels of `invoke` inlining (call-strings depth).
    pub call_depth: usize,
    /// API signatures whose results are tainted tokens.
    pub taint_sources: BTreeSet<String>,
    /// Per-class seed for the extras of incoming intents, used by the taint
    /// engine to push flows across resolved ICC links.
    pub incoming_extras: BTreeMap<String, BTreeMap<String, ValueSet>>,
}

impl Default for PropConfig {
    fn default() -> Self {
        PropConfig {
            widen_cap: 8,
            max_iterations: 10_000,
            call_depth: 1,
            taint_sources: crate::taint::TaintConfig::shipped().sources,
            incoming_extras: BTreeMap::new(),
        }
    }
}

/// Abstract values at every program point of the analyzed model.
///
/// Immutable once returned; querying is by statement site id and local name.
#[derive(Debug, Clone, Default)]
pub struct PropResult {
    values: BTreeMap<SiteId, SiteValues>,
}

#[derive(Debug, Clone, Default)]
struct SiteValues {
    pre: BTreeMap<String, AbstractValue>,
    post: BTreeMap<String, AbstractValue>,
}

impl PropResult {
    /// Value of `local` immediately after the statement at `site`.
    /// TOP when the local is not bound to an ICC object (or anything) there.
    pub fn value_at(&self, site: &SiteId, local: &str) -> Result<AbstractValue, AnalysisError> {
        let sv = self
            .values
            .get(site)
            .ok_or_else(|| AnalysisError::UnknownSite(site.clone()))?;
        Ok(sv.post.get(local).cloned().unwrap_or(AbstractValue::Top))
    }

    /// Value of `local` immediately before the statement at `site`.
    pub fn value_before(&self, site: &SiteId, local: &str) -> Result<AbstractValue, AnalysisError> {
        let sv = self
            .values
            .get(site)
            .ok_or_else(|| AnalysisError::UnknownSite(site.clone()))?;
        Ok(sv.pre.get(local).cloned().unwrap_or(AbstractValue::Top))
    }

    /// All locals and their values immediately before the statement at `site`.
    pub fn pre_values(&self, site: &SiteId) -> Option<&BTreeMap<String, AbstractValue>> {
        self.values.get(site).map(|sv| &sv.pre)
    }

    pub fn covers(&self, site: &SiteId) -> bool {
        self.values.contains_key(site)
    }

    fn record(&mut self, site: &SiteId, pre: BTreeMap<String, AbstractValue>, post: BTreeMap<String, AbstractValue>, cap: usize) {
        let sv = self.values.entry(site.clone()).or_default();
        merge_values(&mut sv.pre, pre, cap);
        merge_values(&mut sv.post, post, cap);
    }
}

fn merge_values(
    into: &mut BTreeMap<String, AbstractValue>,
    from: BTreeMap<String, AbstractValue>,
    cap: usize,
) {
    for (k, v) in from {
        match into.get_mut(&k) {
            Some(cur) => cur.join(&v, cap),
            None => {
                into.insert(k, v);
            }
        }
    }
}

/// Heap key: allocation site plus the invoke site it was inlined under, so
/// intents allocated by the same helper called from two places stay apart.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct AllocId {
    origin: SiteId,
    ctx: Option<SiteId>,
}

/// What a local is bound to at one program point.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Binding {
    Scalar(ValueSet),
    Intent(BTreeSet<AllocId>),
    Pending(BTreeSet<PendingIntentValue>),
    Sender(BTreeSet<IntentSenderValue>),
    Top,
}

impl Binding {
    fn join(&mut self, other: &Binding, cap: usize) {
        use Binding::*;
        match (&mut *self, other) {
            (Top, _) => {}
            (_, Top) => *self = Top,
            (Scalar(a), Scalar(b)) => a.join(b, cap),
            (Intent(a), Intent(b)) => a.extend(b.iter().cloned()),
            (Pending(a), Pending(b)) => a.extend(b.iter().cloned()),
            (Sender(a), Sender(b)) => a.extend(b.iter().cloned()),
            _ => *self = Top,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct State {
    env: BTreeMap<String, Binding>,
    heap: BTreeMap<AllocId, IntentValue>,
}

impl State {
    fn join(&mut self, other: &State, cap: usize) {
        for (k, v) in &other.env {
            match self.env.get_mut(k) {
                Some(cur) => cur.join(v, cap),
                None => {
                    self.env.insert(k.clone(), v.clone());
                }
            }
        }
        for (k, v) in &other.heap {
            match self.heap.get_mut(k) {
                Some(cur) => cur.join(v, cap),
                None => {
                    self.heap.insert(k.clone(), v.clone());
                }
            }
        }
    }

    fn materialize(&self, binding: &Binding) -> AbstractValue {
        match binding {
            Binding::Scalar(vs) => AbstractValue::Scalar(vs.clone()),
            Binding::Intent(allocs) => AbstractValue::Intents(
                allocs
                    .iter()
                    .filter_map(|a| self.heap.get(a).cloned())
                    .collect(),
            ),
            Binding::Pending(ps) => AbstractValue::Pendings(ps.clone()),
            Binding::Sender(ss) => AbstractValue::Senders(ss.clone()),
            Binding::Top => AbstractValue::Top,
        }
    }

    fn materialize_env(&self) -> BTreeMap<String, AbstractValue> {
        self.env
            .iter()
            .map(|(k, v)| (k.clone(), self.materialize(v)))
            .collect()
    }
}

/// Analyze with the default configuration.
pub fn analyze(model: &AppModel) -> Result<PropResult, AnalysisError> {
    analyze_with(model, &PropConfig::default())
}

/// Run the propagation over every method of the model.
///
/// Entry points are the methods never named by an `invoke`; methods only
/// reachable beyond the inlining depth are additionally analyzed standalone
/// with TOP parameters, so the result covers every statement. Deterministic:
/// identical inputs produce identical results.
pub fn analyze_with(model: &AppModel, config: &PropConfig) -> Result<PropResult, AnalysisError> {
    let mut ctx = AnalysisCtx {
        model,
        config,
        iterations: 0,
        result: PropResult::default(),
        covered: BTreeSet::new(),
    };

    let mut invoked: BTreeSet<(String, String)> = BTreeSet::new();
    for (class, _, _, stmt) in model.statements() {
        if let StatementKind::LocalCall { target, .. } = &stmt.kind {
            if let Some((c, m)) = model.resolve_invoke_target(&class.name, target) {
                invoked.insert((c.to_string(), m.to_string()));
            }
        }
    }

    for class in &model.classes {
        for method in &class.methods {
            if !invoked.contains(&(class.name.clone(), method.name.clone())) {
                ctx.run_frame_as_root(class, method)?;
            }
        }
    }
    // Anything not reached (invoke cycles, calls beyond the depth budget)
    // still gets standalone coverage.
    for class in &model.classes {
        for method in &class.methods {
            if !ctx.covered.contains(&(class.name.clone(), method.name.clone())) {
                ctx.run_frame_as_root(class, method)?;
            }
        }
    }
    Ok(ctx.result)
}

struct AnalysisCtx<'a> {
    model: &'a AppModel,
    config: &'a PropConfig,
    iterations: u64,
    result: PropResult,
    covered: BTreeSet<(String, String)>,
}

/// Return value and exit heap of one analyzed frame.
struct FrameExit {
    ret: Binding,
    heap: BTreeMap<AllocId, IntentValue>,
}

impl<'a> AnalysisCtx<'a> {
    fn run_frame_as_root(&mut self, class: &ClassDef, method: &MethodDef) -> Result<(), AnalysisError> {
        let env: BTreeMap<String, Binding> = method
            .params
            .iter()
            .map(|p| (p.clone(), Binding::Top))
            .collect();
        let init = State {
            env,
            heap: BTreeMap::new(),
        };
        let mut stack = Vec::new();
        self.run_frame(class, method, init, None, self.config.call_depth, &mut stack, true)?;
        Ok(())
    }

    /// Fixpoint over one method body. When `record` is set, converged pre and
    /// post environments are merged into the global result (including those
    /// of frames inlined below this one).
    #[allow(clippy::too_many_arguments)]
    fn run_frame(
        &mut self,
        class: &ClassDef,
        method: &MethodDef,
        init: State,
        alloc_ctx: Option<SiteId>,
        depth: usize,
        stack: &mut Vec<(String, String)>,
        record: bool,
    ) -> Result<FrameExit, AnalysisError> {
        if record {
            self.covered.insert((class.name.clone(), method.name.clone()));
        }
        let cap = self.config.widen_cap;
        let n = method.body.len();
        if n == 0 {
            return Ok(FrameExit {
                ret: Binding::Top,
                heap: init.heap,
            });
        }

        let mut ins: Vec<Option<State>> = vec![None; n];
        ins[0] = Some(init);
        let mut work: BTreeSet<usize> = std::iter::once(0).collect();
        let mut exit: Option<FrameExit> = None;

        stack.push((class.name.clone(), method.name.clone()));
        let run = (|| -> Result<(), AnalysisError> {
            while let Some(&idx) = work.iter().next() {
                work.remove(&idx);
                let state = ins[idx].clone().expect("worklist entries have a state");
                let (out, ret) = self.transfer(class, method, idx, state, alloc_ctx.clone(), depth, stack, false)?;

                let succs = successors(method, idx);
                let stmt = &method.body[idx];
                let falls_off = idx + 1 == n
                    && !matches!(
                        stmt.kind,
                        StatementKind::Return { .. } | StatementKind::Goto { .. }
                    );
                if let Some(ret_binding) = ret {
                    merge_exit(&mut exit, ret_binding, out.heap.clone(), cap);
                } else if falls_off {
                    merge_exit(&mut exit, Binding::Top, out.heap.clone(), cap);
                }
                for s in succs {
                    let changed = match &mut ins[s] {
                        Some(cur) => {
                            let before = cur.clone();
                            cur.join(&out, cap);
                            *cur != before
                        }
                        slot @ None => {
                            *slot = Some(out.clone());
                            true
                        }
                    };
                    if changed {
                        work.insert(s);
                    }
                }
            }
            Ok(())
        })();
        if run.is_err() {
            stack.pop();
            return Err(run.unwrap_err());
        }

        if record {
            for idx in 0..n {
                if let Some(state) = ins[idx].clone() {
                    let pre = state.materialize_env();
                    let (out, _) =
                        self.transfer(class, method, idx, state, alloc_ctx.clone(), depth, stack, true)?;
                    let post = out.materialize_env();
                    self.result.record(&method.body[idx].site_id, pre, post, cap);
                } else {
                    // Unreachable statement: still covered, with empty
                    // environments, so lookups stay total.
                    self.result
                        .record(&method.body[idx].site_id, BTreeMap::new(), BTreeMap::new(), cap);
                }
            }
        }
        stack.pop();

        Ok(exit.unwrap_or(FrameExit {
            ret: Binding::Top,
            heap: BTreeMap::new(),
        }))
    }

    /// One statement's abstract semantics. Returns the out state and, for
    /// `return` statements, the returned binding.
    #[allow(clippy::too_many_arguments)]
    fn transfer(
        &mut self,
        class: &ClassDef,
        method: &MethodDef,
        idx: usize,
        mut state: State,
        alloc_ctx: Option<SiteId>,
        depth: usize,
        stack: &mut Vec<(String, String)>,
        record: bool,
    ) -> Result<(State, Option<Binding>), AnalysisError> {
        self.iterations += 1;
        if self.iterations > self.config.max_iterations {
            return Err(AnalysisError::BudgetExceeded(self.iterations));
        }
        let cap = self.config.widen_cap;
        let stmt: &Statement = &method.body[idx];
        match &stmt.kind {
            StatementKind::ConstAssign { dest, value } => {
                let v = match value {
                    crate::mir::ConstValue::Str(s) => ScalarValue::Str(s.clone()),
                    crate::mir::ConstValue::Int(i) => ScalarValue::Int(*i),
                };
                state.env.insert(dest.clone(), Binding::Scalar(ValueSet::singleton(v)));
            }
            StatementKind::NewIntent { dest } => {
                let alloc = AllocId {
                    origin: stmt.site_id.clone(),
                    ctx: alloc_ctx,
                };
                state
                    .heap
                    .entry(alloc.clone())
                    .or_insert_with(|| IntentValue::empty(Some(stmt.site_id.clone())));
                state
                    .env
                    .insert(dest.clone(), Binding::Intent(std::iter::once(alloc).collect()));
            }
            StatementKind::IntentMutate { receiver, mutation } => {
                let value = match mutation {
                    crate::mir::Mutation::SetAction(v)
                    | crate::mir::Mutation::AddCategory(v)
                    | crate::mir::Mutation::SetClass(v)
                    | crate::mir::Mutation::SetScheme(v)
                    | crate::mir::Mutation::PutExtra(_, v) => self.eval_scalar(&state, v),
                };
                if let Some(Binding::Intent(allocs)) = state.env.get(receiver).cloned() {
                    let strong = allocs.len() == 1;
                    for alloc in &allocs {
                        let Some(iv) = state.heap.get_mut(alloc) else {
                            continue;
                        };
                        match mutation {
                            crate::mir::Mutation::SetAction(_) => {
                                if strong {
                                    iv.action = value.clone();
                                } else {
                                    iv.action.join(&value, cap);
                                }
                            }
                            crate::mir::Mutation::SetClass(_) => {
                                if strong {
                                    iv.target_class = value.clone();
                                } else {
                                    iv.target_class.join(&value, cap);
                                }
                            }
                            crate::mir::Mutation::SetScheme(_) => {
                                if strong {
                                    iv.scheme = value.clone();
                                } else {
                                    iv.scheme.join(&value, cap);
                                }
                            }
                            crate::mir::Mutation::AddCategory(_) => {
                                iv.categories.insert(value.clone());
                                if iv.categories.len() > cap {
                                    iv.categories = std::iter::once(ValueSet::top()).collect();
                                }
                            }
                            crate::mir::Mutation::PutExtra(key, _) => {
                                if strong {
                                    iv.extras.insert(key.clone(), value.clone());
                                } else {
                                    iv.extras
                                        .entry(key.clone())
                                        .or_insert_with(ValueSet::empty)
                                        .join(&value, cap);
                                }
                            }
                        }
                    }
                }
            }
            StatementKind::PendingIntentCreate {
                dest,
                method: pk,
                intent,
                ..
            } => {
                let wrapped: BTreeSet<IntentValue> = match state.env.get(intent) {
                    Some(Binding::Intent(allocs)) => allocs
                        .iter()
                        .filter_map(|a| state.heap.get(a).cloned())
                        .collect(),
                    _ => std::iter::once(IntentValue::empty(None)).collect(),
                };
                let wrapped = if wrapped.is_empty() {
                    std::iter::once(IntentValue::empty(None)).collect()
                } else {
                    wrapped
                };
                let target = match pk {
                    PendingIntentKind::GetActivity => TargetType::Activity,
                    PendingIntentKind::GetService | PendingIntentKind::GetForegroundService => {
                        TargetType::Service
                    }
                    PendingIntentKind::GetBroadcast => TargetType::BroadcastReceiver,
                };
                let pv = PendingIntentValue {
                    target_type: std::iter::once(target).collect(),
                    wrapped_intents: wrapped,
                    origin_site: stmt.site_id.clone(),
                };
                state
                    .env
                    .insert(dest.clone(), Binding::Pending(std::iter::once(pv).collect()));
            }
            StatementKind::IntentSenderGet { dest, pending } => {
                let binding = match state.env.get(pending) {
                    Some(Binding::Pending(ps)) => Binding::Sender(
                        std::iter::once(IntentSenderValue {
                            wrapped_pending: ps.clone(),
                        })
                        .collect(),
                    ),
                    _ => Binding::Top,
                };
                state.env.insert(dest.clone(), binding);
            }
            StatementKind::ApiCall { dest, callee, .. } => {
                if let Some(d) = dest {
                    let binding = if self.config.taint_sources.contains(callee) {
                        Binding::Scalar(ValueSet::singleton(ScalarValue::Tainted(
                            stmt.site_id.clone(),
                        )))
                    } else {
                        Binding::Top
                    };
                    state.env.insert(d.clone(), binding);
                }
            }
            StatementKind::LocalCall { dest, target, args } => {
                let resolved = self
                    .model
                    .resolve_invoke_target(&class.name, target)
                    .map(|(c, m)| (c.to_string(), m.to_string()));
                let inline = match &resolved {
                    Some(key) => depth > 0 && !stack.contains(key),
                    None => false,
                };
                if inline {
                    let (tc, tm) = resolved.unwrap();
                    let target_class = self.model.class(&tc).expect("resolved class");
                    let target_method = target_class
                        .methods
                        .iter()
                        .find(|m| m.name == tm)
                        .expect("resolved method");
                    let mut env = BTreeMap::new();
                    for (i, p) in target_method.params.iter().enumerate() {
                        let b = match args.get(i) {
                            Some(Operand::Local(l)) => {
                                state.env.get(l).cloned().unwrap_or(Binding::Top)
                            }
                            Some(Operand::Str(s)) => Binding::Scalar(ValueSet::str(s.clone())),
                            Some(Operand::Int(v)) => Binding::Scalar(ValueSet::int(*v)),
                            None => Binding::Top,
                        };
                        env.insert(p.clone(), b);
                    }
                    let callee_init = State {
                        env,
                        heap: state.heap.clone(),
                    };
                    let exit = self.run_frame(
                        target_class,
                        target_method,
                        callee_init,
                        Some(stmt.site_id.clone()),
                        depth - 1,
                        stack,
                        record,
                    )?;
                    state.heap = exit.heap;
                    if let Some(d) = dest {
                        state.env.insert(d.clone(), exit.ret);
                    }
                } else {
                    // Depth cut or recursion: the callee may mutate any intent
                    // it can reach through the arguments.
                    for arg in args {
                        if let Operand::Local(l) = arg {
                            if let Some(Binding::Intent(allocs)) = state.env.get(l).cloned() {
                                for a in allocs {
                                    if let Some(iv) = state.heap.get_mut(&a) {
                                        iv.clobber();
                                    }
                                }
                            }
                        }
                    }
                    if let Some(d) = dest {
                        state.env.insert(d.clone(), Binding::Top);
                    }
                }
            }
            StatementKind::GetIncomingIntent { dest } => {
                let alloc = AllocId {
                    origin: stmt.site_id.clone(),
                    ctx: alloc_ctx,
                };
                let seed = self
                    .config
                    .incoming_extras
                    .get(&class.name)
                    .cloned()
                    .unwrap_or_default();
                state
                    .heap
                    .entry(alloc.clone())
                    .and_modify(|iv| {
                        for (k, vs) in &seed {
                            iv.extras
                                .entry(k.clone())
                                .or_insert_with(ValueSet::empty)
                                .join(vs, cap);
                        }
                    })
                    .or_insert_with(|| IntentValue::incoming(seed.clone()));
                state
                    .env
                    .insert(dest.clone(), Binding::Intent(std::iter::once(alloc).collect()));
            }
            StatementKind::GetExtra { dest, intent, key } => {
                let binding = match state.env.get(intent) {
                    Some(Binding::Intent(allocs)) => {
                        let mut vs = ValueSet::empty();
                        for a in allocs {
                            if let Some(iv) = state.heap.get(a) {
                                if let Some(entry) = iv.extras.get(key) {
                                    vs.join(entry, cap);
                                }
                            }
                        }
                        Binding::Scalar(vs)
                    }
                    Some(Binding::Top) | None => Binding::Scalar(ValueSet::top()),
                    _ => Binding::Scalar(ValueSet::top()),
                };
                state.env.insert(dest.clone(), binding);
            }
            StatementKind::IfGoto { .. }
            | StatementKind::Goto { .. }
            | StatementKind::Label { .. } => {}
            StatementKind::Return { value } => {
                let ret = match value {
                    Some(Operand::Local(l)) => state.env.get(l).cloned().unwrap_or(Binding::Top),
                    Some(Operand::Str(s)) => Binding::Scalar(ValueSet::str(s.clone())),
                    Some(Operand::Int(v)) => Binding::Scalar(ValueSet::int(*v)),
                    None => Binding::Top,
                };
                return Ok((state, Some(ret)));
            }
        }
        Ok((state, None))
    }

    fn eval_scalar(&self, state: &State, op: &Operand) -> ValueSet {
        match op {
            Operand::Str(s) => ValueSet::str(s.clone()),
            Operand::Int(v) => ValueSet::int(*v),
            Operand::Local(l) => match state.env.get(l) {
                Some(Binding::Scalar(vs)) => vs.clone(),
                Some(_) => ValueSet::top(),
                None => ValueSet::top(),
            },
        }
    }
}

fn merge_exit(
    exit: &mut Option<FrameExit>,
    ret: Binding,
    heap: BTreeMap<AllocId, IntentValue>,
    cap: usize,
) {
    match exit {
        None => {
            *exit = Some(FrameExit { ret, heap });
        }
        Some(e) => {
            e.ret.join(&ret, cap);
            for (k, v) in heap {
                match e.heap.get_mut(&k) {
                    Some(cur) => cur.join(&v, cap),
                    None => {
                        e.heap.insert(k, v);
                    }
                }
            }
        }
    }
}
