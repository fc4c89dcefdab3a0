//! Abstract value domain for composite constant propagation.
//!
//! Every field of an ICC object is tracked as a finite value set over string
//! and integer constants plus tainted tokens; sets that grow past the widen
//! cap collapse to TOP. Join is per-field set union, so the lattice is a
//! product of powerset lattices and all joins are commutative, associative
//! and idempotent.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::mir::SiteId;

/// One element of a value set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScalarValue {
    Str(String),
    Int(i64),
    /// Sensitive token produced by a taint source; carries the source site.
    Tainted(SiteId),
}

impl Serialize for ScalarValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ScalarValue::Str(v) => s.serialize_str(v),
            ScalarValue::Int(v) => s.serialize_str(&format!("int:{}", v)),
            ScalarValue::Tainted(site) => s.serialize_str(&format!("tainted:{}", site)),
        }
    }
}

/// A finite set of possible values, or TOP (any value).
///
/// Canonical form: `top == true` implies `values` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct ValueSet {
    top: bool,
    values: BTreeSet<ScalarValue>,
}

impl ValueSet {
    pub fn empty() -> Self {
        ValueSet::default()
    }

    pub fn top() -> Self {
        ValueSet {
            top: true,
            values: BTreeSet::new(),
        }
    }

    pub fn singleton(v: ScalarValue) -> Self {
        let mut values = BTreeSet::new();
        values.insert(v);
        ValueSet { top: false, values }
    }

    pub fn str(s: impl Into<String>) -> Self {
        Self::singleton(ScalarValue::Str(s.into()))
    }

    pub fn int(v: i64) -> Self {
        Self::singleton(ScalarValue::Int(v))
    }

    pub fn is_top(&self) -> bool {
        self.top
    }

    pub fn is_empty(&self) -> bool {
        !self.top && self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> impl Iterator<Item = &ScalarValue> {
        self.values.iter()
    }

    /// String members; empty when TOP (callers must check [`Self::is_top`]).
    pub fn strings(&self) -> impl Iterator<Item = &str> {
        self.values.iter().filter_map(|v| match v {
            ScalarValue::Str(s) => Some(s.as_str()),
            _ => None,
        })
    }

    pub fn tainted_tokens(&self) -> impl Iterator<Item = &SiteId> {
        self.values.iter().filter_map(|v| match v {
            ScalarValue::Tainted(site) => Some(site),
            _ => None,
        })
    }

    pub fn contains(&self, v: &ScalarValue) -> bool {
        self.top || self.values.contains(v)
    }

    /// Exactly one string constant, and not TOP.
    pub fn singleton_str(&self) -> Option<&str> {
        if self.top || self.values.len() != 1 {
            return None;
        }
        match self.values.iter().next() {
            Some(ScalarValue::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn insert(&mut self, v: ScalarValue, cap: usize) {
        if self.top {
            return;
        }
        self.values.insert(v);
        self.widen(cap);
    }

    pub fn join(&mut self, other: &ValueSet, cap: usize) {
        if self.top {
            return;
        }
        if other.top {
            *self = ValueSet::top();
            return;
        }
        self.values.extend(other.values.iter().cloned());
        self.widen(cap);
    }

    pub fn joined(&self, other: &ValueSet, cap: usize) -> ValueSet {
        let mut out = self.clone();
        out.join(other, cap);
        out
    }

    fn widen(&mut self, cap: usize) {
        if self.values.len() > cap {
            *self = ValueSet::top();
        }
    }

    /// Set inclusion in the lattice order.
    pub fn subsumes(&self, other: &ValueSet) -> bool {
        if self.top {
            return true;
        }
        if other.top {
            return false;
        }
        other.values.is_subset(&self.values)
    }
}

impl Serialize for ValueSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.top {
            s.serialize_str("TOP")
        } else {
            let mut seq = s.serialize_seq(Some(self.values.len()))?;
            for v in &self.values {
                seq.serialize_element(v)?;
            }
            seq.end()
        }
    }
}

/// Component type a PendingIntent launches, in COAL's single-character
/// encoding: 'a' Activity, 's' Service, 'r' BroadcastReceiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TargetType {
    Activity,
    Service,
    BroadcastReceiver,
}

impl TargetType {
    pub fn coal_char(self) -> char {
        match self {
            TargetType::Activity => 'a',
            TargetType::Service => 's',
            TargetType::BroadcastReceiver => 'r',
        }
    }

    pub fn component_kind(self) -> crate::mir::ComponentKind {
        match self {
            TargetType::Activity => crate::mir::ComponentKind::Activity,
            TargetType::Service => crate::mir::ComponentKind::Service,
            TargetType::BroadcastReceiver => crate::mir::ComponentKind::BroadcastReceiver,
        }
    }
}

impl Serialize for TargetType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.coal_char().to_string())
    }
}

/// Inferred content of one Intent object.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IntentValue {
    pub action: ValueSet,
    /// Each `addCategory` call contributes one value set.
    pub categories: BTreeSet<ValueSet>,
    pub target_class: ValueSet,
    pub scheme: ValueSet,
    pub extras: BTreeMap<String, ValueSet>,
    /// Site of the `new Intent` this value originates from; `None` for
    /// synthesized values (incoming intents, unresolved placeholders).
    pub origin_site: Option<SiteId>,
}

impl IntentValue {
    pub fn empty(origin_site: Option<SiteId>) -> Self {
        IntentValue {
            origin_site,
            ..Default::default()
        }
    }

    /// Incoming-intent value: every field unknown, extras as seeded.
    pub fn incoming(extras: BTreeMap<String, ValueSet>) -> Self {
        IntentValue {
            action: ValueSet::top(),
            categories: BTreeSet::new(),
            target_class: ValueSet::top(),
            scheme: ValueSet::top(),
            extras,
            origin_site: None,
        }
    }

    pub fn join(&mut self, other: &IntentValue, cap: usize) {
        self.action.join(&other.action, cap);
        self.target_class.join(&other.target_class, cap);
        self.scheme.join(&other.scheme, cap);
        for c in &other.categories {
            self.categories.insert(c.clone());
        }
        if self.categories.len() > cap {
            self.categories = std::iter::once(ValueSet::top()).collect();
        }
        for (k, vs) in &other.extras {
            self.extras
                .entry(k.clone())
                .or_insert_with(ValueSet::empty)
                .join(vs, cap);
        }
        if self.origin_site != other.origin_site {
            self.origin_site = None;
        }
    }

    /// Mark every field unknown, keeping the origin. Applied to intents that
    /// escape into calls the analysis does not follow.
    pub fn clobber(&mut self) {
        self.action = ValueSet::top();
        self.target_class = ValueSet::top();
        self.scheme = ValueSet::top();
        self.categories = std::iter::once(ValueSet::top()).collect();
        for vs in self.extras.values_mut() {
            *vs = ValueSet::top();
        }
    }

    pub fn has_tainted_extra(&self) -> bool {
        self.extras
            .values()
            .any(|vs| vs.tainted_tokens().next().is_some())
    }
}

/// Inferred content of one PendingIntent.
///
/// The wrapped intents are snapshots taken at creation time: the system
/// keeps a copy, so later mutations of the source Intent do not show up
/// here.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PendingIntentValue {
    pub target_type: BTreeSet<TargetType>,
    pub wrapped_intents: BTreeSet<IntentValue>,
    pub origin_site: SiteId,
}

/// Inferred content of one IntentSender: the PendingIntents it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IntentSenderValue {
    pub wrapped_pending: BTreeSet<PendingIntentValue>,
}

/// The abstract value of one local at one program point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AbstractValue {
    Scalar(ValueSet),
    Intents(BTreeSet<IntentValue>),
    Pendings(BTreeSet<PendingIntentValue>),
    Senders(BTreeSet<IntentSenderValue>),
    Top,
}

impl AbstractValue {
    pub fn is_top(&self) -> bool {
        matches!(self, AbstractValue::Top)
            || matches!(self, AbstractValue::Scalar(vs) if vs.is_top())
    }

    pub fn join(&mut self, other: &AbstractValue, cap: usize) {
        use AbstractValue::*;
        match (&mut *self, other) {
            (Top, _) => {}
            (_, Top) => *self = Top,
            (Scalar(a), Scalar(b)) => a.join(b, cap),
            (Intents(a), Intents(b)) => a.extend(b.iter().cloned()),
            (Pendings(a), Pendings(b)) => a.extend(b.iter().cloned()),
            (Senders(a), Senders(b)) => a.extend(b.iter().cloned()),
            _ => *self = Top,
        }
    }

    /// All intent values reachable from this value, unwrapping PendingIntents
    /// and IntentSenders. `None` when the value is TOP or not ICC-shaped.
    pub fn reachable_intents(&self) -> Option<BTreeSet<IntentValue>> {
        match self {
            AbstractValue::Intents(s) => Some(s.clone()),
            AbstractValue::Pendings(ps) => Some(
                ps.iter()
                    .flat_map(|p| p.wrapped_intents.iter().cloned())
                    .collect(),
            ),
            AbstractValue::Senders(ss) => Some(
                ss.iter()
                    .flat_map(|s| s.wrapped_pending.iter())
                    .flat_map(|p| p.wrapped_intents.iter().cloned())
                    .collect(),
            ),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_strategy() -> impl Strategy<Value = ScalarValue> {
        prop_oneof![
            "[a-c]{1,2}".prop_map(ScalarValue::Str),
            (-5i64..5).prop_map(ScalarValue::Int),
        ]
    }

    fn value_set_strategy() -> impl Strategy<Value = ValueSet> {
        prop_oneof![
            Just(ValueSet::top()),
            proptest::collection::btree_set(scalar_strategy(), 0..4).prop_map(|values| {
                ValueSet { top: false, values }
            }),
        ]
    }

    const CAP: usize = 64; // large enough that widening never fires here

    proptest! {
        #[test]
        fn join_commutative(a in value_set_strategy(), b in value_set_strategy()) {
            prop_assert_eq!(a.joined(&b, CAP), b.joined(&a, CAP));
        }

        #[test]
        fn join_associative(
            a in value_set_strategy(),
            b in value_set_strategy(),
            c in value_set_strategy(),
        ) {
            prop_assert_eq!(
                a.joined(&b, CAP).joined(&c, CAP),
                a.joined(&b.joined(&c, CAP), CAP)
            );
        }

        #[test]
        fn join_idempotent(a in value_set_strategy()) {
            prop_assert_eq!(a.joined(&a, CAP), a.clone());
        }

        #[test]
        fn join_upper_bound(a in value_set_strategy(), b in value_set_strategy()) {
            let j = a.joined(&b, CAP);
            prop_assert!(j.subsumes(&a));
            prop_assert!(j.subsumes(&b));
        }
    }

    #[test]
    fn widening_collapses_to_top() {
        let mut vs = ValueSet::empty();
        for i in 0..9 {
            vs.insert(ScalarValue::Int(i), 8);
        }
        assert!(vs.is_top());
    }

    #[test]
    fn top_is_canonical_singleton() {
        let mut vs = ValueSet::str("a");
        vs.join(&ValueSet::top(), 8);
        assert!(vs.is_top());
        assert_eq!(vs.len(), 0);
    }
}
