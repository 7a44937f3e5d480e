use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::Ident;

/// Runtime values. Sets of pairs that form a function are kept as
/// [`Value::FinMap`]; the empty set is always `FinSet(∅)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Proc(Ident),
    Enum(Ident, Ident),
    StateName(Ident),
    Tuple(Vec<Value>),
    FinSet(BTreeSet<Value>),
    FinMap(BTreeMap<Value, Value>),
}

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Tuple(vec![a, b])
    }

    pub fn empty() -> Value {
        Value::FinSet(BTreeSet::new())
    }

    /// Builds a set, turning a functional set of pairs into a map.
    pub fn set(items: impl IntoIterator<Item = Value>) -> Value {
        let items: BTreeSet<Value> = items.into_iter().collect();
        if items.is_empty() {
            return Value::empty();
        }
        let mut map = BTreeMap::new();
        for it in &items {
            match it {
                Value::Tuple(p) if p.len() == 2 => {
                    if map.insert(p[0].clone(), p[1].clone()).is_some() {
                        return Value::FinSet(items);
                    }
                }
                _ => return Value::FinSet(items),
            }
        }
        Value::FinMap(map)
    }

    pub fn map(entries: impl IntoIterator<Item = (Value, Value)>) -> Value {
        let map: BTreeMap<Value, Value> = entries.into_iter().collect();
        if map.is_empty() {
            Value::empty()
        } else {
            Value::FinMap(map)
        }
    }

    /// Elements of a set-like value; maps contribute their pairs.
    pub fn elements(&self) -> Option<BTreeSet<Value>> {
        match self {
            Value::FinSet(s) => Some(s.clone()),
            Value::FinMap(m) => Some(
                m.iter()
                    .map(|(k, v)| Value::pair(k.clone(), v.clone()))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Map view: `FinMap`, or an empty map for the empty set.
    pub fn as_map(&self) -> Option<BTreeMap<Value, Value>> {
        match self {
            Value::FinMap(m) => Some(m.clone()),
            Value::FinSet(s) if s.is_empty() => Some(BTreeMap::new()),
            _ => None,
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Value::FinSet(s) => Some(s.len()),
            Value::FinMap(m) => Some(m.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// JSON form: atoms as numbers, booleans or strings; tuples and sets as
    /// arrays; maps as objects keyed by the key's display form.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value as J;
        match self {
            Value::Int(v) => J::from(*v),
            Value::Bool(b) => J::from(*b),
            Value::Proc(p) | Value::Enum(_, p) | Value::StateName(p) => J::from(p.as_str()),
            Value::Tuple(items) => J::Array(items.iter().map(Value::to_json).collect()),
            Value::FinSet(items) => J::Array(items.iter().map(Value::to_json).collect()),
            Value::FinMap(m) => J::Object(
                m.iter()
                    .map(|(k, v)| (k.to_string(), v.to_json()))
                    .collect(),
            ),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            Value::Proc(p) | Value::Enum(_, p) | Value::StateName(p) => write!(f, "{p}"),
            Value::Tuple(items) => {
                let parts: Vec<String> = items.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(" |-> "))
            }
            Value::FinSet(items) => {
                let parts: Vec<String> = items.iter().map(|v| v.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Value::FinMap(m) => {
                let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k} |-> {v}")).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Value {
        Value::Proc(s.into())
    }

    #[test]
    fn functional_sets_become_maps() {
        let v = Value::set([
            Value::pair(p("a"), Value::Int(1)),
            Value::pair(p("b"), Value::Int(2)),
        ]);
        assert!(matches!(v, Value::FinMap(_)));
        let rel = Value::set([
            Value::pair(p("a"), Value::Int(1)),
            Value::pair(p("a"), Value::Int(2)),
        ]);
        assert!(matches!(rel, Value::FinSet(_)));
        assert_eq!(Value::set([]), Value::map([]));
    }

    #[test]
    fn display_and_json() {
        let v = Value::map([(p("q1"), Value::Int(5))]);
        assert_eq!(v.to_string(), "{q1 |-> 5}");
        assert_eq!(v.to_json(), serde_json::json!({"q1": 5}));
        let m = Value::pair(Value::Enum("M".into(), "answer".into()), Value::Int(3));
        assert_eq!(m.to_string(), "(answer |-> 3)");
    }
}
