//! Ground values carried by events and I/O actions.
//!
//! Everything the toolkit passes around at model boundaries (event
//! parameters, I/O outputs and inputs, message payloads) is a [`Value`].
//! The derived total order makes set representations canonical, so every
//! enumeration in the crate is deterministic.

use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A finite, ordered, hashable ground value.
///
/// `App` is a free constructor application (`addr(3)`, `nonce(A, 0)`, ...)
/// used wherever a model needs tagged data without a dedicated Rust type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(i64),
    Str(String),
    List(Vec<Value>),
    App(String, Vec<Value>),
}

impl Value {
    pub fn app(name: impl Into<String>, args: Vec<Value>) -> Value {
        Value::App(name.into(), args)
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::List(vec![a, b])
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Value::Unit)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "\u{2022}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "{s}"),
            Value::List(items) => {
                write!(f, "(")?;
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
            Value::App(name, args) => {
                write!(f, "{name}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (k, arg) in args.iter().enumerate() {
                        if k > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{arg}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

// JSON encoding: Unit -> null, Bool -> bool, Int -> number, Str -> string,
// List -> array, App -> {"app": name, "args": [...]}.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Unit => ser.serialize_unit(),
            Value::Bool(b) => ser.serialize_bool(*b),
            Value::Int(n) => ser.serialize_i64(*n),
            Value::Str(s) => ser.serialize_str(s),
            Value::List(items) => items.serialize(ser),
            Value::App(name, args) => {
                let mut map = ser.serialize_map(Some(2))?;
                map.serialize_entry("app", name)?;
                map.serialize_entry("args", args)?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl<'de> Visitor<'de> for ValueVisitor {
            type Value = Value;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a toolkit value")
            }

            fn visit_unit<E>(self) -> Result<Value, E> {
                Ok(Value::Unit)
            }

            fn visit_none<E>(self) -> Result<Value, E> {
                Ok(Value::Unit)
            }

            fn visit_bool<E>(self, b: bool) -> Result<Value, E> {
                Ok(Value::Bool(b))
            }

            fn visit_i64<E>(self, n: i64) -> Result<Value, E> {
                Ok(Value::Int(n))
            }

            fn visit_u64<E: de::Error>(self, n: u64) -> Result<Value, E> {
                i64::try_from(n)
                    .map(Value::Int)
                    .map_err(|_| E::custom("integer out of range"))
            }

            fn visit_str<E>(self, s: &str) -> Result<Value, E> {
                Ok(Value::Str(s.to_owned()))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
                let mut items = Vec::new();
                while let Some(item) = seq.next_element()? {
                    items.push(item);
                }
                Ok(Value::List(items))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
                let mut name: Option<String> = None;
                let mut args: Option<Vec<Value>> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "app" => name = Some(map.next_value()?),
                        "args" => args = Some(map.next_value()?),
                        other => return Err(de::Error::unknown_field(other, &["app", "args"])),
                    }
                }
                let name = name.ok_or_else(|| de::Error::missing_field("app"))?;
                Ok(Value::App(name, args.unwrap_or_default()))
            }
        }

        de.deserialize_any(ValueVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let samples = vec![
            Value::Unit,
            Value::Bool(true),
            Value::Int(-7),
            Value::str("hello"),
            Value::List(vec![Value::Int(1), Value::Unit]),
            Value::app("addr", vec![Value::Int(2)]),
            Value::app("nil", vec![]),
        ];
        for v in samples {
            let text = serde_json::to_string(&v).unwrap();
            let back: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v, back, "round trip through {text}");
        }
    }

    #[test]
    fn ordering_is_total_and_stable() {
        let mut values = vec![
            Value::app("b", vec![]),
            Value::Int(3),
            Value::Unit,
            Value::Int(1),
            Value::str("x"),
        ];
        values.sort();
        let again = {
            let mut v = values.clone();
            v.sort();
            v
        };
        assert_eq!(values, again);
    }

    #[test]
    fn display_uses_compact_forms() {
        assert_eq!(Value::Unit.to_string(), "\u{2022}");
        assert_eq!(
            Value::app("addr", vec![Value::Int(2)]).to_string(),
            "addr(2)"
        );
        assert_eq!(
            Value::pair(Value::Int(1), Value::Int(2)).to_string(),
            "(1, 2)"
        );
    }
}
