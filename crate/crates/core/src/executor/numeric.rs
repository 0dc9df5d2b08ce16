//! Numeric payloads exchanged with the shim. JSON has no NaN or infinity,
//! so those travel as the strings `"NaN"`, `"Infinity"` and `"-Infinity"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

pub fn f64_to_json(x: f64) -> Value {
    if x.is_nan() {
        Value::String("NaN".into())
    } else if x.is_infinite() {
        Value::String(if x > 0.0 { "Infinity" } else { "-Infinity" }.into())
    } else {
        serde_json::json!(x)
    }
}

pub fn f64_from_json(v: &Value) -> Result<f64, String> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| format!("{n} is not representable")),
        Value::String(s) => match s.as_str() {
            "NaN" | "nan" => Ok(f64::NAN),
            "Infinity" | "inf" => Ok(f64::INFINITY),
            "-Infinity" | "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(format!("`{other}` is not a number")),
        },
        Value::Bool(b) => Ok(f64::from(u8::from(*b))),
        other => Err(format!("`{other}` is not a number")),
    }
}

/// Serde adapter for `f64` fields that may be non-finite.
pub mod lenient_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        f64_to_json(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = Value::deserialize(d)?;
        f64_from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// A dense array with its shape. Scalars have an empty shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NumericArray {
    pub fn scalar(x: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![x],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Parses a scalar or a rectangular nested list.
    pub fn from_json(v: &Value) -> Result<Self, String> {
        let mut shape = Vec::new();
        let mut probe = v;
        while let Value::Array(items) = probe {
            shape.push(items.len());
            match items.first() {
                Some(first) => probe = first,
                None => break,
            }
        }
        let mut data = Vec::new();
        flatten(v, &shape, 0, &mut data)?;
        Ok(Self { shape, data })
    }

    pub fn to_json(&self) -> Value {
        fn build(shape: &[usize], data: &mut std::slice::Iter<'_, f64>) -> Value {
            match shape.split_first() {
                None => f64_to_json(*data.next().expect("shape matches data")),
                Some((&n, rest)) => Value::Array((0..n).map(|_| build(rest, data)).collect()),
            }
        }
        build(&self.shape, &mut self.data.iter())
    }
}

fn flatten(v: &Value, shape: &[usize], depth: usize, out: &mut Vec<f64>) -> Result<(), String> {
    match v {
        Value::Array(items) => {
            if shape.get(depth) != Some(&items.len()) {
                return Err("ragged nested list".into());
            }
            items
                .iter()
                .try_for_each(|i| flatten(i, shape, depth + 1, out))
        }
        scalar => {
            if depth != shape.len() {
                return Err("ragged nested list".into());
            }
            out.push(f64_from_json(scalar)?);
            Ok(())
        }
    }
}
