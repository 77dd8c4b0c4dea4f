use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::tensor::Tensor;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Engine {
    pub name: &'static str,
    pub version: &'static str,
}

pub const ENGINE: Engine = Engine {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

/// Everything one invocation produced; key order is fixed so identical
/// invocations serialize to identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub engine: Engine,
    pub command: String,
    pub args: Vec<String>,
    pub params: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, args: &[String], seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            engine: ENGINE,
            command: command.into(),
            args: args.to_vec(),
            params: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            seed,
            result: Value::Null,
        }
    }

    pub fn tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.into(), value);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// `R[x,y,y,x;x]`: the first `split` indices, then the derivative indices after `;`.
pub fn index_label(name: &str, coords: &[String], index: &[usize], split: usize) -> String {
    let names: Vec<&str> = index.iter().map(|&i| coords[i].as_str()).collect();
    let (head, tail) = names.split_at(split.min(names.len()));
    if tail.is_empty() {
        format!("{name}[{}]", head.join(","))
    } else {
        format!("{name}[{};{}]", head.join(","), tail.join(","))
    }
}

/// Components with `|v| > cutoff`, keyed by label.
pub fn labelled(name: &str, coords: &[String], t: &Tensor, split: usize, cutoff: f64) -> Value {
    let mut map = Map::new();
    for (offset, &v) in t.data().iter().enumerate() {
        if v.abs() > cutoff {
            map.insert(index_label(name, coords, &t.multi_index(offset), split), json!(v));
        }
    }
    Value::Object(map)
}

pub fn matrix(t: &Tensor) -> Value {
    let m = t.dim();
    json!((0..m).map(|i| t.data()[i * m..(i + 1) * m].to_vec()).collect::<Vec<_>>())
}
