//! Command results. Human output is rendered from the same JSON object that
//! `--json` prints, so the two always carry the same values.

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Default)]
pub struct Output {
    fields: Map<String, Value>,
    /// Field printed verbatim after the others in human mode (CSV, file content).
    body_key: Option<String>,
}

impl Output {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("serializable output field");
        self.fields.insert(key.to_string(), v);
        self
    }

    pub fn body(mut self, key: &str, text: String) -> Self {
        self.fields.insert(key.to_string(), Value::String(text));
        self.body_key = Some(key.to_string());
        self
    }

    pub fn print(&self, json: bool) {
        if json {
            let mut obj = self.fields.clone();
            obj.insert("ok".into(), Value::Bool(true));
            println!("{}", Value::Object(obj));
            return;
        }
        for (k, v) in &self.fields {
            if Some(k) == self.body_key.as_ref() {
                continue;
            }
            match v {
                Value::String(s) => println!("{k}: {s}"),
                other => println!("{k}: {other}"),
            }
        }
        if let Some(b) = self.body_key.as_ref().and_then(|k| self.fields[k].as_str()) {
            print!("{b}");
            if !b.ends_with('\n') {
                println!();
            }
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    /// The transaction was recorded but reverted.
    Reverted { seq: u64, reason: String },
    Other(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.into())
    }
}

impl Failure {
    pub fn message(&self) -> String {
        match self {
            Failure::Reverted { reason, .. } => reason.clone(),
            Failure::Other(e) => format!("{e:#}"),
        }
    }

    pub fn print(&self, json: bool) {
        if json {
            let mut obj = Map::new();
            obj.insert("ok".into(), Value::Bool(false));
            obj.insert("error".into(), Value::String(self.message()));
            if let Failure::Reverted { seq, reason } = self {
                obj.insert("seq".into(), (*seq).into());
                obj.insert("revert_reason".into(), Value::String(reason.clone()));
            }
            println!("{}", Value::Object(obj));
        } else {
            match self {
                Failure::Reverted { seq, reason } => eprintln!("error: transaction {seq} reverted: {reason}"),
                Failure::Other(_) => eprintln!("error: {}", self.message()),
            }
        }
    }
}
