//! Files written by a run and the number formats used in them.
//!
//! JSON floats carry 17 significant digits, human-readable lines 10.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::{Format, OutputConfig};

pub const MANIFEST: &str = "manifest.json";

pub use plap_core::kv::fmt_sig;

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap_or(f64::NAN);
                out.push_str(&format!("{x:.16e}"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(xs) => {
            if xs.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in xs.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < xs.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON with every float printed as `{:.16e}`.
pub fn to_json(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, 0);
    s.push('\n');
    s
}

/// Collects the files of one command run.
pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
    command: String,
    written: Vec<String>,
}

impl Output {
    pub fn new(cfg: &OutputConfig, command: &str) -> std::io::Result<Output> {
        fs::create_dir_all(&cfg.dir)?;
        Ok(Output {
            dir: cfg.dir.clone(),
            formats: cfg.formats.clone(),
            command: command.into(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: String, text: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(&name), text)?;
        self.written.push(name);
        Ok(())
    }

    /// `<command>.report.json`
    pub fn report(&mut self, v: &Value) -> std::io::Result<()> {
        if self.formats.contains(&Format::Json) {
            self.put(format!("{}.report.json", self.command), &to_json(v))?;
        }
        Ok(())
    }

    /// `<command>[.<tag>].field.csv`
    pub fn field(&mut self, tag: Option<&str>, csv: &str) -> std::io::Result<()> {
        if self.formats.contains(&Format::Csv) {
            let name = match tag {
                Some(t) => format!("{}.{t}.field.csv", self.command),
                None => format!("{}.field.csv", self.command),
            };
            self.put(name, csv)?;
        }
        Ok(())
    }

    /// `<command>.<kind>.csv`
    pub fn table(&mut self, kind: &str, csv: &str) -> std::io::Result<()> {
        if self.formats.contains(&Format::Csv) {
            self.put(format!("{}.{kind}.csv", self.command), csv)?;
        }
        Ok(())
    }

    /// Records this run in `manifest.json`, replacing an earlier run of the
    /// same command and keeping the others. An unreadable manifest is
    /// replaced.
    pub fn manifest(&self, run: Value) -> std::io::Result<()> {
        let path = self.dir.join(MANIFEST);
        let mut runs = fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<Value>(&t).ok())
            .and_then(|v| v.get("runs").and_then(Value::as_object).cloned())
            .unwrap_or_default();
        runs.insert(self.command.clone(), run);
        let mut top = Map::new();
        top.insert("tool".into(), Value::from("plap"));
        top.insert("cli_version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        top.insert("core_version".into(), Value::from(plap_core::VERSION));
        top.insert("runs".into(), Value::Object(runs));
        fs::write(path, to_json(&Value::Object(top)))
    }
}
