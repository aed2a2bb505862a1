use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// One report per run: the resolved configuration, then the results.
#[derive(Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    pub status: &'static str,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: &'static str, config: C, status: &'static str, result: R) -> Self {
        Self { tool: "noether", version: env!("CARGO_PKG_VERSION"), command, config, status, result }
    }

    pub fn render(&self, format: Format) -> String {
        let value = serde_json::to_value(self).expect("reports serialize");
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&value).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Text => {
                let mut out = String::new();
                flatten(&mut out, "", &value);
                out
            }
        }
    }
}

/// `a.b[2].c = value` lines, keys in sorted order.
fn flatten(out: &mut String, prefix: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(out, &key, child);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            writeln!(out, "{prefix} = [{}]", parts.join(", ")).unwrap();
        }
        Value::Array(items) => {
            for (k, child) in items.iter().enumerate() {
                flatten(out, &format!("{prefix}[{k}]"), child);
            }
        }
        other => writeln!(out, "{prefix} = {}", scalar(other)).unwrap(),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_rendering_flattens_nested_values() {
        let r = Report::new("derive", serde_json::json!({"dim": 2}), "ok", serde_json::json!({"a": [1, 2], "b": [{"c": "x"}]}));
        let text = r.render(Format::Text);
        assert!(text.contains("config.dim = 2\n"));
        assert!(text.contains("result.a = [1, 2]\n"));
        assert!(text.contains("result.b[0].c = x\n"));
    }
}
