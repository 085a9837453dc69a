//! Plain-text tables for machine reports.

use serde_json::Value;

/// Arrays of scalars up to this length are printed inline.
const INLINE_LIMIT: usize = 8;

/// Sections of each report kind that are rendered, in order. Bulky
/// sections (policies, certificates, embedded trees) are summarized.
fn sections(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "validate" => &["input", "valid", "errors", "tree", "system"],
        "solve" => &["tree", "system", "options", "primal", "dual"],
        "gap" => &["tree", "system", "options", "gap", "closed_form"],
        "classify" => &["tree", "system", "regime", "per_dam", "inflow_nonnegative", "no_flood", "closed_form_obstacles"],
        "generate" => &["spec", "seed", "out", "sha256", "summary"],
        "campaign" => &["options", "report"],
        "replay" => &["input", "report"],
        "counts" | "ordering" => &["tree", "system", "report"],
        "error" => &["error"],
        _ => return None,
    })
}

pub fn render(doc: &Value) -> Result<String, String> {
    let kind = doc
        .get("kind")
        .and_then(Value::as_str)
        .ok_or("report has no \"kind\" field")?;
    let keys = sections(kind).ok_or_else(|| format!("unknown report kind `{kind}`"))?;
    let mut rows = Vec::new();
    for key in keys {
        flatten(key, doc.get(*key).unwrap_or(&Value::Null), &mut rows);
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = format!("{kind} report\n{}\n", "=".repeat(width.max(10) + 2 + 20));
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out.pop();
    Ok(out)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(x) if n.is_f64() => format_float(x),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn format_float(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e9) {
        format!("{x:.6e}")
    } else {
        format!("{x:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) if map.is_empty() => rows.push((prefix.into(), "{}".into())),
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&format!("{prefix}.{k}"), child, rows);
            }
        }
        Value::Array(items) => {
            let scalars: Option<Vec<String>> = items.iter().map(scalar).collect();
            match scalars {
                Some(s) if s.len() <= INLINE_LIMIT => rows.push((prefix.into(), format!("[{}]", s.join(", ")))),
                _ if items.iter().all(|i| i.is_string()) => {
                    for (i, item) in items.iter().enumerate() {
                        flatten(&format!("{prefix}[{i}]"), item, rows);
                    }
                }
                _ => rows.push((prefix.into(), format!("({} entries)", items.len()))),
            }
        }
        other => rows.push((prefix.into(), scalar(other).expect("scalar"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn renders_nested_sections_and_summarizes_long_arrays() {
        let doc = json!({
            "kind": "gap",
            "gap": {"rel_gap": 1.5e-12, "gap_ok": true, "primal_opt": 312.5},
            "closed_form": {"applies": false, "obstacles": ["alpha is 0.9, not 1"], "value": null},
            "tree": {"path": "t.json", "sha256": "ab"},
            "system": null,
            "options": {"x": (0..20).collect::<Vec<_>>()},
        });
        let text = render(&doc).unwrap();
        assert!(text.starts_with("gap report"));
        assert!(text.contains("gap.rel_gap"));
        assert!(text.contains("1.500000e-12"));
        assert!(text.contains("312.5"));
        assert!(text.contains("closed_form.obstacles"));
        assert!(text.contains("(20 entries)"));
        assert!(text.contains("system"));
    }

    #[test]
    fn rejects_unknown_kinds() {
        assert!(render(&json!({"kind": "mystery"})).is_err());
        assert!(render(&json!({"no": "kind"})).is_err());
    }
}
