//! Single-field corruptions of valid envelopes, chosen with the schema's help.

use cbrne_core::protocol::schema::{Schema, ENVELOPE_SCHEMA};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
enum Seg {
    Key(String),
    Index(usize),
}

fn render(segs: &[Seg]) -> String {
    let mut path = String::from("$");
    for s in segs {
        match s {
            Seg::Index(i) => path.push_str(&format!("[{i}]")),
            Seg::Key(k) => {
                let simple = !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
                if simple {
                    path.push('.');
                    path.push_str(k);
                } else {
                    path.push_str(&format!("[{}]", serde_json::to_string(k).unwrap()));
                }
            }
        }
    }
    path
}

fn strings(segs: &[Seg]) -> Vec<String> {
    segs.iter()
        .map(|s| match s {
            Seg::Key(k) => k.clone(),
            Seg::Index(i) => i.to_string(),
        })
        .collect()
}

fn collect(v: &Value, prefix: &mut Vec<Seg>, out: &mut Vec<Vec<Seg>>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                prefix.push(Seg::Key(k.clone()));
                out.push(prefix.clone());
                collect(child, prefix, out);
                prefix.pop();
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                prefix.push(Seg::Index(i));
                out.push(prefix.clone());
                collect(child, prefix, out);
                prefix.pop();
            }
        }
        _ => {}
    }
}

fn node_mut<'v>(root: &'v mut Value, segs: &[Seg]) -> &'v mut Value {
    segs.iter().fold(root, |v, s| match s {
        Seg::Key(k) => v.get_mut(k.as_str()).unwrap(),
        Seg::Index(i) => v.get_mut(*i).unwrap(),
    })
}

fn node<'v>(root: &'v Value, segs: &[Seg]) -> &'v Value {
    segs.iter().fold(root, |v, s| match s {
        Seg::Key(k) => &v[k.as_str()],
        Seg::Index(i) => &v[*i],
    })
}

fn same_type(a: &Value, b: &Value) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// Applies one single-field corruption chosen with the schema's help.
/// Returns the path the rejection must name, or `None` when the chosen edit
/// would still be valid.
pub fn mutate(rng: &mut impl Rng, root: &mut Value) -> Option<(String, &'static str)> {
    let original = root.clone();
    let mut all = Vec::new();
    collect(&original, &mut Vec::new(), &mut all);
    let segs = all.choose(rng)?.clone();
    let (parent, last) = segs.split_at(segs.len() - 1);
    let leaf_schema = ENVELOPE_SCHEMA.at(&original, &strings(&segs));
    let parent_schema = ENVELOPE_SCHEMA.at(&original, &strings(parent));
    let path = render(&segs);

    match rng.random_range(0..5) {
        0 => {
            let current = node(&original, &segs);
            let replacement = [json!(null), json!(true), json!(12345), json!("zz"), json!([]), json!({})]
                .into_iter()
                .filter(|c| !same_type(c, current))
                .collect::<Vec<_>>()
                .choose(rng)?
                .clone();
            if leaf_schema?.check(&replacement).is_empty() {
                return None;
            }
            *node_mut(root, &segs) = replacement;
            Some((path, "type swap"))
        }
        1 => {
            let Seg::Key(k) = &last[0] else { return None };
            if parent_schema?.field_required(k) != Some(true) {
                return None;
            }
            node_mut(root, parent).as_object_mut()?.remove(k);
            Some((path, "required field removed"))
        }
        2 => {
            let target = node(&original, &segs);
            let schema = leaf_schema?;
            if !target.is_object() || !matches!(schema, Schema::Object { .. }) {
                return None;
            }
            node_mut(root, &segs).as_object_mut()?.insert("zz_unknown".into(), json!(1));
            Some((format!("{path}.zz_unknown"), "unknown field injected"))
        }
        3 => {
            let replacement = match (leaf_schema?, node(&original, &segs)) {
                (Schema::Num { min: Some(m), .. }, _) => json!(m - 1.0),
                (Schema::Num { max: Some(m), .. }, _) => json!(m + 1.0),
                (Schema::UInt, _) => json!(*[-1.0, 1.5].choose(rng)?),
                (Schema::NonEmptyStr, _) => json!(""),
                (Schema::Enum(_), _) => json!("zz_not_a_variant"),
                _ => return None,
            };
            *node_mut(root, &segs) = replacement;
            Some((path, "value out of domain"))
        }
        _ => {
            let (key, bad) = match rng.random_range(0..3) {
                0 => ("message_id", json!(*["not-a-uuid", "3f2b8c1a6d4e4f7a9b0c1d2e3f4a5b6c", ""].choose(rng)?)),
                1 => ("protocol_version", json!(*["2.0", "1", "1.0.0"].choose(rng)?)),
                _ => ("timestamp", json!(*["2026-13-01T00:00:00Z", "yesterday", "2026-05-04T10:00:00+02:00"].choose(rng)?)),
            };
            root[key] = bad;
            Some((format!("$.{key}"), "envelope field corrupted"))
        }
    }
}
