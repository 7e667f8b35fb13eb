//! Closed structural schemas for every wire type, checked against raw JSON.
//!
//! Checking runs before typed deserialization so that a rejected document
//! reports every violation with its JSON path (`$.payload.detections[0].label`).

use std::sync::LazyLock;

use serde::Serialize;
use serde_json::Value;

use super::PROTOCOL_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    pub name: &'static str,
    pub schema: Schema,
    pub required: bool,
}

/// Selects the schema of `content` from the string value of `tag`, both
/// being fields of the same object.
#[derive(Debug, Clone)]
pub struct Dispatch {
    pub tag: &'static str,
    pub content: &'static str,
    pub variants: Vec<(&'static str, Schema)>,
}

#[derive(Debug, Clone)]
pub enum Schema {
    Str,
    NonEmptyStr,
    Uuid,
    Timestamp,
    Const(&'static str),
    Enum(&'static [&'static str]),
    Num { min: Option<f64>, max: Option<f64> },
    UInt,
    Bool,
    Nullable(Box<Schema>),
    Array(Box<Schema>),
    Tuple(Box<Schema>, usize),
    Map(Box<Schema>),
    OneOf(Vec<Schema>),
    Object { fields: Vec<Field>, dispatch: Option<Dispatch> },
}

pub(crate) fn push_key(path: &str, key: &str) -> String {
    let simple = !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if simple {
        format!("{path}.{key}")
    } else {
        format!("{path}[{}]", serde_json::to_string(key).expect("strings serialize"))
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

pub fn is_valid_uuid(s: &str) -> bool {
    s.len() == 36 && uuid::Uuid::try_parse(s).is_ok()
}

pub fn is_valid_timestamp(s: &str) -> bool {
    chrono::DateTime::parse_from_rfc3339(s).is_ok_and(|t| t.offset().local_minus_utc() == 0)
}

impl Schema {
    pub fn check(&self, value: &Value) -> Vec<Violation> {
        let mut out = Vec::new();
        self.check_at(value, "$", &mut out);
        out
    }

    pub fn check_at(&self, value: &Value, path: &str, out: &mut Vec<Violation>) {
        let mut fail = |message: String| {
            out.push(Violation {
                path: path.to_owned(),
                message,
            })
        };
        match self {
            Schema::Str => {
                if !value.is_string() {
                    fail(format!("expected string, found {}", type_name(value)));
                }
            }
            Schema::NonEmptyStr => match value.as_str() {
                Some("") => fail("must not be empty".into()),
                Some(_) => {}
                None => fail(format!("expected string, found {}", type_name(value))),
            },
            Schema::Uuid => match value.as_str() {
                Some(s) if is_valid_uuid(s) => {}
                Some(s) => fail(format!("{s:?} is not a hyphenated UUID")),
                None => fail(format!("expected UUID string, found {}", type_name(value))),
            },
            Schema::Timestamp => match value.as_str() {
                Some(s) if is_valid_timestamp(s) => {}
                Some(s) => fail(format!("{s:?} is not an RFC 3339 UTC timestamp")),
                None => fail(format!("expected timestamp string, found {}", type_name(value))),
            },
            Schema::Const(expected) => {
                if value.as_str() != Some(expected) {
                    fail(format!("expected {expected:?}, found {value}"));
                }
            }
            Schema::Enum(options) => match value.as_str() {
                Some(s) if options.contains(&s) => {}
                _ => fail(format!("expected one of {options:?}, found {value}")),
            },
            Schema::Num { min, max } => match value.as_f64() {
                Some(n) => {
                    if min.is_some_and(|m| n < m) || max.is_some_and(|m| n > m) {
                        fail(format!("{n} outside [{}, {}]", fmt_bound(*min), fmt_bound(*max)));
                    }
                }
                None => fail(format!("expected number, found {}", type_name(value))),
            },
            Schema::UInt => {
                if value.as_u64().is_none() {
                    fail(format!("expected non-negative integer, found {value}"));
                }
            }
            Schema::Bool => {
                if !value.is_boolean() {
                    fail(format!("expected boolean, found {}", type_name(value)));
                }
            }
            Schema::Nullable(inner) => {
                if !value.is_null() {
                    inner.check_at(value, path, out);
                }
            }
            Schema::Array(item) => match value.as_array() {
                Some(items) => {
                    for (i, v) in items.iter().enumerate() {
                        item.check_at(v, &format!("{path}[{i}]"), out);
                    }
                }
                None => fail(format!("expected array, found {}", type_name(value))),
            },
            Schema::Tuple(item, len) => match value.as_array() {
                Some(items) => {
                    if items.len() != *len {
                        fail(format!("expected exactly {len} items, found {}", items.len()));
                    }
                    for (i, v) in items.iter().enumerate() {
                        item.check_at(v, &format!("{path}[{i}]"), out);
                    }
                }
                None => fail(format!("expected array, found {}", type_name(value))),
            },
            Schema::Map(item) => match value.as_object() {
                Some(map) => {
                    for (k, v) in map {
                        if k.is_empty() {
                            out.push(Violation {
                                path: path.to_owned(),
                                message: "map keys must not be empty".into(),
                            });
                        }
                        item.check_at(v, &push_key(path, k), out);
                    }
                }
                None => fail(format!("expected object, found {}", type_name(value))),
            },
            Schema::OneOf(options) => {
                if !options.iter().any(|s| s.check(value).is_empty()) {
                    fail(format!("{} does not match any allowed form", type_name(value)));
                }
            }
            Schema::Object { fields, dispatch } => {
                let Some(map) = value.as_object() else {
                    fail(format!("expected object, found {}", type_name(value)));
                    return;
                };
                for key in map.keys() {
                    let known = fields.iter().any(|f| f.name == key)
                        || dispatch.as_ref().is_some_and(|d| d.tag == key || d.content == key);
                    if !known {
                        out.push(Violation {
                            path: push_key(path, key),
                            message: "unknown field".into(),
                        });
                    }
                }
                for f in fields {
                    match map.get(f.name) {
                        Some(v) => f.schema.check_at(v, &push_key(path, f.name), out),
                        None if f.required => out.push(Violation {
                            path: push_key(path, f.name),
                            message: "missing required field".into(),
                        }),
                        None => {}
                    }
                }
                if let Some(d) = dispatch {
                    let tag_path = push_key(path, d.tag);
                    let content_path = push_key(path, d.content);
                    let selected = match map.get(d.tag) {
                        None => {
                            out.push(Violation { path: tag_path, message: "missing required field".into() });
                            None
                        }
                        Some(tag) => {
                            let found = tag.as_str().and_then(|t| d.variants.iter().find(|(name, _)| *name == t));
                            if found.is_none() {
                                out.push(Violation {
                                    path: tag_path,
                                    message: format!("unknown variant {tag}"),
                                });
                            }
                            found
                        }
                    };
                    match (map.get(d.content), selected) {
                        (None, _) => out.push(Violation { path: content_path, message: "missing required field".into() }),
                        (Some(v), Some((_, schema))) => schema.check_at(v, &content_path, out),
                        (Some(_), None) => {}
                    }
                }
            }
        }
    }

    /// Schema reached by following `path` segments (object keys or array
    /// indices rendered as strings) from this schema. Dispatch content is
    /// resolved against `value`.
    pub fn at<'s>(&'s self, value: &Value, segments: &[String]) -> Option<&'s Schema> {
        let Some((head, rest)) = segments.split_first() else {
            return Some(self);
        };
        match self {
            Schema::Nullable(inner) => inner.at(value, segments),
            Schema::Array(item) | Schema::Tuple(item, _) => {
                let i: usize = head.parse().ok()?;
                item.at(value.get(i)?, rest)
            }
            Schema::Map(item) => item.at(value.get(head)?, rest),
            Schema::Object { fields, dispatch } => {
                let child = value.get(head)?;
                if let Some(f) = fields.iter().find(|f| f.name == head) {
                    return f.schema.at(child, rest);
                }
                let d = dispatch.as_ref()?;
                if d.tag == head {
                    return if rest.is_empty() { Some(&TAG_SCHEMA) } else { None };
                }
                if d.content == head {
                    let tag = value.get(d.tag)?.as_str()?;
                    let (_, s) = d.variants.iter().find(|(n, _)| *n == tag)?;
                    return s.at(child, rest);
                }
                None
            }
            _ => None,
        }
    }

    /// Whether `field` of this object schema is required.
    pub fn field_required(&self, field: &str) -> Option<bool> {
        match self {
            Schema::Object { fields, dispatch } => fields
                .iter()
                .find(|f| f.name == field)
                .map(|f| f.required)
                .or_else(|| dispatch.as_ref().filter(|d| d.tag == field || d.content == field).map(|_| true)),
            _ => None,
        }
    }
}

static TAG_SCHEMA: Schema = Schema::Str;

fn fmt_bound(b: Option<f64>) -> String {
    b.map_or_else(|| "∞".to_owned(), |v| v.to_string())
}

fn req(name: &'static str, schema: Schema) -> Field {
    Field { name, schema, required: true }
}

fn opt(name: &'static str, schema: Schema) -> Field {
    Field { name, schema, required: false }
}

fn object(fields: Vec<Field>) -> Schema {
    Schema::Object { fields, dispatch: None }
}

fn num() -> Schema {
    Schema::Num { min: None, max: None }
}

fn non_negative() -> Schema {
    Schema::Num { min: Some(0.0), max: None }
}

fn probability() -> Schema {
    Schema::Num { min: Some(0.0), max: Some(1.0) }
}

fn array(s: Schema) -> Schema {
    Schema::Array(Box::new(s))
}

fn map(s: Schema) -> Schema {
    Schema::Map(Box::new(s))
}

fn nullable(s: Schema) -> Schema {
    Schema::Nullable(Box::new(s))
}

fn indices() -> Schema {
    array(Schema::UInt)
}

const AGENT_STATUSES: &[&str] = &["idle", "enroute", "observing", "depleted", "failed"];
const EVIDENCE_SOURCES: &[&str] = &["commander", "detector", "rad_sensor", "vegetation"];
const KEYWORD_SOURCES: &[&str] = &["detector", "fusion", "commander"];
const MISSION_STATUSES: &[&str] = &["created", "running", "complete", "aborted"];
const COMPLETION_REASONS: &[&str] = &["all_points_observed", "no_live_agents"];

fn geo_point() -> Schema {
    object(vec![
        req("lat", Schema::Num { min: Some(-90.0), max: Some(90.0) }),
        req("lon", Schema::Num { min: Some(-180.0), max: Some(180.0) }),
        req("alt", non_negative()),
    ])
}

fn local_point() -> Schema {
    object(vec![req("x", num()), req("y", num())])
}

fn pose() -> Schema {
    object(vec![req("x", num()), req("y", num()), req("alt", non_negative())])
}

fn grid_spec() -> Schema {
    object(vec![
        req("corners", Schema::Tuple(Box::new(geo_point()), 4)),
        req("spacing_m", Schema::Num { min: Some(f64::MIN_POSITIVE), max: None }),
        req("points", array(geo_point())),
        req("rows", Schema::UInt),
        req("cols", Schema::UInt),
    ])
}

fn route_plan() -> Schema {
    object(vec![req("routes", map(indices())), req("start_positions", map(local_point()))])
}

fn route_metrics() -> Schema {
    object(vec![
        req("per_agent_distance", map(non_negative())),
        req("total_distance", non_negative()),
        req("makespan", non_negative()),
    ])
}

fn detection() -> Schema {
    object(vec![
        req("label", Schema::NonEmptyStr),
        req("confidence", probability()),
        req("object_id", nullable(Schema::NonEmptyStr)),
    ])
}

fn observation_report() -> Schema {
    object(vec![
        req("point_index", Schema::UInt),
        req("sensor_reading", non_negative()),
        req("detections", array(detection())),
        req("vegetation", object(vec![req("region_tag", Schema::NonEmptyStr), req("damaged", Schema::Bool)])),
        req(
            "image_meta",
            object(vec![
                req("image_id", Schema::NonEmptyStr),
                req("agent_id", Schema::NonEmptyStr),
                req("step", Schema::UInt),
            ]),
        ),
    ])
}

fn evidence_value() -> Schema {
    Schema::OneOf(vec![num(), Schema::NonEmptyStr])
}

fn evidence() -> Schema {
    object(vec![
        req("step", Schema::UInt),
        req("source", Schema::Enum(EVIDENCE_SOURCES)),
        req("kind", Schema::NonEmptyStr),
        req("value", evidence_value()),
        opt("region_tag", Schema::NonEmptyStr),
    ])
}

fn beliefs() -> Schema {
    object(vec![
        req("category_posterior", map(probability())),
        req("substance_posterior", map(map(probability()))),
        req("evidence_count", Schema::UInt),
        req("last_updated_step", Schema::UInt),
    ])
}

fn ranked_document() -> Schema {
    object(vec![
        req("doc_id", Schema::NonEmptyStr),
        req("title", Schema::Str),
        req("score", probability()),
    ])
}

fn agent_state() -> Schema {
    object(vec![
        req("agent_id", Schema::NonEmptyStr),
        req("pose", pose()),
        req("status", Schema::Enum(AGENT_STATUSES)),
        req("battery", non_negative()),
        req("route", indices()),
        req("last_heartbeat_step", Schema::UInt),
        req("peer_view", map(object(vec![req("pose", pose()), req("step", Schema::UInt)]))),
        req("odometer_m", non_negative()),
        req("active_ticks", Schema::UInt),
    ])
}

fn event_record() -> Schema {
    let agent = || req("agent_id", Schema::NonEmptyStr);
    let variants = vec![
        ("task_assignment", object(vec![agent(), req("route", indices())])),
        ("takeoff", object(vec![agent(), req("pose", pose())])),
        ("waypoint_reached", object(vec![agent(), req("point_index", Schema::UInt)])),
        ("observation", object(vec![agent(), req("report", observation_report())])),
        (
            "heartbeat",
            object(vec![
                agent(),
                req("pose", pose()),
                req("battery", non_negative()),
                req("status", Schema::Enum(AGENT_STATUSES)),
            ]),
        ),
        ("agent_failed", object(vec![agent(), req("pose", pose()), req("remaining", indices())])),
        ("agent_depleted", object(vec![agent(), req("pose", pose()), req("remaining", indices())])),
        (
            "replan",
            object(vec![
                req("failed_agent_id", Schema::NonEmptyStr),
                req("last_seen_step", Schema::UInt),
                req("orphan_indices", indices()),
                req("new_assignments", map(indices())),
                req("deciders", array(Schema::NonEmptyStr)),
                req("plans_agree", Schema::Bool),
            ]),
        ),
        (
            "mission_complete",
            object(vec![
                req("reason", Schema::Enum(COMPLETION_REASONS)),
                req("visited", indices()),
                req("unvisited", indices()),
            ]),
        ),
        ("max_ticks_exceeded", object(vec![req("max_ticks", Schema::UInt), req("unvisited", indices())])),
        (
            "evidence_ingested",
            object(vec![
                req("evidence", evidence()),
                req("keywords", array(Schema::Str)),
                req("idempotency_key", nullable(Schema::NonEmptyStr)),
            ]),
        ),
        (
            "keywords_added",
            object(vec![req("source", Schema::Enum(KEYWORD_SOURCES)), req("keywords", array(Schema::Str))]),
        ),
        ("threat_update", object(vec![req("beliefs", beliefs()), req("keywords", array(Schema::Str))])),
    ];
    Schema::Object {
        fields: vec![req("seq", Schema::UInt), req("step", Schema::UInt)],
        dispatch: Some(Dispatch { tag: "kind", content: "payload", variants }),
    }
}

fn mission_summary() -> Schema {
    object(vec![
        req("mission_id", Schema::NonEmptyStr),
        req("status", Schema::Enum(MISSION_STATUSES)),
        req("step", Schema::UInt),
        req("grid_size", Schema::UInt),
        req("visited", Schema::UInt),
        req("makespan_ticks", nullable(Schema::UInt)),
        req("beliefs", beliefs()),
        req("argmax_category", Schema::NonEmptyStr),
        req("top_documents", array(ranked_document())),
        req("last_seq", Schema::UInt),
    ])
}

/// Payload schema of each message type, keyed by its wire name.
fn payloads() -> Vec<(&'static str, Schema)> {
    vec![
        (
            "register",
            object(vec![req("agent_id", Schema::NonEmptyStr), req("capabilities", array(Schema::NonEmptyStr))]),
        ),
        ("task_assignment", object(vec![req("grid", grid_spec()), req("route", indices())])),
        (
            "status_update",
            object(vec![
                req("pose", pose()),
                req("battery", non_negative()),
                req("status", Schema::Enum(AGENT_STATUSES)),
                req("step", Schema::UInt),
            ]),
        ),
        ("observation_report", observation_report()),
        (
            "peer_failure",
            object(vec![req("failed_agent_id", Schema::NonEmptyStr), req("last_seen_step", Schema::UInt)]),
        ),
        (
            "replan_notice",
            object(vec![req("orphan_indices", indices()), req("new_assignments", map(indices()))]),
        ),
        (
            "evidence_submission",
            object(vec![
                req("kind", Schema::NonEmptyStr),
                req("value", evidence_value()),
                opt("region_tag", Schema::NonEmptyStr),
            ]),
        ),
        ("threat_update", object(vec![req("beliefs", beliefs())])),
        ("ack", object(vec![req("of_message_id", Schema::Uuid)])),
        ("error", object(vec![req("code", Schema::NonEmptyStr), req("detail", Schema::Str)])),
        (
            "mission_request",
            object(vec![
                opt("mission_id", Schema::NonEmptyStr),
                req("corners", Schema::Tuple(Box::new(geo_point()), 4)),
                req("spacing_m", num()),
                opt("altitude_m", non_negative()),
                req(
                    "agents",
                    array(object(vec![req("agent_id", Schema::NonEmptyStr), req("start", geo_point())])),
                ),
                req("scenario_ref", Schema::NonEmptyStr),
                opt("seed", Schema::UInt),
                opt("max_ticks", Schema::UInt),
            ]),
        ),
        (
            "plan_snapshot",
            object(vec![
                req("mission_id", Schema::NonEmptyStr),
                req("grid", grid_spec()),
                req("plan", route_plan()),
                req("metrics", route_metrics()),
            ]),
        ),
        ("mission_summary", mission_summary()),
        ("advance_request", object(vec![req("ticks", Schema::UInt)])),
        ("event_batch", object(vec![req("events", array(event_record())), req("last_seq", Schema::UInt)])),
        (
            "evidence_result",
            object(vec![
                req("beliefs", beliefs()),
                req("documents", array(ranked_document())),
                req("replayed", Schema::Bool),
            ]),
        ),
        (
            "document_ranking",
            object(vec![req("documents", array(ranked_document())), req("keywords", map(Schema::UInt))]),
        ),
        ("agent_roster", object(vec![req("agents", array(agent_state()))])),
    ]
}

pub static ENVELOPE_SCHEMA: LazyLock<Schema> = LazyLock::new(|| Schema::Object {
    fields: vec![
        req("protocol_version", Schema::Const(PROTOCOL_VERSION)),
        req("message_id", Schema::Uuid),
        req("timestamp", Schema::Timestamp),
        req("sender", Schema::NonEmptyStr),
        req("recipient", Schema::NonEmptyStr),
    ],
    dispatch: Some(Dispatch {
        tag: "message_type",
        content: "payload",
        variants: payloads(),
    }),
});

pub static EVENT_RECORD_SCHEMA: LazyLock<Schema> = LazyLock::new(event_record);

pub static MISSION_SUMMARY_SCHEMA: LazyLock<Schema> = LazyLock::new(mission_summary);
