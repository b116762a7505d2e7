//! JSON shapes of values, questions, outcomes and trace events.

use framekit_core::inference::TraceEvent;
use framekit_core::{ListValue, Outcome, Question, RawValue, Value};
use serde_json::{json, Map, Value as Json};

/// Integers, booleans and strings map to their JSON counterparts, frame
/// references to the frame name, lists to arrays and unknown to null.
pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Integer(i) => json!(i),
        Value::Boolean(b) => json!(b),
        Value::String(s) | Value::Reference(s) => json!(s),
        Value::List(ListValue::Integer(xs)) => json!(xs),
        Value::List(ListValue::Boolean(xs)) => json!(xs),
        Value::List(ListValue::String(xs)) => json!(xs),
        Value::Unknown => Json::Null,
    }
}

/// Untyped answer payload; null, floats and objects are rejected.
pub fn raw_from_json(v: &Json) -> Option<RawValue> {
    match v {
        Json::Bool(b) => Some(RawValue::Bool(*b)),
        Json::Number(n) => n.as_i64().map(RawValue::Int),
        Json::String(s) => Some(RawValue::Str(s.clone())),
        Json::Array(xs) => xs.iter().map(raw_from_json).collect::<Option<Vec<_>>>().map(RawValue::List),
        Json::Null | Json::Object(_) => None,
    }
}

pub fn result_json(v: &Value) -> Json {
    json!({ "kind": v.kind().name(), "value": value_to_json(v) })
}

pub fn question_json(q: &Question) -> Json {
    let mut m = Map::new();
    m.insert("id".into(), json!(q.id));
    m.insert("frame".into(), json!(q.frame));
    m.insert("slot".into(), json!(q.slot));
    m.insert("prompt".into(), json!(q.prompt));
    m.insert("kind".into(), json!(q.kind.name()));
    m.insert("choices".into(), q.choices.as_ref().map_or(Json::Null, |c| c.iter().map(value_to_json).collect()));
    if !q.violations.is_empty() {
        m.insert("violations".into(), json!(q.violations));
    }
    if let Some(s) = &q.source {
        m.insert("source".into(), json!(s));
    }
    Json::Object(m)
}

/// `{question}` for a suspended outcome, `{result}` otherwise.
pub fn outcome_json(o: &Outcome) -> Json {
    match o {
        Outcome::Suspended(q) => json!({ "question": question_json(q) }),
        Outcome::Resolved(v) => json!({ "result": result_json(v) }),
        Outcome::Unknown => json!({ "result": result_json(&Value::Unknown) }),
    }
}

pub fn trace_event_json(e: &TraceEvent) -> Json {
    json!({
        "seq": e.seq,
        "kind": e.kind.name(),
        "frame": e.frame,
        "origin": e.origin,
        "slot": e.slot,
        "rule": e.rule,
        "value": e.value.as_ref().map(result_json),
        "detail": e.detail,
        "text": e.to_string().trim_start(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use framekit_core::{make_value, ValueKind};

    #[test]
    fn values() {
        assert_eq!(value_to_json(&Value::Integer(3)), json!(3));
        assert_eq!(value_to_json(&Value::Reference("Bike".into())), json!("Bike"));
        assert_eq!(value_to_json(&Value::List(ListValue::Boolean(vec![true]))), json!([true]));
        assert_eq!(value_to_json(&Value::Unknown), Json::Null);
        assert_eq!(result_json(&Value::Unknown), json!({"kind": "unknown", "value": null}));
    }

    #[test]
    fn answers() {
        assert_eq!(raw_from_json(&json!(12)), Some(RawValue::Int(12)));
        assert_eq!(raw_from_json(&json!(1.5)), None);
        assert_eq!(raw_from_json(&Json::Null), None);
        let raw = raw_from_json(&json!(["a", "b"])).unwrap();
        let v = make_value(ValueKind::List(framekit_core::ScalarKind::String), raw).unwrap();
        assert_eq!(value_to_json(&v), json!(["a", "b"]));
    }
}
