//! JSON report fragments (schema 1).

use serde_json::{json, Map, Value};
use socpos::certify::{Certificate, CertifyOutcome, Counterexample};
use socpos::Matrix;

use crate::model::rows;

pub const SCHEMA: u32 = 1;

/// Non-finite numbers become `null`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn matrix(m: &Matrix) -> Value {
    json!(rows(m))
}

pub fn certificate(c: &Certificate) -> Value {
    let residuals: Map<String, Value> = c.residuals.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    json!({
        "p0": num(c.p0),
        "P1": matrix(&c.p1),
        "P": matrix(c.cone.p()),
        "u": c.cone.axis().iter().copied().collect::<Vec<f64>>(),
        "rate": num(c.rate),
        "slack": num(c.slack),
        "residuals": residuals,
    })
}

pub fn counterexample(cx: &Counterexample) -> Value {
    json!({
        "time": num(cx.time),
        "output": cx.output,
        "input": cx.input,
        "value": num(cx.value),
        "relative": num(cx.relative),
    })
}

pub fn verdict(outcome: &CertifyOutcome) -> &'static str {
    match outcome {
        CertifyOutcome::Certified(_) => "certified",
        CertifyOutcome::NotCertified { .. } => "not_certified",
        CertifyOutcome::Refuted(_) => "refuted",
    }
}

/// Exit code of a certification verdict: 0 certified, 2 not certified, 3 refuted.
pub fn verdict_code(outcome: &CertifyOutcome) -> u8 {
    match outcome {
        CertifyOutcome::Certified(_) => 0,
        CertifyOutcome::NotCertified { .. } => 2,
        CertifyOutcome::Refuted(_) => 3,
    }
}

/// `verdict`, `reason`, `detail`, `certificate`, `counterexample`.
pub fn outcome_fields(outcome: &CertifyOutcome) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("verdict".into(), json!(verdict(outcome)));
    let (reason, detail) = match outcome {
        CertifyOutcome::NotCertified { reason, detail } => (json!(reason.as_str()), json!(detail)),
        _ => (Value::Null, Value::Null),
    };
    m.insert("reason".into(), reason);
    m.insert("detail".into(), detail);
    m.insert(
        "certificate".into(),
        match outcome {
            CertifyOutcome::Certified(c) => certificate(c),
            _ => Value::Null,
        },
    );
    m.insert(
        "counterexample".into(),
        match outcome {
            CertifyOutcome::Refuted(cx) => counterexample(cx),
            _ => Value::Null,
        },
    );
    m
}

/// Common header: schema, command, model name.
pub fn header(command: &str, model: Option<&str>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("model".into(), json!(model));
    m
}
