//! CSV and JSON writers. Numbers use the shortest round-trip form so equal
//! runs give byte-identical files.

use crate::commands::{is_fatal, Outcome};
use serde_json::{json, Value};
use wolff_core::bounds::BoundReport;

pub const REPORT_SCHEMA: u32 = 1;

fn num(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_nan() => "NaN".into(),
        Some(x) => format!("{x}"),
    }
}

/// Flags NaN entries so that none pass silently.
pub fn mark_nan(rows: &mut [BoundReport]) -> bool {
    let mut any = false;
    for r in rows {
        let bad = r.x.iter().any(|a| a.is_nan())
            || [r.lower, r.upper, r.v, r.oracle].iter().flatten().any(|a| a.is_nan())
            || r.constants.values().any(|a| a.is_nan());
        if bad {
            r.flag("nan");
            any = true;
        }
    }
    any
}

/// Columns `x0..x{n-1}, lower, upper, v, oracle, flags`.
pub fn csv(rows: &[BoundReport], n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        s.push_str(&format!("x{i},"));
    }
    s.push_str("lower,upper,v,oracle,flags\n");
    for r in rows {
        for a in &r.x {
            s.push_str(&num(Some(*a)));
            s.push(',');
        }
        for v in [r.lower, r.upper, r.v, r.oracle] {
            s.push_str(&num(v));
            s.push(',');
        }
        s.push_str(&r.flags.join(";"));
        s.push('\n');
    }
    s
}

/// JSON has no infinities, so non-finite numbers become strings.
fn row_json(r: &BoundReport) -> Value {
    let f = |v: Option<f64>| match v {
        None => Value::Null,
        Some(x) if x.is_finite() => json!(x),
        Some(x) => json!(format!("{x}")),
    };
    let constants: serde_json::Map<String, Value> = r.constants.iter().map(|(k, v)| (k.clone(), f(Some(*v)))).collect();
    json!({
        "x": r.x,
        "lower": f(r.lower),
        "upper": f(r.upper),
        "v": f(r.v),
        "oracle": f(r.oracle),
        "constants": constants,
        "flags": r.flags,
    })
}

/// All fatal flags: the run's own plus `row <i>: flag` from rows.
pub fn fatal_flags(out: &Outcome) -> Vec<String> {
    let mut v: Vec<String> = out.flags.iter().filter(|f| is_fatal(f)).cloned().collect();
    for (i, r) in out.rows.iter().enumerate() {
        for f in r.flags.iter().filter(|f| is_fatal(f)) {
            v.push(format!("row {i}: {f}"));
        }
    }
    v
}

pub fn report(command: &str, out: &Outcome, exit_code: i32) -> String {
    let body = json!({
        "schema_version": REPORT_SCHEMA,
        "command": command,
        "exit_code": exit_code,
        "passed": exit_code == 0,
        "flags": out.flags,
        "failures": fatal_flags(out),
        "summary": Value::Object(out.summary.clone()),
        "rows": out.rows.iter().map(row_json).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&body).unwrap_or_default() + "\n"
}
