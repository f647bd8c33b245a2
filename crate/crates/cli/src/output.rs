//! Result documents and error codes.

use serde_json::{json, Value};

use mamoc::engine::objective::Objective;
use mamoc::engine::{ApproxResult, EngineError};
use mamoc::ingest::IngestError;
use mamoc::montecarlo::MonteCarloError;

use crate::{NoWitness, Usage};

/// Maps a point from the maximizing scale back to the objectives' own scale.
fn denormalize(p: &[f64], objs: &[Objective]) -> Vec<f64> {
    p.iter().zip(objs).map(|(x, o)| x * o.sign()).collect()
}

/// Approximation fields of a result document, on the objectives' own scale.
///
/// Halfspaces read `w · p <= b`; solve weights are multiplied by the
/// objective's sign, so each solve maximizes `w · p`.
pub fn approx_json(approx: Option<&ApproxResult>, objs: &[Objective]) -> Value {
    let Some(r) = approx else {
        return json!({
            "delta": Value::Null,
            "error_box": Value::Null,
            "under": { "vertices": [] },
            "over": { "halfspaces": [] },
            "solves": [],
            "status": Value::Null,
        });
    };
    let halfspaces: Vec<Value> = r
        .over
        .halfspaces
        .iter()
        .map(|h| json!({ "w": denormalize(&h.normal, objs), "b": h.offset }))
        .collect();
    let solves: Vec<Value> = r
        .solves
        .iter()
        .map(|s| json!({ "w": denormalize(&s.weights, objs), "point": denormalize(&s.point, objs) }))
        .collect();
    // a minimized coordinate flips sign, so its down and up errors trade places
    let (mut down, mut up) = (Vec::new(), Vec::new());
    for (i, o) in objs.iter().enumerate() {
        if o.sign() > 0.0 {
            down.push(r.error_box.down[i]);
            up.push(r.error_box.up[i]);
        } else {
            down.push(r.error_box.up[i]);
            up.push(r.error_box.down[i]);
        }
    }
    json!({
        "delta": r.delta,
        "error_box": { "down": down, "up": up },
        "under": { "vertices": sorted_vertices(r, objs) },
        "over": { "halfspaces": halfspaces },
        "solves": solves,
        "status": format!("{:?}", r.status),
        "gap": r.gap,
        "eta_achieved": r.eta_achieved,
    })
}

fn sorted_vertices(r: &ApproxResult, objs: &[Objective]) -> Vec<Vec<f64>> {
    let mut v: Vec<Vec<f64>> = r.under.vertices.iter().map(|p| denormalize(p, objs)).collect();
    v.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Under-approximation vertices as CSV, sorted lexicographically.
pub fn under_csv(approx: Option<&ApproxResult>, objs: &[Objective]) -> String {
    let header: Vec<String> = (1..=objs.len()).map(|i| format!("o{i}")).collect();
    let mut out = header.join(",") + "\n";
    if let Some(r) = approx {
        for v in sorted_vertices(r, objs) {
            out += &v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            out.push('\n');
        }
    }
    out
}

/// Machine-readable name of the first recognized error in the chain.
pub fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(x) = cause.downcast_ref::<IngestError>() {
            return x.code();
        }
        if let Some(x) = cause.downcast_ref::<EngineError>() {
            return x.code();
        }
        if let Some(x) = cause.downcast_ref::<MonteCarloError>() {
            return x.code();
        }
        if cause.is::<Usage>() {
            return "UsageError";
        }
        if cause.is::<NoWitness>() {
            return "NoWitness";
        }
        if cause.is::<serde_json::Error>() {
            return "InvalidScheduler";
        }
        if cause.is::<std::io::Error>() {
            return "IoError";
        }
    }
    "Error"
}
