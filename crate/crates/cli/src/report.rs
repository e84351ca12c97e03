//! Consolidated verdict over the artifacts of earlier runs in one output directory.

use serde_json::{json, Value};

use crate::output::OutDir;
use crate::tasks::{Outcome, NO_OBSTRUCTION};
use crate::CliError;

fn read(out: &OutDir, name: &str, missing: &mut Vec<String>) -> Option<Value> {
    let path = out.root.join(name);
    match std::fs::read_to_string(&path) {
        Ok(s) => serde_json::from_str(&s).ok().or_else(|| {
            missing.push(format!("{name} (unreadable)"));
            None
        }),
        Err(_) => {
            missing.push(name.to_string());
            None
        }
    }
}

struct Step {
    name: &'static str,
    pass: bool,
    detail: String,
}

pub fn report(out: &mut OutDir) -> Result<Outcome, CliError> {
    let mut missing = Vec::new();
    let gaps = read(out, "gaps.json", &mut missing);
    let chern = read(out, "chern.json", &mut missing);
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts(missing));
    }
    let (gaps, chern) = (gaps.unwrap(), chern.unwrap());
    let first_gap = gaps.as_array().and_then(|g| g.first()).cloned();
    let c1 = chern["chern"].as_i64().unwrap_or(0);
    let dim = chern["dim"].as_u64().unwrap_or(0);
    let mut steps = vec![
        Step {
            name: "bulk gap",
            pass: first_gap.is_some(),
            detail: first_gap.as_ref().map_or("no gap listed".into(), |g| format!("({}, {})", g["lower"], g["upper"])),
        },
        Step { name: "invariant pair", pass: chern["stable"].as_bool().unwrap_or(false), detail: format!("(dim, c1) = ({dim}, {c1})") },
    ];
    let verdict;
    let mut note = Value::Null;
    if c1 == 0 {
        verdict = if steps.iter().all(|s| s.pass) { "NO_OBSTRUCTION" } else { "FAIL" };
        note = json!(NO_OBSTRUCTION);
    } else {
        let edge = read(out, "edge_fill.json", &mut missing);
        let flow = read(out, "flow.json", &mut missing);
        let aff = read(out, "affiliation.json", &mut missing);
        if !missing.is_empty() {
            return Err(CliError::MissingArtifacts(missing));
        }
        let (edge, flow, aff) = (edge.unwrap(), flow.unwrap(), aff.unwrap());
        let filled = edge["all_pass"].as_bool().unwrap_or(false);
        steps.push(Step { name: "gap filled", pass: filled, detail: format!("max distance {}", edge["max_distance"]) });
        let net = flow["net_flow"].as_i64().unwrap_or(0);
        steps.push(Step { name: "spectral flow", pass: net.abs() == c1.abs(), detail: format!("net flow {net} on the {} edge", flow["designated_edge"].as_str().unwrap_or("?")) });
        let devs = &aff["report"]["deviations"];
        steps.push(Step {
            name: "affiliation decay",
            pass: aff["pass"].as_bool().unwrap_or(false),
            detail: format!("deviations {devs}"),
        });
        verdict = if steps.iter().all(|s| s.pass) { "PASS" } else { "FAIL" };
    }
    let chain: Vec<Value> = steps.iter().map(|s| json!({ "step": s.name, "pass": s.pass, "detail": s.detail })).collect();
    let doc = json!({ "verdict": verdict, "dim": dim, "c1": c1, "gap_filled": steps.iter().find(|s| s.name == "gap filled").map(|s| s.pass), "note": note, "chain": chain });
    out.json("report.json", &doc)?;
    let mut md = format!("# Obstruction chain\n\nVerdict: **{verdict}**\n\n| step | pass | detail |\n|---|---|---|\n");
    for s in &steps {
        md += &format!("| {} | {} | {} |\n", s.name, if s.pass { "yes" } else { "no" }, s.detail);
    }
    if c1 == 0 {
        md += &format!("\nc1 = 0: {NO_OBSTRUCTION}.\n");
    }
    out.write("report.md", md.as_bytes())?;
    Ok(Outcome { pass: verdict != "FAIL", summary: json!({ "verdict": verdict }) })
}
