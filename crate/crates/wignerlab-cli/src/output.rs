//! Deterministic rendering: probability formatting, tables and the
//! structured JSON document (schema version 1).

use serde_json::{json, Map, Value};

use wignerlab::measure::OutcomeDistribution;
use wignerlab::scenario::{
    AuditReport, InterferencePair, Policy, RecordValue, RunResult, SampleCounts,
};

/// Output mode selected by `--out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Table,
    Structured,
}

/// Schema version of the structured output.
pub const SCHEMA_VERSION: u64 = 1;

/// Renders a probability with 12 significant digits and at least 12 decimal
/// places, so `1` becomes `1.000000000000` and `1/12` becomes
/// `0.0833333333333`.
pub fn fmt_prob(p: f64) -> String {
    if p <= 0.0 {
        return format!("{:.12}", 0.0_f64.max(p));
    }
    let exponent = p.log10().floor() as i32;
    let decimals = (11 - exponent).max(12) as usize;
    format!("{p:.decimals$}")
}

fn policy_line(policy: Policy) -> String {
    match policy {
        Policy::UnitaryAgents => format!("policy: {}", policy.as_str()),
        Policy::CollapseOnRecord => format!("policy: {} (naive)", policy.as_str()),
    }
}

/// Rows of a run: resolved records only, in production order, one row per
/// surviving record tuple.
fn joint_rows(result: &RunResult) -> (Vec<&str>, Vec<(String, f64)>) {
    let resolved: Vec<&str> = result
        .record_names()
        .into_iter()
        .filter(|r| result.is_resolved(r))
        .collect();
    if resolved.is_empty() {
        return (resolved, Vec::new());
    }
    let rows = result
        .marginal(&resolved)
        .into_iter()
        .map(|(values, p)| {
            let label = values
                .iter()
                .map(|v| v.as_outcome().unwrap_or("unresolved"))
                .collect::<Vec<_>>()
                .join(",");
            (label, p)
        })
        .collect();
    (resolved, rows)
}

/// Human-readable table for an outcome distribution: one `P(label) = p` row
/// per outcome.
pub fn render_distribution(distribution: &OutcomeDistribution, mode: OutputMode) -> String {
    match mode {
        OutputMode::Table => {
            let mut out = String::from("outcome probabilities\n");
            for (label, p) in distribution.entries() {
                out.push_str(&format!("P({label}) = {}\n", fmt_prob(*p)));
            }
            out
        }
        OutputMode::Structured => {
            let rows: Vec<Value> = distribution
                .entries()
                .iter()
                .map(|(label, p)| json!({ "outcome": label, "probability": fmt_prob(*p) }))
                .collect();
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "distribution",
                "outcomes": rows,
            });
            format!("{doc:#}\n")
        }
    }
}

fn records_value(result: &RunResult) -> Value {
    Value::Array(
        result
            .record_names()
            .iter()
            .map(|r| json!({ "name": r, "resolved": result.is_resolved(r) }))
            .collect(),
    )
}

fn record_map_value(records: &std::collections::BTreeMap<String, RecordValue>) -> Value {
    let mut map = Map::new();
    for (name, value) in records {
        let v = match value {
            RecordValue::Outcome(o) => Value::String(o.clone()),
            RecordValue::Unresolved => Value::Null,
        };
        map.insert(name.clone(), v);
    }
    Value::Object(map)
}

pub fn render_run(source: &str, result: &RunResult, mode: OutputMode) -> String {
    let (resolved, rows) = joint_rows(result);
    match mode {
        OutputMode::Table => {
            let mut out = String::new();
            out.push_str(&format!("scenario: {source}\n"));
            out.push_str(&policy_line(result.policy));
            out.push('\n');
            let names = result.record_names();
            out.push_str(&format!("records: {}\n", names.join(", ")));
            let unresolved: Vec<&str> =
                names.iter().copied().filter(|r| !resolved.contains(r)).collect();
            if !unresolved.is_empty() {
                out.push_str(&format!("unresolved: {}\n", unresolved.join(", ")));
            }
            for (label, p) in &rows {
                out.push_str(&format!("P({label}) = {}\n", fmt_prob(*p)));
            }
            out
        }
        OutputMode::Structured => {
            let joint: Vec<Value> = result
                .joint
                .iter()
                .map(|(records, p)| {
                    json!({
                        "records": record_map_value(records),
                        "probability": fmt_prob(*p),
                    })
                })
                .collect();
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "run",
                "source": source,
                "policy": result.policy.as_str(),
                "records": records_value(result),
                "joint": joint,
            });
            format!("{doc:#}\n")
        }
    }
}

pub fn render_sample(
    source: &str,
    policy: Policy,
    counts: &SampleCounts,
    mode: OutputMode,
) -> String {
    match mode {
        OutputMode::Table => {
            let mut out = String::new();
            out.push_str(&format!("scenario: {source}\n"));
            out.push_str(&policy_line(policy));
            out.push('\n');
            out.push_str(&format!("n: {}\nseed: {}\n", counts.n, counts.seed));
            for (records, c) in &counts.counts {
                let label = records
                    .values()
                    .map(|v| v.as_outcome().unwrap_or("unresolved"))
                    .collect::<Vec<_>>()
                    .join(",");
                let freq = *c as f64 / counts.n as f64;
                out.push_str(&format!("N({label}) = {c}  f = {}\n", fmt_prob(freq)));
            }
            out
        }
        OutputMode::Structured => {
            let rows: Vec<Value> = counts
                .counts
                .iter()
                .map(|(records, c)| {
                    json!({
                        "records": record_map_value(records),
                        "count": c,
                        "frequency": fmt_prob(*c as f64 / counts.n as f64),
                    })
                })
                .collect();
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "sample",
                "source": source,
                "policy": policy.as_str(),
                "n": counts.n,
                "seed": counts.seed,
                "counts": rows,
            });
            format!("{doc:#}\n")
        }
    }
}

pub fn render_audit(source: &str, report: &AuditReport, mode: OutputMode) -> String {
    match mode {
        OutputMode::Table => {
            let mut out = String::new();
            out.push_str(&format!("scenario: {source}\n"));
            out.push_str(&format!("tol: {:e}\n", report.tol));
            for e in &report.entries {
                out.push_str(&format!(
                    "agent {} (step {}) vs {} (step {}): {} max-gap = {}\n",
                    e.agent_record,
                    e.agent_step + 1,
                    e.later_record,
                    e.later_step + 1,
                    if e.safety.safe { "SAFE" } else { "UNSAFE" },
                    fmt_prob(e.safety.max_gap),
                ));
            }
            let unsafe_count = report.unsafe_entries().count();
            out.push_str(&format!("verdict: {unsafe_count} unsafe pair(s)\n"));
            out
        }
        OutputMode::Structured => {
            let rows: Vec<Value> = report
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "agent_record": e.agent_record,
                        "agent_step": e.agent_step + 1,
                        "later_record": e.later_record,
                        "later_step": e.later_step + 1,
                        "safe": e.safety.safe,
                        "max_gap": fmt_prob(e.safety.max_gap),
                    })
                })
                .collect();
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "audit",
                "source": source,
                "tol": report.tol,
                "pairs": rows,
            });
            format!("{doc:#}\n")
        }
    }
}

pub fn render_interference(source: &str, pairs: &[InterferencePair], tol: f64, mode: OutputMode) -> String {
    match mode {
        OutputMode::Table => {
            let mut out = String::new();
            out.push_str(&format!("scenario: {source}\n"));
            out.push_str(&format!("tol: {tol:e}\n"));
            for p in pairs {
                let max_term = p
                    .projector_reports
                    .iter()
                    .map(|(_, r)| r.max_abs_term)
                    .fold(0.0_f64, f64::max);
                out.push_str(&format!(
                    "agent {} (step {}) vs {} (step {}): {} gap = {} max-term = {}\n",
                    p.agent_record,
                    p.agent_step + 1,
                    p.later_record,
                    p.later_step + 1,
                    if p.safety.safe { "SAFE" } else { "UNSAFE" },
                    fmt_prob(p.safety.max_gap),
                    fmt_prob(max_term),
                ));
                for (outcome, report) in &p.projector_reports {
                    out.push_str(&format!(
                        "  projector {outcome}: superposition = {} mixture = {} max |term| = {}\n",
                        fmt_prob(report.superposition_expectation),
                        fmt_prob(report.mixture_expectation),
                        fmt_prob(report.max_abs_term),
                    ));
                }
            }
            out
        }
        OutputMode::Structured => {
            let rows: Vec<Value> = pairs
                .iter()
                .map(|p| {
                    let reports: Vec<Value> = p
                        .projector_reports
                        .iter()
                        .map(|(outcome, r)| {
                            json!({
                                "outcome": outcome,
                                "superposition": fmt_prob(r.superposition_expectation),
                                "mixture": fmt_prob(r.mixture_expectation),
                                "max_abs_term": fmt_prob(r.max_abs_term),
                                "safe": r.safe,
                            })
                        })
                        .collect();
                    json!({
                        "agent_record": p.agent_record,
                        "agent_step": p.agent_step + 1,
                        "later_record": p.later_record,
                        "later_step": p.later_step + 1,
                        "safe": p.safety.safe,
                        "max_gap": fmt_prob(p.safety.max_gap),
                        "projectors": reports,
                    })
                })
                .collect();
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "interference",
                "source": source,
                "tol": tol,
                "pairs": rows,
            });
            format!("{doc:#}\n")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_formatting_matches_the_documented_rule() {
        assert_eq!(fmt_prob(1.0), "1.000000000000");
        assert_eq!(fmt_prob(1.0 / 12.0), "0.0833333333333");
        assert_eq!(fmt_prob(0.5), "0.500000000000");
        assert_eq!(fmt_prob(0.75), "0.750000000000");
        assert_eq!(fmt_prob(0.0), "0.000000000000");
        assert_eq!(fmt_prob(9.0 / 12.0), "0.750000000000");
        assert_eq!(fmt_prob(0.0012345678901234), "0.00123456789012");
    }

    #[test]
    fn distribution_table_has_one_row_per_outcome() {
        let d = OutcomeDistribution::new(vec![("only".into(), 1.0)]).unwrap();
        let table = render_distribution(&d, OutputMode::Table);
        assert!(table.contains("P(only) = 1.000000000000"));
        assert_eq!(table.lines().count(), 2);
    }
}
