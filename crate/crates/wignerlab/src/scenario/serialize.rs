//! Canonical text form of a scenario. `parse(serialize(s)) == s` holds
//! structurally: amplitudes are written as shortest round-tripping decimals.

use std::fmt::Write;

use num_complex::Complex64;

use super::{RegisterKind, Scenario, SpecDecl, SpecKind, Step};

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

fn fmt_amp(a: Complex64) -> String {
    if a.im == 0.0 {
        return fmt_real(a.re);
    }
    let im_part = if a.im == 1.0 {
        "i".to_string()
    } else if a.im == -1.0 {
        "-i".to_string()
    } else {
        format!("{}*i", fmt_real(a.im))
    };
    if a.re == 0.0 {
        im_part
    } else if im_part.starts_with('-') {
        format!("{}-{}", fmt_real(a.re), &im_part[1..])
    } else {
        format!("{}+{}", fmt_real(a.re), im_part)
    }
}

fn fmt_amps(amps: &[Complex64]) -> String {
    amps.iter().map(|&a| fmt_amp(a)).collect::<Vec<_>>().join(", ")
}

fn fmt_spec(spec: &SpecDecl) -> String {
    let entries: Vec<String> = spec
        .outcomes
        .iter()
        .map(|(label, vectors)| {
            let vecs: Vec<String> = vectors.iter().map(|v| fmt_amps(v)).collect();
            format!("{label}: {}", vecs.join(" | "))
        })
        .collect();
    format!("{{ {} }}", entries.join(" ; "))
}

/// Renders a scenario in the canonical `.scn` form.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    for r in &scenario.registers {
        match &r.kind {
            RegisterKind::System => {
                writeln!(out, "register {} labels={}", r.name, r.labels.join(","))
            }
            RegisterKind::Agent { ready } => writeln!(
                out,
                "agent {} ready={} labels={}",
                r.name,
                ready,
                r.labels.join(",")
            ),
        }
        .expect("writing to a String cannot fail");
    }
    for step in &scenario.steps {
        match step {
            Step::Prepare { register, amplitudes } => {
                writeln!(out, "prepare {register} : {}", fmt_amps(amplitudes))
            }
            Step::ApplyUnitary { registers, matrix } => {
                let dim = (matrix.len() as f64).sqrt() as usize;
                let rows: Vec<String> =
                    matrix.chunks(dim).map(fmt_amps).collect();
                writeln!(
                    out,
                    "unitary on {} matrix {{ {} }}",
                    registers.join(","),
                    rows.join(" ; ")
                )
            }
            Step::AgentMeasure { agent, targets, spec, record } => writeln!(
                out,
                "ameasure {agent} on {} basis {} record {record}",
                targets.join(","),
                fmt_spec(spec)
            ),
            Step::ControlledPrepare { control, cases, target } => {
                let entries: Vec<String> = cases
                    .iter()
                    .map(|(label, amps)| format!("{label}: {}", fmt_amps(amps)))
                    .collect();
                writeln!(out, "cprepare {target} on {control} {{ {} }}", entries.join(" ; "))
            }
            Step::ExternalMeasure { targets, spec, record } => {
                let kind = match spec.kind {
                    SpecKind::Basis => "basis",
                    SpecKind::Blocks => "blocks",
                };
                writeln!(
                    out,
                    "xmeasure on {} {kind} {} record {record}",
                    targets.join(","),
                    fmt_spec(spec)
                )
            }
        }
        .expect("writing to a String cannot fail");
    }
    out
}
