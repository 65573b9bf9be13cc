use std::fmt::Write;

use torsio_core::diagnostics::{CriterionReport, Verdict};
use torsio_core::shapeopt::TraceRow;
use torsio_core::Field;

/// Node indices, coordinates and one value column per field.
pub fn fields_csv(fields: &[Field]) -> String {
    let Some(first) = fields.first() else { return String::new() };
    let g = first.grid();
    let dim = g.dim();
    let mut s = String::new();
    let mut header: Vec<String> = (0..dim).map(|a| format!("i{a}")).collect();
    header.extend((0..dim).map(|a| format!("x{a}")));
    if fields.len() == 1 {
        header.push("value".into());
    } else {
        header.extend((0..fields.len()).map(|j| format!("value{j}")));
    }
    s.push_str(&header.join(","));
    s.push('\n');
    for idx in 0..g.len() {
        let m = g.multi_index(idx);
        let x = g.node(idx);
        for &mi in &m[..dim] {
            let _ = write!(s, "{mi},");
        }
        let cols: Vec<String> = x[..dim]
            .iter()
            .copied()
            .chain(fields.iter().map(|f| f.values()[idx]))
            .map(|v| format!("{v:.16e}"))
            .collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

/// `criterion,size,r,value` rows for every profile, sub-profiles included.
pub fn criteria_csv(reports: &[CriterionReport]) -> String {
    fn rows(s: &mut String, r: &CriterionReport, size: &str) {
        for p in &r.profile {
            let _ = writeln!(s, "{},{size},{:.16e},{:.16e}", r.id.label(), p.r, p.value);
        }
        for (j, part) in r.parts.iter().enumerate() {
            rows(s, part, &j.to_string());
        }
    }
    let mut s = String::from("criterion,part,r,value\n");
    for r in reports {
        rows(&mut s, r, "");
    }
    s
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("generation,evaluations,best,mean\n");
    for t in trace {
        let _ = writeln!(s, "{},{},{:.16e},{:.16e}", t.generation, t.evaluations, t.best, t.mean);
    }
    s
}

pub fn verdict_table(v: &Verdict) -> String {
    let mut s = String::new();
    let g = &v.scale.grid;
    let _ = writeln!(
        s,
        "{:?} embedding: {:?} (agreement {}) at box {:?}..{:?}, h = {}",
        v.embedding,
        v.decision,
        v.agreement,
        g.lo(),
        g.hi(),
        g.h()
    );
    for c in &v.criteria {
        let last = c.profile.last().map_or(String::from("-"), |p| format!("{:.4e} at R = {:.3}", p.value, p.r));
        let _ = writeln!(s, "  {:<5} {:<13} {}", c.id.label(), format!("{:?}", c.decision), last);
    }
    s
}
