use std::fmt::Write;

use crate::model::{Allowed, Model};
use crate::query::{Distribution, Query};

/// Canonical text of `model`: declarations in model order, table entries in
/// row-major range order, potentials in shortest round-trip notation.
pub fn serialize_model(model: &Model) -> String {
    let mut out = String::new();
    for d in model.domains() {
        let _ = writeln!(out, "domain {} = {{{}}}", d.name, d.constants.join(", "));
    }
    for r in model.ranges() {
        let _ = writeln!(out, "range {} = {{{}}}", r.name, r.values.join(", "));
    }
    if !model.prvs().is_empty() {
        out.push('\n');
    }
    for (i, p) in model.prvs().iter().enumerate() {
        let name = model.prv_display(crate::model::PrvId(i));
        let _ = writeln!(out, "prv {} : {}", name, model.range(p.range).name);
    }
    for g in model.parfactors() {
        out.push('\n');
        let args: Vec<String> = g.args.iter().map(|a| model.prv_display(*a)).collect();
        let _ = write!(out, "parfactor {} ({})", g.name, args.join(", "));
        if let Some(c) = g.child {
            let _ = write!(out, " child {}", model.prv_display(c));
        }
        if let Allowed::Tuples(ts) = &g.constraint.allowed {
            let tuples: Vec<String> = ts
                .iter()
                .map(|t| {
                    let names: Vec<&str> = t
                        .iter()
                        .zip(&g.constraint.logvars)
                        .map(|(c, lv)| model.domain(*lv).constants[*c as usize].as_str())
                        .collect();
                    format!("({})", names.join(", "))
                })
                .collect();
            let _ = write!(out, " constraint {{{}}}", tuples.join(", "));
        }
        if g.mutilated {
            out.push_str(" @mutilated");
        }
        out.push_str(" {\n");
        let ranges: Vec<_> = g.args.iter().map(|a| model.prv_range(*a)).collect();
        for (i, v) in g.table.iter().enumerate() {
            let mut rest = i;
            let mut labels = vec![""; ranges.len()];
            for k in (0..ranges.len()).rev() {
                let n = ranges[k].size();
                labels[k] = &ranges[k].values[rest % n];
                rest /= n;
            }
            let _ = writeln!(out, "  ({}) = {};", labels.join(", "), format_potential(*v));
        }
        out.push_str("}\n");
    }
    out
}

/// Query text accepted by `parse_query`.
pub fn serialize_query(model: &Model, q: &Query) -> String {
    let targets: Vec<String> = q.targets.iter().map(|t| t.display(model)).collect();
    let mut items: Vec<String> = q
        .evidence
        .iter()
        .map(|(rv, v)| format!("{}={}", model.rv_name(rv), model.prv_range(rv.prv).values[*v]))
        .collect();
    if !q.dos.is_empty() {
        let dos: Vec<String> = q
            .dos
            .iter()
            .map(|d| format!("{}={}", d.target.display(model), model.prv_range(d.target.prv).values[d.value]))
            .collect();
        items.push(format!("do({})", dos.join(", ")));
    }
    if items.is_empty() {
        format!("P({})", targets.join(", "))
    } else {
        format!("P({} | {})", targets.join(", "), items.join("; "))
    }
}

/// Shortest text that parses back to exactly `x`.
fn format_potential(x: f64) -> String {
    let plain = format!("{x}");
    let sci = format!("{x:e}");
    if plain.len() <= sci.len() {
        plain
    } else {
        sci
    }
}

/// One line per entry, `labels<TAB>probability`, labels joined by `,`,
/// entries in range order, 12 significant digits.
pub fn serialize_distribution(d: &Distribution) -> String {
    let mut out = String::new();
    for (i, p) in d.probs.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}", d.assignment(i).join(","), format_g(*p, 12));
    }
    out
}

/// `printf("%.{sig}g")`.
pub fn format_g(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
