//! Rendering of evaluation reports: an aligned text table (method rows,
//! per-paradigm score/std columns) plus machine-readable JSON.

use std::collections::BTreeSet;

use erpstream_core::metrics::{EvalReport, Method};
use erpstream_core::Paradigm;

/// Method x paradigm table of grand F-beta and across-subject std.
pub fn render_text(reports: &[EvalReport]) -> String {
    let paradigms: Vec<Paradigm> = {
        let set: BTreeSet<Paradigm> = reports.iter().map(|r| r.paradigm).collect();
        set.into_iter().collect()
    };
    let methods: Vec<Method> = {
        let mut seen = Vec::new();
        for r in reports {
            if !seen.contains(&r.method) {
                seen.push(r.method);
            }
        }
        seen
    };
    let cell = |method: Method, paradigm: Paradigm| -> (String, String) {
        match reports
            .iter()
            .find(|r| r.method == method && r.paradigm == paradigm)
        {
            Some(r) => (format!("{:.4}", r.grand_f_beta), format!("{:.4}", r.subject_std)),
            None => ("-".to_string(), "-".to_string()),
        }
    };

    let mut out = String::new();
    out.push_str(&format!("{:<10}", "method"));
    for p in &paradigms {
        out.push_str(&format!(" | {:<8} {:<8}", format!("{p}"), ""));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", ""));
    for _ in &paradigms {
        out.push_str(&format!(" | {:<8} {:<8}", "F_beta", "std."));
    }
    out.push('\n');
    let width = 10 + paradigms.len() * 21;
    out.push_str(&"-".repeat(width));
    out.push('\n');
    for m in &methods {
        out.push_str(&format!("{:<10}", format!("{m}")));
        for p in &paradigms {
            let (f, s) = cell(*m, *p);
            out.push_str(&format!(" | {f:<8} {s:<8}"));
        }
        out.push('\n');
    }
    for r in reports {
        if let Some(onset) = &r.onset {
            out.push_str(&format!(
                "onset[{}/{}]: mean |err| {:.3} s, hit rate (<=0.5 s) {:.3} over {} true positives\n",
                r.method, r.paradigm, onset.mean_abs_error_sec, onset.hit_rate, onset.n_true_positives
            ));
        }
    }
    out
}

pub fn render_json(reports: &[EvalReport]) -> serde_json::Value {
    serde_json::to_value(reports).expect("reports serialize")
}

pub fn reports_from_json(value: &serde_json::Value) -> Result<Vec<EvalReport>, serde_json::Error> {
    serde_json::from_value(value.clone())
}
