//! Report writers. TSV output carries no timings so reruns are
//! byte-identical; timings go to the human summary only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pcc_core::pipeline::{EvalReport, FlopReport, ParameterCount};
use pcc_core::Error;

pub fn write(path: &Path, text: &str) -> pcc_core::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn fmt_acc(v: f64) -> String {
    format!("{v:.6}")
}

pub fn params_rows(p: &ParameterCount) -> String {
    format!(
        "params_filter\t{}\nparams_classifier\t{}\nparams_total\t{}\n",
        p.filter, p.classifier, p.total
    )
}

/// `metric<TAB>class<TAB>value` rows.
pub fn eval_tsv(report: &EvalReport, class_names: &[String]) -> String {
    let mut out = String::from("metric\tclass\tvalue\n");
    let _ = writeln!(out, "overall_accuracy\t*\t{}", fmt_acc(report.overall_accuracy));
    let _ = writeln!(out, "class_avg_accuracy\t*\t{}", fmt_acc(report.class_avg_accuracy));
    let _ = writeln!(out, "samples\t*\t{}", report.total());
    let _ = writeln!(out, "correct\t*\t{}", report.correct());
    for (c, acc) in report.per_class_accuracy.iter().enumerate() {
        let name = class_names.get(c).map_or("?", String::as_str);
        let support: u64 = report.confusion[c].iter().sum();
        let _ = writeln!(out, "support\t{name}\t{support}");
        let _ = writeln!(out, "accuracy\t{name}\t{}", acc.map_or("NA".into(), fmt_acc));
    }
    out
}

pub fn confusion_tsv(report: &EvalReport, class_names: &[String]) -> String {
    let name = |c: usize| class_names.get(c).map_or("?", String::as_str).to_string();
    let n = report.confusion.len();
    let mut out = String::from("truth\\predicted");
    for c in 0..n {
        out.push('\t');
        out.push_str(&name(c));
    }
    out.push('\n');
    for (t, row) in report.confusion.iter().enumerate() {
        out.push_str(&name(t));
        for v in row {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn eval_human(report: &EvalReport, class_names: &[String]) -> String {
    let mut out = format!(
        "overall accuracy    {:.2}%  ({}/{})\nclass-avg accuracy  {:.2}%\n",
        report.overall_accuracy * 100.0,
        report.correct(),
        report.total(),
        report.class_avg_accuracy * 100.0
    );
    let width = class_names.iter().map(String::len).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "\n{:<width$}  {:>7}  {:>8}", "class", "support", "accuracy");
    for (c, acc) in report.per_class_accuracy.iter().enumerate() {
        let support: u64 = report.confusion[c].iter().sum();
        let name = class_names.get(c).map_or("?", String::as_str);
        let acc = acc.map_or("-".to_string(), |a| format!("{:.2}%", a * 100.0));
        let _ = writeln!(out, "{name:<width$}  {support:>7}  {acc:>8}");
    }
    out
}

pub fn flops_tsv(report: &FlopReport, params: &ParameterCount) -> String {
    let mut out = String::from("stage\tflops\tin_headline\tformula\n");
    for s in &report.stages {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.name, s.flops, s.in_headline, s.formula);
    }
    let _ = writeln!(out, "headline\t{}\ttrue\tsum of headline stages", report.headline());
    let _ = writeln!(out, "total\t{}\tfalse\tsum of all stages", report.total());
    let _ = writeln!(out, "params_filter\t{}\tfalse\t24x24 Saab kernels", params.filter);
    let _ = writeln!(out, "params_classifier\t{}\tfalse\t(D+1)xC", params.classifier);
    let _ = writeln!(out, "params_total\t{}\tfalse\t", params.total);
    out
}

pub fn flops_human(report: &FlopReport, params: &ParameterCount) -> String {
    let mut out = format!("FLOPs per object, N = {}\n\n", report.n_points);
    for s in &report.stages {
        let mark = if s.in_headline { "*" } else { " " };
        let _ = writeln!(out, "{mark} {:<12} {:>14}  {}", s.name, s.flops, s.formula);
    }
    let _ = writeln!(
        out,
        "\nheadline (*)   {:>14}  ({:.2}M)\nall stages     {:>14}  ({:.2}M)",
        report.headline(),
        report.headline() as f64 / 1e6,
        report.total(),
        report.total() as f64 / 1e6
    );
    let _ = writeln!(
        out,
        "\nparameters: filter {} + classifier {} = {} ({:.4}M)",
        params.filter,
        params.classifier,
        params.total,
        params.total as f64 / 1e6
    );
    out
}

pub struct AblationRow {
    pub sweep: &'static str,
    pub setting: String,
    pub feature_len: usize,
    pub selected: usize,
    pub report: EvalReport,
}

pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let mut out = String::from("sweep\tsetting\tfeature_len\tselected\toverall_accuracy\tclass_avg_accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.sweep,
            r.setting,
            r.feature_len,
            r.selected,
            fmt_acc(r.report.overall_accuracy),
            fmt_acc(r.report.class_avg_accuracy)
        );
    }
    out
}

pub fn ablation_human(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.setting.len()).max().unwrap_or(7).max(7);
    let mut out = format!(
        "{:<11} {:<width$} {:>8} {:>8} {:>9} {:>9}\n",
        "sweep", "setting", "dim", "selected", "OA %", "mAcc %"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<11} {:<width$} {:>8} {:>8} {:>9.2} {:>9.2}",
            r.sweep,
            r.setting,
            r.feature_len,
            r.selected,
            r.report.overall_accuracy * 100.0,
            r.report.class_avg_accuracy * 100.0
        );
    }
    out
}
