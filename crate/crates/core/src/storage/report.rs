//! Tab-separated report tables.
//!
//! Consistency report:
//!
//! ```text
//! # baryalign consistency report v1
//! # similarity<TAB>cosine
//! # models<TAB>a<TAB>b<TAB>c
//! # zero_norm_rows<TAB>0
//! stimulus_id<TAB>score
//! s0<TAB>9.9999999999999989e-1
//! ```
//!
//! Evaluation report, one value per row; pool-level rows have an empty
//! `model_id`:
//!
//! ```text
//! # baryalign eval report v1
//! # stimuli<TAB>100
//! model_id<TAB>metric<TAB>k<TAB>value
//! a<TAB>correlation<TAB><TAB>…
//! a<TAB>rms<TAB><TAB>…
//! a<TAB>top_k<TAB>1<TAB>…
//! <TAB>chance<TAB>1<TAB>1.0000000000000000e-2
//! <TAB>skipped_constant_dimensions<TAB><TAB>0
//! ```
//!
//! The `table` format is a column-aligned rendering for terminals and is not
//! read back.

use std::path::Path;
use std::str::FromStr;

use super::{fmt_f64, write_file_atomic};
use crate::metrics::EvalReport;
use crate::scoring::{ConsistencyReport, Similarity};
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;
const CONSISTENCY_TAG: &str = "# baryalign consistency report v1";
const EVAL_TAG: &str = "# baryalign eval report v1";
const CONSISTENCY_HEADER: &str = "stimulus_id\tscore";
const EVAL_HEADER: &str = "model_id\tmetric\tk\tvalue";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Tsv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "table" => Ok(Self::Table),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

fn check_field(s: &str) -> Result<()> {
    if s.contains(['\n', '\r', '\t']) {
        Err(Error::InvalidStimulusId(s.to_owned()))
    } else {
        Ok(())
    }
}

pub fn format_consistency_report(report: &ConsistencyReport, format: ReportFormat) -> Result<String> {
    for id in report.stimulus_ids.iter().chain(&report.pool_model_ids) {
        check_field(id)?;
    }
    let mut out = String::new();
    out.push_str(CONSISTENCY_TAG);
    out.push('\n');
    out.push_str(&format!("# similarity\t{}\n", report.similarity));
    out.push_str("# models");
    for id in &report.pool_model_ids {
        out.push('\t');
        out.push_str(id);
    }
    out.push('\n');
    out.push_str(&format!("# zero_norm_rows\t{}\n", report.zero_norm_rows));
    match format {
        ReportFormat::Tsv => {
            out.push_str(CONSISTENCY_HEADER);
            out.push('\n');
            for (id, s) in report.stimulus_ids.iter().zip(&report.scores) {
                out.push_str(&format!("{id}\t{}\n", fmt_f64(*s)));
            }
        }
        ReportFormat::Table => {
            let w = report
                .stimulus_ids
                .iter()
                .map(|s| s.chars().count())
                .chain(std::iter::once("stimulus_id".len()))
                .max()
                .unwrap_or(0);
            out.push_str(&format!("{:<w$}  {:>24}\n", "stimulus_id", "score"));
            for (id, s) in report.stimulus_ids.iter().zip(&report.scores) {
                out.push_str(&format!("{id:<w$}  {:>24}\n", fmt_f64(*s)));
            }
        }
    }
    Ok(out)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::ParseFailure {
        path: path.into(),
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| parse_error(path, line, format!("`{field}` is not a number")))
}

/// Parses the `tsv` rendering of a consistency report.
pub fn parse_consistency_report(text: &str, path: &Path) -> Result<ConsistencyReport> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, CONSISTENCY_TAG)) => {}
        _ => return Err(parse_error(path, 1, "missing consistency report tag")),
    }
    let mut similarity = None;
    let mut models = None;
    let mut zero_norm_rows = None;
    let mut header_seen = false;
    let mut stimulus_ids = Vec::new();
    let mut scores = Vec::new();
    for (n, line) in lines {
        if !header_seen {
            if let Some(meta) = line.strip_prefix("# ") {
                let mut fields = meta.split('\t');
                match fields.next() {
                    Some("similarity") => {
                        let v = fields.next().unwrap_or("");
                        similarity = Some(
                            v.parse::<Similarity>()
                                .map_err(|e| parse_error(path, n, e))?,
                        );
                    }
                    Some("models") => models = Some(fields.map(str::to_owned).collect::<Vec<_>>()),
                    Some("zero_norm_rows") => {
                        let v = fields.next().unwrap_or("");
                        zero_norm_rows = Some(v.parse::<usize>().map_err(|_| {
                            parse_error(path, n, format!("`{v}` is not a count"))
                        })?);
                    }
                    _ => return Err(parse_error(path, n, format!("unknown metadata line `{line}`"))),
                }
                continue;
            }
            if line != CONSISTENCY_HEADER {
                return Err(parse_error(path, n, "expected column header `stimulus_id<TAB>score`"));
            }
            header_seen = true;
            continue;
        }
        let (id, value) = line
            .split_once('\t')
            .ok_or_else(|| parse_error(path, n, "expected two tab-separated columns"))?;
        stimulus_ids.push(id.to_owned());
        scores.push(parse_f64(value, path, n)?);
    }
    let last = text.lines().count();
    if !header_seen {
        return Err(parse_error(path, last, "missing column header"));
    }
    if scores.is_empty() {
        return Err(parse_error(path, last, "report has no rows"));
    }
    Ok(ConsistencyReport {
        stimulus_ids,
        scores,
        pool_model_ids: models.ok_or_else(|| parse_error(path, last, "missing `# models` line"))?,
        similarity: similarity.ok_or_else(|| parse_error(path, last, "missing `# similarity` line"))?,
        zero_norm_rows: zero_norm_rows.unwrap_or(0),
    })
}

pub fn format_eval_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    for id in &report.model_ids {
        check_field(id)?;
        if id.is_empty() {
            return Err(Error::InvalidModelId(id.clone()));
        }
    }
    let mut out = String::new();
    out.push_str(EVAL_TAG);
    out.push('\n');
    out.push_str(&format!("# stimuli\t{}\n", report.n_stimuli));
    match format {
        ReportFormat::Tsv => {
            out.push_str(EVAL_HEADER);
            out.push('\n');
            for (i, id) in report.model_ids.iter().enumerate() {
                out.push_str(&format!("{id}\tcorrelation\t\t{}\n", fmt_f64(report.per_model_correlation[i])));
                out.push_str(&format!("{id}\trms\t\t{}\n", fmt_f64(report.per_model_rms[i])));
                for (k, acc) in report.ks.iter().zip(&report.per_model_retrieval[i]) {
                    out.push_str(&format!("{id}\ttop_k\t{k}\t{}\n", fmt_f64(*acc)));
                }
            }
            for (k, c) in report.ks.iter().zip(&report.chance_levels) {
                out.push_str(&format!("\tchance\t{k}\t{}\n", fmt_f64(*c)));
            }
            out.push_str(&format!(
                "\tskipped_constant_dimensions\t\t{}\n",
                report.skipped_constant_dimensions
            ));
        }
        ReportFormat::Table => {
            let w = report
                .model_ids
                .iter()
                .map(|s| s.chars().count())
                .chain(std::iter::once("chance".len()))
                .max()
                .unwrap_or(0);
            out.push_str(&format!("{:<w$}  {:>10}  {:>12}", "model", "corr", "rms"));
            for k in &report.ks {
                out.push_str(&format!("  {:>8}", format!("top-{k}")));
            }
            out.push('\n');
            for (i, id) in report.model_ids.iter().enumerate() {
                out.push_str(&format!(
                    "{id:<w$}  {:>10.4}  {:>12.5}",
                    report.per_model_correlation[i], report.per_model_rms[i]
                ));
                for acc in &report.per_model_retrieval[i] {
                    out.push_str(&format!("  {acc:>8.4}"));
                }
                out.push('\n');
            }
            out.push_str(&format!("{:<w$}  {:>10}  {:>12}", "chance", "", ""));
            for c in &report.chance_levels {
                out.push_str(&format!("  {:>8}", format!("{c}")));
            }
            out.push('\n');
            out.push_str(&format!(
                "# skipped constant (pair, dimension) combinations: {}\n",
                report.skipped_constant_dimensions
            ));
        }
    }
    Ok(out)
}

/// Parses the `tsv` rendering of an evaluation report.
pub fn parse_eval_report(text: &str, path: &Path) -> Result<EvalReport> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, EVAL_TAG)) => {}
        _ => return Err(parse_error(path, 1, "missing eval report tag")),
    }
    let mut n_stimuli = None;
    let mut header_seen = false;
    let mut model_ids: Vec<String> = Vec::new();
    let mut correlation: Vec<Option<f64>> = Vec::new();
    let mut rms: Vec<Option<f64>> = Vec::new();
    let mut retrieval: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut chance: Vec<(usize, f64)> = Vec::new();
    let mut skipped = None;

    for (n, line) in lines {
        if !header_seen {
            if let Some(v) = line.strip_prefix("# stimuli\t") {
                n_stimuli = Some(
                    v.parse::<usize>()
                        .map_err(|_| parse_error(path, n, format!("`{v}` is not a count")))?,
                );
                continue;
            }
            if line != EVAL_HEADER {
                return Err(parse_error(path, n, "expected column header `model_id<TAB>metric<TAB>k<TAB>value`"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [model, metric, k, value] = fields[..] else {
            return Err(parse_error(path, n, "expected four tab-separated columns"));
        };
        let parse_k = || {
            k.parse::<usize>()
                .map_err(|_| parse_error(path, n, format!("`{k}` is not a valid K")))
        };
        if model.is_empty() {
            match metric {
                "chance" => chance.push((parse_k()?, parse_f64(value, path, n)?)),
                "skipped_constant_dimensions" => {
                    skipped = Some(value.parse::<usize>().map_err(|_| {
                        parse_error(path, n, format!("`{value}` is not a count"))
                    })?)
                }
                other => return Err(parse_error(path, n, format!("unknown pool metric `{other}`"))),
            }
            continue;
        }
        let i = match model_ids.iter().position(|id| id == model) {
            Some(i) => i,
            None => {
                model_ids.push(model.to_owned());
                correlation.push(None);
                rms.push(None);
                retrieval.push(Vec::new());
                model_ids.len() - 1
            }
        };
        let v = parse_f64(value, path, n)?;
        match metric {
            "correlation" => correlation[i] = Some(v),
            "rms" => rms[i] = Some(v),
            "top_k" => retrieval[i].push((parse_k()?, v)),
            other => return Err(parse_error(path, n, format!("unknown metric `{other}`"))),
        }
    }

    let last = text.lines().count();
    if model_ids.is_empty() {
        return Err(parse_error(path, last, "report has no rows"));
    }
    let ks: Vec<usize> = chance.iter().map(|&(k, _)| k).collect();
    let incomplete = |what: &str, id: &str| parse_error(path, last, format!("missing {what} for `{id}`"));
    let mut per_model_retrieval = Vec::with_capacity(model_ids.len());
    for (id, rows) in model_ids.iter().zip(&retrieval) {
        if rows.iter().map(|&(k, _)| k).collect::<Vec<_>>() != ks {
            return Err(incomplete("top_k rows matching the chance rows", id));
        }
        per_model_retrieval.push(rows.iter().map(|&(_, v)| v).collect());
    }
    let per_model_correlation = model_ids
        .iter()
        .zip(&correlation)
        .map(|(id, c)| c.ok_or_else(|| incomplete("correlation", id)))
        .collect::<Result<_>>()?;
    let per_model_rms = model_ids
        .iter()
        .zip(&rms)
        .map(|(id, c)| c.ok_or_else(|| incomplete("rms", id)))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        model_ids,
        n_stimuli: n_stimuli.ok_or_else(|| parse_error(path, last, "missing `# stimuli` line"))?,
        per_model_correlation,
        per_model_rms,
        per_model_retrieval,
        ks,
        chance_levels: chance.into_iter().map(|(_, c)| c).collect(),
        skipped_constant_dimensions: skipped
            .ok_or_else(|| parse_error(path, last, "missing skipped_constant_dimensions row"))?,
    })
}

pub fn save_consistency_report(path: &Path, report: &ConsistencyReport, format: ReportFormat) -> Result<()> {
    write_file_atomic(path, format_consistency_report(report, format)?.as_bytes())
}

pub fn load_consistency_report(path: impl AsRef<Path>) -> Result<ConsistencyReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_consistency_report(&text, path)
}

pub fn save_eval_report(path: &Path, report: &EvalReport, format: ReportFormat) -> Result<()> {
    write_file_atomic(path, format_eval_report(report, format)?.as_bytes())
}

pub fn load_eval_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_eval_report(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn consistency(scores: Vec<f64>) -> ConsistencyReport {
        ConsistencyReport {
            stimulus_ids: (0..scores.len()).map(|j| format!("img {j}")).collect(),
            scores,
            pool_model_ids: vec!["vit".into(), "resnet,50".into()],
            similarity: Similarity::Cosine,
            zero_norm_rows: 2,
        }
    }

    fn eval() -> EvalReport {
        EvalReport {
            model_ids: vec!["a".into(), "b".into()],
            n_stimuli: 100,
            per_model_correlation: vec![0.4396, 1.0 / 3.0],
            per_model_rms: vec![0.01344, 0.1 + 0.2],
            per_model_retrieval: vec![vec![0.7726, 0.92493, 0.9436], vec![0.0, 0.5, 1.0]],
            ks: vec![1, 5, 10],
            chance_levels: vec![0.01, 0.05, 0.1],
            skipped_constant_dimensions: 7,
        }
    }

    #[test]
    fn consistency_golden() {
        let text = format_consistency_report(&consistency(vec![1.0, -0.25]), ReportFormat::Tsv).unwrap();
        assert_eq!(
            text,
            "# baryalign consistency report v1\n\
             # similarity\tcosine\n\
             # models\tvit\tresnet,50\n\
             # zero_norm_rows\t2\n\
             stimulus_id\tscore\n\
             img 0\t1.0000000000000000e0\n\
             img 1\t-2.5000000000000000e-1\n"
        );
    }

    #[test]
    fn eval_round_trip_and_golden_prefix() {
        let report = eval();
        let text = format_eval_report(&report, ReportFormat::Tsv).unwrap();
        assert!(text.starts_with(
            "# baryalign eval report v1\n# stimuli\t100\nmodel_id\tmetric\tk\tvalue\n\
             a\tcorrelation\t\t4.3959999999999999e-1\n"
        ));
        assert!(text.ends_with("\tchance\t10\t1.0000000000000001e-1\n\tskipped_constant_dimensions\t\t7\n"));
        let back = parse_eval_report(&text, Path::new("r")).unwrap();
        assert_eq!(back, report);
        assert_eq!(format_eval_report(&back, ReportFormat::Tsv).unwrap(), text);
    }

    #[test]
    fn table_format_renders() {
        let text = format_eval_report(&eval(), ReportFormat::Table).unwrap();
        assert!(text.contains("top-10"));
        assert!(text.contains("chance"));
        let text = format_consistency_report(&consistency(vec![0.5]), ReportFormat::Table).unwrap();
        assert!(text.contains("img 0"));
    }

    #[test]
    fn header_only_reports_are_invalid() {
        let empty = "# baryalign consistency report v1\n# similarity\tcosine\n# models\ta\tb\nstimulus_id\tscore\n";
        assert!(matches!(
            parse_consistency_report(empty, Path::new("r")),
            Err(Error::ParseFailure { .. })
        ));
        let empty = "# baryalign eval report v1\n# stimuli\t0\nmodel_id\tmetric\tk\tvalue\n";
        assert!(matches!(parse_eval_report(empty, Path::new("r")), Err(Error::ParseFailure { .. })));
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let bad = "# baryalign consistency report v1\n# similarity\tcosine\n# models\ta\tb\nstimulus_id\tscore\ns0\tabc\n";
        assert!(matches!(
            parse_consistency_report(bad, Path::new("r")),
            Err(Error::ParseFailure { line: 5, .. })
        ));
        assert!(matches!(
            parse_consistency_report("garbage\n", Path::new("r")),
            Err(Error::ParseFailure { line: 1, .. })
        ));
        let mut text = format_eval_report(&eval(), ReportFormat::Tsv).unwrap();
        text = text.replace("b\ttop_k\t5", "b\ttop_k\t6");
        assert!(matches!(parse_eval_report(&text, Path::new("r")), Err(Error::ParseFailure { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.tsv");
        let report = consistency(vec![0.1, 0.2, 0.3]);
        save_consistency_report(&p, &report, ReportFormat::Tsv).unwrap();
        assert_eq!(load_consistency_report(&p).unwrap(), report);
        let p = dir.path().join("eval.tsv");
        save_eval_report(&p, &eval(), ReportFormat::Tsv).unwrap();
        assert_eq!(load_eval_report(&p).unwrap(), eval());
    }

    proptest! {
        #[test]
        fn scores_round_trip_exactly(scores in proptest::collection::vec(-1.0f64..=1.0, 1..40)) {
            let report = consistency(scores);
            let text = format_consistency_report(&report, ReportFormat::Tsv).unwrap();
            let back = parse_consistency_report(&text, Path::new("r")).unwrap();
            for (a, b) in report.scores.iter().zip(&back.scores) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back, report);
        }
    }
}
