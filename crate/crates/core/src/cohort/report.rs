//! CSV renderings of the cohort analyses. The CLI writes these strings
//! verbatim.

use super::csv::{fmt_sig6, lf_writer};
use super::{PatientSd, ReferenceComparison, StageStats, StageTest, SummaryRow, UpsetCounts};

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

fn render<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> String {
    let mut w = lf_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    render(
        ["structure", "heuristic", "pass", "total", "pct"],
        rows.iter().map(|r| {
            [
                r.structure.clone(),
                r.heuristic.to_string(),
                r.pass.to_string(),
                r.total.to_string(),
                opt(r.pct),
            ]
        }),
    )
}

/// 16 rows, in key order.
pub fn upset_csv(u: &UpsetCounts) -> String {
    render(
        ["combination", "count"],
        u.counts.iter().map(|(k, c)| [k.clone(), c.to_string()]),
    )
}

pub fn lr_diff_csv(stages: &[StageStats]) -> String {
    render(
        ["stage", "n", "mean", "sd"],
        stages
            .iter()
            .map(|s| [s.stage.clone(), s.n.to_string(), opt(s.mean), opt(s.sd)]),
    )
}

pub fn stage_tests_csv(tests: &[StageTest]) -> String {
    render(
        ["stagePair", "beta1", "waldZ", "pValue", "isSignificant"],
        tests.iter().map(|t| {
            [
                t.stage_pair.clone(),
                opt(t.beta1),
                opt(t.wald_z),
                opt(t.p_value),
                t.is_significant.to_string(),
            ]
        }),
    )
}

pub fn within_sd_csv(sds: &[PatientSd]) -> String {
    render(
        ["patientId", "n", "sd"],
        sds.iter().map(|p| [p.patient_id.clone(), p.n.to_string(), fmt_sig6(p.sd)]),
    )
}

/// One row per compared structure; the monotonicity flag repeats on every row.
pub fn reference_csv(c: &ReferenceComparison) -> String {
    render(
        ["structure", "n", "cohortMean", "cohortSd", "refMean", "refSd", "meanDiff", "monotonic"],
        c.rows.iter().map(|r| {
            [
                r.structure.clone(),
                r.n.to_string(),
                fmt_sig6(r.cohort_mean),
                opt(r.cohort_sd),
                fmt_sig6(r.ref_mean),
                fmt_sig6(r.ref_sd),
                fmt_sig6(r.mean_diff),
                c.monotonic.to_string(),
            ]
        }),
    )
}
