use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use segqc_core::cohort::{
    compare_reference, default_chain, lr_diff_stats, parse_heuristic_filters, read_reference_csv, report,
    stage_tests, summary_by_structure, upset_counts_with, within_patient_sd, CohortTable, FilterSpec,
    FilterStage,
};
use segqc_core::{Heuristic, Laterality};

use crate::plot::{bar_chart, strip_chart};
use crate::{write_output, Study, EXIT_IO, EXIT_PARSE};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// QC CSV produced by `run-qc`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub study: Study,
    /// Result CSV path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Heuristic filters, e.g. `completeness=pass,connected=fail`.
    #[arg(long, default_value = "")]
    pub filters: String,
    /// Required by lr-diff and within-sd.
    #[arg(long)]
    pub structure: Option<String>,
    /// Restricts within-sd to one side (L, R or none).
    #[arg(long)]
    pub laterality: Option<Laterality>,
    /// Reference ranges CSV (structure,meanMl,sdMl,source) for ref-compare.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// lr-diff filter order as a comma list of heuristics.
    #[arg(long, default_value = "completeness,connected,minVolume,laterality")]
    pub chain: String,
    /// Also render an SVG chart here.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

pub fn run(args: Args) -> u8 {
    match execute(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<segqc_core::Error>() {
            return match core {
                segqc_core::Error::Io { .. } => EXIT_IO,
                _ => EXIT_PARSE,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_PARSE
}

fn parse_chain(s: &str) -> anyhow::Result<Vec<FilterStage>> {
    let mut chain = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let h: Heuristic = item.parse()?;
        if chain.iter().any(|st: &FilterStage| st.filter.require_pass.contains(&h)) {
            bail!(segqc_core::Error::Config(format!("heuristic {h} repeated in --chain")));
        }
        chain.push(FilterStage::heuristic(h));
    }
    if chain.is_empty() {
        return Ok(default_chain());
    }
    Ok(chain)
}

fn need_structure(args: &Args) -> anyhow::Result<&str> {
    match &args.structure {
        Some(s) => Ok(s),
        None => bail!(segqc_core::Error::Config(format!("--structure is required for {:?}", args.study))),
    }
}

fn tests_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.tests.csv"))
}

fn execute(args: &Args) -> anyhow::Result<()> {
    let table = CohortTable::from_csv_path(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let filters: FilterSpec = parse_heuristic_filters(&args.filters)?;

    let (text, svg) = match args.study {
        Study::Summary => {
            let rows = summary_by_structure(&table.apply_filters(&filters));
            let bars = rows
                .iter()
                .map(|r| (format!("{} {}", r.structure, r.heuristic), r.pct.unwrap_or(0.0)))
                .collect::<Vec<_>>();
            (report::summary_csv(&rows), bar_chart("Pass rate (%)", &bars))
        }
        Study::Upset => {
            let counts = upset_counts_with(&table.apply_filters(&filters), filters.na_laterality_as_pass);
            let bars = counts.counts.iter().map(|(k, &v)| (k.clone(), v as f64)).collect::<Vec<_>>();
            (report::upset_csv(&counts), bar_chart("Heuristic outcome combinations", &bars))
        }
        Study::WithinSd => {
            let structure = need_structure(args)?;
            let sds = within_patient_sd(&table, structure, args.laterality, &filters);
            let before = within_patient_sd(&table, structure, args.laterality, &filters.identity_only());
            let groups = vec![
                ("unfiltered".to_string(), before.iter().map(|p| p.sd).collect()),
                ("filtered".to_string(), sds.iter().map(|p| p.sd).collect()),
            ];
            (
                report::within_sd_csv(&sds),
                strip_chart(&format!("{structure}: within-patient SD (mL)"), &groups),
            )
        }
        Study::LrDiff => {
            let structure = need_structure(args)?;
            if filters.has_heuristic_constraints() {
                bail!(segqc_core::Error::Config("lr-diff takes --chain, not --filters".into()));
            }
            let chain = parse_chain(&args.chain)?;
            let stages = lr_diff_stats(&table, structure, &chain)?;
            let tests = stage_tests(&stages, None);
            let tests_csv = report::stage_tests_csv(&tests);
            let mut text = report::lr_diff_csv(&stages);
            match &args.output {
                Some(out) => {
                    let p = tests_path(out);
                    std::fs::write(&p, &tests_csv).with_context(|| format!("writing {}", p.display()))?;
                }
                None => {
                    text.push('\n');
                    text.push_str(&tests_csv);
                }
            }
            let groups = stages
                .iter()
                .map(|s| (s.stage.clone(), s.pairs.iter().map(|p| p.diff.abs()).collect()))
                .collect::<Vec<_>>();
            (text, strip_chart(&format!("{structure}: |normalized L/R difference|"), &groups))
        }
        Study::RefCompare => {
            let Some(path) = &args.reference else {
                bail!(segqc_core::Error::Config("--reference is required for ref-compare".into()));
            };
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let refs = read_reference_csv(std::io::BufReader::new(file))?;
            let cmp = compare_reference(&table, &refs, &filters)?;
            let bars = cmp
                .rows
                .iter()
                .flat_map(|r| {
                    [
                        (format!("{} cohort", r.structure), r.cohort_mean),
                        (format!("{} ref", r.structure), r.ref_mean),
                    ]
                })
                .collect::<Vec<_>>();
            (report::reference_csv(&cmp), bar_chart("Mean volume (mL)", &bars))
        }
    };

    write_output(args.output.as_ref(), &text).context("writing output")?;
    if let Some(p) = &args.plot {
        std::fs::write(p, svg).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
