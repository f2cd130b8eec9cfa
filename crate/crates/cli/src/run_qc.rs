use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use segqc_core::cohort::csv::QcCsvWriter;
use segqc_core::io::{read_label_volume, read_sidecar, Sidecar};
use segqc_core::{evaluate_series, Connectivity, HeuristicConfig, SegmentQCRecord};

use crate::{EXIT_IO, EXIT_PARSE};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of `<id>.json` sidecars with matching `<id>.nrrd` masks.
    #[arg(long)]
    pub input: PathBuf,
    /// QC CSV path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub min_volume_ml: f64,
    #[arg(long, default_value_t = 1)]
    pub max_components: usize,
    #[arg(long, default_value_t = Connectivity::TwentySix)]
    pub connectivity: Connectivity,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write a JSON run manifest here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunManifest<'a> {
    input_dir: &'a Path,
    output_path: Option<&'a Path>,
    config: &'a HeuristicConfig,
    worker_count: usize,
    started_unix: f64,
    finished_unix: f64,
    series_processed: usize,
    series_failed: usize,
    records: usize,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

struct Job {
    sidecar: Sidecar,
    sidecar_path: PathBuf,
    mask_path: PathBuf,
}

pub fn run(args: Args) -> u8 {
    match execute(&args) {
        Ok(failed) if failed > 0 => EXIT_PARSE,
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<segqc_core::Error>() {
                Some(segqc_core::Error::Config(_)) => EXIT_PARSE,
                _ => EXIT_IO,
            }
        }
    }
}

/// Returns the number of series that failed to parse.
fn execute(args: &Args) -> anyhow::Result<usize> {
    let started = now();
    let config = HeuristicConfig {
        min_volume_ml: args.min_volume_ml,
        max_components: args.max_components,
        connectivity: args.connectivity,
        ..HeuristicConfig::default()
    };
    config.validate()?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        bail!(segqc_core::Error::Config("--workers must be >= 1".into()));
    }

    let mut sidecars: Vec<PathBuf> = fs::read_dir(&args.input)
        .with_context(|| format!("reading input directory {}", args.input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
        .collect();
    sidecars.sort();

    let mut failed = 0usize;
    let mut jobs = Vec::with_capacity(sidecars.len());
    let mut seen = HashSet::new();
    for path in sidecars {
        match read_sidecar(&path) {
            Ok(sidecar) => {
                if !seen.insert(sidecar.series_id.clone()) {
                    eprintln!("error: {}: duplicate seriesId {}", path.display(), sidecar.series_id);
                    failed += 1;
                    continue;
                }
                jobs.push(Job {
                    mask_path: path.with_extension("nrrd"),
                    sidecar_path: path,
                    sidecar,
                });
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failed += 1;
            }
        }
    }
    jobs.sort_by(|a, b| a.sidecar.series_id.cmp(&b.sidecar.series_id));
    if jobs.is_empty() && failed == 0 {
        log::warn!("no sidecars found in {}", args.input.display());
        eprintln!("warning: no mask/sidecar pairs in {}", args.input.display());
    }

    let sink: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let mut writer = QcCsvWriter::new(sink)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;

    let mut processed = 0usize;
    let mut records = 0usize;
    for chunk in jobs.chunks(workers * 8) {
        let results: Vec<segqc_core::Result<Vec<SegmentQCRecord>>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|job| {
                    let v = read_label_volume(&job.mask_path, &job.sidecar_path)?;
                    Ok(evaluate_series(&v, &config))
                })
                .collect()
        });
        for (job, result) in chunk.iter().zip(results) {
            match result {
                Ok(rows) => {
                    for r in &rows {
                        writer.write(r)?;
                    }
                    processed += 1;
                    records += rows.len();
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", job.mask_path.display());
                    failed += 1;
                }
            }
        }
    }
    writer.flush()?;
    log::info!("{processed} series, {records} records, {failed} failures");

    if let Some(path) = &args.manifest {
        let manifest = RunManifest {
            input_dir: &args.input,
            output_path: args.output.as_deref(),
            config: &config,
            worker_count: workers,
            started_unix: started,
            finished_unix: now(),
            series_processed: processed,
            series_failed: failed,
            records,
        };
        fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(failed)
}
