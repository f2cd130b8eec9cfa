use std::path::PathBuf;

use anyhow::Context;

use segqc_core::phantom::PhantomSpec;

use crate::{EXIT_IO, EXIT_PARSE};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory; created if missing.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON phantom spec. Flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patients: Option<u32>,
    #[arg(long)]
    pub studies: Option<u32>,
    #[arg(long)]
    pub series: Option<u32>,
    #[arg(long)]
    pub truncation_rate: Option<f64>,
    #[arg(long)]
    pub fragment_rate: Option<f64>,
    #[arg(long)]
    pub swap_rate: Option<f64>,
    #[arg(long)]
    pub shrink_rate: Option<f64>,
}

pub fn run(args: Args) -> u8 {
    let spec = match build_spec(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_PARSE;
        }
    };
    match spec.generate_cohort(&args.output) {
        Ok(log) => {
            eprintln!(
                "wrote {} series and {} defect entries to {}",
                spec.series_keys().len(),
                log.len(),
                args.output.display()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                segqc_core::Error::Io { .. } => EXIT_IO,
                _ => EXIT_PARSE,
            }
        }
    }
}

fn build_spec(args: &Args) -> anyhow::Result<PhantomSpec> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PhantomSpec::from_json(&text)?
        }
        None => PhantomSpec::default(),
    };
    if let Some(v) = args.seed {
        spec.random_seed = v;
    }
    if let Some(v) = args.patients {
        spec.patients = v;
    }
    if let Some(v) = args.studies {
        spec.studies_per_patient = v;
    }
    if let Some(v) = args.series {
        spec.series_per_study = v;
    }
    let r = &mut spec.defect_rates;
    for (slot, flag) in [
        (&mut r.truncation, args.truncation_rate),
        (&mut r.fragment, args.fragment_rate),
        (&mut r.swap, args.swap_rate),
        (&mut r.shrink, args.shrink_rate),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    spec.validate()?;
    Ok(spec)
}
