use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use segqc_service::HeaderValue;

use crate::{EXIT_IO, EXIT_PARSE};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// QC CSV to serve.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Allowed CORS origin; any origin when omitted.
    #[arg(long)]
    pub cors_origin: Option<String>,
}

pub fn run(args: Args) -> u8 {
    let table = match segqc_service::load_table(&args.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.input.display());
            return match e {
                segqc_core::Error::Io { .. } => EXIT_IO,
                _ => EXIT_PARSE,
            };
        }
    };
    let origin = match args.cors_origin.as_deref().map(HeaderValue::from_str).transpose() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: --cors-origin: {e}");
            return EXIT_PARSE;
        }
    };
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return EXIT_IO;
        }
    };
    let result = rt.block_on(async move {
        let (listener, addr) = segqc_service::bind(SocketAddr::new(args.host, args.port)).await?;
        println!("listening on http://{addr}");
        use std::io::Write;
        std::io::stdout().flush()?;
        segqc_service::serve(listener, segqc_service::router(table, origin)).await
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
    }
}
