use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::{init_threads, run, RunConfig, Verb};

/// Curvature equations on discretized hyperbolic surfaces.
#[derive(Debug, Parser)]
#[command(name = "curvlab", version)]
pub struct Cli {
    #[arg(value_enum)]
    verb: Verb,
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "curvlab-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Run the fixed point even when its hypothesis fails (stamped in the report).
    #[arg(long)]
    override_hypothesis: bool,
}

/// Parses `args` (program name first), runs the verb and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let result = init_threads().and_then(|()| {
        let mut cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        cfg.override_hypothesis |= cli.override_hypothesis;
        run(cli.verb, &cfg, &cli.out)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
