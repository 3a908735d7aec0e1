//! Reproducible command pipelines on top of `curvlab`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use curvlab::Result;

pub use config::RunConfig;
pub use output::Artifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Surface,
    Gauss,
    Ray,
    Poisson,
    Fixedpoint,
    Sections,
    Criterion,
    H4,
    ReproduceTheoremA,
}

pub fn build(verb: Verb, cfg: &RunConfig) -> Result<Artifacts> {
    cfg.validate()?;
    match verb {
        Verb::Surface => commands::cmd_surface(cfg),
        Verb::Gauss => commands::cmd_gauss(cfg),
        Verb::Ray => commands::cmd_ray(cfg),
        Verb::Poisson => commands::cmd_poisson(cfg),
        Verb::Fixedpoint => commands::cmd_fixedpoint(cfg),
        Verb::Sections => commands::cmd_sections(cfg),
        Verb::Criterion => commands::cmd_criterion(cfg),
        Verb::H4 => commands::cmd_h4(cfg),
        Verb::ReproduceTheoremA => commands::cmd_reproduce_theorem_a(cfg),
    }
}

/// Runs a verb and writes its artifacts, `config.json` and `MANIFEST` into `out`.
pub fn run(verb: Verb, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let artifacts = build(verb, cfg)?;
    artifacts.write(out, &cfg.to_json()?)
}

/// Caps the global thread pool from `CURVLAB_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CURVLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| curvlab::Error::Precondition(format!("CURVLAB_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| curvlab::Error::Precondition(format!("thread pool: {e}")))?;
    }
    Ok(())
}
