mod config;
mod output;
mod report;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use config::Task;
use output::{sha256_hex, OutDir};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("ConfigInvalid: {0}")]
    ConfigInvalid(String),
    #[error("MissingArtifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),
    #[error("{name}: {source}", name = .source.name())]
    Core {
        #[from]
        source: gapfill::Error,
    },
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "gapfill", version, about = "Spectral gaps, Chern invariants and edge checks for lattice magnetic Laplacians")]
struct Args {
    task: Task,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn conventions(c: &config::ExperimentConfig) -> Value {
    let o = tasks::solver_options(c);
    json!({
        "orientation": gapfill::bloch::ORIENTATION,
        "spectral_flow_sign": gapfill::edge::FLOW_SIGN_CONVENTION,
        "plaquette_flux": "counterclockwise link product = exp(-2*pi*i*Phi), Phi = 2k/q^2",
        "twist": "links wrapping a period are multiplied by exp(+2*pi*i*s)",
        "band_group_threshold": gapfill::bloch::GROUP_THRESHOLD,
        "edge_mass_threshold": gapfill::edge::EDGE_MASS,
        "band_overlap_threshold": gapfill::edge::MIN_OVERLAP,
        "fill_epsilon0": "0.05 * bulk gap width",
        "fill_pass": "distance to strip spectrum <= delta",
        "residual_factor": o.residual_factor,
        "dense_cap": o.dense_cap,
        "seed": c.seed,
    })
}

fn run(args: Args) -> Result<bool, CliError> {
    let loaded = config::load(&args.config)?;
    let mut cfg = loaded.config;
    if let Some(t) = cfg.task {
        if t != args.task {
            return Err(CliError::ConfigInvalid(format!("task: config names {} but {} was requested", t.name(), args.task.name())));
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.threads {
        // a second initialization in the same process is harmless to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let root = match args.out {
        Some(p) => p,
        None => {
            let base = loaded.path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
            if cfg.output.is_absolute() {
                cfg.output.clone()
            } else {
                base.join(&cfg.output)
            }
        }
    };
    let mut out = OutDir::create(&root)?;
    let outcome = match args.task {
        Task::BulkSpectrum => tasks::bulk_spectrum(&cfg, &mut out)?,
        Task::Gaps => tasks::gaps(&cfg, &mut out)?,
        Task::Chern => tasks::chern(&cfg, &mut out)?,
        Task::EdgeFill => tasks::edge_fill(&cfg, &mut out)?,
        Task::Bands => tasks::bands(&cfg, &mut out)?,
        Task::Affiliation => tasks::affiliation(&cfg, &mut out)?,
        Task::Wideness => tasks::wideness(&cfg, &mut out)?,
        Task::Report => report::report(&mut out)?,
    };
    let manifest_path = out.root.join("manifest.json");
    let mut manifest: Value = std::fs::read_to_string(&manifest_path).ok().and_then(|s| serde_json::from_str(&s).ok()).unwrap_or(json!({}));
    manifest["tool"] = json!("gapfill");
    manifest["version"] = json!(env!("CARGO_PKG_VERSION"));
    manifest["conventions"] = conventions(&cfg);
    manifest["tasks"][args.task.name()] = json!({
        "config_sha256": sha256_hex(&loaded.text),
        "seed": cfg.seed,
        "pass": outcome.pass,
        "summary": outcome.summary,
        "files": out.written,
    });
    out.json("manifest.json", &manifest)?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verdict: FAIL");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
