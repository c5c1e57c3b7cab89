use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};
use vsig::config::{ExperimentConfig, ExperimentKind, KernelConfig};
use vsig::error::{AppError, Result};
use vsig::experiments::synthetic::{synthetic_rv, SyntheticRvParams};
use vsig::experiments::{sde, volforecast};
use vsig::io;
use vsig::report::{emit_report, Report};
use vsig_core::kernel::KernelSpec;
use vsig_core::sigkernel::{gram_matrix, gram_matrix_pde, GramEngine};
use vsig_core::statespace::{lift_solve, StepRule};
use vsig_core::vsig::{diagonal_signature, signature_at, QuadratureConfig};

#[derive(Parser)]
#[command(name = "vsig", version, about = "Volterra signature toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigEngine {
    Vsig,
    Statespace,
}

#[derive(Clone, Copy, ValueEnum)]
enum GramEngineArg {
    Integral,
    Pde,
    Truncated,
}

#[derive(Subcommand)]
enum Commands {
    /// Run the synthetic linear-Volterra-SDE study.
    Sde {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the realized-volatility forecasting study.
    Volforecast {
        #[arg(long)]
        config: PathBuf,
        /// Realized-volatility CSV; falls back to the config's data file,
        /// then to the built-in synthetic generator.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Compute a Volterra signature of a CSV path.
    Sig {
        /// CSV with a "t" column plus one column per channel.
        #[arg(long)]
        path: PathBuf,
        /// Kernel JSON: a file path or an inline JSON object.
        #[arg(long)]
        kernel: String,
        #[arg(long, default_value_t = 3)]
        level: usize,
        /// Evaluate VSig^tau_{s,t} at grid-aligned "s,t,tau" instead of the
        /// terminal diagonal value.
        #[arg(long)]
        at: Option<String>,
        #[arg(long, value_enum, default_value_t = SigEngine::Vsig)]
        engine: SigEngine,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the pairwise signature-kernel Gram matrix of a path corpus.
    Gram {
        /// Directory of path CSVs (read in sorted filename order).
        #[arg(long)]
        paths: PathBuf,
        #[arg(long)]
        kernel: String,
        #[arg(long, value_enum)]
        engine: GramEngineArg,
        #[arg(long, default_value_t = 6)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
        /// Lift the node cap on the O(N^4) integral engine.
        #[arg(long, default_value_t = false)]
        allow_large: bool,
    },
}

fn load_kernel(arg: &str) -> Result<KernelSpec> {
    let text = if Path::new(arg).exists() {
        std::fs::read_to_string(arg)
            .map_err(|e| AppError::Config(format!("cannot read kernel file {arg}: {e}")))?
    } else {
        arg.to_string()
    };
    let cfg: KernelConfig =
        serde_json::from_str(&text).map_err(|e| AppError::Config(format!("kernel JSON: {e}")))?;
    cfg.to_spec()
}

fn init_threads() {
    if let Ok(v) = std::env::var("VSIG_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn run_sde(config: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config)?;
    if cfg.experiment != ExperimentKind::Sde {
        return Err(AppError::Config("config experiment must be \"sde\"".into()));
    }
    let outcome = sde::run_sde_experiment(&cfg)?;
    let report = Report::new(cfg.echo_json(), outcome.results.clone());
    let files = emit_report(
        &cfg.output_dir,
        &report,
        &outcome.table,
        &outcome.predictions,
    )?;
    if let (Some(mode), Some(samples)) = (&cfg.sde.dataset_dump, &outcome.dataset) {
        io::write_vsde_dataset(&cfg.output_dir, &outcome.times, samples, mode)?;
    }
    println!("report: {}", files.report.display());
    Ok(())
}

fn run_volforecast(config: &Path, data: Option<&Path>) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config)?;
    if cfg.experiment != ExperimentKind::Volforecast {
        return Err(AppError::Config(
            "config experiment must be \"volforecast\"".into(),
        ));
    }
    let data_file = data
        .map(Path::to_path_buf)
        .or_else(|| cfg.grid.data_file.clone());
    let (series, warnings, source) = match data_file {
        Some(f) => {
            let (series, warnings) = io::ingest_rv_csv(&f, &cfg.data)?;
            (series, warnings, f.display().to_string())
        }
        None => {
            let params = SyntheticRvParams::default();
            (
                synthetic_rv(cfg.seed, cfg.time_unit_scale, &params),
                Vec::new(),
                "synthetic".into(),
            )
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let outcome = volforecast::run_vol_forecast(&cfg, &series)?;
    let mut results = outcome.results.clone();
    results["data_source"] = json!(source);
    results["warnings"] = json!(warnings);
    let report = Report::new(cfg.echo_json(), results);
    let files = emit_report(
        &cfg.output_dir,
        &report,
        &outcome.table,
        &outcome.predictions,
    )?;
    println!("report: {}", files.report.display());
    Ok(())
}

fn run_sig(
    path: &Path,
    kernel_arg: &str,
    level: usize,
    at: Option<&str>,
    engine: SigEngine,
    out: Option<&Path>,
) -> Result<()> {
    let p = io::read_path_csv(path)?;
    let kernel = load_kernel(kernel_arg)?;
    let series =
        match (engine, at) {
            (SigEngine::Vsig, None) => {
                let quad = QuadratureConfig::for_kernel(&kernel);
                diagonal_signature(&p, &kernel, level, &quad)
                    .map_err(AppError::Compute)?
                    .terminal()
                    .clone()
            }
            (SigEngine::Vsig, Some(spec)) => {
                let parts: Vec<f64> = spec
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| AppError::Config(format!("cannot parse --at \"{spec}\"")))?;
                if parts.len() != 3 {
                    return Err(AppError::Config("--at needs \"s,t,tau\"".into()));
                }
                let quad = QuadratureConfig::for_kernel(&kernel);
                signature_at(&p, &kernel, level, parts[0], parts[1], parts[2], &quad)
                    .map_err(AppError::Compute)?
            }
            (SigEngine::Statespace, None) => {
                lift_solve(&p, &kernel, level, StepRule::ExponentialMidpoint)
                    .map_err(AppError::Compute)?
                    .terminal()
            }
            (SigEngine::Statespace, Some(_)) => return Err(AppError::Config(
                "--engine statespace computes diagonal values only; use --engine vsig with --at"
                    .into(),
            )),
        };
    let mut payload =
        serde_json::to_string_pretty(&io::tensor_to_json(&series)).expect("tensor serializes");
    payload.push('\n');
    match out {
        Some(f) => std::fs::write(f, payload)?,
        None => print!("{payload}"),
    }
    Ok(())
}

fn run_gram(
    dir: &Path,
    kernel_arg: &str,
    engine: GramEngineArg,
    level: usize,
    out: &Path,
    allow_large: bool,
) -> Result<()> {
    let kernel = load_kernel(kernel_arg)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(AppError::Data(format!("no CSV paths in {}", dir.display())));
    }
    let paths: Vec<_> = files
        .iter()
        .map(|f| io::read_path_csv(f))
        .collect::<Result<_>>()?;
    if matches!(engine, GramEngineArg::Integral) && !allow_large {
        if let Some(p) = paths.iter().find(|p| p.node_count() > 400) {
            return Err(AppError::Config(format!(
                "integral engine is O(N^4); a path has {} nodes (> 400). Pass --allow-large to proceed",
                p.node_count()
            )));
        }
    }
    let gram = match engine {
        GramEngineArg::Truncated => {
            gram_matrix(&paths, &kernel, GramEngine::Truncated(level)).map_err(AppError::Compute)?
        }
        GramEngineArg::Integral => {
            gram_matrix(&paths, &kernel, GramEngine::Integral).map_err(AppError::Compute)?
        }
        GramEngineArg::Pde => gram_matrix_pde(&paths, &kernel).map_err(AppError::Compute)?,
    };
    io::write_gram_csv(out, &gram)?;
    println!("gram: {}", out.display());
    Ok(())
}

fn real_main() -> Result<()> {
    init_threads();
    let cli = Cli::parse();
    match cli.command {
        Commands::Sde { config } => run_sde(&config),
        Commands::Volforecast { config, data } => run_volforecast(&config, data.as_deref()),
        Commands::Sig {
            path,
            kernel,
            level,
            at,
            engine,
            out,
        } => run_sig(&path, &kernel, level, at.as_deref(), engine, out.as_deref()),
        Commands::Gram {
            paths,
            kernel,
            engine,
            level,
            out,
            allow_large,
        } => run_gram(&paths, &kernel, engine, level, &out, allow_large),
    }
}

fn main() {
    match real_main() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
