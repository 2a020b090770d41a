//! Command-line driver for the extensive-chaos laboratory.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure,
//! 4 inconclusive experiment.

mod manifest;
mod plots;
mod stages;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use entv_core::config::{ExperimentMode, NormChoice, RunConfig};
use entv_core::snapshot::read_record;
use entv_core::{Error, Result};

use manifest::{sha256_str, DirLock, Manifest};
use stages::{StageResult, StageStatus};

#[derive(Parser)]
#[command(
    name = "entv",
    version,
    about = "Scale calculus, CGL simulation, kernel/sampling verification and \
             correlation-entropy estimation on periodic 1-D domains"
)]
struct Cli {
    /// Run configuration file (key = value lines with dotted sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: output.dir from the config, else ./out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override simulation.seed (twin seed becomes seed + 1).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive and print the physical scales; write scales.json.
    Scales,
    /// Evolve the base trajectory and write snapshot files.
    Simulate {
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        snapshot_every: Option<f64>,
    },
    /// Evolve a perturbed twin and record the separation history.
    Twin,
    /// Sweep the kernel envelope bounds and write the ratio table.
    VerifyKernels,
    /// Run a twin experiment (dissipative, forward or sampling mode).
    VerifySampling {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        k_star_prefactor: Option<f64>,
        #[arg(long)]
        ell: Option<f64>,
        #[arg(long)]
        l_inner: Option<f64>,
        /// dissipative | forward | sampling
        #[arg(long)]
        mode: Option<String>,
    },
    /// Correlation sums and the entropy estimate from a trajectory record.
    Entropy {
        /// Record file; defaults to building one from the simulate outputs.
        #[arg(long)]
        record: Option<PathBuf>,
        /// grid | lattice
        #[arg(long)]
        norm: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Number of radius decades below entropy.eps_max.
        #[arg(long)]
        eps_decades: Option<usize>,
        /// Window-length fit range, as `lo:hi`.
        #[arg(long)]
        fit_range: Option<String>,
        /// CSV output path (default correlation.csv in the output directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run stages in dependency order, skipping up-to-date ones.
    Pipeline {
        /// Comma-separated subset of simulate,twin,verify-kernels,
        /// verify-sampling,entropy (default: all).
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
    /// Emit plot-data files from completed stages.
    ExportPlots,
}

fn main() {
    let code = match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) => 2,
                Error::Numerical(_) | Error::Io(_) => 3,
            }
        }
    };
    std::process::exit(code);
}

fn load_run(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::validation("--config <path> is required for this command")
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut run = RunConfig::parse_str(&text)?;
    if let Some(seed) = cli.seed {
        run.seed = seed;
        run.twin_seed = seed.wrapping_add(1);
    }
    Ok(run)
}

fn resolve_out_dir(cli: &Cli, run: Option<&RunConfig>) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| run.and_then(|r| r.output_dir.clone().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn config_hash(run: &RunConfig) -> String {
    sha256_str(&run.to_config().to_canonical_string())
}

/// Run one stage, refresh the manifest, and map the status to an exit code.
fn single_stage(
    name: &str,
    run: &RunConfig,
    out_dir: &Path,
    stage: impl FnOnce(&RunConfig, &Path) -> Result<StageResult>,
) -> Result<i32> {
    let _lock = DirLock::acquire(out_dir)?;
    let hash = config_hash(run);
    let mut manifest = Manifest::load(out_dir)?
        .unwrap_or_else(|| Manifest::new(hash.clone(), rayon::current_num_threads()));
    manifest.config_hash = hash;
    manifest.threads = rayon::current_num_threads();
    let start = std::time::Instant::now();
    let result = stage(run, out_dir)?;
    manifest.record_stage(
        out_dir,
        name,
        &result.outputs,
        start.elapsed().as_millis() as u64,
        true,
    )?;
    manifest.store(out_dir)?;
    match result.status {
        StageStatus::Conclusive => Ok(0),
        StageStatus::Inconclusive(reason) => {
            eprintln!("inconclusive: {reason}");
            Ok(4)
        }
    }
}

fn dispatch() -> Result<i32> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Scales => {
            let run = load_run(&cli)?;
            let scales = run.scales()?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            std::fs::create_dir_all(&out_dir)?;
            println!("nu_star          {}", scales.nu_star);
            println!("d_star           {}", scales.d_star);
            println!("m_star           {}", scales.m_star);
            println!("tau_star         {}", scales.tau_star);
            println!("delta_star       {}", scales.delta_star);
            println!("k_star           {}", scales.k_star);
            println!("condition_ratio  {}", scales.condition_ratio);
            let text = serde_json::to_string_pretty(&scales)
                .map_err(|e| Error::numerical(format!("serialization: {e}")))?;
            std::fs::write(out_dir.join("scales.json"), text)?;
            Ok(0)
        }
        Command::Simulate { t_final, dt, snapshot_every } => {
            let mut run = load_run(&cli)?;
            if let Some(v) = t_final {
                run.t_final = *v;
            }
            if let Some(v) = dt {
                run.dt = *v;
            }
            if let Some(v) = snapshot_every {
                run.snapshot_every = *v;
            }
            run.validate()?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            single_stage("simulate", &run, &out_dir, stages::stage_simulate)
        }
        Command::Twin => {
            let run = load_run(&cli)?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            single_stage("twin", &run, &out_dir, stages::stage_twin)
        }
        Command::VerifyKernels => {
            let run = load_run(&cli)?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            single_stage("verify-kernels", &run, &out_dir, stages::stage_verify_kernels)
        }
        Command::VerifySampling { epsilon, k_star_prefactor, ell, l_inner, mode } => {
            let mut run = load_run(&cli)?;
            if let Some(v) = epsilon {
                run.experiment_epsilon = *v;
            }
            if let Some(v) = k_star_prefactor {
                run.k_star_prefactor = *v;
                run.experiment_prefactors = vec![*v];
            }
            if let Some(v) = ell {
                run.experiment_ell = *v;
            }
            if let Some(v) = l_inner {
                run.experiment_l_inner = *v;
            }
            if let Some(m) = mode {
                run.experiment_mode = ExperimentMode::parse(m)?;
            }
            run.validate()?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            single_stage("verify-sampling", &run, &out_dir, stages::stage_verify_sampling)
        }
        Command::Entropy { record, norm, n_max, eps_decades, fit_range, out } => {
            let mut run = load_run(&cli)?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            if let Some(n) = norm {
                run.entropy_norm = NormChoice::parse(n)?;
            }
            if let Some(v) = n_max {
                run.entropy_n_max = *v;
            }
            if let Some(d) = eps_decades {
                run.entropy_eps_min = run.entropy_eps_max * 10f64.powi(-(*d as i32));
            }
            if let Some(range) = fit_range {
                let (lo, hi) = range.split_once(':').ok_or_else(|| {
                    Error::validation("--fit-range expects `lo:hi`".to_string())
                })?;
                run.entropy_fit_lo = lo.trim().parse().map_err(|_| {
                    Error::validation(format!("bad fit range bound `{lo}`"))
                })?;
                run.entropy_fit_hi = hi.trim().parse().map_err(|_| {
                    Error::validation(format!("bad fit range bound `{hi}`"))
                })?;
            }
            run.validate()?;
            let record_data = match record {
                Some(path) => read_record(path)?,
                None => stages::build_record(&run, &out_dir)?,
            };
            let mut params = stages::EntropyParams::from_run(&run);
            if let Some(path) = out {
                params.csv_out = path.clone();
            }
            let _lock = DirLock::acquire(&out_dir)?;
            let hash = config_hash(&run);
            let mut man = Manifest::load(&out_dir)?
                .unwrap_or_else(|| Manifest::new(hash.clone(), rayon::current_num_threads()));
            man.config_hash = hash;
            let start = std::time::Instant::now();
            let result = stages::run_entropy_on_record(&record_data, &run, &params, &out_dir)?;
            // Only outputs inside the output directory enter the manifest.
            let tracked: Vec<PathBuf> = result
                .outputs
                .iter()
                .filter(|p| p.is_relative())
                .cloned()
                .collect();
            man.record_stage(
                &out_dir,
                "entropy",
                &tracked,
                start.elapsed().as_millis() as u64,
                true,
            )?;
            man.store(&out_dir)?;
            match result.status {
                StageStatus::Conclusive => Ok(0),
                StageStatus::Inconclusive(reason) => {
                    eprintln!("inconclusive: {reason}");
                    Ok(4)
                }
            }
        }
        Command::Pipeline { stages: requested } => {
            let run = load_run(&cli)?;
            let out_dir = resolve_out_dir(&cli, Some(&run));
            run_pipeline(&run, &out_dir, requested.as_deref())
        }
        Command::ExportPlots => {
            let run = load_run(&cli).ok();
            let out_dir = resolve_out_dir(&cli, run.as_ref());
            let export = plots::export_plots(&out_dir)?;
            for w in &export.written {
                println!("wrote {w}");
            }
            for (name, reason) in &export.skipped {
                println!("skipped {name}: {reason}");
            }
            Ok(0)
        }
    }
}

const PIPELINE_ORDER: &[&str] =
    &["simulate", "twin", "verify-kernels", "verify-sampling", "entropy"];

fn stage_fn(name: &str) -> fn(&RunConfig, &Path) -> Result<StageResult> {
    match name {
        "simulate" => stages::stage_simulate,
        "twin" => stages::stage_twin,
        "verify-kernels" => stages::stage_verify_kernels,
        "verify-sampling" => stages::stage_verify_sampling,
        "entropy" => stages::stage_entropy,
        _ => unreachable!("stage names validated before dispatch"),
    }
}

fn run_pipeline(run: &RunConfig, out_dir: &Path, requested: Option<&[String]>) -> Result<i32> {
    let requested: Vec<&str> = match requested {
        None => PIPELINE_ORDER.to_vec(),
        Some(names) => {
            for n in names {
                if !PIPELINE_ORDER.contains(&n.as_str()) {
                    return Err(Error::validation(format!(
                        "unknown stage `{n}`; stages are {}",
                        PIPELINE_ORDER.join(", ")
                    )));
                }
            }
            PIPELINE_ORDER
                .iter()
                .copied()
                .filter(|s| names.iter().any(|n| n == s))
                .collect()
        }
    };
    let _lock = DirLock::acquire(out_dir)?;
    let hash = config_hash(run);
    let mut manifest = Manifest::load(out_dir)?
        .unwrap_or_else(|| Manifest::new(hash.clone(), rayon::current_num_threads()));
    if manifest.config_hash != hash {
        // New configuration invalidates previous stage records.
        manifest = Manifest::new(hash.clone(), rayon::current_num_threads());
    }
    manifest.threads = rayon::current_num_threads();
    let mut any_inconclusive = false;
    for name in requested {
        let needs_simulation = matches!(name, "twin" | "verify-sampling" | "entropy");
        if needs_simulation && !manifest.stage_is_current(out_dir, "simulate", &hash) {
            return Err(Error::validation(format!(
                "stage `{name}` needs the simulate outputs; include `simulate` \
                 in --stages or run it first"
            )));
        }
        if manifest.stage_is_current(out_dir, name, &hash) {
            println!("stage {name}: up to date, skipped");
            continue;
        }
        println!("stage {name}: running");
        let start = std::time::Instant::now();
        match stage_fn(name)(run, out_dir) {
            Ok(result) => {
                manifest.record_stage(
                    out_dir,
                    name,
                    &result.outputs,
                    start.elapsed().as_millis() as u64,
                    true,
                )?;
                manifest.store(out_dir)?;
                if let StageStatus::Inconclusive(reason) = result.status {
                    eprintln!("stage {name}: inconclusive: {reason}");
                    any_inconclusive = true;
                }
            }
            Err(e) => {
                // Record the partial run before propagating.
                manifest.record_stage(
                    out_dir,
                    name,
                    &[],
                    start.elapsed().as_millis() as u64,
                    false,
                )?;
                manifest.store(out_dir)?;
                return Err(e);
            }
        }
    }
    Ok(if any_inconclusive { 4 } else { 0 })
}
