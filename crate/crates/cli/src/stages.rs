//! Pipeline stage implementations: each stage reads what earlier stages
//! wrote, produces its files under the output directory, and returns the
//! relative paths for the manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use entv_core::config::{format_f64, ExperimentMode, NormChoice, RunConfig};
use entv_core::entropy::{
    correlation_sum, k2_estimate, log_epsilon_grid, RecordMeta, TrajectoryRecord, WindowNorm,
};
use entv_core::kernels::{envelope_grid, verify_envelope, CutoffProfile, KernelVariant};
use entv_core::pde::{
    evolve, evolve_twin, fit_growth_rate, initial_field, make_twin, Field, StepperOptions,
};
use entv_core::sampling::{
    run_dissipative_experiment, run_forward_experiment, run_sampling_experiment,
    SamplingExperimentConfig,
};
use entv_core::snapshot::{read_snapshot, write_record, write_snapshot};
use entv_core::{Error, Result};

/// Whether a stage produced a decisive result.
#[derive(Debug, Clone)]
pub enum StageStatus {
    Conclusive,
    Inconclusive(String),
}

pub struct StageResult {
    pub outputs: Vec<PathBuf>,
    pub status: StageStatus,
}

impl StageResult {
    fn ok(outputs: Vec<PathBuf>) -> StageResult {
        StageResult { outputs, status: StageStatus::Conclusive }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numerical(format!("serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub n_snapshots: usize,
    pub t_first: f64,
    pub t_last: f64,
    pub max_sup_norm: f64,
    pub q_star: f64,
    /// Post-transient sup norms never exceeded the absorbing radius.
    pub absorbing_ok: bool,
    pub snapshot_files: Vec<String>,
}

pub fn stage_simulate(run: &RunConfig, out_dir: &Path) -> Result<StageResult> {
    let model = run.model_spec();
    let scales = run.scales()?;
    let opts = StepperOptions::default();
    let mut field = initial_field(&model, &scales, run.grid_points, run.domain_length, run.seed)?;
    if run.t_transient > 0.0 {
        field = evolve(&field, &model, &scales, run.t_transient, run.dt, 0.0, opts)?
            .pop()
            .expect("evolve returns at least one snapshot");
    }
    let snaps = evolve(
        &field,
        &model,
        &scales,
        run.t_final,
        run.dt,
        run.snapshot_every,
        opts,
    )?;
    let snap_dir = out_dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir)?;
    let mut outputs = Vec::new();
    let mut files = Vec::new();
    let mut max_sup = 0.0_f64;
    for (i, snap) in snaps.iter().enumerate() {
        let rel = PathBuf::from(format!("snapshots/snap_{i:06}.entv"));
        write_snapshot(&out_dir.join(&rel), snap)?;
        max_sup = max_sup.max(snap.sup_norm());
        files.push(rel.to_string_lossy().into_owned());
        outputs.push(rel);
    }
    let summary = SimulateSummary {
        n_snapshots: snaps.len(),
        t_first: snaps.first().map(|s| s.time).unwrap_or(0.0),
        t_last: snaps.last().map(|s| s.time).unwrap_or(0.0),
        max_sup_norm: max_sup,
        q_star: run.q_star,
        absorbing_ok: max_sup <= run.q_star,
        snapshot_files: files,
    };
    write_json(&out_dir.join("simulate.json"), &summary)?;
    outputs.push(PathBuf::from("simulate.json"));
    Ok(StageResult::ok(outputs))
}

pub fn load_simulation(out_dir: &Path) -> Result<(SimulateSummary, Vec<Field>)> {
    let path = out_dir.join("simulate.json");
    if !path.exists() {
        return Err(Error::validation(format!(
            "missing {}: run the simulate stage first",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path)?;
    let summary: SimulateSummary = serde_json::from_str(&text)
        .map_err(|e| Error::validation(format!("corrupt simulate.json: {e}")))?;
    let mut fields = Vec::with_capacity(summary.snapshot_files.len());
    for rel in &summary.snapshot_files {
        fields.push(read_snapshot(&out_dir.join(rel))?);
    }
    Ok((summary, fields))
}

#[derive(Debug, Serialize)]
struct TwinSummary {
    epsilon0: f64,
    support: &'static str,
    samples: usize,
    final_sup_grid: f64,
    final_sup_lattice: f64,
    /// Fitted exponential growth rate of the separation, per unit time.
    gamma_fit: Option<f64>,
    m_star: f64,
    /// Fitted rate over the expansion bound; at most of order one.
    gamma_over_m_star: Option<f64>,
}

pub fn stage_twin(run: &RunConfig, out_dir: &Path) -> Result<StageResult> {
    let model = run.model_spec();
    let scales = run.scales()?;
    let (_, snaps) = load_simulation(out_dir)?;
    let base = snaps
        .last()
        .ok_or_else(|| Error::validation("simulation produced no snapshots"))?;
    let pair = make_twin(
        base,
        &model,
        &scales,
        run.twin_epsilon0,
        run.twin_support,
        run.twin_seed,
        run.experiment_lambda,
    )?;
    let evolved = evolve_twin(
        &pair,
        &model,
        &scales,
        base.time + run.twin_t_final,
        run.dt,
        run.snapshot_every,
        StepperOptions::default(),
    )?;
    let csv_rel = PathBuf::from("twin_separations.csv");
    let mut csv = std::fs::File::create(out_dir.join(&csv_rel))?;
    writeln!(csv, "time,sup_grid,sup_lattice")?;
    for s in &evolved.history {
        writeln!(
            csv,
            "{},{},{}",
            format_f64(s.time),
            format_f64(s.sup_grid),
            format_f64(s.sup_lattice)
        )?;
    }
    let gamma = fit_growth_rate(&evolved.history, 0.01 * run.q_star);
    let last = evolved.history.last().expect("history never empty");
    let summary = TwinSummary {
        epsilon0: run.twin_epsilon0,
        support: match run.twin_support {
            entv_core::pde::PerturbationSupport::LatticeOnly => "lattice-only",
            entv_core::pde::PerturbationSupport::Everywhere => "everywhere",
        },
        samples: evolved.history.len(),
        final_sup_grid: last.sup_grid,
        final_sup_lattice: last.sup_lattice,
        gamma_fit: gamma,
        m_star: scales.m_star,
        gamma_over_m_star: gamma.map(|g| g / scales.m_star),
    };
    write_json(&out_dir.join("twin.json"), &summary)?;
    Ok(StageResult::ok(vec![csv_rel, PathBuf::from("twin.json")]))
}

#[derive(Debug, Serialize)]
struct KernelAuditEntry {
    variant: &'static str,
    d: usize,
    p: u32,
    max_ratio: f64,
    rows: usize,
    rejected: usize,
}

pub fn stage_verify_kernels(run: &RunConfig, out_dir: &Path) -> Result<StageResult> {
    let model = run.model_spec();
    let scales = run.scales()?;
    let profile = CutoffProfile::SmoothExp;
    let csv_rel = PathBuf::from("kernels.csv");
    let mut csv = std::fs::File::create(out_dir.join(&csv_rel))?;
    writeln!(csv, "lemma,d,p,tau,x_norm,k_star,ratio,regime")?;
    let mut audit = Vec::new();
    for d in 1..=3usize {
        for p in [0u32, (d + 2) as u32] {
            for variant in [KernelVariant::Full, KernelVariant::Low, KernelVariant::High] {
                let k_stars: &[f64] = match variant {
                    KernelVariant::Full => &[],
                    _ => &[2.0, 8.0],
                };
                let grid = envelope_grid(1e-3, 10.0, 6, 20.0 * scales.delta_star, 5, k_stars);
                let report =
                    verify_envelope(&model.diffusion, d, variant, p, &grid, &profile)?;
                for row in &report.rows {
                    writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{}",
                        row.variant.as_str(),
                        row.d,
                        row.p,
                        format_f64(row.tau),
                        format_f64(row.x_norm),
                        row.k_star.map(format_f64).unwrap_or_else(|| "-".into()),
                        format_f64(row.ratio),
                        row.regime.as_str()
                    )?;
                }
                audit.push(KernelAuditEntry {
                    variant: variant.as_str(),
                    d,
                    p,
                    max_ratio: report.max_ratio,
                    rows: report.rows.len(),
                    rejected: report.rejected.len(),
                });
            }
        }
    }
    write_json(&out_dir.join("kernels.json"), &audit)?;
    Ok(StageResult::ok(vec![csv_rel, PathBuf::from("kernels.json")]))
}

pub fn stage_verify_sampling(run: &RunConfig, out_dir: &Path) -> Result<StageResult> {
    let model = run.model_spec();
    let scales = run.scales()?;
    let (_, snaps) = load_simulation(out_dir)?;
    let base = snaps
        .last()
        .ok_or_else(|| Error::validation("simulation produced no snapshots"))?;
    let pair = make_twin(
        base,
        &model,
        &scales,
        run.twin_epsilon0,
        run.twin_support,
        run.twin_seed,
        run.experiment_lambda,
    )?;
    let profile = CutoffProfile::SmoothExp;
    let opts = StepperOptions::default();
    let mode = run.experiment_mode;

    // Separation history at a fine cadence over the experiment horizon.
    let m = ((run.experiment_f_hat * (1.0 / run.experiment_epsilon).ln()).ceil() as usize).max(1);
    let horizon_units = match mode {
        ExperimentMode::Sampling => m,
        _ => 1,
    };
    let rec_every = run.dt * (scales.tau_star / (8.0 * run.dt)).round().max(1.0);
    let traced = evolve_twin(
        &pair,
        &model,
        &scales,
        base.time + horizon_units as f64 * scales.tau_star,
        run.dt,
        rec_every,
        opts,
    )?;
    let csv_rel = PathBuf::from(format!("separations_{}.csv", mode.as_str()));
    let mut csv = std::fs::File::create(out_dir.join(&csv_rel))?;
    writeln!(csv, "time,sup_grid,sup_lattice")?;
    for s in &traced.history {
        writeln!(
            csv,
            "{},{},{}",
            format_f64(s.time),
            format_f64(s.sup_grid),
            format_f64(s.sup_lattice)
        )?;
    }

    let json_rel = PathBuf::from(format!("verify_sampling_{}.json", mode.as_str()));
    let mut status = StageStatus::Conclusive;
    match mode {
        ExperimentMode::Dissipative => {
            let report = run_dissipative_experiment(
                &pair,
                &model,
                &scales,
                run.dt,
                run.experiment_ell,
                &run.experiment_prefactors,
                &profile,
                opts,
            )?;
            write_json(&out_dir.join(&json_rel), &report)?;
        }
        ExperimentMode::Forward => {
            let report = run_forward_experiment(
                &pair,
                &model,
                &scales,
                run.dt,
                run.experiment_ell,
                &run.experiment_prefactors,
                &profile,
                opts,
            )?;
            write_json(&out_dir.join(&json_rel), &report)?;
        }
        ExperimentMode::Sampling => {
            let report = run_sampling_experiment(
                &pair,
                &model,
                &scales,
                run.dt,
                SamplingExperimentConfig {
                    epsilon: run.experiment_epsilon,
                    l_inner: run.experiment_l_inner,
                    e_hat: run.experiment_e_hat,
                    f_hat: run.experiment_f_hat,
                },
                opts,
            )?;
            if report.premise_never_satisfied {
                status = StageStatus::Inconclusive(
                    "the discrete-norm premise never held; the run decides nothing"
                        .to_string(),
                );
            }
            write_json(&out_dir.join(&json_rel), &report)?;
        }
    }
    Ok(StageResult { outputs: vec![csv_rel, json_rel], status })
}

/// Parameters of a record-based entropy run after flag overrides.
pub struct EntropyParams {
    pub norm: NormChoice,
    pub n_max: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub per_decade: usize,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub csv_out: PathBuf,
}

impl EntropyParams {
    pub fn from_run(run: &RunConfig) -> EntropyParams {
        EntropyParams {
            norm: run.entropy_norm,
            n_max: run.entropy_n_max,
            eps_min: run.entropy_eps_min,
            eps_max: run.entropy_eps_max,
            per_decade: run.entropy_per_decade,
            fit_lo: run.entropy_fit_lo,
            fit_hi: run.entropy_fit_hi,
            csv_out: PathBuf::from("correlation.csv"),
        }
    }
}

pub fn build_record(run: &RunConfig, out_dir: &Path) -> Result<TrajectoryRecord> {
    let scales = run.scales()?;
    let (_, snaps) = load_simulation(out_dir)?;
    let meta = RecordMeta {
        model_hash: format!("{:#018x}", run.quick_hash()),
        seed: run.seed,
        t_start: snaps.first().map(|s| s.time).unwrap_or(0.0),
    };
    let _ = scales;
    TrajectoryRecord::from_fields(&snaps, run.entropy_window, 1, meta)
}

pub fn run_entropy_on_record(
    record: &TrajectoryRecord,
    run: &RunConfig,
    params: &EntropyParams,
    out_dir: &Path,
) -> Result<StageResult> {
    let scales = run.scales()?;
    let norm = match params.norm {
        NormChoice::Grid => WindowNorm::Grid,
        NormChoice::Lattice => {
            let stride = (scales.delta_star / record.delta).round() as usize;
            WindowNorm::Lattice { stride: stride.max(1) }
        }
    };
    let epsilons = log_epsilon_grid(params.eps_min, params.eps_max, params.per_decade);
    let table = correlation_sum(record, &epsilons, params.n_max, norm)?;
    let mut csv = std::fs::File::create(out_dir.join(&params.csv_out))?;
    writeln!(csv, "epsilon,n,pair_count,n_effective,C,log_C")?;
    for (e, eps) in table.epsilons.iter().enumerate() {
        for n in 1..=table.n_max {
            let c = table.c(e, n);
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                format_f64(*eps),
                n,
                table.counts[e][n - 1],
                table.n_effective(n),
                format_f64(c),
                if c > 0.0 { format_f64(c.ln()) } else { "-inf".to_string() }
            )?;
        }
    }
    let report = k2_estimate(&table, (params.fit_lo, params.fit_hi), None)?;
    let json_rel = PathBuf::from("entropy_report.json");
    write_json(&out_dir.join(&json_rel), &report)?;
    let status = if report.plateau.is_some() {
        StageStatus::Conclusive
    } else {
        StageStatus::Inconclusive("no slope plateau across the radius grid".to_string())
    };
    Ok(StageResult { outputs: vec![params.csv_out.clone(), json_rel], status })
}

pub fn stage_entropy(run: &RunConfig, out_dir: &Path) -> Result<StageResult> {
    let record = build_record(run, out_dir)?;
    let record_rel = PathBuf::from("record.entr");
    write_record(&out_dir.join(&record_rel), &record)?;
    let params = EntropyParams::from_run(run);
    let mut result = run_entropy_on_record(&record, run, &params, out_dir)?;
    result.outputs.insert(0, record_rel);
    Ok(result)
}
