//! Subcommand implementations.
//!
//! Every subcommand reads a study configuration (directly via `--config` or
//! embedded in a previous run's manifest via `--from-manifest`), writes its
//! outputs into `--out`, and finishes by saving a `manifest.json` that
//! records enough to replay the run bit-for-bit.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use nroy_core::abc::{rejection_abc, AbcConfig, AbcDistance};
use nroy_core::acquisition::{mean_entropy, reference_sample, select_batch};
use nroy_core::design::{maximin_lhs, sobol_design, uniform_sample, Design};
use nroy_core::emulator::gp::{gp_fit_with, GpModel};
use nroy_core::emulator::regression::{stepwise_fit, RegModel};
use nroy_core::emulator::{Emulator, OracleEmulator};
use nroy_core::ensemble::{Ensemble, RunOutcome, RunRecord};
use nroy_core::history::PlausibilityField;
use nroy_core::simulate::run_batch;
use nroy_core::wave::{run_wave, EmulatorKind, WaveState};
use nroy_core::{PlausibilityCriterion, Point};

use crate::config::{DistanceSection, StudyConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::report::{evaluate_grid, write_grid_csv, write_surface_svg, Surface};

/// Plausible-region calibration for expensive simulators: space-filling and
/// emulator-filtered designs, GP and regression emulation, history-matching
/// waves, entropy-driven acquisition and rejection ABC.
#[derive(Debug, Parser)]
#[command(name = "nroy", version, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a space-filling design as pending ensemble records.
    Design(DesignArgs),
    /// Run the study's simulator on the pending records of an ensemble.
    Run(RunArgs),
    /// Fit an emulator to the completed records of an ensemble.
    Fit(FitArgs),
    /// Predict metrics at given points with a fitted emulator.
    Predict(PredictArgs),
    /// Run the sequential history-matching wave loop.
    Match(MatchArgs),
    /// Choose the next simulator runs by expected-entropy minimization.
    Acquire(AcquireArgs),
    /// Rejection ABC with a uniform prior over the study space.
    Abc(AbcArgs),
    /// Render plausibility-probability and entropy surfaces plus a CSV grid.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Study configuration JSON.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Replay a previous run from its manifest instead of `--config`.
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    pub from_manifest: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

impl CommonArgs {
    /// Loads the study and, when replaying, the recorded manifest.
    fn resolve(&self, command: &str) -> CliResult<(StudyConfig, Option<RunManifest>)> {
        match (&self.config, &self.from_manifest) {
            (Some(path), None) => Ok((StudyConfig::load(path)?, None)),
            (None, Some(path)) => {
                let manifest = RunManifest::load(path)?;
                if manifest.command != command {
                    return Err(CliError::Validation(format!(
                        "manifest records a `{}` run, cannot replay as `{command}`",
                        manifest.command
                    )));
                }
                Ok((manifest.study.clone(), Some(manifest)))
            }
            _ => Err(CliError::Validation(
                "exactly one of --config or --from-manifest is required".into(),
            )),
        }
    }

    fn ensure_out(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    MaximinLhs,
    Sobol,
    Uniform,
}

impl std::fmt::Display for GeneratorArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GeneratorArg::MaximinLhs => "maximin-lhs",
            GeneratorArg::Sobol => "sobol",
            GeneratorArg::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for GeneratorArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maximin-lhs" => Ok(GeneratorArg::MaximinLhs),
            "sobol" => Ok(GeneratorArg::Sobol),
            "uniform" => Ok(GeneratorArg::Uniform),
            other => Err(format!("unknown generator `{other}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of design points; defaults to the study's initial budget.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = GeneratorArg::MaximinLhs)]
    pub generator: GeneratorArg,
    /// Overrides the study seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximin restarts; defaults to the study's design budget section.
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Ensemble with pending records to simulate.
    #[arg(long, value_name = "FILE")]
    pub ensemble: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Ensemble with completed records to fit.
    #[arg(long, value_name = "FILE")]
    pub ensemble: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fitted model file (from `fit` or `match`).
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Point to predict, as comma-separated coordinates; repeatable.
    #[arg(long = "theta", value_name = "COORDS")]
    pub thetas: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of waves to run; defaults to the schedule length.
    #[arg(long)]
    pub waves: Option<usize>,
    /// Overrides the study seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AcquireArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Ensemble of completed runs the acquisition starts from.
    #[arg(long, value_name = "FILE")]
    pub ensemble: Option<PathBuf>,
    /// Batch size d; defaults to the study's acquisition section.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AbcArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Simulator budget N; defaults to the study's abc section.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Ensemble whose design points are overlaid (and fitted when no model
    /// is given).
    #[arg(long, value_name = "FILE")]
    pub ensemble: Option<PathBuf>,
    /// Fitted model to render.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Render the simulator itself as a zero-variance oracle field.
    #[arg(long, conflicts_with = "model")]
    pub oracle: bool,
    /// Cells per axis.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Parameter pair to vary, as `i,j` indices; others sit at midpoints.
    #[arg(long, default_value = "0,1")]
    pub pair: String,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Design(args) => cmd_design(args),
        Command::Run(args) => cmd_run(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Match(args) => cmd_match(args),
        Command::Acquire(args) => cmd_acquire(args),
        Command::Abc(args) => cmd_abc(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn write_ensemble(ensemble: &Ensemble, dir: &Path, name: &str) -> CliResult<()> {
    let mut buf = Vec::new();
    ensemble.write_jsonl(&mut buf)?;
    std::fs::write(dir.join(name), buf)?;
    Ok(())
}

fn read_ensemble(study: &StudyConfig, path: &Path) -> CliResult<Ensemble> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
    Ok(Ensemble::read_jsonl(
        study.metrics.clone(),
        BufReader::new(file),
    )?)
}

fn design_to_pending(design: &Design, wave: u32, study: &StudyConfig) -> CliResult<Ensemble> {
    let mut ensemble = Ensemble::new(study.metrics.clone())?;
    for point in &design.points {
        ensemble.push(RunRecord {
            point: point.clone(),
            outcome: RunOutcome::Pending,
            wave,
        })?;
    }
    Ok(ensemble)
}

fn final_criterion(study: &StudyConfig) -> PlausibilityCriterion {
    study
        .schedule
        .criteria()
        .last()
        .expect("schedule is validated nonempty")
        .clone()
}

fn field_for<'a>(
    study: &StudyConfig,
    emulator: &'a dyn Emulator,
) -> CliResult<PlausibilityField<'a>> {
    Ok(PlausibilityField::new(emulator, final_criterion(study))?
        .with_thresholds(study.thresholds.p_low, study.thresholds.p_high)?
        .with_combine(study.thresholds.combine))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    model: serde_json::Value,
}

enum LoadedModel {
    Gp(GpModel),
    Regression(RegModel),
}

impl LoadedModel {
    fn as_emulator(&self) -> &dyn Emulator {
        match self {
            LoadedModel::Gp(m) => m,
            LoadedModel::Regression(m) => m,
        }
    }
}

fn save_model(dir: &Path, name: &str, model: &dyn Emulator) -> CliResult<()> {
    let file = if let Some(gp) = model.as_gp() {
        ModelFile {
            kind: "gp".into(),
            model: serde_json::from_str(&gp.to_json()?)?,
        }
    } else {
        return Err(CliError::Other("unsupported model kind for saving".into()));
    };
    std::fs::write(dir.join(name), serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

fn save_reg_model(dir: &Path, name: &str, model: &RegModel) -> CliResult<()> {
    let file = ModelFile {
        kind: "regression".into(),
        model: serde_json::from_str(&model.to_json()?)?,
    };
    std::fs::write(dir.join(name), serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    let body = serde_json::to_string(&file.model)?;
    match file.kind.as_str() {
        "gp" => Ok(LoadedModel::Gp(GpModel::from_json(&body)?)),
        "regression" => Ok(LoadedModel::Regression(RegModel::from_json(&body)?)),
        other => Err(CliError::Validation(format!("unknown model kind `{other}`"))),
    }
}

fn fit_configured_emulator(
    study: &StudyConfig,
    ensemble: &Ensemble,
    seed: u64,
) -> CliResult<LoadedModel> {
    Ok(match &study.emulator {
        EmulatorKind::Gp(settings) => {
            LoadedModel::Gp(gp_fit_with(ensemble, &study.space, settings, seed)?)
        }
        EmulatorKind::Regression(settings) => {
            LoadedModel::Regression(stepwise_fit(ensemble, &study.space, settings)?)
        }
    })
}

fn cmd_design(args: DesignArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("design")?;
    let out = args.common.ensure_out()?;
    let (n, generator, seed, restarts) = match &manifest_in {
        Some(m) => (
            m.parsed_arg::<usize>("n")?.unwrap_or(study.budgets.initial_design),
            m.parsed_arg::<GeneratorArg>("generator")?.unwrap_or(GeneratorArg::MaximinLhs),
            m.parsed_arg::<u64>("seed")?.unwrap_or(study.seed),
            m.parsed_arg::<usize>("restarts")?.unwrap_or(study.budgets.design_restarts),
        ),
        None => (
            args.n.unwrap_or(study.budgets.initial_design),
            args.generator,
            args.seed.unwrap_or(study.seed),
            args.restarts.unwrap_or(study.budgets.design_restarts),
        ),
    };
    if n == 0 {
        return Err(CliError::Validation("design size must be >= 1".into()));
    }
    let design = match generator {
        GeneratorArg::MaximinLhs => maximin_lhs(&study.space, n, seed, restarts)?,
        GeneratorArg::Sobol => sobol_design(&study.space, n, seed)?,
        GeneratorArg::Uniform => uniform_sample(&study.space, n, seed)?,
    };
    let ensemble = design_to_pending(&design, 0, &study)?;
    write_ensemble(&ensemble, out, "ensemble.jsonl")?;

    let mut manifest = RunManifest::new("design", study);
    manifest
        .arg("n", n)
        .arg("generator", generator)
        .arg("seed", seed)
        .arg("restarts", restarts)
        .seed("design", seed)
        .output("ensemble", "ensemble.jsonl");
    manifest.save(out)?;
    println!("design: {n} points ({generator}) -> {}", out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("run")?;
    let out = args.common.ensure_out()?;
    let ensemble_path = match (&manifest_in, &args.ensemble) {
        (Some(m), _) => {
            let recorded = m.parsed_arg::<PathBuf>("ensemble")?.ok_or_else(|| {
                CliError::Validation("manifest lacks the ensemble argument".into())
            })?;
            recorded
        }
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(CliError::Validation("--ensemble is required".into()));
        }
    };
    let mut ensemble = read_ensemble(&study, &ensemble_path)?;
    let sim = study.simulator()?;
    let pending: Vec<(usize, Point)> = ensemble
        .pending()
        .map(|(i, p, _)| (i, p.clone()))
        .collect();
    let points: Vec<Point> = pending.iter().map(|(_, p)| p.clone()).collect();
    let outcomes = run_batch(sim.as_ref(), &points, study.effective_workers())?;
    let mut completed = 0usize;
    let mut failed = 0usize;
    for ((idx, _), outcome) in pending.iter().zip(outcomes) {
        match &outcome {
            nroy_core::SimOutcome::Completed(_) => completed += 1,
            nroy_core::SimOutcome::Failed(_) => failed += 1,
        }
        ensemble.resolve(*idx, outcome.into())?;
    }
    write_ensemble(&ensemble, out, "ensemble.jsonl")?;

    let mut manifest = RunManifest::new("run", study);
    manifest
        .arg("ensemble", ensemble_path.display())
        .output("ensemble", "ensemble.jsonl");
    manifest.summary.insert("completed".into(), completed as f64);
    manifest.summary.insert("failed".into(), failed as f64);
    manifest.save(out)?;
    println!("run: {completed} completed, {failed} failed -> {}", out.display());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("fit")?;
    let out = args.common.ensure_out()?;
    let ensemble_path = match (&manifest_in, &args.ensemble) {
        (Some(m), _) => m.parsed_arg::<PathBuf>("ensemble")?.ok_or_else(|| {
            CliError::Validation("manifest lacks the ensemble argument".into())
        })?,
        (None, Some(p)) => p.clone(),
        (None, None) => return Err(CliError::Validation("--ensemble is required".into())),
    };
    let ensemble = read_ensemble(&study, &ensemble_path)?;
    let model = fit_configured_emulator(&study, &ensemble, study.seed)?;
    match &model {
        LoadedModel::Gp(gp) => save_model(out, "model.json", gp)?,
        LoadedModel::Regression(reg) => save_reg_model(out, "model.json", reg)?,
    }

    let fit_seed = study.seed;
    let mut manifest = RunManifest::new("fit", study);
    manifest
        .arg("ensemble", ensemble_path.display())
        .seed("fit", fit_seed)
        .output("model", "model.json");
    manifest.save(out)?;
    println!(
        "fit: {} completed records -> {}",
        ensemble.completed_count(),
        out.join("model.json").display()
    );
    Ok(())
}

fn parse_theta(raw: &str, dim: usize) -> CliResult<Point> {
    let coords: Result<Vec<f64>, _> = raw.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let coords =
        coords.map_err(|e| CliError::Validation(format!("bad --theta `{raw}`: {e}")))?;
    if coords.len() != dim {
        return Err(CliError::Validation(format!(
            "--theta `{raw}` has {} coordinates, space has {dim}",
            coords.len()
        )));
    }
    Ok(Point::new(coords))
}

fn cmd_predict(args: PredictArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("predict")?;
    let out = args.common.ensure_out()?;
    let (model_path, theta_raws) = match &manifest_in {
        Some(m) => (
            m.parsed_arg::<PathBuf>("model")?.ok_or_else(|| {
                CliError::Validation("manifest lacks the model argument".into())
            })?,
            m.args
                .get("thetas")
                .map(|s| s.split(';').map(str::to_string).collect::<Vec<_>>())
                .unwrap_or_default(),
        ),
        None => (
            args.model
                .clone()
                .ok_or_else(|| CliError::Validation("--model is required".into()))?,
            args.thetas.clone(),
        ),
    };
    if theta_raws.is_empty() {
        return Err(CliError::Validation("at least one --theta is required".into()));
    }
    let model = load_model(&model_path)?;
    let emulator = model.as_emulator();
    let mut lines = String::new();
    for raw in &theta_raws {
        let point = parse_theta(raw, study.space.dimension())?;
        let preds = emulator.predict(&point)?;
        let record = serde_json::json!({
            "theta": point.coords(),
            "predictions": preds,
            "metrics": emulator.metric_names(),
        });
        let line = serde_json::to_string(&record)?;
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    std::fs::write(out.join("predictions.jsonl"), lines)?;

    let mut manifest = RunManifest::new("predict", study);
    manifest
        .arg("model", model_path.display())
        .arg("thetas", theta_raws.join(";"))
        .output("predictions", "predictions.jsonl");
    manifest.save(out)?;
    Ok(())
}

fn cmd_match(args: MatchArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("match")?;
    let out = args.common.ensure_out()?;
    let (waves, seed) = match &manifest_in {
        Some(m) => (
            m.parsed_arg::<usize>("waves")?.unwrap_or(study.schedule.len()),
            m.parsed_arg::<u64>("seed")?.unwrap_or(study.seed),
        ),
        None => (
            args.waves.unwrap_or(study.schedule.len()),
            args.seed.unwrap_or(study.seed),
        ),
    };
    if waves == 0 || waves > study.schedule.len() {
        return Err(CliError::Validation(format!(
            "waves must lie in 1..={}, got {waves}",
            study.schedule.len()
        )));
    }
    let sim = study.simulator()?;

    // wave 0: initial space-filling design, simulated
    let design = maximin_lhs(
        &study.space,
        study.budgets.initial_design,
        seed,
        study.budgets.design_restarts,
    )?;
    let mut ensemble = Ensemble::new(study.metrics.clone())?;
    let outcomes = run_batch(sim.as_ref(), &design.points, study.effective_workers())?;
    for (point, outcome) in design.points.iter().zip(outcomes) {
        ensemble.push(RunRecord {
            point: point.clone(),
            outcome: outcome.into(),
            wave: 0,
        })?;
    }

    let settings = study.wave_settings();
    let mut state = WaveState::initial(ensemble);
    for wave in 0..waves {
        state = run_wave(
            state,
            &study.schedule,
            sim.as_ref(),
            &settings,
            seed.wrapping_add(1000 * (wave as u64 + 1)),
        )
        .map_err(CliError::from)?;
        let stats = state.history.last().expect("wave recorded");
        println!(
            "wave {}: attempted {}, plausible {}, acceptance rate {:.3} (filter rate {:.4})",
            stats.wave, stats.attempted, stats.plausible, stats.acceptance_rate, stats.filter_rate
        );
    }

    write_ensemble(&state.ensemble, out, "ensemble.jsonl")?;
    if let Some(emulator) = &state.emulator {
        if let Some(gp) = emulator.as_gp() {
            save_model(out, "model.json", gp)?;
        }
    }
    let mut manifest = RunManifest::new("match", study);
    manifest
        .arg("waves", waves)
        .arg("seed", seed)
        .seed("match", seed)
        .output("ensemble", "ensemble.jsonl");
    if out.join("model.json").exists() {
        manifest.output("model", "model.json");
    }
    manifest.waves = state.history.clone();
    for stats in &state.history {
        manifest.summary.insert(
            format!("wave{}_acceptance_rate", stats.wave),
            stats.acceptance_rate,
        );
    }
    if let Some(nroy) = &state.nroy {
        manifest
            .summary
            .insert("nroy_plausible_fraction".into(), nroy.plausible_fraction);
        manifest
            .summary
            .insert("nroy_uncertain_fraction".into(), nroy.uncertain_fraction);
        let mut lines = String::new();
        for (point, class) in nroy.points.iter().zip(&nroy.classes) {
            let record = serde_json::json!({
                "theta": point.coords(),
                "classification": class,
            });
            writeln!(lines, "{}", serde_json::to_string(&record)?).expect("string write");
        }
        std::fs::write(out.join("nroy.jsonl"), lines)?;
        manifest.output("nroy", "nroy.jsonl");
    }
    manifest.save(out)?;
    Ok(())
}

fn cmd_acquire(args: AcquireArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("acquire")?;
    let out = args.common.ensure_out()?;
    let (ensemble_path, batch, seed) = match &manifest_in {
        Some(m) => (
            m.parsed_arg::<PathBuf>("ensemble")?.ok_or_else(|| {
                CliError::Validation("manifest lacks the ensemble argument".into())
            })?,
            m.parsed_arg::<usize>("batch")?.unwrap_or(study.acquisition.batch),
            m.parsed_arg::<u64>("seed")?.unwrap_or(study.seed),
        ),
        None => (
            args.ensemble
                .clone()
                .ok_or_else(|| CliError::Validation("--ensemble is required".into()))?,
            args.batch.unwrap_or(study.acquisition.batch),
            args.seed.unwrap_or(study.seed),
        ),
    };
    let ensemble = read_ensemble(&study, &ensemble_path)?;
    let gp_settings = match &study.emulator {
        EmulatorKind::Gp(s) => s.clone(),
        EmulatorKind::Regression(_) => {
            return Err(CliError::Validation(
                "entropy acquisition needs a Gaussian-process emulator; set emulator.kind = \"gp\""
                    .into(),
            ))
        }
    };
    let gp = gp_fit_with(&ensemble, &study.space, &gp_settings, seed)?;
    let field = field_for(&study, &gp)?;
    let reference = reference_sample(&study.space, study.acquisition.reference_size, seed ^ 0x5eed)?;
    let candidates = uniform_sample(&study.space, study.acquisition.candidate_pool, seed ^ 0xca4d)?;
    let before = mean_entropy(&field, &reference)?.hbar;
    let selection = select_batch(
        &field,
        &candidates.points,
        batch,
        &reference,
        study.acquisition.mc_draws,
        seed,
    )?;

    let next_wave = ensemble.records().iter().map(|r| r.wave).max().unwrap_or(0) + 1;
    let mut chosen = Ensemble::new(study.metrics.clone())?;
    for point in &selection.points {
        chosen.push(RunRecord {
            point: point.clone(),
            outcome: RunOutcome::Pending,
            wave: next_wave,
        })?;
    }
    write_ensemble(&chosen, out, "chosen.jsonl")?;

    let mut trace = String::from("pick,expected_hbar\n");
    for (i, h) in selection.expected_hbar.iter().enumerate() {
        writeln!(trace, "{},{}", i + 1, h).expect("string write");
    }
    std::fs::write(out.join("entropy_trace.csv"), trace)?;

    let mut manifest = RunManifest::new("acquire", study);
    manifest
        .arg("ensemble", ensemble_path.display())
        .arg("batch", batch)
        .arg("seed", seed)
        .seed("acquire", seed)
        .output("chosen", "chosen.jsonl")
        .output("trace", "entropy_trace.csv");
    manifest.summary.insert("hbar_before".into(), before);
    if let Some(&last) = selection.expected_hbar.last() {
        manifest.summary.insert("hbar_expected_after".into(), last);
    }
    manifest.save(out)?;
    println!(
        "acquire: {} points, expected Hbar {:.6} -> {:.6}",
        batch,
        before,
        selection.expected_hbar.last().copied().unwrap_or(before)
    );
    Ok(())
}

fn cmd_abc(args: AbcArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("abc")?;
    let out = args.common.ensure_out()?;
    let (budget, seed) = match &manifest_in {
        Some(m) => (
            m.parsed_arg::<usize>("budget")?.unwrap_or(study.abc.budget),
            m.parsed_arg::<u64>("seed")?.unwrap_or(study.seed),
        ),
        None => (
            args.budget.unwrap_or(study.abc.budget),
            args.seed.unwrap_or(study.seed),
        ),
    };
    if budget == 0 {
        return Err(CliError::Validation("abc budget must be >= 1".into()));
    }
    let distance = match &study.abc.distance {
        None => AbcDistance::MaxIntervalViolation(final_criterion(&study)),
        Some(DistanceSection::WeightedEuclidean { targets, weights }) => {
            AbcDistance::WeightedEuclidean {
                targets: targets.clone(),
                weights: weights.clone(),
            }
        }
    };
    let config = AbcConfig {
        distance,
        tolerance: study.abc.tolerance.clone().into(),
        budget,
        seed,
    };
    let sim = study.simulator()?;
    let result = rejection_abc(sim.as_ref(), &config, study.effective_workers())?;

    write_ensemble(&result.ensemble, out, "ensemble.jsonl")?;
    let mut accepted = Ensemble::new(study.metrics.clone())?;
    for point in &result.accepted {
        let source = result
            .ensemble
            .records()
            .iter()
            .find(|r| r.point.bit_eq(point))
            .expect("accepted points come from the ensemble");
        accepted.push(source.clone())?;
    }
    write_ensemble(&accepted, out, "accepted.jsonl")?;

    let mut manifest = RunManifest::new("abc", study);
    manifest
        .arg("budget", budget)
        .arg("seed", seed)
        .seed("abc", seed)
        .output("ensemble", "ensemble.jsonl")
        .output("accepted", "accepted.jsonl");
    manifest.summary.insert("epsilon_used".into(), result.epsilon_used);
    manifest
        .summary
        .insert("acceptance_rate".into(), result.acceptance_rate);
    manifest
        .summary
        .insert("failed_runs".into(), result.failed_runs as f64);
    manifest.save(out)?;
    println!(
        "abc: {} of {budget} accepted (rate {:.4}, epsilon {}, {} failed)",
        result.accepted.len(),
        result.acceptance_rate,
        result.epsilon_used,
        result.failed_runs
    );
    if result.accepted.is_empty() {
        return Err(CliError::EmptyPlausibleSet(
            "rejection ABC accepted nothing within tolerance".into(),
        ));
    }
    Ok(())
}

fn parse_pair(raw: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Validation(format!("bad --pair `{raw}`")));
    }
    let i = parts[0].trim().parse::<usize>();
    let j = parts[1].trim().parse::<usize>();
    match (i, j) {
        (Ok(i), Ok(j)) => Ok((i, j)),
        _ => Err(CliError::Validation(format!("bad --pair `{raw}`"))),
    }
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let (study, manifest_in) = args.common.resolve("report")?;
    let out = args.common.ensure_out()?;
    let (ensemble_path, model_path, oracle, grid_n, pair_raw) = match &manifest_in {
        Some(m) => (
            m.parsed_arg::<PathBuf>("ensemble")?,
            m.parsed_arg::<PathBuf>("model")?,
            m.parsed_arg::<bool>("oracle")?.unwrap_or(false),
            m.parsed_arg::<usize>("grid")?.unwrap_or(100),
            m.args.get("pair").cloned().unwrap_or_else(|| "0,1".into()),
        ),
        None => (
            args.ensemble.clone(),
            args.model.clone(),
            args.oracle,
            args.grid,
            args.pair.clone(),
        ),
    };
    let pair = parse_pair(&pair_raw)?;
    let ensemble = match &ensemble_path {
        Some(p) => Some(read_ensemble(&study, p)?),
        None => None,
    };
    let design_points: Vec<Point> = ensemble
        .as_ref()
        .map(|e| e.records().iter().map(|r| r.point.clone()).collect())
        .unwrap_or_default();

    // the field comes from a saved model, the oracle simulator, or a fresh
    // fit on the supplied ensemble, in that order of preference
    let loaded;
    let oracle_emulator;
    let fitted;
    let emulator: &dyn Emulator = if let Some(path) = &model_path {
        loaded = load_model(path)?;
        loaded.as_emulator()
    } else if oracle {
        oracle_emulator = OracleEmulator::new(ArcSim(study.simulator()?));
        &oracle_emulator
    } else if let Some(ens) = &ensemble {
        fitted = fit_configured_emulator(&study, ens, study.seed)?;
        fitted.as_emulator()
    } else {
        return Err(CliError::Validation(
            "report needs --model, --oracle, or --ensemble".into(),
        ));
    };
    let field = field_for(&study, emulator)?;
    let grid = evaluate_grid(&field, &study.space, pair, grid_n)?;
    write_grid_csv(&grid, &study.space, &out.join("grid.csv"))?;
    write_surface_svg(
        &grid,
        &study.space,
        Surface::Probability,
        &design_points,
        &out.join("surface.svg"),
    )?;
    write_surface_svg(
        &grid,
        &study.space,
        Surface::Entropy,
        &design_points,
        &out.join("entropy.svg"),
    )?;

    let mut manifest = RunManifest::new("report", study);
    if let Some(p) = &ensemble_path {
        manifest.arg("ensemble", p.display());
    }
    if let Some(p) = &model_path {
        manifest.arg("model", p.display());
    }
    manifest
        .arg("oracle", oracle)
        .arg("grid", grid_n)
        .arg("pair", &pair_raw)
        .output("grid", "grid.csv")
        .output("surface", "surface.svg")
        .output("entropy", "entropy.svg");
    manifest.save(out)?;
    println!("report: {grid_n}x{grid_n} grid -> {}", out.display());
    Ok(())
}

/// Boxed simulators need a concrete `Simulator` impl for the oracle wrapper.
struct ArcSim(Box<dyn nroy_core::Simulator>);

impl nroy_core::Simulator for ArcSim {
    fn spec(&self) -> &nroy_core::SimulatorSpec {
        self.0.spec()
    }
    fn run(&self, point: &Point) -> nroy_core::Result<nroy_core::SimOutcome> {
        self.0.run(point)
    }
}
