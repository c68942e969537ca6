//! Experiment runner behind the `conflict-gate` binary.
//!
//! One JSON spec file drives everything: `simulate` writes the ground truth
//! and the sampled dataset, `train` runs one strategy over the spec's seeds,
//! `ablation` runs the full strategy x seed grid in a worker pool and
//! aggregates a win/loss table, `verify` replays the descent/rate checks on
//! a saved trace, and `deadlock` prints the anti-parallel construction.
//!
//! All outputs are plot-ready CSV/JSON; nothing renders figures. Exit codes
//! are a stable contract: 0 success, 1 check failure, 2 input error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, compute_m_kappa, experiment_metrics, theory_eta, DeadlockReport, ExperimentMetrics,
    VerifyMode,
};
use crate::error::{Error, Result};
use crate::net::NetworkParams;
use crate::seir::{
    generate_dataset, load_dataset_file, rk4_simulate, write_trajectory_csv, CollocationGrid,
    Dataset, SeirParams, SeirState,
};
use crate::trainer::{self, Optimizer, Strategy, TrainConfig, TrainTrace};

/// Environment variable that overrides the spec's seed list (CI hook).
pub const SEED_ENV: &str = "CONFLICT_GATE_SEED";

#[derive(Parser, Debug)]
#[command(name = "conflict-gate", version, about = "Conflict-gated PINN training on SEIR dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the ground truth and sample the noisy dataset.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one strategy over the spec's seeds.
    Train {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        strategy: String,
        /// Run a single seed instead of the spec's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// alpha = 0 and plain GD at eta = c / (4 L_hat).
        #[arg(long)]
        theory_mode: bool,
        /// Start from a saved parameter snapshot instead of seed init.
        #[arg(long)]
        init_params: Option<PathBuf>,
    },
    /// Run every strategy x seed cell and aggregate the comparison.
    Ablation {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker pool size; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        theory_mode: bool,
    },
    /// Replay descent / rate checks on a saved trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        /// metrics.json carrying the run configuration; defaults to the
        /// file next to the trace.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// "descent" or "full" (full adds the rate envelope).
        #[arg(long, default_value = "descent")]
        mode: String,
    },
    /// Print the Pareto-deadlock construction for a conflict ratio.
    Deadlock {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 5.0)]
        kappa: f64,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// One spec file describes one experiment: the outbreak, the dataset, and
/// the training grid to run over it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub seir: SeirParams,
    /// Initial (s, e, i, r) fractions.
    #[serde(default = "default_init")]
    pub init: [f64; 4],
    #[serde(default = "default_t_horizon")]
    pub t_horizon: f64,
    #[serde(default = "default_trajectory_dt")]
    pub trajectory_dt: f64,
    pub dataset: DatasetSpec,
    pub strategies: Vec<String>,
    #[serde(default)]
    pub train: TrainSettings,
    /// Optional full per-strategy overrides of `train`.
    #[serde(default)]
    pub per_strategy: BTreeMap<String, TrainSettings>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

fn default_init() -> [f64; 4] {
    [0.999, 0.0, 0.001, 0.0]
}

fn default_t_horizon() -> f64 {
    100.0
}

fn default_trajectory_dt() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Seed- and strategy-independent training settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub steps: usize,
    pub optimizer: Optimizer,
    pub layer_sizes: Vec<usize>,
    pub grid_points: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub lambda_logic: f64,
    /// lambda_phy for the "fixed" strategy.
    pub lambda_phy_fixed: f64,
    pub inverse_mode: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            steps: d.steps,
            optimizer: d.optimizer,
            layer_sizes: d.layer_sizes,
            grid_points: d.grid_points,
            alpha: d.alpha,
            kappa: d.kappa,
            epsilon: d.epsilon,
            lambda_logic: d.lambda_logic,
            lambda_phy_fixed: 1.0,
            inverse_mode: false,
        }
    }
}

pub fn parse_strategy(name: &str, lambda_phy_fixed: f64) -> Result<Strategy> {
    match name {
        "fixed" => Ok(Strategy::Fixed { lambda_phy: lambda_phy_fixed }),
        "lra" => Ok(Strategy::Lra),
        "cggs" => Ok(Strategy::Cggs),
        other => Err(Error::Config(format!(
            "unknown strategy `{other}`; usage: --strategy <fixed|lra|cggs>"
        ))),
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut spec: ExperimentSpec = serde_json::from_reader(file)
            .map_err(|e| Error::Parse(format!("spec {}: {e}", path.display())))?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed: u64 = v
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an integer, got `{v}`")))?;
            spec.seeds = vec![seed];
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("spec needs at least one strategy".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("spec needs at least one seed".into()));
        }
        for s in &self.strategies {
            parse_strategy(s, 1.0)?;
        }
        self.seir.validate()?;
        if self.dataset.n_points == 0 {
            return Err(Error::Config("dataset needs at least one point".into()));
        }
        Ok(())
    }

    pub fn settings_for(&self, strategy: &str) -> &TrainSettings {
        self.per_strategy.get(strategy).unwrap_or(&self.train)
    }

    pub fn config_for(&self, strategy: &str, seed: u64) -> Result<TrainConfig> {
        let s = self.settings_for(strategy);
        Ok(TrainConfig {
            strategy: parse_strategy(strategy, s.lambda_phy_fixed)?,
            optimizer: s.optimizer,
            steps: s.steps,
            seed,
            layer_sizes: s.layer_sizes.clone(),
            grid_points: s.grid_points,
            t_horizon: self.t_horizon,
            alpha: s.alpha,
            kappa: s.kappa,
            epsilon: s.epsilon,
            lambda_logic: s.lambda_logic,
            inverse_mode: s.inverse_mode,
            gate_override: None,
        })
    }

    pub fn initial_state(&self) -> SeirState {
        SeirState::new(0.0, self.init[0], self.init[1], self.init[2], self.init[3])
    }
}

/// metrics.json layout: the verdict/metric keys plus the full run config,
/// so `verify --mode full` can recover eta and alpha.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub run: TrainConfig,
    pub name: String,
    pub descent_pass_rate: f64,
    pub theorem_lhs: Option<f64>,
    pub theorem_bound: Option<f64>,
    pub m_kappa: f64,
    pub peak_value_error: f64,
    pub peak_time_error: f64,
    pub final_l_data: f64,
    pub phase_medians: PhaseMedians,
    /// Fraction of steps with negative data/physics cosine.
    pub s_cos_negative_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered_rates: Option<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhaseMedians {
    pub early: Option<f64>,
    pub late: Option<f64>,
}

impl MetricsDoc {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_reader(std::fs::File::open(path)?)
            .map_err(|e| Error::Parse(format!("metrics {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self).map_err(|e| Error::Io(e.into()))?;
        use std::io::Write;
        file.write_all(b"\n")?;
        Ok(())
    }
}

/// Per-cell summary row used by the ablation aggregate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: String,
    pub seed: u64,
    pub final_l_data: f64,
    pub final_l_ode: f64,
    pub final_l_logic: f64,
    pub peak_value_error: f64,
    pub peak_time_error: f64,
    pub s_cos_negative_fraction: f64,
    pub phase_median_early: Option<f64>,
    pub phase_median_late: Option<f64>,
}

/// Head-to-head wins between two strategies over the shared seed list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub seeds: usize,
    pub final_l_data_wins_a: usize,
    pub final_l_data_wins_b: usize,
    pub final_l_data_ties: usize,
    pub peak_error_wins_a: usize,
    pub peak_error_wins_b: usize,
    pub peak_error_ties: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub name: String,
    pub cells: Vec<CellSummary>,
    pub pairs: Vec<PairComparison>,
}

impl ComparisonDoc {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_reader(std::fs::File::open(path)?)
            .map_err(|e| Error::Parse(format!("comparison {}: {e}", path.display())))
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Config(_) | Error::Validation(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Returns Ok(true) on success, Ok(false) when a check failed cleanly.
pub fn dispatch(cmd: &Command) -> Result<bool> {
    match cmd {
        Command::Simulate { spec, out } => {
            let spec = ExperimentSpec::load(spec)?;
            let out = out.clone().unwrap_or_else(|| spec.output_dir.clone());
            cmd_simulate(&spec, &out)?;
            Ok(true)
        }
        Command::Train { spec, strategy, seed, out, theory_mode, init_params } => {
            let spec = ExperimentSpec::load(spec)?;
            let out = out.clone().unwrap_or_else(|| spec.output_dir.clone());
            cmd_train(&spec, strategy, *seed, &out, *theory_mode, init_params.as_deref())?;
            Ok(true)
        }
        Command::Ablation { spec, out, jobs, theory_mode } => {
            let spec = ExperimentSpec::load(spec)?;
            let out = out.clone().unwrap_or_else(|| spec.output_dir.clone());
            cmd_ablation(&spec, &out, *jobs, *theory_mode)?;
            Ok(true)
        }
        Command::Verify { trace, meta, mode } => cmd_verify(trace, meta.as_deref(), mode),
        Command::Deadlock { c, kappa, dim, seed } => {
            let report = cmd_deadlock(*c, *kappa, *dim, *seed)?;
            Ok(report.pass)
        }
    }
}

/// Writes truth.csv and dataset.csv; both are reproducible under the spec.
pub fn cmd_simulate(spec: &ExperimentSpec, out: &Path) -> Result<(Vec<SeirState>, Dataset)> {
    std::fs::create_dir_all(out)?;
    let truth = rk4_simulate(&spec.seir, &spec.initial_state(), spec.t_horizon, spec.trajectory_dt)?;
    let dataset = generate_dataset(
        &truth,
        spec.dataset.n_points,
        spec.dataset.noise_sigma,
        spec.dataset.seed,
    )?;
    write_trajectory_csv(&truth, std::fs::File::create(out.join("truth.csv"))?)?;
    dataset.save_file(&out.join("dataset.csv"))?;
    println!(
        "simulate: wrote {} truth rows and {} observations to {}",
        truth.len(),
        dataset.len(),
        out.display()
    );
    Ok((truth, dataset))
}

/// Loads the spec's dataset if present under `out`, generating it inline
/// otherwise.
fn ensure_data(spec: &ExperimentSpec, out: &Path) -> Result<(Vec<SeirState>, Dataset)> {
    let ds_path = out.join("dataset.csv");
    let truth_path = out.join("truth.csv");
    if ds_path.exists() && truth_path.exists() {
        let dataset = load_dataset_file(&ds_path, spec.t_horizon)?;
        let truth = crate::seir::load_trajectory(std::fs::File::open(&truth_path)?)?;
        Ok((truth, dataset))
    } else {
        cmd_simulate(spec, out)
    }
}

/// The result of one (strategy, seed) training cell, on disk and in memory.
pub struct CellOutcome {
    pub summary: CellSummary,
    pub trace: TrainTrace,
    pub dir: PathBuf,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &ExperimentSpec,
    strategy: &str,
    seed: u64,
    theory_mode: bool,
    truth: &[SeirState],
    dataset: &Dataset,
    out: &Path,
    init_params: Option<&NetworkParams>,
) -> Result<CellOutcome> {
    let mut config = spec.config_for(strategy, seed)?;
    let constants = compute_m_kappa(config.kappa);
    if theory_mode {
        let params0 = match init_params {
            Some(p) => p.clone(),
            None => NetworkParams::init(&config.layer_sizes, seed)?,
        };
        let l_hat = analysis::estimate_curvature(&params0, dataset, config.t_horizon, 100, seed)?;
        config = config.theory_mode(theory_eta(&constants, l_hat));
    }
    let grid = CollocationGrid::uniform(config.t_horizon, config.grid_points)?;
    let trace = match init_params {
        None => trainer::run(&config, dataset, &grid, &spec.seir)?,
        Some(p) => trainer::run_from(&config, p, dataset, &grid, &spec.seir)?,
    };

    let params = trainer::final_params(&config, &trace)?;
    let metrics = experiment_metrics(&trace, &params, truth, config.t_horizon);
    let mode = if config.is_theory_mode() { VerifyMode::Full } else { VerifyMode::Descent };
    let verdict = analysis::verify_trace(&trace, &constants, mode)?;

    let dir = out.join(strategy).join(seed.to_string());
    std::fs::create_dir_all(&dir)?;
    trace.save_csv(&dir.join("trace.csv"))?;
    params.save_file(&dir.join("params.json"))?;
    let neg = trace.records.iter().filter(|r| r.s_cos < 0.0).count() as f64
        / trace.records.len() as f64;
    let doc = MetricsDoc {
        run: config,
        name: spec.name.clone(),
        descent_pass_rate: verdict.descent_pass_rate,
        theorem_lhs: verdict.theorem.map(|t| t.lhs),
        theorem_bound: verdict.theorem.map(|t| t.bound),
        m_kappa: constants.m_kappa,
        peak_value_error: metrics.peak_value_error,
        peak_time_error: metrics.peak_time_error,
        final_l_data: metrics.final_l_data,
        phase_medians: PhaseMedians {
            early: metrics.phase_median_early,
            late: metrics.phase_median_late,
        },
        s_cos_negative_fraction: neg,
        recovered_rates: trace.recovered_rates,
    };
    doc.save(&dir.join("metrics.json"))?;

    let last = trace.records.last().expect("nonempty trace");
    let summary = CellSummary {
        strategy: strategy.to_string(),
        seed,
        final_l_data: last.l_data,
        final_l_ode: last.l_ode,
        final_l_logic: last.l_logic,
        peak_value_error: metrics.peak_value_error,
        peak_time_error: metrics.peak_time_error,
        s_cos_negative_fraction: neg,
        phase_median_early: metrics.phase_median_early,
        phase_median_late: metrics.phase_median_late,
    };
    Ok(CellOutcome { summary, trace, dir })
}

pub fn cmd_train(
    spec: &ExperimentSpec,
    strategy: &str,
    seed: Option<u64>,
    out: &Path,
    theory_mode: bool,
    init_params: Option<&Path>,
) -> Result<Vec<CellSummary>> {
    parse_strategy(strategy, 1.0)?;
    let (truth, dataset) = ensure_data(spec, out)?;
    let init = init_params.map(NetworkParams::load_file).transpose()?;
    let seeds: Vec<u64> = seed.map(|s| vec![s]).unwrap_or_else(|| spec.seeds.clone());
    let mut rows = Vec::new();
    for s in seeds {
        let cell =
            run_cell(spec, strategy, s, theory_mode, &truth, &dataset, out, init.as_ref())?;
        println!(
            "train: {}/{} final l_data={:.3e} peak_err={:.3} s_cos<0 on {:.1}% of steps -> {}",
            strategy,
            s,
            cell.summary.final_l_data,
            cell.summary.peak_value_error,
            100.0 * cell.summary.s_cos_negative_fraction,
            cell.dir.display()
        );
        rows.push(cell.summary);
    }
    Ok(rows)
}

pub fn cmd_ablation(
    spec: &ExperimentSpec,
    out: &Path,
    jobs: Option<usize>,
    theory_mode: bool,
) -> Result<ComparisonDoc> {
    if spec.strategies.len() < 2 {
        return Err(Error::Config("ablation needs at least two strategies".into()));
    }
    let (truth, dataset) = ensure_data(spec, out)?;
    let cells: Vec<(String, u64)> = spec
        .strategies
        .iter()
        .flat_map(|s| spec.seeds.iter().map(move |&seed| (s.clone(), seed)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<CellSummary>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|(strategy, seed)| {
                run_cell(spec, strategy, *seed, theory_mode, &truth, &dataset, out, None)
                    .map(|c| c.summary)
            })
            .collect()
    });
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        summaries.push(r?);
    }

    let mut pairs = Vec::new();
    for (ai, a) in spec.strategies.iter().enumerate() {
        for b in &spec.strategies[ai + 1..] {
            pairs.push(compare_pair(&summaries, a, b));
        }
    }
    let doc = ComparisonDoc { name: spec.name.clone(), cells: summaries, pairs };

    let mut file = std::fs::File::create(out.join("comparison.json"))?;
    serde_json::to_writer_pretty(&mut file, &doc).map_err(|e| Error::Io(e.into()))?;
    use std::io::Write;
    file.write_all(b"\n")?;
    write_combined_csv(&doc.cells, &out.join("combined.csv"))?;

    for p in &doc.pairs {
        println!(
            "ablation: {} vs {} over {} seeds: final_l_data {}:{} (ties {}), peak_error {}:{} (ties {})",
            p.a,
            p.b,
            p.seeds,
            p.final_l_data_wins_a,
            p.final_l_data_wins_b,
            p.final_l_data_ties,
            p.peak_error_wins_a,
            p.peak_error_wins_b,
            p.peak_error_ties
        );
    }
    Ok(doc)
}

fn compare_pair(cells: &[CellSummary], a: &str, b: &str) -> PairComparison {
    let mut out = PairComparison {
        a: a.to_string(),
        b: b.to_string(),
        seeds: 0,
        final_l_data_wins_a: 0,
        final_l_data_wins_b: 0,
        final_l_data_ties: 0,
        peak_error_wins_a: 0,
        peak_error_wins_b: 0,
        peak_error_ties: 0,
    };
    for ca in cells.iter().filter(|c| c.strategy == a) {
        if let Some(cb) = cells.iter().find(|c| c.strategy == b && c.seed == ca.seed) {
            out.seeds += 1;
            if ca.final_l_data < cb.final_l_data {
                out.final_l_data_wins_a += 1;
            } else if cb.final_l_data < ca.final_l_data {
                out.final_l_data_wins_b += 1;
            } else {
                out.final_l_data_ties += 1;
            }
            if ca.peak_value_error < cb.peak_value_error {
                out.peak_error_wins_a += 1;
            } else if cb.peak_value_error < ca.peak_value_error {
                out.peak_error_wins_b += 1;
            } else {
                out.peak_error_ties += 1;
            }
        }
    }
    out
}

/// One row of combined.csv: the plot-ready per-cell summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedRow {
    pub strategy: String,
    pub seed: u64,
    pub final_l_data: f64,
    pub final_l_ode: f64,
    pub final_l_logic: f64,
    pub peak_value_error: f64,
    pub peak_time_error: f64,
    pub s_cos_negative_fraction: f64,
}

impl From<&CellSummary> for CombinedRow {
    fn from(c: &CellSummary) -> Self {
        CombinedRow {
            strategy: c.strategy.clone(),
            seed: c.seed,
            final_l_data: c.final_l_data,
            final_l_ode: c.final_l_ode,
            final_l_logic: c.final_l_logic,
            peak_value_error: c.peak_value_error,
            peak_time_error: c.peak_time_error,
            s_cos_negative_fraction: c.s_cos_negative_fraction,
        }
    }
}

fn write_combined_csv(cells: &[CellSummary], path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(std::fs::File::create(path)?);
    for c in cells {
        wtr.serialize(CombinedRow::from(c)).map_err(|e| Error::Parse(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_combined_csv(path: &Path) -> Result<Vec<CombinedRow>> {
    let mut rdr = csv::Reader::from_reader(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (k, rec) in rdr.deserialize::<CombinedRow>().enumerate() {
        rows.push(rec.map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?);
    }
    Ok(rows)
}

pub fn cmd_verify(trace_path: &Path, meta: Option<&Path>, mode: &str) -> Result<bool> {
    let mode = match mode {
        "descent" => VerifyMode::Descent,
        "full" => VerifyMode::Full,
        other => {
            return Err(Error::Config(format!(
                "unknown mode `{other}`; usage: --mode <descent|full>"
            )))
        }
    };
    let mut trace = TrainTrace::load_csv(trace_path)?;
    let meta_path = meta
        .map(Path::to_path_buf)
        .unwrap_or_else(|| trace_path.with_file_name("metrics.json"));
    if meta_path.exists() {
        let doc = MetricsDoc::load(&meta_path)?;
        trace.config = Some(doc.run);
    }
    let kappa = trace.config.as_ref().map(|c| c.kappa).unwrap_or(5.0);
    let constants = compute_m_kappa(kappa);
    let report = analysis::verify_trace(&trace, &constants, mode)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?
    );
    Ok(report.pass)
}

pub fn cmd_deadlock(c: f64, kappa: f64, dim: usize, seed: u64) -> Result<DeadlockReport> {
    let report = analysis::deadlock_demo(c, kappa, dim, seed)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?
    );
    Ok(report)
}

/// Experiment-level summary used by library callers (tests, notebooks).
pub fn metrics_of(trace: &TrainTrace, truth: &[SeirState]) -> Result<ExperimentMetrics> {
    let config = trace
        .config
        .as_ref()
        .ok_or_else(|| Error::Mode("trace has no configuration attached".into()))?;
    let params = trainer::final_params(config, trace)?;
    Ok(experiment_metrics(trace, &params, truth, config.t_horizon))
}
