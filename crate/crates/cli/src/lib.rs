//! Command-line front end: argument parsing, pipeline orchestration, and
//! artifact emission. Every flag falls back to an `MMFS_`-prefixed
//! environment variable; an explicit flag wins.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use mmfs_core::select::PipelineStages;
use mmfs_core::solver::Penalty;
use mmfs_core::{
    data, eval, select, Denominator, Error as CoreError, LabeledDataset, NmiNormalization,
    Orientation, PipelineParams, SelectionResult, SolverConfig, Standardize, Variant,
};

#[derive(Debug, Parser)]
#[command(
    name = "mmfs",
    version,
    about = "Unsupervised feature selection via multi-step Markov transition probabilities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank features and write the selected subset.
    Select(SelectArgs),
    /// Evaluate ranking prefixes with k-means ACC/NMI across feature counts.
    Sweep(SweepArgs),
    /// Evaluate ACC/NMI over a lambda x n parameter grid at fixed s.
    Grid(GridArgs),
    /// Emit the projected coordinates X^T W per instance.
    Project(ProjectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    RowsAreInstances,
    RowsAreFeatures,
}

impl From<OrientationArg> for Orientation {
    fn from(value: OrientationArg) -> Self {
        match value {
            OrientationArg::RowsAreInstances => Orientation::RowsAreInstances,
            OrientationArg::RowsAreFeatures => Orientation::RowsAreFeatures,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StandardizeArg {
    None,
    Zscore,
}

impl From<StandardizeArg> for Standardize {
    fn from(value: StandardizeArg) -> Self {
        match value {
            StandardizeArg::None => Standardize::None,
            StandardizeArg::Zscore => Standardize::ZScore,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    #[value(name = "minP", alias = "minp")]
    MinP,
    #[value(name = "maxP", alias = "maxp")]
    MaxP,
    Inter,
}

impl From<VariantArg> for Variant {
    fn from(value: VariantArg) -> Self {
        match value {
            VariantArg::MinP => Variant::MinP,
            VariantArg::MaxP => Variant::MaxP,
            VariantArg::Inter => Variant::Inter,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    Squared,
    Plain,
}

impl From<PenaltyArg> for Penalty {
    fn from(value: PenaltyArg) -> Self {
        match value {
            PenaltyArg::Squared => Penalty::Squared,
            PenaltyArg::Plain => Penalty::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DenominatorArg {
    Neighbors,
    All,
}

impl From<DenominatorArg> for Denominator {
    fn from(value: DenominatorArg) -> Self {
        match value {
            DenominatorArg::Neighbors => Denominator::Neighbors,
            DenominatorArg::All => Denominator::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NmiNormArg {
    Arithmetic,
    Geometric,
}

impl From<NmiNormArg> for NmiNormalization {
    fn from(value: NmiNormArg) -> Self {
        match value {
            NmiNormArg::Arithmetic => NmiNormalization::Arithmetic,
            NmiNormArg::Geometric => NmiNormalization::Geometric,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Input CSV path.
    #[arg(long, env = "MMFS_INPUT")]
    pub input: PathBuf,

    /// CSV layout.
    #[arg(
        long,
        env = "MMFS_ORIENTATION",
        value_enum,
        default_value = "rows-are-instances"
    )]
    pub orientation: OrientationArg,

    /// Name of the ground-truth label column, when present.
    #[arg(long = "label-col", env = "MMFS_LABEL_COL")]
    pub label_col: Option<String>,

    /// Per-feature preprocessing.
    #[arg(long, env = "MMFS_STANDARDIZE", value_enum, default_value = "none")]
    pub standardize: StandardizeArg,

    /// Selection algorithm.
    #[arg(long, env = "MMFS_VARIANT", value_enum, default_value = "maxP")]
    pub variant: VariantArg,

    /// Neighbor count for the kNN graph.
    #[arg(long, env = "MMFS_K", default_value_t = 5)]
    pub k: usize,

    /// Distance smoothing constant.
    #[arg(long, env = "MMFS_ALPHA", default_value_t = 1e-6)]
    pub alpha: f64,

    /// Step horizon for the reachability fold.
    #[arg(long, env = "MMFS_N", default_value_t = 10)]
    pub n: usize,

    /// Regularization weight.
    #[arg(long, env = "MMFS_LAMBDA", default_value_t = 1.0)]
    pub lambda: f64,

    /// Row-norm smoothing constant of the solver.
    #[arg(long, env = "MMFS_EPSILON", default_value_t = 1e-8)]
    pub epsilon: f64,

    /// Relative convergence threshold of the solver.
    #[arg(long, env = "MMFS_TOL", default_value_t = 1e-6)]
    pub tol: f64,

    /// Iteration cap of the solver.
    #[arg(long = "max-iter", env = "MMFS_MAX_ITER", default_value_t = 100)]
    pub max_iter: usize,

    /// Base RNG seed for k-means repeats.
    #[arg(long, env = "MMFS_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output directory (created if missing).
    #[arg(long, env = "MMFS_OUT", default_value = "mmfs_out")]
    pub out: PathBuf,

    /// Worker threads; defaults to all cores.
    #[arg(long, env = "MMFS_JOBS")]
    pub jobs: Option<usize>,

    /// Dump P, V1, V2 and the solver trace as CSV.
    #[arg(long = "dump-matrices", env = "MMFS_DUMP_MATRICES")]
    pub dump_matrices: bool,

    /// Row-sparsity penalty form.
    #[arg(long, env = "MMFS_PENALTY", value_enum, default_value = "squared")]
    pub penalty: PenaltyArg,

    /// Distance-normalization denominator policy.
    #[arg(
        long,
        env = "MMFS_DENOMINATOR",
        value_enum,
        default_value = "neighbors"
    )]
    pub denominator: DenominatorArg,
}

impl CommonArgs {
    pub fn pipeline_params(&self) -> PipelineParams {
        PipelineParams {
            k: self.k,
            alpha: self.alpha,
            n_steps: self.n,
            denominator: self.denominator.into(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
            tol: self.tol,
            max_iter: self.max_iter,
            penalty: self.penalty.into(),
        }
    }

    fn load(&self) -> Result<LabeledDataset, CoreError> {
        let ds = data::load_csv(
            &self.input,
            self.label_col.as_deref(),
            self.orientation.into(),
        )?;
        let standardized = data::standardize(&ds.data, self.standardize.into());
        LabeledDataset::with_label_name(
            standardized,
            ds.labels().map(|l| l.to_vec()),
            ds.label_name().map(|s| s.to_string()),
        )
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Number of features to select.
    #[arg(long, env = "MMFS_S")]
    pub s: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Feature counts to evaluate; defaults to the benchmark grid
    /// (50,100,...,300; 50,80,...,200 when d = 256).
    #[arg(long, env = "MMFS_COUNTS", value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,

    /// k-means repetitions per feature count.
    #[arg(long, env = "MMFS_REPEATS", default_value_t = 20)]
    pub repeats: usize,

    /// NMI normalizer.
    #[arg(
        long = "nmi-norm",
        env = "MMFS_NMI_NORM",
        value_enum,
        default_value = "arithmetic"
    )]
    pub nmi_norm: NmiNormArg,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Number of features to select at each grid cell.
    #[arg(long, env = "MMFS_S")]
    pub s: usize,

    /// k-means repetitions per cell.
    #[arg(long, env = "MMFS_REPEATS", default_value_t = 20)]
    pub repeats: usize,

    /// Lambda grid; defaults to 0.001,0.01,0.1,1,10,100,1000.
    #[arg(long, env = "MMFS_LAMBDAS", value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,

    /// Step-horizon grid; defaults to 5,6,...,20.
    #[arg(long = "ns", env = "MMFS_NS", value_delimiter = ',')]
    pub step_grid: Option<Vec<usize>>,

    /// NMI normalizer.
    #[arg(
        long = "nmi-norm",
        env = "MMFS_NMI_NORM",
        value_enum,
        default_value = "arithmetic"
    )]
    pub nmi_norm: NmiNormArg,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Use the identity in place of the fitted W (debugging aid).
    #[arg(long = "debug-identity-w", env = "MMFS_DEBUG_IDENTITY_W")]
    pub identity_w: bool,
}

/// Lambda candidates of the benchmark protocol.
pub fn default_lambda_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
}

/// Step-horizon candidates of the benchmark protocol.
pub fn default_step_grid() -> Vec<usize> {
    (5..=20).collect()
}

/// Feature-count grid of the benchmark protocol; 256-feature datasets use
/// the 50..200 stride-30 grid, everything else 50..300 stride-50.
pub fn default_feature_counts(d: usize) -> Vec<usize> {
    if d == 256 {
        vec![50, 80, 110, 140, 170, 200]
    } else {
        vec![50, 100, 150, 200, 250, 300]
    }
}

/// CLI-level failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Precondition violations exit with 2, runtime failures with 1.
fn classify(err: CoreError) -> CliError {
    let exit_code = match &err {
        CoreError::KOutOfRange { .. }
        | CoreError::SOutOfRange { .. }
        | CoreError::AlphaNonPositive { .. }
        | CoreError::HorizonZero
        | CoreError::InvalidSolverConfig { .. }
        | CoreError::ClusterCountOutOfRange { .. }
        | CoreError::CountExceedsFeatures { .. }
        | CoreError::ZeroRepeats
        | CoreError::MissingLabels
        | CoreError::EmptySelection
        | CoreError::LabelColumnOrientation => 2,
        _ => 1,
    };
    CliError {
        message: err.to_string(),
        exit_code,
    }
}

fn validation_error(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        exit_code: 2,
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError {
        message: format!("failed to write {}: {source}", path.display()),
        exit_code: 1,
    }
}

fn create_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn file_writer(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| io_error(path, e))?,
    ))
}

/// Writes the nonzero entries of a matrix as row,col,value triplets.
fn dump_matrix_csv(path: &Path, matrix: &Array2<f64>) -> CliResult<()> {
    let mut writer = file_writer(path)?;
    writeln!(writer, "row,col,value").map_err(|e| io_error(path, e))?;
    for ((i, j), &value) in matrix.indexed_iter() {
        if value != 0.0 {
            writeln!(writer, "{i},{j},{value}").map_err(|e| io_error(path, e))?;
        }
    }
    Ok(())
}

fn dump_solver_trace(path: &Path, state: &mmfs_core::SolverState) -> CliResult<()> {
    let mut writer = file_writer(path)?;
    writeln!(writer, "iteration,objective,delta_w_norm").map_err(|e| io_error(path, e))?;
    for (idx, (obj, delta)) in state
        .objective_trace
        .iter()
        .zip(&state.delta_w_trace)
        .enumerate()
    {
        writeln!(writer, "{},{obj},{delta}", idx + 1).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

fn dump_stage_matrices(out: &Path, stages: &PipelineStages) -> CliResult<()> {
    dump_matrix_csv(&out.join("P.csv"), stages.model.transition.values())?;
    dump_matrix_csv(&out.join("V1.csv"), stages.reach_min.values())?;
    dump_matrix_csv(&out.join("V2.csv"), stages.reach_max.values())?;
    Ok(())
}

fn warn_zero_rows(stages: &PipelineStages) {
    for (name, rows) in [("V1", &stages.zero_rows_min), ("V2", &stages.zero_rows_max)] {
        if !rows.is_empty() {
            eprintln!(
                "warning: {name} has {} all-zero row(s) left unnormalized: {rows:?}",
                rows.len()
            );
        }
    }
}

fn write_selection_files(out: &Path, result: &SelectionResult) -> CliResult<()> {
    let json_path = out.join(format!("selection_{}.json", result.variant));
    let mut writer = file_writer(&json_path)?;
    writer
        .write_all(result.to_json().as_bytes())
        .and_then(|_| writer.write_all(b"\n"))
        .map_err(|e| io_error(&json_path, e))?;

    let csv_path = out.join(format!("selection_{}.csv", result.variant));
    let writer = file_writer(&csv_path)?;
    result.write_rank_csv(writer).map_err(classify)?;
    Ok(())
}

fn in_thread_pool<T: Send>(jobs: Option<usize>, task: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(threads) if threads > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("thread pool");
            pool.install(task)
        }
        _ => task(),
    }
}

pub fn cmd_select(args: &SelectArgs) -> CliResult<()> {
    let common = &args.common;
    in_thread_pool(common.jobs, || {
        let dataset = common.load().map_err(classify)?;
        let x = &dataset.data;
        let params = common.pipeline_params();
        let config = common.solver_config();
        let stages = PipelineStages::build(x, &params).map_err(classify)?;
        warn_zero_rows(&stages);

        create_out_dir(&common.out)?;
        let variant: Variant = common.variant.into();
        match variant {
            Variant::MinP => {
                let run = stages.solve_min(x, &config, args.s).map_err(classify)?;
                write_selection_files(&common.out, &run.result)?;
                if common.dump_matrices {
                    dump_solver_trace(&common.out.join("trace_minP.csv"), &run.state)?;
                }
            }
            Variant::MaxP => {
                let run = stages.solve_max(x, &config, args.s).map_err(classify)?;
                write_selection_files(&common.out, &run.result)?;
                if common.dump_matrices {
                    dump_solver_trace(&common.out.join("trace_maxP.csv"), &run.state)?;
                }
            }
            Variant::Inter => {
                let run_min = stages.solve_min(x, &config, args.s).map_err(classify)?;
                let run_max = stages.solve_max(x, &config, args.s).map_err(classify)?;
                let combined = select::select_inter(&run_min.result, &run_max.result, args.s)
                    .map_err(classify)?;
                write_selection_files(&common.out, &combined)?;
                if common.dump_matrices {
                    dump_solver_trace(&common.out.join("trace_minP.csv"), &run_min.state)?;
                    dump_solver_trace(&common.out.join("trace_maxP.csv"), &run_max.state)?;
                }
            }
        }
        if common.dump_matrices {
            dump_stage_matrices(&common.out, &stages)?;
        }
        println!(
            "wrote selection_{variant}.json and selection_{variant}.csv to {}",
            common.out.display()
        );
        Ok(())
    })
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let common = &args.common;
    in_thread_pool(common.jobs, || {
        let dataset = common.load().map_err(classify)?;
        let d = dataset.data.feature_count();
        let counts = match &args.counts {
            Some(counts) => counts.clone(),
            None => {
                let defaults = default_feature_counts(d);
                if defaults.iter().any(|&c| c > d) {
                    return Err(validation_error(format!(
                        "default feature-count grid {defaults:?} exceeds d = {d}; pass --counts"
                    )));
                }
                defaults
            }
        };
        let variant: Variant = common.variant.into();
        let report = eval::benchmark_sweep(
            &dataset,
            variant,
            &counts,
            &common.pipeline_params(),
            &common.solver_config(),
            args.repeats,
            common.seed,
            args.nmi_norm.into(),
        )
        .map_err(classify)?;

        create_out_dir(&common.out)?;
        let path = common.out.join(format!("sweep_{variant}.csv"));
        let writer = file_writer(&path)?;
        report.write_csv(writer).map_err(classify)?;
        println!("wrote {}", path.display());
        Ok(())
    })
}

pub fn cmd_grid(args: &GridArgs) -> CliResult<()> {
    use rayon::prelude::*;

    let common = &args.common;
    in_thread_pool(common.jobs, || {
        let dataset = common.load().map_err(classify)?;
        let truth = dataset
            .label_ids()
            .ok_or_else(|| classify(CoreError::MissingLabels))?;
        let c = dataset.class_count().expect("labels checked");
        let x = &dataset.data;

        let lambdas = args.lambdas.clone().unwrap_or_else(default_lambda_grid);
        let steps = args.step_grid.clone().unwrap_or_else(default_step_grid);
        if lambdas.is_empty() || steps.is_empty() {
            return Err(validation_error("lambda and n grids must be non-empty"));
        }

        let params = common.pipeline_params();
        let variant: Variant = common.variant.into();
        let model = mmfs_core::markov::TransitionModel::build(
            x,
            params.k,
            params.alpha,
            params.denominator,
        )
        .map_err(classify)?;

        // One horizon's reachability lives at a time; the lambda axis fans
        // out in parallel within it. Output stays lambda-major regardless.
        let mut cells: Vec<Vec<String>> = vec![vec![String::new(); steps.len()]; lambdas.len()];
        for (ni, &n) in steps.iter().enumerate() {
            let stages = PipelineStages::from_model(model.clone(), n).map_err(classify)?;
            let column: Result<Vec<String>, CliError> = lambdas
                .par_iter()
                .map(|&lambda| {
                    let config = SolverConfig {
                        lambda,
                        ..common.solver_config()
                    };
                    let selection = match variant {
                        Variant::MinP => {
                            stages
                                .solve_min(x, &config, args.s)
                                .map_err(classify)?
                                .result
                        }
                        Variant::MaxP => {
                            stages
                                .solve_max(x, &config, args.s)
                                .map_err(classify)?
                                .result
                        }
                        Variant::Inter => {
                            let rmin = stages.solve_min(x, &config, args.s).map_err(classify)?;
                            let rmax = stages.solve_max(x, &config, args.s).map_err(classify)?;
                            select::select_inter(&rmin.result, &rmax.result, args.s)
                                .map_err(classify)?
                        }
                    };
                    let stats = eval::evaluate_subset_with(
                        x,
                        &selection.selected,
                        &truth,
                        c,
                        args.repeats,
                        common.seed,
                        args.nmi_norm.into(),
                    )
                    .map_err(classify)?;
                    Ok(format!(
                        "{lambda},{n},{:.2},{:.2}",
                        stats.acc_mean, stats.nmi_mean
                    ))
                })
                .collect();
            for (li, row) in column?.into_iter().enumerate() {
                cells[li][ni] = row;
            }
        }

        create_out_dir(&common.out)?;
        let path = common.out.join(format!("grid_{variant}.csv"));
        let mut writer = file_writer(&path)?;
        writeln!(writer, "lambda,n,acc_mean,nmi_mean").map_err(|e| io_error(&path, e))?;
        for lambda_rows in cells {
            for row in lambda_rows {
                writeln!(writer, "{row}").map_err(|e| io_error(&path, e))?;
            }
        }
        println!("wrote {}", path.display());
        Ok(())
    })
}

pub fn cmd_project(args: &ProjectArgs) -> CliResult<()> {
    let common = &args.common;
    in_thread_pool(common.jobs, || {
        let dataset = common.load().map_err(classify)?;
        let x = &dataset.data;
        let d = x.feature_count();
        let variant: Variant = common.variant.into();

        let w: Array2<f64> = if args.identity_w {
            Array2::eye(d)
        } else {
            let params = common.pipeline_params();
            let config = common.solver_config();
            let stages = PipelineStages::build(x, &params).map_err(classify)?;
            warn_zero_rows(&stages);
            let run = match variant {
                Variant::MinP => stages.solve_min(x, &config, d).map_err(classify)?,
                Variant::MaxP => stages.solve_max(x, &config, d).map_err(classify)?,
                Variant::Inter => {
                    return Err(validation_error(
                        "project requires --variant minP or maxP (inter has no single W)",
                    ))
                }
            };
            if common.dump_matrices {
                create_out_dir(&common.out)?;
                dump_stage_matrices(&common.out, &stages)?;
                let trace_name = format!("trace_{variant}.csv");
                dump_solver_trace(&common.out.join(trace_name), &run.state)?;
            }
            run.state.w
        };

        let projection = x.values().t().dot(&w);
        create_out_dir(&common.out)?;
        let path = common.out.join(format!("coordinates_{variant}.csv"));
        let mut writer = file_writer(&path)?;
        let coord_names: Vec<String> = (0..d).map(|j| format!("c{j}")).collect();
        writeln!(writer, "instance,label,{}", coord_names.join(","))
            .map_err(|e| io_error(&path, e))?;
        for i in 0..x.instance_count() {
            let label = dataset.labels().map_or("", |l| l[i].as_str());
            let coords: Vec<String> = projection.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(writer, "{i},{label},{}", coords.join(","))
                .map_err(|e| io_error(&path, e))?;
        }
        println!("wrote {}", path.display());
        Ok(())
    })
}

/// Runs a parsed command, returning the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Select(args) => cmd_select(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Project(args) => cmd_project(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message);
            err.exit_code
        }
    }
}
