//! Command line workflow for extremal graphical models: ingest CSV
//! observations, transform margins, estimate variograms, learn or load a
//! graph, complete the parameter matrix on it and emit reports.
//!
//! Exit codes: 0 success, 1 file/parse/configuration error, 2 the
//! iterative completion exhausted its budget, 3 domain errors (invalid or
//! infeasible inputs).

use hrx_cli::{formats, reports};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use hrx_core::{
    check_variogram, chi_of_gamma, complete_block, complete_decomposable, complete_general,
    detect_noncompletable, empirical_chi, empirical_variogram, fit_graph_structured,
    gamma_of_theta, is_block_graph, is_connected, is_decomposable, learn_tree, log_mass_l,
    pareto_loglik, rank_transform, restrict_to_graph, sample_pareto, surrogate_loglik,
    CompletionReport, CoverStrategy, ExceedanceSample, Feasibility, FitMode, IterationOptions,
    MarginTag, PartialVariogram, SamplerConfig, SymMatrix, UndirectedGraph, VariogramMatrix,
    DEFAULT_CND_TOL, DEFAULT_PSD_TOL,
};
use reports::{
    matrix_to_rows, CompletionReportDoc, FitReportDoc, SimulateSidecarDoc, SplitReportDoc,
    SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(name = "hrx", version, about = "Hüsler–Reiss extremal graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Complete a partially specified variogram matrix on a graph.
    Complete(CompleteArgs),
    /// Fit a graph-structured model to CSV observations.
    Fit(FitArgs),
    /// Draw exact samples from a parameter matrix.
    Simulate(SimulateArgs),
    /// Empirical extremal correlation table of CSV observations.
    Chi(ChiArgs),
    /// Rank-transform CSV observations to standard exponential margins.
    Transform(TransformArgs),
    /// Learn a minimum spanning tree from CSV observations.
    LearnTree(LearnTreeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CoverArg {
    Auto,
    OnePerNonedge,
    FillIn,
}

impl CoverArg {
    fn to_option(self) -> Option<CoverStrategy> {
        match self {
            CoverArg::Auto => None,
            CoverArg::OnePerNonedge => Some(CoverStrategy::OnePerNonedge),
            CoverArg::FillIn => Some(CoverStrategy::FillIn),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Cliquewise,
}

#[derive(Args)]
struct CompletionOpts {
    /// Convergence threshold on precision entries outside the graph.
    #[arg(long, default_value_t = 1e-6)]
    theta_tol: f64,
    /// Sweep budget of the cyclic algorithm.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Decomposable cover construction for non-decomposable graphs.
    #[arg(long, value_enum, default_value_t = CoverArg::Auto)]
    cover: CoverArg,
}

impl CompletionOpts {
    fn to_options(&self) -> IterationOptions {
        IterationOptions {
            theta_tol: self.theta_tol,
            max_iter: self.max_iter,
            cover: self.cover.to_option(),
        }
    }
}

#[derive(Args)]
struct CompleteArgs {
    /// Matrix file; `?` marks unspecified entries.
    #[arg(long)]
    matrix: PathBuf,
    /// Edge list file (1-based `i j` lines).
    #[arg(long)]
    graph: PathBuf,
    /// Fully specified initial matrix for non-decomposable graphs when the
    /// input itself is partial.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Output prefix; defaults to the matrix path without extension.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    #[command(flatten)]
    opts: CompletionOpts,
}

#[derive(Args)]
struct FitArgs {
    /// CSV observation table with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Graph: edge-list path, `mst`, or `complete`.
    #[arg(long)]
    graph: String,
    /// Probability threshold in (0, 1).
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    /// Hold out the tail of the data: a fraction in (0,1) or an absolute
    /// number of training rows. Enables out-of-sample likelihoods.
    #[arg(long)]
    split: Option<String>,
    /// Seed for the Monte-Carlo normalizing mass (fallback: EGK_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo proposals for the normalizing mass.
    #[arg(long, default_value_t = 100_000)]
    mc: usize,
    /// Output prefix; defaults to the data path without extension.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    #[command(flatten)]
    opts: CompletionOpts,
}

#[derive(Args)]
struct SimulateArgs {
    /// Parameter matrix file: a variogram (zero diagonal) or a precision
    /// matrix (zero row sums), auto-detected.
    #[arg(long)]
    params: PathBuf,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    /// RNG seed (fallback: EGK_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; a `.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ChiArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnTreeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure category carrying the exit code.
enum Failure {
    /// File, parse or configuration problems: exit 1.
    Usage(anyhow::Error),
    /// Domain errors (invalid or infeasible inputs): exit 3.
    Domain(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Domain(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Domain(e) => e,
        }
    }
}

trait UsageExt<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T> UsageExt<T> for Result<T> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(Failure::Usage)
    }
}

trait DomainExt<T> {
    fn domain(self) -> Result<T, Failure>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> DomainExt<T> for Result<T, E> {
    fn domain(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Domain(anyhow::Error::new(e)))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Complete(args) => cmd_complete(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Chi(args) => cmd_chi(&args),
        Command::Transform(args) => cmd_transform(&args),
        Command::LearnTree(args) => cmd_learn_tree(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("EGK_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .with_context(|| format!("EGK_SEED holds '{text}', expected an integer"))
            .usage(),
        Err(_) => Ok(0),
    }
}

fn out_prefix(explicit: &Option<PathBuf>, input: &Path) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| input.with_extension(""))
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn write_json(path: &Path, doc: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("report serializes");
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .usage()
}

fn validate_variogram(m: DMatrix<f64>) -> Result<VariogramMatrix, Failure> {
    let sym = SymMatrix::new(m).domain()?;
    check_variogram(&sym, DEFAULT_CND_TOL).domain()
}

fn cmd_complete(args: &CompleteArgs) -> Result<u8, Failure> {
    let parsed = formats::read_matrix(&args.matrix).usage()?;
    let graph = formats::read_graph(&args.graph, Some(parsed.d)).usage()?;
    if !is_connected(&graph) {
        return Err(Failure::Domain(anyhow!("graph is not connected")));
    }

    let (partial, init): (PartialVariogram, Option<VariogramMatrix>) = if parsed.fully_specified()
    {
        let gamma = validate_variogram(parsed.to_dense().usage()?)?;
        let partial = restrict_to_graph(&gamma, &graph).domain()?;
        (partial, Some(gamma))
    } else {
        let partial = parsed.to_partial().usage()?;
        let init = match &args.init {
            Some(path) => {
                let m = formats::read_matrix(path).usage()?.to_dense().usage()?;
                Some(validate_variogram(m)?)
            }
            None => None,
        };
        (partial, init)
    };

    let prefix = out_prefix(&args.out_prefix, &args.matrix);
    let gamma_path = prefixed(&prefix, "_gamma.txt");
    let theta_path = prefixed(&prefix, "_theta.txt");
    let report_path = prefixed(&prefix, "_report.json");

    if let Feasibility::Infeasible {
        i,
        j,
        lower,
        upper,
        value,
    } = detect_noncompletable(&partial, &graph)
    {
        let doc = CompletionReportDoc {
            schema_version: SCHEMA_VERSION.into(),
            command: "complete".into(),
            dimension: partial.dim(),
            edge_count: graph.num_edges(),
            algorithm: "screening".into(),
            converged: false,
            iterations: 0,
            max_nonedge_theta: f64::NAN,
            theta_tol: args.opts.theta_tol,
            feasibility: Some(format!(
                "infeasible: sqrt of entry ({},{}) is {:.6}, but the specified paths \
                 constrain it to [{:.6}, {:.6}]",
                i + 1,
                j + 1,
                value,
                lower,
                upper
            )),
            kl_trace: Vec::new(),
            gamma_path: gamma_path.display().to_string(),
            theta_path: theta_path.display().to_string(),
        };
        write_json(&report_path, &doc)?;
        eprintln!("error: the specified entries admit no completion (see report)");
        return Ok(3);
    }

    let (algorithm, report): (&str, CompletionReport) = if is_block_graph(&graph) {
        ("block-path-sums", complete_block(&partial, &graph).domain()?)
    } else if is_decomposable(&graph) {
        (
            "decomposable-recursion",
            complete_decomposable(&partial, &graph).domain()?,
        )
    } else {
        let init = init.ok_or_else(|| {
            Failure::Domain(anyhow!(
                "the graph is not decomposable; supply a fully specified matrix or --init"
            ))
        })?;
        (
            "cyclic-cover",
            complete_general(&partial, &graph, &init, &args.opts.to_options()).domain()?,
        )
    };

    formats::write_matrix(&gamma_path, report.gamma.matrix()).usage()?;
    formats::write_matrix(&theta_path, report.theta.matrix()).usage()?;
    let doc = CompletionReportDoc {
        schema_version: SCHEMA_VERSION.into(),
        command: "complete".into(),
        dimension: partial.dim(),
        edge_count: graph.num_edges(),
        algorithm: algorithm.into(),
        converged: report.converged,
        iterations: report.iterations,
        max_nonedge_theta: report.max_nonedge_theta,
        theta_tol: args.opts.theta_tol,
        feasibility: None,
        kl_trace: report.kl_trace.clone(),
        gamma_path: gamma_path.display().to_string(),
        theta_path: theta_path.display().to_string(),
    };
    write_json(&report_path, &doc)?;
    Ok(if report.converged { 0 } else { 2 })
}

fn parse_split(text: &str, n: usize) -> Result<usize> {
    let value: f64 = text
        .parse()
        .with_context(|| format!("--split '{text}' is not a number"))?;
    let n_train = if value > 0.0 && value < 1.0 {
        (value * n as f64).floor() as usize
    } else if value >= 1.0 && value.fract() == 0.0 {
        value as usize
    } else {
        bail!("--split must be a fraction in (0,1) or a row count");
    };
    if n_train < 2 || n_train >= n {
        bail!("--split leaves {n_train} training rows out of {n}");
    }
    Ok(n_train)
}

fn cmd_fit(args: &FitArgs) -> Result<u8, Failure> {
    if !(0.0 < args.p && args.p < 1.0) {
        return Err(Failure::Usage(anyhow!(
            "--p must lie strictly between 0 and 1"
        )));
    }
    let (names, data, dropped) = formats::read_csv(&args.data).usage()?;
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rows with missing values");
    }
    let n = data.nrows();
    let d = data.ncols();
    let n_train = match &args.split {
        Some(text) => parse_split(text, n).usage()?,
        None => n,
    };
    let train_raw = ExceedanceSample::new(data.rows(0, n_train).into_owned(), MarginTag::Raw);
    let train = rank_transform(&train_raw).domain()?;
    let est = empirical_variogram(&train, args.p).domain()?;

    let graph = match args.graph.as_str() {
        "mst" => learn_tree(&est),
        "complete" => UndirectedGraph::complete(d),
        path => formats::read_graph(Path::new(path), Some(d)).usage()?,
    };
    if !is_connected(&graph) {
        return Err(Failure::Domain(anyhow!("graph is not connected")));
    }

    let mode = match args.mode {
        ModeArg::Full => FitMode::Full,
        ModeArg::Cliquewise => FitMode::Cliquewise,
    };
    let report =
        fit_graph_structured(&train, &graph, args.p, mode, &args.opts.to_options()).domain()?;

    let chi_emp = empirical_chi(&train, args.p).domain()?;
    let chi_fit = chi_of_gamma(&report.gamma);
    let surrogate_train = surrogate_loglik(&est.gamma_hat, &report.theta);

    let split_doc = if n_train < n {
        let seed = resolve_seed(args.seed)?;
        let validation_raw =
            ExceedanceSample::new(data.rows(n_train, n - n_train).into_owned(), MarginTag::Raw);
        let validation = rank_transform(&validation_raw).domain()?;
        let est_val = empirical_variogram(&validation, args.p).domain()?;
        let surrogate_val = surrogate_loglik(&est_val.gamma_hat, &report.theta);

        // Peaks over the per-column p-quantile, shifted to the origin.
        let n_val = validation.len();
        let m = ((n_val as f64) * (1.0 - args.p)).floor().max(1.0) as usize;
        let mut thresholds = vec![0.0f64; d];
        for (c, threshold) in thresholds.iter_mut().enumerate() {
            let mut column: Vec<f64> = validation.values().column(c).iter().copied().collect();
            column.sort_by(f64::total_cmp);
            *threshold = column[n_val - m];
        }
        let mut exceed_rows: Vec<Vec<f64>> = Vec::new();
        for r in 0..n_val {
            let row: Vec<f64> = (0..d)
                .map(|c| validation.values()[(r, c)] - thresholds[c])
                .collect();
            if row.iter().any(|&v| v > 0.0) {
                exceed_rows.push(row);
            }
        }
        let mass = log_mass_l(&report.gamma, args.mc, seed);
        let exceedances = ExceedanceSample::new(
            DMatrix::from_fn(exceed_rows.len(), d, |i, j| exceed_rows[i][j]),
            MarginTag::ExactPareto,
        );
        let pareto_val = pareto_loglik(&exceedances, &report.gamma, mass.log_mass).domain()?;
        Some(SplitReportDoc {
            n_train,
            n_validation: n_val,
            surrogate_loglik_validation: surrogate_val,
            pareto_loglik_validation: pareto_val,
            validation_exceedances: exceedances.len(),
            log_mass: mass.log_mass,
            log_mass_std_error: mass.std_error / mass.mass,
            mc_samples: args.mc,
            seed,
        })
    } else {
        None
    };

    let prefix = out_prefix(&args.out_prefix, &args.data);
    let gamma_hat_path = prefixed(&prefix, "_gamma_hat.txt");
    let gamma_path = prefixed(&prefix, "_gamma.txt");
    let theta_path = prefixed(&prefix, "_theta.txt");
    let graph_path = prefixed(&prefix, "_graph.txt");
    let report_path = prefixed(&prefix, "_report.json");
    formats::write_matrix(&gamma_hat_path, est.gamma_hat.matrix()).usage()?;
    formats::write_matrix(&gamma_path, report.gamma.matrix()).usage()?;
    formats::write_matrix(&theta_path, report.theta.matrix()).usage()?;
    formats::write_graph(&graph_path, &graph).usage()?;

    let doc = FitReportDoc {
        schema_version: SCHEMA_VERSION.into(),
        command: "fit".into(),
        dimension: d,
        n_observations: n,
        dropped_rows: dropped,
        p: args.p,
        graph_spec: args.graph.clone(),
        mode: match mode {
            FitMode::Full => "full".into(),
            FitMode::Cliquewise => "cliquewise".into(),
        },
        edge_count: graph.num_edges(),
        converged: report.converged,
        iterations: report.iterations,
        max_nonedge_theta: report.max_nonedge_theta,
        surrogate_loglik_train: surrogate_train,
        split: split_doc,
        variable_names: names,
        chi_empirical: matrix_to_rows(&chi_emp),
        chi_fitted: matrix_to_rows(&chi_fit),
        gamma_hat_path: gamma_hat_path.display().to_string(),
        gamma_path: gamma_path.display().to_string(),
        theta_path: theta_path.display().to_string(),
        graph_path: graph_path.display().to_string(),
    };
    write_json(&report_path, &doc)?;
    Ok(if report.converged { 0 } else { 2 })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let parsed = formats::read_matrix(&args.params).usage()?;
    let dense = parsed.to_dense().usage()?;
    let d = parsed.d;
    let diag_zero = (0..d).all(|i| dense[(i, i)] == 0.0);
    let gamma = if diag_zero {
        validate_variogram(dense)?
    } else {
        let sym = SymMatrix::new(dense).domain()?;
        let theta = hrx_core::check_precision(&sym, DEFAULT_PSD_TOL).domain()?;
        gamma_of_theta(&theta)
    };
    let seed = resolve_seed(args.seed)?;
    let cfg = SamplerConfig::new(seed);
    let (sample, acceptance) = sample_pareto(&gamma, args.n, &cfg).domain()?;
    let headers: Vec<String> = (1..=d).map(|i| format!("V{i}")).collect();
    formats::write_csv(&args.out, &headers, sample.values()).usage()?;
    let sidecar = SimulateSidecarDoc {
        schema_version: SCHEMA_VERSION.into(),
        command: "simulate".into(),
        dimension: d,
        n: args.n,
        seed,
        acceptance_rate: acceptance,
        mass_estimate: d as f64 * acceptance,
        log_mass_estimate: (d as f64 * acceptance).ln(),
        csv_path: args.out.display().to_string(),
    };
    let sidecar_path = args.out.with_extension("json");
    write_json(&sidecar_path, &sidecar)?;
    Ok(0)
}

fn cmd_chi(args: &ChiArgs) -> Result<u8, Failure> {
    if !(0.0 < args.p && args.p < 1.0) {
        return Err(Failure::Usage(anyhow!(
            "--p must lie strictly between 0 and 1"
        )));
    }
    let (_, data, dropped) = formats::read_csv(&args.data).usage()?;
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rows with missing values");
    }
    let sample = ExceedanceSample::new(data, MarginTag::Raw);
    let chi = empirical_chi(&sample, args.p).domain()?;
    formats::write_matrix(&args.out, &chi).usage()?;
    Ok(0)
}

fn cmd_transform(args: &TransformArgs) -> Result<u8, Failure> {
    let (names, data, dropped) = formats::read_csv(&args.data).usage()?;
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rows with missing values");
    }
    let sample = ExceedanceSample::new(data, MarginTag::Raw);
    let transformed = rank_transform(&sample).domain()?;
    formats::write_csv(&args.out, &names, transformed.values()).usage()?;
    Ok(0)
}

fn cmd_learn_tree(args: &LearnTreeArgs) -> Result<u8, Failure> {
    if !(0.0 < args.p && args.p < 1.0) {
        return Err(Failure::Usage(anyhow!(
            "--p must lie strictly between 0 and 1"
        )));
    }
    let (_, data, dropped) = formats::read_csv(&args.data).usage()?;
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rows with missing values");
    }
    let sample = ExceedanceSample::new(data, MarginTag::Raw);
    let transformed = rank_transform(&sample).domain()?;
    let est = empirical_variogram(&transformed, args.p).domain()?;
    let tree = learn_tree(&est);
    formats::write_graph(&args.out, &tree).usage()?;
    Ok(0)
}
