//! Command line front end: generate synthetic instances, fit CP
//! decompositions, print coherence diagnostics, certify the stated error
//! bounds, and run benchmark experiments from config files.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on numerical or I/O
//! failures (the underlying module error is printed to stderr).

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cpd_core::baselines::{als_randomized, hosvd_init, ALSConfig};
use cpd_core::bench::{run_experiment, signal_weights, ExperimentConfig, Method, ModelKind};
use cpd_core::coherence::{coherence_report, snr_and_rates, CoherenceReport, RateParams};
use cpd_core::cpca::{cpca_general, cpca_symmetric};
use cpd_core::error::Error;
use cpd_core::ico::{ico_general, ico_symmetric, FitTrace, ICOConfig};
use cpd_core::io::{
    load_decomposition, load_ground_truth, load_tensor, save_json, save_tensor, GroundTruth,
};
use cpd_core::model::{
    covariance_tensor, gen_basis, gen_noisy_cp, gen_spiked_samples, CPDecomposition,
};
use cpd_core::propcheck::{check_proposition, CheckReport, CHECKED_PROPOSITIONS};
use cpd_core::rng::{StreamRng, RNG_DESCRIPTOR};
use cpd_core::tensor::{DenseTensor, Matrix};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cpd",
    version,
    about = "Composite PCA and concurrent-orthogonalization CP decomposition toolkit"
)]
struct Cli {
    /// Master seed for randomized commands (bench: overrides the config seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count; overrides the CPD_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tensor together with its ground truth.
    Generate(GenerateArgs),
    /// Fit a CP decomposition to a tensor file.
    Fit(FitArgs),
    /// Coherence diagnostics and rate quantities for a ground-truth file.
    Diagnose(DiagnoseArgs),
    /// Monte Carlo certification of the implemented error bounds.
    Verify(VerifyArgs),
    /// Run a benchmark experiment from a TOML config file.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum ModelArg {
    SpikedCovariance,
    NoisyCp,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::SpikedCovariance => ModelKind::SpikedCovariance,
            ModelArg::NoisyCp => ModelKind::NoisyCp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Sample-space mode sizes, comma separated (spiked tensors get order 2K).
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long)]
    rank: usize,
    /// Pairwise coherence of every ground-truth factor matrix.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Sample count (spiked model only).
    #[arg(long, default_value_t = 400)]
    samples: usize,
    /// Top signal strength: w_max for spiked, lambda_max for noisy-cp.
    #[arg(long, default_value_t = 10.0)]
    signal: f64,
    #[arg(long, default_value_t = 1.25)]
    signal_ratio: f64,
    /// Explicit CP weights (descending, comma separated); overrides --signal.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// RNG sub-stream identifying this instance.
    #[arg(long, default_value_t = 1)]
    stream: u64,
    /// Stem for the output files <name>.tns and <name>-truth.json.
    #[arg(long, default_value = "instance")]
    name: String,
}

#[derive(Args)]
struct FitArgs {
    /// Tensor file in the text format.
    #[arg(long)]
    input: PathBuf,
    /// One of: cpca, cpca+ico, cpca+ico1, ico, hosvd, als.
    #[arg(long)]
    method: String,
    #[arg(long)]
    rank: usize,
    /// Treat the tensor as pairwise symmetric (mode K+k repeats mode k).
    #[arg(long)]
    symmetric: bool,
    /// Warm-start decomposition JSON; required by --method ico.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Decomposition output path (default: <out-dir>/<stem>-<method>.json).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the per-sweep trace CSV next to the decomposition.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value_t = 1e-8)]
    ico_tolerance: f64,
    #[arg(long, default_value_t = 50)]
    ico_sweeps: usize,
    /// Ridge added to refinement Grams before inversion.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value_t = 30)]
    als_restarts: usize,
    #[arg(long, default_value_t = 20)]
    als_power_iters: usize,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Ground-truth JSON produced by generate.
    #[arg(long)]
    truth: PathBuf,
    /// 1-based sample-space modes for the grouped coherence (default: all).
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    /// Warm-start error entering the rate quantities; default is the
    /// a-priori initialization rate, capped below 1.
    #[arg(long)]
    psi0: Option<f64>,
    /// Contraction-margin constant entering rho.
    #[arg(long, default_value_t = 3.0)]
    c0: f64,
    /// Report path (default: <out-dir>/<truth stem>-diagnostics.json).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Proposition number to certify; repeatable. Default: all of them.
    #[arg(long = "prop")]
    props: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Report path (default: <out-dir>/verify-report.<format>).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment description in TOML.
    #[arg(long)]
    config: PathBuf,
    /// Row file format; the summary is always JSON.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    configure_threads(cli.threads);
    let result = match &cli.command {
        Command::Generate(args) => run_generate(&cli, args),
        Command::Fit(args) => run_fit(&cli, args),
        Command::Diagnose(args) => run_diagnose(&cli, args),
        Command::Verify(args) => run_verify(&cli, args),
        Command::Bench(args) => run_bench(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Run(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("CPD_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        // failure here only means a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn ensure_out_dir(cli: &Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::Run(e.into()))
}

fn seed_of(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(1)
}

fn run_generate(cli: &Cli, args: &GenerateArgs) -> CliResult {
    ensure_out_dir(cli)?;
    let model: ModelKind = args.model.into();
    if args.dims.is_empty() {
        return Err(usage("--dims needs at least one mode size"));
    }
    if model == ModelKind::SpikedCovariance && args.samples == 0 {
        return Err(usage("--samples must be at least 1 for the spiked model"));
    }
    let weights = match &args.weights {
        Some(w) => w.clone(),
        None => {
            if !(args.signal > 0.0) {
                return Err(usage("--signal must be positive"));
            }
            signal_weights(model, args.signal, args.rank, args.signal_ratio)
        }
    };
    let seed = seed_of(cli);
    let mut rng = StreamRng::substream(seed, args.stream);
    let factors: Vec<Matrix> = args
        .dims
        .iter()
        .map(|&d| gen_basis(d, args.rank, args.theta, &mut rng))
        .collect::<Result<_, _>>()?;
    let cp = CPDecomposition::new(weights, factors, model == ModelKind::SpikedCovariance)?;
    let tensor = match model {
        ModelKind::SpikedCovariance => {
            let batch = gen_spiked_samples(&cp, args.samples, args.sigma, &mut rng)?;
            covariance_tensor(&batch)?
        }
        ModelKind::NoisyCp => gen_noisy_cp(&cp, args.sigma, &mut rng)?,
    };
    let tensor_path = cli.out_dir.join(format!("{}.tns", args.name));
    let truth_path = cli.out_dir.join(format!("{}-truth.json", args.name));
    save_tensor(&tensor_path, &tensor)?;
    save_json(
        &truth_path,
        &GroundTruth {
            decomposition: cp,
            model,
            sigma: args.sigma,
            samples: match model {
                ModelKind::SpikedCovariance => args.samples,
                ModelKind::NoisyCp => 0,
            },
            seed,
            stream: args.stream,
            rng: RNG_DESCRIPTOR.into(),
        },
    )?;
    println!(
        "wrote {} (order {}) and {}",
        tensor_path.display(),
        tensor.order(),
        truth_path.display()
    );
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tensor".into())
}

fn run_fit(cli: &Cli, args: &FitArgs) -> CliResult {
    ensure_out_dir(cli)?;
    let tensor = load_tensor(&args.input)?;
    let r = args.rank;
    let ico_cfg = ICOConfig {
        tolerance: args.ico_tolerance,
        max_sweeps: args.ico_sweeps,
        ridge: args.ridge,
        trace: true,
    };
    let cpca_fit = |t: &DenseTensor| {
        if args.symmetric {
            cpca_symmetric(t, r)
        } else {
            cpca_general(t, r, None)
        }
    };
    let refine = |t: &DenseTensor, init: &[Matrix], cfg: &ICOConfig| {
        if args.symmetric {
            ico_symmetric(t, r, init, cfg)
        } else {
            ico_general(t, r, init, cfg)
        }
    };
    let (estimate, trace): (CPDecomposition, Option<FitTrace>) = match args.method.as_str() {
        "cpca" => (cpca_fit(&tensor)?.estimate, None),
        "cpca+ico" | "cpca+ico1" => {
            let init = cpca_fit(&tensor)?.estimate.factors().to_vec();
            let cfg = ICOConfig {
                max_sweeps: if args.method == "cpca+ico1" {
                    1
                } else {
                    ico_cfg.max_sweeps
                },
                ..ico_cfg
            };
            let (est, trace) = refine(&tensor, &init, &cfg)?;
            (est, Some(trace))
        }
        "ico" => {
            let init_path = args
                .init
                .as_ref()
                .ok_or_else(|| usage("--method ico needs --init <decomposition.json>"))?;
            let init = load_decomposition(init_path)?;
            let (est, trace) = refine(&tensor, init.factors(), &ico_cfg)?;
            (est, Some(trace))
        }
        "hosvd" => (hosvd_init(&tensor, r)?, None),
        "als" => {
            let cfg = ALSConfig {
                restarts: args.als_restarts,
                power_iters: args.als_power_iters,
                ..ALSConfig::default()
            };
            let mut rng = StreamRng::from_seed(seed_of(cli));
            let (est, trace) = als_randomized(&tensor, r, &cfg, &mut rng)?;
            (est, Some(trace))
        }
        other => {
            return Err(usage(format!(
                "unknown method {other:?}; known methods are cpca, cpca+ico, \
                 cpca+ico1, ico, hosvd, als"
            )))
        }
    };

    let stem = file_stem(&args.input);
    let out_path = args
        .output
        .clone()
        .unwrap_or_else(|| cli.out_dir.join(format!("{stem}-{}.json", args.method)));
    save_json(&out_path, &estimate)?;
    let weights: Vec<String> = estimate
        .weights()
        .iter()
        .map(|w| format!("{w:.6}"))
        .collect();
    match &trace {
        Some(t) => println!(
            "{}: weights [{}], {} sweep(s), stop {:?} -> {}",
            args.method,
            weights.join(", "),
            t.sweeps_used,
            t.stop,
            out_path.display()
        ),
        None => println!(
            "{}: weights [{}] -> {}",
            args.method,
            weights.join(", "),
            out_path.display()
        ),
    }
    if args.trace {
        if let Some(t) = &trace {
            let trace_path = cli
                .out_dir
                .join(format!("{stem}-{}-trace.csv", args.method));
            std::fs::write(&trace_path, t.to_csv()).map_err(Error::from)?;
            println!("trace -> {}", trace_path.display());
        }
    }
    Ok(())
}

/// Rate quantities for a spiked ground truth; None when the model or order
/// does not support them.
fn rates_json(
    truth: &GroundTruth,
    report: &CoherenceReport,
    psi0_arg: Option<f64>,
    c0: f64,
) -> Result<Option<serde_json::Value>, Error> {
    if truth.model != ModelKind::SpikedCovariance || truth.decomposition.sample_order() < 2 {
        return Ok(None);
    }
    let dims: Vec<usize> = truth
        .decomposition
        .factors()
        .iter()
        .map(|a| a.rows())
        .collect();
    let delta_max = report.delta_k.iter().cloned().fold(0.0, f64::max);
    let mut params = RateParams {
        lambdas: truth.decomposition.weights(),
        sigma: truth.sigma,
        n: truth.samples.max(1),
        dims: &dims,
        psi0: psi0_arg.unwrap_or(0.5).clamp(1e-9, 0.999),
        c0,
        delta_max,
    };
    let mut bundle = snr_and_rates(&params)?;
    if psi0_arg.is_none() {
        // self-consistent default: feed the a-priori rate back in
        params.psi0 = bundle.r0.clamp(1e-9, 0.99);
        bundle = snr_and_rates(&params)?;
    }
    let mut value = bundle.to_json();
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("psi0_used".into(), serde_json::json!(params.psi0));
    }
    Ok(Some(value))
}

fn run_diagnose(cli: &Cli, args: &DiagnoseArgs) -> CliResult {
    ensure_out_dir(cli)?;
    let truth = load_ground_truth(&args.truth)?;
    let factors = truth.decomposition.factors();
    let subset: Vec<usize> = match &args.subset {
        Some(s) => s.clone(),
        None => (1..=factors.len()).collect(),
    };
    let report = coherence_report(factors, &subset)?;
    let rates = rates_json(&truth, &report, args.psi0, args.c0)?;
    let mut doc = serde_json::json!({
        "model": truth.model.to_string(),
        "coherence": report,
    });
    if let Some(r) = &rates {
        doc["rates"] = r.clone();
    } else {
        doc["rates_note"] =
            serde_json::json!("rate formulas apply to spiked-covariance truths with K >= 2");
    }
    let out_path = args.output.clone().unwrap_or_else(|| {
        cli.out_dir
            .join(format!("{}-diagnostics.json", file_stem(&args.truth)))
    });
    save_json(&out_path, &doc)?;
    println!(
        "theta {:.6}, delta {:.6}, subset {:?}, delta_S {:.6} -> {}",
        report.theta,
        report.delta,
        report.subset,
        report.delta_s,
        out_path.display()
    );
    Ok(())
}

fn reports_to_csv(reports: &[CheckReport]) -> String {
    let mut s = String::from("proposition,pass,trials,compliant,vacuous,min_margin,master_seed\n");
    for r in reports {
        let margin = r
            .min_margin
            .map(|m| m.to_string())
            .unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.proposition,
            if r.pass { "PASS" } else { "FAIL" },
            r.trials,
            r.compliant,
            r.skipped,
            margin,
            r.master_seed
        ));
    }
    s
}

fn run_verify(cli: &Cli, args: &VerifyArgs) -> CliResult {
    ensure_out_dir(cli)?;
    let ids: Vec<usize> = if args.props.is_empty() {
        CHECKED_PROPOSITIONS.to_vec()
    } else {
        for &p in &args.props {
            if !CHECKED_PROPOSITIONS.contains(&p) {
                return Err(usage(format!(
                    "proposition {p} has no certification; available: {CHECKED_PROPOSITIONS:?}"
                )));
            }
        }
        args.props.clone()
    };
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let mut rng = StreamRng::from_seed(seed_of(cli));
    let mut reports = Vec::new();
    for &id in &ids {
        let report = check_proposition(id, args.trials, &mut rng)?;
        println!("{}", report.summary_line());
        reports.push(report);
    }
    let out_path = args.output.clone().unwrap_or_else(|| {
        cli.out_dir.join(match args.format {
            FormatArg::Json => "verify-report.json",
            FormatArg::Csv => "verify-report.csv",
        })
    });
    match args.format {
        FormatArg::Json => save_json(&out_path, &reports)?,
        FormatArg::Csv => std::fs::write(&out_path, reports_to_csv(&reports)).map_err(Error::from)?,
    }
    println!("report -> {}", out_path.display());
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Run(Error::Numerical(format!(
            "{failed} certification(s) failed; see {}",
            out_path.display()
        ))));
    }
    Ok(())
}

fn run_bench(cli: &Cli, args: &BenchArgs) -> CliResult {
    ensure_out_dir(cli)?;
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let methods: Vec<Method> = cfg.parsed_methods()?;
    let out = run_experiment(&cfg)?;
    let rows_path = cli.out_dir.join(match args.format {
        FormatArg::Csv => format!("{}-rows.csv", cfg.name),
        FormatArg::Json => format!("{}-rows.json", cfg.name),
    });
    match args.format {
        FormatArg::Csv => {
            std::fs::write(&rows_path, out.csv()?).map_err(Error::from)?;
        }
        FormatArg::Json => save_json(&rows_path, &out.rows)?,
    }
    let summary_path = cli.out_dir.join(format!("{}-summary.json", cfg.name));
    std::fs::write(&summary_path, out.summary_json()? + "\n").map_err(Error::from)?;
    println!(
        "{}: {} rows over {} methods -> {}",
        cfg.name,
        out.rows.len(),
        methods.len(),
        rows_path.display()
    );
    for ord in &out.summary.orderings {
        println!(
            "signal {}: best-to-worst by median log10 error: {}",
            ord.signal,
            ord.methods_by_median_log10_error.join(" < ")
        );
    }
    println!("summary -> {}", summary_path.display());
    Ok(())
}
