use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use binsense::bench::{self, Algorithm, ExperimentConfig, MatrixSource, Plan, Report, Sparsity};
use binsense::construction::{find_dmax, gaussian_matrix, peg_with_girth, random_regular, PegConfig, TieBreak};
use binsense::recovery::{relative_error, Operator, SensingOperator, SparseSignal};
use binsense::spectral::{empirical_ric, offdiag_proportion_stats};
use binsense::theory::{coherence_k_bound, lemma1_rho, ratio_to_f64, ric_rip1, ric_rip2, ric_rip3, SparsityBound};
use binsense::SensingMatrix;

#[derive(Parser)]
#[command(name = "binsense", version, about = "Sparse binary sensing matrices and recovery benchmarks")]
struct Cli {
    /// Worker threads (0 = one per core). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sensing matrix and write it with a JSON summary.
    Construct(ConstructArgs),
    /// Girth, correlation spectrum and RIC reports for a matrix file.
    Analyze(AnalyzeArgs),
    /// Recover one signal with one solver.
    Recover(RecoverArgs),
    /// Monte Carlo recovery experiment; writes CSV and JSON.
    Bench(BenchArgs),
    /// Largest degree with girth >= 6, practical and theoretical.
    Dmax(DmaxArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Peg,
    Random,
    Gaussian,
}

#[derive(Args)]
struct ConstructArgs {
    kind: Kind,
    #[arg(short = 'M')]
    m: usize,
    #[arg(short = 'N')]
    n: usize,
    #[arg(short = 'd')]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sparsity levels for the theoretical RIC values in the summary.
    #[arg(short = 'k', value_delimiter = ',', default_values_t = [2usize, 10, 50])]
    k: Vec<usize>,
    /// Required girth for PEG; 0 accepts any.
    #[arg(long, default_value_t = 6)]
    min_girth: usize,
    /// Randomized PEG restarts before giving up.
    #[arg(long, default_value_t = 20)]
    retries: usize,
    #[arg(short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    input: PathBuf,
    /// Subset sizes for the sampled eigenvalue and proportion reports.
    #[arg(short = 'k', value_delimiter = ',', default_values_t = [2usize, 4, 8, 12])]
    k: Vec<usize>,
    /// Samples per subset size.
    #[arg(short = 's', default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Omp,
    Iht,
    Sp,
    Bp,
}

impl Algo {
    fn algorithm(self) -> Algorithm {
        match self {
            Algo::Omp => Algorithm::omp(),
            Algo::Iht => Algorithm::iht(),
            Algo::Sp => Algorithm::sp(),
            Algo::Bp => Algorithm::bp(),
        }
    }
}

#[derive(Args)]
struct RecoverArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "omp")]
    algo: Algo,
    /// Sparsity of the drawn signal (ignored with --signal).
    #[arg(short = 'k', default_value_t = 10)]
    k: usize,
    /// Signal as JSON `{"n": .., "support": [..], "values": [..]}`.
    #[arg(long)]
    signal: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Writes the estimate as JSON.
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON experiment config, or a report envelope to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    matrix: Option<Kind>,
    /// Matrix file; overrides --matrix.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(short = 'M')]
    m: Option<usize>,
    #[arg(short = 'N')]
    n: Option<usize>,
    #[arg(short = 'd')]
    d: Option<usize>,
    #[arg(long, value_enum)]
    algo: Option<Algo>,
    /// `40`, a range `30:50`, or a list `10,20,40`.
    #[arg(short = 'k')]
    k: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    normalize: bool,
    /// Scan the k range upward and report the largest k at this success rate.
    #[arg(long)]
    kmax: Option<f64>,
    /// Noise sweep over these sigmas at a single k (default 40).
    #[arg(long, value_delimiter = ',')]
    sweep_sigma: Option<Vec<f64>>,
    /// Output prefix: writes PREFIX.csv and PREFIX.json.
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DmaxArgs {
    #[arg(short = 'M')]
    m: usize,
    #[arg(short = 'N')]
    n: usize,
    #[arg(long, default_value_t = 20)]
    retries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes the matrix found at d_max.
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Files written by the current command; removed unless the command succeeds.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        self.written.push(path.to_path_buf());
        std::fs::write(path, contents).map_err(|e| runtime(format!("writing {}: {e}", path.display())))
    }

    fn commit(mut self) {
        self.keep = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn announce_seed(seed: u64) {
    eprintln!("master seed: {seed}");
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn ric_summary(a: &SensingMatrix, ks: &[usize]) -> Vec<Value> {
    let spectrum = a.correlation_spectrum();
    let d = a.degree() as i64;
    let m = a.nrows() as i64;
    let rho = ratio_to_f64(spectrum.correlated_fraction());
    let mut out = Vec::new();
    for &k in ks {
        let k = k as i64;
        let main = if spectrum.has_four_cycles() {
            ric_rip3(k, d, spectrum.max_overlap as i64, m)
        } else {
            ric_rip1(k, d)
        };
        let mut entry = json!({ "k": k });
        match main {
            Ok(r) => {
                entry["formula"] = json!(r.formula);
                entry["delta_k"] = json!(r.delta_k.to_f64());
                if let Some(x) = r.delta_k.exact() {
                    entry["delta_k_exact"] = json!(x.to_string());
                }
            }
            Err(e) => entry["error"] = json!(e.to_string()),
        }
        if let Ok(r2) = ric_rip2(k, d, rho) {
            entry["rip2_approx"] = json!(r2.delta_k.to_f64());
        }
        out.push(entry);
    }
    out
}

fn binary_summary(a: &SensingMatrix, ks: &[usize]) -> Value {
    let spectrum = a.correlation_spectrum();
    let girth = a.girth().global_girth;
    let rows = a.row_degrees();
    let coherence = spectrum.coherence();
    let k_bound = match coherence_k_bound(coherence) {
        Ok(SparsityBound::Max(k)) => json!(k),
        _ => json!("unbounded"),
    };
    let lemma1 = if spectrum.has_four_cycles() {
        Value::Null
    } else {
        lemma1_rho(a.nrows() as i64, a.ncols() as i64, a.degree() as i64)
            .map(|r| json!({ "exact": r.to_string(), "value": ratio_to_f64(r) }))
            .unwrap_or(Value::Null)
    };
    json!({
        "m": a.nrows(),
        "n": a.ncols(),
        "d": a.degree(),
        "girth": girth.to_string(),
        "row_degree_min": rows.iter().min(),
        "row_degree_max": rows.iter().max(),
        "coherence": coherence.to_string(),
        "coherence_value": spectrum.coherence_f64(),
        "coherence_k_bound": k_bound,
        "overlap_counts": spectrum.overlap_counts,
        "correlated_fraction": ratio_to_f64(spectrum.correlated_fraction()),
        "rho": lemma1,
        "ric": ric_summary(a, ks),
    })
}

fn construct(args: ConstructArgs) -> Result<(), CliError> {
    announce_seed(args.seed);
    let need_d = || args.d.ok_or_else(|| CliError::Usage("-d is required for binary matrices".into()));
    let mut outputs = Outputs::default();
    let summary_path = with_suffix(&args.output, ".json");
    match args.kind {
        Kind::Gaussian => {
            let g = gaussian_matrix(args.m, args.n, args.seed);
            outputs.write(&args.output, &Operator::Dense(g).to_text())?;
            let summary = json!({ "kind": "gaussian", "m": args.m, "n": args.n, "seed": args.seed });
            outputs.write(&summary_path, &to_json(&summary))?;
            emit(&to_json(&summary));
        }
        Kind::Peg | Kind::Random => {
            let d = need_d()?;
            let (a, extra) = if let Kind::Peg = args.kind {
                let tie = if args.seed == 0 { TieBreak::LowestIndex } else { TieBreak::Random(args.seed) };
                let cfg = PegConfig {
                    tie_break: tie,
                    max_retries: args.retries,
                    ..PegConfig::default()
                };
                let (a, restarts) = peg_with_girth(args.m, args.n, d, args.min_girth, &cfg).map_err(runtime)?;
                (a, json!({ "kind": "peg", "restarts": restarts }))
            } else {
                let a = random_regular(args.m, args.n, d, args.seed).map_err(runtime)?;
                (a, json!({ "kind": "random" }))
            };
            outputs.write(&args.output, &a.to_text())?;
            let mut summary = binary_summary(&a, &args.k);
            summary["seed"] = json!(args.seed);
            for (key, v) in extra.as_object().unwrap() {
                summary[key] = v.clone();
            }
            outputs.write(&summary_path, &to_json(&summary))?;
            emit(&to_json(&summary));
        }
    }
    outputs.commit();
    Ok(())
}

fn load_operator(path: &Path) -> Result<Operator, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
    Operator::from_text(&text).map_err(runtime)
}

fn load_binary(path: &Path) -> Result<SensingMatrix, CliError> {
    match load_operator(path)? {
        Operator::Binary(a) => Ok(a),
        Operator::Dense(_) => Err(CliError::Usage("this command needs a binary matrix file".into())),
    }
}

fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    announce_seed(args.seed);
    let a = load_binary(&args.input)?;
    let mut report = binary_summary(&a, &args.k);
    let mut empirical = Vec::new();
    let mut proportions = Vec::new();
    for &k in &args.k {
        if k == 0 || k > a.ncols() {
            return Err(CliError::Usage(format!("subset size {k} out of range")));
        }
        empirical.push(serde_json::to_value(empirical_ric(&a, k, args.samples, args.seed).map_err(runtime)?).unwrap());
        if k >= 2 {
            let mut s = offdiag_proportion_stats(&a, k, args.samples, args.seed).map_err(runtime)?;
            s.proportions.clear();
            proportions.push(serde_json::to_value(s).unwrap());
        }
    }
    report["empirical_ric"] = json!(empirical);
    report["offdiag_proportion"] = json!(proportions);
    report["seed"] = json!(args.seed);
    let text = to_json(&report);
    let mut outputs = Outputs::default();
    match &args.output {
        Some(p) => outputs.write(p, &text)?,
        None => emit(&text),
    }
    outputs.commit();
    Ok(())
}

fn recover(args: RecoverArgs) -> Result<(), CliError> {
    announce_seed(args.seed);
    let a = load_operator(&args.input)?;
    let n = a.ncols();
    let (x, y, k) = match &args.signal {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
            let raw: SparseSignal = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("signal: {e}")))?;
            let sig = SparseSignal::new(raw.dimension(), raw.support().to_vec(), raw.values().to_vec())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            if sig.dimension() != n {
                return Err(CliError::Usage(format!("signal has dimension {}, matrix has {n} columns", sig.dimension())));
            }
            let x = sig.to_dense();
            let y = a.apply(&x);
            (x, y, sig.sparsity())
        }
        None => {
            if args.k == 0 || args.k > a.nrows() || args.k > n {
                return Err(CliError::Usage(format!("sparsity {} out of range", args.k)));
            }
            let draw = bench::draw_trial(&a, args.k, args.sigma, args.normalize, args.seed);
            (draw.x, draw.y, args.k)
        }
    };
    let out = bench::solve(&args.algo.algorithm(), &a, &y, k, args.sigma > 0.0).map_err(runtime)?;
    let err = relative_error(&out.x_hat, &x);
    let true_support: Vec<usize> = (0..n).filter(|&i| x[i] != 0.0).collect();
    let report = json!({
        "algorithm": args.algo.algorithm().name(),
        "k": k,
        "sigma": args.sigma,
        "relative_error": err,
        "recovery_rate": (1.0 - err).max(0.0),
        "success": err <= args.threshold,
        "support_recovered": out.support() == true_support,
        "iterations": out.iterations,
        "final_residual_norm": out.final_residual_norm,
        "converged": out.converged,
    });
    let mut outputs = Outputs::default();
    if let Some(p) = &args.output {
        outputs.write(p, &to_json(&json!({ "x_hat": out.x_hat })))?;
    }
    emit(&to_json(&report));
    outputs.commit();
    Ok(())
}

fn parse_k(text: &str) -> Result<(Sparsity, Option<Vec<usize>>), CliError> {
    let bad = || CliError::Usage(format!("cannot parse -k `{text}`"));
    if let Some((a, b)) = text.split_once(':') {
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = b.trim().parse().map_err(|_| bad())?;
        return Ok((Sparsity::Range { start, end }, None));
    }
    let list: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match list.as_slice() {
        [k] => Ok((Sparsity::Single(*k), None)),
        [first, ..] => Ok((Sparsity::Single(*first), Some(list))),
        [] => Err(bad()),
    }
}

fn bench_setup(args: &BenchArgs) -> Result<(ExperimentConfig, Plan), CliError> {
    let (mut config, mut plan) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
            if let Ok(report) = serde_json::from_str::<Report>(&text) {
                (report.config, Some(report.plan))
            } else {
                let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
                let (cfg_v, plan_v) = match v.get("config") {
                    Some(c) => (c.clone(), v.get("plan").cloned()),
                    None => (v, None),
                };
                let cfg: ExperimentConfig = serde_json::from_value(cfg_v).map_err(|e| CliError::Usage(format!("config: {e}")))?;
                let plan = plan_v
                    .map(serde_json::from_value::<Plan>)
                    .transpose()
                    .map_err(|e| CliError::Usage(format!("plan: {e}")))?;
                (cfg, plan)
            }
        }
        None => {
            let m = args.m.unwrap_or(200);
            let n = args.n.unwrap_or(400);
            let d = args.d.unwrap_or(7);
            let source = match (&args.input, args.matrix.unwrap_or(Kind::Peg)) {
                (Some(p), _) => MatrixSource::File { path: p.clone() },
                (None, Kind::Peg) => MatrixSource::Peg { m, n, d },
                (None, Kind::Random) => MatrixSource::RandomBinary { m, n, d },
                (None, Kind::Gaussian) => MatrixSource::Gaussian { m, n },
            };
            let alg = args.algo.unwrap_or(Algo::Omp).algorithm();
            (ExperimentConfig::new(source, alg, Sparsity::Single(40), 500), None)
        }
    };
    if args.config.is_some() {
        // flags override file values
        if let Some(p) = &args.input {
            config.matrix_source = MatrixSource::File { path: p.clone() };
        }
        if let Some(a) = args.algo {
            config.algorithm = a.algorithm();
        }
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if let Some(s) = args.sigma {
        config.noise_sigma = s;
    }
    if let Some(t) = args.threshold {
        config.success_threshold = t;
    }
    if let MatrixSource::File { path } = &config.matrix_source {
        if !path.is_file() {
            return Err(CliError::Usage(format!("matrix file {} not found", path.display())));
        }
    }
    if args.normalize {
        config.signal_normalization = true;
    }
    let mut k_list = None;
    if let Some(k) = &args.k {
        let (sparsity, list) = parse_k(k)?;
        config.sparsity = sparsity;
        k_list = list;
    }
    if let Some(rate) = args.kmax {
        plan = Some(Plan::Kmax { target_rate: rate });
    } else if let Some(sigmas) = &args.sweep_sigma {
        let k = match config.sparsity {
            Sparsity::Single(k) if args.k.is_some() || args.config.is_some() => Some(k),
            _ => None,
        };
        plan = Some(Plan::NoiseSweep { sigmas: sigmas.clone(), k });
    } else if let Some(ks) = k_list {
        plan = Some(Plan::SparsitySweep { ks });
    } else if args.k.is_some() {
        plan = Some(Plan::Trials);
    }
    let plan = plan.unwrap_or(Plan::Trials);
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((config, plan))
}

fn bench_cmd(args: BenchArgs) -> Result<(), CliError> {
    let (config, plan) = bench_setup(&args)?;
    announce_seed(config.master_seed);
    let report = bench::run_plan(&config, &plan).map_err(|e| match e {
        bench::BenchError::InvalidConfig(m) => CliError::Usage(m),
        other => runtime(other),
    })?;
    let mut outputs = Outputs::default();
    match &args.output {
        Some(prefix) => {
            outputs.write(&with_suffix(prefix, ".csv"), &report.to_csv())?;
            outputs.write(&with_suffix(prefix, ".json"), &report.to_json())?;
        }
        None => emit(&report.to_csv()),
    }
    if let Some(k) = report.k_max {
        eprintln!("k_max: {k}");
    }
    outputs.commit();
    Ok(())
}

fn dmax(args: DmaxArgs) -> Result<(), CliError> {
    announce_seed(args.seed);
    let tie = if args.seed == 0 { TieBreak::LowestIndex } else { TieBreak::Random(args.seed) };
    let cfg = PegConfig {
        tie_break: tie,
        max_retries: args.retries,
        ..PegConfig::default()
    };
    let r = find_dmax(args.m, args.n, &cfg).map_err(runtime)?;
    let mut outputs = Outputs::default();
    if let Some(p) = &args.output {
        outputs.write(p, &r.matrix.to_text())?;
    }
    emit(&format!(
        "practical d_max: {}\ntheoretical bound: {}\n",
        r.d_max, r.theoretical_bound
    ));
    outputs.commit();
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Construct(a) => construct(a),
        Command::Analyze(a) => analyze(a),
        Command::Recover(a) => recover(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Dmax(a) => dmax(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
