use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orkm::datagen::{generate, informative_plus_noise, preset, SimSpec};
use orkm::io::{load_manifest, load_result, read_labels, save_result, write_dataset};
use orkm::metrics::Metric;
use orkm::orkmc::{orkmc_run_with, OnlineState, StreamOptions};
use orkm::{fit, metrics, run_suite, Algorithm, BenchOptions, Error, FitResult, HyperParams, Result, Suite};

#[derive(Parser)]
#[command(name = "orkm", version, about = "Regularized K-means for multi-view data")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one solver to a dataset and write the result as JSON.
    Fit(FitArgs),
    /// Run the online solver over a dataset, printing progress as CSV.
    Stream(StreamArgs),
    /// Write a simulated dataset (CSV views, labels, manifest).
    Simulate(SimulateArgs),
    /// Compare predicted labels with the truth.
    Eval(EvalArgs),
    /// Run every solver on a suite across seeds.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    data: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Regularization weight on tr(UU^T).
    #[arg(long, visible_alias = "eta")]
    yita: Option<f64>,
    /// View-weight balance exponent.
    #[arg(long)]
    r: Option<f64>,
    /// Projected-gradient step for the online solvers (default 1/L).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Initial batch size for the online solvers (default N/2).
    #[arg(long, visible_alias = "init-size")]
    chushi: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Inner gradient steps per arrival.
    #[arg(long)]
    n_grad: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the result JSON.
    #[arg(long)]
    out: PathBuf,
}

impl SolverArgs {
    fn hyper(&self) -> HyperParams {
        let mut h = HyperParams::with_k(self.k);
        if let Some(x) = self.yita {
            h.eta = x;
        }
        if let Some(x) = self.r {
            h.r = x;
        }
        h.gamma = self.gamma;
        if let Some(x) = self.epsilon {
            h.epsilon = x;
        }
        h.chushi = self.chushi;
        if let Some(x) = self.max_iter {
            h.max_iter = x;
        }
        if let Some(x) = self.n_grad {
            h.n_grad = x;
        }
        h.seed = self.seed;
        h
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    algo: Algorithm,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Samples consumed per update.
    #[arg(long, default_value_t = 1)]
    chunk_size: usize,
    /// Arrivals between progress rows.
    #[arg(long, default_value_t = 1)]
    emit_every: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Named scenario (case1-single, case2-multi, stability-single, stability-multi).
    #[arg(long, conflicts_with_all = ["n", "k", "v", "j", "separation", "sigma"])]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    v: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Two views: one informative, one structureless Gaussian noise.
    #[arg(long)]
    noise_view: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted labels: a CSV column or a result JSON.
    #[arg(long)]
    pred: PathBuf,
    /// True labels: a CSV column or a dataset manifest.
    #[arg(long)]
    truth: PathBuf,
    /// nmi, purity, precision, recall, fscore, ri or all.
    #[arg(long, default_value = "all")]
    metric: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: Suite,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    /// Directory holding real datasets (default $ORKM_DATA_DIR, then ./data).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Run cells one at a time.
    #[arg(long)]
    serial: bool,
    /// Leave the elapsed_seconds column empty.
    #[arg(long)]
    no_timing: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Stream(a) => cmd_stream(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("orkm: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn summary(r: &FitResult, truth: Option<&[usize]>) -> Result<String> {
    let mut s = format!(
        "{}: n={} k={} views={} iterations={} converged={} objective={:.6e}",
        r.algorithm,
        r.labels().len(),
        r.config.k,
        r.weights.alpha().len(),
        r.diagnostics.iterations,
        r.diagnostics.converged,
        r.objective_trace.last().copied().unwrap_or(f64::NAN),
    );
    if let Some(t) = truth {
        let p = r.labels();
        s += &format!(
            " nmi={} purity={} fscore={}",
            fmt_opt(Some(metrics::nmi(p, t)?)),
            fmt_opt(Some(metrics::purity(p, t)?)),
            fmt_opt(Some(metrics::pair_scores(p, t)?.fscore)),
        );
    }
    s += &format!(" elapsed={:.3}s", r.elapsed_seconds);
    Ok(s)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let data = load_manifest(&a.solver.data)?;
    let result = fit(a.algo, &data, &a.solver.hyper())?;
    save_result(&result, &a.solver.out)?;
    println!("{}", summary(&result, data.labels())?);
    Ok(())
}

fn progress_row(state: &OnlineState<f64>) -> String {
    let mut s = format!("{},{}", state.t(), state.streaming_objective());
    for a in state.weights().alpha() {
        s += &format!(",{a}");
    }
    s
}

fn cmd_stream(a: StreamArgs) -> Result<()> {
    if a.emit_every == 0 {
        return Err(Error::Usage("--emit-every must be at least 1".into()));
    }
    let data = load_manifest(&a.solver.data)?;
    let hyper = a.solver.hyper();
    let n = data.n_samples();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let header: Vec<String> = (1..=data.n_views()).map(|v| format!("alpha_{v}")).collect();
    let io_err = |e| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    writeln!(out, "t,objective,{}", header.join(",")).map_err(io_err)?;
    let mut start = None;
    let mut prev = 0;
    let mut write_failed = None;
    let opts = StreamOptions {
        chunk_size: a.chunk_size,
        ..StreamOptions::default()
    };
    let result = orkmc_run_with(&data, &hyper, opts, |state| {
        let t = state.t();
        // the init row, then one row per completed block of arrivals and
        // one for a trailing partial block
        let emit = match start {
            None => {
                start = Some(t);
                true
            }
            Some(s) => t == n || (t - s) / a.emit_every > (prev - s) / a.emit_every,
        };
        prev = t;
        if emit && write_failed.is_none() {
            if let Err(e) = writeln!(out, "{}", progress_row(state)) {
                write_failed = Some(e);
            }
        }
    })?;
    if let Some(e) = write_failed {
        return Err(io_err(e));
    }
    out.flush().map_err(io_err)?;
    save_result(&result, &a.solver.out)?;
    eprintln!("{}", summary(&result, data.labels())?);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let (spec, stem) = match &a.preset {
        Some(name) => (preset(name)?.with_seed(a.seed).spec, name.clone()),
        None => {
            let d = SimSpec::default();
            let spec = SimSpec {
                n: a.n.unwrap_or(d.n),
                k: a.k.unwrap_or(d.k),
                v: a.v.unwrap_or(d.v),
                j: a.j.unwrap_or(d.j),
                separation: a.separation.unwrap_or(d.separation),
                sigma: a.sigma.unwrap_or(d.sigma),
                seed: a.seed,
                ..d
            };
            (spec, "sim".to_string())
        }
    };
    let data = if a.noise_view {
        informative_plus_noise(&spec)?
    } else {
        generate(&spec)?
    };
    let data = data.with_name(stem.clone());
    let manifest = write_dataset(&data, &a.out_dir, &stem, Some(spec.k))?;
    println!("{}", manifest.display());
    Ok(())
}

fn labels_from(path: &Path) -> Result<Vec<usize>> {
    let name = path.to_string_lossy();
    if name.ends_with(".manifest.json") {
        load_manifest(path)?
            .labels()
            .map(<[usize]>::to_vec)
            .ok_or_else(|| Error::Validation(format!("{name} has no label file")))
    } else if name.ends_with(".json") {
        Ok(load_result(path)?.labels().to_vec())
    } else {
        read_labels(path, b',', false)
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let metrics: Vec<Metric> = if a.metric == "all" {
        Metric::ALL.to_vec()
    } else {
        vec![a.metric.parse()?]
    };
    let pred = labels_from(&a.pred)?;
    let truth = labels_from(&a.truth)?;
    let mut lines = String::new();
    for m in metrics {
        lines += &format!("{},{:.7}\n", m.name(), m.compute(&pred, &truth)?);
    }
    print!("{lines}");
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let opts = BenchOptions {
        seeds: a.seeds,
        data_dir: a.data_dir,
        parallel: !a.serial,
    };
    let rows = run_suite(a.suite, &opts)?;
    let file = fs::File::create(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    orkm::bench::write_rows(io::BufWriter::new(file), &rows, a.no_timing)?;
    for r in rows.iter().filter(|r| r.is_skipped()) {
        eprintln!("orkm: {} skipped: {}", r.dataset, r.view);
    }
    eprintln!("orkm: dmc: external, not run");
    println!("{} rows written to {}", rows.len(), a.out.display());
    Ok(())
}
