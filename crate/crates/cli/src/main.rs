//! `drn`: generate datasets, train and evaluate distribution regression networks,
//! check gradients and inspect single-connection propagation.
//!
//! Exit status is 0 on success, 1 when a command runs but its success condition
//! fails (a gradient check, a numerical failure during training) and 2 for usage
//! errors, including inputs the library rejects.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod sweep;

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use drn_core::datagen::{gen_fp, gen_ou, FpConfig, OuConfig, Potential};
use drn_core::dist::{discretize_log_pdf, DiscreteDistribution};
use drn_core::grad::{backprop, finite_diff_grad, GradcheckReport};
use drn_core::net::propagate_node;
use drn_core::seed::rng_for;
use drn_core::train::{evaluate_per_datum, predict, train, Metric};
use drn_core::{
    Dataset, Distribution, DrnError, DrnModel, Gradients, NodeParams, Support, Topology,
    TrainConfig, TrainReport,
};

#[derive(Parser)]
#[command(name = "drn", version, about = "Distribution regression networks")]
struct Cli {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, env = "DRN_SEED")]
    seed: Option<u64>,

    /// Worker threads for per-datum parallelism.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,

    /// Print a JSON object on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an Ornstein-Uhlenbeck dataset.
    GenOu(GenOuArgs),
    /// Generate a Fokker-Planck dataset.
    GenFp(GenFpArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Write model predictions for every record of a dataset.
    Predict(PredictArgs),
    /// Score a model on a dataset.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a random model.
    Gradcheck(GradcheckArgs),
    /// Propagate a peaked input through one connection over a parameter sweep.
    Inspect(InspectArgs),
}

fn ou_defaults() -> OuConfig<f64> {
    OuConfig::default()
}

fn fp_defaults() -> FpConfig<f64> {
    FpConfig::default()
}

#[derive(Args)]
struct GenOuArgs {
    /// Output dataset path.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = ou_defaults().n_data)]
    n: usize,
    /// Diffusion coefficient D.
    #[arg(long, alias = "D", default_value_t = ou_defaults().diffusion)]
    diffusion: f64,
    #[arg(long, default_value_t = ou_defaults().theta)]
    theta: f64,
    /// Time between input and label; 0 makes every label equal its input.
    #[arg(long, default_value_t = ou_defaults().dt)]
    dt: f64,
    #[arg(long, default_value_t = ou_defaults().y_range.0)]
    y_min: f64,
    #[arg(long, default_value_t = ou_defaults().y_range.1)]
    y_max: f64,
    #[arg(long, default_value_t = ou_defaults().t_init_range.0)]
    t_min: f64,
    #[arg(long, default_value_t = ou_defaults().t_init_range.1)]
    t_max: f64,
    #[arg(long, default_value_t = ou_defaults().support.lower, allow_hyphen_values = true)]
    lower: f64,
    #[arg(long, default_value_t = ou_defaults().support.upper, allow_hyphen_values = true)]
    upper: f64,
    #[arg(long, default_value_t = ou_defaults().support.q)]
    q: usize,
}

#[derive(Args)]
struct GenFpArgs {
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = fp_defaults().n_data)]
    n: usize,
    #[arg(long, default_value_t = fp_defaults().sigma)]
    sigma: f64,
    /// Potential is -amplitude·cos(wavenumber·s) - tilt·s.
    #[arg(long, default_value_t = fp_defaults().potential.amplitude, allow_hyphen_values = true)]
    amplitude: f64,
    #[arg(long, default_value_t = fp_defaults().potential.wavenumber, allow_hyphen_values = true)]
    wavenumber: f64,
    #[arg(long, default_value_t = fp_defaults().potential.tilt, allow_hyphen_values = true)]
    tilt: f64,
    #[arg(long, default_value_t = fp_defaults().support.lower, allow_hyphen_values = true)]
    lower: f64,
    #[arg(long, default_value_t = fp_defaults().support.upper, allow_hyphen_values = true)]
    upper: f64,
    #[arg(long, default_value_t = fp_defaults().support.q)]
    q: usize,
    #[arg(long, default_value_t = fp_defaults().t_init_range.0)]
    t_min: f64,
    #[arg(long, default_value_t = fp_defaults().t_init_range.1)]
    t_max: f64,
    #[arg(long, default_value_t = fp_defaults().dt)]
    dt: f64,
    /// Samples drawn per distribution before KDE; 0 stores exact pmfs.
    #[arg(long, default_value_t = fp_defaults().samples_per_dist)]
    samples: usize,
    /// KDE bandwidth as a fraction of the support length.
    #[arg(long, default_value_t = fp_defaults().kde_bandwidth)]
    kde_bandwidth: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset.
    #[arg(long)]
    data: PathBuf,
    /// Network shape, e.g. `1-[1]-1` or `3-[]-1`.
    #[arg(long)]
    topology: String,
    /// Training configuration JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model output path.
    #[arg(long, short)]
    out: PathBuf,
    /// Report path [default: <out stem>.report.json].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Cost-curve CSV path [default: <out stem>.curve.csv].
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// js, l2 or nll.
    #[arg(long, default_value = "js")]
    metric: String,
    /// Per-datum `index,value` CSV; `-` prints it to stdout.
    #[arg(long)]
    breakdown: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "2-[3]-1")]
    topology: String,
    #[arg(long, default_value_t = 20)]
    q: usize,
    /// Finite-difference steps; several may be given, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1e-6")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Print every parameter, not just the summary.
    #[arg(long)]
    table: bool,
    /// Perturb one analytic entry before comparing (negative control).
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Args)]
struct InspectArgs {
    /// Sweep terms `name=a,b,c` or `name=lo:hi:n` over w, b_q, b_a, lambda_q, lambda_a.
    /// Unswept parameters are w=1, zero biases and positions at the input mean.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Vec<String>,
    /// Mean of the Gaussian input.
    #[arg(long, default_value_t = 0.505, allow_hyphen_values = true)]
    input_mean: f64,
    #[arg(long, default_value_t = 0.05)]
    input_sd: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    lower: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    upper: f64,
    #[arg(long, default_value_t = 100)]
    q: usize,
    /// CSV output path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Failure of a command whose inputs were acceptable.
#[derive(Debug)]
struct Failed(String);

impl Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Failed>() {
        return 1;
    }
    match err.chain().find_map(|e| e.downcast_ref::<DrnError>()) {
        Some(DrnError::Numerical(_) | DrnError::TrainingAborted { .. }) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build_global()
        .context("starting the thread pool")?;
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::GenOu(a) => gen_ou_cmd(cli, a, seed),
        Command::GenFp(a) => gen_fp_cmd(cli, a, seed),
        Command::Train(a) => train_cmd(cli, a),
        Command::Predict(a) => predict_cmd(cli, a),
        Command::Eval(a) => eval_cmd(cli, a),
        Command::Gradcheck(a) => gradcheck_cmd(cli, a, seed),
        Command::Inspect(a) => inspect_cmd(cli, a),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_model(path: &Path) -> Result<DrnModel> {
    DrnModel::load(path).with_context(|| format!("reading model {}", path.display()))
}

fn gen_summary(cli: &Cli, command: &str, out: &Path, ds: &Dataset, seed: u64) {
    let s = ds.support;
    if cli.json {
        print_json(&json!({
            "command": command,
            "out": out,
            "n_data": ds.len(),
            "support": s,
            "seed": seed,
        }));
    } else {
        println!(
            "wrote {} records to {} (support [{}, {}], q = {}, seed {seed})",
            ds.len(),
            out.display(),
            s.lower,
            s.upper,
            s.q
        );
    }
}

fn gen_ou_cmd(cli: &Cli, a: &GenOuArgs, seed: u64) -> Result<()> {
    let cfg = OuConfig {
        n_data: a.n,
        diffusion: a.diffusion,
        theta: a.theta,
        dt: a.dt,
        y_range: (a.y_min, a.y_max),
        t_init_range: (a.t_min, a.t_max),
        support: Support { lower: a.lower, upper: a.upper, q: a.q },
        seed,
    };
    cfg.validate()?;
    let ds = gen_ou(&cfg)?;
    write_atomic(&a.out, ds.to_json()?.as_bytes())?;
    gen_summary(cli, "gen-ou", &a.out, &ds, seed);
    Ok(())
}

fn gen_fp_cmd(cli: &Cli, a: &GenFpArgs, seed: u64) -> Result<()> {
    let cfg = FpConfig {
        n_data: a.n,
        sigma: a.sigma,
        potential: Potential { amplitude: a.amplitude, wavenumber: a.wavenumber, tilt: a.tilt },
        support: Support { lower: a.lower, upper: a.upper, q: a.q },
        t_init_range: (a.t_min, a.t_max),
        dt: a.dt,
        samples_per_dist: a.samples,
        kde_bandwidth: a.kde_bandwidth,
        seed,
    };
    cfg.validate()?;
    let ds = gen_fp(&cfg)?;
    write_atomic(&a.out, ds.to_json()?.as_bytes())?;
    gen_summary(cli, "gen-fp", &a.out, &ds, seed);
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: &'a TrainConfig,
    #[serde(flatten)]
    report: &'a TrainReport,
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let topology: Topology = a.topology.parse()?;
    let mut config: TrainConfig = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(DrnError::from)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    if topology.inputs() != ds.input_count() {
        return Err(DrnError::InvalidInput(format!(
            "topology {topology} takes {} inputs, the dataset has {}",
            topology.inputs(),
            ds.input_count()
        ))
        .into());
    }

    let report = train(&ds, &topology, &config)?;
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, ".report.json"));
    let curve_path = a.curve.clone().unwrap_or_else(|| sibling(&a.out, ".curve.csv"));
    let output = TrainOutput { config: &config, report: &report };
    write_atomic(&a.out, report.model.to_json()?.as_bytes())?;
    write_atomic(&report_path, serde_json::to_string_pretty(&output)?.as_bytes())?;
    write_atomic(&curve_path, report.cost_curve_csv().as_bytes())?;

    let epochs = report.history.last().map_or(0, |r| r.epoch);
    if cli.json {
        print_json(&json!({
            "command": "train",
            "model": a.out,
            "report": report_path,
            "curve": curve_path,
            "topology": report.topology,
            "param_count": report.param_count,
            "epochs": epochs,
            "best_epoch": report.best_epoch,
            "stop_reason": report.stop_reason,
            "final_train_cost": report.final_train_cost,
            "final_val_cost": report.final_val_cost,
        }));
    } else {
        println!(
            "trained {} ({} parameters) for {epochs} epochs, stop: {:?}",
            report.topology, report.param_count, report.stop_reason
        );
        println!("best epoch {}: train cost {}", report.best_epoch, report.final_train_cost);
        if let Some(v) = report.final_val_cost {
            println!("validation cost {v}");
        }
        println!("wrote {}, {}, {}", a.out.display(), report_path.display(), curve_path.display());
    }
    Ok(())
}

fn predict_cmd(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let preds = predict(&model, &ds)?;
    let body = json!({
        "support": model.support,
        "predictions": preds.iter().map(Distribution::masses).collect::<Vec<_>>(),
    });
    write_atomic(&a.out, serde_json::to_string(&body)?.as_bytes())?;
    if cli.json {
        print_json(&json!({"command": "predict", "out": a.out, "n": preds.len()}));
    } else {
        println!("wrote {} predictions to {}", preds.len(), a.out.display());
    }
    Ok(())
}

fn eval_cmd(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    if ds.is_empty() {
        return Err(DrnError::InvalidInput("cannot evaluate on an empty dataset".into()).into());
    }
    let values = evaluate_per_datum(&model, &ds, metric)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;

    let mut csv = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    let to_stdout = a.breakdown.as_deref() == Some(Path::new("-"));
    if let Some(path) = a.breakdown.as_deref().filter(|_| !to_stdout) {
        write_atomic(path, csv.as_bytes())?;
    }
    if cli.json {
        print_json(&json!({
            "command": "eval",
            "metric": metric,
            "value": mean,
            "n": values.len(),
            "per_datum": values,
        }));
    } else {
        println!("{metric} {mean} (n = {})", values.len());
        if to_stdout {
            print!("{csv}");
        }
    }
    Ok(())
}

/// Random model over `[0, 1]` with positions inside the bin-centre hull, where every
/// parameter has a nonzero effect on the cost.
fn random_model(topology: &Topology, support: Support, seed: u64) -> DrnModel {
    let mut rng = rng_for(seed, "gradcheck-model");
    let (lo, hi) = (support.center(0), support.center(support.q - 1));
    let params = topology
        .layer_sizes()
        .windows(2)
        .map(|w| {
            (0..w[1])
                .map(|_| NodeParams {
                    weights: (0..w[0]).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    b_q: rng.gen_range(-2.0..2.0),
                    b_a: rng.gen_range(-2.0..2.0),
                    lambda_q: rng.gen_range(lo..hi),
                    lambda_a: rng.gen_range(lo..hi),
                })
                .collect()
        })
        .collect();
    DrnModel { support, topology: topology.clone(), params }
}

fn random_dist(support: Support, rng: &mut impl Rng) -> Result<Distribution> {
    let w = (0..support.q).map(|_| rng.gen_range(0.05..1.0)).collect();
    Ok(DiscreteDistribution::from_weights(support, w)?)
}

fn gradcheck_cmd(cli: &Cli, a: &GradcheckArgs, seed: u64) -> Result<()> {
    let topology: Topology = a.topology.parse()?;
    let sizes = topology.layer_sizes();
    if sizes.len() > 4 || sizes.iter().any(|&n| n > 4) || !(2..=50).contains(&a.q) {
        bail!(DrnError::InvalidInput(format!(
            "gradcheck is limited to at most 4 layers of width at most 4 and 2 <= q <= 50, got {topology} with q = {}",
            a.q
        )));
    }
    if topology.outputs() != 1 {
        bail!(DrnError::InvalidInput("gradcheck needs a single output node".into()));
    }
    if let Some(e) = a.eps.iter().find(|e| !(1e-8..=1e-4).contains(*e)) {
        bail!(DrnError::InvalidInput(format!("eps {e} outside [1e-8, 1e-4]")));
    }

    let support = Support::new(0.0, 1.0, a.q)?;
    let model = random_model(&topology, support, seed);
    let mut rng = rng_for(seed, "gradcheck-datum");
    let inputs = (0..topology.inputs())
        .map(|_| random_dist(support, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let label = random_dist(support, &mut rng)?;
    let refs: Vec<&Distribution> = inputs.iter().collect();

    let (_, cache) = model.forward(&refs)?;
    let mut analytic = backprop(&model, &refs, &label, &cache)?;
    if a.corrupt {
        let mut flat = analytic.flat();
        flat[0] += 0.1 * (flat[0].abs() + 1e-3);
        analytic = Gradients::from_flat(&model, &flat)?;
    }
    let reports = a
        .eps
        .iter()
        .map(|&eps| {
            let numeric = finite_diff_grad(&model, &refs, &label, eps)?;
            Ok(GradcheckReport::compare(&model, &analytic, &numeric, eps, a.threshold))
        })
        .collect::<Result<Vec<_>>>()?;

    let passed = reports.iter().all(|r| r.passed);
    if cli.json {
        print_json(&json!({
            "command": "gradcheck",
            "topology": topology.to_string(),
            "q": a.q,
            "seed": seed,
            "param_count": model.param_count(),
            "passed": passed,
            "reports": reports,
        }));
    } else {
        println!("gradcheck {topology}, q = {}, seed {seed}, {} parameters", a.q, model.param_count());
        for r in &reports {
            if a.table {
                print!("{}", r.to_table());
            }
            let verdict = if r.passed { "pass" } else { "FAIL" };
            println!("eps {:e}: max relative error {:.3e} (threshold {:e}) {verdict}", r.eps, r.max_rel_error, r.threshold);
        }
    }
    if passed {
        Ok(())
    } else {
        Err(Failed("analytic and finite-difference gradients disagree".into()).into())
    }
}

fn inspect_cmd(cli: &Cli, a: &InspectArgs) -> Result<()> {
    let support = Support::new(a.lower, a.upper, a.q)?;
    if !(a.input_sd > 0.0) || !support.contains(a.input_mean) {
        bail!(DrnError::InvalidInput("input mean must lie in the support and sd must be positive".into()));
    }
    let axes = sweep::parse(&a.sweep, [1.0, 0.0, 0.0, a.input_mean, a.input_mean])
        .map_err(|e| DrnError::InvalidInput(format!("{e:#}")))?;
    let combos = sweep::combinations(&axes);
    for c in &combos {
        for (name, v) in sweep::PARAMS[3..].iter().zip(&c[3..]) {
            if !support.contains(*v) {
                bail!(DrnError::InvalidInput(format!("{name} = {v} lies outside the support")));
            }
        }
    }
    let (mu, sd) = (a.input_mean, a.input_sd);
    let input = discretize_log_pdf(|s: f64| -0.5 * ((s - mu) / sd).powi(2), support)?;

    let mut rows = Vec::with_capacity(combos.len());
    for c in &combos {
        let p = NodeParams { weights: vec![c[0]], b_q: c[1], b_a: c[2], lambda_q: c[3], lambda_a: c[4] };
        let (out, _) = propagate_node(&[&input], &p)?;
        rows.push((c, out));
    }

    let mut csv = String::from("w,b_q,b_a,lambda_q,lambda_a,modes");
    for j in 0..a.q {
        csv.push_str(&format!(",p{j}"));
    }
    csv.push('\n');
    for (c, out) in &rows {
        let fields: Vec<String> = c
            .iter()
            .map(f64::to_string)
            .chain(std::iter::once(out.local_maxima().len().to_string()))
            .chain(out.masses().iter().map(f64::to_string))
            .collect();
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    match &a.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None if !cli.json => print!("{csv}"),
        None => {}
    }
    if cli.json {
        let rows: Vec<_> = rows
            .iter()
            .map(|(c, out)| {
                json!({
                    "w": c[0], "b_q": c[1], "b_a": c[2], "lambda_q": c[3], "lambda_a": c[4],
                    "local_maxima": out.local_maxima(),
                    "masses": out.masses(),
                })
            })
            .collect();
        print_json(&json!({
            "command": "inspect",
            "support": support,
            "input": input.masses(),
            "rows": rows,
        }));
    }
    Ok(())
}
