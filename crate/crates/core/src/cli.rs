//! `rloc` command line: simulate → train → evaluate, plus the closed-form
//! locator and the rectifier ripple generator.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::circuit::{analytic_fault_location, LocatorParams, MeasurementSet, NetworkScenario, Phasor};
use crate::dataset::{self, Dataset};
use crate::eval::{self, Metrics, TrainedModel};
use crate::model_file::ModelFile;
use crate::nn::MlpModel;
use crate::optim::{self, GdConfig, IcaConfig, MlpObjective, PsoConfig};
use crate::ripple;
use crate::{format_f64, Error};

/// A complex value given on the command line as `re,im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexArg(pub Phasor);

impl FromStr for ComplexArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (re, im) = s.split_once(',').ok_or_else(|| format!("expected 're,im', got '{s}'"))?;
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
        let z = Phasor::new(parse(re)?, parse(im)?);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(format!("'{s}' is not finite"));
        }
        Ok(ComplexArg(z))
    }
}

fn noise_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

/// Hidden layer sizes given as a comma separated list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenLayers(pub Vec<usize>);

fn hidden_layers(s: &str) -> Result<HiddenLayers, String> {
    let sizes = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.contains(&0) {
        return Err("hidden layer sizes must be positive".into());
    }
    Ok(HiddenLayers(sizes))
}

#[derive(Debug, Parser)]
#[command(name = "rloc", version, about = "Pole-to-earth fault location from 600 Hz ripple")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the fault position and write a labelled dataset CSV.
    Simulate(SimulateArgs),
    /// Train an MLP locator on a dataset CSV.
    Train(TrainArgs),
    /// Compare trained models on the train and test splits.
    Evaluate(EvaluateArgs),
    /// Closed-form fault distance from substation phasors.
    Locate(LocateArgs),
    /// Synthesize the ideal 12-pulse rectifier output and extract its ripple.
    Ripple(RippleArgs),
}

#[derive(Debug, Args)]
pub struct PhysicsArgs {
    /// Fault resistance in ohm [default: 100]
    #[arg(long)]
    pub fault_resistance: Option<f64>,
    /// Positive pole bleed resistor in ohm [default: 200]
    #[arg(long)]
    pub bleed_pos: Option<f64>,
    /// Negative pole bleed resistor in ohm [default: 100]
    #[arg(long)]
    pub bleed_neg: Option<f64>,
    /// Rail impedance per km at 600 Hz, `re,im` [default: 0.03,0.45]
    #[arg(long, allow_hyphen_values = true)]
    pub z_rail: Option<ComplexArg>,
    /// Train impedance at 600 Hz, `re,im` [default: 1.5,12]
    #[arg(long, allow_hyphen_values = true)]
    pub z_train: Option<ComplexArg>,
    /// Rectifier 600 Hz EMF, `re,im` [default: 750·2/143 V, 0]
    #[arg(long, allow_hyphen_values = true)]
    pub source_emf: Option<ComplexArg>,
    /// Substation impedance at 600 Hz, `re,im` [default: 0.02,0.35]
    #[arg(long, allow_hyphen_values = true)]
    pub source_impedance: Option<ComplexArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10.0)]
    pub line_length_km: f64,
    #[arg(long, default_value_t = 8.0)]
    pub train_pos_km: f64,
    /// Number of fault positions in the sweep
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    pub points: u64,
    /// Relative standard deviation of Gaussian feature noise
    #[arg(long, default_value_t = 0.0, value_parser = noise_level)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub physics: PhysicsArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ica,
    Pso,
    Gd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ica => "ica",
            Method::Pso => "pso",
            Method::Gd => "gd",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub data: PathBuf,
    /// Hidden layer sizes, comma separated
    #[arg(long, default_value = "16", value_parser = hidden_layers)]
    pub hidden: HiddenLayers,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub train_fraction: f64,
    /// Decades (ICA), iterations (PSO) or epochs (GD); method default if omitted
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Gradient descent learning rate
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Gradient descent momentum
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Print `iter=<n> best=<cost>` to stderr every iteration
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Trained model, as `label=path` or a bare path labelled by its file stem
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub train_fraction: f64,
    /// Report JSON destination; when omitted the JSON goes to stdout and the
    /// table to stderr
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for `<label>_<split>.csv` actual-vs-predicted files
    #[arg(long)]
    pub scatter_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub vp: ComplexArg,
    #[arg(long, allow_hyphen_values = true)]
    pub vn: ComplexArg,
    #[arg(long, allow_hyphen_values = true)]
    pub ip: ComplexArg,
    #[arg(long = "in", allow_hyphen_values = true)]
    pub i_n: ComplexArg,
    /// Rail impedance per km
    #[arg(long, allow_hyphen_values = true)]
    pub zr: ComplexArg,
    /// Train impedance
    #[arg(long, allow_hyphen_values = true)]
    pub zt: ComplexArg,
    /// Train position in km
    #[arg(long)]
    pub lt: f64,
    #[arg(long, default_value_t = 10.0)]
    pub line_length_km: f64,
    #[arg(long, default_value_t = crate::circuit::DEFAULT_EPS_CURRENT)]
    pub eps_current: f64,
}

#[derive(Debug, Args)]
pub struct RippleArgs {
    #[arg(long, default_value_t = 1.0)]
    pub vll_rms: f64,
    #[arg(long, default_value_t = 50.0)]
    pub line_freq: f64,
    #[arg(long, default_value_t = 4096)]
    pub samples_per_cycle: usize,
    #[arg(long, default_value_t = 1)]
    pub cycles: usize,
    #[arg(long, default_value_t = 600.0)]
    pub target_freq: f64,
    /// Waveform CSV (`time_s,value`)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute<W: Write>(command: Command, out: &mut W) -> CliResult {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Locate(a) => cmd_locate(&a, out),
        Command::Ripple(a) => cmd_ripple(&a, out),
    }
}

fn scenario_from(a: &SimulateArgs) -> NetworkScenario {
    let d = NetworkScenario::default();
    let p = &a.physics;
    NetworkScenario {
        line_length_km: a.line_length_km,
        train_pos_km: a.train_pos_km,
        // placeholder inside the line; the sweep overrides it
        fault_pos_km: 0.5 * a.line_length_km,
        fault_resistance_ohm: p.fault_resistance.unwrap_or(d.fault_resistance_ohm),
        bleed_pos_ohm: p.bleed_pos.unwrap_or(d.bleed_pos_ohm),
        bleed_neg_ohm: p.bleed_neg.unwrap_or(d.bleed_neg_ohm),
        z_rail_per_km: p.z_rail.map_or(d.z_rail_per_km, |z| z.0),
        z_train: p.z_train.map_or(d.z_train, |z| z.0),
        source_emf: p.source_emf.map_or(d.source_emf, |z| z.0),
        source_impedance: p.source_impedance.map_or(d.source_impedance, |z| z.0),
    }
}

pub fn cmd_simulate<W: Write>(a: &SimulateArgs, out: &mut W) -> CliResult {
    let scenario = scenario_from(a);
    scenario.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let d = dataset::generate(&scenario, a.points as usize, a.noise_std, a.seed)?;
    let mut file = BufWriter::new(File::create(&a.out)?);
    d.write_csv(&mut file)?;
    file.flush()?;
    writeln!(out, "wrote {} samples to {}", d.len(), a.out.display())?;
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    let file = File::open(path).map_err(|e| CliError::Runtime(Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))))?;
    Ok(Dataset::read_csv(BufReader::new(file))?)
}

/// Normalizes with the ranges stored in the file and splits.
fn prepare_splits(path: &Path, train_fraction: f64, split_seed: u64) -> CliResult<(Dataset, Dataset)> {
    let raw = load_dataset(path)?;
    let norm = raw.norm;
    let normalized = dataset::normalize_with(&raw, &norm)?;
    Ok(dataset::split(&normalized, train_fraction, split_seed)?)
}

pub fn cmd_train<W: Write>(a: &TrainArgs, out: &mut W) -> CliResult {
    let (train, _) = prepare_splits(&a.data, a.train_fraction, a.split_seed)?;
    let mut layers = vec![dataset::N_FEATURES];
    layers.extend(&a.hidden.0);
    layers.push(1);
    let objective = MlpObjective::new(&layers, &train.samples)?;
    let dim = objective.dim();

    let result = match a.method {
        Method::Ica => {
            let mut cfg = IcaConfig { seed: a.seed, verbose: a.verbose, ..Default::default() };
            if let Some(n) = a.iterations {
                cfg.n_decades = n;
            }
            optim::train_ica(&objective, dim, &cfg)?
        }
        Method::Pso => {
            let mut cfg = PsoConfig { seed: a.seed, verbose: a.verbose, ..Default::default() };
            if let Some(n) = a.iterations {
                cfg.n_iterations = n;
            }
            optim::train_pso(&objective, dim, &cfg)?
        }
        Method::Gd => {
            let mut cfg = GdConfig { lr: a.lr, momentum: a.momentum, seed: a.seed, verbose: a.verbose, ..Default::default() };
            if let Some(n) = a.iterations {
                cfg.epochs = n;
            }
            if !(cfg.lr > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
                return Err(CliError::Usage(format!("--lr {} / --momentum {}", cfg.lr, cfg.momentum)));
            }
            optim::train_gd(&objective, dim, &cfg)?
        }
    };

    let model = MlpModel::from_weights(&layers, result.best_weights.clone())?;
    let file = ModelFile { model: model.clone(), norm: train.norm };
    fs::write(&a.out, file.to_text())?;

    let preds = eval::predict(&model, &train)?;
    let metrics = Metrics::compute(&preds.actual, &preds.predicted)?;
    let fragment = json!({
        "method": a.method.name(),
        "layer_sizes": layers,
        "seed": a.seed,
        "initial_cost": result.initial_cost,
        "final_cost": result.best_cost,
        "train": metrics,
        "model": a.out.display().to_string(),
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&fragment).expect("fragment serializes"))?;
    Ok(())
}

fn parse_model_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let label = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (label, path)
        }
    }
}

pub fn cmd_evaluate<W: Write>(a: &EvaluateArgs, out: &mut W) -> CliResult {
    let (train, test) = prepare_splits(&a.data, a.train_fraction, a.split_seed)?;
    let mut models = Vec::new();
    let mut paths = BTreeMap::new();
    for spec in &a.models {
        let (label, path) = parse_model_spec(spec);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))?;
        let file = ModelFile::parse(&text)?;
        paths.insert(label.clone(), serde_json::Value::from(path.display().to_string()));
        models.push(TrainedModel { method: label, model: file.model, norm: file.norm });
    }
    let mut report = eval::build_report(&models, &train, &test, a.split_seed)?;
    report.config.insert("data".into(), a.data.display().to_string().into());
    report.config.insert("train_fraction".into(), a.train_fraction.into());
    report.config.insert("split_seed".into(), a.split_seed.into());
    report.config.insert("model_files".into(), serde_json::Value::Object(paths.into_iter().collect()));

    let json = report.to_json();
    match &a.out {
        Some(path) => {
            fs::write(path, &json)?;
            write!(out, "{}", report.to_table())?;
        }
        None => {
            eprint!("{}", report.to_table());
            write!(out, "{json}")?;
        }
    }
    if let Some(dir) = &a.scatter_dir {
        fs::create_dir_all(dir)?;
        for (label, (tr, te)) in &report.predictions {
            fs::write(dir.join(format!("{label}_train.csv")), tr.to_csv())?;
            fs::write(dir.join(format!("{label}_test.csv")), te.to_csv())?;
        }
    }
    Ok(())
}

pub fn cmd_locate<W: Write>(a: &LocateArgs, out: &mut W) -> CliResult {
    let m = MeasurementSet {
        v_p: a.vp.0,
        v_n: a.vn.0,
        i_p: a.ip.0,
        i_n: a.i_n.0,
        i_d: Phasor::new(0.0, 0.0),
    };
    let params = LocatorParams {
        z_rail_per_km: a.zr.0,
        z_train: a.zt.0,
        train_pos_km: a.lt,
        line_length_km: a.line_length_km,
        eps_current: a.eps_current,
    };
    let est = analytic_fault_location(&m, &params)?;
    writeln!(out, "{:?}", est.distance_km)?;
    writeln!(out, "consistent={} in_range={}", est.consistent, est.in_range)?;
    Ok(())
}

pub fn cmd_ripple<W: Write>(a: &RippleArgs, out: &mut W) -> CliResult {
    let w = ripple::synthesize_12pulse(a.vll_rms, a.line_freq, a.samples_per_cycle, a.cycles)?;
    let x = ripple::extract_phasor(&w, a.target_freq)?;
    let mean = w.mean();
    writeln!(out, "dc_mean={}", format_f64(mean))?;
    writeln!(out, "magnitude={}", format_f64(x.norm()))?;
    writeln!(out, "phase_rad={}", format_f64(x.arg()))?;
    if mean != 0.0 {
        writeln!(out, "ratio={}", format_f64(x.norm() / mean))?;
    }
    if let Some(path) = &a.out {
        let mut file = BufWriter::new(File::create(path)?);
        w.write_csv(&mut file)?;
        file.flush()?;
    }
    Ok(())
}
