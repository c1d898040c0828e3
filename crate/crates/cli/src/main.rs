//! `dynsurv` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 estimation failure,
//! 4 prediction failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dynsurv::config::{ConfigError, RunConfig};
use dynsurv::evaluation::{cross_validate, evaluate, CvReport, CvScheme, EvaluationReport, Outcomes};
use dynsurv::fit::{bootstrap, fit_joint_model, FittedJointModel};
use dynsurv::io::{self, IoError, Provenance};
use dynsurv::prediction::{Method, Predictor, SurvivalPrediction};
use dynsurv::simulation::{simulate_dataset, Scenario, SimulationConfig};
use dynsurv::{Dataset, EstimationError, Family, PredictionError};

#[derive(Parser)]
#[command(name = "dynsurv", version, about = "Copula-based dynamic survival prediction")]
struct Cli {
    /// Seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training/test data and latent truths.
    Simulate(SimulateArgs),
    /// Fit the joint model.
    Fit(FitArgs),
    /// Predict conditional survival for query histories.
    Predict(PredictArgs),
    /// Score a fitted model on a dataset.
    Evaluate(EvaluateArgs),
    /// Cross-validate fit and prediction.
    Crossval(CrossvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Ex1,
    Ex2,
    Ex3,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Copula family (overrides the config file).
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Built-in scenario; ignored when the config has a [simulation] table.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    tau_alpha: f64,
    /// Censoring is uniform on [0, censor_upper].
    #[arg(long, default_value_t = 20.0)]
    censor_upper: f64,
    #[arg(long, default_value_t = 100)]
    n_train: usize,
    #[arg(long)]
    n_test: Option<usize>,
    /// Training data CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    latent: Option<PathBuf>,
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[arg(long)]
    test_latent: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    data: PathBuf,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Bootstrap replicates for percentile intervals.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Human-readable summary (default: stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query CSV: id, t1..tK with empty cells for unobserved events.
    #[arg(long)]
    queries: PathBuf,
    /// Survival curves CSV.
    #[arg(long)]
    out: PathBuf,
    /// CMST/CQST/interval summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// dp, p0, p<k>, p<k>m, or all.
    #[arg(long, default_value = "dp", value_delimiter = ',')]
    method: Vec<String>,
    /// Restriction time for CMST and intervals (default: model horizon).
    #[arg(long)]
    restriction: Option<f64>,
    /// Report survival at these times instead of the default grid.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Latent truths; point errors then use the true terminal times.
    #[arg(long)]
    latent: Option<PathBuf>,
    #[arg(long, default_value = "all", value_delimiter = ',')]
    method: Vec<String>,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Text table (default: stdout).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Brier and AUC curves CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, default_value = "all", value_delimiter = ',')]
    method: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    table: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Estimation(String),
    Prediction(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Estimation(_) => 3,
            Failure::Prediction(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Estimation(m) | Failure::Prediction(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn estimation(stage: &str) -> impl Fn(EstimationError) -> Failure + '_ {
    move |e| match e {
        EstimationError::InvalidSetting(m) => Failure::Config(m),
        other => Failure::Estimation(format!("{stage}: {other}")),
    }
}

fn prediction(id: &str) -> impl Fn(PredictionError) -> Failure + '_ {
    move |e| Failure::Prediction(format!("query {id}: {e}"))
}

type Result<T> = std::result::Result<T, Failure>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Config(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", path.display())))
}

/// Loads the config (or defaults) and applies the family and seed overrides.
fn load_config(arg: &ConfigArg, seed: Option<u64>) -> Result<(RunConfig, Option<String>)> {
    let (mut cfg, hash) = match &arg.config {
        Some(p) => {
            let (c, h) = RunConfig::load(p)?;
            (c, Some(h))
        }
        None => (RunConfig::default(), None),
    };
    if let Some(f) = &arg.family {
        cfg.family = Family::parse(f).ok_or_else(|| Failure::Config(format!("family: unknown family '{f}'")))?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, hash))
}

fn parse_methods(names: &[String], num_events: usize) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(Method::all(num_events));
            continue;
        }
        let m = Method::parse(n).ok_or_else(|| Failure::Config(format!("method: unknown method '{n}'")))?;
        if let Method::Pk(k) | Method::Pkm(k) = m {
            if k >= num_events {
                return Err(Failure::Config(format!("method: {m} needs event {} but the model has {num_events}", k + 1)));
            }
        }
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn read_data(path: &Path) -> Result<Dataset> {
    Ok(io::read_dataset(open(path)?)?)
}

fn cmd_simulate(args: &SimulateArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, hash) = load_config(&args.config, None)?;
    let mut sim = match (&cfg.simulation, args.preset) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => {
            let scenario = match p {
                PresetArg::Ex1 => Scenario::Ex1,
                PresetArg::Ex2 => Scenario::Ex2,
                PresetArg::Ex3 => Scenario::Ex3,
            };
            let mut s = SimulationConfig::preset(scenario, args.k, args.tau_alpha, args.censor_upper, args.n_train, cfg.seed);
            if let Some(f) = &args.config.family {
                s.family = Family::parse(f).ok_or_else(|| Failure::Config(format!("family: unknown family '{f}'")))?;
            }
            s
        }
        (None, None) => return Err(Failure::Config("simulate needs --preset or a [simulation] table".into())),
    };
    if let Some(n) = args.n_test {
        sim.n_test = n;
    }
    if let Some(s) = seed {
        sim.seed = s;
    }
    let data = simulate_dataset(&sim).map_err(estimation("simulation"))?;
    let prov = Provenance::new("simulate", Some(sim.seed), hash);
    io::write_dataset(create(&args.out)?, &data.train, Some(&prov))?;
    if let Some(p) = &args.latent {
        io::write_latent(create(p)?, &data.train_latent, Some(&prov))?;
    }
    if let Some(p) = &args.test_out {
        io::write_dataset(create(p)?, &data.test, Some(&prov))?;
    }
    if let Some(p) = &args.test_latent {
        io::write_latent(create(p)?, &data.test_latent, Some(&prov))?;
    }
    Ok(())
}

fn fit_summary(model: &FittedJointModel) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "family {}  n {}  K {}  loglik {:.4}  AIC {:.4}\n",
        model.family, model.num_subjects, model.num_events, model.loglik, model.aic
    ));
    s.push_str(&format!("{:<12} {:>10}  {}\n", "parameter", "tau", "95% CI"));
    let ci = |iv: Option<&dynsurv::fit::PercentileInterval>| {
        iv.map_or_else(|| "-".to_string(), |i| format!("[{:.3}, {:.3}]", i.lower, i.upper))
    };
    let boot = model.bootstrap.as_ref();
    if let Some(a) = &model.alpha {
        s.push_str(&format!(
            "{:<12} {:>10.4}  {}\n",
            "alpha",
            a.tau,
            ci(boot.and_then(|b| b.tau_alpha.as_ref()))
        ));
    }
    for (k, a) in model.associations.iter().enumerate() {
        s.push_str(&format!(
            "{:<12} {:>10.4}  {}\n",
            format!("theta{}", k + 1),
            a.tau,
            ci(boot.and_then(|b| b.tau_thetas.get(k)))
        ));
    }
    if let Some(b) = boot {
        s.push_str(&format!("bootstrap replicates {} (failed {})\n", b.replicates, b.failed));
    }
    for w in &model.diagnostics.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => create(p)?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, hash) = load_config(&args.config, seed)?;
    let data = read_data(&args.data)?;
    let settings = cfg.fit_settings();
    let mut model = fit_joint_model(&data, cfg.family, &settings).map_err(estimation("fit"))?;
    if let Some(b) = args.bootstrap {
        if b < 2 {
            return Err(Failure::Config("bootstrap: need at least 2 replicates".into()));
        }
        model.bootstrap = Some(bootstrap(&data, cfg.family, &settings, b, cfg.seed).map_err(estimation("bootstrap"))?);
    }
    let prov = Provenance::new("fit", Some(cfg.seed), hash);
    let mut out = create(&args.out)?;
    io::write_model(&mut out, &model, &prov)?;
    out.flush()?;
    emit(args.summary.as_ref(), &fit_summary(&model))
}

fn resample(p: &SurvivalPrediction, times: &[f64]) -> SurvivalPrediction {
    SurvivalPrediction {
        times: times.to_vec(),
        values: times.iter().map(|&t| p.value_at(t)).collect(),
        ..p.clone()
    }
}

fn cmd_predict(args: &PredictArgs, seed: Option<u64>) -> Result<()> {
    let model = io::read_model(open(&args.model)?)?;
    let queries = io::read_queries(open(&args.queries)?)?;
    let methods = parse_methods(&args.method, model.num_events)?;
    let predictor = Predictor::from_model(&model);
    let restriction = args.restriction.unwrap_or(model.horizon);
    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    let mut fallbacks = 0usize;
    for q in &queries {
        for &m in &methods {
            let (p, fell_back) = predictor.predict_or_p0(q, m, Some(restriction)).map_err(prediction(&q.id))?;
            fallbacks += usize::from(fell_back);
            summaries.push(p.summary(restriction));
            curves.push(match &args.times {
                Some(t) => resample(&p, t),
                None => p,
            });
        }
    }
    if fallbacks > 0 {
        eprintln!("note: {fallbacks} prediction(s) used P0 because the conditioning event was not observed");
    }
    let prov = Provenance::new("predict", seed, None);
    io::write_predictions(create(&args.out)?, &curves, Some(&prov))?;
    if let Some(path) = &args.summary {
        io::write_summaries(create(path)?, &summaries, Some(&prov))?;
    }
    Ok(())
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "-".into()
    }
}

fn report_table(r: &EvaluationReport) -> String {
    let mut s = format!(
        "restriction {}  subjects {}  zero-weight {}\n{:<6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        r.restriction, r.subjects, r.zero_weight_subjects, "method", "MSPE", "QPE", "IBS", "AUC", "CP", "MID", "rel.MSPE"
    );
    for m in &r.methods {
        s.push_str(&format!(
            "{:<6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            m.method.to_string(),
            fmt_num(m.mspe),
            fmt_num(m.qpe),
            fmt_num(m.ibs),
            fmt_num(m.mean_auc.unwrap_or(f64::NAN)),
            fmt_num(m.cp),
            fmt_num(m.mid),
            fmt_num(m.relative.map_or(f64::NAN, |x| x.mspe)),
        ));
    }
    s
}

fn cv_table(r: &CvReport) -> String {
    let mut s = format!(
        "splits {} (failed {})\n{:<6} {:>18} {:>18} {:>18} {:>18}\n",
        r.splits, r.failed, "method", "MSPE", "QPE", "IBS", "rel.MSPE"
    );
    let ms = |x: dynsurv::evaluation::MeanSd| format!("{} ({})", fmt_num(x.mean), fmt_num(x.sd));
    for m in &r.methods {
        s.push_str(&format!(
            "{:<6} {:>18} {:>18} {:>18} {:>18}\n",
            m.method.to_string(),
            ms(m.mspe),
            ms(m.qpe),
            ms(m.ibs),
            ms(m.relative_mspe)
        ));
    }
    s
}

fn write_json<T: serde::Serialize>(path: &Path, prov: &Provenance, value: &T) -> Result<()> {
    let doc = serde_json::json!({ "provenance": prov, "report": value });
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Failure::Config(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, hash) = load_config(&args.config, seed)?;
    let model = io::read_model(open(&args.model)?)?;
    let data = read_data(&args.data)?;
    if data.num_events() != model.num_events {
        return Err(Failure::Config(format!(
            "data has {} events but the model has {}",
            data.num_events(),
            model.num_events
        )));
    }
    let methods = parse_methods(&args.method, model.num_events)?;
    let mut outcomes = Outcomes::observed(data.records(), &model.censoring, cfg.metrics.ipcw);
    if let Some(p) = &args.latent {
        let latent = io::read_latent(open(p)?)?;
        if latent.len() != data.len() || latent.iter().zip(data.records()).any(|(l, r)| l.id != r.id) {
            return Err(Failure::Config("latent file does not match the data rows".into()));
        }
        let deaths: Vec<f64> = latent.iter().map(|l| l.death).collect();
        outcomes = outcomes.with_oracle(&deaths);
    }
    let predictor = Predictor::from_model(&model);
    let report = evaluate(&predictor, data.records(), &outcomes, &methods, &cfg.metrics);
    let prov = Provenance::new("evaluate", Some(cfg.seed), hash);
    write_json(&args.out, &prov, &report)?;
    if let Some(p) = &args.curves {
        let mut w = create(p)?;
        writeln!(w, "{}", prov.line())?;
        writeln!(w, "method,t,brier,auc")?;
        for m in &report.methods {
            for (i, t) in report.times.iter().enumerate() {
                let auc = m.auc[i].map_or_else(String::new, |a| a.to_string());
                writeln!(w, "{},{},{},{}", m.method, t, m.brier[i], auc)?;
            }
        }
    }
    emit(args.table.as_ref(), &report_table(&report))
}

fn cmd_crossval(args: &CrossvalArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, hash) = load_config(&args.config, seed)?;
    let data = read_data(&args.data)?;
    let methods = parse_methods(&args.method, data.num_events())?;
    let mut scheme = cfg.crossval;
    match (args.folds, args.test_fraction) {
        (Some(_), Some(_)) => return Err(Failure::Config("use either --folds or --test-fraction".into())),
        (Some(folds), None) => {
            let repeats = match scheme {
                CvScheme::KFold { repeats, .. } | CvScheme::Random { repeats, .. } => repeats,
            };
            scheme = CvScheme::KFold { folds, repeats };
        }
        (None, Some(test_fraction)) => {
            let repeats = match scheme {
                CvScheme::KFold { repeats, .. } | CvScheme::Random { repeats, .. } => repeats,
            };
            scheme = CvScheme::Random { test_fraction, repeats };
        }
        (None, None) => {}
    }
    if let Some(r) = args.repeats {
        scheme = match scheme {
            CvScheme::KFold { folds, .. } => CvScheme::KFold { folds, repeats: r },
            CvScheme::Random { test_fraction, .. } => CvScheme::Random { test_fraction, repeats: r },
        };
    }
    let report = cross_validate(&data, cfg.family, &cfg.fit_settings(), &scheme, &methods, &cfg.metrics, cfg.seed)
        .map_err(estimation("crossval"))?;
    let prov = Provenance::new("crossval", Some(cfg.seed), hash);
    write_json(&args.out, &prov, &report)?;
    emit(args.table.as_ref(), &cv_table(&report))
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Predict(a) => cmd_predict(a, cli.seed),
        Command::Evaluate(a) => cmd_evaluate(a, cli.seed),
        Command::Crossval(a) => cmd_crossval(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
