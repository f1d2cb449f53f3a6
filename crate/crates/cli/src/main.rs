use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spoclust::bimodality::{check_bimodal, oracle_modes, TwoComponentSpec};
use spoclust::evaluation::{bhi, ch_index, kmeans, select_k_by_ch, select_k_by_gap, GapRule, LabeledPartition};
use spoclust::io::{read_data, read_labels, write_columns, ModelJson};
use spoclust::select::{gamma_by_range, select_gamma_aic, CovarianceChoice, GammaGrid};
use spoclust::simulate::{loss_profile, run_experiment, ExperimentConfig};
use spoclust::{
    assign, spontaneous_cluster, spontaneous_cluster_fixed_identity, DataSet, Error, GammaIndex,
    IterationConfig, RestartConfig,
};

/// Clustering by the local minima of the gamma-loss.
#[derive(Parser)]
#[command(name = "spoclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect centers, fit covariances and assign every row.
    Cluster(ClusterArgs),
    /// Choose the power index from the data range or by AIC.
    SelectGamma(SelectArgs),
    /// Two-component bimodality conditions for the population loss.
    CheckBimodality(BimodalityArgs),
    /// Run a seeded simulation experiment.
    Simulate(SimulateArgs),
    /// Homogeneity and CH index of a fitted model against known labels.
    Evaluate(EvaluateArgs),
    /// K-means baseline with a fixed or selected K.
    Kmeans(KmeansArgs),
    /// Mean-only loss along the segment between two points.
    Profile(ProfileArgs),
}

#[derive(Args)]
struct Input {
    /// Numeric CSV, one observation per row.
    #[arg(long)]
    input: PathBuf,
    /// The first row holds data, not column names.
    #[arg(long)]
    no_header: bool,
}

impl Input {
    fn load(&self) -> Result<DataSet, Error> {
        read_data(BufReader::new(open(&self.input)?), !self.no_header)
    }
}

#[derive(Args)]
struct Restarts {
    /// Seed for the restart draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial values per restart round.
    #[arg(long)]
    restarts: Option<usize>,
    /// Stopping threshold on the step size.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl Restarts {
    fn configs(&self) -> (RestartConfig, IterationConfig) {
        let mut r = RestartConfig::default().with_seed(self.seed);
        if let Some(m) = self.restarts {
            r.m = m;
        }
        let mut i = IterationConfig::default();
        if let Some(e) = self.epsilon {
            i.epsilon = e;
        }
        if let Some(m) = self.max_iter {
            i.max_iter = m;
        }
        (r, i)
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: Input,
    /// Power index for the centers.
    #[arg(long)]
    gamma: f64,
    /// Power index for the covariances; defaults to `--gamma`.
    #[arg(long, conflicts_with = "fixed_identity")]
    gamma_sigma: Option<f64>,
    /// Keep every covariance at the identity.
    #[arg(long)]
    fixed_identity: bool,
    /// Model JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    restarts: Restarts,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    Range,
    Aic,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum)]
    method: SelectMethod,
    /// Expected number of clusters along the widest feature (range rule).
    #[arg(long, default_value_t = 2)]
    k_prior: usize,
    /// Log-spaced AIC grid as `lo:hi:n`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GammaGrid>,
    /// Score AIC with identity covariances.
    #[arg(long)]
    fixed_identity: bool,
    #[command(flatten)]
    restarts: Restarts,
}

#[derive(Args)]
struct BimodalityArgs {
    /// Difference of the two means, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    nu: Vec<f64>,
    /// Common variance of both components.
    #[arg(long)]
    sigma2: f64,
    /// Proportion of the first component.
    #[arg(long)]
    tau1: f64,
    #[arg(long)]
    gamma: f64,
    /// Also count minima by dense evaluation along the segment.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 20001)]
    oracle_points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    FiveSpherical,
    TwoEllipsoidal,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment configuration (JSON).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in design instead of a configuration file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Number of runs for a preset.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Directory receiving `config.json` and `results.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: Input,
    /// One category identifier per row.
    #[arg(long)]
    labels: PathBuf,
    /// Model JSON; its labels are used when present, otherwise rows are
    /// assigned to the nearest component.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KSelect {
    Ch,
    Gap,
}

#[derive(Args)]
struct KmeansArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, required_unless_present = "select", conflicts_with = "select")]
    k: Option<usize>,
    #[arg(long, value_enum)]
    select: Option<KSelect>,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Reference draws for the gap statistic.
    #[arg(long, default_value_t = 20)]
    references: usize,
    /// Pick the largest gap instead of the one-standard-error rule.
    #[arg(long)]
    gap_argmax: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    input: Input,
    /// Start point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    from: Vec<f64>,
    /// End point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    to: Vec<f64>,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
}

fn parse_grid(s: &str) -> Result<GammaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err("expected lo:hi:n".into());
    };
    let lo: f64 = lo.parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("hi: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("n: {e}"))?;
    GammaGrid::log_spaced(lo, hi, n).map_err(|e| e.to_string())
}

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) -> Result<(), Error> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cluster(a: &ClusterArgs) -> Result<(), Error> {
    let data = a.input.load()?;
    let (rcfg, icfg) = a.restarts.configs();
    let g = GammaIndex::new(a.gamma)?;
    let c = if a.fixed_identity {
        spontaneous_cluster_fixed_identity(&data, g, &rcfg, &icfg)?
    } else {
        let g2 = GammaIndex::new(a.gamma_sigma.unwrap_or(a.gamma))?;
        spontaneous_cluster(&data, g, g2, &rcfg, &icfg)?
    };
    let model = ModelJson::new(&c.model, Some(&c.partition));
    match &a.out {
        Some(path) => {
            let mut sink = create(path)?;
            model.write(&mut sink)?;
            sink.flush()?;
            let d = &c.diagnostics;
            eprintln!(
                "{} clusters, sizes {:?} ({} restarts in {} rounds, {} not converged)",
                c.k(),
                c.partition.sizes(),
                d.restarts,
                d.rounds,
                d.non_converged
            );
        }
        None => {
            let mut out = io::stdout().lock();
            model.write(&mut out)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn select_gamma(a: &SelectArgs) -> Result<(), Error> {
    let data = a.input.load()?;
    match a.method {
        SelectMethod::Range => {
            println!("gamma {}", gamma_by_range(&data, a.k_prior)?.value());
        }
        SelectMethod::Aic => {
            let (rcfg, icfg) = a.restarts.configs();
            let grid = a.grid.clone().unwrap_or_default();
            let choice = if a.fixed_identity {
                CovarianceChoice::FixedIdentity
            } else {
                CovarianceChoice::SameIndex
            };
            let report = select_gamma_aic(&data, &grid, &rcfg, &icfg, choice)?;
            println!("gamma {}", report.best_gamma().value());
            println!("k {}", report.best().k);
            println!("# gamma k aic");
            for r in &report.records {
                println!("{} {} {}", r.gamma_mu.value(), r.k, r.aic);
            }
            for (g, _, reason) in &report.failures {
                println!("# gamma {} failed: {reason}", g.value());
            }
        }
    }
    Ok(())
}

fn check_bimodality(a: &BimodalityArgs) -> Result<(), Error> {
    let spec = TwoComponentSpec::new(a.nu.clone(), a.sigma2, a.tau1, GammaIndex::new(a.gamma)?)?;
    let v = check_bimodal(&spec);
    println!("bimodal {}", v.bimodal);
    println!("d {}", v.d);
    match v.upper {
        Some(c) => println!("upper {} > {}: {}", c.lhs, c.rhs, v.upper_holds()),
        None => println!("upper not applicable"),
    }
    match v.lower {
        Some(c) => println!("lower {} < {}: {}", c.lhs, c.rhs, v.lower_holds()),
        None => println!("lower not applicable"),
    }
    if let Some(b) = v.displacement_bound {
        println!("displacement_bound {b}");
    }
    if a.oracle {
        let modes = oracle_modes(&spec, a.oracle_points)?;
        println!("oracle_minima {}", modes.count());
        let locations: Vec<String> = modes.minima.iter().map(|t| t.to_string()).collect();
        println!("oracle_t {}", locations.join(" "));
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<(), Error> {
    let cfg: ExperimentConfig = match (&a.config, a.preset) {
        (Some(path), _) => serde_json::from_reader(BufReader::new(open(path)?))
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?,
        (None, Some(Preset::FiveSpherical)) => ExperimentConfig::five_spherical(a.runs),
        (None, Some(Preset::TwoEllipsoidal)) => ExperimentConfig::two_ellipsoidal(a.runs),
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", a.out.display())))?;
    let report = run_experiment(&cfg)?;

    let mut sink = create(&a.out.join("config.json"))?;
    serde_json::to_writer_pretty(&mut sink, &cfg)?;
    writeln!(sink)?;
    sink.flush()?;
    let mut sink = create(&a.out.join("results.jsonl"))?;
    report.write_json_lines(&mut sink)?;
    sink.flush()?;

    println!("true K {}, {} runs", report.true_k, report.runs);
    for s in &report.summaries {
        let freq: Vec<String> = s.k_frequency.iter().map(|(k, c)| format!("{k}:{c}")).collect();
        println!(
            "{:<12} K {}  failures {}  mean BHI {}",
            s.method.name(),
            freq.join(" "),
            s.failures,
            s.mean_bhi.map_or("-".into(), |b| format!("{b:.3}"))
        );
        if let (Some(dm), Some(dv)) = (&s.mean_dm, &s.mean_dv) {
            println!("{:<12} DM {dm:.3?}  DV {dv:.3?}", "");
        }
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<(), Error> {
    let data = a.input.load()?;
    let truth = read_labels(BufReader::new(open(&a.labels)?), false)?;
    let model = ModelJson::read(BufReader::new(open(&a.model)?))?;
    let partition = match model.partition()? {
        Some(p) => p,
        None => assign(&data, model.to_model()?)?.1,
    };
    if partition.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: partition.n(),
        });
    }
    let lp = LabeledPartition::new(partition.clone(), truth.labels().to_vec())?;
    println!("k {}", partition.k());
    println!("bhi {}", bhi(&lp));
    match ch_index(&data, &partition) {
        Ok(ch) => println!("ch {}", serde_json::to_string(&ch)?),
        Err(Error::DegenerateK { .. }) => println!("ch undefined"),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn kmeans_cmd(a: &KmeansArgs) -> Result<(), Error> {
    let data = a.input.load()?;
    let (fit, curve) = match (a.k, a.select) {
        (Some(k), _) => {
            if k == 0 || k > data.n() {
                return Err(Error::DegenerateK { k, n: data.n() });
            }
            (kmeans(&data, k, a.restarts, a.seed)?, json!(null))
        }
        (None, Some(KSelect::Ch)) => {
            let (fit, curve) = select_k_by_ch(&data, a.k_max, a.restarts, a.seed)?;
            (fit, json!(curve))
        }
        (None, Some(KSelect::Gap)) => {
            let rule = if a.gap_argmax {
                GapRule::Argmax
            } else {
                GapRule::FirstSeMax
            };
            let (fit, gap) =
                select_k_by_gap(&data, a.k_max, a.references, a.restarts, rule, a.seed)?;
            (fit, json!(gap))
        }
        (None, None) => unreachable!("clap requires one of --k and --select"),
    };
    print_json(&json!({
        "k": fit.partition.k(),
        "within_ss": fit.within_ss,
        "centers": fit.centers,
        "labels": fit.partition.labels(),
        "curve": curve,
    }))
}

fn profile(a: &ProfileArgs) -> Result<(), Error> {
    let data = a.input.load()?;
    let rows = loss_profile(&data, &a.from, &a.to, GammaIndex::new(a.gamma)?, a.points)?;
    let mut out = io::stdout().lock();
    write_columns(&mut out, &rows)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cluster(a) => cluster(a),
        Command::SelectGamma(a) => select_gamma(a),
        Command::CheckBimodality(a) => check_bimodality(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Kmeans(a) => kmeans_cmd(a),
        Command::Profile(a) => profile(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
