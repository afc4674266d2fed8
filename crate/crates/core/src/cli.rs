//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 numerical
//! failure. Diagnostics go to stderr; results go to files or stdout.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::detector::{run_pipeline, tune_candidates, Candidate, Criterion, GridAxes, RunConfig};
use crate::drt::{DrtKind, DrtSettings};
use crate::error::{Error, Result};
use crate::experiments::{
    aggregate, curve_table, curves_by_dataset, evaluate_dataset, run_challenge_curve,
    run_odds_suite, write_curves, write_summary, Algorithm, AlgorithmGrids, Protocol,
};
use crate::io::{
    read_config, read_dataset, read_ranking, write_atomic, write_dataset, write_ranking,
    write_results,
};
use crate::metrics::MetricKind;
use crate::scoring::{auc, rws};
use crate::simgen::{generate, Challenge, ChallengeSpec, Scale, N_SHAPES};

/// Flags that take no value; `key = true` in a config file turns them on.
const SWITCHES: [&str; 1] = ["timing"];

#[derive(Debug, Parser)]
#[command(
    name = "drama",
    version,
    about = "Prototype-distance anomaly detection",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic challenge dataset and its metadata.
    Generate(GenerateArgs),
    /// Rank the rows of a dataset with one pipeline configuration.
    Detect(DetectArgs),
    /// Pick the best configuration from a few labelled outliers.
    Tune(TuneArgs),
    /// Compare algorithms under the seen-anomaly protocol.
    Benchmark(BenchmarkArgs),
    /// Print AUC and RWS of a ranking file against dataset labels.
    Score(ScoreArgs),
    /// Reproduce one figure-level comparison as plot-ready CSV.
    Figure(FigureArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub challenge: Challenge,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    /// Inlier shape (C-I) or anomaly class (C-II); defaults to seed mod 10.
    #[arg(long)]
    pub shape: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Training data; also scored unless --test is given.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value = "pca")]
    pub drt: DrtKind,
    #[arg(long, default_value = "l2")]
    pub metric: MetricKind,
    #[arg(long, default_value_t = 1)]
    pub ns: u32,
    #[arg(long, default_value = "off", value_parser = parse_on_off, action = clap::ArgAction::Set)]
    pub decode: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub latent_dim: usize,
    #[command(flatten)]
    pub drt_opts: DrtOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DrtOpts {
    /// Only center features instead of standardizing them.
    #[arg(long)]
    pub no_standardize: bool,
    /// Autoencoder training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl DrtOpts {
    fn settings(&self) -> DrtSettings {
        let mut s = DrtSettings::default();
        s.standardize = !self.no_standardize;
        if let Some(e) = self.epochs {
            s.ae.epochs = e;
        }
        s
    }
}

#[derive(Debug, Args)]
pub struct GridOpts {
    #[arg(long, value_delimiter = ',', default_value = "pca,ica,nmf,ae,vae")]
    pub drts: Vec<DrtKind>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "l1,l2,l4,wl2,wl4,braycurtis,chebyshev,canberra,correlation,mahalanobis"
    )]
    pub metrics: Vec<MetricKind>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub ns: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "off,on", value_parser = parse_on_off, action = clap::ArgAction::Set)]
    pub decode: Vec<bool>,
    #[arg(long, default_value_t = 2)]
    pub latent_dim: usize,
    #[command(flatten)]
    pub drt_opts: DrtOpts,
    #[arg(long, value_delimiter = ',', default_value = "10,20,35")]
    pub lof_k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub iforest_subsample: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
}

impl GridOpts {
    fn grids(&self) -> AlgorithmGrids {
        AlgorithmGrids {
            drama: GridAxes {
                drts: self.drts.clone(),
                metrics: self.metrics.clone(),
                n_s: self.ns.clone(),
                decode: self.decode.clone(),
                latent_dim: self.latent_dim,
                seed: 0,
                settings: self.drt_opts.settings(),
            },
            lof_k: self.lof_k.clone(),
            iforest_subsamples: self.iforest_subsample.clone(),
            iforest_trees: self.trees,
        }
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub n_seen: usize,
    /// Comma list, `a..b` (end excluded) or `a..=b`.
    #[arg(long, default_value = "0", value_parser = parse_seeds)]
    pub seeds: SeedList,
    #[arg(long, value_delimiter = ',', default_value = "drama")]
    pub algos: Vec<Algorithm>,
    #[arg(long, default_value = "auc", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[command(flatten)]
    pub grid: GridOpts,
    /// Score table, one row per seed and candidate.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Labelled dataset; or use --challenge.
    #[arg(
        long,
        conflicts_with = "challenge",
        required_unless_present = "challenge"
    )]
    pub data: Option<PathBuf>,
    /// Synthetic challenge, regenerated per repeat with seed = repeat index.
    #[arg(long)]
    pub challenge: Option<Challenge>,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    #[arg(long, value_delimiter = ',', default_value = "drama,lof,iforest")]
    pub algos: Vec<Algorithm>,
    #[arg(long, default_value_t = 5)]
    pub repeats: u64,
    /// First seed; repeats use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
    pub n_seen: Vec<usize>,
    #[arg(long, default_value = "auc", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[command(flatten)]
    pub grid: GridOpts,
    /// Record wall time per algorithm; otherwise seconds are written as 0.
    #[arg(long)]
    pub timing: bool,
    /// Result table.
    #[arg(long)]
    pub out: PathBuf,
    /// Mean/best summary table; printed to stdout when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub ranking: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    /// C-Ia and C-Ib.
    Fig4,
    /// C-IIa and C-IIb.
    Fig5,
    /// Real datasets from --data-dir.
    Fig6,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub id: FigureId,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    #[arg(long, default_value = "0..5", value_parser = parse_seeds)]
    pub seeds: SeedList,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
    pub n_seen: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "drama,lof,iforest")]
    pub algos: Vec<Algorithm>,
    #[command(flatten)]
    pub grid: GridOpts,
    /// Directory of labelled CSVs for fig6.
    #[arg(long, default_value = "data/odds")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub timing: bool,
    /// Output directory for results.csv and <id>.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

fn parse_on_off(s: &str) -> std::result::Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

fn parse_criterion(s: &str) -> std::result::Result<Criterion, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auc" => Ok(Criterion::Auc),
        "rws" => Ok(Criterion::Rws),
        _ => Err(format!("expected auc or rws, got {s:?}")),
    }
}

/// `3`, `0,4,9`, `0..5` or `0..=4`.
pub fn parse_seeds(s: &str) -> std::result::Result<SeedList, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|e| format!("bad seed {t:?}: {e}"))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',')
            .map(num)
            .collect::<std::result::Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed list {s:?} is empty"));
    }
    Ok(SeedList(seeds))
}

/// Pulls `--config FILE` out of the arguments and splices the file's
/// `key = value` pairs in right after the subcommand, so that later explicit
/// flags override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config: Option<PathBuf> = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            let p = it
                .next()
                .ok_or_else(|| Error::InvalidArgument("--config needs a file".into()))?;
            config = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let mut injected = Vec::new();
    for (key, value) in read_config(&path)? {
        if SWITCHES.contains(&key.as_str()) {
            if parse_on_off(&value).map_err(Error::InvalidArgument)? {
                injected.push(OsString::from(format!("--{key}")));
            }
        } else {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        }
    }
    // program name, subcommand, then the config values
    let at = rest.len().min(2);
    rest.splice(at..at, injected);
    Ok(rest)
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var("DRAMA_WORKERS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidArgument(format!("DRAMA_WORKERS={v:?} is not a positive integer"))
    })?;
    // fails only if a pool already exists, e.g. on a second in-process run
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let parsed = expand_config(args).and_then(|a| init_workers().map(|_| a));
    let args = match parsed {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate_cmd(&a),
        Command::Detect(a) => detect_cmd(&a),
        Command::Tune(a) => tune_cmd(&a),
        Command::Benchmark(a) => benchmark_cmd(&a),
        Command::Score(a) => score_cmd(&a),
        Command::Figure(a) => figure_cmd(&a),
    }
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let shape = a.shape.unwrap_or((a.seed % N_SHAPES as u64) as usize);
    let spec = ChallengeSpec::new(a.challenge, shape, a.seed, a.scale);
    let generated = generate(&spec)?;
    std::fs::create_dir_all(&a.out)?;
    let name = spec.dataset_name();
    write_dataset(&generated.dataset, &a.out.join(format!("{name}.csv")))?;
    let meta = serde_json::to_string_pretty(&generated.metadata)? + "\n";
    write_atomic(&a.out.join(format!("{name}.meta.json")), meta.as_bytes())
}

fn detect_cmd(a: &DetectArgs) -> Result<()> {
    let train = read_dataset(&a.data)?;
    let test = match &a.test {
        Some(p) => read_dataset(p)?,
        None => train.clone(),
    };
    let config = RunConfig {
        drt: a.drt,
        metric: a.metric,
        n_s: a.ns,
        latent_dim: a.latent_dim,
        decode: a.decode,
        seed: a.seed,
        settings: a.drt_opts.settings(),
    };
    let ranking = run_pipeline(&train.data, &test.data, &config)?;
    write_ranking(&ranking.scores, &ranking.ranks(), &a.out)
}

fn candidates_for(
    grids: &AlgorithmGrids,
    algos: &[Algorithm],
    seed: u64,
    n: usize,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for &algo in algos {
        out.extend(grids.candidates(algo, seed, n)?);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn tune_cmd(a: &TuneArgs) -> Result<()> {
    let dataset = read_dataset(&a.data)?;
    let grids = a.grid.grids();
    let mut table = String::from("seed,algorithm,config,partial,auc,rws,selected\n");
    for &seed in &a.seeds.0 {
        let candidates = candidates_for(&grids, &a.algos, seed, dataset.data.n_samples())?;
        let tuning = tune_candidates(&dataset, a.n_seen, &candidates, seed, a.criterion)?;
        for (i, row) in tuning.rows.iter().enumerate() {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{},{}",
                seed,
                row.candidate.algorithm(),
                row.candidate.id(),
                opt(row.partial),
                opt(row.auc),
                opt(row.rws),
                u8::from(i == tuning.best)
            );
        }
        let best = tuning.best_row();
        println!(
            "seed={} best={}:{} partial={} auc={} rws={}",
            seed,
            best.candidate.algorithm(),
            best.candidate.id(),
            opt(best.partial),
            opt(best.auc),
            opt(best.rws)
        );
    }
    write_atomic(&a.out, table.as_bytes())
}

fn protocol(
    algos: &[Algorithm],
    grid: &GridOpts,
    n_seen: &[usize],
    criterion: Criterion,
    timing: bool,
) -> Protocol {
    Protocol {
        algorithms: algos.to_vec(),
        grids: grid.grids(),
        n_seen: n_seen.to_vec(),
        criterion,
        timing,
    }
}

fn benchmark_cmd(a: &BenchmarkArgs) -> Result<()> {
    if a.repeats == 0 {
        return Err(Error::InvalidArgument(
            "--repeats must be at least 1".into(),
        ));
    }
    let protocol = protocol(&a.algos, &a.grid, &a.n_seen, a.criterion, a.timing);
    let seeds: Vec<u64> = (a.seed..a.seed + a.repeats).collect();
    let (rows, group) = match (&a.data, a.challenge) {
        (Some(path), _) => {
            let dataset = read_dataset(path)?;
            let mut rows = Vec::new();
            for &seed in &seeds {
                rows.extend(evaluate_dataset(&dataset, seed, &protocol)?);
            }
            (rows, dataset.name)
        }
        (None, Some(ch)) => {
            let (rows, _) = run_challenge_curve(ch, &seeds, a.scale, &protocol)?;
            (rows, ch.name().to_string())
        }
        (None, None) => return Err(Error::InvalidArgument("need --data or --challenge".into())),
    };
    write_results(&rows, &a.out)?;
    let points = aggregate(&rows);
    let table = curve_table(&[(group, points)]);
    match &a.summary {
        Some(p) => write_atomic(p, table.as_bytes()),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn score_cmd(a: &ScoreArgs) -> Result<()> {
    let ranking = read_ranking(&a.ranking)?;
    let dataset = read_dataset(&a.data)?;
    let labels = dataset.labels()?;
    println!(
        "auc={:?},rws={:?}",
        auc(&ranking.scores, labels)?,
        rws(&ranking.order, labels)?
    );
    Ok(())
}

fn figure_cmd(a: &FigureArgs) -> Result<()> {
    let protocol = protocol(&a.algos, &a.grid, &a.n_seen, Criterion::Auc, a.timing);
    std::fs::create_dir_all(&a.out)?;
    let name = match a.id {
        FigureId::Fig4 => "fig4",
        FigureId::Fig5 => "fig5",
        FigureId::Fig6 => "fig6",
    };
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    match a.id {
        FigureId::Fig4 | FigureId::Fig5 => {
            let challenges = if a.id == FigureId::Fig4 {
                [Challenge::C1a, Challenge::C1b]
            } else {
                [Challenge::C2a, Challenge::C2b]
            };
            for ch in challenges {
                let started = Instant::now();
                let (r, points) = run_challenge_curve(ch, &a.seeds.0, a.scale, &protocol)?;
                eprintln!(
                    "{}: {} rows in {:.1}s",
                    ch.name(),
                    r.len(),
                    started.elapsed().as_secs_f64()
                );
                rows.extend(r);
                groups.push((ch.name().to_string(), points));
            }
        }
        FigureId::Fig6 => {
            let (r, summary) = run_odds_suite(&a.data_dir, &a.seeds.0, &protocol)?;
            groups = curves_by_dataset(&r);
            write_summary(&summary, &a.out.join("fig6_winners.csv"))?;
            rows = r;
        }
    }
    write_results(&rows, &a.out.join("results.csv"))?;
    write_curves(&groups, &a.out.join(format!("{name}.csv")))
}
