//! Command-line surface: argument and config-file handling plus the
//! `build`, `detect`, `oracle`, `bench` and `gen` commands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dod::{detect_partitioned, DodParams, DodResult, VerifyMode};
use crate::error::{Error, Result};
use crate::io::{self, DataFormat};
use crate::knn::BuildParams;
use crate::metric::{Dataset, MetricKind, ObjectId};
use crate::mrpg::{build_graph, BuildReport, GraphKind, Mrpg};
use crate::oracle::brute_force_outliers;
use crate::synth::{self, MixtureSpec};
use crate::vptree::VpTree;

const DEFAULT_K: usize = 10;
const VP_TREE_CAPACITY: usize = 16;

#[derive(Debug, Parser)]
#[command(name = "dodgraph", version, about = "Exact distance-based outlier detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a proximity graph and write it in binary form.
    Build(RunArgs),
    /// Detect outliers, writing ids and a stats record.
    Detect(RunArgs),
    /// Brute-force neighbor counts as CSV.
    Oracle(RunArgs),
    /// Sweep sampling rate, k, r and threads; one CSV row per cell.
    Bench(BenchArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Key-value (TOML) config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// fvecs, bvecs, csv or words (default: from the file extension).
    #[arg(long)]
    pub format: Option<String>,
    /// l1, l2, l4, angular or edit.
    #[arg(long)]
    pub metric: Option<String>,
    /// Rescale vectors to unit length on load.
    #[arg(long)]
    pub normalize: bool,
    /// kgraph, mrpg-basic or mrpg.
    #[arg(long)]
    pub graph: Option<String>,
    /// Graph degree.
    #[arg(long = "K")]
    pub big_k: Option<usize>,
    /// Length of stored exact neighbor lists.
    #[arg(long = "Kprime")]
    pub k_prime: Option<usize>,
    /// Number of objects that get exact lists.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Distance threshold.
    #[arg(long)]
    pub r: Option<f64>,
    /// Count threshold.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// vptree, scan or auto.
    #[arg(long)]
    pub verify: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prebuilt graph to load instead of building one (detect).
    #[arg(long)]
    pub graph_file: Option<PathBuf>,
    /// Where detect writes its stats record (default: `<out>.stats.json`).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Sampling rates in (0, 1].
    #[arg(long, value_delimiter = ',')]
    pub sampling: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub rs: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub thread_counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Mixture,
    Uniform,
    Words,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "mixture")]
    pub kind: GenKind,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.01)]
    pub outlier_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sparse_fraction: f64,
    /// Output format (default: from the file extension).
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Contents of a `--config` file. Keys mirror the flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub metric: Option<String>,
    pub normalize: Option<bool>,
    pub graph: Option<String>,
    #[serde(rename = "K")]
    pub big_k: Option<usize>,
    #[serde(rename = "Kprime")]
    pub k_prime: Option<usize>,
    pub m: Option<usize>,
    pub repeats: Option<usize>,
    pub r: Option<f64>,
    pub k: Option<usize>,
    pub threads: Option<usize>,
    pub verify: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub graph_file: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub sampling: Option<Vec<f64>>,
    pub ks: Option<Vec<usize>>,
    pub rs: Option<Vec<f64>>,
    pub thread_counts: Option<Vec<usize>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub metric: MetricKind,
    pub normalize: bool,
    pub graph: GraphKind,
    pub build: BuildParams,
    pub r: Option<f64>,
    pub k: Option<usize>,
    pub threads: usize,
    pub verify: VerifyMode,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub graph_file: Option<PathBuf>,
    pub stats: Option<PathBuf>,
}

impl RunConfig {
    /// Merges flags over the optional config file over defaults.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Self::merge(args, &file)
    }

    pub fn merge(args: &RunArgs, file: &ConfigFile) -> Result<Self> {
        let pick = |flag: &Option<String>, file: &Option<String>| flag.clone().or_else(|| file.clone());
        let metric = pick(&args.metric, &file.metric)
            .map(|m| m.parse())
            .transpose()?
            .unwrap_or(MetricKind::L2);
        let format = pick(&args.format, &file.format).map(|f| f.parse()).transpose()?;
        let graph = pick(&args.graph, &file.graph)
            .map(|g| g.parse())
            .transpose()?
            .unwrap_or(GraphKind::Mrpg);
        let verify = pick(&args.verify, &file.verify)
            .map(|v| v.parse())
            .transpose()?
            .unwrap_or(VerifyMode::Auto);
        let seed = args.seed.or(file.seed).unwrap_or(0);

        let big_k = args.big_k.or(file.big_k).unwrap_or(DEFAULT_K);
        let mut build = BuildParams::new(big_k).with_seed(seed);
        if let Some(kp) = args.k_prime.or(file.k_prime) {
            build.k_prime = kp;
        }
        if graph == GraphKind::MrpgBasic {
            build.k_prime = big_k;
        }
        build.m = args.m.or(file.m);
        if let Some(repeats) = args.repeats.or(file.repeats) {
            build.repeats = repeats;
        }
        build.validate()?;

        let threads = args.threads.or(file.threads).unwrap_or(1);
        if threads == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(RunConfig {
            dataset: args.dataset.clone().or_else(|| file.dataset.clone()),
            format,
            metric,
            normalize: args.normalize || file.normalize.unwrap_or(false),
            graph,
            build,
            r: args.r.or(file.r),
            k: args.k.or(file.k),
            threads,
            verify,
            seed,
            out: args.out.clone().or_else(|| file.out.clone()),
            graph_file: args.graph_file.clone().or_else(|| file.graph_file.clone()),
            stats: args.stats.clone().or_else(|| file.stats.clone()),
        })
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self
            .dataset
            .as_deref()
            .ok_or_else(|| Error::Config("--dataset is required".into()))?;
        let format = match self.format {
            Some(f) => f,
            None if self.metric == MetricKind::Edit => DataFormat::Words,
            None => DataFormat::from_path(path).ok_or_else(|| {
                Error::Config(format!("cannot infer the format of {}; pass --format", path.display()))
            })?,
        };
        io::load_dataset(path, format, self.metric, self.normalize)
    }

    pub fn dod_params(&self) -> Result<DodParams> {
        let r = self.r.ok_or_else(|| Error::Config("--r is required".into()))?;
        let k = self.k.ok_or_else(|| Error::Config("--k is required".into()))?;
        let params = DodParams {
            r,
            k,
            threads: self.threads,
            verify: self.verify,
            seed: self.seed,
            chain_pivots: false,
        };
        params.validate()?;
        Ok(params)
    }

    fn require_out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("--out is required".into()))
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Build(args) => cmd_build(&RunConfig::resolve(&args)?, stdout).map(|_| ()),
        Command::Detect(args) => cmd_detect(&RunConfig::resolve(&args)?, stdout).map(|_| ()),
        Command::Oracle(args) => cmd_oracle(&RunConfig::resolve(&args)?, stdout),
        Command::Bench(args) => {
            let file = match &args.run.config {
                Some(path) => ConfigFile::load(path)?,
                None => ConfigFile::default(),
            };
            let config = RunConfig::merge(&args.run, &file)?;
            let grid = SweepGrid::merge(&args, &file, &config);
            cmd_bench(&config, &grid, stdout)
        }
        Command::Gen(args) => cmd_gen(&args, stdout),
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn print_timings(report: &BuildReport, out: &mut dyn Write) -> Result<()> {
    let t = &report.timings;
    let label = if report.graph.kind == GraphKind::KGraph {
        "NNDescent"
    } else {
        "NNDescent+"
    };
    let rows = [
        (label, t.nndescent),
        ("Connect-SubGraphs", t.connect_subgraphs),
        ("Remove-Detours", t.remove_detours),
        ("Remove-Links", t.remove_links),
        ("Total", t.total()),
    ];
    for (name, d) in rows {
        writeln!(out, "{name:<18} {:>10.3} s", d.as_secs_f64()).map_err(out_err)?;
    }
    let g = &report.graph;
    writeln!(
        out,
        "graph {}: n={} edges={} pivots={} exact={} iterations={}",
        g.kind,
        g.len(),
        g.edge_count(),
        g.pivot_count(),
        g.exact_flagged().len(),
        report.stats.iterations
    )
    .map_err(out_err)
}

/// Builds the configured graph and writes it to `out`.
pub fn cmd_build(config: &RunConfig, stdout: &mut dyn Write) -> Result<BuildReport> {
    let out = config.require_out()?;
    let ds = config.load_dataset()?;
    let report = build_graph(&ds, config.graph, &config.build)?;
    io::write_graph(out, &report.graph, ds.checksum())?;
    print_timings(&report, stdout)?;
    Ok(report)
}

/// Stats record written next to the outlier ids.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DetectStats {
    pub n: usize,
    pub r: f64,
    pub k: usize,
    pub graph: String,
    pub filter_time: f64,
    pub verify_time: f64,
    pub f: usize,
    pub t: usize,
    pub candidate_count: usize,
    pub verify_count: usize,
    pub rho: f64,
    pub distance_evals: u64,
    pub threads: usize,
    pub verify_mode: String,
}

impl DetectStats {
    fn new(ds: &Dataset, g: &Mrpg, res: &DodResult, params: &DodParams) -> Self {
        DetectStats {
            n: ds.len(),
            r: params.r,
            k: params.k,
            graph: g.kind.to_string(),
            filter_time: res.filter_time.as_secs_f64(),
            verify_time: res.verify_time.as_secs_f64(),
            f: res.false_positive_count,
            t: res.outlier_count,
            candidate_count: res.candidate_count,
            verify_count: res.candidates.len(),
            rho: res.rho,
            distance_evals: res.distance_evals,
            threads: res.threads,
            verify_mode: res.verify_mode.to_string(),
        }
    }
}

fn obtain_graph(config: &RunConfig, ds: &Dataset) -> Result<Mrpg> {
    match &config.graph_file {
        Some(path) => {
            let (header, g) = io::read_graph(path)?;
            io::check_graph_matches(&header, ds)?;
            Ok(g)
        }
        None => Ok(build_graph(ds, config.graph, &config.build)?.graph),
    }
}

fn detect_on(ds: &Dataset, g: &Mrpg, params: &DodParams) -> Result<DodResult> {
    let tree = if params.verify == VerifyMode::VpTree {
        Some(VpTree::build(
            ds,
            VP_TREE_CAPACITY,
            &mut ChaCha8Rng::seed_from_u64(params.seed),
        )?)
    } else {
        None
    };
    detect_partitioned(ds, g, tree.as_ref(), params)
}

/// Runs detection; writes ids to `out` (or stdout) and the stats record.
pub fn cmd_detect(config: &RunConfig, stdout: &mut dyn Write) -> Result<DetectStats> {
    let params = config.dod_params()?;
    let ds = config.load_dataset()?;
    let g = obtain_graph(config, &ds)?;
    let res = detect_on(&ds, &g, &params)?;
    let stats = DetectStats::new(&ds, &g, &res, &params);
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    match &config.out {
        Some(out) => {
            io::write_ids(out, &res.outliers)?;
            let stats_path = config.stats.clone().unwrap_or_else(|| {
                let mut name = out.as_os_str().to_owned();
                name.push(".stats.json");
                PathBuf::from(name)
            });
            std::fs::write(&stats_path, format!("{json}\n")).map_err(|e| Error::io(&stats_path, e))?;
            writeln!(stdout, "{json}").map_err(out_err)?;
        }
        None => {
            for id in &res.outliers {
                writeln!(stdout, "{id}").map_err(out_err)?;
            }
            if let Some(path) = &config.stats {
                std::fs::write(path, format!("{json}\n")).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    Ok(stats)
}

/// Writes `id,neighbor_count,outlier` for every object.
pub fn cmd_oracle(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let r = config.r.ok_or_else(|| Error::Config("--r is required".into()))?;
    let k = config.k.ok_or_else(|| Error::Config("--k is required".into()))?;
    let ds = config.load_dataset()?;
    let report = brute_force_outliers(&ds, r, k);
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["id", "neighbor_count", "outlier"])?;
        for (id, &count) in report.neighbor_counts.iter().enumerate() {
            csv.write_record([id.to_string(), count.to_string(), u8::from(count < k).to_string()])?;
        }
        csv.flush()
    };
    match &config.out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write(&mut file).map_err(|e| Error::io(path, e))
        }
        None => write(stdout).map_err(out_err),
    }
}

/// Axes of a benchmark sweep; the grid is their cartesian product.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub sampling: Vec<f64>,
    pub ks: Vec<usize>,
    /// Empty with `derive_r` set means: derive one radius per cell.
    pub rs: Vec<f64>,
    pub threads: Vec<usize>,
}

impl SweepGrid {
    /// Axes not given anywhere fall back to the single base value; a missing
    /// `r` is derived per sample for a 1% outlier ratio.
    pub fn merge(args: &BenchArgs, file: &ConfigFile, config: &RunConfig) -> Self {
        SweepGrid {
            sampling: args
                .sampling
                .clone()
                .or_else(|| file.sampling.clone())
                .unwrap_or_else(|| vec![1.0]),
            ks: args
                .ks
                .clone()
                .or_else(|| file.ks.clone())
                .unwrap_or_else(|| vec![config.k.unwrap_or(DEFAULT_K)]),
            rs: args
                .rs
                .clone()
                .or_else(|| file.rs.clone())
                .unwrap_or_else(|| config.r.into_iter().collect()),
            threads: args
                .thread_counts
                .clone()
                .or_else(|| file.thread_counts.clone())
                .unwrap_or_else(|| vec![config.threads]),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sampling.is_empty() || self.ks.is_empty() || self.threads.is_empty()
    }
}

/// Header of the benchmark CSV.
pub const BENCH_HEADER: [&str; 14] = [
    "sampling_rate",
    "n",
    "k",
    "r",
    "threads",
    "build_time",
    "detect_time",
    "filter_time",
    "verify_time",
    "f",
    "t",
    "rho",
    "distance_evals",
    "contention",
];

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub sampling_rate: f64,
    pub n: usize,
    pub k: usize,
    pub r: f64,
    pub threads: usize,
    pub build_time: f64,
    pub detect_time: f64,
    pub filter_time: f64,
    pub verify_time: f64,
    pub f: usize,
    pub t: usize,
    pub rho: f64,
    pub distance_evals: u64,
    /// More threads did not reduce detect time, or exceed available cores.
    pub contention: bool,
}

/// Runs the sweep and returns its rows.
pub fn bench_rows(config: &RunConfig, grid: &SweepGrid) -> Result<Vec<BenchRow>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = grid.sampling.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
        return Err(Error::Config(format!("sampling rate {bad} is outside (0, 1]")));
    }
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let full = config.load_dataset()?;
    let mut rows = Vec::new();
    for &rate in &grid.sampling {
        let n = ((full.len() as f64 * rate).ceil() as usize).clamp(1, full.len());
        let ds = if n == full.len() {
            full.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut ids: Vec<ObjectId> = index::sample(&mut rng, full.len(), n)
                .into_iter()
                .map(|i| i as ObjectId)
                .collect();
            ids.sort_unstable();
            full.subset(&ids)?
        };
        let started = Instant::now();
        let g = build_graph(&ds, config.graph, &config.build)?.graph;
        let build_time = started.elapsed();
        for &k in &grid.ks {
            let rs = if grid.rs.is_empty() {
                vec![synth::radius_for_outlier_ratio(&ds, k, 0.01, 1000, config.seed)]
            } else {
                grid.rs.clone()
            };
            for &r in &rs {
                let mut previous: Option<Duration> = None;
                let mut threads = grid.threads.clone();
                threads.sort_unstable();
                for &t in &threads {
                    let params = DodParams {
                        r,
                        k,
                        threads: t,
                        verify: config.verify,
                        seed: config.seed,
                        chain_pivots: false,
                    };
                    let started = Instant::now();
                    let res = detect_on(&ds, &g, &params)?;
                    let detect_time = started.elapsed();
                    let contention =
                        t > cores || previous.is_some_and(|p| detect_time >= p);
                    previous = Some(detect_time);
                    rows.push(BenchRow {
                        sampling_rate: rate,
                        n: ds.len(),
                        k,
                        r,
                        threads: t,
                        build_time: build_time.as_secs_f64(),
                        detect_time: detect_time.as_secs_f64(),
                        filter_time: res.filter_time.as_secs_f64(),
                        verify_time: res.verify_time.as_secs_f64(),
                        f: res.false_positive_count,
                        t: res.outlier_count,
                        rho: res.rho,
                        distance_evals: res.distance_evals,
                        contention,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Writes the sweep as CSV (header only for an empty grid).
pub fn write_bench_csv(rows: &[BenchRow], w: &mut dyn Write) -> std::io::Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    csv.write_record(BENCH_HEADER)?;
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()
}

pub fn cmd_bench(config: &RunConfig, grid: &SweepGrid, stdout: &mut dyn Write) -> Result<()> {
    let rows = bench_rows(config, grid)?;
    match &config.out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_bench_csv(&rows, &mut file).map_err(|e| Error::io(path, e))
        }
        None => write_bench_csv(&rows, stdout).map_err(out_err),
    }
}

pub fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<()> {
    let format = match &args.format {
        Some(f) => f.parse()?,
        None if args.kind == GenKind::Words => DataFormat::Words,
        None => DataFormat::from_path(&args.out).unwrap_or(DataFormat::Fvecs),
    };
    let ds = match args.kind {
        GenKind::Mixture => MixtureSpec {
            clusters: args.clusters,
            outlier_fraction: args.outlier_fraction,
            sparse_fraction: args.sparse_fraction,
            ..MixtureSpec::new(args.n, args.dim, args.seed)
        }
        .dataset(MetricKind::L2)?,
        GenKind::Uniform => synth::uniform(args.n, args.dim, MetricKind::L2, args.seed)?,
        GenKind::Words => synth::words(args.n, args.outlier_fraction, args.seed)?,
    };
    io::write_dataset(&args.out, &ds, format)?;
    writeln!(stdout, "wrote {} objects to {}", ds.len(), args.out.display()).map_err(out_err)
}
