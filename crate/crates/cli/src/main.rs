//! `maxgrad` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 invalid input,
//! 4 instance exceeds a size limit. Failures print one JSON object on stderr.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use maxgrad::cluster::{
    solve_facility_ultrametric, solve_ft_kmedian_ultrametric, solve_sigma_lp_ultrametric, ClusteringSolution,
    FaultToleranceProfile,
};
use maxgrad::embed::ScalePlan;
use maxgrad::experiments::{
    growth_curve, growth_fits, karp_cycle_embedding, karp_statistics, write_csv, ExperimentConfig, Family,
};
use maxgrad::metric::{diamond_graph, gen_cycle, gen_path, gen_random, RandomMode};
use maxgrad::oracle::{oracle_facility, oracle_ft_kmedian, oracle_sigma_lp};
use maxgrad::reduction::{reduce_detailed, Facility, FtKMedian, MonotoneProblem, SigmaLp, DEFAULT_SAMPLES};
use maxgrad::ultrametric::gen_random_ultrametric;
use maxgrad::{Error, FiniteMetric, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "maxgrad", version, about = "Random ultrametric embeddings and clustering on ultrametrics")]
struct Cli {
    /// Worker threads (defaults to the number of cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test instance as JSON
    Gen(GenArgs),
    /// Estimate the expected maximum gradient of the random embedding
    Embed(EmbedArgs),
    /// Solve a clustering problem exactly (or by FPTAS) on an ultrametric tree
    Cluster(ClusterArgs),
    /// Solve a clustering problem by brute force
    Oracle(OracleArgs),
    /// Solve a clustering problem on a metric through sampled ultrametrics
    Reduce(ReduceArgs),
    /// Growth curve of the expected maximum gradient, as CSV
    Bench(BenchArgs),
    /// Cycle-to-path embedding by deleting one edge
    Karp(KarpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Cycle,
    Path,
    Diamond,
    Random,
    Ultrametric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Euclidean2d,
    UniformPerturbed,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    /// Number of points (cycle, path, random, ultrametric)
    #[arg(long)]
    n: Option<usize>,
    /// Diamond level
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "euclidean2d")]
    mode: Mode,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Metric or weighted graph JSON
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// Also write the ultrametric tree of sample 0
    #[arg(long)]
    tree_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ObjectiveArg {
    FtKmedian,
    Facility,
    SigmaLp,
}

#[derive(Args)]
struct ObjectiveArgs {
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    /// Number of centers (ft_kmedian, sigma_lp)
    #[arg(long)]
    k: Option<usize>,
    /// Fault-tolerance profile: array in point order or object keyed by label
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Uniform fault-tolerance value when no profile file is given
    #[arg(long, default_value_t = 1)]
    j: usize,
    /// Opening costs: array in point order or object keyed by label
    #[arg(long)]
    open_cost: Option<PathBuf>,
    /// Uniform opening cost when no cost file is given
    #[arg(long)]
    facility_cost: Option<f64>,
    /// Norm exponent for sigma_lp: a number >= 1 or `inf`
    #[arg(long, value_parser = parse_exponent)]
    p: Option<f64>,
    /// Accuracy of the sigma_lp FPTAS, in (0, 1)
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Args)]
struct ClusterArgs {
    /// Ultrametric tree JSON
    #[arg(long)]
    ultrametric: PathBuf,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Metric or weighted graph JSON
    #[arg(long = "in", conflicts_with = "ultrametric", required_unless_present = "ultrametric")]
    input: Option<PathBuf>,
    /// Ultrametric tree JSON
    #[arg(long)]
    ultrametric: Option<PathBuf>,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Metric or weighted graph JSON
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    /// Comma-separated sizes (diamond levels for the diamond family)
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// CSV destination (stdout by default)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write least-squares fits against ln n and (ln n)^2 as JSON
    #[arg(long)]
    fits: Option<PathBuf>,
}

#[derive(Args)]
struct KarpArgs {
    #[arg(long)]
    n: usize,
    /// Delete edge (e, e+1); without it, report exact averages over all edges
    #[arg(long)]
    edge: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Reports a missing or inconsistent flag the way clap does (exit 2).
fn usage(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        1
    } else if e.is_size_limit() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("{}", json!({ "error": "thread_pool", "message": e.to_string(), "exit_code": 1 }));
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Embed(a) => embed(a),
        Command::Cluster(a) => cluster(a),
        Command::Oracle(a) => oracle(a),
        Command::Reduce(a) => reduce(a),
        Command::Bench(a) => bench(a),
        Command::Karp(a) => karp(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let need_n = || a.n.unwrap_or_else(|| usage("--n is required for this family"));
    let need_seed = || a.seed.unwrap_or_else(|| usage("--seed is required for random families"));
    let metric = match a.family {
        GenFamily::Cycle => gen_cycle(need_n())?,
        GenFamily::Path => gen_path(need_n())?,
        GenFamily::Diamond => diamond_graph(a.k.unwrap_or_else(|| usage("--k is required for diamond")))?.metric(),
        GenFamily::Random => {
            let mode = match a.mode {
                Mode::Euclidean2d => RandomMode::Euclidean2d,
                Mode::UniformPerturbed => RandomMode::UniformPerturbed,
            };
            gen_random(need_n(), mode, need_seed())?
        }
        GenFamily::Ultrametric => {
            let t = gen_random_ultrametric(need_n(), need_seed())?;
            return io::write_json(&t.to_json(), a.out.as_deref());
        }
    };
    io::write_json(&metric.to_json(), a.out.as_deref())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let m = io::read_metric(&a.input)?;
    let plan = ScalePlan::new(&m)?;
    let report = plan.estimate(a.samples, a.seed)?;
    if let Some(path) = &a.tree_out {
        io::write_json(&plan.sample(a.seed, 0)?.rho.to_json(), Some(path))?;
    }
    io::write_json(&report, a.out.as_deref())
}

/// The objective flags resolved against a point set.
enum Problem {
    FtKmedian(FtKMedian),
    Facility(Facility),
    SigmaLp(SigmaLp),
}

impl Problem {
    fn from_args(a: &ObjectiveArgs, labels: &[String]) -> Result<Self> {
        let need_k = || a.k.unwrap_or_else(|| usage("--k is required for this objective"));
        let profile = || -> Result<FaultToleranceProfile> {
            match &a.profile {
                Some(path) => io::read_profile(path, labels),
                None => Ok(FaultToleranceProfile::uniform(labels.len(), a.j)),
            }
        };
        Ok(match a.objective {
            ObjectiveArg::FtKmedian => Problem::FtKmedian(FtKMedian { k: need_k(), profile: profile()? }),
            ObjectiveArg::Facility => {
                let open_cost = match (&a.open_cost, a.facility_cost) {
                    (Some(path), _) => io::read_costs(path, labels)?,
                    (None, Some(f)) => vec![f; labels.len()],
                    (None, None) => usage("facility needs --open-cost or --facility-cost"),
                };
                Problem::Facility(Facility { profile: profile()?, open_cost })
            }
            ObjectiveArg::SigmaLp => Problem::SigmaLp(SigmaLp {
                k: need_k(),
                p: a.p.unwrap_or_else(|| usage("--p is required for sigma_lp")),
                eps: a.eps,
            }),
        })
    }

    fn as_dyn(&self) -> &dyn MonotoneProblem {
        match self {
            Problem::FtKmedian(p) => p,
            Problem::Facility(p) => p,
            Problem::SigmaLp(p) => p,
        }
    }
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let t = io::read_tree(&a.ultrametric)?;
    let problem = Problem::from_args(&a.objective, t.labels())?;
    let sol = match &problem {
        Problem::FtKmedian(p) => solve_ft_kmedian_ultrametric(&t, p.k, &p.profile)?,
        Problem::Facility(p) => solve_facility_ultrametric(&t, &p.profile, &p.open_cost)?,
        Problem::SigmaLp(p) => solve_sigma_lp_ultrametric(&t, p.k, p.p, p.eps)?,
    };
    write_solution(&sol, t.labels(), a.out.as_deref())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let m: FiniteMetric = match (&a.input, &a.ultrametric) {
        (Some(path), _) => io::read_metric(path)?,
        (None, Some(path)) => io::read_tree(path)?.to_metric(),
        (None, None) => usage("--in or --ultrametric is required"),
    };
    let problem = Problem::from_args(&a.objective, m.labels())?;
    let sol = match &problem {
        Problem::FtKmedian(p) => oracle_ft_kmedian(&m, p.k, &p.profile)?,
        Problem::Facility(p) => oracle_facility(&m, &p.profile, &p.open_cost)?,
        Problem::SigmaLp(p) => oracle_sigma_lp(&m, p.k, p.p)?,
    };
    write_solution(&sol, m.labels(), a.out.as_deref())
}

fn write_solution(sol: &ClusteringSolution, labels: &[String], out: Option<&Path>) -> Result<()> {
    io::write_json(&sol.to_json(labels), out)
}

fn reduce(a: ReduceArgs) -> Result<()> {
    let m = io::read_metric(&a.input)?;
    let problem = Problem::from_args(&a.objective, m.labels())?;
    let run = reduce_detailed(&m, problem.as_dyn(), a.samples, a.seed)?;
    let mut out = run.solution.to_json(m.labels());
    out["reduction"] = json!({
        "samples": a.samples,
        "seed": a.seed,
        "best_sample": run.best_sample,
        "failures": run.failures,
        "per_sample": run.samples,
    });
    io::write_json(&out, a.out.as_deref())
}

fn bench(a: BenchArgs) -> Result<()> {
    let config = ExperimentConfig { family: a.family, sizes: a.sizes, samples: a.samples, seed: a.seed, output: a.out };
    let rows = growth_curve(&config)?;
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    io::write_bytes(&csv, config.output.as_deref())?;
    if let Some(path) = &a.fits {
        io::write_json(&growth_fits(&rows), Some(path))?;
    }
    Ok(())
}

fn karp(a: KarpArgs) -> Result<()> {
    match a.edge {
        Some(edge) => {
            let emb = karp_cycle_embedding(a.n, edge)?;
            let out = json!({
                "n": emb.n,
                "deleted_edge": emb.deleted_edge,
                "gradients": emb.gradients,
                "path_metric": emb.path_metric.to_json(),
            });
            io::write_json(&out, a.out.as_deref())
        }
        None => io::write_json(&karp_statistics(a.n)?, a.out.as_deref()),
    }
}
