use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use coarse_cert::covers::{brick_tree, greedy_decomposition, tree_validate, TreeReport};
use coarse_cert::extend::{build_certificate, BudgetSchedule, Certificate, CertificateConfig, ExtendError, ExtendStats, Modulus, ScheduleMode};
use coarse_cert::generate;
use coarse_cert::io::{self, to_file_string};
use coarse_cert::verify::{cobounded_check, lipschitz_check, r_disjoint_check, uniformly_bounded_check, CheckMode, CheckRecord};
use coarse_cert::FiniteMetricSpace;

#[derive(Parser)]
#[command(name = "coarse-cert", version, about = "Build and check Lipschitz cobounded partitions of unity")]
struct Cli {
    /// Worker threads for data-parallel checks (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated space.
    Generate(GenerateArgs),
    /// Split a space into disjoint bounded families or a brick tree.
    Decompose(DecomposeArgs),
    /// Build and verify a certificate over a decomposition tree.
    Certify(CertifyArgs),
    /// Check a partition of unity against Lipschitz and coboundedness bounds.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Path,
    Grid,
    TreeGraph,
    RandomGeometric,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Number of points (path, tree-graph, random-geometric).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Connection radius for random-geometric.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Greedy,
    Bricks,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, value_enum)]
    strategy: Strategy,
    /// Disjointness radius R.
    #[arg(long)]
    radius: f64,
    /// Target member diameter (greedy).
    #[arg(long)]
    diam: Option<f64>,
    /// Brick length in points; defaults to ⌊R⌋ + 1.
    #[arg(long)]
    block: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Conservative,
    Paper,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// `paper`, `linear:<c>` or `table:<file>`.
    #[arg(long, default_value = "paper")]
    modulus: String,
    #[arg(long, value_enum, default_value = "conservative")]
    schedule: ScheduleArg,
    /// Directory for pou.json, report.json and schedule.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Restricted,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    pou: PathBuf,
    /// Sets both λ and C.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "c")]
    c: Option<f64>,
    /// Coboundedness bound to check.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, value_enum, default_value = "restricted")]
    mode: ModeArg,
    /// Also validate this decomposition tree.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Pass,
    Fail,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    io::load_space(&read(path)?).with_context(|| format!("loading space {}", path.display()))
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("--{flag} is required here"))
}

fn parse_modulus(spec: &str) -> Result<Modulus> {
    if spec == "paper" {
        return Ok(Modulus::Paper);
    }
    if let Some(c) = spec.strip_prefix("linear:") {
        let c: f64 = c.parse().with_context(|| format!("bad linear modulus constant {c:?}"))?;
        return Ok(Modulus::linear(c)?);
    }
    if let Some(path) = spec.strip_prefix("table:") {
        #[derive(serde::Deserialize)]
        struct Table {
            v: u32,
            points: Vec<(f64, f64)>,
        }
        let table: Table = serde_json::from_str(&read(Path::new(path))?)?;
        if table.v != io::SCHEMA_VERSION {
            bail!("unsupported schema version {} in {path}", table.v);
        }
        return Ok(Modulus::table(table.points)?);
    }
    bail!("modulus must be paper, linear:<c> or table:<file>, got {spec:?}")
}

fn cmd_generate(args: &GenerateArgs) -> Result<Outcome> {
    let (space, params) = match args.kind {
        Kind::Path => {
            let n = need(args.n, "n")?;
            (generate::path(n)?, json!({ "kind": "path", "n": n }))
        }
        Kind::Grid => {
            let (w, h) = (need(args.width, "width")?, need(args.height, "height")?);
            (generate::grid(w, h)?, json!({ "kind": "grid", "width": w, "height": h }))
        }
        Kind::TreeGraph => {
            let n = need(args.n, "n")?;
            (generate::tree_graph(n, args.seed)?, json!({ "kind": "tree-graph", "n": n, "seed": args.seed }))
        }
        Kind::RandomGeometric => {
            let (n, r) = (need(args.n, "n")?, need(args.radius, "radius")?);
            let space = generate::random_geometric(n, r, args.seed)?;
            (space, json!({ "kind": "random-geometric", "n": n, "radius": r, "seed": args.seed }))
        }
    };
    emit(args.out.as_deref(), &io::space_to_string(&space, Some(params))?)?;
    Ok(Outcome::Pass)
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<Outcome> {
    let space = load_space(&args.space)?;
    let (artifact, checks) = match args.strategy {
        Strategy::Greedy => {
            let diam = need(args.diam, "diam")?;
            let families = greedy_decomposition(&space, args.radius, diam)?;
            let mut checks = Vec::new();
            for family in &families {
                checks.push(CheckRecord::RDisjoint(r_disjoint_check(&space, family, args.radius)?));
                checks.push(CheckRecord::UniformlyBounded(uniformly_bounded_check(&space, family)?));
            }
            (io::families_to_string(&families)?, json!({ "families": families.len(), "checks": checks }))
        }
        Strategy::Bricks => {
            let block = args.block.unwrap_or(args.radius.floor() + 1.0);
            let tree = brick_tree(&space, &[args.radius], block)?;
            let report = tree_validate(&space, &tree)?;
            (io::tree_to_string(&tree)?, json!({ "m": tree.m, "arity": tree.arity, "tree": report }))
        }
    };
    emit(args.out.as_deref(), &artifact)?;
    let pass = match args.strategy {
        Strategy::Greedy => checks["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true),
        Strategy::Bricks => checks["tree"]["pass"] == true,
    };
    eprint!("{}", to_file_string(&json!({ "command": "decompose", "pass": pass, "result": checks }))?);
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Serialize)]
struct CertifyReport<'a> {
    command: &'static str,
    pass: bool,
    epsilon: f64,
    modulus: &'a Modulus,
    schedule_mode: ScheduleMode,
    bound: f64,
    truncated_at: Option<usize>,
    checks: Vec<CheckRecord>,
    tree: &'a TreeReport,
    stats: &'a ExtendStats,
}

fn write_certificate(dir: &Path, cert: &Certificate) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let schedule: &BudgetSchedule = &cert.schedule;
    let report = CertifyReport {
        command: "certify",
        pass: cert.pass(),
        epsilon: schedule.epsilon,
        modulus: &schedule.modulus,
        schedule_mode: schedule.mode,
        bound: cert.bound,
        truncated_at: cert.truncated_at,
        checks: vec![CheckRecord::Lipschitz(cert.lipschitz.clone()), CheckRecord::Cobounded(cert.cobounded.clone())],
        tree: &cert.tree,
        stats: &cert.stats,
    };
    fs::write(dir.join("pou.json"), io::pou_to_string(&cert.pou)?)?;
    fs::write(dir.join("report.json"), to_file_string(&report)?)?;
    fs::write(dir.join("schedule.json"), to_file_string(schedule)?)?;
    Ok(())
}

fn cmd_certify(args: &CertifyArgs) -> Result<Outcome> {
    let space = load_space(&args.space)?;
    let tree = io::load_tree(&read(&args.tree)?).with_context(|| format!("loading tree {}", args.tree.display()))?;
    let mode = match args.schedule {
        ScheduleArg::Conservative => ScheduleMode::Conservative,
        ScheduleArg::Paper => ScheduleMode::Paper,
    };
    let config = CertificateConfig::new(args.epsilon, parse_modulus(&args.modulus)?).with_mode(mode);
    match build_certificate(&space, &tree, &config) {
        Ok(cert) => {
            write_certificate(&args.out, &cert)?;
            Ok(Outcome::Pass)
        }
        Err(ExtendError::VerificationFailed(cert)) => {
            write_certificate(&args.out, &cert)?;
            eprintln!("certificate failed verification; see {}", args.out.join("report.json").display());
            Ok(Outcome::Fail)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let space = load_space(&args.space)?;
    let pou = io::load_pou(&read(&args.pou)?, space.len()).with_context(|| format!("loading {}", args.pou.display()))?;
    let lambda = need(args.lambda.or(args.epsilon), "lambda or --epsilon")?;
    let c = need(args.c.or(args.epsilon), "c or --epsilon")?;
    let mode = match args.mode {
        ModeArg::Full => CheckMode::Full,
        ModeArg::Restricted => CheckMode::Restricted,
    };
    let mut checks = vec![CheckRecord::Lipschitz(lipschitz_check(&space, &pou, lambda, c, mode)?)];
    if let Some(bound) = args.bound {
        checks.push(CheckRecord::Cobounded(cobounded_check(&space, &pou, bound)));
    }
    let tree = match &args.tree {
        Some(path) => Some(tree_validate(&space, &io::load_tree(&read(path)?)?)?),
        None => None,
    };
    let pass = checks.iter().all(CheckRecord::pass) && tree.as_ref().is_none_or(|t| t.pass);
    let report = json!({ "command": "verify", "pass": pass, "checks": checks, "tree": tree });
    emit(args.out.as_deref(), &to_file_string(&report)?)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: &Cli) -> Result<Outcome> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()?;
    }
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
