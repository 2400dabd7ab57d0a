use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatbound::corrections::DimensionFn;
use heatbound::graph::{load_graph, write_graph, Family, MeasureKind, MeasureMode, WeightedGraph};
use heatbound::metric::{verify_intrinsic, EdgeLengths, MetricStructure};
use heatbound::pipeline::{
    emit_report, run_check, run_pipeline, CenterSelection, CheckKind, MetricChoice, PipelineConfig, PipelineKind, Report,
};
use heatbound::sobolev::{minimal_sobolev_constant, Budget, SobolevProblem};
use heatbound::spectral::SpectralDecomposition;
use heatbound::{Error, Result};
use serde_json::json;

/// Heat kernels, intrinsic metrics, Sobolev constants and inequality certificates on finite weighted graphs.
#[derive(Debug, Parser)]
#[command(name = "heatbound", version)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Opts {
    /// JSON configuration; flags given on the command line override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Graph file in the `graph v1` format.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Generated family, e.g. `cycle_2048`, `grid_16x16`, `polyline_256_1`.
    #[arg(long, global = true)]
    family: Option<Family>,
    /// normalizing | counting | custom (custom keeps the graph file's values).
    #[arg(long, global = true)]
    measure: Option<MeasureKind>,
    /// default | combinatorial | path to a `metric v1` file.
    #[arg(long, global = true)]
    metric: Option<MetricChoice>,
    /// Inner radius of the verified range
    #[arg(long, global = true)]
    r1: Option<f64>,
    /// Outer radius of the verified range
    #[arg(long, global = true)]
    r2: Option<f64>,
    /// Constant dimension `3` or a table `r0:n0,r1:n1,...`.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Sobolev constant; pipelines measure it when omitted
    #[arg(long, global = true)]
    phi: Option<f64>,
    /// Explicit gamma for the general reverse run instead of the theorem choice
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Time-grid points per decade.
    #[arg(long, global = true)]
    tgrid_density: Option<usize>,
    /// Optimizer budget `RESTARTS,ITERATIONS,TOLERANCE`.
    #[arg(long, global = true)]
    budget: Option<Budget>,
    /// Optimizer stationarity tolerance; overrides the one in `--budget`
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Seed for optimizer restarts and center sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run outside the hypotheses; the report is watermarked.
    #[arg(long, global = true)]
    relaxed_guards: bool,
    /// auto | all | sample:K
    #[arg(long, global = true)]
    centers: Option<CenterSelection>,
    /// Base vertex id for reverse runs and single-ball commands.
    #[arg(long, global = true)]
    center: Option<String>,
    /// Comma-separated radii for sampled Sobolev balls.
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Output file (gen, metric) or directory (heat, check, pipeline).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated family as a graph file.
    Gen,
    /// Metric summary; `--out` writes the distance table as CSV.
    Metric,
    /// Spectral summary; `--out` writes eigenvalues and kernel tables.
    Heat {
        /// Comma-separated times for the kernel table.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        times: Vec<f64>,
    },
    /// Optimizer lower bound on the Sobolev constant of one ball.
    Sobolev {
        /// Ball radius.
        #[arg(long)]
        r: f64,
    },
    /// Evaluate one condition (S, L, V, G or O) with the given n and phi.
    Check {
        #[arg(long)]
        condition: CheckKind,
    },
    /// Run a forward/reverse workflow.
    Pipeline {
        /// normalizing | normalizing-forward | counting | general
        #[arg(long)]
        kind: Option<PipelineKind>,
    },
    /// Summarize an emitted `report.json`.
    Report {
        /// Report file or the directory containing it.
        #[arg(long)]
        input: PathBuf,
    },
}

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

/// Outcome that decides the exit code.
enum Outcome {
    Ok,
    Violation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let config = build_config(&cli.opts)?;
    match cli.command {
        Command::Gen => gen(&config, cli.opts.out.as_deref()),
        Command::Metric => metric(&config, cli.opts.out.as_deref()),
        Command::Heat { times } => heat(&config, &times, cli.opts.out.as_deref()),
        Command::Sobolev { r } => sobolev(&config, r),
        Command::Check { condition } => finish(run_check(&config, condition)?, config.out.as_deref()),
        Command::Pipeline { kind } => {
            let mut config = config;
            if let Some(k) = kind {
                config.pipeline = k;
            }
            finish(run_pipeline(&config)?, config.out.as_deref())
        }
        Command::Report { input } => summarize(&input),
    }
}

fn build_config(o: &Opts) -> Result<PipelineConfig> {
    let mut c = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if o.graph.is_some() || o.family.is_some() {
        c.graph = o.graph.clone();
        c.family = o.family;
    }
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = o.$field.clone() { c.$field = v; } )* };
    }
    macro_rules! set_opt {
        ($($field:ident),*) => { $( if o.$field.is_some() { c.$field = o.$field.clone(); } )* };
    }
    set!(metric, r1, r2, tgrid_density, budget, seed, centers);
    set_opt!(measure, phi, gamma, tolerance, center, radii, out);
    if let Some(n) = &o.n {
        c.n = DimensionFn::parse(n)?;
    }
    c.relaxed_guards |= o.relaxed_guards;
    Ok(c)
}

fn graph(config: &PipelineConfig) -> Result<WeightedGraph> {
    let mode = |k: MeasureKind| match k {
        MeasureKind::Normalizing => Ok(MeasureMode::Normalizing),
        MeasureKind::Counting => Ok(MeasureMode::Counting),
        MeasureKind::Custom => Err(Error::InvalidParameter("a custom measure needs a graph file".into())),
    };
    match (&config.family, &config.graph) {
        (Some(f), None) => f.generate(mode(config.measure.unwrap_or(MeasureKind::Counting))?),
        (None, Some(p)) => {
            let g = load_graph(p)?;
            match config.measure {
                Some(k) if k != MeasureKind::Custom && k != g.measure_kind() => g.with_measure(mode(k)?),
                _ => Ok(g),
            }
        }
        _ => Err(Error::InvalidParameter("give exactly one of --graph and --family".into())),
    }
}

fn graph_and_metric(config: &PipelineConfig) -> Result<(WeightedGraph, MetricStructure)> {
    let g = graph(config)?;
    let m = match &config.metric {
        MetricChoice::Default => MetricStructure::intrinsic(&g)?,
        MetricChoice::Combinatorial => MetricStructure::combinatorial(&g)?,
        MetricChoice::File(p) => MetricStructure::new(&g, EdgeLengths::parse(&g, &std::fs::read_to_string(p)?)?)?,
    };
    Ok((g, m))
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    out!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn gen(config: &PipelineConfig, out: Option<&Path>) -> Result<Outcome> {
    let text = write_graph(&graph(config)?);
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => write!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(Outcome::Ok)
}

fn metric(config: &PipelineConfig, out: Option<&Path>) -> Result<Outcome> {
    let (g, m) = graph_and_metric(config)?;
    let check = verify_intrinsic(&g, m.table())?;
    if let Some(p) = out {
        m.write_csv(&g, std::fs::File::create(p)?)?;
    }
    print_json(&json!({
        "vertices": g.len(),
        "edges": g.edge_count(),
        "diameter": m.diameter(),
        "global_jump": m.global_jump(),
        "intrinsic": check.pass,
        "worst_vertex": check.worst_vertex,
        "worst_slack": check.worst_slack,
    }))?;
    Ok(Outcome::Ok)
}

fn heat(config: &PipelineConfig, times: &[f64], out: Option<&Path>) -> Result<Outcome> {
    let g = graph(config)?;
    let dec = SpectralDecomposition::new(&g)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        dec.write_eigenvalues_csv(std::fs::File::create(dir.join("eigenvalues.csv"))?)?;
        dec.write_kernel_csv(&g, times, std::fs::File::create(dir.join("kernel.csv"))?)?;
    }
    print_json(&json!({
        "vertices": g.len(),
        "bottom_of_spectrum": dec.bottom(),
        "max_residual": dec.max_residual(),
        "gram_deviation": dec.gram_deviation(),
        "times": times,
    }))?;
    Ok(Outcome::Ok)
}

fn sobolev(config: &PipelineConfig, r: f64) -> Result<Outcome> {
    let (g, m) = graph_and_metric(config)?;
    let center = match &config.center {
        Some(id) => g.index_of(id)?,
        None => 0,
    };
    let n = config.n.max_value();
    let problem = SobolevProblem::for_ball(&g, &m, center, r, n)?;
    let budget = Budget { tolerance: config.tolerance.unwrap_or(config.budget.tolerance), ..config.budget };
    let result = minimal_sobolev_constant(&problem, &budget, config.seed)?;
    print_json(&json!({
        "center": g.id(center),
        "r": r,
        "n": n,
        "ball_size": problem.support().len(),
        "phi_star": result.phi_star,
        "certification": result.certification,
        "restarts": result.restarts,
        "total_iterations": result.total_iterations,
        "seed": config.seed,
    }))?;
    Ok(Outcome::Ok)
}

fn finish(report: Report, out: Option<&Path>) -> Result<Outcome> {
    if let Some(dir) = out {
        emit_report(&report, dir)?;
    }
    let label = |v: serde_json::Value| v.as_str().unwrap_or_default().to_owned();
    out!("{} on {} ({})", report.metadata.pipeline, report.metadata.graph, label(serde_json::to_value(report.metadata.regime)?));
    for note in &report.notes {
        out!("  note: {note}");
    }
    for c in &report.certificates {
        out!(
            "  {:<14} {}  min log-margin {:>12.6e}  {} points",
            c.condition.to_string(),
            if c.pass { "PASS" } else { "FAIL" },
            c.min_log_margin,
            c.grid.points
        );
        if !c.pass {
            out!("    witness: {}", serde_json::to_string(&c.witness)?);
        }
    }
    out!("summary: {}", label(serde_json::to_value(report.summary.status)?));
    Ok(if report.all_pass() { Outcome::Ok } else { Outcome::Violation })
}

fn summarize(input: &Path) -> Result<Outcome> {
    let path = if input.is_dir() { input.join("report.json") } else { input.to_path_buf() };
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let status = v["summary"]["status"].as_str().unwrap_or("");
    let text = |v: &serde_json::Value| v.as_str().unwrap_or("?").to_owned();
    let meta = &v["metadata"];
    out!("{} on {} ({})", text(&meta["pipeline"]), text(&meta["graph"]), text(&meta["regime"]));
    for c in v["certificates"].as_array().into_iter().flatten() {
        out!(
            "  {:<14} {}  min log-margin {}",
            c["condition"].as_str().unwrap_or("?"),
            if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
            c["min_log_margin"]
        );
    }
    out!("summary: {status}");
    match status {
        "pass" | "vacuous" => Ok(Outcome::Ok),
        "fail" => Ok(Outcome::Violation),
        _ => Err(Error::InvalidParameter(format!("{} is not a report", path.display()))),
    }
}
