use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use plstat_core::data::{format_f64, load_matrix_csv, load_point_cloud_csv, matrix_to_csv, point_cloud_to_csv, MatrixKind};
use plstat_core::embedding::{embedding_error, isomap, Neighborhood, SCREE_DIMS};
use plstat_core::inference::{permutation_test, PermutationConfig, HISTOGRAM_BINS};
use plstat_core::landscape::{discretize, discretized_to_csv, grid, mean_landscape};
use plstat_core::persistence::compute_persistence;
use plstat_core::rips::{build_rips, Filtration};
use plstat_core::{Barcode, PersistenceLandscape};

use plstat::config::{GroupSource, RunConfig};
use plstat::error::{CliError, CliResult, UserContext};
use plstat::io::{read_table, read_text, read_values, write_atomic};
use plstat::pipeline::{null_csv, run_pipeline, Artifacts, PLOT_LEVELS};
use plstat::stages::{self, SampleInput};
use plstat::svg;

/// Persistence landscapes of Vietoris-Rips filtrations, with two-sample
/// tests, PCA and Isomap on top.
#[derive(Parser)]
#[command(name = "plstat", version)]
struct Cli {
    /// TOML run configuration; `plstat defaults` prints every key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory for multi-file commands. Single-file
    /// commands write to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 or unset uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the configured disk/annulus samples as point-cloud CSVs.
    Sample,
    /// Build a Rips filtration and write it as CSV.
    Rips(InputArgs),
    /// Compute the barcode of a point cloud, matrix or filtration.
    Persist {
        #[command(flatten)]
        input: InputArgs,
        /// Also write representative cycles to this CSV.
        #[arg(long)]
        representatives: Option<PathBuf>,
    },
    /// Build a landscape from a barcode, or average landscapes.
    Landscape(LandscapeArgs),
    /// Exact or Monte Carlo permutation t-test between two value files.
    Test(TestArgs),
    /// Isomap of a distance matrix or of a set of landscapes.
    Embed(EmbedArgs),
    /// Tighten the representative loop of the most persistent degree-1 class.
    Cycle(CycleArgs),
    /// Run every stage from the configuration.
    Pipeline,
    /// Render an interchange file as SVG.
    #[command(subcommand)]
    Plot(PlotCommand),
    /// Print the configuration with every default filled in.
    Defaults,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    Points,
    Distance,
    Correlation,
    Filtration,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputKind::Points)]
    kind: InputKind,
    #[arg(long)]
    max_dim: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct LandscapeArgs {
    /// One barcode CSV, or landscape JSONs with --mean.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Average the given landscapes instead.
    #[arg(long)]
    mean: bool,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Death value used for infinite intervals; defaults to the Rips threshold.
    #[arg(long)]
    cap: Option<f64>,
    /// Also write the landscape sampled on the configured grid.
    #[arg(long)]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Values of group 1, one per row (last column is used).
    group1: PathBuf,
    group2: PathBuf,
    #[arg(long)]
    exhaustive_limit: Option<u64>,
    #[arg(long)]
    monte_carlo_samples: Option<usize>,
    /// Also write the null distribution (observed statistic first).
    #[arg(long)]
    null: Option<PathBuf>,
    #[arg(long, default_value = "two-sample t-test")]
    title: String,
}

#[derive(Args)]
struct EmbedArgs {
    /// A distance-matrix CSV, or landscape JSONs with --landscapes.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    landscapes: bool,
    /// Exponent of the landscape distance.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Neighborhood radius; replaces k.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct CycleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Vertices whose hop distance to the loop is reported.
    #[arg(long, value_delimiter = ',')]
    marked: Vec<u32>,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Barcode CSV.
    Barcode(PlotArgs),
    /// Landscape JSON.
    Landscape {
        #[command(flatten)]
        plot: PlotArgs,
        #[arg(long, default_value_t = PLOT_LEVELS)]
        levels: usize,
    },
    /// Scree CSV (dim, residual variance).
    Scree(PlotArgs),
    /// Null-distribution CSV whose first row is the observed statistic.
    NullHist {
        #[command(flatten)]
        plot: PlotArgs,
        #[arg(long, default_value_t = HISTOGRAM_BINS)]
        bins: usize,
    },
}

#[derive(Args)]
struct PlotArgs {
    input: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

fn main() -> ExitCode {
    let command = Cli::command().after_long_help(format!(
        "Default configuration (plstat defaults):\n\n{}",
        RunConfig::default().to_toml()
    ));
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                let rendered = e.render().to_string();
                let first = rendered.lines().next().unwrap_or_default();
                let message = first.strip_prefix("error: ").unwrap_or(first);
                eprintln!("{}", CliError::user("args", message).to_json_line());
            }
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = std::panic::catch_unwind(|| run(&cli))
        .unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(CliError::internal("panic", message))
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Sample => cmd_sample(&config, &out_dir(cli, &config)),
        Command::Rips(input) => {
            apply_rips(&mut config, input);
            let f = filtration(input, &config)?;
            emit(cli.out.as_deref(), f.to_csv())
        }
        Command::Persist { input, representatives } => {
            apply_rips(&mut config, input);
            cmd_persist(&config, input, cli.out.as_deref(), representatives.as_deref())
        }
        Command::Landscape(args) => cmd_landscape(&config, args, cli.out.as_deref()),
        Command::Test(args) => cmd_test(&config, args, cli.out.as_deref()),
        Command::Embed(args) => cmd_embed(&config, args, &out_dir(cli, &config)),
        Command::Cycle(args) => {
            apply_rips(&mut config, &args.input);
            cmd_cycle(&config, args, &out_dir(cli, &config))
        }
        Command::Pipeline => {
            let dir = out_dir(cli, &config);
            let summary = run_pipeline(&config, &dir, cli.threads)?;
            let mut stdout = String::new();
            for (degree, t) in &summary.tests {
                let _ = writeln!(stdout, "degree {degree}: t = {}, p = {}", format_f64(t.t_obs), format_f64(t.p_value));
            }
            let _ = writeln!(stdout, "artifacts in {}", dir.display());
            print!("{stdout}");
            Ok(())
        }
        Command::Plot(plot) => cmd_plot(plot, cli.out.as_deref()),
        Command::Defaults => emit(cli.out.as_deref(), config.to_toml()),
    }
}

fn out_dir(cli: &Cli, config: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("plstat-out"))
}

/// Writes to `out` atomically, or to stdout.
fn emit(out: Option<&Path>, contents: impl AsRef<[u8]>) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, contents.as_ref()),
        None => std::io::stdout()
            .write_all(contents.as_ref())
            .map_err(|e| CliError::internal("write", e)),
    }
}

fn apply_rips(config: &mut RunConfig, input: &InputArgs) {
    if let Some(d) = input.max_dim {
        config.rips.max_dim = d;
    }
    if let Some(t) = input.threshold {
        config.rips.threshold = t;
    }
}

fn load_input(input: &InputArgs) -> CliResult<SampleInput> {
    let path = &input.input;
    let fail = |e: &dyn std::fmt::Display| CliError::user("load", format!("{}: {e}", path.display()));
    Ok(match input.kind {
        InputKind::Points => SampleInput::Points(load_point_cloud_csv(path).map_err(|e| fail(&e))?),
        InputKind::Distance => SampleInput::Matrix(load_matrix_csv(path, MatrixKind::Distance).map_err(|e| fail(&e))?),
        InputKind::Correlation => {
            SampleInput::Matrix(load_matrix_csv(path, MatrixKind::Correlation).map_err(|e| fail(&e))?)
        }
        InputKind::Filtration => unreachable!("filtrations are read by the caller"),
    })
}

fn filtration(input: &InputArgs, config: &RunConfig) -> CliResult<Filtration> {
    if input.kind == InputKind::Filtration {
        let text = read_text(&input.input, "rips")?;
        return Filtration::from_csv(text.as_bytes())
            .map_err(|e| CliError::user("rips", format!("{}: {e}", input.input.display())));
    }
    let d = stages::distances(&load_input(input)?)?;
    build_rips(&d, &stages::rips_config(config)).user_ctx("rips")
}

fn cmd_sample(config: &RunConfig, dir: &Path) -> CliResult<()> {
    config.validate()?;
    let mut files = Artifacts::new(dir);
    for s in stages::load_samples(config)? {
        let sampled = matches!(
            config.groups[s.group].source,
            GroupSource::Disk { .. } | GroupSource::Annulus { .. }
        );
        match (&s.input, sampled) {
            (SampleInput::Points(pc), true) => files.write(&format!("{}.csv", s.name), point_cloud_to_csv(pc))?,
            _ => log::info!("{}: loaded from file, not rewritten", s.name),
        }
    }
    Ok(())
}

fn cmd_persist(config: &RunConfig, input: &InputArgs, out: Option<&Path>, reps: Option<&Path>) -> CliResult<()> {
    let f = filtration(input, config)?;
    let barcode = compute_persistence(&f, reps.is_some());
    if let Some(path) = reps {
        write_atomic(path, representatives_csv(&barcode).as_bytes())?;
    }
    emit(out, barcode.to_csv())
}

/// `interval,degree,birth,death,simplex` with the simplex's vertices
/// separated by spaces; intervals are numbered as in the barcode CSV.
fn representatives_csv(barcode: &Barcode) -> String {
    let mut out = String::from("interval,degree,birth,death,simplex\n");
    for (n, i) in barcode.intervals.iter().enumerate() {
        for s in i.representative.iter().flatten() {
            let vs: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "{n},{},{},{},{}",
                i.degree,
                format_f64(i.birth),
                format_f64(i.death),
                vs.join(" ")
            );
        }
    }
    out
}

fn read_landscape(path: &Path) -> CliResult<PersistenceLandscape> {
    PersistenceLandscape::from_json(&read_text(path, "landscape")?)
        .map_err(|e| CliError::user("landscape", format!("{}: {e}", path.display())))
}

fn read_barcode(path: &Path, stage: &str) -> CliResult<Barcode> {
    Barcode::from_csv(read_text(path, stage)?.as_bytes())
        .map_err(|e| CliError::user(stage, format!("{}: {e}", path.display())))
}

fn cmd_landscape(config: &RunConfig, args: &LandscapeArgs, out: Option<&Path>) -> CliResult<()> {
    let l = if args.mean {
        let ls = args.inputs.iter().map(|p| read_landscape(p)).collect::<CliResult<Vec<_>>>()?;
        mean_landscape(&ls).user_ctx("landscape")?
    } else {
        if args.inputs.len() != 1 {
            return Err(CliError::user("landscape", "give one barcode, or --mean with landscapes"));
        }
        let barcode = read_barcode(&args.inputs[0], "landscape")?;
        let cap = args.cap.unwrap_or_else(|| config.infinite_cap());
        stages::landscapes(&[barcode], args.degree, cap)?.remove(0)
    };
    if let Some(path) = &args.grid {
        let (lo, hi, n) = (config.landscape.grid_min, config.grid_max(), config.landscape.grid_points);
        let ts = grid(lo, hi, n).user_ctx("landscape")?;
        let values = discretize(&l, lo, hi, n, l.n_levels()).user_ctx("landscape")?;
        write_atomic(path, discretized_to_csv(&ts, &values).as_bytes())?;
    }
    emit(out, l.to_json())
}

fn cmd_test(config: &RunConfig, args: &TestArgs, out: Option<&Path>) -> CliResult<()> {
    let xs1 = read_values(&args.group1, "test")?;
    let xs2 = read_values(&args.group2, "test")?;
    let permutation = PermutationConfig {
        exhaustive_limit: args.exhaustive_limit.unwrap_or(config.test.exhaustive_limit),
        monte_carlo_samples: args.monte_carlo_samples.unwrap_or(config.test.monte_carlo_samples),
        seed: config.seed,
    };
    let result = permutation_test(&xs1, &xs2, &permutation).user_ctx("test")?;
    if let Some(path) = &args.null {
        write_atomic(path, null_csv(&result.null_distribution).as_bytes())?;
    }
    emit(out, result.report(&args.title))
}

fn cmd_embed(config: &RunConfig, args: &EmbedArgs, dir: &Path) -> CliResult<()> {
    let mut files = Artifacts::new(dir);
    let d = if args.landscapes {
        let ls = args.inputs.iter().map(|p| read_landscape(p)).collect::<CliResult<Vec<_>>>()?;
        let d = stages::landscape_distance_matrix(&ls, args.p.unwrap_or(config.embedding.p))?;
        files.write("landscape_distances.csv", matrix_to_csv(&d))?;
        d
    } else {
        if args.inputs.len() != 1 {
            return Err(CliError::user("embed", "give one distance matrix, or --landscapes"));
        }
        let path = &args.inputs[0];
        load_matrix_csv(path, MatrixKind::Distance)
            .map_err(|e| CliError::user("embed", format!("{}: {e}", path.display())))?
    };
    let rule = match (args.epsilon, args.k) {
        (Some(e), _) => Neighborhood::Epsilon(e),
        (None, Some(k)) => Neighborhood::Knn(k),
        (None, None) => config.neighborhood(),
    };
    let target = args.dim.unwrap_or(config.embedding.target_dim);
    let e = isomap(&d, rule, target).user_ctx("embed")?;
    let (max_abs, mse) = embedding_error(&d, &e).user_ctx("embed")?;
    files.write("coordinates.csv", e.coordinates_csv())?;
    files.write("scree.csv", e.scree_csv())?;
    let mut meta = e.metadata();
    let _ = writeln!(meta, "max_abs_error = {}", format_f64(max_abs));
    let _ = writeln!(meta, "mean_squared_error = {}", format_f64(mse));
    files.write("isomap.txt", meta)
}

fn cmd_cycle(config: &RunConfig, args: &CycleArgs, dir: &Path) -> CliResult<()> {
    if args.input.kind == InputKind::Filtration {
        return Err(CliError::user("cycle", "cycle needs a point cloud or matrix, not a filtration"));
    }
    let input = load_input(&args.input)?;
    let (barcode, f) = stages::barcode(&input, config, true)?;
    let rounds = args.max_rounds.unwrap_or(config.cycle.max_rounds);
    let marked = if args.marked.is_empty() { &config.cycle.marked } else { &args.marked };
    let report = stages::tighten_most_persistent(&f, &barcode, rounds, marked)?;
    let mut files = Artifacts::new(dir);
    files.write("barcode.csv", barcode.to_csv())?;
    files.write("cycle.csv", report.cycle.to_csv())?;
    files.write("summary.txt", report.summary())?;
    if !report.proximity.is_empty() {
        files.write("proximity.csv", plstat_core::cycles::proximity_csv(&report.proximity))?;
    }
    Ok(())
}

fn title_or(plot: &PlotArgs, fallback: &str) -> String {
    plot.title.clone().unwrap_or_else(|| fallback.to_owned())
}

fn cmd_plot(command: &PlotCommand, out: Option<&Path>) -> CliResult<()> {
    let svg = match command {
        PlotCommand::Barcode(plot) => svg::plot_barcode(&read_barcode(&plot.input, "plot")?, &title_or(plot, "barcode")),
        PlotCommand::Landscape { plot, levels } => {
            svg::plot_landscape(&read_landscape(&plot.input)?, &title_or(plot, "persistence landscape"), *levels)
        }
        PlotCommand::Scree(plot) => {
            let rows = read_table(&plot.input, "plot")?;
            let mut points = Vec::with_capacity(rows.len());
            for row in rows.iter().take(SCREE_DIMS) {
                match row.as_slice() {
                    [d, r] if *d >= 1.0 && d.fract() == 0.0 => points.push((*d as usize, *r)),
                    _ => return Err(CliError::user("plot", "scree rows must be dim,residual_variance")),
                }
            }
            svg::plot_scree(&points, &title_or(plot, "Isomap residual variance"))
        }
        PlotCommand::NullHist { plot, bins } => {
            let null = read_values(&plot.input, "plot")?;
            let Some(&observed) = null.first() else {
                return Err(CliError::user("plot", "null distribution is empty"));
            };
            svg::plot_null_histogram(&null, observed, *bins, &title_or(plot, "permutation null distribution"))
        }
    };
    emit(out, svg)
}
