use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use togl::bench::{
    config_args, emit_report, oracle_select, parse_methods, read_report, sweep, write_report,
    EtaMode, ExperimentConfig, Grid, ReportFormat, Task,
};
use togl::data::TargetColumn;
use togl::Error;

/// Sparse regression with orthogonal greedy learners and dense baselines.
///
/// Any subcommand accepts `--config FILE`: a file of `key = value` lines,
/// one per flag. Flags given after `--config` override the file.
#[derive(Parser)]
#[command(name = "togl", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep methods over their parameter grids and write per-run rows.
    Bench {
        #[command(subcommand)]
        task: TaskArgs,
    },
    /// Fit one method with a pinned parameter and print its report.
    Fit {
        #[command(subcommand)]
        task: TaskArgs,
    },
    /// Aggregate an existing results CSV.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum TaskArgs {
    /// Noisy sinc on [-pi, pi].
    #[command(args_override_self = true)]
    Sinc(SincArgs),
    /// A CSV dataset, split in half per seed.
    #[command(args_override_self = true)]
    Csv(CsvArgs),
}

#[derive(Args)]
struct SincArgs {
    #[arg(long, default_value_t = 1000)]
    m_train: usize,
    #[arg(long, default_value_t = 1000)]
    m_test: usize,
    /// Dictionary size.
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Comma-separated noise levels.
    #[arg(long, default_value = "0.1,0.5,1,2")]
    sigma: String,
    /// Kernel width.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CsvArgs {
    #[arg(long)]
    path: PathBuf,
    /// Target column: `last`, a zero-based index or a header name.
    #[arg(long, default_value = "last")]
    target: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    header: bool,
    /// Kernel width, or `data` for the sample-spread rule.
    #[arg(long, default_value = "data")]
    eta: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Comma-separated methods, e.g. `ogl:max,dtogl:first,ridge,fista@1e-4`.
    #[arg(long, default_value = "ogl:max,dtogl:first")]
    methods: String,
    /// `lo:hi:count` (log-spaced) or a comma list.
    #[arg(long, default_value = "1e-6:0.5:50")]
    delta_grid: String,
    #[arg(long, default_value = "1e-8:0.1:15")]
    lambda_grid: String,
    #[arg(long, default_value_t = 300)]
    k_max: usize,
    #[arg(long, default_value_t = 10_000)]
    pgl_max_iter: usize,
    #[arg(long, default_value_t = 40)]
    pgl_points: usize,
    #[arg(long, default_value_t = 5000)]
    fista_max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    fista_tol: f64,
    /// Number of seeds.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale atoms to unit empirical norm.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    normalize: bool,
    /// Record wall time; when false every seconds column is 0.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    record_time: bool,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    include_design_time: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    parallel: bool,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// `csv` or `markdown`.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    path: PathBuf,
    /// `csv` or `markdown`.
    #[arg(long, default_value = "markdown")]
    format: String,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn grid(s: &str) -> togl::Result<Grid> {
    s.parse()
}

fn apply_common(mut config: ExperimentConfig, c: &CommonArgs) -> togl::Result<ExperimentConfig> {
    config.methods = parse_methods(&c.methods)?;
    config.delta_grid = grid(&c.delta_grid)?;
    config.lambda_grid = grid(&c.lambda_grid)?;
    config.k_max = c.k_max;
    config.pgl_max_iter = c.pgl_max_iter;
    config.pgl_points = c.pgl_points;
    config.fista_max_iter = c.fista_max_iter;
    config.fista_tol = c.fista_tol;
    config.seeds = c.seeds;
    config.master_seed = c.seed;
    config.normalize = c.normalize;
    config.record_time = c.record_time;
    config.include_design_time = c.include_design_time;
    config.parallel = c.parallel;
    config.validate()?;
    Ok(config)
}

fn build_config(task: &TaskArgs) -> togl::Result<(ExperimentConfig, &CommonArgs)> {
    match task {
        TaskArgs::Sinc(a) => {
            let sigmas = a
                .sigma
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("cannot parse noise levels {:?}", a.sigma)))?;
            let mut config = ExperimentConfig::sinc_default();
            config.task = Task::Sinc {
                m_train: a.m_train,
                m_test: a.m_test,
                n: a.n,
                sigmas,
            };
            config.eta = EtaMode::Fixed(a.eta);
            Ok((apply_common(config, &a.common)?, &a.common))
        }
        TaskArgs::Csv(a) => {
            let target: TargetColumn = a.target.parse()?;
            let mut config = ExperimentConfig::csv_default(&a.path, target.clone());
            config.task = Task::Csv {
                path: a.path.clone(),
                target,
                header: a.header,
            };
            config.eta = match a.eta.as_str() {
                "data" => EtaMode::FromData,
                v => EtaMode::Fixed(
                    v.parse()
                        .map_err(|_| Error::Config(format!("cannot parse eta {v:?}")))?,
                ),
            };
            Ok((apply_common(config, &a.common)?, &a.common))
        }
    }
}

fn run(cli: Cli) -> togl::Result<()> {
    match cli.command {
        Command::Bench { task } => {
            let (config, common) = build_config(&task)?;
            let format: ReportFormat = common.format.parse()?;
            let result = sweep(&config)?;
            emit_report(&result.rows, format, &common.out)?;
            for o in oracle_select(&result.rows)? {
                println!(
                    "{} sigma={} best {} test_rmse={:.4}({:.4}) sparsity={:.1}",
                    o.method, o.sigma, o.param, o.mean_test_rmse, o.se_test_rmse, o.mean_sparsity
                );
            }
            eprintln!("wrote {} rows to {}", result.rows.len(), common.out.display());
        }
        Command::Fit { task } => {
            let (mut config, _) = build_config(&task)?;
            if config.methods.len() != 1 || config.methods[0].fixed.is_none() {
                return Err(Error::Config(
                    "fit takes one method with a pinned parameter, e.g. dtogl:first@0.01".into(),
                ));
            }
            config.seeds = 1;
            if let Task::Sinc { sigmas, .. } = &mut config.task {
                sigmas.truncate(1);
            }
            let result = sweep(&config)?;
            for row in &result.rows {
                println!("{}", row.report());
            }
        }
        Command::Report(a) => {
            let format: ReportFormat = a.format.parse()?;
            let text = std::fs::read_to_string(&a.path)?;
            let rows = read_report(&text)?;
            match &a.out {
                Some(path) => emit_report(&rows, format, path)?,
                None => write_report(&rows, format, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

/// Replaces `--config FILE` with the flags the file lists.
fn expand_config(args: Vec<String>) -> togl::Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let path = if arg == "--config" {
            it.next()
                .ok_or_else(|| Error::Config("--config needs a file".into()))?
        } else if let Some(p) = arg.strip_prefix("--config=") {
            p.to_owned()
        } else {
            out.push(arg);
            continue;
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
        out.extend(config_args(&text)?);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
