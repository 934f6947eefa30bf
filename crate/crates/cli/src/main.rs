use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ntn_gscm::config::{RunConfig, Stage};
use ntn_gscm::pipeline::Pipeline;
use ntn_gscm::Error;

#[derive(Parser)]
#[command(name = "ntn-gscm", version, about = "Satellite link channel parameter pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate every satellite over the link time grid.
    Propagate(Opts),
    /// Sample terminals and enumerate visible links.
    Links(Opts),
    /// Synthesize path sets for every link, scenario and frequency.
    Environment(Opts),
    /// Extract large-scale parameters from the path sets.
    Extract(Opts),
    /// Fit the parameter model to the extracted samples.
    Fit(Opts),
    /// Resimulate links from the fitted model and refit.
    Resimulate(Opts),
    /// Compare fitted parameters with the reference tables.
    Compare(Opts),
    /// Run the selected stages in order.
    Run(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, env = "NTN_GSCM_SEED")]
    seed: Option<u64>,
    /// Parameter database replacing the bundled tables.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated stages or `all` (run only).
    #[arg(long)]
    stages: Option<String>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, short)]
    jobs: Option<usize>,
    /// Write elevation-binned mean curves next to the fit.
    #[arg(long)]
    emit_plotdata: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl Opts {
    fn resolve(&self, stage: Option<Stage>) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.params {
            cfg.params = Some(p.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.emit_plotdata {
            cfg.emit_plotdata = true;
        }
        match (stage, &self.stages) {
            (Some(_), Some(_)) => return Err(Error::Config("--stages only applies to run".into())),
            (Some(s), None) => cfg.stages = vec![s],
            (None, Some(list)) => cfg.stages = Stage::parse_list(list)?,
            (None, None) => {}
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameters(_) => 1,
        _ => 2,
    }
}

fn execute(opts: &Opts, stage: Option<Stage>) -> Result<u8, Error> {
    let cfg = opts.resolve(stage)?;
    if opts.print_config {
        println!("{}", cfg.to_json()?);
        return Ok(0);
    }
    if let Some(n) = opts.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let report = Pipeline::new(cfg)?.run()?;
    if report.failures.is_empty() {
        return Ok(0);
    }
    for f in &report.failures {
        eprintln!("{f}");
    }
    eprintln!("{} gated comparison(s) outside tolerance", report.failures.len());
    Ok(3)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (opts, stage) = match &cli.command {
        Command::Propagate(o) => (o, Some(Stage::Propagate)),
        Command::Links(o) => (o, Some(Stage::Links)),
        Command::Environment(o) => (o, Some(Stage::Environment)),
        Command::Extract(o) => (o, Some(Stage::Extract)),
        Command::Fit(o) => (o, Some(Stage::Fit)),
        Command::Resimulate(o) => (o, Some(Stage::Resimulate)),
        Command::Compare(o) => (o, Some(Stage::Compare)),
        Command::Run(o) => (o, None),
    };
    match execute(opts, stage) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
