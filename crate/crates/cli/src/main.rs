mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::Header;
use settings::{model_from_flag, overlay, AnalyticSection, EmpiricalSection, GwSection, SampleSection, Settings};

#[derive(Parser)]
#[command(name = "randset", version, about = "Random self-similar sets: sampling, dimensions and branching tails")]
struct Cli {
    /// TOML file with a [model] table and per-command tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Builtin model such as `mandelbrot(2,2,0.8)`, or a model `.toml` file.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "RANDSET_THREADS")]
    threads: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Root of the Moran equation, and Monte Carlo s_ε at the given scales.
    DimAnalytic(AnalyticSection),
    /// Coding counts of one realisation and a graymap for planar models.
    Sample(SampleSection),
    /// Box, spectrum, quasi-Assouad and naive Assouad estimates over seeds.
    DimEmpirical(EmpiricalSection),
    /// Galton-Watson trajectories, tails and mgf.
    Gw(GwSection),
    /// Randomised invariant suite.
    Verify,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut settings = Settings::load(cli.config.as_deref())?;
    if let Some(m) = &cli.model {
        settings.model = Some(model_from_flag(m)?);
    }
    if cli.seed.is_some() {
        settings.seed = cli.seed;
    }
    let seed = settings.seed.unwrap_or(0);
    let name = match &cli.command {
        Command::DimAnalytic(flags) => {
            settings.analytic = overlay(&settings.analytic, flags)?;
            "dim-analytic"
        }
        Command::Sample(flags) => {
            settings.sample = overlay(&settings.sample, flags)?;
            "sample"
        }
        Command::DimEmpirical(flags) => {
            settings.empirical = overlay(&settings.empirical, flags)?;
            "dim-empirical"
        }
        Command::Gw(flags) => {
            settings.gw = overlay(&settings.gw, flags)?;
            "gw"
        }
        Command::Verify => "verify",
    };
    let header = Header {
        command: name,
        seed,
        config: settings.echo(),
    };
    let out = output::prepare(&cli.out)?;
    let model = settings.model.as_ref();
    match cli.command {
        Command::DimAnalytic(_) => commands::dim_analytic(model, &settings.analytic, seed, &header, &out),
        Command::Sample(_) => commands::sample(model, &settings.sample, seed, &header, &out),
        Command::DimEmpirical(_) => commands::dim_empirical(model, &settings.empirical, seed, &header, &out),
        Command::Gw(_) => commands::gw(model, &settings.gw, seed, &header, &out),
        Command::Verify => commands::verify(seed, &header, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<randset::Error>() {
                Some(err) if err.is_config() => 2,
                Some(err) if err.is_budget() => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
