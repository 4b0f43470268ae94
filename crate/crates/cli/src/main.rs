mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{Command, RunContext};
use config::{RunConfig, Settings};
use output::Outputs;

/// Open-ended 3D object category learning with one local HDP per category.
#[derive(Parser, Debug)]
#[command(name = "localhdp", version)]
struct Cli {
    /// TOML file with default settings (keys match the long flag names)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

/// Exit status 2 for bad settings or inputs rejected as misconfigured, 1 otherwise.
fn fail(err: &anyhow::Error, config_error: bool) -> ExitCode {
    use localhdp::error::Error;
    let line = format!("{err:#}").replace('\n', " ");
    eprintln!("localhdp: error: {line}");
    let from_core = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::Config(_) | Error::Parameter(_))));
    if config_error || from_core {
        ExitCode::from(2)
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOCALHDP_LOG", "warn")).init();
    let cli = Cli::parse();

    let file = match cli.config.as_deref().map(Settings::from_file).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return fail(&e, true),
    };
    let merged = cli.settings.over(&file);
    let cfg = match RunConfig::resolve(&merged) {
        Ok(c) => c,
        Err(e) => return fail(&e, true),
    };
    let features_overridden =
        merged.voxel_size.is_some() || merged.image_width.is_some() || merged.support_length.is_some();

    let mut outputs = Outputs::default();
    let result = commands::run(
        cli.command,
        RunContext {
            cfg: &cfg,
            outputs: &mut outputs,
            features_overridden,
        },
    );
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            outputs.discard();
            fail(&e, false)
        }
    }
}
