use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rvc_gep::pipeline::{parse_override, Pipeline, Stage};

#[derive(Parser)]
#[command(
    name = "rvcgep",
    version,
    about = "Reliability-verified generation expansion planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "run.toml")]
    config: PathBuf,

    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Global seed; overrides `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Dotted-key override such as `wodt.max_depth=4`; repeatable.
    #[arg(long = "stage-override", global = true, value_name = "KEY=VALUE")]
    stage_override: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Sweep,
    Label,
    Train,
    Extract,
    Encode,
    SolveRm,
    SolveRvc,
    Report,
    /// All stages in order.
    Pipeline,
}

fn run(cli: &Cli) -> rvc_gep::Result<()> {
    let overrides = cli
        .stage_override
        .iter()
        .map(|s| parse_override(s))
        .collect::<rvc_gep::Result<Vec<_>>>()?;
    let p = Pipeline::open(&cli.config, &overrides, cli.out.clone(), cli.seed)?;
    let stages: Vec<Stage> = match cli.command {
        Command::Pipeline => Stage::ALL.to_vec(),
        Command::Sweep => vec![Stage::Sweep],
        Command::Label => vec![Stage::Label],
        Command::Train => vec![Stage::Train],
        Command::Extract => vec![Stage::Extract],
        Command::Encode => vec![Stage::Encode],
        Command::SolveRm => vec![Stage::SolveRm],
        Command::SolveRvc => vec![Stage::SolveRvc],
        Command::Report => vec![Stage::Report],
    };
    for s in stages {
        let r = p.run_stage(s)?;
        for note in r.notes {
            println!("[{}] {note}", r.stage);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
