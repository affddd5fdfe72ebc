use clap::{Parser, Subcommand};
use daug_cli::{
    cmd_augment, cmd_bench, cmd_extract, cmd_gen, cmd_validate, exit_code_for, AugmentArgs,
    BenchArgs, ExtractArgs, GenArgs, ValidateArgs,
};

/// Dynamic-scene LiDAR augmentation: extract annotated objects and
/// insert them into multi-frame scenes with motion continuity,
/// road-validated placement, and dynamic collision avoidance.
#[derive(Parser)]
#[command(name = "daug", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a spec file
    Gen(GenArgs),
    /// Build an object bank from annotated scenes
    Extract(ExtractArgs),
    /// Insert bank objects into every scene of a corpus
    Augment(AugmentArgs),
    /// Re-check augmentation and scene-file invariants
    Validate(ValidateArgs),
    /// Time pixel-level road lookup against the polygon baseline
    Bench(BenchArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DAUG_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Augment(args) => cmd_augment(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}
