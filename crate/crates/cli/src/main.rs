use clap::{Args, Parser, Subcommand};
use randers_cli::commands::{error_block, exit_code, run, Command, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "randers", version, about = "Boundary distance data of Randers metrics in the disk")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the boundary distance matrix
    Simulate(Common),
    /// Write the symmetric and antisymmetric parts of the matrix
    Decompose(Common),
    /// Compare with the scenario named by `compare` and write a report
    Recover(Common),
    /// Check the reversibility, projective and gauge properties
    Verify(Common),
    /// Write geodesic fans and profiles for plotting
    Plotdata(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of the scenario
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores, 1 for a serial run
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Decompose(c) => (Command::Decompose, c),
        Cmd::Recover(c) => (Command::Recover, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Plotdata(c) => (Command::Plotdata, c),
    };
    let opts = RunOptions {
        config: common.config,
        out: common.out,
        seed: common.seed,
        threads: common.threads,
    };
    let result = run(command, &opts);
    if let Err(e) = &result {
        let block = error_block(e);
        eprint!("{block}");
        let _ = std::fs::create_dir_all(&opts.out);
        let _ = std::fs::write(opts.out.join("error.txt"), block);
    }
    ExitCode::from(exit_code(&result) as u8)
}
