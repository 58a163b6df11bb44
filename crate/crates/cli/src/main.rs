mod args;
mod commands;
mod failure;
mod io;
mod operator_cmd;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, OperatorCommand};
use commands::Completed;
use failure::Failure;

fn run(cli: &Cli) -> Result<Completed, Failure> {
    match &cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::JacobianCheck(a) => commands::jacobian_check(a),
        Command::Replay(a) => commands::replay(a),
        Command::Operator(op) => match op {
            OperatorCommand::Pairing(a) => operator_cmd::pairing_cmd(a),
            OperatorCommand::BallMeasure(a) => operator_cmd::ball_measure_cmd(a),
            OperatorCommand::Scan(a) => operator_cmd::scan_cmd(a),
            OperatorCommand::ExtensionCheck(a) => operator_cmd::extension_cmd(a),
        },
    }
}

fn out_dir(cli: &Cli) -> &std::path::Path {
    match &cli.command {
        Command::Analyze(a) => &a.out.out,
        Command::JacobianCheck(a) => &a.out.out,
        Command::Replay(a) => &a.out.out,
        Command::Operator(op) => match op {
            OperatorCommand::Pairing(a) => &a.out.out,
            OperatorCommand::BallMeasure(a) => &a.out.out,
            OperatorCommand::Scan(a) => &a.out.out,
            OperatorCommand::ExtensionCheck(a) => &a.out.out,
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let done = match run(&cli) {
        Ok(d) => d,
        Err(f) => {
            eprintln!("{}", f.to_json());
            return f.code();
        }
    };
    match done.outputs.write(out_dir(&cli)) {
        Ok(paths) => {
            for line in &done.summary {
                println!("{line}");
            }
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            return f.code();
        }
    }
    match done.failed {
        None => ExitCode::SUCCESS,
        Some(reason) => {
            let f = Failure::Verification(reason);
            eprintln!("{}", f.to_json());
            f.code()
        }
    }
}
