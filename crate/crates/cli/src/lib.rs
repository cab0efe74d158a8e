//! Command-line front end for `hopf-core`.

// `!(a > b)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod failure;
pub mod verify;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::Failure;

fn jobs(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Simulate(a) => a.common.jobs,
        Command::Equilibria(a) => a.common.jobs,
        Command::Verify(a) => a.common.jobs,
        Command::Sweep(a) => a.common.jobs,
        Command::Manifold(a) => a.common.jobs,
        Command::Orbit(a) => a.common.jobs,
        Command::Bendixson(a) => a.common.jobs,
    }
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate(a) => commands::simulate(a),
        Command::Equilibria(a) => commands::equilibria_cmd(a),
        Command::Verify(a) => commands::verify(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Manifold(a) => commands::manifold(a),
        Command::Orbit(a) => commands::orbit(a),
        Command::Bendixson(a) => commands::bendixson(a),
    }
}

/// Runs the command line `args` (including the program name).
pub fn run(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let args = match config::expand_args(args.into_iter().collect()) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("hopf-verifier: {f}");
            return f.into();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match jobs(&cli.command) {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Failure::Config(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hopf-verifier: {f}");
            f.into()
        }
    }
}
