mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::Cli;
use commands::UsageError;

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return EXIT_VALIDATION;
    }
    match e.downcast_ref::<dfhn_core::Error>() {
        Some(dfhn_core::Error::Io(_) | dfhn_core::Error::Csv(_) | dfhn_core::Error::Json(_)) => EXIT_OTHER,
        Some(ce) if ce.is_validation() => EXIT_VALIDATION,
        Some(_) => EXIT_NUMERICAL,
        None => EXIT_OTHER,
    }
}

/// Dump every option default as key=value, grouped by subcommand.
fn print_defaults(only: Option<&str>) {
    let cmd = Cli::command();
    let skip = ["help", "version", "config", "print-defaults"];
    let line = |out: &mut String, arg: &clap::Arg| {
        if let Some(long) = arg.get_long().filter(|l| !skip.contains(l)) {
            let vals: Vec<String> = arg.get_default_values().iter().map(|v| v.to_string_lossy().into_owned()).collect();
            let _ = writeln!(out, "{long}={}", vals.join(","));
        }
    };
    let mut out = String::from("[global]\n");
    for arg in cmd.get_arguments().filter(|a| a.is_global_set()) {
        line(&mut out, arg);
    }
    for sub in cmd.get_subcommands() {
        if only.is_some_and(|n| n != sub.get_name()) {
            continue;
        }
        let _ = writeln!(out, "\n[{}]", sub.get_name());
        for arg in sub.get_arguments().filter(|a| !a.is_global_set()) {
            line(&mut out, arg);
        }
    }
    // A closed pipe (e.g. `| head`) is not an error here.
    let _ = std::io::stdout().write_all(out.as_bytes());
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let names: Vec<String> = Cli::command().get_subcommands().map(|s| s.get_name().to_string()).collect();
    let argv = match config::merge_config_args(argv, &names) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.print_defaults {
        print_defaults(cli.command.as_ref().map(|c| c.name()));
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: a subcommand is required; see --help");
        return ExitCode::from(EXIT_VALIDATION);
    };
    match commands::run(&cmd, &cli.out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
