mod args;
mod commands;
mod data;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            report_error("usage", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let jobs = cli.jobs;
    let result = aimer::exec::with_jobs(jobs, move || match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &cli),
        Command::Fit(a) => commands::fit(a, &cli),
        Command::Cv(a) => commands::cv(a, &cli),
        Command::Predict(a) => commands::predict(a, &cli),
        Command::Audit(a) => commands::audit(a, &cli),
        Command::Bench(a) => commands::bench(a, &cli),
        Command::RealData(a) => commands::real_data(a, &cli),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(error_class(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

fn error_class(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<aimer::Error>() {
        Some(inner) => inner.class(),
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None if e.downcast_ref::<serde_json::Error>().is_some() => "json",
        None => "internal",
    }
}

/// One line on stderr: `error class=<class> message=<json string>`.
fn report_error(class: &str, message: &str) {
    let quoted = serde_json::to_string(message).unwrap_or_else(|_| "\"\"".into());
    eprintln!("error class={class} message={quoted}");
}
