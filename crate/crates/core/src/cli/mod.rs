//! Command-line front door: one subcommand per pipeline stage.
//!
//! Every subcommand takes `--config FILE`, `--seed N` and trailing
//! `KEY=VALUE` overrides, writes its results to files and prints a single
//! summary line.

mod commands;
pub mod config;

use std::ffi::OsString;

use clap::{Arg, ArgAction, ArgMatches, Command};

pub use commands::SUBCOMMANDS;
pub use config::{parse_config, RunConfig};

use crate::error::{Error, Result};

fn subcommand(entry: &commands::Subcommand) -> Command {
    Command::new(entry.name)
        .about(entry.about)
        .after_help(config::describe(entry.schema))
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("Read `key = value` settings from FILE"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_name("N")
                .value_parser(clap::value_parser!(u64))
                .default_value("0")
                .help("Seed for every random draw of this run"),
        )
        .arg(
            Arg::new("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("Override a config key (applied after --config)"),
        )
}

pub fn command() -> Command {
    Command::new("spkreg")
        .about("Regularize speaker embeddings with VAEs and score verification trials")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands(SUBCOMMANDS.iter().map(subcommand))
}

fn resolve(entry: &commands::Subcommand, m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(entry.schema);
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_text(&crate::data::read_text(path.as_ref())?)?;
    }
    for (i, kv) in m
        .get_many::<String>("set")
        .into_iter()
        .flatten()
        .enumerate()
    {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("override `{kv}` is not KEY=VALUE"),
        })?;
        cfg.set(k.trim(), v.trim(), 0)?;
    }
    cfg.finish()
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let entry = SUBCOMMANDS
        .iter()
        .find(|s| s.name == name)
        .expect("registered");
    let seed = *sub.get_one::<u64>("seed").expect("has default");
    let outcome = resolve(entry, sub).and_then(|cfg| (entry.run)(&cfg, seed));
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("spkreg {name}: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_valid() {
        command().debug_assert();
    }

    #[test]
    fn every_subcommand_help_lists_its_schema() {
        for entry in SUBCOMMANDS {
            let mut c = command();
            let sub = c.find_subcommand_mut(entry.name).unwrap();
            let help = sub.render_long_help().to_string();
            for k in entry.schema {
                assert!(help.contains(k.name), "{}: {}", entry.name, k.name);
            }
        }
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run(["spkreg", "no-such-command"]), 1);
        assert_eq!(run(["spkreg", "eval", "bogus_key=1"]), 1);
    }
}
