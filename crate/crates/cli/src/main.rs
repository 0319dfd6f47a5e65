//! `topicforge` command-line entry point. The subcommands are generated
//! from the parameter tables in [`schema`]; every run resolves its
//! configuration, executes, and records a manifest that `report` can
//! replay.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};
use topicforge_core::{Error, Result};

use topicforge_cli::config::{flag_name, resolve, CommandSpec, Config};
use topicforge_cli::manifest::{digest_files, RunManifest};
use topicforge_cli::{commands, schema};

fn build_cli() -> Command {
    let mut root = Command::new("topicforge")
        .about("Topic discovery toolkit for clinical notes")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for spec in schema::COMMANDS {
        let mut cmd = Command::new(spec.name).about(spec.about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("Config file with key=value lines; flags take precedence"),
        );
        for param in spec.params {
            let mut arg = Arg::new(param.key)
                .long(flag_name(param.key))
                .help(param.help)
                .action(ArgAction::Set)
                .value_name("VALUE");
            if param.is_flag {
                arg = arg
                    .num_args(0..=1)
                    .default_missing_value("true")
                    .value_parser(["true", "false"]);
            }
            cmd = cmd.arg(arg);
        }
        root = root.subcommand(cmd);
    }
    root
}

fn flag_values(spec: &CommandSpec, matches: &ArgMatches) -> BTreeMap<String, String> {
    let mut values = BTreeMap::new();
    for param in spec.params {
        if let Some(value) = matches.get_one::<String>(param.key) {
            values.insert(param.key.to_string(), value.clone());
        }
    }
    values
}

/// 0 success, 1 usage error, 2 data or precondition error, 3 numeric
/// failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn setup_threads(cfg: &Config) -> Result<()> {
    if cfg.bool("deterministic")? || cfg.get("threads").is_none() {
        return Ok(());
    }
    let threads: usize = cfg.parse("threads")?;
    if threads == 0 {
        return Err(Error::config("threads must be at least 1"));
    }
    if let Err(err) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        log::warn!("thread pool already initialized: {err}");
    }
    Ok(())
}

fn manifest_path(command: &str, cfg: &Config) -> PathBuf {
    let dir = PathBuf::from(cfg.get("out_dir").unwrap_or("."));
    dir.join(format!("{}_manifest.json", command.replace('-', "_")))
}

fn execute_and_record(command: &str, cfg: &Config) -> Result<()> {
    setup_threads(cfg)?;
    let start = Instant::now();
    let execution = commands::execute(command, cfg)?;
    let manifest = RunManifest {
        command: command.to_string(),
        config: cfg.values().clone(),
        inputs: digest_files(&execution.inputs)?,
        outputs: execution
            .outputs
            .iter()
            .map(|path| path.display().to_string())
            .collect(),
        seed: cfg.get("seed").and_then(|s| s.parse().ok()),
        wall_ms: start.elapsed().as_millis(),
        info: execution.info,
    };
    let path = manifest_path(command, cfg);
    manifest.save_to_path(&path)?;
    println!("manifest: {}", path.display());
    Ok(())
}

/// Replays the command recorded in a manifest from its resolved
/// configuration, optionally redirecting the outputs.
fn replay(cfg: &Config) -> Result<()> {
    let path = cfg.path("manifest")?;
    let stored = RunManifest::load_from_path(&path)?;
    if stored.command == "report" {
        return Err(Error::config(
            "the manifest records a report run; point --manifest at the original command's manifest",
        ));
    }
    if schema::command(&stored.command).is_none() {
        return Err(Error::config(format!(
            "manifest names unknown command {:?}",
            stored.command
        )));
    }
    let mut replay_cfg = Config::from_map(stored.config.clone());
    if let Some(dir) = cfg.get("out_dir") {
        replay_cfg.set("out_dir", dir.to_string());
    }
    println!("replaying {} from {}", stored.command, path.display());
    execute_and_record(&stored.command, &replay_cfg)
}

fn run(command: &str, matches: &ArgMatches) -> Result<()> {
    let spec = schema::command(command)
        .ok_or_else(|| Error::config(format!("unknown command {command:?}")))?;
    let config_file = matches.get_one::<String>("config").map(String::as_str);
    let cfg = resolve(spec, config_file, &flag_values(spec, matches))?;
    if command == "report" {
        replay(&cfg)
    } else {
        execute_and_record(command, &cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match build_cli().try_get_matches() {
        Ok(matches) => matches,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let (command, sub_matches) = matches
        .subcommand()
        .expect("a subcommand is required by the parser");
    match run(command, sub_matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
