//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. Every run that gets past `--help` writes `manifest.json` to the
//! output directory, including failed ones.

mod args;
mod commands;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;
use serde_json::Value;

pub use args::*;

use crate::config;
use crate::error::Error;
use crate::output::{OutputFile, Outputs};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: Option<String>,
    /// Arguments as given, without the program name.
    pub argv: Vec<String>,
    /// Arguments after merging the config file.
    pub effective_argv: Vec<String>,
    pub options: Value,
    pub seed: Option<u64>,
    pub shots: Option<String>,
    pub exit_code: i32,
    pub error: Option<String>,
    pub outputs: Vec<OutputFile>,
}

fn lossy(v: &[OsString]) -> Vec<String> {
    v.iter().map(|s| s.to_string_lossy().into_owned()).collect()
}

/// Value of `--name <v>` or `--name=<v>`, last occurrence wins.
fn scan_flag(args: &[OsString], name: &str) -> Option<OsString> {
    let long = format!("--{name}");
    let prefix = format!("--{name}=");
    let mut found = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == long {
            found = it.next().cloned();
        } else if let Some(v) = s.strip_prefix(&prefix) {
            found = Some(v.into());
        }
    }
    found
}

/// Splices config-file tokens in after the subcommand. Flags typed before
/// the subcommand (global ones) move after the file's tokens so they still
/// override it.
fn merge_config(args: &[OsString]) -> Result<Vec<OsString>, Error> {
    let Some(path) = scan_flag(args, "config") else {
        return Ok(args.to_vec());
    };
    let Some(pos) = args.iter().position(|a| Command::NAMES.iter().any(|n| a == *n)) else {
        return Ok(args.to_vec());
    };
    let command = args[pos].to_string_lossy().into_owned();
    let tokens = config::tokens_from_file(&PathBuf::from(path), &command, &Command::NAMES)?;
    let mut merged = vec![args[pos].clone()];
    merged.extend(tokens);
    merged.extend_from_slice(&args[..pos]);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

fn write_manifest(dir: &std::path::Path, manifest: &Manifest) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut bytes = serde_json::to_vec_pretty(manifest).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), bytes)
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let user = argv.get(1..).unwrap_or_default().to_vec();
    let fallback_dir = scan_flag(&user, "out-dir").map_or_else(|| PathBuf::from("out"), PathBuf::from);
    let mut manifest = Manifest {
        tool: "qseg",
        version: env!("CARGO_PKG_VERSION"),
        core_version: qseg_core::VERSION,
        command: user
            .iter()
            .find_map(|a| Command::NAMES.iter().find(|n| a == **n).map(|n| n.to_string())),
        argv: lossy(&user),
        effective_argv: Vec::new(),
        options: Value::Null,
        seed: None,
        shots: None,
        exit_code: 0,
        error: None,
        outputs: Vec::new(),
    };
    let finish = |mut manifest: Manifest, dir: &std::path::Path, code: i32, error: Option<String>| -> i32 {
        manifest.exit_code = code;
        manifest.error = error;
        match write_manifest(dir, &manifest) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", dir.join("manifest.json").display());
                if code == 0 {
                    2
                } else {
                    code
                }
            }
        }
    };

    let merged = match merge_config(&user) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return finish(manifest, &fallback_dir, e.exit_code(), Some(e.to_string()));
        }
    };
    manifest.effective_argv = lossy(&merged);
    let program = argv.first().cloned().unwrap_or_else(|| "qseg".into());
    let cli = match Cli::try_parse_from(std::iter::once(program).chain(merged)) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            return finish(manifest, &fallback_dir, 1, Some("no command given".into()));
        }
        Err(e) => {
            let _ = e.print();
            let msg = e.kind().to_string();
            return finish(manifest, &fallback_dir, 1, Some(msg));
        }
    };
    init_logging(cli.global.verbose);
    manifest.command = Some(cli.command.name().to_string());
    manifest.options = serde_json::to_value(&cli).unwrap_or(Value::Null);
    manifest.seed = Some(cli.global.seed);
    manifest.shots = cli.global.shots.clone();
    let dir = cli.global.out_dir.clone();

    let mut outputs = match Outputs::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = commands::execute(&cli, &mut outputs);
    manifest.outputs = outputs.files().to_vec();
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => finish(manifest, &dir, 0, None),
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            finish(manifest, &dir, code, Some(e.to_string()))
        }
    }
}
