//! `hypermetric`: reproducible runs of the library operations with JSON, CSV and SVG output.
//!
//! Exit codes: 0 success, 2 contract violation or I/O failure, 3 numerical non-convergence,
//! 4 usage error. Failures print one line `hypermetric-error: <tag>: <message>` on stderr.

mod commands;
mod config;
mod error;
mod render;
mod parse;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use serde_json::json;

use config::{Param, RunConfig, COMMANDS, OUTPUT, RUN};
use error::CliError;
use render::Scale;

const FIELD_COMMANDS: &[&str] = &["blaschke-from-zeros", "blaschke-from-critical", "solve-gauss", "exhaustion", "maximal-metric"];

fn param_args(params: &'static [Param]) -> impl Iterator<Item = Arg> {
    params.iter().map(|p| {
        let help = if p.default.is_empty() { p.help.to_string() } else { format!("{} [default: {}]", p.help, p.default) };
        Arg::new(p.key).long(p.key).value_name("VALUE").help(help).allow_hyphen_values(true)
    })
}

fn cli() -> Command {
    let mut cmd = Command::new("hypermetric")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Conformal pseudometrics of curvature -4 on the unit disk")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in COMMANDS {
        let sub = Command::new(c.name)
            .about(c.about)
            .args(param_args(c.params))
            .args(param_args(OUTPUT))
            .args(param_args(RUN))
            .arg(Arg::new("config").long("config").value_name("FILE").help("flat section.key = value config file"));
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn command_line_values(name: &str, params: &'static [Param], m: &ArgMatches, out: &mut BTreeMap<String, String>) {
    for p in params {
        if m.value_source(p.key) == Some(ValueSource::CommandLine) {
            if let Some(v) = m.get_one::<String>(p.key) {
                out.insert(format!("{name}.{}", p.key), v.clone());
            }
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HYPERMETRIC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HYPERMETRIC_THREADS must be a positive integer, got '{raw}'")))?;
    // A pool can only be installed once per process; later calls keep the first one.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(name: &str, m: &ArgMatches) -> Result<(), CliError> {
    configure_threads()?;
    let def = config::command(name).ok_or_else(|| CliError::Usage(format!("unknown command '{name}'")))?;
    let file = match m.get_one::<String>("config") {
        Some(path) => config::read_config_file(Path::new(path))?,
        None => BTreeMap::new(),
    };
    let mut given = BTreeMap::new();
    command_line_values("output", OUTPUT, m, &mut given);
    command_line_values("run", RUN, m, &mut given);
    command_line_values(name, def.params, m, &mut given);
    let cfg = RunConfig::resolve(def, &file, &given);

    let scale = Scale::parse(cfg.output("scale"))?;
    cfg.seed()?;
    let wants_field = cfg.path("csv").is_some() || cfg.path("svg").is_some();
    if wants_field && !FIELD_COMMANDS.contains(&name) {
        return Err(CliError::Usage(format!("{name} produces no field for --csv or --svg")));
    }

    let outcome = commands::dispatch(&cfg)?;
    let doc = json!({
        "command": name,
        "config": cfg.values,
        "result": outcome.result,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Render(e.to_string()))? + "\n";
    match cfg.path("json") {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e))?,
        None => print!("{text}"),
    }
    if let Some(field) = &outcome.field {
        if let Some(p) = cfg.path("csv") {
            render::write_csv(field, Path::new(p))?;
        }
        if let Some(p) = cfg.path("svg") {
            render::write_svg(field, scale, Path::new(p))?;
        }
    }
    outcome.failure.map_or(Ok(()), Err)
}

fn report(e: &CliError) -> i32 {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("hypermetric-error: {}: {}", e.tag(), msg.trim());
    e.exit_code()
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return 0;
            }
            _ => {
                let text = e.to_string();
                let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
                return report(&CliError::Usage(line.to_string()));
            }
        },
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match execute(name, sub) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}
