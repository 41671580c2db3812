//! `key=value` config files, merged into the argument list before parsing so
//! that clap validates file values exactly like flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::error::CliError;

/// Keys that cannot be combined; a flag for one suppresses the file's other.
const EXCLUSIVE: &[(&str, &str)] = &[("tau", "tau-ratio"), ("r", "n"), ("r", "m")];

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::parse(i + 1, format!("expected key=value, got {line:?}")))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::parse(i + 1, "empty key".into()));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn flag_name(arg: &str) -> Option<&str> {
    arg.strip_prefix("--").map(|s| s.split('=').next().unwrap_or(s))
}

/// Append config entries the command line does not already set. Keys the
/// chosen subcommand does not accept are ignored, so one file can serve
/// several subcommands.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strings: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let config_path = strings.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strings.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| CliError::io(format!("reading config {path}"), e))?;
    let entries = parse_config(&text)?;

    let cmd = Cli::command();
    let Some(sub) = strings
        .iter()
        .skip(1)
        .find_map(|a| cmd.get_subcommands().find(|s| s.get_name() == a))
    else {
        return Ok(argv);
    };
    let present: Vec<&str> = strings.iter().filter_map(|a| flag_name(a)).collect();
    let mut out = argv;
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let blocked = present.contains(&key.as_str())
            || EXCLUSIVE
                .iter()
                .any(|&(a, b)| (key == a && present.contains(&b)) || (key == b && present.contains(&a)));
        if blocked {
            continue;
        }
        let accepted = key == "jobs" || sub.get_arguments().any(|a| a.get_long() == Some(key.as_str()));
        if accepted {
            out.push(format!("--{key}").into());
            out.push(value.into());
        }
    }
    Ok(out)
}
