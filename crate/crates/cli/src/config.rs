//! `--config` support: a TOML table whose keys are the long flag names of
//! the chosen subcommand. Its entries are spliced into argv ahead of the
//! user's own flags, so flags given on the command line take precedence.

use std::ffi::OsString;
use std::path::Path;

use clap::Command;
use toml::Value;

/// Finds `--config FILE` / `--config=FILE` anywhere in argv.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Flags that are not allowed as config keys.
const RESERVED: [&str; 3] = ["config", "help", "version"];

/// Rewrites argv so that the config entries precede the explicit flags.
pub fn merge(cmd: &Command, argv: Vec<OsString>, path: &Path) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("--config {}: {e}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| format!("--config {}: {e}", path.display()))?;

    // the subcommand is the first argv entry naming one
    let names: Vec<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
    let pos = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| names.contains(&a.to_string_lossy().as_ref()))
        .map(|(i, _)| i);
    let Some(pos) = pos else {
        // let clap report the missing subcommand
        return Ok(argv);
    };
    let sub_name = argv[pos].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&sub_name).expect("known subcommand");

    let mut injected = Vec::new();
    for (key, value) in &table {
        let flag = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(flag.as_str()))
            .filter(|_| !RESERVED.contains(&flag.as_str()))
            .ok_or_else(|| format!("--config {}: unknown key `{key}` for `{sub_name}`", path.display()))?;
        let takes_value = arg.get_action().takes_values();
        let long = format!("--{flag}");
        match value {
            Value::Boolean(b) if !takes_value => {
                if *b {
                    injected.push(long);
                }
            }
            _ if !takes_value => return Err(format!("--config: `{key}` must be true or false")),
            Value::Array(items) => {
                for v in items {
                    injected.push(long.clone());
                    injected.push(scalar(key, v)?);
                }
            }
            Value::Table(t) => {
                // `[param]` tables become repeated `--param k=v`
                for (k, v) in t {
                    injected.push(long.clone());
                    injected.push(format!("{k}={}", scalar(key, v)?));
                }
            }
            v => {
                injected.push(long);
                injected.push(scalar(key, v)?);
            }
        }
    }

    let mut out = Vec::with_capacity(argv.len() + injected.len());
    out.extend_from_slice(&argv[..=pos]);
    out.extend(injected.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

fn scalar(key: &str, v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(format!("--config: unsupported value for `{key}`")),
    }
}
