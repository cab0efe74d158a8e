//! `key = value` config files, spliced into the argument list ahead of the
//! command-line flags so that the latter take precedence.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::args::Command;
use crate::failure::Failure;

/// Flags from a config file. Blank lines and `#` comments are skipped; keys
/// may use `_` or `-`; `true`/`false` values toggle switches.
pub fn parse_config(text: &str) -> Result<Vec<String>, Failure> {
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Config(format!("config line {}: expected key = value", n + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(Failure::Config(format!("config line {}: bad key", n + 1)));
        }
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => flags.push(format!("--{key}={v}")),
        }
    }
    Ok(flags)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Inserts the flags of the `--config` file right after the subcommand name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path))
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let flags = parse_config(&text)?;
    let pos = args
        .iter()
        .position(|a| Command::NAMES.contains(&a.to_string_lossy().as_ref()))
        .ok_or_else(|| Failure::Config("--config given without a command".into()))?;
    let mut out = args[..=pos].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
