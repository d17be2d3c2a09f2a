//! `--config <file>` support: every `key = value` line of the file becomes a
//! `--key value` flag placed right after the subcommand, so flags given on
//! the command line still win.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};

/// Pulls `--config <file>` / `--config=<file>` out of `args`.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<OsString>> {
    let mut found = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file argument");
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            found = Some(OsString::from(p));
            args.remove(i);
            continue;
        }
        i += 1;
    }
    Ok(found)
}

/// Turns config text into flags. `true` values become bare switches.
pub fn config_flags(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", n + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        let value = v.trim();
        out.push(OsString::from(format!("--{key}")));
        if value != "true" {
            out.push(OsString::from(value));
        }
    }
    Ok(out)
}

/// Expands `--config` into explicit flags after the subcommand name.
pub fn expand(mut args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let flags = config_flags(&text).with_context(|| format!("config {}", path.to_string_lossy()))?;
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
        .context("--config given without a subcommand")?;
    args.splice(at..at, flags);
    Ok(args)
}
