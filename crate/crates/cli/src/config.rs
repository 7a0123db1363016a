//! `key = value` config files that supply defaults for command-line flags.
//!
//! Keys are long flag names (`sigma-sq`, or `sigma_sq`). Values are injected
//! right after the subcommand name, ahead of the user's own arguments, and
//! every subcommand lets a later occurrence override an earlier one, so flags
//! given on the command line always win.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

#[derive(Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push(Entry {
            key,
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Value of `--config` in `args`, if any.
fn config_path(args: &[String]) -> Option<(usize, usize, String)> {
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            return args.get(i + 1).map(|p| (i, 2, p.clone()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some((i, 1, p.to_string()));
        }
    }
    None
}

/// Rewrite `args` with the config file's entries spliced in after the
/// subcommand. Keys that no subcommand knows are an error; keys that only
/// other subcommands know are skipped, so one file can serve every command.
pub fn expand(cmd: &Command, mut args: Vec<String>) -> Result<Vec<String>> {
    let Some((at, width, path)) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let entries = parse(&text).with_context(|| format!("in config {path}"))?;
    args.drain(at..at + width);

    let known: BTreeSet<String> = cmd
        .get_subcommands()
        .flat_map(|s| s.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    for e in &entries {
        if !known.contains(&e.key) || e.key == "config" {
            bail!("config {path} line {}: unknown key `{}`", e.line, e.key);
        }
    }

    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(pos) = args.iter().skip(1).position(|a| names.contains(a)).map(|p| p + 1) else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(&args[pos]).expect("name came from the command");
    let mut injected = Vec::new();
    for e in &entries {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(e.key.as_str())) else {
            continue;
        };
        if arg.get_action().takes_values() {
            injected.push(format!("--{}={}", e.key, e.value));
        } else {
            match e.value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{}", e.key)),
                "false" | "no" | "0" => {}
                other => bail!(
                    "config {path} line {}: `{}` expects true or false, got `{other}`",
                    e.line,
                    e.key
                ),
            }
        }
    }
    args.splice(pos + 1..pos + 1, injected);
    Ok(args)
}
