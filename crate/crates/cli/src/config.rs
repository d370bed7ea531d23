//! `--config FILE` support: `key = value` lines become `--key value` flags
//! inserted right after the subcommand, so explicit flags later on the
//! command line override them.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};

pub(crate) fn parse(text: &str) -> Result<Vec<OsString>> {
    let mut flags = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", n + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') {
            bail!("config line {}: invalid key {key:?}", n + 1);
        }
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                flags.push(format!("--{key}").into());
                flags.push(value.into());
            }
        }
    }
    Ok(flags)
}

fn config_path(argv: &[OsString]) -> Option<(usize, OsString)> {
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return argv.get(i + 1).map(|p| (i, p.clone()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((i, p.into()));
        }
    }
    None
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Returns `argv` with the config file's flags spliced in.
pub(crate) fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some((_, path)) = config_path(&argv) else {
        return Ok(argv);
    };
    let Some(sub) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let flags = parse(&text)?;
    let mut out = argv[..=sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_booleans() {
        let flags = parse("# defaults\ncollar = 0.25\nper_file = true\naggregate=false\n\n").unwrap();
        assert_eq!(flags, os(&["--collar", "0.25", "--per-file"]));
        assert!(parse("collar 0.25").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        fs::write(&path, "collar = 0.5\n").unwrap();
        let p = path.to_str().unwrap();
        let argv = expand(os(&["sp", "--config", p, "score-der", "a", "b", "--collar", "0.1"])).unwrap();
        assert_eq!(argv, os(&["sp", "--config", p, "score-der", "--collar", "0.5", "a", "b", "--collar", "0.1"]));
    }
}
