//! Plain-text `key = value` configuration. Keys are long flag names; values
//! from the file are placed before the command-line flags so that flags win.

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config line {}: expected key = value", no + 1)))?;
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(CliError::Validation(format!("config line {}: bad key {k:?}", no + 1)));
        }
        out.push((key.replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Turn entries into flags. Boolean switches take `true`/`false`.
pub fn to_flags(entries: &[(String, String)], switches: &[&str]) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (k, v) in entries {
        if switches.contains(&k.as_str()) {
            match v.as_str() {
                "true" | "1" | "yes" => out.push(format!("--{k}").into()),
                "false" | "0" | "no" => {}
                _ => return Err(CliError::Validation(format!("config key {k}: expected true or false, got {v:?}"))),
            }
        } else {
            out.push(format!("--{k}").into());
            out.push(v.into());
        }
    }
    Ok(out)
}

/// The value of `--config PATH` or `--config=PATH` in `argv`, if present.
pub fn config_path(argv: &[OsString]) -> Result<Option<OsString>, CliError> {
    let mut path = None;
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().cloned().ok_or_else(|| CliError::Validation("--config needs a path".into()))?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    Ok(path)
}

/// Insert `flags` right after the subcommand name, so that later
/// command-line flags override them.
pub fn inject(argv: Vec<OsString>, flags: Vec<OsString>, subcommands: &[&str]) -> Vec<OsString> {
    if flags.is_empty() {
        return argv;
    }
    let pos = argv.iter().skip(1).position(|a| subcommands.contains(&a.to_string_lossy().as_ref())).map(|p| p + 2);
    match pos {
        Some(p) => {
            let mut out = argv[..p].to_vec();
            out.extend(flags);
            out.extend_from_slice(&argv[p..]);
            out
        }
        None => argv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse("# sweep\np = 6\n\nno_timestamp = true # inline\n").unwrap();
        assert_eq!(e, vec![("p".into(), "6".into()), ("no-timestamp".into(), "true".into())]);
        assert!(parse("just words").is_err());
        assert!(parse("a b = 1").is_err());
    }

    #[test]
    fn flags_follow_the_subcommand() {
        let flags = to_flags(&parse("p = 6\nno-timestamp = true").unwrap(), &["no-timestamp"]).unwrap();
        let argv = inject(os(&["itl", "--threads", "2", "bounds", "--p", "4"]), flags, &["bounds"]);
        assert_eq!(argv, os(&["itl", "--threads", "2", "bounds", "--p", "6", "--no-timestamp", "--p", "4"]));
    }

    #[test]
    fn config_flag_is_found() {
        assert_eq!(config_path(&os(&["itl", "--config=a.cfg", "bounds"])).unwrap(), Some("a.cfg".into()));
        assert_eq!(config_path(&os(&["itl", "--config", "b", "bounds"])).unwrap(), Some("b".into()));
        assert_eq!(config_path(&os(&["itl", "bounds"])).unwrap(), None);
        assert!(config_path(&os(&["itl", "--config"])).is_err());
    }
}
