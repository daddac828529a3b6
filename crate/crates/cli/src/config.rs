//! `key = value` config files. Keys are the long flag names of the chosen
//! subcommand (`_` and `-` are interchangeable); flags given on the command
//! line win over the file.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Long flag names the user typed explicitly.
fn explicit_flags(args: &[OsString]) -> Vec<String> {
    args.iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

fn config_path(args: &[OsString]) -> Result<Option<OsString>, String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned().map(Some).ok_or_else(|| "--config needs a file path".to_string());
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// Parses a config file into `(key, value, line number)` triples.
pub fn parse_config(text: &str) -> Result<Vec<(String, String, usize)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = normalize(k);
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if out.iter().any(|(seen, _, _): &(String, String, usize)| *seen == key) {
            return Err(format!("line {}: duplicate key `{key}`", i + 1));
        }
        out.push((key, v.trim().to_string(), i + 1));
    }
    Ok(out)
}

/// Splices the options from `--config FILE` into `args` right after the
/// subcommand name, skipping any key the user also passed as a flag.
pub fn expand(cli: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let Some(pos) = args.iter().skip(1).position(|a| cli.find_subcommand(a).is_some()).map(|p| p + 1) else {
        return Ok(args);
    };
    let sub = cli.find_subcommand(&args[pos]).expect("found above");
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| format!("{}: {e}", Path::new(&path).display()))?;
    let entries = parse_config(&text).map_err(|e| format!("{}: {e}", Path::new(&path).display()))?;
    let explicit = explicit_flags(&args);

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value, line) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config" && key != "help")
            .ok_or_else(|| {
                format!("{}:{line}: unknown key `{key}` for `{}`", Path::new(&path).display(), sub.get_name())
            })?;
        if explicit.contains(&key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => injected.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(format!("{}:{line}: `{key}` must be true or false", Path::new(&path).display())),
            },
            _ => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Arg;

    fn cli() -> Command {
        Command::new("t").subcommand(
            Command::new("go")
                .arg(Arg::new("config").long("config"))
                .arg(Arg::new("width-mult").long("width-mult"))
                .arg(Arg::new("epochs").long("epochs"))
                .arg(Arg::new("fast").long("fast").action(ArgAction::SetTrue)),
        )
    }

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parse_lines() {
        let e = parse_config("# c\n\nwidth_mult = 0.5\nepochs=3\n").unwrap();
        assert_eq!(e, vec![("width-mult".into(), "0.5".into(), 3), ("epochs".into(), "3".into(), 4)]);
        assert!(parse_config("epochs 3").is_err());
        assert!(parse_config("a=1\na=2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("c.txt");
        std::fs::write(&p, "width_mult = 0.5\nepochs = 7\nfast = true\n").unwrap();
        let args = os(&["t", "go", "--epochs", "2", "--config", p.to_str().unwrap()]);
        let out = expand(&cli(), args).unwrap();
        let m = cli().try_get_matches_from(out).unwrap();
        let (_, sub) = m.subcommand().unwrap();
        assert_eq!(sub.get_one::<String>("epochs").unwrap(), "2");
        assert_eq!(sub.get_one::<String>("width-mult").unwrap(), "0.5");
        assert!(sub.get_flag("fast"));

        std::fs::write(&p, "bogus = 1\n").unwrap();
        let err = expand(&cli(), os(&["t", "go", "--config", p.to_str().unwrap()])).unwrap_err();
        assert!(err.contains("unknown key `bogus`"), "{err}");
    }
}
