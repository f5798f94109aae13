//! Config-file merging and range arguments.

use std::ffi::OsString;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Largest number of values a range may expand to.
const MAX_RANGE_LEN: usize = 1_000_000;

/// A list of values given as `v`, `v1,v2,...`, `start:stop:step` or `a..b`.
///
/// `start:stop:step` includes `stop` when it lies within half a step of the
/// last grid point. `a..b` is the inclusive integer range.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(into = "String")]
pub struct RangeArg {
    pub spec: String,
    pub values: Vec<f64>,
}

impl From<RangeArg> for String {
    fn from(r: RangeArg) -> String {
        r.spec
    }
}

impl fmt::Display for RangeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

impl FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let spec = s.trim().to_string();
        let values = if let Some((a, b)) = spec.split_once("..") {
            let lo: i64 = a.trim().parse().map_err(|_| format!("'{a}' is not an integer"))?;
            let hi: i64 = b.trim().parse().map_err(|_| format!("'{b}' is not an integer"))?;
            if hi < lo {
                return Err(format!("empty range {spec}"));
            }
            if (hi - lo) as u64 >= MAX_RANGE_LEN as u64 {
                return Err(format!("range {spec} is too long"));
            }
            (lo..=hi).map(|k| k as f64).collect()
        } else if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("range '{spec}' must be start:stop:step"));
            }
            let (start, stop, step) = (parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?);
            if !(step > 0.0) {
                return Err(format!("range step must be positive, got {step}"));
            }
            if stop < start {
                return Err(format!("range stop {stop} is below start {start}"));
            }
            let n = ((stop - start) / step + 0.5).floor();
            if n >= MAX_RANGE_LEN as f64 {
                return Err(format!("range {spec} is too long"));
            }
            (0..=n as usize).map(|i| start + i as f64 * step).collect()
        } else {
            spec.split(',').map(parse_f64).collect::<std::result::Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err("empty value list".into());
        }
        Ok(RangeArg { spec, values })
    }
}

impl RangeArg {
    /// Values as non-negative integers.
    pub fn as_indices(&self) -> std::result::Result<Vec<u32>, String> {
        self.values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as u32)
                } else {
                    Err(format!("'{}' must list non-negative integers", self.spec))
                }
            })
            .collect()
    }
}

/// Parse `key = value` lines. Blank lines and lines starting with `#` are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("config line {}: expected key=value, got '{line}'", no + 1))?;
        let key = k.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            bail!("config line {}: invalid key '{key}'", no + 1);
        }
        out.push((key.replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Splice config entries into argv right after the subcommand, so that flags
/// given on the command line (which come later) take precedence.
pub fn merge_config_args(args: Vec<OsString>, subcommands: &[String]) -> Result<Vec<OsString>> {
    let mut config_path: Option<OsString> = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config_path = Some(it.next().context("--config needs a file path")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config_path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config_path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("cannot read config file {}", Path::new(&path).display()))?;
    let entries = parse_config(&text)?;
    let pos = rest
        .iter()
        .position(|a| subcommands.iter().any(|s| a.to_string_lossy() == s.as_str()))
        .context("a config file needs a subcommand")?;
    let injected: Vec<OsString> = entries.into_iter().map(|(k, v)| format!("--{k}={v}").into()).collect();
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_range_includes_stop_within_half_step() {
        let r: RangeArg = "0.35:0.45:0.05".parse().unwrap();
        assert_eq!(r.values.len(), 3);
        assert!((r.values[2] - 0.45).abs() < 1e-12);
        let r: RangeArg = "0:1:0.3".parse().unwrap();
        assert_eq!(r.values.len(), 4);
    }

    #[test]
    fn integer_and_list_forms() {
        let r: RangeArg = "0..3".parse().unwrap();
        assert_eq!(r.as_indices().unwrap(), vec![0, 1, 2, 3]);
        let r: RangeArg = "0.4,0.55,1".parse().unwrap();
        assert_eq!(r.values, vec![0.4, 0.55, 1.0]);
        assert!("1:0:0.1".parse::<RangeArg>().is_err());
        assert!("0:1:0".parse::<RangeArg>().is_err());
        assert!("x".parse::<RangeArg>().is_err());
    }

    #[test]
    fn config_lines_are_spliced_before_flags() {
        let args: Vec<OsString> = ["dfhn", "--config", "c.txt"].iter().map(OsString::from).collect();
        assert!(merge_config_args(args, &["simulate".into()]).is_err());
        let parsed = parse_config("# c\nJ = 3\n\nt_end=5\n").unwrap();
        assert_eq!(parsed, vec![("J".into(), "3".into()), ("t-end".into(), "5".into())]);
        assert!(parse_config("novalue").is_err());
    }
}
