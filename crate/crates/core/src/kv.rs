//! Flat `key = value` configuration text.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys may
//! carry a section prefix (`domain.shape`, `solver.newton_tol`).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type KvMap = BTreeMap<String, String>;

pub fn parse(text: &str) -> Result<KvMap> {
    let mut out = KvMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {:?}", lineno + 1, raw))
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn render(map: &KvMap) -> String {
    let mut s = String::new();
    for (k, v) in map {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}

pub fn get_f64(map: &KvMap, key: &str) -> Result<Option<f64>> {
    map.get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: not a number: {v:?}")))
        })
        .transpose()
}

pub fn get_usize(map: &KvMap, key: &str) -> Result<Option<usize>> {
    map.get(key)
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("{key}: not a non-negative integer: {v:?}")))
        })
        .transpose()
}

pub fn get_f64_list(map: &KvMap, key: &str) -> Result<Option<Vec<f64>>> {
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Config(format!("{key}: not a number: {s:?}")))
                })
                .collect()
        })
        .transpose()
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `x` with 10 significant digits, for human-readable text.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let ax = x.abs();
    if ax == 0.0 || (1e-4..1e6).contains(&ax) {
        let decimals = if ax == 0.0 { 9 } else { (9 - ax.log10().floor() as i32).max(0) as usize };
        format!("{x:.decimals$}")
    } else {
        format!("{x:.9e}")
    }
}

pub fn fmt_f64_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.25), "0.2500000000");
        assert_eq!(fmt_sig(123.456), "123.4560000");
        assert_eq!(fmt_sig(-1.5e-7), "-1.500000000e-7");
        assert_eq!(fmt_sig(0.0), "0.000000000");
    }

    #[test]
    fn parses_comments_and_sections() {
        let m = parse("# header\ndomain.shape = ball # trailing\n\n solver.newton_tol=1e-10\n").unwrap();
        assert_eq!(m["domain.shape"], "ball");
        assert_eq!(get_f64(&m, "solver.newton_tol").unwrap(), Some(1e-10));
        assert_eq!(get_f64(&m, "missing").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("shape ball").is_err());
        assert!(parse("= 3").is_err());
        let m = parse("x = abc").unwrap();
        assert!(get_f64(&m, "x").is_err());
    }

    #[test]
    fn list_round_trip() {
        let xs = [4.0, 8.0, 0.1, 1.0 / 3.0];
        let mut m = KvMap::new();
        m.insert("g".into(), fmt_f64_list(&xs));
        let back = get_f64_list(&parse(&render(&m)).unwrap(), "g").unwrap().unwrap();
        assert_eq!(back, xs);
    }
}
