//! Run configuration: flat `key = value` text with section prefixes. Command
//! line flags are folded into the same map before parsing, so they override
//! the file.

use std::path::PathBuf;

use plap_core::analysis::ThresholdsConfig;
use plap_core::asymptotics::SweepConfig;
use plap_core::fixed_point::{FixedPointConfig, ProbeConfig};
use plap_core::geometry::DomainSpec;
use plap_core::kv::{self, KvMap};
use plap_core::plap::SolverConfig;
use plap_core::thresholds::ProblemParams;
use plap_core::{Error, Result};

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "PLAP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "plap-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn parse(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown output format {s:?} (expected csv or json)"))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from(DEFAULT_OUT_DIR),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub problem: ProblemParams,
    /// When set, `solve` uses `m = m_fraction · m_p` instead of `problem.m`.
    pub m_fraction: Option<f64>,
    pub solver: SolverConfig,
    pub thresholds: ThresholdsConfig,
    pub fixed_point: FixedPointConfig,
    pub sweep: SweepConfig,
    pub probe: ProbeConfig,
    /// Level `M` for the `region` command; the corollary levels are always
    /// reported.
    pub region_m: Option<f64>,
    pub output: OutputConfig,
}

const KEYS: &[(&str, &[&str])] = &[
    ("domain", &["shape", "x_lo", "x_hi", "y_lo", "y_hi", "R", "N", "center", "resolution"]),
    (
        "problem",
        &["lambda", "beta", "m", "p", "q", "a", "b", "l", "alpha", "s", "m_fraction"],
    ),
    (
        "solver",
        &["eps_reg", "eps_schedule", "newton_tol", "max_newton_iters", "p_continuation_step"],
    ),
    ("thresholds", &["c", "gamma", "kp_endpoint"]),
    (
        "fixed_point",
        &["outer_tol", "max_outer_iters", "inner_tol", "max_inner_iters", "bounds_tol", "monotone_tol"],
    ),
    ("sweep", &["p_grid", "m_fraction"]),
    ("probe", &["max_iters", "tol", "growth_streak", "cap_factor"]),
    ("region", &["M"]),
    ("output", &["dir", "formats"]),
];

fn check_keys(map: &KvMap) -> Result<()> {
    for key in map.keys() {
        let known = key
            .split_once('.')
            .and_then(|(sec, k)| KEYS.iter().find(|(s, _)| *s == sec).map(|(_, ks)| ks.contains(&k)))
            .unwrap_or(false);
        if !known {
            return Err(Error::Config(format!("unknown config key {key:?}")));
        }
    }
    Ok(())
}

fn optional_positive(map: &KvMap, key: &str) -> Result<Option<f64>> {
    let v = kv::get_f64(map, key)?;
    if let Some(x) = v {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Config(format!("{key} must be finite and > 0, got {x}")));
        }
    }
    Ok(v)
}

/// Problem parameters with only `p > 1` and finiteness enforced; the full
/// check runs in [`RunConfig::checked_problem`] for the commands that use
/// every field.
fn parse_problem(map: &KvMap) -> Result<ProblemParams> {
    let pp = ProblemParams::parse_kv(map, "problem.")?;
    let all = [pp.lambda, pp.beta, pp.m, pp.p, pp.q, pp.a, pp.b, pp.l, pp.alpha, pp.s];
    if all.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("problem parameters must be finite".into()));
    }
    if !(pp.p > 1.0) {
        return Err(Error::Config(format!("problem.p must be > 1, got {}", pp.p)));
    }
    Ok(pp)
}

impl RunConfig {
    /// The problem parameters after the full validity check.
    pub fn checked_problem(&self) -> Result<&ProblemParams> {
        self.problem.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(&self.problem)
    }

    pub fn from_kv(map: &KvMap) -> Result<RunConfig> {
        check_keys(map)?;
        let m_fraction = optional_positive(map, "problem.m_fraction")?;
        if m_fraction.is_some_and(|f| f >= 1.0) {
            return Err(Error::Config("problem.m_fraction must lie in (0, 1)".into()));
        }
        let sweep = SweepConfig::from_kv(map, "sweep.")?;
        if !(sweep.m_fraction > 0.0 && sweep.m_fraction < 1.0) {
            return Err(Error::Config("sweep.m_fraction must lie in (0, 1)".into()));
        }
        let output = OutputConfig {
            dir: map
                .get("output.dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            formats: match map.get("output.formats") {
                Some(s) => s
                    .split(',')
                    .map(|x| x.trim())
                    .filter(|x| !x.is_empty())
                    .map(Format::parse)
                    .collect::<Result<_>>()?,
                None => OutputConfig::default().formats,
            },
        };
        Ok(RunConfig {
            domain: DomainSpec::from_kv(map, "domain.")?,
            problem: parse_problem(map)?,
            m_fraction,
            solver: SolverConfig::from_kv(map, "solver.")?,
            thresholds: ThresholdsConfig::from_kv(map, "thresholds.")?,
            fixed_point: FixedPointConfig::from_kv(map, "fixed_point.")?,
            sweep,
            probe: ProbeConfig::from_kv(map, "probe.")?,
            region_m: optional_positive(map, "region.M")?,
            output,
        })
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.extend(self.domain.to_kv("domain."));
        m.extend(self.problem.to_kv("problem."));
        if let Some(f) = self.m_fraction {
            m.insert("problem.m_fraction".into(), kv::fmt_f64(f));
        }
        m.extend(self.solver.to_kv("solver."));
        m.extend(self.thresholds.to_kv("thresholds."));
        m.extend(self.fixed_point.to_kv("fixed_point."));
        m.extend(self.sweep.to_kv("sweep."));
        m.extend(self.probe.to_kv("probe."));
        if let Some(x) = self.region_m {
            m.insert("region.M".into(), kv::fmt_f64(x));
        }
        m.insert("output.dir".into(), self.output.dir.display().to_string());
        let formats: Vec<&str> = self.output.formats.iter().map(|f| f.as_str()).collect();
        m.insert("output.formats".into(), formats.join(","));
        m
    }

    pub fn render(&self) -> String {
        kv::render(&self.to_kv())
    }
}
