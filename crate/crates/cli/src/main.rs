//! `plap`: torsion, eigenpairs, thresholds, fixed-point solves and large-`p`
//! sweeps from the command line.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use plap_core::kv::{self, KvMap};

use crate::commands::{Failure, EXIT_CONFIG};
use crate::config::{RunConfig, OUT_DIR_ENV};
use crate::output::Output;

#[derive(Parser, Debug)]
#[command(name = "plap", version, about = "p-Laplacian numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Torsion function φ_p and its sup and gradient bounds
    Torsion,
    /// Principal eigenpair (λ_p, e_p)
    Eigen,
    /// One fixed-point solve at the configured p
    Solve,
    /// Which existence regions contain the parameters
    Region,
    /// M_p, m_p, m_∞ and the nonexistence bound
    Thresholds,
    /// Monotone iteration without a box (needs beta = 0)
    Nonexist,
    /// Large-p sweep and limit checks
    Sweep,
    /// Built-in oracle checks
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Torsion => "torsion",
            Command::Eigen => "eigen",
            Command::Solve => "solve",
            Command::Region => "region",
            Command::Thresholds => "thresholds",
            Command::Nonexist => "nonexist",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
        }
    }
}

/// Flags override the config file; `--set key=value` sits between the two.
#[derive(clap::Args, Debug, Default)]
struct Flags {
    /// Config file of `section.key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Any config key, e.g. `--set solver.newton_tol=1e-10`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides PLAP_OUT_DIR and output.dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated output formats: csv, json
    #[arg(long, global = true)]
    formats: Option<String>,

    /// interval, ball or rectangle
    #[arg(long, global = true)]
    shape: Option<String>,
    #[arg(long = "R", global = true, allow_hyphen_values = true)]
    radius: Option<String>,
    #[arg(long = "N", global = true)]
    dim: Option<String>,
    /// Comma-separated center of the ball
    #[arg(long, global = true, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long = "x-lo", global = true, allow_hyphen_values = true)]
    x_lo: Option<String>,
    #[arg(long = "x-hi", global = true, allow_hyphen_values = true)]
    x_hi: Option<String>,
    #[arg(long = "y-lo", global = true, allow_hyphen_values = true)]
    y_lo: Option<String>,
    #[arg(long = "y-hi", global = true, allow_hyphen_values = true)]
    y_hi: Option<String>,
    /// Nodes per axis (radial nodes for balls)
    #[arg(long, global = true)]
    resolution: Option<String>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    p: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    m: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    q: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    l: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    s: Option<String>,
    /// m as a fraction of m_p (solve) or the sweep's fraction
    #[arg(long = "m-fraction", global = true, allow_hyphen_values = true)]
    m_fraction: Option<String>,

    /// Comma-separated p values of the sweep
    #[arg(long = "p-grid", global = true)]
    p_grid: Option<String>,
    /// Gradient constant c, or `auto`
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// lower or upper
    #[arg(long = "kp-endpoint", global = true)]
    kp_endpoint: Option<String>,
    /// Level M for `region`
    #[arg(long = "M", global = true, allow_hyphen_values = true)]
    level: Option<String>,
    #[arg(long = "newton-tol", global = true, allow_hyphen_values = true)]
    newton_tol: Option<String>,
}

fn build_map(cmd: Command, flags: &Flags, env_out: Option<String>) -> plap_core::Result<KvMap> {
    let mut map = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                plap_core::Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            kv::parse(&text)?
        }
        None => KvMap::new(),
    };
    if let Some(dir) = env_out {
        map.insert("output.dir".into(), dir);
    }
    for pair in &flags.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| plap_core::Error::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        map.insert(k.trim().into(), v.trim().into());
    }
    let m_fraction_key = if cmd == Command::Sweep { "sweep.m_fraction" } else { "problem.m_fraction" };
    let named = [
        ("domain.shape", &flags.shape),
        ("domain.R", &flags.radius),
        ("domain.N", &flags.dim),
        ("domain.center", &flags.center),
        ("domain.x_lo", &flags.x_lo),
        ("domain.x_hi", &flags.x_hi),
        ("domain.y_lo", &flags.y_lo),
        ("domain.y_hi", &flags.y_hi),
        ("domain.resolution", &flags.resolution),
        ("problem.p", &flags.p),
        ("problem.lambda", &flags.lambda),
        ("problem.beta", &flags.beta),
        ("problem.m", &flags.m),
        ("problem.q", &flags.q),
        ("problem.a", &flags.a),
        ("problem.b", &flags.b),
        ("problem.l", &flags.l),
        ("problem.alpha", &flags.alpha),
        ("problem.s", &flags.s),
        (m_fraction_key, &flags.m_fraction),
        ("sweep.p_grid", &flags.p_grid),
        ("thresholds.c", &flags.c),
        ("thresholds.gamma", &flags.gamma),
        ("thresholds.kp_endpoint", &flags.kp_endpoint),
        ("region.M", &flags.level),
        ("solver.newton_tol", &flags.newton_tol),
        ("output.formats", &flags.formats),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            map.insert(k.into(), v.trim().into());
        }
    }
    if let Some(dir) = &flags.out {
        map.insert("output.dir".into(), dir.display().to_string());
    }
    Ok(map)
}

fn run(cmd: Command, cfg: &RunConfig, out: &mut Output) -> Result<commands::Outcome, Failure> {
    match cmd {
        Command::Torsion => commands::torsion(cfg, out),
        Command::Eigen => commands::eigen(cfg, out),
        Command::Solve => commands::solve(cfg, out),
        Command::Region => commands::region(cfg, out),
        Command::Thresholds => commands::thresholds_cmd(cfg, out),
        Command::Nonexist => commands::nonexist(cfg, out),
        Command::Sweep => commands::sweep(cfg, out),
        Command::Selftest => commands::selftest_cmd(cfg, out),
    }
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let cmd = cli.command;
    let cfg = match build_map(cmd, &cli.flags, std::env::var(OUT_DIR_ENV).ok()).and_then(|m| RunConfig::from_kv(&m)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("plap: {e}");
            return exit(EXIT_CONFIG);
        }
    };
    let mut out = match Output::new(&cfg.output, cmd.name()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("plap: cannot create {}: {e}", cfg.output.dir.display());
            return exit(EXIT_CONFIG);
        }
    };
    let (verdict, code) = match run(cmd, &cfg, &mut out) {
        Ok(o) => {
            println!("{}: {}", cmd.name(), o.verdict);
            for line in &o.lines {
                println!("  {line}");
            }
            (o.verdict, o.exit)
        }
        Err(f) => {
            eprintln!("plap {}: {f}", cmd.name());
            (format!("error: {f}"), f.exit_code())
        }
    };
    let run = json!({
        "config": cfg.render(),
        "verdict": verdict,
        "exit_code": code,
        "outputs": out.written(),
    });
    if let Err(e) = out.manifest(run) {
        eprintln!("plap: cannot write manifest in {}: {e}", out.dir().display());
        return exit(EXIT_CONFIG);
    }
    exit(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> (Command, KvMap) {
        let cli = Cli::try_parse_from(args).unwrap();
        let map = build_map(cli.command, &cli.flags, None).unwrap();
        (cli.command, map)
    }

    #[test]
    fn flags_land_in_their_sections() {
        let (cmd, map) = parse(&["plap", "torsion", "--shape", "ball", "--R", "2", "--N", "3", "--p", "4"]);
        assert_eq!(cmd, Command::Torsion);
        assert_eq!(map["domain.shape"], "ball");
        assert_eq!(map["domain.R"], "2");
        assert_eq!(map["domain.N"], "3");
        assert_eq!(map["problem.p"], "4");
    }

    #[test]
    fn m_fraction_depends_on_the_command() {
        let (_, map) = parse(&["plap", "sweep", "--m-fraction", "0.3"]);
        assert_eq!(map["sweep.m_fraction"], "0.3");
        let (_, map) = parse(&["plap", "solve", "--m-fraction", "0.3"]);
        assert_eq!(map["problem.m_fraction"], "0.3");
    }

    #[test]
    fn flags_beat_set_and_env_and_out_beats_all() {
        let cli = Cli::try_parse_from([
            "plap", "eigen", "--set", "problem.p=3", "--p", "5", "--set", "output.dir=x", "--out", "y",
        ])
        .unwrap();
        let map = build_map(cli.command, &cli.flags, Some("env".into())).unwrap();
        assert_eq!(map["problem.p"], "5");
        assert_eq!(map["output.dir"], "y");
        let cli = Cli::try_parse_from(["plap", "eigen"]).unwrap();
        let map = build_map(cli.command, &cli.flags, Some("env".into())).unwrap();
        assert_eq!(map["output.dir"], "env");
    }

    #[test]
    fn negative_numbers_are_values() {
        let (_, map) = parse(&["plap", "torsion", "--shape", "interval", "--x-lo", "-1"]);
        assert_eq!(map["domain.x_lo"], "-1");
    }

    #[test]
    fn bad_set_is_a_config_error() {
        let cli = Cli::try_parse_from(["plap", "eigen", "--set", "nonsense"]).unwrap();
        assert!(build_map(cli.command, &cli.flags, None).is_err());
    }
}
