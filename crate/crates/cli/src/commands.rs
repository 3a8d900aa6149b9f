//! The subcommands. Each one writes its files through [`Output`] and returns
//! a verdict, an exit code and a few human-readable lines.

use std::sync::Arc;

use serde_json::{json, Value};

use plap_core::analysis::{ConstantsCache, DomainAnalysis};
use plap_core::asymptotics::{self, LimitTolerances};
use plap_core::fixed_point::{self, Verdict};
use plap_core::geometry::{Domain, Shape};
use plap_core::thresholds::{self, DomainConstants};
use plap_core::{plap, selftest, spectral, Error};

use crate::config::RunConfig;
use crate::output::{fmt_sig, Output};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => EXIT_CONFIG,
            Failure::Core(e) => match e {
                Error::InvalidArgument(_)
                | Error::Config(_)
                | Error::NoBracket { .. }
                | Error::DomainMismatch => EXIT_CONFIG,
                Error::NotConverged(_) => EXIT_NOT_CONVERGED,
                Error::NonFinite { .. }
                | Error::BoxOrdering { .. }
                | Error::AboveSupersolution { .. }
                | Error::OutsideBox(_)
                | Error::MonotonicityLoss { .. }
                | Error::Invariant(_) => EXIT_INVARIANT,
            },
        }
    }
}

pub struct Outcome {
    pub verdict: String,
    pub exit: i32,
    pub lines: Vec<String>,
}

type Run = Result<Outcome, Failure>;

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn converged_exit(ok: bool) -> (String, i32) {
    if ok {
        ("converged".into(), EXIT_OK)
    } else {
        ("not-converged".into(), EXIT_NOT_CONVERGED)
    }
}

pub fn torsion(cfg: &RunConfig, out: &mut Output) -> Run {
    let dom = cfg.domain.build()?;
    let p = cfg.problem.p;
    let t = plap::torsion_function(&dom, p, &cfg.solver)?;
    let sup = t.field.sup_norm();
    let grad = t.field.grad_sup();
    let m0 = plap::torsion_max_bound(p, dom.ambient_dim(), dom.volume(), dom.unit_ball_volume());
    let mut report = json!({
        "p": p,
        "sup": sup,
        "grad_sup": grad,
        "residual": t.residual_sup,
        "iterations": t.iterations,
        "converged": t.converged,
        "symmetrization_bound": m0,
    });
    let mut lines = vec![
        format!("sup = {}", fmt_sig(sup)),
        format!("grad_sup = {}", fmt_sig(grad)),
        format!("symmetrization bound M0 = {}", fmt_sig(m0)),
    ];
    if let Shape::Ball { radius, dim, .. } = dom.shape() {
        let exact = plap::torsion_exact_ball(*dim, *radius, p, 0.0)?;
        let exact_grad = plap::torsion_grad_sup_exact_ball(*dim, *radius, p);
        report["exact_sup"] = json!(exact);
        report["exact_grad_sup"] = json!(exact_grad);
        lines.push(format!("exact sup = {}, exact grad_sup = {}", fmt_sig(exact), fmt_sig(exact_grad)));
    }
    out.field(None, &t.field.to_csv())?;
    out.report(&report)?;
    let (verdict, exit) = converged_exit(t.converged);
    lines.push(format!("residual = {}", fmt_sig(t.residual_sup)));
    Ok(Outcome { verdict, exit, lines })
}

pub fn eigen(cfg: &RunConfig, out: &mut Output) -> Run {
    let dom = cfg.domain.build()?;
    let p = cfg.problem.p;
    let eig = spectral::principal_eigenpair(&dom, p, &cfg.solver)?;
    let t = plap::torsion_function(&dom, p, &cfg.solver)?;
    let lbep = spectral::check_lbep(&eig, t.field.sup_norm(), p);
    out.field(None, &eig.e_p.to_csv())?;
    out.report(&json!({
        "p": p,
        "lambda_p": eig.lambda_p,
        "rayleigh_residual": eig.rayleigh_residual,
        "iterations": eig.iterations,
        "converged": eig.converged,
        "torsion_sup": t.field.sup_norm(),
        "lbep": lbep,
    }))?;
    let (verdict, exit) = converged_exit(eig.converged && t.converged);
    Ok(Outcome {
        verdict,
        exit,
        lines: vec![
            format!("lambda_p = {}", fmt_sig(eig.lambda_p)),
            format!("rayleigh residual = {}", fmt_sig(eig.rayleigh_residual)),
            format!("lambda_p >= 1/||phi_p||^(p-1): {lbep}"),
        ],
    })
}

/// Analysis at `p` and the domain constants with `c` calibrated over the
/// sweep grid and `p`.
fn constants_at(cfg: &RunConfig, dom: &Arc<Domain>) -> Result<(Arc<DomainAnalysis>, DomainConstants), Failure> {
    let cache = ConstantsCache::new(dom, &cfg.solver);
    let p = cfg.problem.p;
    let problem = cfg.checked_problem()?;
    let ge = cache.gradient_constants(&cfg.thresholds, &cfg.sweep.p_grid, &[p])?;
    let a = cache.get(p)?;
    let dc = a.constants(problem.b, &ge)?;
    Ok((a, dc))
}

fn constants_lines(dc: &DomainConstants) -> Vec<String> {
    vec![
        format!("c = {}, gamma = {}", fmt_sig(dc.gradient_constants.c), fmt_sig(dc.gradient_constants.gamma)),
        format!("k_p in [{}, {}]", fmt_sig(dc.kp_lower), fmt_sig(dc.kp_upper)),
        format!("lambda_p = {}", fmt_sig(dc.lambda_p)),
    ]
}

pub fn thresholds_cmd(cfg: &RunConfig, out: &mut Output) -> Run {
    let dom = cfg.domain.build()?;
    let (_, dc) = constants_at(cfg, &dom)?;
    let r = thresholds::threshold_report(&cfg.problem, &dc)?;
    out.report(&to_value(&r))?;
    let mut lines = constants_lines(&dc);
    let iv = |x: &Option<thresholds::Interval>| match x {
        Some(i) => format!("[{}, {}]", fmt_sig(i.lo), fmt_sig(i.hi)),
        None => "n/a".into(),
    };
    lines.push(format!("M_p in {}", iv(&r.mp_interval)));
    lines.push(format!("m_p in {}", iv(&r.m_p_interval)));
    lines.push(format!("m_inf = {}", fmt_sig(r.m_inf)));
    if let Some(b) = r.nonexistence_bound {
        lines.push(format!("nonexistence bound = {}", fmt_sig(b)));
    }
    lines.extend(r.notes.iter().map(|n| format!("note: {n}")));
    Ok(Outcome {
        verdict: "ok".into(),
        exit: EXIT_OK,
        lines,
    })
}

pub fn region(cfg: &RunConfig, out: &mut Output) -> Run {
    let dom = cfg.domain.build()?;
    let (_, dc) = constants_at(cfg, &dom)?;
    let r = thresholds::region_report(&cfg.problem, &dc, cfg.region_m)?;
    out.report(&to_value(&r))?;
    let mut lines = constants_lines(&dc);
    for v in &r.verdicts {
        let holds = match v.holds {
            Some(true) => "holds",
            Some(false) => "fails",
            None => "n/a",
        };
        let kp = v.kp_endpoint.map(|e| format!(" ({} k_p)", e.as_str())).unwrap_or_default();
        let note = v.note.as_ref().map(|n| format!(" [{n}]")).unwrap_or_default();
        if v.condition.is_empty() {
            lines.push(format!("{}: {holds}{note}", v.construction));
        } else {
            lines.push(format!("{}{kp}: {} -> {holds}{note}", v.construction, v.condition));
        }
    }
    Ok(Outcome {
        verdict: "ok".into(),
        exit: EXIT_OK,
        lines,
    })
}

pub fn solve(cfg: &RunConfig, out: &mut Output) -> Run {
    let dom = cfg.domain.build()?;
    let (a, dc) = constants_at(cfg, &dom)?;
    let e = cfg.thresholds.kp_endpoint;
    let m_level = thresholds::mp_corollary_up(&cfg.problem, &dc, e)?.value;
    let params = match cfg.m_fraction {
        Some(f) => {
            let mp = thresholds::compute_mp(&cfg.problem, m_level, dc.a_p)?;
            cfg.problem.with_m(f * mp)
        }
        None => cfg.problem.clone(),
    };
    let r = fixed_point::solve_problem_p(&a, &params, m_level, &dc, e, &cfg.solver, &cfg.fixed_point)?;
    if let Some(u) = &r.solution {
        out.field(None, &u.to_csv())?;
    }
    let mut report = to_value(&r);
    report["params"] = to_value(&params);
    report["gradient_constants"] = to_value(&dc.gradient_constants);
    out.report(&report)?;
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_else(|| "n/a".into());
    let mut lines = vec![
        format!("m = {}, M_p = {}", fmt_sig(params.m), fmt_sig(m_level)),
        format!("outer iterations = {}", r.outer_iterations),
        format!("fixed-point residual = {}", opt(r.fixed_point_residual)),
        format!("pde residual = {}", opt(r.pde_residual)),
        format!("I(u) = {}, I(d) = {}", opt(r.energy_u), opt(r.energy_d)),
        format!("||u||_inf = {}", opt(r.solution_sup)),
    ];
    if let Some(d) = &r.diagnosis {
        lines.push(format!("diagnosis: {d}"));
    }
    let exit = if r.verdict != Verdict::Converged {
        EXIT_NOT_CONVERGED
    } else if !r.all_ok() {
        lines.push("post-checks failed".into());
        EXIT_INVARIANT
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        verdict: r.verdict.as_str().into(),
        exit,
        lines,
    })
}

pub fn nonexist(cfg: &RunConfig, out: &mut Output) -> Run {
    let problem = cfg.checked_problem()?;
    let dom = cfg.domain.build()?;
    let eig = spectral::principal_eigenpair(&dom, problem.p, &cfg.solver)?;
    let lambda_p = eig.converged.then_some(eig.lambda_p);
    let r = fixed_point::nonexistence_probe(&dom, problem, None, lambda_p, &cfg.solver, &cfg.probe)?;
    out.report(&to_value(&r))?;
    let mut lines = vec![
        format!("iterations = {}, cap = {}", r.iterations, fmt_sig(r.cap)),
        format!("t_m = {}", fmt_sig(r.t_m)),
        r.reason.clone(),
    ];
    if let Some(b) = r.nonexistence_bound {
        lines.push(format!("nonexistence bound = {}", fmt_sig(b)));
    }
    Ok(Outcome {
        verdict: r.verdict.as_str().into(),
        exit: EXIT_OK,
        lines,
    })
}

pub fn sweep(cfg: &RunConfig, out: &mut Output) -> Run {
    let dom = cfg.domain.build()?;
    let cache = ConstantsCache::new(&dom, &cfg.solver);
    let s = asymptotics::run_sweep(&cache, &cfg.problem, &cfg.sweep, &cfg.thresholds, &cfg.fixed_point)?;
    out.table("sweep", &asymptotics::sweep_csv(&s))?;
    for r in &s.rows {
        if let Some(u) = &r.solution {
            out.field(Some(&format!("p{}", r.p)), &u.to_csv())?;
        }
    }
    let limits = asymptotics::check_limits(&s, &LimitTolerances::default())?;
    out.report(&json!({"sweep": to_value(&s), "limits": to_value(&limits)}))?;
    let mut lines: Vec<String> = s
        .rows
        .iter()
        .map(|r| {
            let err = r.u_err.map(fmt_sig).unwrap_or_else(|| "n/a".into());
            format!("p = {}: {} (||u_p - d|| = {err})", r.p, r.verdict)
        })
        .collect();
    for c in &limits.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        lines.push(format!("{tag} {} at p = {}: {} vs {}", c.name, c.p, c.value, c.target));
    }
    let all_converged = s.rows.iter().all(|r| r.verdict == Verdict::Converged.as_str());
    let (verdict, exit) = converged_exit(all_converged);
    let verdict = if all_converged && !limits.all_pass {
        "converged, limits off".to_string()
    } else {
        verdict
    };
    Ok(Outcome { verdict, exit, lines })
}

pub fn selftest_cmd(cfg: &RunConfig, out: &mut Output) -> Run {
    let r = selftest::run(&cfg.solver)?;
    out.report(&to_value(&r))?;
    let lines = r
        .checks
        .iter()
        .map(|c| {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            format!("{tag} {} ({:.2} s): {}", c.name, c.seconds, c.detail)
        })
        .collect();
    Ok(Outcome {
        verdict: if r.all_pass { "pass" } else { "fail" }.into(),
        exit: if r.all_pass { EXIT_OK } else { EXIT_INVARIANT },
        lines,
    })
}
