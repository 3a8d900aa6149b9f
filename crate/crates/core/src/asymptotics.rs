//! Large-`p` sweep: for each `p` on a grid, the domain constants, the
//! thresholds `M_p`, `m_p` and the solution `u_p` at `m = m_fraction ·
//! min(m_p, m_∞)`, compared against their `p → ∞` limits.
//!
//! Quantities that depend on `k_p` are reported as intervals spanning the two
//! endpoints of the `k_p` bracket.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{ConstantsCache, ThresholdsConfig, DEFAULT_P_GRID};
use crate::error::{invalid, Error, Result};
use crate::fixed_point::{self, FixedPointConfig, Verdict};
use crate::geometry::Field;
use crate::kv::{self, KvMap};
use crate::thresholds::{self, GradientEstimateConstants, Interval, KpEndpoint, ProblemParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub p_grid: Vec<f64>,
    pub m_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_grid: DEFAULT_P_GRID.to_vec(),
            m_fraction: 0.5,
        }
    }
}

impl SweepConfig {
    /// Checks the grid against the problem exponents (`p` ranges over the
    /// grid, the `p` field of `params` is ignored).
    pub fn validate(&self, params: &ProblemParams) -> Result<()> {
        if !(self.m_fraction > 0.0 && self.m_fraction < 1.0) {
            return invalid(format!("m_fraction must lie in (0, 1), got {}", self.m_fraction));
        }
        if self.p_grid.is_empty() {
            return invalid("p_grid is empty");
        }
        if self.p_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("p_grid must be strictly increasing");
        }
        let floor = params.q.max(params.a + params.b).max(params.l).max(2.0);
        if !(self.p_grid[0] > floor) {
            return invalid(format!(
                "every p must exceed max(q, a + b, l, 2) = {floor}, got {}",
                self.p_grid[0]
            ));
        }
        Ok(())
    }

    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<SweepConfig> {
        let d = SweepConfig::default();
        Ok(SweepConfig {
            p_grid: kv::get_f64_list(map, &format!("{prefix}p_grid"))?.unwrap_or(d.p_grid),
            m_fraction: kv::get_f64(map, &format!("{prefix}m_fraction"))?.unwrap_or(d.m_fraction),
        })
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        m.insert(format!("{prefix}p_grid"), kv::fmt_f64_list(&self.p_grid));
        m.insert(format!("{prefix}m_fraction"), kv::fmt_f64(self.m_fraction));
        m
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub torsion_sup: f64,
    /// `‖φ_p - d‖_∞`
    pub torsion_err: f64,
    pub lambda_p: f64,
    /// `λ_p^{1/p} ‖d‖_∞`
    pub eig_limit_check: f64,
    pub kp_lower: f64,
    pub kp_upper: f64,
    pub mp: Option<Interval>,
    pub m_p: Option<Interval>,
    /// `(‖φ_p‖_∞ / M_p)^p`
    pub ratio: Option<Interval>,
    pub m_inf: f64,
    /// The `m` actually solved for.
    pub m: Option<f64>,
    /// `M_p` at the configured endpoint, the level of the box.
    pub m_level: Option<f64>,
    /// `‖u_p - d‖_∞`
    pub u_err: Option<f64>,
    /// `‖(M_p/‖φ_p‖_∞) φ_p - d‖_∞`
    pub super_err: Option<f64>,
    /// `‖u_p - (M_p/‖φ_p‖_∞) φ_p‖_∞`
    pub u_super_gap: Option<f64>,
    /// `‖d‖ e_p - slack ≤ u_p ≤ (M_p/‖φ_p‖) φ_p + slack` with `slack = 0.05 ‖d‖`.
    pub sandwich_ok: Option<bool>,
    pub outer_iterations: Option<usize>,
    pub verdict: String,
    #[serde(skip)]
    pub solution: Option<Field>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub params: ProblemParams,
    pub config: SweepConfig,
    pub gradient_constants: GradientEstimateConstants,
    pub kp_endpoint: KpEndpoint,
    pub d_sup: f64,
    pub rows: Vec<SweepRow>,
}

const SANDWICH_SLACK: f64 = 0.05;

fn ratio_at(torsion_sup: f64, m_level: f64, p: f64) -> f64 {
    (p * (torsion_sup / m_level).ln()).exp()
}

fn run_row(
    cache: &ConstantsCache,
    params: &ProblemParams,
    cfg: &SweepConfig,
    ge: &GradientEstimateConstants,
    endpoint: KpEndpoint,
    fp: &FixedPointConfig,
    p: f64,
) -> Result<SweepRow> {
    let a = cache.get(p)?;
    let params = params.with_p(p);
    let dc = a.constants(params.b, ge)?;
    let d_sup = a.d_sup;
    let m_inf = thresholds::m_inf(d_sup, params.lambda, params.beta, params.q, params.a, params.l, params.alpha, params.s);
    let mut row = SweepRow {
        p,
        torsion_sup: a.torsion_sup,
        torsion_err: a.torsion.field.sup_diff(&a.distance)?,
        lambda_p: a.lambda_p(),
        eig_limit_check: a.lambda_p().powf(1.0 / p) * d_sup,
        kp_lower: dc.kp_lower,
        kp_upper: dc.kp_upper,
        mp: None,
        m_p: None,
        ratio: None,
        m_inf,
        m: None,
        m_level: None,
        u_err: None,
        super_err: None,
        u_super_gap: None,
        sandwich_ok: None,
        outer_iterations: None,
        verdict: String::new(),
        solution: None,
    };
    let roots = (
        thresholds::mp_corollary_up(&params, &dc, KpEndpoint::Lower),
        thresholds::mp_corollary_up(&params, &dc, KpEndpoint::Upper),
    );
    let (lo, hi) = match roots {
        (Ok(lo), Ok(hi)) => (lo.value, hi.value),
        (Err(e), _) | (_, Err(e)) => {
            row.verdict = format!("error: {e}");
            return Ok(row);
        }
    };
    let mp = Interval::hull(lo, hi);
    let m_p = thresholds::mp_range(&params, mp, dc.a_p)?;
    row.mp = Some(mp);
    row.m_p = Some(m_p);
    row.ratio = Some(Interval::hull(ratio_at(a.torsion_sup, lo, p), ratio_at(a.torsion_sup, hi, p)));

    let m_level = match endpoint {
        KpEndpoint::Lower => lo,
        KpEndpoint::Upper => hi,
    };
    let m = cfg.m_fraction * m_p.lo.min(m_inf);
    row.m = Some(m);
    row.m_level = Some(m_level);
    let params = params.with_m(m);
    let report = match fixed_point::solve_problem_p(&a, &params, m_level, &dc, endpoint, cache.solver_config(), fp) {
        Ok(r) => r,
        Err(e) => {
            row.verdict = format!("error: {e}");
            return Ok(row);
        }
    };
    row.outer_iterations = Some(report.outer_iterations);
    row.verdict = report.verdict.as_str().to_string();
    if report.verdict != Verdict::Converged {
        return Ok(row);
    }
    let u = report.solution.expect("converged runs carry the solution");
    let sup = a.torsion.field.scaled(m_level / a.torsion_sup)?;
    let slack = SANDWICH_SLACK * d_sup;
    let e = &a.eigen.e_p;
    let sandwich = u
        .values()
        .iter()
        .zip(e.values())
        .zip(sup.values())
        .all(|((x, ev), s)| d_sup * ev - slack <= *x && *x <= s + slack);
    row.u_err = Some(u.sup_diff(&a.distance)?);
    row.super_err = Some(sup.sup_diff(&a.distance)?);
    row.u_super_gap = Some(u.sup_diff(&sup)?);
    row.sandwich_ok = Some(sandwich);
    row.solution = Some(u);
    Ok(row)
}

/// Runs every row of the sweep. When `c` is not configured it is calibrated
/// over the grid first, so that all rows share one gradient constant. Rows run
/// in parallel and come back sorted by `p`; a failing row records its error in
/// `verdict` and the sweep goes on.
pub fn run_sweep(
    cache: &ConstantsCache,
    params: &ProblemParams,
    cfg: &SweepConfig,
    tc: &ThresholdsConfig,
    fp: &FixedPointConfig,
) -> Result<Sweep> {
    cfg.validate(params)?;
    fp.validate()?;
    let ge = cache.gradient_constants(tc, &cfg.p_grid, &[])?;
    let mut rows: Vec<SweepRow> = cfg
        .p_grid
        .par_iter()
        .map(|&p| {
            run_row(cache, params, cfg, &ge, tc.kp_endpoint, fp, p).or_else(|e| match e {
                Error::InvalidArgument(_) | Error::Config(_) => Err(e),
                other => Ok(failed_row(p, other)),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|x, y| x.p.total_cmp(&y.p));
    let d_sup = crate::geometry::distance_function(cache.domain()).sup_norm();
    Ok(Sweep {
        params: params.clone(),
        config: cfg.clone(),
        gradient_constants: ge,
        kp_endpoint: tc.kp_endpoint,
        d_sup,
        rows,
    })
}

fn failed_row(p: f64, e: Error) -> SweepRow {
    SweepRow {
        p,
        torsion_sup: f64::NAN,
        torsion_err: f64::NAN,
        lambda_p: f64::NAN,
        eig_limit_check: f64::NAN,
        kp_lower: f64::NAN,
        kp_upper: f64::NAN,
        mp: None,
        m_p: None,
        ratio: None,
        m_inf: f64::NAN,
        m: None,
        m_level: None,
        u_err: None,
        super_err: None,
        u_super_gap: None,
        sandwich_ok: None,
        outer_iterations: None,
        verdict: format!("error: {e}"),
        solution: None,
    }
}

const CSV_HEADER: &str = "p,torsion_sup,torsion_err,lambda_p,eig_limit_check,kp_lower,kp_upper,\
mp_lo,mp_hi,m_p_lo,m_p_hi,ratio_lo,ratio_hi,m_inf,m,m_level,u_err,super_err,u_super_gap,\
sandwich_ok,outer_iterations,verdict";

/// One line per row; missing values are empty cells.
pub fn sweep_csv(sweep: &Sweep) -> String {
    let f = |x: f64| kv::fmt_f64(x);
    let o = |x: Option<f64>| x.map(kv::fmt_f64).unwrap_or_default();
    let iv = |x: Option<Interval>| match x {
        Some(i) => format!("{},{}", f(i.lo), f(i.hi)),
        None => ",".to_string(),
    };
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &sweep.rows {
        let cells = [
            f(r.p),
            f(r.torsion_sup),
            f(r.torsion_err),
            f(r.lambda_p),
            f(r.eig_limit_check),
            f(r.kp_lower),
            f(r.kp_upper),
            iv(r.mp),
            iv(r.m_p),
            iv(r.ratio),
            f(r.m_inf),
            o(r.m),
            o(r.m_level),
            o(r.u_err),
            o(r.super_err),
            o(r.u_super_gap),
            r.sandwich_ok.map(|b| b.to_string()).unwrap_or_default(),
            r.outer_iterations.map(|n| n.to_string()).unwrap_or_default(),
            // verdicts may carry error text
            format!("\"{}\"", r.verdict.replace('"', "'")),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTolerances {
    /// `|M_p - ‖d‖_∞|` at both `k_p` endpoints.
    pub mp_abs: f64,
    /// Slack around the ratio interval when testing for the limit.
    pub ratio_abs: f64,
    /// `|m_p - m_∞| / m_∞` at both ends of the `m_p` interval.
    pub m_p_rel: f64,
    pub kp_range: [f64; 2],
    pub eig_range: [f64; 2],
    /// `‖u_p - d‖_∞ ≤ u_err_rel · ‖d‖_∞` at this `p`.
    pub u_err_rel: f64,
    pub u_err_at_p: f64,
    /// Errors must strictly decrease on rows with `p` up to this.
    pub monotone_up_to: f64,
}

impl Default for LimitTolerances {
    fn default() -> Self {
        LimitTolerances {
            mp_abs: 0.1,
            ratio_abs: 0.1,
            m_p_rel: 0.15,
            kp_range: [0.9, 1.3],
            eig_range: [0.9, 1.1],
            u_err_rel: 0.1,
            u_err_at_p: 64.0,
            monotone_up_to: 64.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitCheck {
    pub name: String,
    pub p: f64,
    pub value: String,
    pub target: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitsReport {
    pub checks: Vec<LimitCheck>,
    pub all_pass: bool,
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Compares the sweep against the `p → ∞` limits. The scalar limits are taken
/// at the largest `p`; the convergence of `u_p` and `φ_p` to `d` is checked as
/// strict decrease up to `monotone_up_to` plus a final size bound.
pub fn check_limits(sweep: &Sweep, tol: &LimitTolerances) -> Result<LimitsReport> {
    let params = &sweep.params;
    let d = sweep.d_sup;
    let (m_target, ratio_target) = thresholds::limit_predictions(params.lambda, params.beta, params.q, params.a, d)?;
    let last = match sweep.rows.last() {
        Some(r) => r,
        None => return invalid("empty sweep"),
    };
    let p = last.p;
    let mut checks = Vec::new();
    let mut push = |name: &str, p: f64, value: String, target: String, pass: bool| {
        checks.push(LimitCheck {
            name: name.into(),
            p,
            value,
            target,
            pass,
        })
    };
    let sig = kv::fmt_sig;
    let show = |i: Option<Interval>| i.map_or("n/a".into(), |i| format!("[{}, {}]", sig(i.lo), sig(i.hi)));
    let list = |xs: &[f64]| format!("[{}]", xs.iter().map(|&x| sig(x)).collect::<Vec<_>>().join(", "));

    let mp_ok = last
        .mp
        .is_some_and(|i| (i.lo - m_target).abs() <= tol.mp_abs && (i.hi - m_target).abs() <= tol.mp_abs);
    push("M_p", p, show(last.mp), format!("{} ± {}", sig(m_target), tol.mp_abs), mp_ok);

    let ratio_ok = last.ratio.is_some_and(|i| i.contains(ratio_target, tol.ratio_abs));
    push("ratio", p, show(last.ratio), format!("contains {} ± {}", sig(ratio_target), tol.ratio_abs), ratio_ok);

    let m_inf = last.m_inf;
    let m_p_ok = last.m_p.is_some_and(|i| {
        (i.lo - m_inf).abs() <= tol.m_p_rel * m_inf && (i.hi - m_inf).abs() <= tol.m_p_rel * m_inf
    });
    push("m_p", p, show(last.m_p), format!("{} ± {}%", sig(m_inf), 100.0 * tol.m_p_rel), m_p_ok);

    let [klo, khi] = tol.kp_range;
    let kp_ok = (klo..=khi).contains(&last.kp_lower) && (klo..=khi).contains(&last.kp_upper);
    push(
        "k_p",
        p,
        format!("[{}, {}]", sig(last.kp_lower), sig(last.kp_upper)),
        format!("within [{klo}, {khi}]"),
        kp_ok,
    );

    let [elo, ehi] = tol.eig_range;
    push(
        "lambda_p^(1/p) d",
        p,
        sig(last.eig_limit_check),
        format!("within [{elo}, {ehi}]"),
        (elo..=ehi).contains(&last.eig_limit_check),
    );

    let early: Vec<&SweepRow> = sweep.rows.iter().filter(|r| r.p <= tol.monotone_up_to).collect();
    let torsion_errs: Vec<f64> = early.iter().map(|r| r.torsion_err).collect();
    push(
        "torsion_err decreasing",
        tol.monotone_up_to,
        list(&torsion_errs),
        "strictly decreasing".into(),
        strictly_decreasing(&torsion_errs),
    );
    let u_errs: Option<Vec<f64>> = early.iter().map(|r| r.u_err).collect();
    push(
        "u_err decreasing",
        tol.monotone_up_to,
        u_errs.as_deref().map_or("n/a".into(), list),
        "strictly decreasing".into(),
        u_errs.as_deref().is_some_and(strictly_decreasing),
    );
    let at = sweep.rows.iter().find(|r| r.p == tol.u_err_at_p);
    let u_err = at.and_then(|r| r.u_err);
    push(
        "u_err size",
        tol.u_err_at_p,
        u_err.map_or("n/a".into(), sig),
        format!("<= {}", sig(tol.u_err_rel * d)),
        u_err.is_some_and(|x| x <= tol.u_err_rel * d),
    );
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(LimitsReport { checks, all_pass })
}
