//! Sub/supersolution construction of a positive solution `u_p`.
//!
//! The box `F = {u̲ ≤ u ≤ ū, ‖∇u‖_∞ ≤ k M / ‖φ_p‖_∞}` is built from the
//! eigenfunction (`u̲ = (λ/λ_p)^{1/(p-q)} e_p`) and the torsion function
//! (`ū = (M/‖φ_p‖_∞) φ_p`). The operator `T` freezes the convection and
//! exponential terms at `u` and solves the remaining sublinear problem
//!
//! ```text
//! -Δ_p U = λ U^{q-1} + h(u),   h(u) = β u^{a-1} |∇u|^b + m u^{l-1} e^{α u^s},
//! ```
//!
//! by monotone iteration from `u̲`. Fixed points of `T` solve the full problem.
//! Existence of a fixed point does not imply that Picard iteration reaches
//! it, so the outer loop reports a verdict rather than failing.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::DomainAnalysis;
use crate::error::{invalid, Error, Result};
use crate::geometry::{energy_ip, Domain, EnergySpec, Field};
use crate::kv::{self, KvMap};
use crate::plap::{self, SolverConfig};
use crate::thresholds::{self, pow0, DomainConstants, KpEndpoint, ProblemParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Outer stopping tolerance, relative to `M`.
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    /// Inner stopping tolerance, relative to `M`.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// Slack of the box and bound checks, relative to `M`.
    pub bounds_tol: f64,
    /// Allowed decrease between inner iterates, relative to `M`.
    pub monotone_tol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            outer_tol: 1e-8,
            max_outer_iters: 500,
            inner_tol: 1e-11,
            max_inner_iters: 500,
            bounds_tol: 1e-6,
            monotone_tol: 1e-8,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("bounds_tol", self.bounds_tol),
            ("monotone_tol", self.monotone_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{k} must be finite and > 0"));
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return invalid("iteration limits must be >= 1");
        }
        Ok(())
    }

    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<FixedPointConfig> {
        let d = FixedPointConfig::default();
        let f = |k: &str, dv: f64| -> Result<f64> {
            Ok(kv::get_f64(map, &format!("{prefix}{k}"))?.unwrap_or(dv))
        };
        let u = |k: &str, dv: usize| -> Result<usize> {
            Ok(kv::get_usize(map, &format!("{prefix}{k}"))?.unwrap_or(dv))
        };
        let out = FixedPointConfig {
            outer_tol: f("outer_tol", d.outer_tol)?,
            max_outer_iters: u("max_outer_iters", d.max_outer_iters)?,
            inner_tol: f("inner_tol", d.inner_tol)?,
            max_inner_iters: u("max_inner_iters", d.max_inner_iters)?,
            bounds_tol: f("bounds_tol", d.bounds_tol)?,
            monotone_tol: f("monotone_tol", d.monotone_tol)?,
        };
        out.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(out)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        m.insert(format!("{prefix}outer_tol"), kv::fmt_f64(self.outer_tol));
        m.insert(format!("{prefix}max_outer_iters"), self.max_outer_iters.to_string());
        m.insert(format!("{prefix}inner_tol"), kv::fmt_f64(self.inner_tol));
        m.insert(format!("{prefix}max_inner_iters"), self.max_inner_iters.to_string());
        m.insert(format!("{prefix}bounds_tol"), kv::fmt_f64(self.bounds_tol));
        m.insert(format!("{prefix}monotone_tol"), kv::fmt_f64(self.monotone_tol));
        m
    }
}

#[derive(Clone, Debug)]
pub struct BoxF {
    pub sub: Field,
    pub sup: Field,
    pub grad_cap: f64,
    /// The level `M` of the supersolution.
    pub m_level: f64,
    pub kp_endpoint: KpEndpoint,
}

/// Builds `F` at level `M`. Requires `(λ, β, m) ∈ E(M)` at the chosen
/// endpoint and checks `u̲ ≤ ū` node-wise.
pub fn build_box(
    analysis: &DomainAnalysis,
    params: &ProblemParams,
    m_level: f64,
    dc: &DomainConstants,
    kp_endpoint: KpEndpoint,
    cfg: &FixedPointConfig,
) -> Result<BoxF> {
    if !thresholds::in_region_e(params, dc, m_level, kp_endpoint)? {
        let sum = thresholds::region_sum(params, dc, m_level, kp_endpoint)?;
        return invalid(format!(
            "(lambda, beta, m) is not in E(M) at M={m_level} (sum {sum})"
        ));
    }
    let p = params.p;
    let coef = (params.lambda / analysis.lambda_p()).powf(1.0 / (p - params.q));
    let sub = analysis.eigen.e_p.scaled(coef)?.with_label("subsolution");
    let sup = analysis
        .torsion
        .field
        .scaled(m_level / analysis.torsion_sup)?
        .with_label("supersolution");
    let tol = cfg.bounds_tol * m_level;
    for (node, (lo, hi)) in sub.values().iter().zip(sup.values()).enumerate() {
        if lo - hi > tol {
            return Err(Error::BoxOrdering {
                node,
                excess: lo - hi,
            });
        }
    }
    Ok(BoxF {
        sub,
        sup,
        grad_cap: dc.kp(kp_endpoint) * m_level / analysis.torsion_sup,
        m_level,
        kp_endpoint,
    })
}

/// `h(u) = β u^{a-1} |∇u|^b + m u^{l-1} e^{α u^s}` at every node, with
/// `0^0 = 1`. The gradient is the nodal central difference.
pub fn forcing(params: &ProblemParams, u: &Field) -> Result<Field> {
    let grads = u.gradient_magnitudes();
    let values: Vec<f64> = u
        .values()
        .iter()
        .zip(&grads)
        .map(|(&x, &g)| {
            let x = x.max(0.0);
            let conv = if params.beta == 0.0 {
                0.0
            } else {
                params.beta * pow0(x, params.a - 1.0) * pow0(g, params.b)
            };
            let expo = if params.m == 0.0 {
                0.0
            } else if x > 0.0 {
                params.m * ((params.l - 1.0) * x.ln() + params.alpha * pow0(x, params.s)).exp()
            } else {
                params.m * pow0(0.0, params.l - 1.0) * (params.alpha * pow0(0.0, params.s)).exp()
            };
            conv + expo
        })
        .collect();
    Field::new(u.domain(), values, "forcing")
}

/// Right-hand side `λ U^{q-1} + h` at every node.
fn semilinear_rhs(params: &ProblemParams, big_u: &Field, h: &Field) -> Result<Field> {
    big_u.zip_with(h, |x, hh| params.lambda * pow0(x.max(0.0), params.q - 1.0) + hh)
}

/// Everything `T` needs besides its argument.
pub struct Context<'a> {
    pub domain: &'a Arc<Domain>,
    pub params: &'a ProblemParams,
    pub bx: &'a BoxF,
    pub solver: &'a SolverConfig,
    pub cfg: &'a FixedPointConfig,
}

fn solve_checked(ctx: &Context, g: &Field, guess: Option<&Field>) -> Result<Field> {
    let p = ctx.params.p;
    let sol = match guess {
        Some(u0) if u0.sup_norm() > 0.0 => plap::solve_p_poisson_from(ctx.domain, p, g, ctx.solver, u0)?,
        _ => plap::solve_p_poisson(ctx.domain, p, g, ctx.solver)?,
    };
    if !sol.converged {
        return Err(Error::NotConverged(format!(
            "p-Poisson solve at p={p} (residual {:e})",
            sol.residual_sup
        )));
    }
    Ok(sol.field)
}

fn check_below_sup(ctx: &Context, v: &Field) -> Result<()> {
    let tol = ctx.cfg.bounds_tol * ctx.bx.m_level;
    for (node, (x, hi)) in v.values().iter().zip(ctx.bx.sup.values()).enumerate() {
        if x - hi > tol {
            return Err(Error::AboveSupersolution {
                node,
                excess: x - hi,
            });
        }
    }
    Ok(())
}

/// `T(u)`: the solution of the frozen problem, obtained as the limit of the
/// nondecreasing iteration `U_{k+1} = solve(λ U_k^{q-1} + h(u))`, `U_0 = u̲`.
pub fn apply_t(ctx: &Context, u: &Field) -> Result<Field> {
    if !u.same_domain(&ctx.bx.sub) {
        return Err(Error::DomainMismatch);
    }
    let tol = ctx.cfg.bounds_tol * ctx.bx.m_level;
    let vals = u.values().iter().zip(ctx.bx.sub.values()).zip(ctx.bx.sup.values());
    for (node, ((x, lo), hi)) in vals.enumerate() {
        if x < &(lo - tol) || x > &(hi + tol) {
            return Err(Error::OutsideBox(format!("node {node}: {x} not in [{lo}, {hi}]")));
        }
    }
    let h = forcing(ctx.params, u)?;
    apply_t_frozen(ctx, &h, None)
}

fn apply_t_frozen(ctx: &Context, h: &Field, warm: Option<&Field>) -> Result<Field> {
    let params = ctx.params;
    if params.q == 1.0 {
        // λ U^0 = λ: a single solve
        let g = h.map(|x| x + params.lambda)?;
        let out = solve_checked(ctx, &g, None)?;
        check_below_sup(ctx, &out)?;
        return Ok(out);
    }
    let m_level = ctx.bx.m_level;
    let mut cur = ctx.bx.sub.clone();
    let mut guess = warm.cloned().unwrap_or_else(|| cur.clone());
    for _ in 0..ctx.cfg.max_inner_iters {
        let g = semilinear_rhs(params, &cur, h)?;
        let next = solve_checked(ctx, &g, Some(&guess))?;
        check_below_sup(ctx, &next)?;
        let mut step = 0.0f64;
        for (node, (a, b)) in cur.values().iter().zip(next.values()).enumerate() {
            let drop = a - b;
            if drop > ctx.cfg.monotone_tol * m_level {
                return Err(Error::MonotonicityLoss { node, drop });
            }
            step = step.max(drop.abs());
        }
        guess = next.clone();
        cur = next;
        if step <= ctx.cfg.inner_tol * m_level {
            return Ok(cur);
        }
    }
    Err(Error::NotConverged(format!(
        "inner iteration of T after {} steps",
        ctx.cfg.max_inner_iters
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    DivergedAboveSuper,
    MaxIters,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::DivergedAboveSuper => "diverged_above_super",
            Verdict::MaxIters => "max_iters",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsOk {
    pub lower: bool,
    pub upper: bool,
    pub gradient: bool,
}

impl BoundsOk {
    pub fn all(&self) -> bool {
        self.lower && self.upper && self.gradient
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub outer_iterations: usize,
    /// `‖u_{n+1} - u_n‖_∞` for every outer step.
    pub sup_diffs: Vec<f64>,
    pub m_level: f64,
    pub kp_endpoint: KpEndpoint,
    pub outer_tol: f64,
    pub bounds_ok: Option<BoundsOk>,
    /// Worst violations (positive means violated) of the three bounds.
    pub bounds_margin: Option<[f64; 3]>,
    pub grad_cap_upper: f64,
    pub fixed_point_residual: Option<f64>,
    pub pde_residual: Option<f64>,
    pub energy_u: Option<f64>,
    pub energy_d: Option<f64>,
    pub energy_ok: Option<bool>,
    pub solution_sup: Option<f64>,
    pub solution_grad_sup: Option<f64>,
    pub diagnosis: Option<String>,
    #[serde(skip)]
    pub solution: Option<Field>,
}

impl SolveReport {
    /// All post-checks passed on a converged run.
    pub fn all_ok(&self) -> bool {
        self.verdict == Verdict::Converged
            && self.bounds_ok.is_some_and(|b| b.all())
            && self.energy_ok == Some(true)
            && self.fixed_point_residual.is_some_and(|r| r <= 2.0 * self.outer_tol)
    }
}

/// Outer Picard iteration `u_{n+1} = T(u_n)` from `u̲`, followed by the
/// bound, residual and energy checks.
pub fn solve_problem_p(
    analysis: &DomainAnalysis,
    params: &ProblemParams,
    m_level: f64,
    dc: &DomainConstants,
    kp_endpoint: KpEndpoint,
    solver: &SolverConfig,
    cfg: &FixedPointConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let domain = analysis.torsion.field.domain().clone();
    let bx = build_box(analysis, params, m_level, dc, kp_endpoint, cfg)?;
    let ctx = Context {
        domain: &domain,
        params,
        bx: &bx,
        solver,
        cfg,
    };
    let outer_tol = cfg.outer_tol * m_level;
    let grad_cap_upper = dc.kp_upper * m_level / analysis.torsion_sup;
    let mut report = SolveReport {
        verdict: Verdict::MaxIters,
        outer_iterations: 0,
        sup_diffs: Vec::new(),
        m_level,
        kp_endpoint,
        outer_tol,
        bounds_ok: None,
        bounds_margin: None,
        grad_cap_upper,
        fixed_point_residual: None,
        pde_residual: None,
        energy_u: None,
        energy_d: None,
        energy_ok: None,
        solution_sup: None,
        solution_grad_sup: None,
        diagnosis: None,
        solution: None,
    };

    let mut u = bx.sub.clone();
    let mut converged = false;
    for _ in 0..cfg.max_outer_iters {
        let h = forcing(params, &u)?;
        let next = match apply_t_frozen(&ctx, &h, Some(&u)) {
            Ok(v) => v,
            Err(Error::AboveSupersolution { node, excess }) => {
                report.verdict = Verdict::DivergedAboveSuper;
                report.diagnosis = Some(format!(
                    "T(u) exceeds the supersolution at node {node} by {excess:e}"
                ));
                report.solution = Some(u);
                return Ok(report);
            }
            Err(e) => return Err(e),
        };
        let diff = next.sup_diff(&u)?;
        report.sup_diffs.push(diff);
        report.outer_iterations += 1;
        u = next;
        if diff <= outer_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        report.diagnosis = Some(format!(
            "no convergence after {} outer iterations (last step {:e})",
            cfg.max_outer_iters,
            report.sup_diffs.last().copied().unwrap_or(f64::NAN)
        ));
        report.solution = Some(u);
        return Ok(report);
    }
    report.verdict = Verdict::Converged;

    // bounds
    let tol = cfg.bounds_tol * m_level;
    let low = u
        .values()
        .iter()
        .zip(bx.sub.values())
        .fold(f64::NEG_INFINITY, |m, (x, lo)| m.max(lo - x));
    let high = u
        .values()
        .iter()
        .zip(bx.sup.values())
        .fold(f64::NEG_INFINITY, |m, (x, hi)| m.max(x - hi));
    let grad = u.grad_sup();
    report.bounds_margin = Some([low, high, grad - grad_cap_upper]);
    report.bounds_ok = Some(BoundsOk {
        lower: low <= tol,
        upper: high <= tol,
        gradient: grad <= grad_cap_upper + tol,
    });
    report.solution_sup = Some(u.sup_norm());
    report.solution_grad_sup = Some(grad);

    // one more application of T
    let h = forcing(params, &u)?;
    let tu = apply_t_frozen(&ctx, &h, Some(&u))?;
    report.fixed_point_residual = Some(tu.sup_diff(&u)?);
    let rhs = semilinear_rhs(params, &u, &h)?;
    report.pde_residual = Some(plap::weak_residual(&u, params.p, &rhs)?);

    // energy with the forcing frozen at u_p
    let spec = EnergySpec {
        p: params.p,
        q: params.q,
        lambda: params.lambda,
        forcing: h,
    };
    let e_u = energy_ip(&spec, &u)?;
    let e_d = energy_ip(&spec, &analysis.distance)?;
    report.energy_u = Some(e_u);
    report.energy_d = Some(e_d);
    report.energy_ok = Some(e_u <= e_d + 1e-10 * e_d.abs().max(1.0));
    report.solution = Some(u.with_label(format!("u_p p={}", params.p)));
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeVerdict {
    UnboundedGrowth,
    Stabilized,
}

impl ProbeVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeVerdict::UnboundedGrowth => "unbounded-growth",
            ProbeVerdict::Stabilized => "stabilized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub max_iters: usize,
    /// Stop as stabilized once increments fall below this, relative to `‖u‖_∞`.
    pub tol: f64,
    /// Consecutive increasing iterates above the cap that count as growth.
    pub growth_streak: usize,
    /// The cap is this multiple of `max(t_m, ‖d‖_∞)`.
    pub cap_factor: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            max_iters: 5000,
            tol: 1e-10,
            growth_streak: 50,
            cap_factor: 10.0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.growth_streak == 0 {
            return invalid("probe iteration limits must be >= 1");
        }
        if !(self.tol > 0.0) || !(self.cap_factor > 0.0) {
            return invalid("probe tol and cap_factor must be > 0");
        }
        Ok(())
    }

    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<ProbeConfig> {
        let d = ProbeConfig::default();
        let key = |k: &str| format!("{prefix}{k}");
        let out = ProbeConfig {
            max_iters: kv::get_usize(map, &key("max_iters"))?.unwrap_or(d.max_iters),
            tol: kv::get_f64(map, &key("tol"))?.unwrap_or(d.tol),
            growth_streak: kv::get_usize(map, &key("growth_streak"))?.unwrap_or(d.growth_streak),
            cap_factor: kv::get_f64(map, &key("cap_factor"))?.unwrap_or(d.cap_factor),
        };
        out.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(out)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        m.insert(format!("{prefix}max_iters"), self.max_iters.to_string());
        m.insert(format!("{prefix}tol"), kv::fmt_f64(self.tol));
        m.insert(format!("{prefix}growth_streak"), self.growth_streak.to_string());
        m.insert(format!("{prefix}cap_factor"), kv::fmt_f64(self.cap_factor));
        m
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub verdict: ProbeVerdict,
    pub iterations: usize,
    pub cap: f64,
    pub t_m: f64,
    pub nonexistence_bound: Option<f64>,
    /// `‖u_k‖_∞` along the iteration.
    pub sup_trace: Vec<f64>,
    pub reason: String,
}

/// Monotone iteration `u_{k+1} = solve(λ u_k^{q-1} + m u_k^{l-1} e^{α u_k^s} + g)`
/// from `u_0 = 0`, without any box. Growth past the cap, or overflow, is
/// reported as unbounded growth.
pub fn nonexistence_probe(
    domain: &Arc<Domain>,
    params: &ProblemParams,
    extra_forcing: Option<&Field>,
    lambda_p: Option<f64>,
    solver: &SolverConfig,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    params.validate()?;
    cfg.validate()?;
    if params.beta != 0.0 {
        return invalid("the nonexistence probe needs beta = 0");
    }
    let t_m = thresholds::t_m(params.p, params.l, params.alpha, params.s)?;
    if let Some(g) = extra_forcing {
        if !Arc::ptr_eq(g.domain(), domain) {
            return Err(Error::DomainMismatch);
        }
        if g.values().iter().any(|&x| x < 0.0) {
            return invalid("extra forcing must be >= 0");
        }
    }
    let d_sup = crate::geometry::distance_function(domain).sup_norm();
    let cap = cfg.cap_factor * t_m.max(d_sup);
    let nonexistence_bound = lambda_p
        .map(|lp| thresholds::nonexistence_bound(lp, params.p, params.l, params.alpha, params.s))
        .transpose()?;
    let mut u = Field::zeros(domain);
    let mut trace = Vec::new();
    let mut streak = 0;
    let grow = |iterations: usize, trace: Vec<f64>, reason: String| ProbeReport {
        verdict: ProbeVerdict::UnboundedGrowth,
        iterations,
        cap,
        t_m,
        nonexistence_bound,
        sup_trace: trace,
        reason,
    };
    for k in 0..cfg.max_iters {
        let rhs: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let x = x.max(0.0);
                let expo = if x > 0.0 {
                    ((params.l - 1.0) * x.ln() + params.alpha * x.powf(params.s)).exp()
                } else {
                    pow0(0.0, params.l - 1.0)
                };
                params.lambda * pow0(x, params.q - 1.0)
                    + params.m * expo
                    + extra_forcing.map_or(0.0, |g| g.values()[i])
            })
            .collect();
        if rhs.iter().any(|x| !x.is_finite()) {
            return Ok(grow(k, trace, "right-hand side overflowed".into()));
        }
        let g = Field::new(domain, rhs, "probe rhs")?;
        let sol = match plap::solve_p_poisson_from(domain, params.p, &g, solver, &u) {
            Ok(s) if u.sup_norm() > 0.0 => s,
            Ok(_) | Err(_) => plap::solve_p_poisson(domain, params.p, &g, solver)?,
        };
        if !sol.converged {
            return Err(Error::NotConverged(format!(
                "probe solve at step {k} (residual {:e})",
                sol.residual_sup
            )));
        }
        let next = sol.field;
        let sup = next.sup_norm();
        let inc = next.sup_diff(&u)?;
        let increasing = next.values().iter().zip(u.values()).all(|(b, a)| b >= a);
        trace.push(sup);
        if sup > cap && increasing {
            streak += 1;
            if streak >= cfg.growth_streak {
                return Ok(grow(
                    k + 1,
                    trace,
                    format!("{streak} consecutive increasing iterates above the cap {cap}"),
                ));
            }
        } else {
            streak = 0;
        }
        u = next;
        if inc <= cfg.tol * sup.max(1e-300) {
            return Ok(ProbeReport {
                verdict: ProbeVerdict::Stabilized,
                iterations: k + 1,
                cap,
                t_m,
                nonexistence_bound,
                sup_trace: trace,
                reason: format!("increments fell below {:e} relative", cfg.tol),
            });
        }
    }
    Ok(ProbeReport {
        verdict: ProbeVerdict::Stabilized,
        iterations: cfg.max_iters,
        cap,
        t_m,
        nonexistence_bound,
        sup_trace: trace,
        reason: "iteration limit reached below the growth criterion".into(),
    })
}
