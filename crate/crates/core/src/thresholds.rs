//! Parameter thresholds for
//!
//! ```text
//! -Δ_p u = λ u^{q-1} + β u^{a-1} |∇u|^b + m u^{l-1} e^{α u^s}  in Ω,  u = 0 on ∂Ω.
//! ```
//!
//! Everything here is scalar arithmetic on a few domain constants: `‖φ_p‖_∞`,
//! `‖∇φ_p‖_∞`, `λ_p`, `‖d‖_∞` and the gradient constant `k_p`. The last one is
//! not computable, so it is carried as an interval `[kp_lower, kp_upper]` and
//! every quantity that depends on it can be evaluated at either endpoint.
//!
//! Sums of powers and exponentials are evaluated in log space: at `p = 100`
//! terms such as `M^{p-l} e^{α M^s}` leave the range of `f64` quickly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kv::{self, KvMap};

/// `x^e` with `0^0 = 1`.
#[inline]
pub fn pow0(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub lambda: f64,
    pub beta: f64,
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub l: f64,
    pub alpha: f64,
    pub s: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            lambda: 1.0,
            beta: 1.0,
            m: 0.0,
            p: 10.0,
            q: 2.0,
            a: 2.0,
            b: 1.0,
            l: 2.0,
            alpha: 1.0,
            s: 1.0,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda, self.beta, self.m, self.p, self.q, self.a, self.b, self.l, self.alpha,
            self.s,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return invalid("problem parameters must be finite");
        }
        if self.lambda < 0.0 || self.beta < 0.0 || self.m < 0.0 {
            return invalid("lambda, beta and m must be >= 0");
        }
        if self.alpha < 0.0 || self.s < 0.0 {
            return invalid("alpha and s must be >= 0");
        }
        if self.a < 1.0 || self.l < 1.0 {
            return invalid("a and l must be >= 1");
        }
        if !(self.b > 0.0) {
            return invalid("b must be > 0");
        }
        if !(self.q >= 1.0 && self.p > self.q) {
            return invalid(format!("need p > q >= 1, got p={}, q={}", self.p, self.q));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> ProblemParams {
        ProblemParams { p, ..self.clone() }
    }

    pub fn with_m(&self, m: f64) -> ProblemParams {
        ProblemParams { m, ..self.clone() }
    }

    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<ProblemParams> {
        let out = ProblemParams::parse_kv(map, prefix)?;
        out.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(out)
    }

    /// Like [`ProblemParams::from_kv`] but without [`ProblemParams::validate`],
    /// for callers that only need some of the fields.
    pub fn parse_kv(map: &KvMap, prefix: &str) -> Result<ProblemParams> {
        let d = ProblemParams::default();
        let get = |k: &str, dv: f64| -> Result<f64> {
            Ok(kv::get_f64(map, &format!("{prefix}{k}"))?.unwrap_or(dv))
        };
        let out = ProblemParams {
            lambda: get("lambda", d.lambda)?,
            beta: get("beta", d.beta)?,
            m: get("m", d.m)?,
            p: get("p", d.p)?,
            q: get("q", d.q)?,
            a: get("a", d.a)?,
            b: get("b", d.b)?,
            l: get("l", d.l)?,
            alpha: get("alpha", d.alpha)?,
            s: get("s", d.s)?,
        };
        Ok(out)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        for (k, v) in [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("m", self.m),
            ("p", self.p),
            ("q", self.q),
            ("a", self.a),
            ("b", self.b),
            ("l", self.l),
            ("alpha", self.alpha),
            ("s", self.s),
        ] {
            m.insert(format!("{prefix}{k}"), kv::fmt_f64(v));
        }
        m
    }
}

/// Constants `(c, γ)` of the gradient estimate `k_p^{p-1} ≤ c p^γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimateConstants {
    pub c: f64,
    pub gamma: f64,
}

pub const DEFAULT_GAMMA: f64 = 2.5;

impl GradientEstimateConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return invalid("gradient constant c must be finite and > 0");
        }
        if !(self.gamma >= DEFAULT_GAMMA) || !self.gamma.is_finite() {
            return invalid(format!("gamma must be >= {DEFAULT_GAMMA}"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KpEndpoint {
    Lower,
    Upper,
}

impl KpEndpoint {
    pub fn parse(s: &str) -> Result<KpEndpoint> {
        match s {
            "lower" => Ok(KpEndpoint::Lower),
            "upper" => Ok(KpEndpoint::Upper),
            _ => Err(Error::Config(format!("kp endpoint must be lower or upper, got {s:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KpEndpoint::Lower => "lower",
            KpEndpoint::Upper => "upper",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// The interval spanned by two values in either order.
    pub fn hull(x: f64, y: f64) -> Interval {
        Interval {
            lo: x.min(y),
            hi: x.max(y),
        }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn include(self, x: f64) -> Interval {
        Interval {
            lo: self.lo.min(x),
            hi: self.hi.max(x),
        }
    }
}

pub fn kp_lower(torsion_sup: f64, d_sup: f64, torsion_grad_sup: f64) -> f64 {
    (torsion_sup / d_sup).max(torsion_grad_sup)
}

/// `(c p^γ)^{1/(p-1)}`; the estimate behind it needs `p ≥ 2`.
pub fn kp_upper(p: f64, ge: &GradientEstimateConstants) -> Result<f64> {
    if !(p >= 2.0) {
        return invalid(format!("the gradient estimate needs p >= 2, got {p}"));
    }
    ge.validate()?;
    Ok(((ge.c.ln() + ge.gamma * p.ln()) / (p - 1.0)).exp())
}

/// Smallest `c` with `kp_upper(p) ≥ kp_lower(p)` at every given `(p, kp_lower)`.
pub fn calibrate_c(samples: &[(f64, f64)], gamma: f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for &(p, kl) in samples {
        if !(p >= 2.0) || !(kl > 0.0) {
            return invalid(format!("calibration sample (p={p}, kp_lower={kl}) out of range"));
        }
        best = best.max((p - 1.0) * kl.ln() - gamma * p.ln());
    }
    if best == f64::NEG_INFINITY {
        return invalid("calibration needs at least one sample");
    }
    Ok(best.exp())
}

/// Per-`(domain, p)` constants entering the thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConstants {
    pub p: f64,
    pub torsion_sup: f64,
    pub torsion_grad_sup: f64,
    pub lambda_p: f64,
    pub d_sup: f64,
    pub kp_lower: f64,
    pub kp_upper: f64,
    /// `‖φ_p‖^{p-1}`
    pub a_p: f64,
    /// Exponent `b` used for the two `B_p` values.
    pub b: f64,
    pub b_p_lower: f64,
    pub b_p_upper: f64,
    pub gradient_constants: GradientEstimateConstants,
}

impl DomainConstants {
    pub fn new(
        p: f64,
        torsion_sup: f64,
        torsion_grad_sup: f64,
        lambda_p: f64,
        d_sup: f64,
        b: f64,
        ge: &GradientEstimateConstants,
    ) -> Result<DomainConstants> {
        for (name, v) in [
            ("torsion_sup", torsion_sup),
            ("torsion_grad_sup", torsion_grad_sup),
            ("lambda_p", lambda_p),
            ("d_sup", d_sup),
            ("b", b),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        let lo = kp_lower(torsion_sup, d_sup, torsion_grad_sup);
        let mut hi = kp_upper(p, ge)?;
        // a calibrated c makes the two bounds touch; allow for the roundoff there
        if lo > hi * (1.0 + 1e-12) {
            return Err(Error::Invariant(format!(
                "kp_lower {lo} exceeds kp_upper {hi}: gradient constant c = {} is too small",
                ge.c
            )));
        }
        hi = hi.max(lo);
        Ok(DomainConstants {
            p,
            torsion_sup,
            torsion_grad_sup,
            lambda_p,
            d_sup,
            kp_lower: lo,
            kp_upper: hi,
            a_p: a_p(torsion_sup, p),
            b,
            b_p_lower: b_p(lo, torsion_sup, p, b),
            b_p_upper: b_p(hi, torsion_sup, p, b),
            gradient_constants: ge.clone(),
        })
    }

    pub fn kp(&self, e: KpEndpoint) -> f64 {
        match e {
            KpEndpoint::Lower => self.kp_lower,
            KpEndpoint::Upper => self.kp_upper,
        }
    }

    pub fn b_p(&self, e: KpEndpoint) -> f64 {
        match e {
            KpEndpoint::Lower => self.b_p_lower,
            KpEndpoint::Upper => self.b_p_upper,
        }
    }

    fn check_params(&self, params: &ProblemParams) -> Result<()> {
        params.validate()?;
        if params.p != self.p || params.b != self.b {
            return invalid(format!(
                "constants were computed for p={}, b={} but the problem has p={}, b={}",
                self.p, self.b, params.p, params.b
            ));
        }
        Ok(())
    }
}

pub fn a_p(torsion_sup: f64, p: f64) -> f64 {
    torsion_sup.powf(p - 1.0)
}

pub fn b_p(kp: f64, torsion_sup: f64, p: f64, b: f64) -> f64 {
    kp.powf(b) * torsion_sup.powf(p - 1.0 - b)
}

/// One summand `coef · t^power · e^{α t^s}`, kept as `ln coef`.
#[derive(Clone, Copy, Debug)]
struct Term {
    ln_coef: f64,
    power: f64,
    alpha: f64,
    s: f64,
}

impl Term {
    fn new(coef: f64, power: f64, alpha: f64, s: f64) -> Term {
        Term {
            ln_coef: coef.ln(),
            power,
            alpha,
            s,
        }
    }

    fn ln_at(&self, t: f64) -> f64 {
        if self.ln_coef == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.ln_coef + self.power * t.ln() + self.alpha * pow0(t, self.s)
    }
}

fn ln_sum(terms: &[Term], t: f64) -> f64 {
    let lns: Vec<f64> = terms.iter().map(|x| x.ln_at(t)).collect();
    let top = lns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top.is_infinite() {
        return top;
    }
    top + lns.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

fn sum_at(terms: &[Term], t: f64) -> f64 {
    ln_sum(terms, t).exp()
}

/// A root of a strictly monotone sum of terms, with its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: f64,
    /// Final bracket; the defining function minus its target changes sign on it.
    pub bracket: [f64; 2],
    /// `f(value)/target - 1`
    pub residual: f64,
    pub closed_form: bool,
}

const BRACKET_LO: f64 = 1e-8;
const BRACKET_CAP: f64 = 1e8;

/// Solves `Σ terms(t) = target` for a strictly monotone sum. The bracket starts
/// at `[1e-8, 1]` and its upper end doubles until the sign changes.
fn solve_monotone(terms: &[Term], target: f64, increasing: bool) -> Result<Root> {
    let goal = target.ln();
    // g > 0 on the left of the root, < 0 on the right
    let g = |t: f64| {
        let d = ln_sum(terms, t) - goal;
        if increasing {
            -d
        } else {
            d
        }
    };
    let lo0 = BRACKET_LO;
    let mut hi = 1.0;
    if !(g(lo0) > 0.0) {
        return Err(Error::NoBracket { lo: lo0, hi });
    }
    while !(g(hi) < 0.0) {
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Err(Error::NoBracket { lo: lo0, hi: BRACKET_CAP });
        }
    }
    let mut lo = lo0;
    for _ in 0..400 {
        // geometric steps while the bracket spans decades
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever end is closer to the target
    let value = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Ok(Root {
        value,
        bracket: [lo, hi],
        residual: sum_at(terms, value) / target - 1.0,
        closed_form: false,
    })
}

fn closed(value: f64, terms: &[Term], target: f64) -> Root {
    Root {
        value,
        bracket: [value, value],
        residual: sum_at(terms, value) / target - 1.0,
        closed_form: true,
    }
}

/// The three summands of the region `E(M)`.
pub fn region_terms(
    params: &ProblemParams,
    dc: &DomainConstants,
    m_level: f64,
    e: KpEndpoint,
) -> Result<[f64; 3]> {
    dc.check_params(params)?;
    if !(m_level > 0.0) || !m_level.is_finite() {
        return invalid(format!("M must be finite and > 0, got {m_level}"));
    }
    let p = params.p;
    let t = [
        Term::new(params.lambda * dc.a_p, params.q - p, 0.0, 0.0),
        Term::new(params.beta * dc.b_p(e), params.a + params.b - p, 0.0, 0.0),
        Term::new(params.m * dc.a_p, params.l - p, params.alpha, params.s),
    ];
    Ok(t.map(|x| x.ln_at(m_level).exp()))
}

/// Left side of the inequality defining `E(M)`.
pub fn region_sum(params: &ProblemParams, dc: &DomainConstants, m_level: f64, e: KpEndpoint) -> Result<f64> {
    Ok(region_terms(params, dc, m_level, e)?.iter().sum())
}

pub fn in_region_e(params: &ProblemParams, dc: &DomainConstants, m_level: f64, e: KpEndpoint) -> Result<bool> {
    Ok(region_sum(params, dc, m_level, e)? <= 1.0)
}

fn up_terms(params: &ProblemParams, dc: &DomainConstants, e: KpEndpoint) -> [Term; 2] {
    let p = params.p;
    [
        Term::new(params.lambda * dc.a_p, params.q - p, 0.0, 0.0),
        Term::new(params.beta * dc.b_p(e), params.a + params.b - p, 0.0, 0.0),
    ]
}

fn check_up(params: &ProblemParams, dc: &DomainConstants) -> Result<()> {
    dc.check_params(params)?;
    if !(params.p > params.q.max(params.a + params.b)) {
        return invalid("the M_p construction needs p > max(q, a + b)");
    }
    if params.lambda == 0.0 && params.beta == 0.0 {
        return invalid("the M_p construction needs lambda > 0 or beta > 0");
    }
    Ok(())
}

/// `M_p` with `λA/M^{p-q} + βB/M^{p-(a+b)} = 1/2`. Closed forms are used when
/// one of the two terms vanishes.
pub fn mp_corollary_up(params: &ProblemParams, dc: &DomainConstants, e: KpEndpoint) -> Result<Root> {
    check_up(params, dc)?;
    let terms = up_terms(params, dc, e);
    let p = params.p;
    if params.beta == 0.0 {
        let v = (2.0 * params.lambda * dc.a_p).powf(1.0 / (p - params.q));
        return Ok(closed(v, &terms, 0.5));
    }
    if params.lambda == 0.0 {
        let v = (2.0 * params.beta * dc.b_p(e)).powf(1.0 / (p - params.a - params.b));
        return Ok(closed(v, &terms, 0.5));
    }
    solve_monotone(&terms, 0.5, false)
}

/// Same root as [`mp_corollary_up`], always by bisection.
pub fn mp_corollary_up_bisection(
    params: &ProblemParams,
    dc: &DomainConstants,
    e: KpEndpoint,
) -> Result<Root> {
    check_up(params, dc)?;
    solve_monotone(&up_terms(params, dc, e), 0.5, false)
}

/// `m_p = M^{p-l} / (2 A_p e^{α M^s})`, in log space.
pub fn compute_mp(params: &ProblemParams, m_level: f64, a_p: f64) -> Result<f64> {
    if !(a_p > 0.0) {
        return invalid("A_p must be > 0");
    }
    if !(m_level > 0.0) {
        return invalid("M must be > 0");
    }
    let ln = (params.p - params.l) * m_level.ln()
        - std::f64::consts::LN_2
        - a_p.ln()
        - params.alpha * pow0(m_level, params.s);
    Ok(ln.exp())
}

fn cor1_terms(params: &ProblemParams, dc: &DomainConstants) -> [Term; 1] {
    [Term::new(params.m * dc.a_p, params.l - params.p, params.alpha, params.s)]
}

/// `M_p` with `m A_p M^{l-p} e^{α M^s} = 1/2`, for `l > p ≥ a + b`.
pub fn mp_cor1(params: &ProblemParams, dc: &DomainConstants) -> Result<Root> {
    dc.check_params(params)?;
    if !(params.l > params.p && params.p >= params.a + params.b) {
        return invalid("this construction needs l > p >= a + b");
    }
    if !(params.m > 0.0) {
        return invalid("this construction needs m > 0");
    }
    let terms = cor1_terms(params, dc);
    if params.alpha == 0.0 || params.s == 0.0 {
        let v = (2.0 * params.m * dc.a_p * (params.alpha * pow0(1.0, params.s)).exp())
            .powf(1.0 / (params.p - params.l));
        return Ok(closed(v, &terms, 0.5));
    }
    solve_monotone(&terms, 0.5, true)
}

/// `λA_p/M^{p-q} + βB_p/M^{p-(a+b)} ≤ 1/2`.
pub fn region_d_cor1(params: &ProblemParams, dc: &DomainConstants, m_level: f64, e: KpEndpoint) -> Result<bool> {
    let t = region_terms(&params.with_m(0.0), dc, m_level, e)?;
    Ok(t[0] + t[1] <= 0.5)
}

fn cor2_terms(params: &ProblemParams, dc: &DomainConstants, e: KpEndpoint) -> [Term; 2] {
    let p = params.p;
    [
        Term::new(params.beta * dc.b_p(e), params.a + params.b - p, 0.0, 0.0),
        Term::new(params.m * dc.a_p, params.l - p, params.alpha, params.s),
    ]
}

/// `M_p` with `βB_p M^{a+b-p} + m A_p M^{l-p} e^{α M^s} = 1/2`, for
/// `q < p < min(a + b, l)`.
pub fn mp_cor2(params: &ProblemParams, dc: &DomainConstants, e: KpEndpoint) -> Result<Root> {
    dc.check_params(params)?;
    if !(params.p < (params.a + params.b).min(params.l)) {
        return invalid("this construction needs q < p < min(a + b, l)");
    }
    if !(params.beta > 0.0 && params.m > 0.0) {
        return invalid("this construction needs beta > 0 and m > 0");
    }
    solve_monotone(&cor2_terms(params, dc, e), 0.5, true)
}

/// `λ* = M^{p-q} / (2 A_p)`.
pub fn lambda_star(m_level: f64, a_p: f64, p: f64, q: f64) -> Result<f64> {
    if !(a_p > 0.0) || !(m_level > 0.0) {
        return invalid("lambda_star needs M > 0 and A_p > 0");
    }
    Ok(((p - q) * m_level.ln() - std::f64::consts::LN_2 - a_p.ln()).exp())
}

/// `M_p = (1/(2βB_p))^{1/(a+b-p)}` for the case `l = p < a + b`.
pub fn mp_cor3(beta: f64, b_p: f64, a: f64, b: f64, p: f64) -> Result<f64> {
    if !(a + b > p) {
        return invalid("this construction needs p < a + b");
    }
    if !(beta > 0.0 && b_p > 0.0) {
        return invalid("this construction needs beta > 0 and B_p > 0");
    }
    Ok((-(2.0 * beta * b_p).ln() / (a + b - p)).exp())
}

/// `λA_p/M^{p-q} + m A_p e^{α M^s} ≤ 1/2`.
#[allow(clippy::too_many_arguments)]
pub fn region_d_cor3(lambda: f64, m: f64, m_level: f64, a_p: f64, alpha: f64, s: f64, p: f64, q: f64) -> Result<bool> {
    if !(m_level > 0.0) || !(a_p > 0.0) {
        return invalid("region test needs M > 0 and A_p > 0");
    }
    let first = Term::new(lambda * a_p, q - p, 0.0, 0.0).ln_at(m_level).exp();
    let second = Term::new(m * a_p, 0.0, alpha, s).ln_at(m_level).exp();
    Ok(first + second <= 0.5)
}

/// `(λ d^{q-1} + β d^{a-1}) d^{l-1} e^{-α d^s}` with `d = ‖d_Ω‖_∞`.
#[allow(clippy::too_many_arguments)]
pub fn m_inf(d_sup: f64, lambda: f64, beta: f64, q: f64, a: f64, l: f64, alpha: f64, s: f64) -> f64 {
    (lambda * pow0(d_sup, q - 1.0) + beta * pow0(d_sup, a - 1.0))
        * pow0(d_sup, l - 1.0)
        * (-alpha * pow0(d_sup, s)).exp()
}

/// Minimizer `t_m = ((p-l)/(α s))^{1/s}` of `e^{α t^s}/t^{p-l}`.
pub fn t_m(p: f64, l: f64, alpha: f64, s: f64) -> Result<f64> {
    check_nonexistence(p, l, alpha, s)?;
    Ok(((p - l) / (alpha * s)).powf(1.0 / s))
}

fn check_nonexistence(p: f64, l: f64, alpha: f64, s: f64) -> Result<()> {
    if !(1.0 <= l && l < p) {
        return invalid(format!("the nonexistence bound needs 1 <= l < p, got l={l}, p={p}"));
    }
    if !(alpha > 0.0 && s > 0.0) {
        return invalid("the nonexistence bound needs alpha > 0 and s > 0");
    }
    Ok(())
}

/// `λ_p ((p-l)/(α s e))^{(p-l)/s}`: no positive solution exists for `m` above it.
pub fn nonexistence_bound(lambda_p: f64, p: f64, l: f64, alpha: f64, s: f64) -> Result<f64> {
    check_nonexistence(p, l, alpha, s)?;
    let k = (p - l) / s;
    Ok((lambda_p.ln() + k * ((p - l) / (alpha * s)).ln() - k).exp())
}

/// The older bound `λ_p max{1, ((p-1)/e)^{p-1}}` for `l = α = s = 1`.
pub fn classical_nonexistence_bound(lambda_p: f64, p: f64) -> f64 {
    lambda_p * ((p - 1.0) / std::f64::consts::E).powf(p - 1.0).max(1.0)
}

/// Large-`p` limits `(lim M_p, lim (‖φ_p‖/M_p)^p)`.
pub fn limit_predictions(lambda: f64, beta: f64, q: f64, a: f64, d_sup: f64) -> Result<(f64, f64)> {
    let k = lambda * pow0(d_sup, q - 1.0) + beta * pow0(d_sup, a - 1.0);
    if !(k > 0.0) {
        return invalid("limit needs lambda d^(q-1) + beta d^(a-1) > 0");
    }
    Ok((d_sup, 1.0 / (2.0 * k)))
}

/// Range of `m_p(M)` as `M` runs over `[lo, hi]`; the map has a single
/// interior maximum at `t_m` when `l < p` and `α s > 0`.
pub fn mp_range(params: &ProblemParams, m_range: Interval, a_p: f64) -> Result<Interval> {
    let mut out = Interval::hull(
        compute_mp(params, m_range.lo, a_p)?,
        compute_mp(params, m_range.hi, a_p)?,
    );
    if let Ok(tm) = t_m(params.p, params.l, params.alpha, params.s) {
        if m_range.lo < tm && tm < m_range.hi {
            out = out.include(compute_mp(params, tm, a_p)?);
        }
    }
    Ok(out)
}

/// Everything the `thresholds` command reports.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub params: ProblemParams,
    pub constants: DomainConstants,
    /// Corollary-style `M_p` at the lower and upper `k_p`.
    pub mp_lower_kp: Option<Root>,
    pub mp_upper_kp: Option<Root>,
    pub mp_interval: Option<Interval>,
    pub m_p_interval: Option<Interval>,
    pub m_inf: f64,
    pub nonexistence_bound: Option<f64>,
    pub t_m: Option<f64>,
    pub limit_m: Option<f64>,
    pub limit_ratio: Option<f64>,
    /// `(λ, β, m) ∈ E(M_p)` at each endpoint.
    pub in_e_lower_kp: Option<bool>,
    pub in_e_upper_kp: Option<bool>,
    pub notes: Vec<String>,
}

pub fn threshold_report(params: &ProblemParams, dc: &DomainConstants) -> Result<ThresholdReport> {
    dc.check_params(params)?;
    let mut notes = Vec::new();
    let lo = mp_corollary_up(params, dc, KpEndpoint::Lower);
    let hi = mp_corollary_up(params, dc, KpEndpoint::Upper);
    let (mp_lower_kp, mp_upper_kp) = match (lo, hi) {
        (Ok(a), Ok(b)) => (Some(a), Some(b)),
        (Err(e), _) | (_, Err(e)) => {
            notes.push(format!("M_p not available: {e}"));
            (None, None)
        }
    };
    let mp_interval = match (&mp_lower_kp, &mp_upper_kp) {
        (Some(a), Some(b)) => Some(Interval::hull(a.value, b.value)),
        _ => None,
    };
    let m_p_interval = match mp_interval {
        Some(iv) => Some(mp_range(params, iv, dc.a_p)?),
        None => None,
    };
    let in_e = |r: &Option<Root>, e| -> Result<Option<bool>> {
        r.as_ref().map(|r| in_region_e(params, dc, r.value, e)).transpose()
    };
    let in_e_lower_kp = in_e(&mp_lower_kp, KpEndpoint::Lower)?;
    let in_e_upper_kp = in_e(&mp_upper_kp, KpEndpoint::Upper)?;
    let nb = nonexistence_bound(dc.lambda_p, params.p, params.l, params.alpha, params.s);
    if let Err(e) = &nb {
        notes.push(format!("nonexistence bound not applicable: {e}"));
    }
    let limits = limit_predictions(params.lambda, params.beta, params.q, params.a, dc.d_sup).ok();
    Ok(ThresholdReport {
        params: params.clone(),
        constants: dc.clone(),
        mp_lower_kp,
        mp_upper_kp,
        mp_interval,
        m_p_interval,
        m_inf: m_inf(
            dc.d_sup,
            params.lambda,
            params.beta,
            params.q,
            params.a,
            params.l,
            params.alpha,
            params.s,
        ),
        nonexistence_bound: nb.ok(),
        t_m: t_m(params.p, params.l, params.alpha, params.s).ok(),
        limit_m: limits.map(|x| x.0),
        limit_ratio: limits.map(|x| x.1),
        in_e_lower_kp,
        in_e_upper_kp,
        notes,
    })
}

/// Membership verdict of one existence construction at one `k_p` endpoint.
#[derive(Clone, Debug, Serialize)]
pub struct RegionVerdict {
    pub construction: &'static str,
    pub kp_endpoint: Option<KpEndpoint>,
    pub m_level: Option<f64>,
    /// The condition that was tested, in words.
    pub condition: String,
    /// `None` when the construction does not apply to these parameters.
    pub holds: Option<bool>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionReport {
    pub params: ProblemParams,
    pub verdicts: Vec<RegionVerdict>,
}

fn not_applicable(construction: &'static str, why: impl ToString) -> RegionVerdict {
    RegionVerdict {
        construction,
        kp_endpoint: None,
        m_level: None,
        condition: String::new(),
        holds: None,
        note: Some(why.to_string()),
    }
}

/// Checks `(λ, β, m)` against every construction whose hypotheses hold:
/// `E(M_p)` with `m ≤ m_p` for the main corollary, the regions `D` of the
/// `l > p` and `l = p` cases, and `λ ≤ λ*` for the `p < min(a + b, l)` case.
/// With `m_level` given, membership in `E(M)` at that level is added.
pub fn region_report(params: &ProblemParams, dc: &DomainConstants, m_level: Option<f64>) -> Result<RegionReport> {
    dc.check_params(params)?;
    let mut out = Vec::new();
    let ends = [KpEndpoint::Lower, KpEndpoint::Upper];
    if let Some(level) = m_level {
        for e in ends {
            let sum = region_sum(params, dc, level, e)?;
            out.push(RegionVerdict {
                construction: "E(M)",
                kp_endpoint: Some(e),
                m_level: Some(level),
                condition: format!("region sum {} <= 1", kv::fmt_sig(sum)),
                holds: Some(sum <= 1.0),
                note: None,
            });
        }
    }
    match check_up(params, dc) {
        Ok(()) => {
            for e in ends {
                let root = mp_corollary_up(params, dc, e)?;
                let mp = compute_mp(params, root.value, dc.a_p)?;
                let inside = in_region_e(params, dc, root.value, e)?;
                out.push(RegionVerdict {
                    construction: "up",
                    kp_endpoint: Some(e),
                    m_level: Some(root.value),
                    condition: format!(
                        "m = {} <= m_p = {} and (lambda, beta, m) in E(M_p)",
                        kv::fmt_sig(params.m),
                        kv::fmt_sig(mp)
                    ),
                    holds: Some(params.m <= mp && inside),
                    note: None,
                });
            }
        }
        Err(e) => out.push(not_applicable("up", e)),
    }
    match mp_cor1(params, dc) {
        Ok(root) => {
            for e in ends {
                out.push(RegionVerdict {
                    construction: "cor1",
                    kp_endpoint: Some(e),
                    m_level: Some(root.value),
                    condition: "lambda A_p / M^(p-q) + beta B_p / M^(p-a-b) <= 1/2".into(),
                    holds: Some(region_d_cor1(params, dc, root.value, e)?),
                    note: None,
                });
            }
        }
        Err(e) => out.push(not_applicable("cor1", e)),
    }
    if params.q < params.p {
        for e in ends {
            match mp_cor2(params, dc, e) {
                Ok(root) => {
                    let ls = lambda_star(root.value, dc.a_p, params.p, params.q)?;
                    out.push(RegionVerdict {
                        construction: "cor2",
                        kp_endpoint: Some(e),
                        m_level: Some(root.value),
                        condition: format!("lambda = {} <= lambda* = {}", kv::fmt_sig(params.lambda), kv::fmt_sig(ls)),
                        holds: Some(params.lambda <= ls),
                        note: None,
                    });
                }
                Err(err) => {
                    out.push(not_applicable("cor2", err));
                    break;
                }
            }
        }
    } else {
        out.push(not_applicable("cor2", "this construction needs q < p"));
    }
    if params.l == params.p && params.a + params.b > params.p && params.beta > 0.0 {
        for e in ends {
            let level = mp_cor3(params.beta, dc.b_p(e), params.a, params.b, params.p)?;
            let holds = region_d_cor3(
                params.lambda,
                params.m,
                level,
                dc.a_p,
                params.alpha,
                params.s,
                params.p,
                params.q,
            )?;
            out.push(RegionVerdict {
                construction: "cor3",
                kp_endpoint: Some(e),
                m_level: Some(level),
                condition: "lambda A_p / M^(p-q) + m A_p e^(alpha M^s) <= 1/2".into(),
                holds: Some(holds),
                note: None,
            });
        }
    } else {
        out.push(not_applicable("cor3", "this construction needs l = p < a + b and beta > 0"));
    }
    Ok(RegionReport {
        params: params.clone(),
        verdicts: out,
    })
}
