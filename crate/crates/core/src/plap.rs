//! Dirichlet problem `-Δ_p v = g` in Ω, `v = 0` on ∂Ω.
//!
//! The discrete problem is the minimization of the convex energy
//!
//! ```text
//! E(v) = Σ_e |e| (1/p) (|∇_e v|² + ε²)^{p/2} - Σ_i W_i g_i v_i
//! ```
//!
//! over nodal vectors vanishing on the boundary, where `∇_e` is the element
//! gradient and `W_i` the node volume (see [`crate::geometry`]). Its
//! Euler–Lagrange system is solved by damped Newton (Armijo backtracking on
//! `E`), driven through a decreasing schedule of `ε`, and, when `p` is far from
//! 2, through a continuation in `p` starting from the linear problem.
//!
//! The right-hand side is normalized to `‖g‖_∞ = 1` before solving and the
//! solution rescaled by `‖g‖_∞^{1/(p-1)}` afterwards, which uses the exact
//! `(p-1)`-homogeneity of the operator.
//!
//! Convergence is measured node by node: the nodal equation `∂E/∂v_i = 0` is a
//! balance of element fluxes against the load `W_i g_i`, and its residual is
//! divided by the sum of the absolute values of those terms. A plain strong
//! residual `|∂E/∂v_i| / W_i` cannot get below about `1e-8` at `p = 100`: the
//! fluxes are large and nearly cancel, and the roundoff in `|∇v|^{p-2}` is
//! amplified by `p`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::BandSpd;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, Field};
use crate::kv::{self, KvMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Final gradient regularization `ε`.
    pub eps_reg: f64,
    /// Decreasing `ε` stages; the last entry equals `eps_reg`.
    pub eps_schedule: Vec<f64>,
    /// Tolerance on the flux-relative nodal residual.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Largest step of the continuation in `p` (at most 2).
    pub p_continuation_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_reg: 1e-10,
            eps_schedule: vec![1e-2, 1e-4, 1e-6, 1e-8, 1e-10],
            newton_tol: 1e-10,
            max_newton_iters: 100,
            p_continuation_step: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_reg > 0.0) {
            return invalid("eps_reg must be > 0");
        }
        if self.eps_schedule.is_empty() {
            return invalid("eps_schedule must not be empty");
        }
        if self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid("eps_schedule must be strictly decreasing");
        }
        if *self.eps_schedule.last().unwrap() != self.eps_reg {
            return invalid("eps_schedule must end at eps_reg");
        }
        if !(self.newton_tol > 0.0) {
            return invalid("newton_tol must be > 0");
        }
        if self.max_newton_iters == 0 {
            return invalid("max_newton_iters must be >= 1");
        }
        if !(self.p_continuation_step > 0.0 && self.p_continuation_step <= 2.0) {
            return invalid("p_continuation_step must lie in (0, 2]");
        }
        Ok(())
    }

    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let key = |k: &str| format!("{prefix}{k}");
        let eps_reg = kv::get_f64(map, &key("eps_reg"))?.unwrap_or(d.eps_reg);
        let eps_schedule = match kv::get_f64_list(map, &key("eps_schedule"))? {
            Some(s) => s,
            None if eps_reg == d.eps_reg => d.eps_schedule.clone(),
            None => {
                let mut s: Vec<f64> = d.eps_schedule.iter().copied().filter(|&e| e > eps_reg).collect();
                s.push(eps_reg);
                s
            }
        };
        let cfg = SolverConfig {
            eps_reg,
            eps_schedule,
            newton_tol: kv::get_f64(map, &key("newton_tol"))?.unwrap_or(d.newton_tol),
            max_newton_iters: kv::get_usize(map, &key("max_newton_iters"))?
                .unwrap_or(d.max_newton_iters),
            p_continuation_step: kv::get_f64(map, &key("p_continuation_step"))?
                .unwrap_or(d.p_continuation_step),
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        m.insert(format!("{prefix}eps_reg"), kv::fmt_f64(self.eps_reg));
        m.insert(format!("{prefix}eps_schedule"), kv::fmt_f64_list(&self.eps_schedule));
        m.insert(format!("{prefix}newton_tol"), kv::fmt_f64(self.newton_tol));
        m.insert(format!("{prefix}max_newton_iters"), self.max_newton_iters.to_string());
        m.insert(
            format!("{prefix}p_continuation_step"),
            kv::fmt_f64(self.p_continuation_step),
        );
        m
    }
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub field: Field,
    pub residual_sup: f64,
    pub iterations: usize,
    pub p: f64,
    pub converged: bool,
}

/// The discrete energy for one `(p, ε)` and a normalized load.
struct Energy<'a> {
    dom: &'a Domain,
    p: f64,
    eps: f64,
    /// `W_i g_i` at every node (zero on the boundary).
    load: &'a [f64],
    /// node -> unknown index, `usize::MAX` on the boundary
    unknown: &'a [usize],
    n_unknowns: usize,
    bandwidth: usize,
}

struct StageOutcome {
    residual: f64,
    iterations: usize,
    converged: bool,
}

impl<'a> Energy<'a> {
    /// Energy value and the sum of absolute contributions (roundoff scale).
    fn value(&self, v: &[f64]) -> (f64, f64) {
        let mut pos = 0.0;
        let mut work = 0.0;
        let mut mag = 0.0;
        for e in self.dom.elements() {
            let g = e.gradient(v);
            let s = g[0] * g[0] + g[1] * g[1] + self.eps * self.eps;
            pos += e.weight * s.powf(0.5 * self.p);
        }
        pos /= self.p;
        for (l, x) in self.load.iter().zip(v) {
            work += l * x;
            mag += (l * x).abs();
        }
        (pos - work, pos + mag)
    }

    /// Energy gradient over the unknowns, together with the per-node scale
    /// `W_i |g_i| + Σ_e |flux contribution|` that the residual is measured against.
    fn gradient(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut grad = vec![0.0; self.n_unknowns];
        let mut scale = vec![0.0; self.n_unknowns];
        for e in self.dom.elements() {
            let g = e.gradient(v);
            let s = g[0] * g[0] + g[1] * g[1] + self.eps * self.eps;
            let a = e.weight * s.powf(0.5 * (self.p - 2.0));
            for k in 0..e.len {
                let u = self.unknown[e.nodes[k]];
                if u != usize::MAX {
                    let c = a * (g[0] * e.coef[0][k] + g[1] * e.coef[1][k]);
                    grad[u] += c;
                    scale[u] += c.abs();
                }
            }
        }
        for (node, &u) in self.unknown.iter().enumerate() {
            if u != usize::MAX {
                grad[u] -= self.load[node];
                scale[u] += self.load[node].abs();
            }
        }
        (grad, scale)
    }

    fn residual_of(&self, grad: &[f64], scale: &[f64]) -> f64 {
        relative_residual(grad, scale)
    }

    fn hessian(&self, v: &[f64]) -> BandSpd {
        let mut h = BandSpd::zeros(self.n_unknowns, self.bandwidth);
        for e in self.dom.elements() {
            let g = e.gradient(v);
            let s = g[0] * g[0] + g[1] * g[1] + self.eps * self.eps;
            let a = s.powf(0.5 * (self.p - 2.0));
            let b = (self.p - 2.0) * a / s;
            // directional derivative of the gradient along each node
            let mut gk = [0.0; 3];
            for (k, gkk) in gk.iter_mut().enumerate().take(e.len) {
                *gkk = g[0] * e.coef[0][k] + g[1] * e.coef[1][k];
            }
            for k in 0..e.len {
                let uk = self.unknown[e.nodes[k]];
                if uk == usize::MAX {
                    continue;
                }
                for l in 0..e.len {
                    let ul = self.unknown[e.nodes[l]];
                    if ul == usize::MAX || ul > uk {
                        continue;
                    }
                    if ul == uk && l != k {
                        continue;
                    }
                    let dot = e.coef[0][k] * e.coef[0][l] + e.coef[1][k] * e.coef[1][l];
                    h.add_lower(uk, ul, e.weight * (a * dot + b * gk[k] * gk[l]));
                }
            }
        }
        h
    }

    /// Damped Newton at fixed `(p, ε)`, starting from and overwriting `v`.
    fn newton(&self, v: &mut [f64], tol: f64, max_iters: usize) -> StageOutcome {
        let (mut grad, mut scale) = self.gradient(v);
        let mut res = self.residual_of(&grad, &scale);
        let mut iterations = 0;
        while iterations < max_iters {
            if res <= tol {
                return StageOutcome {
                    residual: res,
                    iterations,
                    converged: true,
                };
            }
            iterations += 1;
            let Some(step) = self.newton_step(v, &grad) else {
                break;
            };
            let (e0, _) = self.value(v);
            let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            let mut t = 1.0;
            let mut accepted = false;
            let mut trial = v.to_vec();
            for _ in 0..60 {
                for (node, &u) in self.unknown.iter().enumerate() {
                    if u != usize::MAX {
                        trial[node] = v[node] + t * step[u];
                    }
                }
                let (e1, mag) = self.value(&trial);
                if e1.is_finite() {
                    if e1 <= e0 + 1e-4 * t * slope {
                        accepted = true;
                    } else if e1 - e0 <= 1e-12 * mag {
                        // energy decrease is below roundoff; fall back to the residual
                        let (g1, s1) = self.gradient(&trial);
                        if self.residual_of(&g1, &s1) < res {
                            accepted = true;
                        }
                    }
                }
                if accepted {
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            v.copy_from_slice(&trial);
            (grad, scale) = self.gradient(v);
            res = self.residual_of(&grad, &scale);
        }
        StageOutcome {
            residual: res,
            iterations,
            converged: res <= tol,
        }
    }

    fn newton_step(&self, v: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
        let hess = self.hessian(v);
        let max_diag = (0..self.n_unknowns).fold(0.0f64, |m, i| m.max(hess.diag(i)));
        let mut shift = 0.0;
        for _ in 0..8 {
            let mut h = hess.clone();
            if shift > 0.0 {
                h.add_diag(shift);
            }
            let mut rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            if h.solve_in_place(&mut rhs).is_ok() && rhs.iter().all(|x| x.is_finite()) {
                return Some(rhs);
            }
            shift = if shift == 0.0 { 1e-14 * max_diag.max(1e-300) } else { shift * 100.0 };
        }
        None
    }
}

/// `p` values visited by the continuation: uniform steps from 2 to `p`.
pub fn continuation_path(p: f64, step: f64) -> Vec<f64> {
    let dist = (p - 2.0).abs();
    if dist == 0.0 {
        return vec![p];
    }
    let n = (dist / step).ceil().max(1.0) as usize;
    let mut path: Vec<f64> = (0..n).map(|k| 2.0 + (p - 2.0) * k as f64 / n as f64).collect();
    path.push(p);
    path
}

struct Prepared {
    unknown: Vec<usize>,
    n_unknowns: usize,
    bandwidth: usize,
    load: Vec<f64>,
}

fn prepare(dom: &Domain, g_normalized: &[f64]) -> Prepared {
    let mut unknown = vec![usize::MAX; dom.num_nodes()];
    let mut n_unknowns = 0;
    for (node, u) in unknown.iter_mut().enumerate() {
        if !dom.is_boundary(node) {
            *u = n_unknowns;
            n_unknowns += 1;
        }
    }
    let mut bandwidth = 0;
    for e in dom.elements() {
        for a in 0..e.len {
            for b in 0..e.len {
                let (ua, ub) = (unknown[e.nodes[a]], unknown[e.nodes[b]]);
                if ua != usize::MAX && ub != usize::MAX {
                    bandwidth = bandwidth.max(ua.abs_diff(ub));
                }
            }
        }
    }
    let load: Vec<f64> = g_normalized
        .iter()
        .zip(dom.node_volumes())
        .enumerate()
        .map(|(node, (g, w))| if dom.is_boundary(node) { 0.0 } else { g * w })
        .collect();
    Prepared {
        unknown,
        n_unknowns,
        bandwidth,
        load,
    }
}

fn check_inputs(domain: &Arc<Domain>, p: f64, g: &Field, cfg: &SolverConfig) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return invalid(format!("p must be a finite number > 1, got {p}"));
    }
    cfg.validate()?;
    if !Arc::ptr_eq(domain, g.domain()) {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// Solves `-Δ_p v = g` with `v = 0` on the boundary.
///
/// Non-convergence is reported through `converged = false` with the best
/// iterate attached.
pub fn solve_p_poisson(
    domain: &Arc<Domain>,
    p: f64,
    g: &Field,
    cfg: &SolverConfig,
) -> Result<PoissonSolution> {
    solve_impl(domain, p, g, cfg, None)
}

/// Same as [`solve_p_poisson`] but Newton starts at `p` from `guess` instead
/// of running the continuation from `p = 2`. Falls back to the continuation if
/// the warm start fails.
pub fn solve_p_poisson_from(
    domain: &Arc<Domain>,
    p: f64,
    g: &Field,
    cfg: &SolverConfig,
    guess: &Field,
) -> Result<PoissonSolution> {
    if !Arc::ptr_eq(domain, guess.domain()) {
        return Err(Error::DomainMismatch);
    }
    solve_impl(domain, p, g, cfg, Some(guess))
}

fn solve_impl(
    domain: &Arc<Domain>,
    p: f64,
    g: &Field,
    cfg: &SolverConfig,
    guess: Option<&Field>,
) -> Result<PoissonSolution> {
    check_inputs(domain, p, g, cfg)?;
    let gmax = g.sup_norm();
    if gmax == 0.0 {
        return Ok(PoissonSolution {
            field: Field::zeros(domain),
            residual_sup: 0.0,
            iterations: 0,
            p,
            converged: true,
        });
    }
    let g_norm: Vec<f64> = g.values().iter().map(|x| x / gmax).collect();
    let scale = gmax.powf(1.0 / (p - 1.0));
    if !scale.is_finite() || scale == 0.0 {
        return invalid(format!("right-hand side scale {gmax:e} out of range for p = {p}"));
    }
    let prep = prepare(domain, &g_norm);
    let energy_at = |p: f64, eps: f64| Energy {
        dom: domain,
        p,
        eps,
        load: &prep.load,
        unknown: &prep.unknown,
        n_unknowns: prep.n_unknowns,
        bandwidth: prep.bandwidth,
    };
    let tol = cfg.newton_tol;
    let max_it = cfg.max_newton_iters;
    let run_schedule = |v: &mut Vec<f64>, p: f64, iters: &mut usize| -> StageOutcome {
        let mut last = StageOutcome {
            residual: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
        for &eps in &cfg.eps_schedule {
            last = energy_at(p, eps).newton(v, tol, max_it);
            *iters += last.iterations;
        }
        last
    };

    let mut iterations = 0;
    let mut v = vec![0.0; domain.num_nodes()];
    let mut outcome = None;
    if let Some(guess) = guess {
        v.iter_mut()
            .zip(guess.values())
            .enumerate()
            .for_each(|(node, (x, y))| *x = if domain.is_boundary(node) { 0.0 } else { y / scale });
        let first = energy_at(p, cfg.eps_reg).newton(&mut v, tol, max_it);
        iterations += first.iterations;
        let out = if first.converged {
            first
        } else {
            run_schedule(&mut v, p, &mut iterations)
        };
        if out.converged {
            outcome = Some(out);
        } else {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let outcome = match outcome {
        Some(o) => o,
        None => {
            let path = continuation_path(p, cfg.p_continuation_step);
            let mut out = run_schedule(&mut v, path[0], &mut iterations);
            for &pk in &path[1..] {
                let stage = energy_at(pk, cfg.eps_reg).newton(&mut v, tol, max_it);
                iterations += stage.iterations;
                out = if stage.converged {
                    stage
                } else {
                    run_schedule(&mut v, pk, &mut iterations)
                };
            }
            out
        }
    };

    let values: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(node, x)| if domain.is_boundary(node) { 0.0 } else { x * scale })
        .collect();
    let field = Field::new(domain, values, format!("p-poisson p={p}"))?;
    Ok(PoissonSolution {
        field,
        residual_sup: outcome.residual,
        iterations,
        p,
        converged: outcome.converged,
    })
}

/// The torsion function `φ_p`: solution of `-Δ_p v = 1`.
pub fn torsion_function(domain: &Arc<Domain>, p: f64, cfg: &SolverConfig) -> Result<PoissonSolution> {
    let one = Field::constant(domain, 1.0)?;
    let mut sol = solve_p_poisson(domain, p, &one, cfg)?;
    sol.field = sol.field.with_label(format!("torsion p={p}"));
    Ok(sol)
}

/// Discrete `-Δ_p v` in weak form: the vector `Σ_e |e| |∇_e v|^{p-2} ∇_e v · ∇_e φ_i`
/// at every node (zero on the boundary).
pub fn weak_operator(v: &Field, p: f64) -> Vec<f64> {
    let dom = v.domain();
    let mut out = vec![0.0; dom.num_nodes()];
    for e in dom.elements() {
        let g = e.gradient(v.values());
        let s = g[0] * g[0] + g[1] * g[1];
        if s == 0.0 {
            continue;
        }
        let a = e.weight * s.powf(0.5 * (p - 2.0));
        for k in 0..e.len {
            out[e.nodes[k]] += a * (g[0] * e.coef[0][k] + g[1] * e.coef[1][k]);
        }
    }
    for (node, x) in out.iter_mut().enumerate() {
        if dom.is_boundary(node) {
            *x = 0.0;
        }
    }
    out
}

/// Largest nodal residual `|r_i| / scale_i`; nodes with zero scale are
/// balanced trivially.
fn relative_residual(r: &[f64], scale: &[f64]) -> f64 {
    r.iter()
        .zip(scale)
        .filter(|(_, &s)| s > 0.0)
        .fold(0.0f64, |m, (r, s)| m.max(r.abs() / s))
}

/// Residual of `-Δ_p v = f` in the form the solver uses: at every interior
/// node, `|(-Δ_p v)_i - W_i f_i|` over the sum of the absolute flux and load
/// terms at that node.
pub fn weak_residual(v: &Field, p: f64, f: &Field) -> Result<f64> {
    if !v.same_domain(f) {
        return Err(Error::DomainMismatch);
    }
    let dom = v.domain();
    let mut r = vec![0.0; dom.num_nodes()];
    let mut scale = vec![0.0; dom.num_nodes()];
    for e in dom.elements() {
        let g = e.gradient(v.values());
        let s = g[0] * g[0] + g[1] * g[1];
        if s == 0.0 {
            continue;
        }
        let a = e.weight * s.powf(0.5 * (p - 2.0));
        for k in 0..e.len {
            let c = a * (g[0] * e.coef[0][k] + g[1] * e.coef[1][k]);
            r[e.nodes[k]] += c;
            scale[e.nodes[k]] += c.abs();
        }
    }
    for node in 0..dom.num_nodes() {
        if dom.is_boundary(node) {
            r[node] = 0.0;
            scale[node] = 0.0;
            continue;
        }
        let load = dom.node_volumes()[node] * f.values()[node];
        r[node] -= load;
        scale[node] += load.abs();
    }
    Ok(relative_residual(&r, &scale))
}

/// Exact torsion function of the ball of radius `radius` in `R^n`, at
/// distance `r` from the center.
pub fn torsion_exact_ball(n: usize, radius: f64, p: f64, r: f64) -> Result<f64> {
    if n == 0 || !(radius > 0.0) || !(p > 1.0) {
        return invalid("torsion_exact_ball needs N >= 1, R > 0, p > 1");
    }
    if !(0.0..=radius).contains(&r) {
        return invalid(format!("r = {r} outside [0, {radius}]"));
    }
    let e = p / (p - 1.0);
    Ok((p - 1.0) / p * (n as f64).powf(-1.0 / (p - 1.0)) * (radius.powf(e) - r.powf(e)))
}

/// Exact `‖∇φ_p‖_∞` on a ball, attained on the boundary.
pub fn torsion_grad_sup_exact_ball(n: usize, radius: f64, p: f64) -> f64 {
    (radius / n as f64).powf(1.0 / (p - 1.0))
}

/// Upper bound `M_0` on `‖φ_p‖_∞` from symmetrization: the torsion maximum
/// of the ball with the same volume.
pub fn torsion_max_bound(p: f64, n: usize, volume: f64, unit_ball_volume: f64) -> f64 {
    let n = n as f64;
    (p - 1.0) / p * n.powf(-1.0 / (p - 1.0)) * (volume / unit_ball_volume).powf(p / (n * (p - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ball_examples() {
        assert!((torsion_exact_ball(2, 1.0, 2.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(torsion_exact_ball(2, 1.0, 2.0, 1.0).unwrap(), 0.0);
        assert!((torsion_exact_ball(1, 1.0, 2.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(torsion_exact_ball(2, 1.0, 2.0, 1.5).is_err());
    }

    #[test]
    fn max_bound_examples() {
        use std::f64::consts::PI;
        assert!((torsion_max_bound(2.0, 2, PI, PI) - 0.25).abs() < 1e-15);
        let v = torsion_max_bound(3.0, 2, 4.0 * PI, PI);
        let expected = (2.0 / 3.0) * 2f64.powf(-0.5) * 4f64.powf(0.75);
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 4.0 / 3.0).abs() < 1e-4);
        // the p -> infinity limit of the prefactor
        let big = torsion_max_bound(1e8, 2, PI, PI);
        assert!((big - 1.0).abs() < 1e-6);
    }

    #[test]
    fn continuation_steps_are_bounded() {
        let path = continuation_path(9.0, 2.0);
        assert_eq!(path.first(), Some(&2.0));
        assert_eq!(path.last(), Some(&9.0));
        assert!(path.windows(2).all(|w| w[1] - w[0] <= 2.0 + 1e-12));
        assert_eq!(continuation_path(2.0, 2.0), vec![2.0]);
        let down = continuation_path(1.5, 2.0);
        assert_eq!(down, vec![2.0, 1.5]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.p_continuation_step = 3.0;
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            eps_schedule: vec![1e-4, 1e-2, 1e-10],
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            eps_schedule: vec![1e-4],
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let dom = Domain::ball(1.0, 2, 65).unwrap();
        let sol = solve_p_poisson(&dom, 7.0, &Field::zeros(&dom), &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.field.sup_norm(), 0.0);
    }

    #[test]
    fn rejects_bad_p() {
        let dom = Domain::interval(0.0, 1.0, 9).unwrap();
        let one = Field::constant(&dom, 1.0).unwrap();
        assert!(solve_p_poisson(&dom, 1.0, &one, &SolverConfig::default()).is_err());
        let other = Domain::interval(0.0, 1.0, 9).unwrap();
        assert_eq!(
            solve_p_poisson(&other, 2.0, &one, &SolverConfig::default()).unwrap_err(),
            Error::DomainMismatch
        );
    }

    #[test]
    fn classical_interval_torsion() {
        let dom = Domain::interval(0.0, 1.0, 1025).unwrap();
        let sol = torsion_function(&dom, 2.0, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.field.is_dirichlet_zero());
        for (c, v) in dom.coords().iter().zip(sol.field.values()) {
            let x = c[0];
            assert!((v - 0.5 * x * (1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn rectangle_p2_matches_five_point_laplacian() {
        // On the right-triangle mesh the p = 2 energy is the five-point stencil.
        let n = 17;
        let dom = Domain::rectangle(0.0, 1.0, 0.0, 1.0, n).unwrap();
        let sol = torsion_function(&dom, 2.0, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        let h = 1.0 / (n - 1) as f64;
        let v = sol.field.values();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                let lap = (4.0 * v[k] - v[k - 1] - v[k + 1] - v[k - n] - v[k + n]) / (h * h);
                assert!((lap - 1.0).abs() < 1e-8, "{lap}");
            }
        }
    }

    #[test]
    fn rectangle_large_p_torsion_below_distance_bound() {
        let dom = Domain::rectangle(0.0, 1.0, 0.0, 1.0, 33).unwrap();
        let sol = torsion_function(&dom, 8.0, &SolverConfig::default()).unwrap();
        assert!(sol.converged, "residual {}", sol.residual_sup);
        let bound = torsion_max_bound(8.0, 2, dom.volume(), dom.unit_ball_volume());
        assert!(sol.field.sup_norm() <= bound);
    }
}
