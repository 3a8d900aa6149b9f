//! Built-in oracle checks: closed-form radial torsion, homogeneity of the
//! solver, the comparison principle and reference eigenvalues.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{Domain, Field};
use crate::plap::{self, SolverConfig};
use crate::spectral;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Seed of the random right-hand sides in [`comparison`].
pub const COMPARISON_SEED: u64 = 0x5eed_c0de;
pub const COMPARISON_NEWTON_TOL: f64 = 1e-9;

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    Check {
        name: name.into(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn solve(dom: &Arc<Domain>, p: f64, g: &Field, cfg: &SolverConfig) -> Result<Field> {
    let s = plap::solve_p_poisson(dom, p, g, cfg)?;
    if !s.converged {
        return Err(crate::Error::NotConverged(format!("p={p}, residual {:e}", s.residual_sup)));
    }
    Ok(s.field)
}

/// Torsion of the unit disk at 1025 radial nodes against the radial formula,
/// sup and gradient sup to `1e-3`, for `p ∈ {2, 3, 5}`.
pub fn radial_torsion(cfg: &SolverConfig) -> Check {
    timed("radial torsion", || {
        let dom = Domain::ball(1.0, 2, 1025)?;
        let mut pass = true;
        let mut detail = Vec::new();
        for p in [2.0, 3.0, 5.0] {
            let t = plap::torsion_function(&dom, p, cfg)?;
            let exact = plap::torsion_exact_ball(2, 1.0, p, 0.0)?;
            let grad = plap::torsion_grad_sup_exact_ball(2, 1.0, p);
            let e1 = (t.field.sup_norm() - exact).abs();
            let e2 = (t.field.grad_sup() - grad).abs();
            pass &= t.converged && e1 <= 1e-3 && e2 <= 1e-3;
            detail.push(format!("p={p}: sup err {e1:.3e}, grad err {e2:.3e}"));
        }
        Ok((pass, detail.join("; ")))
    })
}

/// `‖solve(4g) - 4^{1/(p-1)} solve(g)‖_∞ ≤ 1e-8 ‖solve(g)‖_∞` with `g` the
/// torsion function, for `p ∈ {2, 5, 20}`.
pub fn homogeneity(dom: &Arc<Domain>, cfg: &SolverConfig) -> Check {
    timed("homogeneity", || {
        let mut pass = true;
        let mut detail = Vec::new();
        for p in [2.0, 5.0, 20.0] {
            let g = plap::torsion_function(dom, p, cfg)?.field;
            let u1 = solve(dom, p, &g, cfg)?;
            let u4 = solve(dom, p, &g.scaled(4.0)?, cfg)?;
            let rel = u4.sup_diff(&u1.scaled(4f64.powf(1.0 / (p - 1.0)))?)? / u1.sup_norm();
            pass &= rel <= 1e-8;
            detail.push(format!("p={p}: {rel:.3e}"));
        }
        Ok((pass, detail.join("; ")))
    })
}

/// Random pairs `0 ≤ g₁ ≤ g₂`, `‖g₂‖_∞ ≤ 1`, for `p ∈ {2, 10}`: the solutions
/// must be ordered node-wise up to `1e-8`.
///
/// Rough random loads that nearly vanish next to the ball center leave a
/// roundoff floor near `1e-10` in the nodal residual, so the solver tolerance
/// is capped at `1e-9` here.
pub fn comparison(dom: &Arc<Domain>, pairs: usize, seed: u64, cfg: &SolverConfig) -> Check {
    timed("comparison principle", || {
        let cfg = &SolverConfig {
            newton_tol: cfg.newton_tol.max(COMPARISON_NEWTON_TOL),
            ..cfg.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dom.num_nodes();
        let mut worst = f64::NEG_INFINITY;
        let mut count = 0;
        for p in [2.0, 10.0] {
            for _ in 0..pairs {
                let g2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let g1: Vec<f64> = g2.iter().map(|x| x * rng.gen::<f64>()).collect();
                let u1 = solve(dom, p, &Field::new(dom, g1, "g1")?, cfg)?;
                let u2 = solve(dom, p, &Field::new(dom, g2, "g2")?, cfg)?;
                let excess = u1
                    .values()
                    .iter()
                    .zip(u2.values())
                    .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
                worst = worst.max(excess);
                count += 1;
            }
        }
        Ok((worst <= 1e-8, format!("{count} pairs, worst u1 - u2 = {worst:.3e}")))
    })
}

/// Interval `p = 2` against `π²` (0.1 %), unit disk `p = 2` against `j₀₁²`
/// (1 %), and the torsion lower bound on every pair.
pub fn eigenvalues(cfg: &SolverConfig) -> Check {
    timed("eigenvalues", || {
        let interval = Domain::interval(0.0, 1.0, 1025)?;
        let disk = Domain::ball(1.0, 2, 1025)?;
        let mut pass = true;
        let mut detail = Vec::new();
        for (dom, target, tol) in [(interval, PI * PI, 1e-3), (disk, 5.783185962946784, 1e-2)] {
            let eig = spectral::principal_eigenpair(&dom, 2.0, cfg)?;
            let t = plap::torsion_function(&dom, 2.0, cfg)?;
            let rel = (eig.lambda_p - target).abs() / target;
            let lbep = spectral::check_lbep(&eig, t.field.sup_norm(), 2.0);
            pass &= eig.converged && rel <= tol && lbep;
            detail.push(format!(
                "{}: lambda {} (rel err {rel:.3e}), lbep {lbep}",
                dom.shape().name(),
                crate::kv::fmt_sig(eig.lambda_p)
            ));
        }
        Ok((pass, detail.join("; ")))
    })
}

/// All checks; homogeneity and comparison run on the unit disk at 257 nodes.
pub fn run(cfg: &SolverConfig) -> Result<SelftestReport> {
    cfg.validate()?;
    let disk = Domain::ball(1.0, 2, 257)?;
    let checks = vec![
        radial_torsion(cfg),
        homogeneity(&disk, cfg),
        comparison(&disk, 50, COMPARISON_SEED, cfg),
        eigenvalues(cfg),
    ];
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(SelftestReport { checks, all_pass })
}
