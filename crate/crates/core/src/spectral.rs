//! Principal Dirichlet eigenpair of `-Δ_p`.
//!
//! Nonlinear inverse iteration: solve `-Δ_p w = v^{p-1}`, renormalize
//! `v ← w / ‖w‖_∞`, and read the eigenvalue off the discrete Rayleigh quotient
//! `∫|∇v|^p / ∫|v|^p`. The iteration stays in the positive cone, so it can only
//! find the principal pair; a sign change means something is broken.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, Field};
use crate::plap::{self, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Stop once the quotient moves by less than this, relatively...
    pub rel_tol: f64,
    /// ...and the eigen-equation residual is below this.
    pub residual_tol: f64,
    pub max_iters: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            rel_tol: 1e-8,
            residual_tol: 1e-6,
            max_iters: 5000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda_p: f64,
    /// Positive in the interior, sup norm exactly 1.
    pub e_p: Field,
    /// Nodal residual of `-Δ_p e = λ e^{p-1}` (see [`plap::weak_residual`]).
    pub rayleigh_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `∫|∇v|^p / ∫|v|^p` with the mesh quadrature.
pub fn rayleigh_quotient(v: &Field, p: f64) -> Result<f64> {
    let sup = v.sup_norm();
    if sup == 0.0 {
        return invalid("Rayleigh quotient of the zero field");
    }
    // both integrals are p-homogeneous; normalize first to keep them in range
    let u = v.scaled(1.0 / sup)?;
    let den: f64 = u
        .values()
        .iter()
        .zip(u.domain().node_volumes())
        .map(|(x, w)| w * x.abs().powf(p))
        .sum();
    Ok(u.gradient_p_integral(p) / den)
}

/// State of the inverse iteration, exposed so that callers can intervene
/// between steps.
pub struct InverseIteration {
    domain: Arc<Domain>,
    p: f64,
    cfg: SolverConfig,
    v: Field,
    lambda: f64,
    iterations: usize,
}

impl InverseIteration {
    /// Starts from the torsion function.
    pub fn new(domain: &Arc<Domain>, p: f64, cfg: &SolverConfig) -> Result<InverseIteration> {
        let torsion = plap::torsion_function(domain, p, cfg)?;
        Self::from_guess(torsion.field, p, cfg)
    }

    pub fn from_guess(guess: Field, p: f64, cfg: &SolverConfig) -> Result<InverseIteration> {
        if !(p > 1.0) {
            return invalid(format!("p must be > 1, got {p}"));
        }
        let domain = guess.domain().clone();
        check_positive(&guess)?;
        let v = guess.scaled(1.0 / guess.sup_norm())?;
        let lambda = rayleigh_quotient(&v, p)?;
        Ok(InverseIteration {
            domain,
            p,
            cfg: cfg.clone(),
            v,
            lambda,
            iterations: 0,
        })
    }

    pub fn iterate(&self) -> &Field {
        &self.v
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Multiplies the current iterate by `c > 0`.
    pub fn rescale(&mut self, c: f64) -> Result<()> {
        if !(c > 0.0) || !c.is_finite() {
            return invalid("rescale factor must be finite and > 0");
        }
        self.v = self.v.scaled(c)?;
        Ok(())
    }

    /// One inverse step; returns the new quotient.
    pub fn step(&mut self) -> Result<f64> {
        let p = self.p;
        let rhs = self.v.map(|x| x.abs().powf(p - 1.0) * x.signum())?;
        // at the fixed point the solution is λ^{-1/(p-1)} v
        let guess = self.v.scaled(self.lambda.powf(-1.0 / (p - 1.0)))?;
        let sol = plap::solve_p_poisson_from(&self.domain, p, &rhs, &self.cfg, &guess)?;
        if !sol.converged {
            return Err(Error::NotConverged(format!(
                "inverse iteration solve (residual {:e})",
                sol.residual_sup
            )));
        }
        check_positive(&sol.field)?;
        let w = sol.field;
        self.v = w.scaled(1.0 / w.sup_norm())?;
        self.lambda = rayleigh_quotient(&self.v, p)?;
        self.iterations += 1;
        Ok(self.lambda)
    }

    /// Residual of the eigen equation at the current iterate.
    pub fn residual(&self) -> Result<f64> {
        let p = self.p;
        let lam = self.lambda;
        let u = self.v.scaled(1.0 / self.v.sup_norm())?;
        let f = u.map(|x| lam * x.abs().powf(p - 1.0))?;
        plap::weak_residual(&u, p, &f)
    }

    pub fn into_pair(self, converged: bool) -> Result<EigenPair> {
        let rayleigh_residual = self.residual()?;
        let e_p = self.v.scaled(1.0 / self.v.sup_norm())?.with_label(format!("eigenfunction p={}", self.p));
        Ok(EigenPair {
            lambda_p: self.lambda,
            e_p,
            rayleigh_residual,
            iterations: self.iterations,
            converged,
        })
    }
}

fn check_positive(v: &Field) -> Result<()> {
    let dom = v.domain();
    for (node, &x) in v.values().iter().enumerate() {
        if !dom.is_boundary(node) && !(x > 0.0) {
            return Err(Error::Invariant(format!(
                "eigen iterate is not positive at node {node} (value {x:e})"
            )));
        }
    }
    Ok(())
}

pub fn principal_eigenpair(domain: &Arc<Domain>, p: f64, cfg: &SolverConfig) -> Result<EigenPair> {
    principal_eigenpair_with(domain, p, cfg, &EigenOptions::default())
}

pub fn principal_eigenpair_with(
    domain: &Arc<Domain>,
    p: f64,
    cfg: &SolverConfig,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    let mut it = InverseIteration::new(domain, p, cfg)?;
    let mut prev = it.lambda();
    for _ in 0..opts.max_iters {
        let lam = it.step()?;
        if (lam - prev).abs() <= opts.rel_tol * lam && it.residual()? <= opts.residual_tol {
            return it.into_pair(true);
        }
        prev = lam;
    }
    it.into_pair(false)
}

/// `λ_p^{1/(p-1)} ‖φ_p‖_∞ ≥ 1`, up to `1e-8`.
pub fn check_lbep(eig: &EigenPair, torsion_sup: f64, p: f64) -> bool {
    eig.lambda_p.powf(1.0 / (p - 1.0)) * torsion_sup >= 1.0 - 1e-8
}
