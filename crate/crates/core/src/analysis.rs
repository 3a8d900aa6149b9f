//! Per-`(domain, p)` measurements: torsion function, principal eigenpair and
//! distance function, and the threshold constants derived from them.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance_function, Domain, Field};
use crate::kv::{self, KvMap};
use crate::plap::{self, PoissonSolution, SolverConfig};
use crate::spectral::{self, EigenPair};
use crate::thresholds::{
    self, calibrate_c, DomainConstants, GradientEstimateConstants, KpEndpoint, DEFAULT_GAMMA,
};

/// The `p` values used by the large-`p` sweep unless configured otherwise.
pub const DEFAULT_P_GRID: [f64; 6] = [4.0, 8.0, 16.0, 32.0, 64.0, 100.0];

#[derive(Clone, Debug)]
pub struct DomainAnalysis {
    pub p: f64,
    pub torsion: PoissonSolution,
    pub eigen: EigenPair,
    pub distance: Field,
    pub torsion_sup: f64,
    pub torsion_grad_sup: f64,
    pub d_sup: f64,
}

impl DomainAnalysis {
    pub fn compute(domain: &Arc<Domain>, p: f64, cfg: &SolverConfig) -> Result<DomainAnalysis> {
        let torsion = plap::torsion_function(domain, p, cfg)?;
        if !torsion.converged {
            return Err(Error::NotConverged(format!(
                "torsion function at p={p} (residual {:e})",
                torsion.residual_sup
            )));
        }
        let eigen = spectral::principal_eigenpair(domain, p, cfg)?;
        if !eigen.converged {
            return Err(Error::NotConverged(format!(
                "principal eigenpair at p={p} (residual {:e})",
                eigen.rayleigh_residual
            )));
        }
        let distance = distance_function(domain);
        Ok(DomainAnalysis {
            p,
            torsion_sup: torsion.field.sup_norm(),
            torsion_grad_sup: torsion.field.grad_sup(),
            d_sup: distance.sup_norm(),
            torsion,
            eigen,
            distance,
        })
    }

    pub fn lambda_p(&self) -> f64 {
        self.eigen.lambda_p
    }

    pub fn kp_lower(&self) -> f64 {
        thresholds::kp_lower(self.torsion_sup, self.d_sup, self.torsion_grad_sup)
    }

    pub fn constants(&self, b: f64, ge: &GradientEstimateConstants) -> Result<DomainConstants> {
        DomainConstants::new(
            self.p,
            self.torsion_sup,
            self.torsion_grad_sup,
            self.eigen.lambda_p,
            self.d_sup,
            b,
            ge,
        )
    }
}

/// Settings of the `k_p` bracket: `γ`, an optional fixed `c` (calibrated when
/// absent) and which endpoint the box construction uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsConfig {
    pub c: Option<f64>,
    pub gamma: f64,
    pub kp_endpoint: KpEndpoint,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            c: None,
            gamma: DEFAULT_GAMMA,
            kp_endpoint: KpEndpoint::Upper,
        }
    }
}

impl ThresholdsConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.c {
            GradientEstimateConstants { c, gamma: self.gamma }.validate()
        } else {
            GradientEstimateConstants { c: 1.0, gamma: self.gamma }.validate()
        }
    }

    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<ThresholdsConfig> {
        let d = ThresholdsConfig::default();
        let c = match map.get(&format!("{prefix}c")).map(|s| s.trim()) {
            None | Some("auto") => None,
            Some(_) => kv::get_f64(map, &format!("{prefix}c"))?,
        };
        let kp_endpoint = match map.get(&format!("{prefix}kp_endpoint")) {
            Some(s) => KpEndpoint::parse(s.trim())?,
            None => d.kp_endpoint,
        };
        let out = ThresholdsConfig {
            c,
            gamma: kv::get_f64(map, &format!("{prefix}gamma"))?.unwrap_or(d.gamma),
            kp_endpoint,
        };
        out.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(out)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        m.insert(
            format!("{prefix}c"),
            self.c.map(kv::fmt_f64).unwrap_or_else(|| "auto".into()),
        );
        m.insert(format!("{prefix}gamma"), kv::fmt_f64(self.gamma));
        m.insert(format!("{prefix}kp_endpoint"), self.kp_endpoint.as_str().into());
        m
    }
}

/// Memoized [`DomainAnalysis`] per `p` for one domain and solver config.
pub struct ConstantsCache {
    domain: Arc<Domain>,
    cfg: SolverConfig,
    entries: Mutex<BTreeMap<u64, Arc<DomainAnalysis>>>,
}

impl ConstantsCache {
    pub fn new(domain: &Arc<Domain>, cfg: &SolverConfig) -> ConstantsCache {
        ConstantsCache {
            domain: domain.clone(),
            cfg: cfg.clone(),
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn get(&self, p: f64) -> Result<Arc<DomainAnalysis>> {
        if let Some(hit) = self.entries.lock().unwrap().get(&p.to_bits()) {
            return Ok(hit.clone());
        }
        // computed outside the lock; a racing duplicate is identical anyway
        let fresh = Arc::new(DomainAnalysis::compute(&self.domain, p, &self.cfg)?);
        let mut map = self.entries.lock().unwrap();
        Ok(map.entry(p.to_bits()).or_insert(fresh).clone())
    }

    /// Analyses for several `p` at once, in parallel.
    pub fn get_many(&self, ps: &[f64]) -> Result<Vec<Arc<DomainAnalysis>>> {
        ps.par_iter().map(|&p| self.get(p)).collect()
    }

    /// `c` for the gradient estimate: the configured value, or the smallest
    /// one that keeps `kp_upper ≥ kp_lower` on `grid ∪ extra` (values of
    /// `p < 2` are ignored).
    pub fn gradient_constants(
        &self,
        tc: &ThresholdsConfig,
        grid: &[f64],
        extra: &[f64],
    ) -> Result<GradientEstimateConstants> {
        tc.validate()?;
        if let Some(c) = tc.c {
            return Ok(GradientEstimateConstants { c, gamma: tc.gamma });
        }
        let mut ps: Vec<f64> = grid.iter().chain(extra).copied().filter(|&p| p >= 2.0).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        if ps.is_empty() {
            return invalid("no p >= 2 to calibrate the gradient constant on");
        }
        let samples: Vec<(f64, f64)> = self
            .get_many(&ps)?
            .iter()
            .map(|a| (a.p, a.kp_lower()))
            .collect();
        Ok(GradientEstimateConstants {
            c: calibrate_c(&samples, tc.gamma)?,
            gamma: tc.gamma,
        })
    }
}
