//! End-to-end runs of the box construction and the nonexistence probe.

use std::time::Instant;

use plap_core::analysis::DomainAnalysis;
use plap_core::fixed_point::{self, FixedPointConfig, ProbeConfig, ProbeVerdict, Verdict};
use plap_core::geometry::{energy_ip, Domain, EnergySpec};
use plap_core::plap::{self, SolverConfig};
use plap_core::thresholds::{self, GradientEstimateConstants, KpEndpoint, ProblemParams};

fn full_params() -> ProblemParams {
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

#[test]
fn full_disk_run_converges_with_all_checks() {
    let start = Instant::now();
    let dom = Domain::ball(1.0, 2, 1025).unwrap();
    let solver = SolverConfig::default();
    let a = DomainAnalysis::compute(&dom, 10.0, &solver).unwrap();
    let ge = GradientEstimateConstants { c: 1.0, gamma: 2.5 };
    let dc = a.constants(1.0, &ge).unwrap();
    let base = full_params();
    let m_level = thresholds::mp_corollary_up(&base, &dc, KpEndpoint::Upper).unwrap().value;
    let mp = thresholds::compute_mp(&base, m_level, dc.a_p).unwrap();
    let params = base.with_m(0.5 * mp);
    let cfg = FixedPointConfig::default();
    let r = fixed_point::solve_problem_p(&a, &params, m_level, &dc, KpEndpoint::Upper, &solver, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(r.verdict, Verdict::Converged, "{:?}", r.diagnosis);
    assert!(r.bounds_ok.unwrap().all(), "{:?}", r.bounds_margin);
    assert!(r.fixed_point_residual.unwrap() <= 2.0 * r.outer_tol);
    assert!(r.energy_ok.unwrap());
    assert!(r.pde_residual.unwrap() <= 1e-6, "{:?}", r.pde_residual);
    assert!(elapsed < 30.0, "{elapsed} s");

    // sup_diffs shrink overall
    let d = &r.sup_diffs;
    assert!(d.last().unwrap() < &d[0]);

    // oracle: direct minimization of the frozen problem from a different start
    let u = r.solution.clone().unwrap();
    let h = fixed_point::forcing(&params, &u).unwrap();
    let mut w = a.torsion.field.clone();
    for _ in 0..200 {
        let g = w.zip_with(&h, |x, hh| x.max(0.0) + hh).unwrap();
        let next = plap::solve_p_poisson_from(&dom, 10.0, &g, &solver, &w).unwrap().field;
        let step = next.sup_diff(&w).unwrap();
        w = next;
        if step < 1e-12 {
            break;
        }
    }
    assert!(w.sup_diff(&u).unwrap() <= 1e-6 * m_level, "{}", w.sup_diff(&u).unwrap());
    let spec = EnergySpec {
        p: 10.0,
        q: 2.0,
        lambda: 1.0,
        forcing: h,
    };
    let (eu, ew) = (energy_ip(&spec, &u).unwrap(), energy_ip(&spec, &w).unwrap());
    assert!((eu - ew).abs() <= 1e-8 * eu.abs().max(1.0));
}

#[test]
fn identical_runs_have_identical_traces() {
    let dom = Domain::ball(1.0, 2, 257).unwrap();
    let solver = SolverConfig::default();
    let a = DomainAnalysis::compute(&dom, 6.0, &solver).unwrap();
    let dc = a.constants(1.0, &GradientEstimateConstants { c: 1.0, gamma: 2.5 }).unwrap();
    let base = full_params().with_p(6.0);
    let m_level = thresholds::mp_corollary_up(&base, &dc, KpEndpoint::Upper).unwrap().value;
    let mp = thresholds::compute_mp(&base, m_level, dc.a_p).unwrap();
    let params = base.with_m(0.5 * mp);
    let cfg = FixedPointConfig::default();
    let run = || fixed_point::solve_problem_p(&a, &params, m_level, &dc, KpEndpoint::Upper, &solver, &cfg).unwrap();
    let (r1, r2) = (run(), run());
    assert_eq!(r1.sup_diffs, r2.sup_diffs);
    assert_eq!(r1.solution.unwrap().values(), r2.solution.unwrap().values());
}

fn bratu(m: f64) -> ProblemParams {
    ProblemParams {
        lambda: 0.0,
        beta: 0.0,
        m,
        p: 2.0,
        q: 1.0,
        a: 1.0,
        b: 1.0,
        l: 1.0,
        alpha: 1.0,
        s: 1.0,
    }
}

#[test]
fn probe_separates_bratu_regimes() {
    let start = Instant::now();
    let dom = Domain::ball(1.0, 2, 1025).unwrap();
    let solver = SolverConfig::default();
    let lam = 5.783185962946784;
    let cfg = ProbeConfig::default();
    let hi = fixed_point::nonexistence_probe(&dom, &bratu(3.0), None, Some(lam), &solver, &cfg).unwrap();
    assert_eq!(hi.verdict, ProbeVerdict::UnboundedGrowth, "{}", hi.reason);
    assert!((hi.nonexistence_bound.unwrap() - 2.1276).abs() < 1e-3);
    let lo = fixed_point::nonexistence_probe(&dom, &bratu(0.1), None, Some(lam), &solver, &cfg).unwrap();
    assert_eq!(lo.verdict, ProbeVerdict::Stabilized, "{}", lo.reason);
    assert!(start.elapsed().as_secs_f64() < 20.0);
}

#[test]
fn probe_without_exponential_stabilizes() {
    let dom = Domain::ball(1.0, 2, 257).unwrap();
    let params = ProblemParams {
        lambda: 0.5,
        q: 1.5,
        ..bratu(0.0)
    };
    let r = fixed_point::nonexistence_probe(&dom, &params, None, None, &SolverConfig::default(), &ProbeConfig::default())
        .unwrap();
    assert_eq!(r.verdict, ProbeVerdict::Stabilized);
}

