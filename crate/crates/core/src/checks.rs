//! Analytic self-consistency checks shared by the CLI `validate` command and
//! the test suites. Each returns a worst-case error to compare with a tolerance.

use crate::analysis::analyze_user;
use crate::error::Result;
use crate::first_order::Normalization;
use crate::iid::{iid_delta, iid_moments, outage_quantile_rate, IidParams};
use crate::outage::OutageKind;
use crate::rmt::{solve_fixed_point, FixedPointOptions};
use crate::scenario::{Scenario, ScenarioConfig};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Relative gap between the iterated fixed point with identity inputs and the
/// quadratic root, at load τ = M/K for K users.
pub fn fixed_point_vs_closed_form(tau: f64, z: f64) -> Result<f64> {
    // the fixed point only sees M/K, so realize τ with M = 1000 antennas
    let m = 1000usize;
    let k = (m as f64 / tau).round() as usize;
    let tau_eff = m as f64 / k as f64;
    let sol = solve_fixed_point(&vec![1.0; m], &vec![1.0; k], z, FixedPointOptions::default())?;
    let p = IidParams { tau: tau_eff, theta: 0.0, z, sigma2: 1.0, rho2: 1.0 };
    Ok(rel(sol.delta, iid_delta(&p).delta))
}

/// Worst relative disagreement, over means and covariance entries of user 0,
/// between the general route on an identity scenario and the i.i.d. closed forms.
pub fn degeneracy_gap(cfg: &ScenarioConfig, norm: Normalization) -> Result<f64> {
    let sc = Scenario::build(cfg.clone())?;
    let ua = analyze_user(&sc, 0, norm)?;
    let mut p = IidParams::from_dims(cfg.m, cfg.n, cfg.l, cfg.z, cfg.sigma2, cfg.rho2)?;
    if norm == Normalization::FullSystem {
        p = p.with_full_system_noise(cfg.m as f64 / cfg.n as f64);
    }
    let im = iid_moments(&p);
    let pairs = [
        (ua.means.sinr, im.means.sinr),
        (ua.means.esnr_ex, im.means.esnr_ex),
        (ua.means.esnr_in, im.means.esnr_in),
        (ua.cov.u, im.cov.u),
        (ua.cov.w, im.cov.w),
        (ua.cov.z, im.cov.z),
        (ua.cov.f, im.cov.f),
        (ua.cov.j, im.cov.j),
        (ua.cov.o, im.cov.o),
    ];
    Ok(pairs.iter().map(|&(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max))
}

/// Relative errors of δ₍₁₎, δ₍₂₎, δ₍₃₎ against five-point differences of the
/// next-lower analytic derivative.
pub fn derivative_fd_errors(tau: f64, z: f64) -> [f64; 3] {
    let at = |z: f64| iid_delta(&IidParams { tau, theta: 0.0, z, sigma2: 1.0, rho2: 1.0 });
    // a small step amplifies rounding in the lower derivative near the z → 0 pole
    let h = 1e-3 * z;
    let s = [at(z - 2.0 * h), at(z - h), at(z + h), at(z + 2.0 * h)];
    let mid = at(z);
    let fd = |f: &dyn Fn(&crate::iid::IidDelta) -> f64| {
        (f(&s[0]) - 8.0 * f(&s[1]) + 8.0 * f(&s[2]) - f(&s[3])) / (12.0 * h)
    };
    [
        rel(mid.d1, fd(&|d| d.delta)),
        rel(mid.d2, fd(&|d| d.d1)),
        rel(mid.d3, fd(&|d| d.d2)),
    ]
}

/// |SOP(R(q)) − q| for the single-eavesdropper-class outages.
pub fn quantile_inversion_error(p: &IidParams, m: usize, q: f64) -> Result<f64> {
    let dm = iid_moments(p).delta_method(m, p.theta == 0.0);
    let mut worst: f64 = 0.0;
    for kind in [OutageKind::External, OutageKind::Internal] {
        if kind == OutageKind::External && p.theta == 0.0 {
            continue;
        }
        let r = outage_quantile_rate(p, q, m, kind)?;
        if r > 0.0 {
            worst = worst.max((dm.sop(kind, r) - q).abs());
        }
    }
    Ok(worst)
}

/// Scenario-level checks: smallest stability factor and the worst PSD margin
/// (smallest eigenvalue relative to the largest diagonal entry) over users.
pub fn scenario_psd_margin(sc: &Scenario, norm: Normalization) -> Result<(f64, f64)> {
    let sys = crate::analysis::SystemAnalysis::new(sc, norm)?;
    let mut stab = f64::INFINITY;
    let mut margin = f64::INFINITY;
    for u in &sys.users {
        stab = stab.min(u.stability);
        let scale = u.cov.u.abs().max(u.cov.w.abs()).max(u.cov.z.abs()).max(1e-300);
        margin = margin.min(u.cov.min_eigenvalue() / scale);
    }
    Ok((stab, margin))
}
