//! Closed forms for R = C = I, T = D = P = I.
//!
//! With τ = M/(N−1) the fixed point collapses to zτδ² + (τz − τ + 1)δ − τ = 0
//! and every covariance entry becomes a combination of δ and its first three
//! z-derivatives.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::first_order::{ErgodicSecrecyRates, MeanVector};
use crate::outage::{DeltaMethodVariances, OutageKind};
use crate::second_order::CovarianceBlock;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IidParams {
    /// M/(N−1)
    pub tau: f64,
    /// L/M
    pub theta: f64,
    pub z: f64,
    pub sigma2: f64,
    pub rho2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IidDelta {
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IidMoments {
    pub delta: IidDelta,
    pub means: MeanVector,
    pub a: [f64; 6],
    pub cov: CovarianceBlock,
}

impl IidParams {
    pub fn from_dims(m: usize, n: usize, l: usize, z: f64, sigma2: f64, rho2: f64) -> Result<Self> {
        if n < 2 || m == 0 {
            return Err(invalid(format!("need M ≥ 1 and N ≥ 2, got M={m}, N={n}")));
        }
        let p = IidParams { tau: m as f64 / (n - 1) as f64, theta: l as f64 / m as f64, z, sigma2, rho2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.z > 0.0 && self.theta >= 0.0 && self.sigma2 > 0.0 && self.rho2 > 0.0) {
            return Err(invalid(format!("invalid i.i.d. parameters {self:?}")));
        }
        Ok(())
    }

    /// Parameters whose leave-one-out formulas reproduce the full-system
    /// normalization: σ² and ρ² scaled by C̄(τ_full)/C̄(τ), C̄ = δ + zδ'.
    pub fn with_full_system_noise(&self, tau_full: f64) -> Self {
        let c = |tau: f64| {
            let d = iid_delta(&IidParams { tau, ..*self });
            d.delta + self.z * d.d1
        };
        let r = c(tau_full) / c(self.tau);
        IidParams { sigma2: self.sigma2 * r, rho2: self.rho2 * r, ..*self }
    }
}

/// δ and its first three z-derivatives, differentiated analytically.
pub fn iid_delta(p: &IidParams) -> IidDelta {
    let (tau, z) = (p.tau, p.z);
    let s = (tau - 1.0).powi(2) + 2.0 * (1.0 + tau) * tau * z + z * z * tau * tau;
    let s1 = 2.0 * (1.0 + tau) * tau + 2.0 * z * tau * tau;
    let s2 = 2.0 * tau * tau;
    let rs = s.sqrt();
    let r1 = s1 / (2.0 * rs);
    let r2 = s2 / (2.0 * rs) - s1 * s1 / (4.0 * s * rs);
    let r3 = -3.0 * s1 * s2 / (4.0 * s * rs) + 3.0 * s1.powi(3) / (8.0 * s * s * rs);
    let u = tau - 1.0 - tau * z + rs;
    let u1 = -tau + r1;
    let (u2, u3) = (r2, r3);
    let v = 1.0 / (2.0 * tau * z);
    let v1 = -1.0 / (2.0 * tau * z * z);
    let v2 = 1.0 / (tau * z.powi(3));
    let v3 = -3.0 / (tau * z.powi(4));
    IidDelta {
        delta: u * v,
        d1: u1 * v + u * v1,
        d2: u2 * v + 2.0 * u1 * v1 + u * v2,
        d3: u3 * v + 3.0 * u2 * v1 + 3.0 * u1 * v2 + u * v3,
    }
}

pub fn iid_moments(p: &IidParams) -> IidMoments {
    let dd = iid_delta(p);
    let IidDelta { delta: dl, d1, d2, d3 } = dd;
    let (tau, th, z, s2, r2) = (p.tau, p.theta, p.z, p.sigma2, p.rho2);
    let one = 1.0 + dl;
    let q = dl + z * d1;
    let den = 1.0 + s2 * one * one;
    let means = MeanVector {
        sinr: dl * (1.0 + z * tau * one * one) / den,
        esnr_ex: tau * th / r2,
        esnr_in: 1.0 / (s2 * one * one),
    };
    let a1 = 2.0 * dl * (1.0 + s2 * one) / (den * den * q);
    let a2 = -dl * dl / (den * den * q * q);
    let a3 = 2.0 * th * d1 / (r2 * one.powi(3) * q);
    let a4 = 1.0 / (r2 * one * one * q);
    let a5 = -2.0 / (s2 * one.powi(3));
    let a6 = 1.0 / (s2 * one * one * q);
    let cov = CovarianceBlock {
        u: -((a1 + a2).powi(2) * d1 + (a2 * a2 + a1 * a2) * z * d2 + a2 * a2 * z * z * d3 / 6.0),
        w: -(a3 * a3 * d1 - a4 * a4 * th * d1 * d1 + th * th * a4 * a4 * d3 / 6.0 - a3 * a4 * th * d2),
        z: -((a5 + a6).powi(2) * d1 + (a6 * a6 + a5 * a6) * z * d2 + a6 * a6 * z * z * d3 / 6.0),
        f: -((a1 + a2) * a3 * d1 - ((a1 + a2) * a4 * th - a2 * a3 * z) * d2 / 2.0 - a2 * a4 * th * z * d3 / 6.0),
        j: -((a1 + a2) * (a5 + a6) * d1
            + z * (a2 * a5 + a1 * a6 + 2.0 * a2 * a6) * d2 / 2.0
            + z * z * a2 * a6 * d3 / 6.0),
        o: -(a3 * (a5 + a6) * d1 + (z * a3 * a6 - th * a4 * (a5 + a6)) * d2 / 2.0 - z * a4 * a6 * th * d3 / 6.0),
    };
    IidMoments { delta: dd, means, a: [a1, a2, a3, a4, a5, a6], cov }
}

impl IidMoments {
    pub fn rates(&self) -> ErgodicSecrecyRates {
        ErgodicSecrecyRates::from_means(&self.means)
    }

    pub fn delta_method(&self, m: usize, no_external: bool) -> DeltaMethodVariances {
        DeltaMethodVariances::new(m, &self.means, &self.cov, no_external, false)
    }
}

/// Rate (nats) at which a fraction `q` of users is in outage.
pub fn outage_quantile_rate(p: &IidParams, q: f64, m: usize, kind: OutageKind) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!("quantile level must be in (0,1), got {q}")));
    }
    if kind == OutageKind::Combined {
        return Err(invalid("quantile rates are defined for the external and internal cases only"));
    }
    let dm = iid_moments(p).delta_method(m, p.theta == 0.0);
    Ok(dm.quantile(kind, q).expect("single-event quantile"))
}

/// Load τ* above which the external ESR is positive in the high-SNR
/// relaxation, and the corresponding antenna count ⌈Nτ*⌉.
pub fn min_tau_positive_secrecy(n: usize, l: usize, sigma2: f64, rho2: f64) -> Result<(f64, usize)> {
    if l == 0 || n == 0 {
        return Err(invalid("positive-secrecy boundary needs N ≥ 1 and L ≥ 1"));
    }
    let x = l as f64 / (n as f64 * rho2);
    let tau = (x * (1.0 + sigma2) + x * x * sigma2) / (x + 1.0);
    Ok((tau, (n as f64 * tau).ceil() as usize))
}

/// Regularizer maximizing the external ESR: σ²/τ.
pub fn optimal_z_esr(sigma2: f64, tau: f64) -> f64 {
    sigma2 / tau
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(tau: f64, z: f64) -> IidParams {
        IidParams { tau, theta: 0.25, z, sigma2: 0.1, rho2: 0.3 }
    }

    #[test]
    fn trivial_roots() {
        assert!((iid_delta(&p(1.0, 1.0)).delta - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
        assert!((iid_delta(&p(2.0, 1.0)).delta - (17f64.sqrt() - 1.0) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_residual_and_monotone() {
        for &tau in &[0.5, 1.0, 1.5, 4.0] {
            for &z in &[0.01, 0.2, 1.0, 5.0] {
                let d = iid_delta(&p(tau, z));
                let r = z * tau * d.delta * d.delta + (tau * z - tau + 1.0) * d.delta - tau;
                assert!(r.abs() < 1e-12, "{tau} {z} {r}");
                assert!(d.d1 < 0.0);
            }
        }
    }

    #[test]
    fn tau_star_example() {
        let (t, m) = min_tau_positive_secrecy(2, 1, 1.0, 1.0).unwrap();
        assert!((t - 0.8333333333333334).abs() < 1e-12);
        assert_eq!(m, 2);
        assert_eq!(optimal_z_esr(0.2, 2.0), 0.1);
    }

    #[test]
    fn median_quantile_is_center() {
        let pp = p(2.0, 0.2);
        let g = iid_moments(&pp).means;
        let r = outage_quantile_rate(&pp, 0.5, 64, OutageKind::External).unwrap();
        assert!((r - ((1.0 + g.sinr).ln() - (1.0 + g.esnr_ex).ln())).abs() < 1e-14);
        assert!(outage_quantile_rate(&pp, 1.0, 64, OutageKind::External).is_err());
    }
}
