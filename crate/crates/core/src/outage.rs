//! Secrecy outage probabilities from the Gaussian approximation of
//! √M·(R_ex − C̄_ex, R_in − C̄_in).
//!
//! The log-rate variances follow from the SINR/ESNR covariance block by the
//! delta method. Rates are in nats.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::first_order::{rate_centers, MeanVector};
use crate::second_order::CovarianceBlock;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutageKind {
    External,
    Internal,
    Combined,
}

impl OutageKind {
    pub const ALL: [OutageKind; 3] = [OutageKind::External, OutageKind::Internal, OutageKind::Combined];

    pub fn name(self) -> &'static str {
        match self {
            OutageKind::External => "external",
            OutageKind::Internal => "internal",
            OutageKind::Combined => "combined",
        }
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(q: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

/// P(X > h, Y > k) for standard normals with correlation r (Genz' BVND).
pub fn bvn_upper_std(h: f64, k: f64, r: f64) -> f64 {
    const W: [[f64; 10]; 3] = [
        [0.1713244923791705, 0.3607615730481384, 0.4679139345726904, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.04717533638651177, 0.1069393259953183, 0.1600783285433464, 0.2031674267230659, 0.2334925365383547, 0.2491470458134029, 0.0, 0.0, 0.0, 0.0],
        [0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475, 0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183821, 0.1491729864726037, 0.1527533871307259],
    ];
    const X: [[f64; 10]; 3] = [
        [-0.9324695142031522, -0.6612093864662647, -0.2386191860831970, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [-0.9815606342467191, -0.9041172563704750, -0.7699026741943050, -0.5873179542866171, -0.3678314989981802, -0.1252334085114692, 0.0, 0.0, 0.0, 0.0],
        [-0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188, -0.7463319064601508, -0.6360536807265150, -0.5108670019508271, -0.3737060887154196, -0.2277858511416451, -0.07652652113349733],
    ];
    let tp = 2.0 * std::f64::consts::PI;
    let (ng, lg) = if r.abs() < 0.3 {
        (0, 3)
    } else if r.abs() < 0.75 {
        (1, 6)
    } else {
        (2, 10)
    };
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for i in 0..lg {
            for sgn in [-1.0, 1.0] {
                let sn = (asr * (sgn * X[ng][i] + 1.0) / 2.0).sin();
                bvn += W[ng][i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * tp) + normal_cdf(-h) * normal_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k).powi(2);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            }
            if -hk < 100.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * (tp).sqrt()
                    * normal_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for i in 0..lg {
                for sgn in [-1.0, 1.0] {
                    let xs0 = a * (sgn * X[ng][i] + 1.0);
                    let xs = xs0 * xs0;
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * W[ng][i]
                            * asr.exp()
                            * ((-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn / tp;
        }
        if r > 0.0 {
            bvn += normal_cdf(-h.max(k));
        } else {
            bvn = -bvn;
            if k > h {
                bvn += normal_cdf(k) - normal_cdf(h);
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// P(X₁ > l₁, X₂ > l₂) for X ~ N(mu, sigma) with a 2×2 covariance.
pub fn bvn_upper(mu: [f64; 2], sigma: [[f64; 2]; 2], lower: [f64; 2]) -> f64 {
    let s1 = sigma[0][0].max(0.0).sqrt();
    let s2 = sigma[1][1].max(0.0).sqrt();
    let tail = |m: f64, s: f64, l: f64| {
        if s == 0.0 {
            if m > l {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf((m - l) / s)
        }
    };
    if s1 == 0.0 || s2 == 0.0 {
        return tail(mu[0], s1, lower[0]) * tail(mu[1], s2, lower[1]);
    }
    let r = (sigma[0][1] / (s1 * s2)).clamp(-1.0, 1.0);
    bvn_upper_std((lower[0] - mu[0]) / s1, (lower[1] - mu[1]) / s2, r)
}

/// Delta-method variances of √M·(R_ex, R_in) and their centers.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeltaMethodVariances {
    pub m: usize,
    pub center_ex: f64,
    pub center_in: f64,
    pub var_ex: f64,
    pub var_in: f64,
    pub cov_ex_in: f64,
    /// no external eavesdroppers: external outage never happens
    pub no_external: bool,
}

impl DeltaMethodVariances {
    /// With `second_order_centering` the centers get the O(1/M) bias of
    /// log(1+x) from the curvature, −U/(2M(1+γ̄)²) + W/(2M(1+γ̄_ex)²) etc.
    pub fn new(m: usize, mean: &MeanVector, cov: &CovarianceBlock, no_external: bool, second_order_centering: bool) -> Self {
        let (g, ge, gi) = (mean.sinr, mean.esnr_ex, mean.esnr_in);
        let (p0, pe, pi) = (1.0 + g, 1.0 + ge, 1.0 + gi);
        let var_ex = cov.u / (p0 * p0) + cov.w / (pe * pe) - 2.0 * cov.f / (p0 * pe);
        let var_in = cov.u / (p0 * p0) + cov.z / (pi * pi) - 2.0 * cov.j / (p0 * pi);
        let cov_ex_in = cov.u / (p0 * p0) + cov.o / (pe * pi) - cov.j / (p0 * pi) - cov.f / (p0 * pe);
        let (mut center_ex, mut center_in) = rate_centers(mean);
        if second_order_centering {
            let mf = 2.0 * m as f64;
            center_ex += (-cov.u / (p0 * p0) + cov.w / (pe * pe)) / mf;
            center_in += (-cov.u / (p0 * p0) + cov.z / (pi * pi)) / mf;
        }
        DeltaMethodVariances { m, center_ex, center_in, var_ex, var_in, cov_ex_in, no_external }
    }

    fn sd(&self, var: f64) -> f64 {
        (var.max(0.0) / self.m as f64).sqrt()
    }

    /// Secrecy outage probability at target rate `rate` (nats).
    pub fn sop(&self, kind: OutageKind, rate: f64) -> f64 {
        if rate <= 0.0 {
            return 0.0;
        }
        let single = |c: f64, v: f64| {
            let s = self.sd(v);
            if s == 0.0 {
                if c < rate {
                    1.0
                } else {
                    0.0
                }
            } else {
                normal_cdf((rate - c) / s)
            }
        };
        match kind {
            OutageKind::External if self.no_external => 0.0,
            OutageKind::External => single(self.center_ex, self.var_ex),
            OutageKind::Internal => single(self.center_in, self.var_in),
            OutageKind::Combined if self.no_external => single(self.center_in, self.var_in),
            OutageKind::Combined => {
                let mf = self.m as f64;
                let sigma = [
                    [self.var_ex / mf, self.cov_ex_in / mf],
                    [self.cov_ex_in / mf, self.var_in / mf],
                ];
                1.0 - bvn_upper([self.center_ex, self.center_in], sigma, [rate, rate])
            }
        }
    }

    /// Rate whose outage probability is `q`: c + √(V/M) Φ⁻¹(q). Not defined
    /// for the combined event.
    pub fn quantile(&self, kind: OutageKind, q: f64) -> Option<f64> {
        let (c, v) = match kind {
            OutageKind::External => (self.center_ex, self.var_ex),
            OutageKind::Internal => (self.center_in, self.var_in),
            OutageKind::Combined => return None,
        };
        Some(c + self.sd(v) * normal_quantile(q))
    }
}
