//! CLT for (√M·SINR_k, √M·ESNR_ex,k, √M·ESNR_in,k).
//!
//! The means are smooth maps of the quadratic forms (A, B, E, F); their
//! covariance is the linearization a·Cov(A,B,E,F)·aᵀ. The covariances of the
//! quadratic forms reduce to higher-order resolvent traces whose deterministic
//! equivalents are the rational expressions below:
//!
//!   χ(C,C)  ≈ (1/M) Tr Q C Q R Q C Q R
//!   Γ(C)    ≈ (1/M) Tr Q R Q R Q C
//!   κ(P)    ≈ (1/M) Tr R Q H P H^H Q R Q
//!   Π(P)    ≈ (1/M) Tr (Q R Q H P H^H)²
//!   β(P,C)  ≈ (1/M) Tr Q H P H^H Q R Q C Q R
//!
//! All of them were checked against an operator-valued deterministic
//! equivalent of the corresponding resolvent chain and against simulation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::first_order::QuadraticEquivalents;
use crate::rmt::FunctionalTable;
use crate::CMatrix;

/// Below this the Δ⁻⁵ terms make the closed forms meaningless.
pub const MIN_STABILITY: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct HighOrderFunctionals {
    pub chi_cc: f64,
    pub gamma_c: f64,
    pub pi_p: f64,
    pub pi_i: f64,
    pub kappa_p: f64,
    pub kappa_i: f64,
    pub beta_pc: f64,
    pub beta_pi: f64,
    pub beta_ic: f64,
    /// (1/M) Tr C G R G C G R G
    pub zeta_cc: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoefficientSet {
    pub a: [f64; 6],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovarianceBlock {
    pub u: f64,
    pub w: f64,
    pub z: f64,
    pub f: f64,
    pub j: f64,
    pub o: f64,
}

/// Scalars of one table that every closed form uses.
struct Base {
    g: f64,
    gt: f64,
    e: f64,
    et: f64,
    zz: f64,
    zt: f64,
    d: f64,
}

impl Base {
    fn new(t: &FunctionalTable) -> Self {
        Base { g: t.gamma, gt: t.gamma_t, e: t.eta, et: t.eta_t, zz: t.zeta, zt: t.zeta_t, d: t.stability }
    }
}

/// Antenna-side weight: γ(A), η(A), ζ(A).
struct RW {
    g: f64,
    e: f64,
    z: f64,
}

impl RW {
    fn new(t: &FunctionalTable, a: &[f64]) -> Self {
        RW { g: t.gamma_w(a), e: t.eta_w(a), z: t.zeta_w(a) }
    }
}

/// User-side weight: γ̃(B), η̃(B), ζ̃(B).
struct TW {
    g: f64,
    e: f64,
    z: f64,
}

impl TW {
    fn new(t: &FunctionalTable, b: &[f64]) -> Self {
        TW { g: t.gamma_tw(b), e: t.eta_tw(b), z: t.zeta_tw(b) }
    }
}

fn gamma_fn(b: &Base, c: &RW) -> f64 {
    (c.e - (c.e * b.g - b.e * c.g) * b.gt - b.et * b.g * b.g * c.g) / b.d.powi(3)
}

fn kappa_fn(b: &Base, p: &TW) -> f64 {
    p.g * (b.e - b.et * b.g.powi(3)) / b.d.powi(3) - b.g * b.g * p.e / b.d.powi(2)
}

fn chi_fn(b: &Base, c: &RW, zeta_cc: f64) -> f64 {
    let (g, gt, e, et, d) = (b.g, b.gt, b.e, b.et, b.d);
    zeta_cc / d.powi(2)
        + 2.0 * c.z * c.g * gt / d.powi(3)
        + 2.0 * c.e * c.e * gt / d.powi(3)
        + (4.0 * gt * gt * c.g * e - 3.0 * et * g * c.g - et * gt * g * g * c.g) * c.e / d.powi(4)
        + c.g * c.g * (b.zz * gt * gt + b.zt * g * g - e * et) / d.powi(4)
        + c.g * c.g * (2.0 * e * e * gt.powi(3) + 2.0 * et * et * g.powi(3) - 3.0 * e * et * g * gt - e * et * g * g * gt * gt)
            / d.powi(5)
        + c.g * et * (c.g * e - g * c.e) / d.powi(3)
}

/// `p` carries weight B, `p2` weight B².
fn pi_fn(b: &Base, p: &TW, p2: &TW, delta: f64) -> f64 {
    let (g, gt, e, et, d) = (b.g, b.gt, b.e, b.et, b.d);
    g * g * (p2.e - delta * p2.z) / d.powi(2)
        + (2.0 * g.powi(3) * p.e * p.e + 2.0 * g.powi(3) * p.z * p.g) / d.powi(3)
        + ((b.zz + g.powi(4) * b.zt) * p.g * p.g - 4.0 * (e - g.powi(3) * et) * g * p.e * p.g) / d.powi(4)
        + 2.0 * p.g * p.g * (gt * e * e + g.powi(5) * et * et - 2.0 * g * g * e * et) / d.powi(5)
}

fn beta_fn(b: &Base, p: &TW, c: &RW) -> f64 {
    let (g, gt, e, et, d) = (b.g, b.gt, b.e, b.et, b.d);
    (2.0 * p.g * (gt * e - g * g * et) * c.e + (gt * b.zz + g.powi(3) * b.zt) * c.g * p.g
        - 2.0 * p.e * g * (c.e - (c.e * g - e * c.g) * gt - et * g * g * c.g))
        / d.powi(4)
        + (c.z * p.g + g * g * c.g * p.z) / d.powi(3)
        + 2.0 * (gt * gt * e * e + g.powi(4) * et * et - g * (1.0 + g * gt) * e * et) * c.g * p.g / d.powi(5)
}

impl HighOrderFunctionals {
    /// `c_rot` is C in R's eigenbasis, `p_k` the remaining users' powers.
    pub fn compute(table: &FunctionalTable, c_rot: &CMatrix, p_k: &[f64]) -> Result<Self> {
        if table.stability < MIN_STABILITY {
            return Err(Error::Regime(format!(
                "stability factor {:e} below {MIN_STABILITY:e}",
                table.stability
            )));
        }
        let m = table.m();
        let base = Base::new(table);
        let c_diag: Vec<f64> = (0..m).map(|i| c_rot[(i, i)].re).collect();
        let ones_m = vec![1.0; m];
        let ones_u = vec![1.0; table.user_count()];
        let p_sq: Vec<f64> = p_k.iter().map(|v| v * v).collect();
        let c = RW::new(table, &c_diag);
        let im = RW::new(table, &ones_m);
        let p = TW::new(table, p_k);
        let p2 = TW::new(table, &p_sq);
        let u = TW::new(table, &ones_u);
        let zeta_cc = table.zeta_pair(c_rot);
        Ok(HighOrderFunctionals {
            chi_cc: chi_fn(&base, &c, zeta_cc),
            gamma_c: gamma_fn(&base, &c),
            pi_p: pi_fn(&base, &p, &p2, table.delta),
            pi_i: pi_fn(&base, &u, &u, table.delta),
            kappa_p: kappa_fn(&base, &p),
            kappa_i: kappa_fn(&base, &u),
            beta_pc: beta_fn(&base, &p, &c),
            beta_pi: beta_fn(&base, &p, &im),
            beta_ic: beta_fn(&base, &u, &c),
            zeta_cc,
        })
    }
}

impl CoefficientSet {
    /// Partial derivatives of the three mean maps with respect to (A, B) for
    /// SINR, (A, E) for ESNR_ex and (A, F) for ESNR_in, at the equivalents.
    pub fn new(q: &QuadraticEquivalents, sigma2: f64, rho2: f64) -> Self {
        let (a, b, c, p) = (q.a_bar, q.b_bar, q.c_bar, q.p_k);
        let one_a = 1.0 + a;
        let den = b + sigma2 * one_a * one_a * c;
        let a1 = 2.0 * p * a * (b + sigma2 * one_a * c) / (den * den);
        let a2 = -p * a * a / (den * den);
        let a3 = -2.0 * p * q.e_bar_ext / (rho2 * c * one_a.powi(3));
        let a4 = p / (rho2 * c * one_a * one_a);
        let a5 = -2.0 * p * q.f_bar_int / (sigma2 * c * one_a.powi(3));
        let a6 = p / (sigma2 * c * one_a * one_a);
        CoefficientSet { a: [a1, a2, a3, a4, a5, a6] }
    }
}

/// Covariances of the quadratic forms (A, B, E, F) of one user, already
/// multiplied by M.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FormCovariance {
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
    pub var_e: f64,
    pub cov_ae: f64,
    pub cov_be: f64,
    pub var_f: f64,
    pub cov_af: f64,
    pub cov_bf: f64,
    pub cov_ef: f64,
}

impl FormCovariance {
    pub fn new(
        table: &FunctionalTable,
        hof: &HighOrderFunctionals,
        t_k: f64,
        theta: f64,
        d_bar: f64,
        d2_bar: f64,
        c_weight: &[f64],
    ) -> Self {
        let t2 = t_k * t_k;
        let gamma_c = if theta > 0.0 { table.gamma_w(c_weight) } else { 0.0 };
        let delta = table.stability;
        let td = theta * d_bar;
        FormCovariance {
            var_a: t2 * table.gamma / delta,
            var_b: t2 * hof.pi_p,
            cov_ab: t2 * hof.kappa_p,
            var_e: t2 * (theta * d2_bar * gamma_c * gamma_c / (delta * delta) + td * td * hof.chi_cc),
            cov_ae: t2 * td * hof.gamma_c,
            cov_be: t2 * td * hof.beta_pc,
            var_f: t2 * hof.pi_i,
            cov_af: t2 * hof.kappa_i,
            cov_bf: t2 * (hof.kappa_p - table.z * hof.beta_pi),
            cov_ef: t2 * td * hof.beta_ic,
        }
    }
}

impl CovarianceBlock {
    pub fn new(a: &CoefficientSet, s: &FormCovariance) -> Self {
        let [a1, a2, a3, a4, a5, a6] = a.a;
        CovarianceBlock {
            u: a1 * a1 * s.var_a + a2 * a2 * s.var_b + 2.0 * a1 * a2 * s.cov_ab,
            w: a3 * a3 * s.var_a + a4 * a4 * s.var_e + 2.0 * a3 * a4 * s.cov_ae,
            z: a5 * a5 * s.var_a + a6 * a6 * s.var_f + 2.0 * a5 * a6 * s.cov_af,
            f: a1 * a3 * s.var_a + a1 * a4 * s.cov_ae + a2 * a3 * s.cov_ab + a2 * a4 * s.cov_be,
            j: a1 * a5 * s.var_a + a1 * a6 * s.cov_af + a2 * a5 * s.cov_ab + a2 * a6 * s.cov_bf,
            o: a3 * a5 * s.var_a + a3 * a6 * s.cov_af + a4 * a5 * s.cov_ae + a4 * a6 * s.cov_ef,
        }
    }

    /// [[U, F, J], [F, W, O], [J, O, Z]].
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[self.u, self.f, self.j], [self.f, self.w, self.o], [self.j, self.o, self.z]]
    }

    /// Smallest eigenvalue relative to the largest diagonal entry, via the
    /// closed-form symmetric 3×3 eigenvalues.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.matrix();
        let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
        let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return q;
        }
        let mut bm = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                bm[i][k] = (m[i][k] - if i == k { q } else { 0.0 }) / p;
            }
        }
        let det = bm[0][0] * (bm[1][1] * bm[2][2] - bm[1][2] * bm[2][1])
            - bm[0][1] * (bm[1][0] * bm[2][2] - bm[1][2] * bm[2][0])
            + bm[0][2] * (bm[1][0] * bm[2][1] - bm[1][1] * bm[2][0]);
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
    }

    /// PSD up to `tol` relative to the largest diagonal entry.
    pub fn is_psd(&self, tol: f64) -> bool {
        let scale = self.u.abs().max(self.w.abs()).max(self.z.abs()).max(1.0);
        self.min_eigenvalue() >= -tol * scale
    }
}
