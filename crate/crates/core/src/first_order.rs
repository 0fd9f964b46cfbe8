//! First-order deterministic equivalents of the quadratic forms behind SINR
//! and eavesdropper SNR, the resulting asymptotic means and ergodic secrecy
//! rates.
//!
//! With W = (HH^H + zI)^(-1) H and ξ fixing the transmit power, user k sees
//!
//!   SINR_k   = p_k A_k² / (B_k + σ²(1+A_k)² C)
//!   ESNR_ex  = p_k E_k  / (ρ² C (1+A_k)²)
//!   ESNR_in  = p_k F_k  / (σ² C (1+A_k)²)
//!
//! where A_k = h_k^H Q_k h_k, B_k = h_k^H Q_k H_k P_k H_k^H Q_k h_k,
//! E_k = h_k^H Q_k G G^H Q_k h_k, F_k = h_k^H Q_k H_k H_k^H Q_k h_k and
//! C = Tr(P W^H W)/M.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rmt::{remove_index, FunctionalTable};
use crate::scenario::Scenario;

/// Which deterministic equivalent stands in for the power normalization C.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// C̄_k from the (N-1)-user system of user k. This is the form in which the
    /// i.i.d. closed forms are usually written.
    LeaveOneOut,
    /// C̄ from the full N-user system, which is what the precoder's power
    /// constraint actually contains. Differs from C̄_k by O(1/N) and tracks
    /// finite-size simulations noticeably better.
    #[default]
    FullSystem,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticEquivalents {
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar_k: f64,
    /// the C̄ actually used, per [`Normalization`]
    pub c_bar: f64,
    pub e_bar_ext: f64,
    pub f_bar_int: f64,
    pub d_bar: f64,
    pub p_k: f64,
    pub t_k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanVector {
    pub sinr: f64,
    pub esnr_ex: f64,
    pub esnr_in: f64,
}

/// Ergodic secrecy rates in nats, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErgodicSecrecyRates {
    pub external: f64,
    pub internal: f64,
    pub combined: f64,
}

/// C̄ = γ̃(P) γ(I) / Δ for a table whose user side carries powers `p`.
pub fn c_bar(table: &FunctionalTable, p: &[f64]) -> f64 {
    let ones = vec![1.0; table.m()];
    table.gamma_tw(p) * table.gamma_w(&ones) / table.stability
}

/// Quadratic-form equivalents of user `k` from its leave-one-out table.
/// `c_full` is C̄ of the full system, required for [`Normalization::FullSystem`].
pub fn quadratic_equivalents(
    sc: &Scenario,
    k: usize,
    table_k: &FunctionalTable,
    norm: Normalization,
    c_full: Option<f64>,
) -> Result<QuadraticEquivalents> {
    let delta = table_k.stability;
    if !(delta > 0.0) {
        return Err(Error::Regime(format!("stability factor {delta:e} for user {k}")));
    }
    let p_k = remove_index(&sc.p, k);
    let ones_u = vec![1.0; sc.n() - 1];
    let t_k = sc.t[k];
    let gamma = table_k.gamma;
    let c_bar_k = c_bar(table_k, &p_k);
    let c_used = match norm {
        Normalization::LeaveOneOut => c_bar_k,
        Normalization::FullSystem => c_full.ok_or_else(|| {
            Error::InvalidInput("full-system normalization needs the full-system C".into())
        })?,
    };
    let d_bar = sc.d_bar();
    let e_bar_ext = if sc.l() == 0 {
        0.0
    } else {
        t_k * sc.config.theta() * d_bar * table_k.gamma_w(&sc.c_weight()) / delta
    };
    Ok(QuadraticEquivalents {
        a_bar: t_k * table_k.delta,
        b_bar: t_k * table_k.gamma_tw(&p_k) * gamma / delta,
        c_bar_k,
        c_bar: c_used,
        e_bar_ext,
        f_bar_int: t_k * table_k.gamma_tw(&ones_u) * gamma / delta,
        d_bar,
        p_k: sc.p[k],
        t_k,
    })
}

impl QuadraticEquivalents {
    /// Asymptotic means of (SINR, ESNR_ex, ESNR_in).
    pub fn means(&self, sigma2: f64, rho2: f64) -> MeanVector {
        let one_a = 1.0 + self.a_bar;
        let denom = self.b_bar + sigma2 * one_a * one_a * self.c_bar;
        MeanVector {
            sinr: self.p_k * self.a_bar * self.a_bar / denom,
            esnr_ex: self.p_k * self.e_bar_ext / (rho2 * self.c_bar * one_a * one_a),
            esnr_in: self.p_k * self.f_bar_int / (sigma2 * self.c_bar * one_a * one_a),
        }
    }
}

impl ErgodicSecrecyRates {
    pub fn from_means(g: &MeanVector) -> Self {
        let ex = (1.0 + g.sinr).ln() - (1.0 + g.esnr_ex).ln();
        let int = (1.0 + g.sinr).ln() - (1.0 + g.esnr_in).ln();
        ErgodicSecrecyRates { external: ex.max(0.0), internal: int.max(0.0), combined: ex.min(int).max(0.0) }
    }
}

/// Unclamped log-rate differences (C̄_ex, C̄_in) used to center outage probabilities.
pub fn rate_centers(g: &MeanVector) -> (f64, f64) {
    let base = (1.0 + g.sinr).ln();
    (base - (1.0 + g.esnr_ex).ln(), base - (1.0 + g.esnr_in).ln())
}
