//! Per-user analysis: fixed points, means, rates and the covariance block.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::first_order::{
    c_bar, quadratic_equivalents, ErgodicSecrecyRates, MeanVector, Normalization, QuadraticEquivalents,
};
use crate::rmt::{evaluate, remove_index, solve_leave_one_out, FixedPointOptions, FixedPointSolution, FunctionalTable};
use crate::scenario::Scenario;
use crate::second_order::{CoefficientSet, CovarianceBlock, FormCovariance, HighOrderFunctionals};

#[derive(Clone, Debug, Serialize)]
pub struct UserAnalysis {
    pub k: usize,
    pub delta: f64,
    pub delta_tilde: f64,
    pub stability: f64,
    pub quad: QuadraticEquivalents,
    pub means: MeanVector,
    pub rates: ErgodicSecrecyRates,
    pub coeffs: CoefficientSet,
    pub hof: HighOrderFunctionals,
    pub forms: FormCovariance,
    pub cov: CovarianceBlock,
}

/// Analysis of a whole scenario.
#[derive(Clone, Debug)]
pub struct SystemAnalysis {
    pub normalization: Normalization,
    pub full: FixedPointSolution,
    pub full_table: FunctionalTable,
    /// C̄ of the full N-user system
    pub c_full: f64,
    pub users: Vec<UserAnalysis>,
}

impl SystemAnalysis {
    /// Analyzes every user in parallel.
    pub fn new(sc: &Scenario, norm: Normalization) -> Result<Self> {
        Self::for_users(sc, norm, &(0..sc.n()).collect::<Vec<_>>())
    }

    pub fn for_users(sc: &Scenario, norm: Normalization, users: &[usize]) -> Result<Self> {
        let opts = FixedPointOptions::default();
        let (full, full_table) = evaluate(&sc.r_spectrum.values, &sc.t, sc.config.z, opts)?;
        let c_full = c_bar(&full_table, &sc.p);
        let users = users
            .par_iter()
            .map(|&k| analyze_user_with(sc, k, norm, Some(c_full), opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemAnalysis { normalization: norm, full, full_table, c_full, users })
    }
}

/// Analysis of user `k` alone.
pub fn analyze_user(sc: &Scenario, k: usize, norm: Normalization) -> Result<UserAnalysis> {
    let opts = FixedPointOptions::default();
    let c_full = match norm {
        Normalization::FullSystem => {
            let (_, table) = evaluate(&sc.r_spectrum.values, &sc.t, sc.config.z, opts)?;
            Some(c_bar(&table, &sc.p))
        }
        Normalization::LeaveOneOut => None,
    };
    analyze_user_with(sc, k, norm, c_full, opts)
}

fn analyze_user_with(
    sc: &Scenario,
    k: usize,
    norm: Normalization,
    c_full: Option<f64>,
    opts: FixedPointOptions,
) -> Result<UserAnalysis> {
    if k >= sc.n() {
        return Err(invalid(format!("user {k} out of range, N = {}", sc.n())));
    }
    let cfg = &sc.config;
    let sol = solve_leave_one_out(&sc.r_spectrum.values, &sc.t, cfg.z, k, opts)?;
    let table = FunctionalTable::new(&sol)?;
    let quad = quadratic_equivalents(sc, k, &table, norm, c_full)?;
    let means = quad.means(cfg.sigma2, cfg.rho2);
    let rates = ErgodicSecrecyRates::from_means(&means);
    let coeffs = CoefficientSet::new(&quad, cfg.sigma2, cfg.rho2);
    let p_k = remove_index(&sc.p, k);
    let hof = HighOrderFunctionals::compute(&table, &sc.c_in_r_basis, &p_k)?;
    let forms = FormCovariance::new(&table, &hof, quad.t_k, cfg.theta(), sc.d_bar(), sc.d2_bar(), &sc.c_weight());
    let cov = CovarianceBlock::new(&coeffs, &forms);
    Ok(UserAnalysis {
        k,
        delta: table.delta,
        delta_tilde: table.delta_tilde,
        stability: table.stability,
        quad,
        means,
        rates,
        coeffs,
        hof,
        forms,
        cov,
    })
}
