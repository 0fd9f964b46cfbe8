//! Deterministic equivalents: the coupled fixed point for (δ, δ̃) and the
//! trace functionals built from G_R = (zI + δ̃R)^(-1) and G_T = (I + δT)^(-1).
//!
//! Everything on the antenna side is evaluated in the eigenbasis of R, where
//! G_R is diagonal. A weight matrix A then only enters through the diagonal of
//! U^H A U (single-weight traces) or through U^H A U itself (two-weight traces).
//! All traces are normalized by 1/M, user-side ones included.

use crate::error::{invalid, Error, Result};
use crate::CMatrix;

#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol: 1e-12, max_iter: 10_000 }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointSolution {
    pub delta: f64,
    pub delta_tilde: f64,
    pub z: f64,
    /// eigenvalues of R (clipped, ascending as delivered by the eigensolver)
    pub lambda: Vec<f64>,
    /// diagonal of the user-side matrix T the system was solved with
    pub t: Vec<f64>,
    /// eigenvalues of G_R, paired with `lambda`
    pub g_r: Vec<f64>,
    /// diagonal of G_T
    pub g_t: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    /// index of the removed user for leave-one-out systems
    pub removed: Option<usize>,
}

fn update(lambda: &[f64], t: &[f64], z: f64, delta: f64, delta_tilde: f64) -> (f64, f64) {
    let m = lambda.len() as f64;
    let d = lambda.iter().map(|&l| l / (z + delta_tilde * l)).sum::<f64>() / m;
    let dt = t.iter().map(|&ti| ti / (1.0 + delta * ti)).sum::<f64>() / m;
    (d, dt)
}

/// Iterates the composite map δ ← f(δ̃(δ)), which is increasing and concave
/// in δ, so the iteration converges monotonically from δ = 1 at rate 1 − Δ.
pub fn solve_fixed_point(lambda: &[f64], t: &[f64], z: f64, opts: FixedPointOptions) -> Result<FixedPointSolution> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid(format!("regularization z must be > 0, got {z}")));
    }
    if lambda.is_empty() {
        return Err(invalid("empty antenna spectrum"));
    }
    let mut d = 1.0;
    let mut dt = update(lambda, t, z, d, 0.0).1;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let nd = update(lambda, t, z, d, dt).0;
        dt = update(lambda, t, z, nd, 0.0).1;
        iterations += 1;
        residual = (nd - d).abs() / nd.max(1.0);
        d = nd;
        if residual <= opts.tol {
            break;
        }
    }
    if residual > opts.tol {
        return Err(Error::NoConvergence { iterations, residual });
    }
    Ok(FixedPointSolution {
        delta: d,
        delta_tilde: dt,
        z,
        lambda: lambda.to_vec(),
        t: t.to_vec(),
        g_r: lambda.iter().map(|&l| 1.0 / (z + dt * l)).collect(),
        g_t: t.iter().map(|&ti| 1.0 / (1.0 + d * ti)).collect(),
        converged: true,
        iterations,
        residual,
        removed: None,
    })
}

/// Fixed point with user `k` (0-based) removed from T.
pub fn solve_leave_one_out(
    lambda: &[f64],
    t: &[f64],
    z: f64,
    k: usize,
    opts: FixedPointOptions,
) -> Result<FixedPointSolution> {
    if t.len() < 2 {
        return Err(invalid("leave-one-out needs at least two users"));
    }
    if k >= t.len() {
        return Err(invalid(format!("user index {k} out of range for {} users", t.len())));
    }
    let tk = remove_index(t, k);
    let mut sol = solve_fixed_point(lambda, &tk, z, opts)?;
    sol.removed = Some(k);
    Ok(sol)
}

pub fn remove_index(v: &[f64], k: usize) -> Vec<f64> {
    v.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &x)| x).collect()
}

impl FixedPointSolution {
    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    /// G_R as a matrix in the original basis.
    pub fn g_r_matrix(&self, eigvecs: &CMatrix) -> CMatrix {
        let mut scaled = eigvecs.clone();
        for (j, g) in self.g_r.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*g);
        }
        &scaled * eigvecs.adjoint()
    }
}

/// Table of trace functionals for one fixed-point solution.
#[derive(Clone, Debug)]
pub struct FunctionalTable {
    pub delta: f64,
    pub delta_tilde: f64,
    pub z: f64,
    pub gamma: f64,
    pub eta: f64,
    pub zeta: f64,
    pub gamma_t: f64,
    pub eta_t: f64,
    pub zeta_t: f64,
    /// Δ = 1 − γγ̃
    pub stability: f64,
    lambda: Vec<f64>,
    g_r: Vec<f64>,
    t: Vec<f64>,
    g_t: Vec<f64>,
}

impl FunctionalTable {
    pub fn new(sol: &FixedPointSolution) -> Result<Self> {
        let m = sol.m() as f64;
        let r_moment = |j: i32, k: i32| {
            sol.lambda.iter().zip(&sol.g_r).map(|(&l, &g)| l.powi(j) * g.powi(k)).sum::<f64>() / m
        };
        let t_moment = |j: i32| sol.t.iter().zip(&sol.g_t).map(|(&t, &g)| (t * g).powi(j)).sum::<f64>() / m;
        let gamma = r_moment(2, 2);
        let gamma_t = t_moment(2);
        let stability = 1.0 - gamma * gamma_t;
        if !(stability > 0.0) {
            return Err(Error::Regime(format!("stability factor 1 - gamma*gamma_t = {stability:e} is not positive")));
        }
        Ok(FunctionalTable {
            delta: sol.delta,
            delta_tilde: sol.delta_tilde,
            z: sol.z,
            gamma,
            eta: r_moment(3, 3),
            zeta: r_moment(4, 4),
            gamma_t,
            eta_t: t_moment(3),
            zeta_t: t_moment(4),
            stability,
            lambda: sol.lambda.clone(),
            g_r: sol.g_r.clone(),
            t: sol.t.clone(),
            g_t: sol.g_t.clone(),
        })
    }

    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    fn r_weighted(&self, a: &[f64], pow_r: i32, pow_g: i32) -> f64 {
        assert_eq!(a.len(), self.lambda.len(), "antenna weight has wrong dimension");
        a.iter()
            .zip(self.lambda.iter().zip(&self.g_r))
            .map(|(&w, (&l, &g))| w * l.powi(pow_r) * g.powi(pow_g))
            .sum::<f64>()
            / self.m() as f64
    }

    fn t_weighted(&self, b: &[f64], pow: i32) -> f64 {
        assert_eq!(b.len(), self.t.len(), "user weight has wrong dimension");
        b.iter()
            .zip(self.t.iter().zip(&self.g_t))
            .map(|(&w, (&t, &g))| w * t.powi(pow - 1) * g.powi(pow))
            .sum::<f64>()
            / self.m() as f64
    }

    /// γ(A) = (1/M) Tr A G² R; `a` is the diagonal of U^H A U.
    pub fn gamma_w(&self, a: &[f64]) -> f64 {
        self.r_weighted(a, 1, 2)
    }

    /// η(A) = (1/M) Tr A G³ R².
    pub fn eta_w(&self, a: &[f64]) -> f64 {
        self.r_weighted(a, 2, 3)
    }

    /// ζ(A) = (1/M) Tr A G⁴ R³.
    pub fn zeta_w(&self, a: &[f64]) -> f64 {
        self.r_weighted(a, 3, 4)
    }

    /// γ̃(B) = (1/M) Tr B G_T² T.
    pub fn gamma_tw(&self, b: &[f64]) -> f64 {
        self.t_weighted(b, 2)
    }

    /// η̃(B) = (1/M) Tr B G_T³ T².
    pub fn eta_tw(&self, b: &[f64]) -> f64 {
        self.t_weighted(b, 3)
    }

    /// ζ̃(B) = (1/M) Tr B G_T⁴ T³.
    pub fn zeta_tw(&self, b: &[f64]) -> f64 {
        self.t_weighted(b, 4)
    }

    /// (1/M) Tr A G R G A G R G for Hermitian A given in R's eigenbasis.
    pub fn zeta_pair(&self, a_rot: &CMatrix) -> f64 {
        let m = self.m();
        assert_eq!(a_rot.nrows(), m);
        let s: Vec<f64> = self.lambda.iter().zip(&self.g_r).map(|(&l, &g)| l * g * g).collect();
        let mut acc = 0.0;
        for j in 0..m {
            let mut col = 0.0;
            for i in 0..m {
                col += a_rot[(i, j)].norm_sqr() * s[i];
            }
            acc += col * s[j];
        }
        acc / m as f64
    }

    /// (1/M) Tr A G_R for a weight diagonal in R's eigenbasis.
    pub fn trace_g(&self, a: &[f64]) -> f64 {
        self.r_weighted(a, 0, 1)
    }

    pub fn user_count(&self) -> usize {
        self.t.len()
    }
}

/// Convenience: solve and tabulate.
pub fn evaluate(lambda: &[f64], t: &[f64], z: f64, opts: FixedPointOptions) -> Result<(FixedPointSolution, FunctionalTable)> {
    let sol = solve_fixed_point(lambda, t, z, opts)?;
    let table = FunctionalTable::new(&sol)?;
    Ok((sol, table))
}
