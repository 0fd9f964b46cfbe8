//! Finite-size simulation of the RZF broadcast channel.
//!
//! Every trial owns a ChaCha8 stream selected by (seed, trial index), so a
//! batch is bit-identical for any number of worker threads.
//!
//! Sampling conventions: X and Y have i.i.d. CN(0, 1/M) entries, H = R^½XT^½,
//! G = C^½YD^½, and ξ is chosen so that ξ·Tr(P W^H W) = M.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::first_order::MeanVector;
use crate::outage::normal_cdf;
use crate::scenario::Scenario;
use crate::second_order::CovarianceBlock;
use crate::{CMatrix, Complex};

const BLOCK: usize = 512;

/// Instantaneous SINR and eavesdropper SNRs of one user in one trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub sinr: f64,
    pub esnr_ex: f64,
    pub esnr_in: f64,
}

/// Secrecy rates in nats, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rates {
    pub external: f64,
    pub internal: f64,
    pub combined: f64,
}

impl Metrics {
    pub fn rates(&self) -> Rates {
        let b = self.sinr.ln_1p();
        let ex = (b - self.esnr_ex.ln_1p()).max(0.0);
        let int = (b - self.esnr_in.ln_1p()).max(0.0);
        Rates { external: ex, internal: int, combined: ex.min(int) }
    }

    fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.sinr,
            1 => self.esnr_ex,
            _ => self.esnr_in,
        }
    }
}

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn cn<R: Rng>(rng: &mut R, scale: f64) -> Complex {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re * scale, im * scale)
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = (0.5 / rows as f64).sqrt();
    CMatrix::from_fn(rows, cols, |_, _| cn(rng, s))
}

#[derive(Clone, Debug)]
pub struct ChannelDraw {
    pub h: CMatrix,
    pub g: CMatrix,
}

#[derive(Clone, Debug)]
pub struct PrecoderState {
    pub w: CMatrix,
    pub xi: f64,
}

fn scale_columns(a: &mut CMatrix, s: &[f64]) {
    for (j, &v) in s.iter().enumerate() {
        a.column_mut(j).scale_mut(v);
    }
}

/// H and G in the original antenna basis, straight from the model.
pub fn sample_channels<R: Rng>(sc: &Scenario, rng: &mut R) -> ChannelDraw {
    let (m, n, l) = (sc.m(), sc.n(), sc.l());
    let r_half = sc.r_spectrum.apply(f64::sqrt);
    let c_half = sc.c_spectrum.apply(f64::sqrt);
    let mut h = &r_half * gaussian_matrix(rng, m, n);
    scale_columns(&mut h, &sc.t.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    let mut g = if l == 0 { CMatrix::zeros(m, 0) } else { &c_half * gaussian_matrix(rng, m, l) };
    scale_columns(&mut g, &sc.d.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    ChannelDraw { h, g }
}

fn regularized(a: &CMatrix, z: f64) -> CMatrix {
    let mut g = a.clone();
    for i in 0..g.nrows() {
        g[(i, i)] += Complex::new(z, 0.0);
    }
    g
}

/// W = (HH^H + zI)⁻¹H via a Cholesky solve, and ξ with ξ·Tr(P W^H W) = M.
pub fn rzf_precode(draw: &ChannelDraw, sc: &Scenario) -> Result<PrecoderState> {
    let h = &draw.h;
    let a = regularized(&(h * h.adjoint()), sc.config.z);
    let chol = a.cholesky().ok_or_else(|| Error::Regime("HH^H + zI not positive definite".into()))?;
    let w = chol.solve(h);
    let tr: f64 = (0..w.ncols()).map(|j| sc.p[j] * w.column(j).norm_squared()).sum();
    Ok(PrecoderState { xi: sc.m() as f64 / tr, w })
}

/// Metrics of every user from the defining expressions.
pub fn instantaneous_metrics(draw: &ChannelDraw, pre: &PrecoderState, sc: &Scenario) -> Vec<Metrics> {
    let hw = draw.h.adjoint() * &pre.w;
    let gw = draw.g.adjoint() * &pre.w;
    let (s2, r2) = (sc.config.sigma2, sc.config.rho2);
    (0..sc.n())
        .map(|k| {
            let sig = sc.p[k] * hw[(k, k)].norm_sqr();
            let inter: f64 = (0..sc.n()).filter(|&j| j != k).map(|j| sc.p[j] * hw[(k, j)].norm_sqr()).sum();
            let leak: f64 = (0..sc.n()).filter(|&j| j != k).map(|j| hw[(j, k)].norm_sqr()).sum();
            Metrics {
                sinr: sig / (inter + s2 / pre.xi),
                esnr_ex: pre.xi * sc.p[k] * gw.column(k).norm_squared() / r2,
                esnr_in: pre.xi * sc.p[k] * leak / s2,
            }
        })
        .collect()
}

/// Quadratic forms of user k: (A, B, E, F) with the leave-one-out resolvent,
/// and C = Tr(P W^H W)/M.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticForms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    pub f: f64,
}

pub fn quadratic_forms(draw: &ChannelDraw, pre: &PrecoderState, sc: &Scenario, k: usize) -> Result<QuadraticForms> {
    let n = sc.n();
    let hk = draw.h.column(k).into_owned();
    let others: Vec<usize> = (0..n).filter(|&j| j != k).collect();
    let h_rest = draw.h.select_columns(&others);
    let chol = regularized(&(&h_rest * h_rest.adjoint()), sc.config.z)
        .cholesky()
        .ok_or_else(|| Error::Regime("leave-one-out system not positive definite".into()))?;
    let qh = chol.solve(&hk);
    let a = hk.dotc(&qh).re;
    let hq = h_rest.adjoint() * &qh;
    let b = others.iter().enumerate().map(|(i, &j)| sc.p[j] * hq[i].norm_sqr()).sum();
    let f = hq.norm_squared();
    let e = (draw.g.adjoint() * &qh).norm_squared();
    Ok(QuadraticForms { a, b, c: 1.0 / pre.xi, e, f })
}

impl QuadraticForms {
    pub fn metrics(&self, sc: &Scenario, k: usize) -> Metrics {
        let (s2, r2) = (sc.config.sigma2, sc.config.rho2);
        let p = sc.p[k];
        let one = (1.0 + self.a).powi(2);
        Metrics {
            sinr: p * self.a * self.a / (self.b + s2 * one * self.c),
            esnr_ex: p * self.e / (r2 * self.c * one),
            esnr_in: p * self.f / (s2 * self.c * one),
        }
    }
}

/// Precomputed per-scenario state of the batch sampler.
enum Kernel {
    Dense {
        sqrt_lambda: Vec<f64>,
        sqrt_t: Vec<f64>,
        sqrt_d: Vec<f64>,
        /// U^H C^½ U with U the eigenvectors of R
        c_half_rot: CMatrix,
    },
    /// R = C = I with equal t, p, d: user statistics from the bidiagonal
    /// model of the Wishart matrix.
    Isotropic {
        diag: Vec<Gamma<f64>>,
        off: Vec<Gamma<f64>>,
        eve: Option<Gamma<f64>>,
    },
}

#[derive(Clone, Debug)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    /// users whose samples are kept (0-based)
    pub users: Vec<usize>,
    /// never take the isotropic shortcut
    pub force_dense: bool,
}

impl McConfig {
    pub fn new(trials: usize, seed: u64, users: Vec<usize>) -> Self {
        McConfig { trials, seed, users, force_dense: false }
    }
}

pub struct Sampler<'a> {
    sc: &'a Scenario,
    users: Vec<usize>,
    kernel: Kernel,
}

impl<'a> Sampler<'a> {
    pub fn new(sc: &'a Scenario, users: &[usize], force_dense: bool) -> Result<Self> {
        if users.is_empty() {
            return Err(invalid("no users selected"));
        }
        if let Some(&k) = users.iter().find(|&&k| k >= sc.n()) {
            return Err(invalid(format!("user {k} out of range, N = {}", sc.n())));
        }
        let (m, n, l) = (sc.m(), sc.n(), sc.l());
        let kernel = if !force_dense && users.len() == 1 && sc.is_isotropic() && n <= m {
            let g = |shape: f64| Gamma::new(shape, 1.0).expect("positive shape");
            Kernel::Isotropic {
                diag: (0..n).map(|i| g((m - i) as f64)).collect(),
                off: (0..n - 1).map(|i| g((n - 1 - i) as f64)).collect(),
                eve: (l > 0).then(|| g(l as f64)),
            }
        } else {
            let c_half = sc.c_spectrum.apply(f64::sqrt);
            Kernel::Dense {
                sqrt_lambda: sc.r_spectrum.values.iter().map(|v| v.sqrt()).collect(),
                sqrt_t: sc.t.iter().map(|v| v.sqrt()).collect(),
                sqrt_d: sc.d.iter().map(|v| v.sqrt()).collect(),
                c_half_rot: sc.r_spectrum.rotate(&c_half),
            }
        };
        Ok(Sampler { sc, users: users.to_vec(), kernel })
    }

    pub fn is_isotropic_path(&self) -> bool {
        matches!(self.kernel, Kernel::Isotropic { .. })
    }

    /// Metrics of the tracked users in trial `trial`.
    pub fn trial(&self, seed: u64, trial: u64) -> Result<Vec<Metrics>> {
        let mut rng = trial_rng(seed, trial);
        match &self.kernel {
            Kernel::Dense { sqrt_lambda, sqrt_t, sqrt_d, c_half_rot } => {
                self.dense(&mut rng, sqrt_lambda, sqrt_t, sqrt_d, c_half_rot)
            }
            Kernel::Isotropic { diag, off, eve } => Ok(vec![self.isotropic(&mut rng, diag, off, eve.as_ref())]),
        }
    }

    fn dense(
        &self,
        rng: &mut ChaCha8Rng,
        sqrt_lambda: &[f64],
        sqrt_t: &[f64],
        sqrt_d: &[f64],
        c_half_rot: &CMatrix,
    ) -> Result<Vec<Metrics>> {
        let sc = self.sc;
        let (m, n, l) = (sc.m(), sc.n(), sc.l());
        let z = sc.config.z;
        let s = (0.5 / m as f64).sqrt();
        let h = CMatrix::from_fn(m, n, |i, j| cn(rng, s * sqrt_lambda[i] * sqrt_t[j]));
        let y = CMatrix::from_fn(m, l, |_, j| cn(rng, s * sqrt_d[j]));
        let gram = regularized(&h.ad_mul(&h), z);
        let ginv = gram
            .cholesky()
            .ok_or_else(|| Error::Regime("H^H H + zI not positive definite".into()))?
            .inverse();
        let mut tr = 0.0;
        for j in 0..n {
            let col = ginv.column(j);
            tr += sc.p[j] * (ginv[(j, j)].re - z * col.norm_squared());
        }
        let xi = m as f64 / tr;
        let (s2, r2) = (sc.config.sigma2, sc.config.rho2);
        let mut out = Vec::with_capacity(self.users.len());
        for &k in &self.users {
            // row k of H^H W = I − zΓ⁻¹; Γ⁻¹ is Hermitian so row k is the conjugated column k
            let mut inter = 0.0;
            let mut leak = 0.0;
            let mut sig = 0.0;
            for j in 0..n {
                let v = -ginv[(j, k)] * z;
                if j == k {
                    sig = sc.p[k] * (v + 1.0).norm_sqr();
                } else {
                    inter += sc.p[j] * v.norm_sqr();
                    leak += v.norm_sqr();
                }
            }
            let esnr_ex = if l == 0 {
                0.0
            } else {
                let wk: DVector<Complex> = &h * ginv.column(k);
                let cw = c_half_rot * wk;
                (y.ad_mul(&cw)).norm_squared()
            };
            out.push(Metrics {
                sinr: sig / (inter + s2 / xi),
                esnr_ex: xi * sc.p[k] * esnr_ex / r2,
                esnr_in: xi * sc.p[k] * leak / s2,
            });
        }
        Ok(out)
    }

    fn isotropic(&self, rng: &mut ChaCha8Rng, diag: &[Gamma<f64>], off: &[Gamma<f64>], eve: Option<&Gamma<f64>>) -> Metrics {
        let sc = self.sc;
        let (m, n) = (sc.m(), sc.n());
        let mf = m as f64;
        // equal powers cancel between the signal and ξ
        let (t, d) = (sc.t[0], sc.d.first().copied().unwrap_or(0.0));
        let zs = sc.config.z / t;
        let dd: Vec<f64> = diag.iter().map(|g| g.sample(rng) / mf).collect();
        let oo: Vec<f64> = off.iter().map(|g| g.sample(rng) / mf).collect();
        let eve_gain = eve.map(|g| g.sample(rng) / mf).unwrap_or(0.0);
        // A = B^T B + z'I, tridiagonal
        let a: Vec<f64> = (0..n).map(|i| dd[i] + if i > 0 { oo[i - 1] } else { 0.0 } + zs).collect();
        let b2: Vec<f64> = (0..n - 1).map(|i| dd[i] * oo[i]).collect();
        let stats = tridiagonal_resolvent(&a, &b2);
        let (t1, t2, g11, g211) = (stats.trace_inv, stats.trace_inv2, stats.inv_11, stats.inv2_11);
        let pxi = mf * t / (t1 - zs * t2);
        let diag_hw = 1.0 - zs * g11;
        let (s2, r2) = (sc.config.sigma2, sc.config.rho2);
        Metrics {
            sinr: diag_hw * diag_hw / (zs * zs * (g211 - g11 * g11) + s2 / pxi),
            esnr_ex: pxi * d * (g11 - zs * g211) / t * eve_gain / r2,
            esnr_in: pxi * (1.0 - 2.0 * zs * g11 + zs * zs * g211 - diag_hw * diag_hw) / s2,
        }
    }
}

/// Traces and (1,1) entries of A⁻¹ and A⁻² for a symmetric tridiagonal A.
#[derive(Clone, Copy, Debug)]
pub struct TridiagonalStats {
    pub trace_inv: f64,
    pub trace_inv2: f64,
    pub inv_11: f64,
    pub inv2_11: f64,
}

/// `a` is the diagonal, `b2` the squared off-diagonal. Uses the forward and
/// backward pivot recurrences and their derivatives in the shift.
pub fn tridiagonal_resolvent(a: &[f64], b2: &[f64]) -> TridiagonalStats {
    let n = a.len();
    let mut d = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut ep = vec![0.0; n];
    d[0] = a[0];
    dp[0] = 1.0;
    for i in 1..n {
        d[i] = a[i] - b2[i - 1] / d[i - 1];
        dp[i] = 1.0 + b2[i - 1] * dp[i - 1] / (d[i - 1] * d[i - 1]);
    }
    e[n - 1] = a[n - 1];
    ep[n - 1] = 1.0;
    for i in (0..n - 1).rev() {
        e[i] = a[i] - b2[i] / e[i + 1];
        ep[i] = 1.0 + b2[i] * ep[i + 1] / (e[i + 1] * e[i + 1]);
    }
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for i in 0..n {
        let s = d[i] + e[i] - a[i];
        let sp = dp[i] + ep[i] - 1.0;
        t1 += 1.0 / s;
        t2 += sp / (s * s);
    }
    TridiagonalStats { trace_inv: t1, trace_inv2: t2, inv_11: 1.0 / e[0], inv2_11: ep[0] / (e[0] * e[0]) }
}

/// Samples of the tracked users, trial-major.
#[derive(Clone, Debug, Serialize)]
pub struct TrialBatch {
    pub m: usize,
    pub seed: u64,
    pub trials: usize,
    pub users: Vec<usize>,
    /// samples[u][t] for users[u] in trial t
    pub samples: Vec<Vec<Metrics>>,
}

pub fn run(sc: &Scenario, cfg: &McConfig) -> Result<TrialBatch> {
    let sampler = Sampler::new(sc, &cfg.users, cfg.force_dense)?;
    let blocks: Vec<(usize, usize)> =
        (0..cfg.trials).step_by(BLOCK).map(|s| (s, (s + BLOCK).min(cfg.trials))).collect();
    let results = blocks
        .par_iter()
        .map(|&(s, e)| (s..e).map(|t| sampler.trial(cfg.seed, t as u64)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut samples = vec![Vec::with_capacity(cfg.trials); cfg.users.len()];
    for block in results {
        for trial in block {
            for (u, v) in trial.into_iter().enumerate() {
                samples[u].push(v);
            }
        }
    }
    Ok(TrialBatch { m: sc.m(), seed: cfg.seed, trials: cfg.trials, users: cfg.users.clone(), samples })
}

/// Kolmogorov–Smirnov distance of a sample against N(0,1). Sorts in place.
pub fn ks_distance(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalStats {
    pub n: usize,
    /// means of (SINR, ESNR_ex, ESNR_in)
    pub means: [f64; 3],
    pub std_errors: [f64; 3],
    /// M × sample covariance
    pub cov_scaled: [[f64; 3]; 3],
    /// (threshold, [external, internal, combined]) empirical outage probabilities
    pub sop: Vec<(f64, [f64; 3])>,
    /// KS distances of normalized SINR and ESNR_ex against N(0,1)
    pub ks: [f64; 2],
}

/// Reference moments used to normalize for the KS test; without them the
/// sample mean and variance are used.
pub fn empirical_stats(
    samples: &[Metrics],
    m: usize,
    thresholds: &[f64],
    reference: Option<(&MeanVector, &CovarianceBlock)>,
) -> Result<EmpiricalStats> {
    let n = samples.len();
    if n < 2 {
        return Err(invalid("need at least two samples"));
    }
    let nf = n as f64;
    let mut means = [0.0; 3];
    for s in samples {
        for (i, mu) in means.iter_mut().enumerate() {
            *mu += s.get(i);
        }
    }
    means.iter_mut().for_each(|v| *v /= nf);
    let mut cov = [[0.0; 3]; 3];
    for s in samples {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (s.get(i) - means[i]) * (s.get(j) - means[j]);
            }
        }
    }
    let mf = m as f64;
    let mut std_errors = [0.0; 3];
    for i in 0..3 {
        std_errors[i] = (cov[i][i] / (nf - 1.0) / nf).sqrt();
        for j in 0..3 {
            cov[i][j] *= mf / (nf - 1.0);
        }
    }
    let rates: Vec<Rates> = samples.iter().map(Metrics::rates).collect();
    let sop = thresholds
        .iter()
        .map(|&r| {
            let mut c = [0usize; 3];
            for x in &rates {
                c[0] += (x.external < r) as usize;
                c[1] += (x.internal < r) as usize;
                c[2] += (x.combined < r) as usize;
            }
            (r, c.map(|v| v as f64 / nf))
        })
        .collect();
    let (centers, sds) = match reference {
        Some((g, v)) => ([g.sinr, g.esnr_ex], [(v.u / mf).sqrt(), (v.w / mf).sqrt()]),
        None => ([means[0], means[1]], [(cov[0][0] / mf).sqrt(), (cov[1][1] / mf).sqrt()]),
    };
    let mut ks = [0.0; 2];
    for i in 0..2 {
        let mut v: Vec<f64> = samples
            .iter()
            .map(|s| if sds[i] > 0.0 { (s.get(i) - centers[i]) / sds[i] } else { 0.0 })
            .collect();
        ks[i] = ks_distance(&mut v);
    }
    Ok(EmpiricalStats { n, means, std_errors, cov_scaled: cov, sop, ks })
}
