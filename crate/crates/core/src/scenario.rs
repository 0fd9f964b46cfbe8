//! Problem instances: dimensions, correlation matrices, large-scale fading and
//! power allocation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::{CMatrix, Complex};

/// Eigenvalues below this are treated as quadrature noise and clipped to zero.
pub const PSD_CLIP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorrelationSpec {
    Identity,
    /// Uniform linear array with a Gaussian angular spread. Angles in degrees,
    /// spacing in wavelengths.
    #[serde(alias = "ula")]
    UniformLinearArray {
        #[serde(default = "one")]
        spacing: f64,
        #[serde(alias = "alpha")]
        mean_angle: f64,
        #[serde(alias = "nu")]
        spread: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        CorrelationSpec::Identity
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    /// user distance base, t_i = a^(-eta floor(i/group))
    pub a: f64,
    /// eve distance base, d_i = b^(-eta floor(i/group))
    pub b: f64,
    pub eta: f64,
    pub group: usize,
}

impl Default for FadingSpec {
    fn default() -> Self {
        FadingSpec { a: 1.0, b: 1.0, eta: 3.0, group: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub c: f64,
    pub group: usize,
}

impl Default for PowerSpec {
    fn default() -> Self {
        PowerSpec { c: 1.0, group: 1 }
    }
}

/// A validated problem instance description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub z: f64,
    pub sigma2: f64,
    pub rho2: f64,
    pub user_corr: CorrelationSpec,
    pub eve_corr: CorrelationSpec,
    pub fading: FadingSpec,
    pub power: PowerSpec,
}

/// On-disk form of a scenario; noise powers may be given linearly or as SNRs in dB.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L", default)]
    pub l: usize,
    pub z: f64,
    pub sigma2: Option<f64>,
    pub sigma2_db: Option<f64>,
    pub rho2: Option<f64>,
    pub rho2_db: Option<f64>,
    #[serde(default)]
    pub user_corr: CorrelationSpec,
    #[serde(default)]
    pub eve_corr: CorrelationSpec,
    #[serde(default)]
    pub fading: FadingSpec,
    #[serde(default)]
    pub power: PowerSpec,
}

/// Noise power for a given SNR in dB.
pub fn noise_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

fn pick_noise(name: &str, lin: Option<f64>, db: Option<f64>) -> Result<f64> {
    match (lin, db) {
        (Some(v), None) => Ok(v),
        (None, Some(db)) => Ok(noise_from_snr_db(db)),
        (Some(_), Some(_)) => Err(invalid(format!("give either {name} or {name}_db, not both"))),
        (None, None) => Err(invalid(format!("missing {name} (or {name}_db)"))),
    }
}

impl TryFrom<ScenarioFile> for ScenarioConfig {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        let cfg = ScenarioConfig {
            m: f.m,
            n: f.n,
            l: f.l,
            z: f.z,
            sigma2: pick_noise("sigma2", f.sigma2, f.sigma2_db)?,
            rho2: pick_noise("rho2", f.rho2, f.rho2_db)?,
            user_corr: f.user_corr,
            eve_corr: f.eve_corr,
            fading: f.fading,
            power: f.power,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ScenarioConfig {
    /// Uncorrelated channels, unit fading and equal power.
    pub fn iid(m: usize, n: usize, l: usize, z: f64, sigma2: f64, rho2: f64) -> Self {
        ScenarioConfig {
            m,
            n,
            l,
            z,
            sigma2,
            rho2,
            user_corr: CorrelationSpec::Identity,
            eve_corr: CorrelationSpec::Identity,
            fading: FadingSpec::default(),
            power: PowerSpec::default(),
        }
    }

    /// Correlated reference instance:
    /// ULA correlations (10°, 10°) at the BS towards users and (5°, 5°)
    /// towards eavesdroppers, grouped pathloss and geometric power.
    pub fn correlated_reference(m: usize, n: usize, l: usize, z: f64, sigma2: f64, rho2: f64) -> Self {
        ScenarioConfig {
            m,
            n,
            l,
            z,
            sigma2,
            rho2,
            user_corr: CorrelationSpec::UniformLinearArray { spacing: 1.0, mean_angle: 10.0, spread: 10.0 },
            eve_corr: CorrelationSpec::UniformLinearArray { spacing: 1.0, mean_angle: 5.0, spread: 5.0 },
            fading: FadingSpec { a: 1.0772, b: 1.1262, eta: 3.0, group: 4 },
            power: PowerSpec { c: 0.9, group: 4 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(invalid("M must be at least 1"));
        }
        if self.n == 0 {
            return Err(invalid("N must be at least 1"));
        }
        for (name, v) in [("z", self.z), ("sigma2", self.sigma2), ("rho2", self.rho2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for spec in [&self.user_corr, &self.eve_corr] {
            if let CorrelationSpec::UniformLinearArray { spacing, mean_angle, spread } = spec {
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return Err(invalid("array spacing must be > 0"));
                }
                if !mean_angle.is_finite() || !(spread.is_finite() && *spread > 0.0) {
                    return Err(invalid("angle spread must be > 0 and angles finite"));
                }
            }
        }
        let f = &self.fading;
        if !(f.a > 0.0 && f.b > 0.0 && f.eta >= 0.0 && f.a.is_finite() && f.b.is_finite() && f.eta.is_finite()) {
            return Err(invalid("fading needs a > 0, b > 0, eta >= 0"));
        }
        if f.group == 0 || self.power.group == 0 {
            return Err(invalid("group sizes must be positive"));
        }
        if !(self.power.c > 0.0 && self.power.c.is_finite()) {
            return Err(invalid("power base c must be > 0"));
        }
        Ok(())
    }

    /// τ = M/(N-1).
    pub fn tau(&self) -> f64 {
        self.m as f64 / (self.n - 1) as f64
    }

    /// θ = L/M.
    pub fn theta(&self) -> f64 {
        self.l as f64 / self.m as f64
    }
}

/// Eigen-decomposition of a Hermitian PSD matrix with clipped spectrum.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn identity(dim: usize) -> Self {
        Spectrum { values: vec![1.0; dim], vectors: CMatrix::identity(dim, dim) }
    }

    pub fn of_psd(a: &CMatrix) -> Result<Self> {
        let eig = SymmetricEigen::new(a.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_CLIP {
            return Err(Error::NotPsd(min));
        }
        Ok(Spectrum {
            values: eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect(),
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// U f(Λ) U^H.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.vectors;
        let mut scaled = u.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(j).scale_mut(s);
        }
        &scaled * u.adjoint()
    }

    /// U^H A U.
    pub fn rotate(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }
}

/// Adaptive Simpson on a complex integrand with an absolute tolerance.
fn adaptive_simpson(f: &impl Fn(f64) -> Complex, a: f64, b: f64, tol: f64) -> Complex {
    fn rec(
        f: &impl Fn(f64) -> Complex,
        a: f64,
        b: f64,
        fa: Complex,
        fm: Complex,
        fb: Complex,
        whole: Complex,
        tol: f64,
        depth: u32,
    ) -> Complex {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
        let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
        let diff = left + right - whole;
        if depth == 0 || diff.norm() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    // Seed with panels narrower than the narrowest practical angular spread so
    // the first Simpson estimate cannot step over the Gaussian bump.
    let panels = 72;
    let h = (b - a) / panels as f64;
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = lo + h;
        let fa = f(lo);
        let fm = f(0.5 * (lo + hi));
        let fb = f(hi);
        let whole = (fa + fm * 4.0 + fb) * (h / 6.0);
        acc += rec(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 48);
    }
    acc
}

/// Raw (unnormalized) angular integral for antenna offset `k = m - n`.
pub fn ula_integral(spacing: f64, mean_angle: f64, spread: f64, k: i64, tol: f64) -> Complex {
    let norm = 1.0 / (2.0 * PI * spread * spread).sqrt();
    let w = 2.0 * PI * spacing * k as f64;
    let f = |phi: f64| {
        let gauss = (-(phi - mean_angle).powi(2) / (2.0 * spread * spread)).exp() * norm;
        Complex::from_polar(gauss, w * (PI * phi / 180.0).sin())
    };
    adaptive_simpson(&f, -180.0, 180.0, tol)
}

/// Correlation matrix of the given kind, Hermitian Toeplitz with unit diagonal.
pub fn build_correlation(spec: &CorrelationSpec, dim: usize) -> Result<CMatrix> {
    if dim == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    match *spec {
        CorrelationSpec::Identity => Ok(CMatrix::identity(dim, dim)),
        CorrelationSpec::UniformLinearArray { spacing, mean_angle, spread } => {
            if !(spread > 0.0) {
                return Err(invalid("angle spread must be > 0"));
            }
            let tol = 1e-10;
            let lags: Vec<Complex> =
                (0..dim).map(|k| ula_integral(spacing, mean_angle, spread, k as i64, tol)).collect();
            let diag = lags[0].re;
            if !(diag > 0.0) {
                return Err(invalid("angular integral vanished on the diagonal"));
            }
            let mut out = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    out[(i, j)] = if i >= j { lags[i - j] / diag } else { lags[j - i].conj() / diag };
                }
                out[(i, i)] = Complex::new(1.0, 0.0);
            }
            Ok(out)
        }
    }
}

/// Outcome of the sanity checks on the standing assumptions.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub tau: f64,
    pub theta: f64,
    pub r_norm: f64,
    pub c_norm: f64,
    pub max_power: f64,
    pub r_trace: f64,
    pub t_trace: f64,
    pub d_trace: f64,
}

/// A fully materialized instance.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub r: CMatrix,
    pub c: CMatrix,
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub p: Vec<f64>,
    pub r_spectrum: Spectrum,
    pub c_spectrum: Spectrum,
    /// C expressed in the eigenbasis of R.
    pub c_in_r_basis: CMatrix,
    pub report: AssumptionReport,
}

fn group_index(i: usize, group: usize) -> f64 {
    (i / group) as f64
}

pub fn pathloss(base: f64, eta: f64, group: usize, count: usize) -> Vec<f64> {
    (0..count).map(|i| base.powf(-eta * group_index(i, group))).collect()
}

/// p_i = c^floor(i/G), rescaled so that Σ p_i = N.
pub fn power_allocation(c: f64, group: usize, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|i| c.powf(group_index(i, group))).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v * count as f64 / total).collect()
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let (m, n, l) = (config.m, config.n, config.l);
        let r = build_correlation(&config.user_corr, m)?;
        let c = build_correlation(&config.eve_corr, m)?;
        let r_spectrum = match config.user_corr {
            CorrelationSpec::Identity => Spectrum::identity(m),
            _ => Spectrum::of_psd(&r)?,
        };
        let c_spectrum = match config.eve_corr {
            CorrelationSpec::Identity => Spectrum::identity(m),
            _ => Spectrum::of_psd(&c)?,
        };
        let c_in_r_basis = match config.user_corr {
            CorrelationSpec::Identity => c.clone(),
            _ => r_spectrum.rotate(&c),
        };
        let t = pathloss(config.fading.a, config.fading.eta, config.fading.group, n);
        let d = pathloss(config.fading.b, config.fading.eta, config.fading.group, l);
        let p = power_allocation(config.power.c, config.power.group, n);

        let report = AssumptionReport {
            tau: config.tau(),
            theta: config.theta(),
            r_norm: r_spectrum.values.iter().cloned().fold(0.0, f64::max),
            c_norm: c_spectrum.values.iter().cloned().fold(0.0, f64::max),
            max_power: p.iter().cloned().fold(0.0, f64::max),
            r_trace: r_spectrum.values.iter().sum::<f64>() / m as f64,
            t_trace: t.iter().sum::<f64>() / m as f64,
            d_trace: if l > 0 { d.iter().sum::<f64>() / m as f64 } else { 0.0 },
        };
        // τ is infinite for a single user, which only the simulator accepts
        if report.tau.is_nan() || !report.theta.is_finite() {
            return Err(Error::Assumption { which: "A.1", detail: "dimension ratios not finite".into() });
        }
        if !(report.r_norm.is_finite() && report.c_norm.is_finite() && report.max_power.is_finite()) {
            return Err(Error::Assumption { which: "A.2", detail: "unbounded spectral norm".into() });
        }
        if !(report.r_trace > 0.0 && report.t_trace > 0.0 && (l == 0 || report.d_trace > 0.0)) {
            return Err(Error::Assumption { which: "A.3", detail: "normalized trace is zero".into() });
        }
        Ok(Scenario { config, r, c, t, d, p, r_spectrum, c_spectrum, c_in_r_basis, report })
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn l(&self) -> usize {
        self.config.l
    }

    /// d̄ = Tr(D)/L, zero without eavesdroppers.
    pub fn d_bar(&self) -> f64 {
        if self.d.is_empty() {
            0.0
        } else {
            self.d.iter().sum::<f64>() / self.d.len() as f64
        }
    }

    /// Tr(D²)/L.
    pub fn d2_bar(&self) -> f64 {
        if self.d.is_empty() {
            0.0
        } else {
            self.d.iter().map(|v| v * v).sum::<f64>() / self.d.len() as f64
        }
    }

    /// True when every user and eavesdropper sees the same uncorrelated statistics.
    pub fn is_isotropic(&self) -> bool {
        let flat = |v: &[f64]| v.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-14 * w[0].abs());
        self.config.user_corr == CorrelationSpec::Identity
            && self.config.eve_corr == CorrelationSpec::Identity
            && flat(&self.t)
            && flat(&self.d)
            && flat(&self.p)
    }

    /// Diagonal of C in R's eigenbasis, the only part single-weight traces need.
    pub fn c_weight(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.c_in_r_basis[(i, i)].re).collect()
    }
}

/// Real part of a Hermitian matrix's diagonal; handy in tests.
pub fn real_diagonal(a: &CMatrix) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, i)].re).collect()
}

/// Entry-wise conversion used when a real matrix is promoted to complex.
pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex::new(v, 0.0))
}
