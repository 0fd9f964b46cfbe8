use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use rzf_secrecy::checks;
use rzf_secrecy::iid::{min_tau_positive_secrecy, IidParams};
use rzf_secrecy::montecarlo::{empirical_stats, run, McConfig};
use rzf_secrecy::outage::{DeltaMethodVariances, OutageKind};
use rzf_secrecy::scenario::ScenarioFile;
use rzf_secrecy::{analyze_user, Normalization, Scenario, ScenarioConfig, SystemAnalysis};
use serde_json::json;

use crate::output::{config_hash, write_outputs, Cell, Manifest, Table, Versions, SCHEMA_VERSION};
use crate::{AnalyzeArgs, Common, McArgs, QuantileArgs, SweepArgs, SweepParam, ValidateArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rzf_secrecy::Error),
    #[error("{0}")]
    Input(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) | CliError::Input(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    let path = path.ok_or_else(|| CliError::Input("--scenario is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read scenario {}: {e}", path.display())))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("scenario {}: {e}", path.display())))?;
    Ok(ScenarioConfig::try_from(file)?)
}

fn with_workers<T: Send>(c: &Common, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match c.workers {
        Some(0) => Err(CliError::Input("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

struct Run<'a> {
    command: &'a str,
    common: &'a Common,
    started: Instant,
    scenario: serde_json::Value,
    args: serde_json::Value,
    seed: Option<u64>,
    trials: usize,
}

impl<'a> Run<'a> {
    fn new(command: &'a str, common: &'a Common, cfg: Option<&ScenarioConfig>, args: serde_json::Value) -> Self {
        let scenario = cfg.map(|c| serde_json::to_value(c).expect("config serializes")).unwrap_or(json!(null));
        let mut args = args;
        args["units"] = json!(format!("{:?}", common.units).to_lowercase());
        args["normalization"] = json!(format!("{:?}", common.normalization));
        let seed = args.get("seed").and_then(|v| v.as_u64());
        let trials = args.get("trials").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
        Run { command, common, started: Instant::now(), scenario, args, seed, trials }
    }

    fn finish(self, table: &Table, kind: &str, summary: serde_json::Value) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            schema: format!("rzf-secrecy/{kind}/v{SCHEMA_VERSION}"),
            config_hash: config_hash(&self.scenario, &self.args),
            seed: self.seed,
            trials: self.trials,
            workers: self.common.workers.unwrap_or_else(rayon::current_num_threads),
            versions: Versions::current(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            arguments: self.args,
            scenario: self.scenario,
            summary,
        };
        write_outputs(self.common.out.as_deref(), table, &manifest)?;
        Ok(())
    }
}

pub fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let cfg = load_config(a.common.scenario.as_deref())?;
    let run = Run::new("analyze", &a.common, Some(&cfg), json!({ "user": a.user }));
    let norm: Normalization = a.common.normalization.into();
    let u = a.common.units.from_nats();
    let sc = Scenario::build(cfg)?;
    let users: Vec<usize> = match a.user {
        Some(k) => vec![k],
        None => (0..sc.n()).collect(),
    };
    let sys = with_workers(&a.common, || Ok(SystemAnalysis::for_users(&sc, norm, &users)?))?;
    let mut t = Table::new(
        "analyze",
        &[
            "user", "delta", "delta_tilde", "stability", "sinr", "esnr_ex", "esnr_in", "esr_ex", "esr_in", "esr_co",
            "U", "W", "Z", "F", "J", "O", "min_eig",
        ],
    );
    for ua in &sys.users {
        t.push(vec![
            ua.k.into(),
            ua.delta.into(),
            ua.delta_tilde.into(),
            ua.stability.into(),
            ua.means.sinr.into(),
            ua.means.esnr_ex.into(),
            ua.means.esnr_in.into(),
            (ua.rates.external * u).into(),
            (ua.rates.internal * u).into(),
            (ua.rates.combined * u).into(),
            ua.cov.u.into(),
            ua.cov.w.into(),
            ua.cov.z.into(),
            ua.cov.f.into(),
            ua.cov.j.into(),
            ua.cov.o.into(),
            ua.cov.min_eigenvalue().into(),
        ]);
    }
    let summary = json!({ "c_full": sys.c_full, "delta_full": sys.full.delta, "report": sc.report });
    run.finish(&t, "analyze", summary)?;
    Ok(ExitCode::SUCCESS)
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn montecarlo(a: McArgs) -> Result<ExitCode> {
    let cfg = load_config(a.common.scenario.as_deref())?;
    if a.trials < 2 {
        return Err(CliError::Input("--trials must be at least 2".into()));
    }
    let run = Run::new(
        "montecarlo",
        &a.common,
        Some(&cfg),
        json!({ "trials": a.trials, "seed": a.seed, "grid": [a.grid.start, a.grid.stop, a.grid.step],
                "user": a.user, "second_order": a.second_order }),
    );
    let u = a.common.units.from_nats();
    let sc = Scenario::build(cfg)?;
    let ua = analyze_user(&sc, a.user, a.common.normalization.into())?;
    let dm = DeltaMethodVariances::new(sc.m(), &ua.means, &ua.cov, sc.l() == 0, a.second_order);
    let thresholds: Vec<f64> = a.grid.points();
    let nats: Vec<f64> = thresholds.iter().map(|r| r / u).collect();
    let batch = with_workers(&a.common, || Ok(run_batch(&sc, a.trials, a.seed, a.user)?))?;
    let st = empirical_stats(&batch, sc.m(), &nats, Some((&ua.means, &ua.cov)))?;
    let mut t = Table::new(
        "sop-curve",
        &["rate", "sop_ex", "sop_in", "sop_co", "emp_ex", "emp_in", "emp_co", "se_ex", "se_in", "se_co"],
    );
    for ((&r, &rn), (_, emp)) in thresholds.iter().zip(&nats).zip(&st.sop) {
        let mut row: Vec<Cell> = vec![r.into()];
        row.extend(OutageKind::ALL.iter().map(|&k| Cell::from(dm.sop(k, rn))));
        row.extend(emp.iter().map(|&p| Cell::from(p)));
        row.extend(emp.iter().map(|&p| Cell::from(binomial_se(p, st.n))));
        t.push(row);
    }
    let summary = json!({
        "analytic": { "means": ua.means, "cov": ua.cov, "rates": ua.rates, "delta_method": dm },
        "empirical": { "means": st.means, "std_errors": st.std_errors, "cov_scaled": st.cov_scaled, "ks": st.ks },
    });
    run.finish(&t, "sop-curve", summary)?;
    Ok(ExitCode::SUCCESS)
}

fn run_batch(sc: &Scenario, trials: usize, seed: u64, user: usize) -> rzf_secrecy::Result<Vec<rzf_secrecy::montecarlo::Metrics>> {
    let mut b = run(sc, &McConfig::new(trials, seed, vec![user]))?;
    Ok(b.samples.swap_remove(0))
}

fn apply_param(cfg: &ScenarioConfig, p: SweepParam, v: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match p {
        SweepParam::Z => c.z = v,
        SweepParam::Sigma2Db => c.sigma2 = rzf_secrecy::scenario::noise_from_snr_db(v),
        SweepParam::Rho2Db => c.rho2 = rzf_secrecy::scenario::noise_from_snr_db(v),
        SweepParam::M => {
            if v < 1.0 || v.fract() != 0.0 {
                return Err(CliError::Input(format!("antenna count must be a positive integer, got {v}")));
            }
            c.m = v as usize;
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let base = load_config(a.common.scenario.as_deref())?;
    let run = Run::new(
        "sweep",
        &a.common,
        Some(&base),
        json!({ "param": format!("{:?}", a.param), "grid": [a.grid.start, a.grid.stop, a.grid.step],
                "rate": a.rate, "trials": a.trials, "seed": a.seed, "user": a.user }),
    );
    let u = a.common.units.from_nats();
    let rate = a.rate / u;
    let norm: Normalization = a.common.normalization.into();
    let points = a.grid.points();
    let rows = with_workers(&a.common, || {
        points
            .par_iter()
            .map(|&v| -> Result<Vec<Cell>> {
                let cfg = apply_param(&base, a.param, v)?;
                let sc = Scenario::build(cfg.clone())?;
                let ua = analyze_user(&sc, a.user, norm)?;
                let dm = DeltaMethodVariances::new(sc.m(), &ua.means, &ua.cov, sc.l() == 0, false);
                let mut row: Vec<Cell> = vec![
                    v.into(),
                    ua.means.sinr.into(),
                    ua.means.esnr_ex.into(),
                    ua.means.esnr_in.into(),
                    (ua.rates.external * u).into(),
                    (ua.rates.internal * u).into(),
                    (ua.rates.combined * u).into(),
                ];
                row.extend(OutageKind::ALL.iter().map(|&k| Cell::from(dm.sop(k, rate))));
                if cfg.l > 0 {
                    let (tau, m_min) = min_tau_positive_secrecy(cfg.n, cfg.l, cfg.sigma2, cfg.rho2)?;
                    row.push(tau.into());
                    row.push(m_min.into());
                } else {
                    row.push(f64::NAN.into());
                    row.push("".into());
                }
                if a.trials > 0 {
                    let samples = run_batch(&sc, a.trials, a.seed, a.user)?;
                    let rates: Vec<_> = samples.iter().map(|s| s.rates()).collect();
                    let n = rates.len() as f64;
                    let cols: [fn(&rzf_secrecy::montecarlo::Rates) -> f64; 3] =
                        [|r| r.external, |r| r.internal, |r| r.combined];
                    let mut se = Vec::new();
                    for f in cols {
                        let mean = rates.iter().map(f).sum::<f64>() / n;
                        let var = rates.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        row.push((mean * u).into());
                        se.push((var / n).sqrt() * u);
                    }
                    row.extend(se.into_iter().map(Cell::from));
                    for f in cols {
                        row.push((rates.iter().filter(|r| f(r) < rate).count() as f64 / n).into());
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut cols = vec![
        "value", "sinr", "esnr_ex", "esnr_in", "esr_ex", "esr_in", "esr_co", "sop_ex", "sop_in", "sop_co",
        "tau_star", "m_min",
    ];
    if a.trials > 0 {
        cols.extend([
            "emp_esr_ex", "emp_esr_in", "emp_esr_co", "se_esr_ex", "se_esr_in", "se_esr_co", "emp_sop_ex",
            "emp_sop_in", "emp_sop_co",
        ]);
    }
    let mut t = Table::new("sweep", &cols);
    rows.into_iter().for_each(|r| t.push(r));
    run.finish(&t, "sweep", json!({ "param": format!("{:?}", a.param), "points": points.len() }))?;
    Ok(ExitCode::SUCCESS)
}

pub fn quantiles(a: QuantileArgs) -> Result<ExitCode> {
    let cfg = load_config(a.common.scenario.as_deref())?;
    let qs = a.grid.points();
    if qs.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(CliError::Input("quantile levels must lie in (0,1)".into()));
    }
    let run = Run::new(
        "quantiles",
        &a.common,
        Some(&cfg),
        json!({ "grid": [a.grid.start, a.grid.stop, a.grid.step], "trials": a.trials, "seed": a.seed }),
    );
    let sc = Scenario::build(cfg)?;
    if !sc.is_isotropic() {
        return Err(CliError::Input(
            "outage quantiles are defined for uncorrelated channels: use identity correlations with equal fading and power".into(),
        ));
    }
    let u = a.common.units.from_nats();
    let ua = analyze_user(&sc, 0, a.common.normalization.into())?;
    let dm = DeltaMethodVariances::new(sc.m(), &ua.means, &ua.cov, sc.l() == 0, false);
    let rates = if a.trials > 0 {
        let s = with_workers(&a.common, || Ok(run_batch(&sc, a.trials, a.seed, 0)?))?;
        Some(s.iter().map(|m| m.rates()).collect::<Vec<_>>())
    } else {
        None
    };
    let mut t = Table::new("outage-quantiles", &["q", "rate_ex", "rate_in", "frac_ex", "frac_in", "gap_ex", "gap_in"]);
    let mut worst: f64 = 0.0;
    for &q in &qs {
        let r_ex = if sc.l() > 0 { dm.quantile(OutageKind::External, q).unwrap() } else { f64::NAN };
        let r_in = dm.quantile(OutageKind::Internal, q).unwrap();
        let (f_ex, f_in) = match &rates {
            Some(r) => {
                let n = r.len() as f64;
                (
                    r.iter().filter(|x| x.external < r_ex).count() as f64 / n,
                    r.iter().filter(|x| x.internal < r_in).count() as f64 / n,
                )
            }
            None => (f64::NAN, f64::NAN),
        };
        let (g_ex, g_in) = ((f_ex - q).abs(), (f_in - q).abs());
        for g in [g_ex, g_in] {
            if g.is_finite() {
                worst = worst.max(g);
            }
        }
        t.push(vec![
            q.into(),
            (r_ex * u).into(),
            (r_in * u).into(),
            f_ex.into(),
            f_in.into(),
            g_ex.into(),
            g_in.into(),
        ]);
    }
    run.finish(&t, "outage-quantiles", json!({ "max_gap": if rates.is_some() { json!(worst) } else { json!(null) } }))?;
    Ok(ExitCode::SUCCESS)
}

pub fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let cfg = match &a.common.scenario {
        Some(p) => Some(load_config(Some(p))?),
        None => None,
    };
    let run = Run::new("validate", &a.common, cfg.as_ref(), json!({ "trials": a.trials, "seed": a.seed }));
    let mut t = Table::new("validate", &["check", "value", "tolerance", "pass"]);
    let mut all_ok = true;
    let mut record = |t: &mut Table, name: &str, value: f64, tol: f64| {
        let ok = value <= tol;
        all_ok &= ok;
        t.push(vec![name.into(), value.into(), tol.into(), (if ok { "true" } else { "false" }).into()]);
    };

    let mut worst: f64 = 0.0;
    for &tau in &[0.5, 1.0, 1.5, 2.0, 4.0] {
        for &z in &[0.05, 0.2, 1.0, 3.0] {
            worst = worst.max(checks::fixed_point_vs_closed_form(tau, z)?);
        }
    }
    record(&mut t, "fixed_point_vs_closed_form", worst, 1e-10);

    let mut worst: f64 = 0.0;
    for &tau in &[0.8, 2.0, 4.0] {
        for &z in &[0.05, 0.5, 2.0] {
            worst = checks::derivative_fd_errors(tau, z).into_iter().fold(worst, f64::max);
        }
    }
    record(&mut t, "delta_derivatives_vs_finite_differences", worst, 1e-6);

    let mut worst: f64 = 0.0;
    for norm in [Normalization::LeaveOneOut, Normalization::FullSystem] {
        for &z in &[0.05, 0.2, 1.0] {
            for &(m, l) in &[(48, 12), (64, 32), (128, 32)] {
                let c = ScenarioConfig::iid(m, 33, l, z, 0.1, 0.3);
                worst = worst.max(checks::degeneracy_gap(&c, norm)?);
            }
        }
    }
    record(&mut t, "general_vs_iid_closed_forms", worst, 1e-8);

    let mut worst: f64 = 0.0;
    let p = IidParams::from_dims(256, 128, 64, 0.1, 0.1, 0.4)?;
    for i in 1..10 {
        worst = worst.max(checks::quantile_inversion_error(&p, 256, i as f64 / 10.0)?);
    }
    record(&mut t, "quantile_inversion", worst, 1e-10);

    if let Some(cfg) = cfg {
        let sc = Scenario::build(cfg)?;
        let norm: Normalization = a.common.normalization.into();
        let (stab, margin) = with_workers(&a.common, || Ok(checks::scenario_psd_margin(&sc, norm)?))?;
        record(&mut t, "scenario_min_stability_deficit", (1e-8 - stab).max(0.0), 0.0);
        record(&mut t, "scenario_covariance_psd_violation", (-margin).max(0.0), 1e-8);
        if a.trials > 0 {
            let ua = analyze_user(&sc, 0, norm)?;
            let s = with_workers(&a.common, || Ok(run_batch(&sc, a.trials, a.seed, 0)?))?;
            let st = empirical_stats(&s, sc.m(), &[], None)?;
            let g = [ua.means.sinr, ua.means.esnr_ex, ua.means.esnr_in];
            let gap = (0..3)
                .filter(|&i| g[i] > 0.0)
                .map(|i| ((st.means[i] - g[i]).abs() - 4.0 * st.std_errors[i]).max(0.0) / g[i])
                .fold(0.0, f64::max);
            record(&mut t, "simulated_means_rel_gap_beyond_4se", gap, 0.05);
        }
    }
    run.finish(&t, "validate", json!({ "passed": all_ok }))?;
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
