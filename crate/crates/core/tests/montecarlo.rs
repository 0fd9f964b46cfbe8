use num_complex::Complex64;
use rzf_secrecy::montecarlo::{
    empirical_stats, instantaneous_metrics, ks_distance, quadratic_forms, run, rzf_precode, sample_channels,
    trial_rng, tridiagonal_resolvent, ChannelDraw, McConfig, Metrics, Sampler,
};
use rzf_secrecy::{analyze_user, CMatrix, Normalization, Scenario, ScenarioConfig};

fn correlated(m: usize, n: usize, l: usize) -> Scenario {
    Scenario::build(ScenarioConfig::correlated_reference(m, n, l, 0.2, 0.1, 0.35)).unwrap()
}

#[test]
fn direct_and_quadratic_form_paths_agree() {
    let sc = correlated(16, 8, 4);
    for trial in 0..20 {
        let draw = sample_channels(&sc, &mut trial_rng(3, trial));
        let pre = rzf_precode(&draw, &sc).unwrap();
        let tr: f64 = (0..sc.n()).map(|j| sc.p[j] * pre.w.column(j).norm_squared()).sum();
        assert!((pre.xi * tr - sc.m() as f64).abs() < 1e-10);
        let direct = instantaneous_metrics(&draw, &pre, &sc);
        for k in 0..sc.n() {
            let q = quadratic_forms(&draw, &pre, &sc, k).unwrap().metrics(&sc, k);
            for (a, b) in [(direct[k].sinr, q.sinr), (direct[k].esnr_ex, q.esnr_ex), (direct[k].esnr_in, q.esnr_in)] {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "trial {trial} user {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn precoder_columns_follow_leave_one_out_identity() {
    let sc = correlated(10, 5, 3);
    let draw = sample_channels(&sc, &mut trial_rng(1, 0));
    let pre = rzf_precode(&draw, &sc).unwrap();
    for k in 0..sc.n() {
        let q = quadratic_forms(&draw, &pre, &sc, k).unwrap();
        // h_k^H w_k = A_k / (1 + A_k)
        let hw = draw.h.column(k).dotc(&pre.w.column(k));
        assert!((hw.re - q.a / (1.0 + q.a)).abs() < 1e-10 && hw.im.abs() < 1e-10);
    }
}

#[test]
fn batch_kernel_matches_direct_definition() {
    // the dense kernel works in R's eigenbasis with its own sampling order, so
    // compare laws through means rather than draws
    let sc = correlated(12, 6, 3);
    let batch = run(&sc, &McConfig { trials: 4000, seed: 9, users: vec![0, 3], force_dense: true }).unwrap();
    let mut direct = vec![[0.0; 3]; 2];
    let n = 4000;
    for t in 0..n {
        let draw = sample_channels(&sc, &mut trial_rng(77, t));
        let pre = rzf_precode(&draw, &sc).unwrap();
        let m = instantaneous_metrics(&draw, &pre, &sc);
        for (u, &k) in [0usize, 3].iter().enumerate() {
            direct[u][0] += m[k].sinr / n as f64;
            direct[u][1] += m[k].esnr_ex / n as f64;
            direct[u][2] += m[k].esnr_in / n as f64;
        }
    }
    for u in 0..2 {
        let st = empirical_stats(&batch.samples[u], sc.m(), &[], None).unwrap();
        for i in 0..3 {
            let se = st.std_errors[i] * 2f64.sqrt();
            assert!((st.means[i] - direct[u][i]).abs() < 4.0 * se, "user {u} stat {i}");
        }
    }
}

#[test]
fn scalar_channel() {
    let sc = Scenario::build(ScenarioConfig::iid(1, 1, 0, 0.7, 0.25, 1.0)).unwrap();
    let h = Complex64::new(0.8, -0.3);
    let draw = ChannelDraw { h: CMatrix::from_element(1, 1, h), g: CMatrix::zeros(1, 0) };
    let pre = rzf_precode(&draw, &sc).unwrap();
    let h2 = h.norm_sqr();
    assert!((pre.w[(0, 0)] - h / (h2 + 0.7)).norm() < 1e-14);
    assert!((pre.xi - (h2 + 0.7).powi(2) / h2).abs() < 1e-12);
    let m = instantaneous_metrics(&draw, &pre, &sc);
    assert!((m[0].sinr - h2 / 0.25).abs() < 1e-12);
    assert_eq!(m[0].esnr_ex, 0.0);
}

#[test]
fn no_eavesdroppers_means_no_external_leakage() {
    let sc = correlated(8, 4, 0);
    let draw = sample_channels(&sc, &mut trial_rng(0, 0));
    assert_eq!(draw.g.ncols(), 0);
    let batch = run(&sc, &McConfig::new(50, 2, vec![1])).unwrap();
    assert!(batch.samples[0].iter().all(|s| s.esnr_ex == 0.0));
}

#[test]
fn isotropic_second_moment() {
    let sc = Scenario::build(ScenarioConfig::iid(8, 4, 2, 0.3, 0.1, 0.3)).unwrap();
    let n = 10_000;
    let vals: Vec<f64> = (0..n)
        .map(|t| sample_channels(&sc, &mut trial_rng(5, t)).h.column(0).norm_squared())
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * sd / (n as f64).sqrt());
}

#[test]
fn correlated_sample_covariance() {
    let sc = correlated(6, 3, 0);
    let n = 100_000;
    let mut acc = CMatrix::zeros(6, 6);
    for t in 0..n {
        let h = sample_channels(&sc, &mut trial_rng(11, t)).h;
        let h1 = h.column(0);
        acc += &h1 * h1.adjoint();
    }
    // X has variance 1/M, so E h h^H = t R / M; the entries' standard error is about t/(M√n)
    let target = &sc.r * Complex64::new(sc.t[0] / 6.0, 0.0);
    let est = acc / Complex64::new(n as f64, 0.0);
    for i in 0..6 {
        for j in 0..6 {
            let tol = 0.05 * target[(i, j)].norm() + 4.0 * target[(0, 0)].norm() / (n as f64).sqrt();
            assert!((est[(i, j)] - target[(i, j)]).norm() < tol, "({i},{j})");
        }
    }
}

#[test]
fn tridiagonal_recurrences_match_dense_inverse() {
    let a = [2.0, 3.1, 2.5, 4.0, 1.7];
    let b = [0.3, -0.8, 0.5, 0.9];
    let n = a.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = a[i];
        if i + 1 < n {
            m[(i, i + 1)] = b[i];
            m[(i + 1, i)] = b[i];
        }
    }
    let inv = m.clone().try_inverse().unwrap();
    let inv2 = &inv * &inv;
    let b2: Vec<f64> = b.iter().map(|v| v * v).collect();
    let s = tridiagonal_resolvent(&a, &b2);
    assert!((s.trace_inv - inv.trace()).abs() < 1e-12);
    assert!((s.trace_inv2 - inv2.trace()).abs() < 1e-12);
    assert!((s.inv_11 - inv[(0, 0)]).abs() < 1e-12);
    assert!((s.inv2_11 - inv2[(0, 0)]).abs() < 1e-12);
}

/// Two-sample KS statistic.
fn ks2(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn isotropic_fast_path_matches_dense_law() {
    let sc = Scenario::build(ScenarioConfig::iid(24, 12, 6, 0.2, 0.1, 0.3)).unwrap();
    assert!(Sampler::new(&sc, &[0], false).unwrap().is_isotropic_path());
    let n = 20_000;
    let fast = run(&sc, &McConfig::new(n, 1, vec![0])).unwrap();
    let dense = run(&sc, &McConfig { trials: n, seed: 2, users: vec![0], force_dense: true }).unwrap();
    let pick = |v: &[Metrics], f: fn(&Metrics) -> f64| v.iter().map(f).collect::<Vec<_>>();
    let getters: [fn(&Metrics) -> f64; 3] = [|m| m.sinr, |m| m.esnr_ex, |m| m.esnr_in];
    // 1% level critical value for two samples of size n
    let crit = 1.63 * (2.0 / n as f64).sqrt();
    for g in getters {
        let d = ks2(&mut pick(&fast.samples[0], g), &mut pick(&dense.samples[0], g));
        assert!(d < crit, "KS {d} vs {crit}");
    }
}

#[test]
fn batch_is_independent_of_thread_count() {
    let sc = correlated(12, 6, 3);
    let cfg = McConfig::new(1500, 42, vec![0, 5]);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&sc, &cfg).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run(&sc, &cfg).unwrap());
    assert_eq!(one.samples, four.samples);
}

#[test]
fn degenerate_batch_statistics() {
    let s = vec![Metrics { sinr: 2.0, esnr_ex: 1.0, esnr_in: 0.5 }; 200];
    let st = empirical_stats(&s, 16, &[-1.0, 0.1, 0.5, 1.0], None).unwrap();
    assert_eq!(st.cov_scaled[0][0], 0.0);
    assert!((st.ks[0] - 0.5).abs() < 1e-12);
    assert_eq!(st.sop[0].1, [0.0; 3]);
    for w in st.sop.windows(2) {
        for i in 0..3 {
            assert!(w[0].1[i] <= w[1].1[i]);
        }
    }
    let mut v = vec![0.0];
    assert!((ks_distance(&mut v) - 0.5).abs() < 1e-12);
}

#[test]
fn analytic_means_track_simulation_small() {
    let sc = correlated(32, 16, 8);
    let ua = analyze_user(&sc, 0, Normalization::FullSystem).unwrap();
    let batch = run(&sc, &McConfig::new(6000, 4, vec![0])).unwrap();
    let st = empirical_stats(&batch.samples[0], sc.m(), &[], None).unwrap();
    let g = [ua.means.sinr, ua.means.esnr_ex, ua.means.esnr_in];
    for i in 0..3 {
        assert!((st.means[i] - g[i]).abs() / g[i] < 0.06, "stat {i}: {} vs {}", st.means[i], g[i]);
    }
}
