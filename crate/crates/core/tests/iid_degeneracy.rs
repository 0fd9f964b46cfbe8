use rzf_secrecy::iid::{iid_moments, IidParams};
use rzf_secrecy::{analyze_user, Normalization, Scenario, ScenarioConfig};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Worst relative disagreement between the general and the i.i.d. route.
fn degeneracy_gap(m: usize, n: usize, l: usize, z: f64, norm: Normalization) -> f64 {
    let (s2, r2) = (0.1, 0.3);
    let sc = Scenario::build(ScenarioConfig::iid(m, n, l, z, s2, r2)).unwrap();
    let ua = analyze_user(&sc, 0, norm).unwrap();
    let mut p = IidParams::from_dims(m, n, l, z, s2, r2).unwrap();
    if norm == Normalization::FullSystem {
        p = p.with_full_system_noise(m as f64 / n as f64);
    }
    let im = iid_moments(&p);
    let pairs = [
        (ua.means.sinr, im.means.sinr),
        (ua.means.esnr_ex, im.means.esnr_ex),
        (ua.means.esnr_in, im.means.esnr_in),
        (ua.cov.u, im.cov.u),
        (ua.cov.w, im.cov.w),
        (ua.cov.z, im.cov.z),
        (ua.cov.f, im.cov.f),
        (ua.cov.j, im.cov.j),
        (ua.cov.o, im.cov.o),
    ];
    pairs.iter().map(|&(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max)
}

#[test]
fn general_route_reduces_to_closed_forms() {
    for norm in [Normalization::LeaveOneOut, Normalization::FullSystem] {
        for &z in &[0.05, 0.1, 0.2, 0.5, 1.0] {
            for &m in &[48, 64, 128] {
                for &th in &[0.25, 0.5] {
                    let l = (th * m as f64) as usize;
                    let gap = degeneracy_gap(m, 33, l, z, norm);
                    assert!(close(gap, 0.0, 1e-8), "{norm:?} z={z} M={m} L={l}: {gap:e}");
                }
            }
        }
    }
}
