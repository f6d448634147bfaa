mod oracles;

use rateloss_core::mc::{estimate_many, mc_entropy_v, mc_mmse, McQuantity};
use rateloss_core::smoothing::{QuadConfig, SmoothedChannel};
use rateloss_core::sources::{info_summary, make_source, SourceKind};

fn channel(kind: SourceKind, s: f64) -> SmoothedChannel {
    SmoothedChannel::new(make_source(kind, 1.0).unwrap(), s, QuadConfig::default()).unwrap()
}

#[test]
fn gaussian_entropies_within_interval() {
    let c = channel(SourceKind::Gaussian, 1.0);
    let est = estimate_many(&c, &[McQuantity::EntropyY, McQuantity::EntropyV], 1_000_000, 42).unwrap();
    assert!(est[0].covers(1.765_512_123_960_512), "{:?}", est[0]);
    assert!(est[1].covers(1.072_364_942_924_7), "{:?}", est[1]);
}

#[test]
fn quadrature_agrees_with_monte_carlo() {
    for kind in [SourceKind::Laplace, SourceKind::Uniform] {
        let c = channel(kind, 1.0);
        let sum = c.summary().unwrap();
        let est = estimate_many(&c, &McQuantity::ALL, 2_000_000, 42).unwrap();
        let want = [sum.mmse, sum.h_y, sum.h_v, sum.var_v];
        for (e, w) in est.iter().zip(want) {
            assert!(e.covers(w), "{kind}: {e:?} vs {w}");
        }
    }
}

#[test]
fn entropy_sum_holds_with_statistical_slack() {
    let src = make_source(SourceKind::Uniform, 1.0).unwrap();
    let h_x = info_summary(&src).unwrap().h;
    let c = channel(SourceKind::Uniform, 1.0);
    let est = estimate_many(&c, &[McQuantity::EntropyY, McQuantity::EntropyV], 1_000_000, 3).unwrap();
    let slack = 3.0 * (est[0].half_width_99 + est[1].half_width_99);
    assert!(est[0].mean + est[1].mean >= 2.0 * h_x - slack);
}

#[test]
fn interval_shrinks_with_square_root_of_samples() {
    let c = channel(SourceKind::Laplace, 0.5);
    let a = mc_mmse(&c, 250_000, 11).unwrap();
    let b = mc_mmse(&c, 1_000_000, 11).unwrap();
    let ratio = b.half_width_99 / a.half_width_99;
    assert!((0.4..=0.6).contains(&ratio), "{ratio}");
}

#[test]
fn conditional_mean_entropy_matches_change_of_variables() {
    let c = channel(SourceKind::Uniform, 1.0);
    let est = mc_entropy_v(&c, 1_000_000, 5).unwrap();
    let (_, h_v) = oracles::entropies_by_change_of_variables(oracles::Shape::Uniform, 1.0, 0.01, 4000);
    assert!(est.covers(h_v), "{est:?} vs {h_v}");
}
