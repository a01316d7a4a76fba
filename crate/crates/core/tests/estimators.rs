use approx::assert_relative_eq;
use freecs_core::estimators::*;
use freecs_core::montecarlo::{complex_gaussian, soft_threshold};
use freecs_core::replica::{solve_matched, SystemParams};
use freecs_core::scalar_channel::{mmse_bg, support_error_rate, BernoulliGaussianSource, DecoupledChannel};
use freecs_core::{Ensemble, EnsembleKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(kind: EnsembleKind, p: f64, q: f64, snr_db: f64) -> SystemParams {
    SystemParams::from_snr_db(Ensemble::new(kind, p).unwrap(), q, snr_db).unwrap()
}

const KINDS: [EnsembleKind; 2] = [EnsembleKind::IidVar1OverN, EnsembleKind::Haar];

#[test]
fn map_sbs_identity_is_single_letter_detector() {
    for snr in [0.0, 10.0, 25.0] {
        let sp = SystemParams::from_snr_db(Ensemble::identity(), 0.2, snr).unwrap();
        let r = map_sbs_performance(&sp).unwrap();
        let direct = support_error_rate(&DecoupledChannel::new(sp.source(), 1.0).unwrap()).unwrap();
        assert_relative_eq!(r.error_rate, direct, max_relative = 1e-10);
        assert_relative_eq!(r.mse, mmse_bg(&sp.source(), 1.0).unwrap(), max_relative = 1e-10);
    }
}

#[test]
fn map_sbs_iid_fixed_point_form() {
    for (p, snr) in [(0.3, 10.0), (0.5, 30.0), (0.24, 50.0)] {
        let sp = params(EnsembleKind::IidVar1OverN, p, 0.2, snr);
        for s in solve_matched(&sp).unwrap().solutions {
            assert!((1.0 / s.eta - (1.0 + s.chi) / p).abs() <= 1e-10 / s.eta);
        }
    }
}

#[test]
fn map_sbs_phase_transition_drop() {
    let d = |p: f64| map_sbs_performance(&params(EnsembleKind::Haar, p, 0.2, 50.0)).unwrap().error_rate;
    assert!(d(0.23) > 1e-3, "{}", d(0.23));
    assert!(d(0.25) < 1e-3, "{}", d(0.25));
}

#[test]
fn amp_curve_uses_rightmost_solution() {
    let sp = params(EnsembleKind::Haar, 0.24, 0.2, 50.0);
    let (sel, right) = map_sbs_reports(&sp).unwrap();
    let sols = solve_matched(&sp).unwrap();
    assert_eq!(sel.channel.eta, sols.selected().eta);
    assert_eq!(right.channel.eta, sols.rightmost().eta);
    assert_eq!(sel.multiplicity, 3);
    assert!(right.error_rate > sel.error_rate);
    assert_eq!(amp_conjectured_performance(&sp).unwrap().channel.eta, right.channel.eta);
}

#[test]
fn high_snr_examples() {
    for kind in KINDS {
        let e = Ensemble::new(kind, 0.2).unwrap();
        assert_eq!(high_snr_efficiency(&e, 0.2), 0.0);
        assert!(high_snr_mmse(&e, 0.2).is_err());
        let e = Ensemble::new(kind, 0.3).unwrap();
        let inv = -e.r_transform_inverse(high_snr_efficiency(&e, 0.2)).unwrap();
        assert!((high_snr_mmse(&e, 0.2).unwrap() - inv).abs() < 1e-12);
    }
    assert_relative_eq!(high_snr_efficiency(&Ensemble::iid(0.3).unwrap(), 0.2), 0.1, max_relative = 1e-14);
    assert_relative_eq!(high_snr_efficiency(&Ensemble::haar(0.3).unwrap(), 0.2), 0.125, max_relative = 1e-14);
    assert_relative_eq!(high_snr_mmse(&Ensemble::iid(0.3).unwrap(), 0.2).unwrap(), 2.0, max_relative = 1e-12);
    assert_relative_eq!(high_snr_mmse(&Ensemble::haar(0.3).unwrap(), 0.2).unwrap(), 1.6, max_relative = 1e-12);
}

#[test]
fn high_snr_convergence_of_map_eta() {
    for kind in KINDS {
        for (p, q) in [(0.3, 0.2), (0.5, 0.2), (0.4, 0.3), (0.3, 0.25)] {
            let e = Ensemble::new(kind, p).unwrap();
            let sp = SystemParams::new(e, q, 1e8).unwrap();
            let eta = map_sbs_performance(&sp).unwrap().channel.eta;
            let lim = high_snr_efficiency(&e, q);
            assert!((eta / lim - 1.0).abs() < 1e-2, "{kind:?} p={p} q={q}: {eta} vs {lim}");
        }
    }
}

#[test]
fn lmmse_examples() {
    for snr in [-10.0, 10.0, 40.0] {
        let r = lmmse_performance(&SystemParams::from_snr_db(Ensemble::identity(), 0.2, snr).unwrap()).unwrap();
        assert_relative_eq!(r.channel.eta, 1.0, max_relative = 1e-14);
    }
    for kind in KINDS {
        let sp = SystemParams::new(Ensemble::new(kind, 0.35).unwrap(), 0.2, 1e-9).unwrap();
        assert_relative_eq!(lmmse_performance(&sp).unwrap().channel.eta, 0.35, max_relative = 1e-6);
    }
}

#[test]
fn lmmse_closed_form_solves_general_system() {
    for kind in KINDS {
        for (p, q, snr) in [(0.4, 0.2, 20.0), (0.7, 0.1, 0.0), (0.2, 0.3, 35.0)] {
            let sp = params(kind, p, q, snr);
            let closed = lmmse_performance(&sp).unwrap();
            let fp = lmmse_fixed_point(&sp, sp.snr()).unwrap();
            assert!(fp.residual <= 1e-9);
            assert!((fp.eta - closed.channel.eta).abs() <= 1e-9 * closed.channel.eta, "{kind:?} {p}");
            assert!((fp.delta - closed.mse).abs() <= 1e-9 * closed.mse);
            assert_relative_eq!(fp.xi, sp.snr() * fp.eta, max_relative = 1e-9);
        }
    }
}

#[test]
fn iid_reductions_hold() {
    for (p, snr, gamma) in [(0.4, 20.0, 2.0), (0.6, 30.0, 10.0), (0.3, 10.0, 0.5)] {
        let sp = params(EnsembleKind::IidVar1OverN, p, 0.2, snr);
        let src = sp.source();
        let fp = lasso_fixed_point(&sp, gamma).unwrap();
        let m = LassoRule::default().mse(&src, fp.eta, fp.xi).unwrap();
        let s2 = LassoRule::default().mean_sigma2(&src, fp.eta, fp.xi).unwrap();
        assert!((1.0 / fp.eta - (1.0 + m) / p).abs() * fp.eta <= 1e-9);
        assert!((1.0 / fp.xi - (1.0 / gamma + s2) / p).abs() * fp.xi <= 1e-9);
        let fp = lmmse_fixed_point(&sp, sp.snr()).unwrap();
        let m = LmmseRule.mse(&src, fp.eta, fp.xi).unwrap();
        assert!((1.0 / fp.eta - (1.0 + m) / p).abs() * fp.eta <= 1e-9);
    }
}

#[test]
fn lasso_rule_limits() {
    let src = BernoulliGaussianSource::new(0.2, 50.0).unwrap();
    // vanishing threshold: the rule returns y, error 1/eta
    let eta = 0.3;
    assert_relative_eq!(LassoRule::default().mse(&src, eta, 1e9).unwrap(), 1.0 / eta, max_relative = 1e-6);
    let y = num_complex::Complex64::new(0.3, -0.2);
    assert!((soft_threshold(y, 1.0 / (2.0 * 1e12)) - y).norm() < 1e-12);
    // radial form: P[|Y| > 1/(2 xi)] / xi from the exponential tails
    let (xi, mu) = (0.8, eta / (1.0 + 50.0 * eta));
    let t2 = 1.0 / (4.0 * xi * xi);
    let tail = 0.2 * (-mu * t2).exp() + 0.8 * (-eta * t2).exp();
    assert_relative_eq!(LassoRule::radial().mean_sigma2(&src, eta, xi).unwrap(), tail / xi, max_relative = 1e-14);
    assert_relative_eq!(lasso_sigma2_radial(&src, eta, xi).unwrap(), tail / xi, max_relative = 1e-14);
    // the divergence form is smaller, and both tend to 1/xi as the threshold vanishes
    assert!(lasso_sigma2_divergence(&src, eta, xi).unwrap() < tail / xi);
    let big = 1e7;
    assert_relative_eq!(lasso_sigma2_divergence(&src, eta, big).unwrap() * big, 1.0, max_relative = 1e-3);
}

type Est = (f64, f64);

/// Sample means and standard errors of `E|V0 - soft(Y)|^2`, of the radial
/// `sigma^2` and of the divergence `sigma^2`.
fn lasso_mc(q: f64, px: f64, eta: f64, xi: f64, n: usize, seed: u64) -> (Est, Est, Est) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = 1.0 / (2.0 * xi);
    let (mut s, mut s2, mut a) = (0.0, 0.0, 0usize);
    let (mut d, mut d2) = (0.0, 0.0);
    for _ in 0..n {
        let v = if rng.random_bool(q) { complex_gaussian(&mut rng, px) } else { 0.0.into() };
        let y = v + complex_gaussian(&mut rng, 1.0 / eta);
        let e = (v - soft_threshold(y, t)).norm_sqr();
        s += e;
        s2 += e * e;
        if y.norm() > t {
            a += 1;
            // mean of the radial (1) and tangential (1 - t/|y|) Jacobian eigenvalues
            let div = 1.0 - t / (2.0 * y.norm());
            d += div;
            d2 += div * div;
        }
    }
    let nf = n as f64;
    let m = s / nf;
    let frac = a as f64 / nf;
    let dm = d / nf;
    (
        (m, ((s2 / nf - m * m) / nf).sqrt()),
        (frac / xi, (frac * (1.0 - frac) / nf).sqrt() / xi),
        (dm / xi, ((d2 / nf - dm * dm) / nf).sqrt() / xi),
    )
}

#[test]
fn lasso_closed_forms_against_monte_carlo() {
    let (q, px, eta, xi) = (0.2, 20.0, 0.4, 0.6);
    let src = BernoulliGaussianSource::new(q, px).unwrap();
    let ((m, se), (s2, se2), (dv, sed)) = lasso_mc(q, px, eta, xi, 1_000_000, 17);
    let d = LassoRule::default().mse(&src, eta, xi).unwrap();
    let e = lasso_sigma2_radial(&src, eta, xi).unwrap();
    let f = lasso_sigma2_divergence(&src, eta, xi).unwrap();
    assert!((m - d).abs() <= 3.0 * se, "{m} +- {se} vs {d}");
    assert!((s2 - e).abs() <= 3.0 * se2, "{s2} +- {se2} vs {e}");
    assert!((dv - f).abs() <= 3.0 * sed, "{dv} +- {sed} vs {f}");
}

#[test]
fn lasso_energy_is_expected_minimum() {
    // E[min_v xi |Y - v|^2 + |v|] by Monte Carlo against the closed form
    let (q, px, eta, xi) = (0.3, 10.0, 0.5, 0.7);
    let src = BernoulliGaussianSource::new(q, px).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let t = 1.0 / (2.0 * xi);
    let n = 400_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = if rng.random_bool(q) { complex_gaussian(&mut rng, px) } else { 0.0.into() };
        let y = v + complex_gaussian(&mut rng, 1.0 / eta);
        let vh = soft_threshold(y, t);
        let e = xi * (y - vh).norm_sqr() + vh.norm();
        s += e;
        s2 += e * e;
    }
    let m = s / n as f64;
    let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
    let c = LassoRule::default().energy(&src, eta, xi).unwrap();
    assert!((m - c).abs() <= 3.0 * se, "{m} +- {se} vs {c}");
}

#[test]
fn lasso_fixed_point_residuals_and_errors() {
    for kind in KINDS {
        for (p, snr) in [(0.4, 20.0), (0.6, 30.0), (0.25, 50.0)] {
            let sp = params(kind, p, 0.2, snr);
            for gamma in [0.1, 1.0, 30.0] {
                let fp = lasso_fixed_point(&sp, gamma).unwrap();
                assert!(fp.residual <= 1e-9, "{kind:?} p={p} g={gamma}: {}", fp.residual);
                assert!(fp.eta > 0.0 && fp.xi > 0.0 && fp.chi >= 0.0 && fp.delta >= 0.0);
                assert!(fp.multiplicity >= 1);
                assert_eq!(fp.selection_extrapolated, fp.multiplicity > 1);
            }
        }
    }
    let sp = params(EnsembleKind::Haar, 0.4, 0.2, 20.0);
    assert!(lasso_fixed_point(&sp, 0.0).is_err());
    assert!(lasso_fixed_point(&sp, f64::NAN).is_err());
}

#[test]
fn matched_functionals_collapse_to_replica_solution() {
    for kind in KINDS {
        for (p, q, snr) in [(0.4, 0.2, 20.0), (0.3, 0.1, 10.0), (0.6, 0.2, 30.0)] {
            let sp = params(kind, p, q, snr);
            let m = solve_matched(&sp).unwrap();
            let fp = mismatched_fixed_point(&sp, &PosteriorMeanRule, 1.0).unwrap();
            assert!((fp.eta - m.selected().eta).abs() <= 1e-9, "{kind:?} p={p}");
            assert!((fp.chi - m.selected().chi).abs() <= 1e-9, "{kind:?} p={p}");
            assert!((fp.xi - fp.eta).abs() <= 1e-9);
            assert!((fp.delta - fp.chi).abs() <= 1e-9);
            // the free energy reduces to I1 + log(pi e)
            let f = mismatched_free_energy(&sp, &PosteriorMeanRule, &fp).unwrap();
            let c = (std::f64::consts::PI * std::f64::consts::E).ln();
            assert!((f - m.selected().free_energy_i1 - c).abs() < 1e-9);
        }
    }
}

#[test]
fn estimator_ordering() {
    for kind in KINDS {
        for p in [0.3, 0.5, 0.8] {
            for snr in [10.0, 20.0, 30.0] {
                let sp = params(kind, p, 0.2, snr);
                let map = map_sbs_performance(&sp).unwrap().error_rate;
                let lin = lmmse_performance(&sp).unwrap().error_rate;
                let las = lasso_best_over(&sp, &lasso_gamma_grid(&sp, 20)).unwrap().error_rate;
                assert!(map <= lin + 1e-12, "{kind:?} p={p} snr={snr}: {map} {lin}");
                assert!(map <= las + 1e-12, "{kind:?} p={p} snr={snr}: {map} {las}");
            }
        }
    }
}

#[test]
fn lasso_sits_between_map_and_lmmse() {
    let sp = params(EnsembleKind::Haar, 0.6, 0.2, 20.0);
    let map = map_sbs_performance(&sp).unwrap().error_rate;
    let lin = lmmse_performance(&sp).unwrap().error_rate;
    let las = lasso_best_over(&sp, &lasso_gamma_grid(&sp, 20)).unwrap();
    assert!(map <= las.error_rate && las.error_rate <= lin, "{map} {} {lin}", las.error_rate);
    assert!(las.gamma_used.is_some());
}

#[test]
fn error_rates_non_increasing_in_snr() {
    for kind in KINDS {
        for p in [0.3, 0.6] {
            let mut last = [1.0f64; 3];
            for snr in [0.0, 10.0, 20.0, 30.0, 40.0] {
                let sp = params(kind, p, 0.2, snr);
                let grid: Vec<f64> = (0..30).map(|k| 0.05 * 1.4f64.powi(k)).collect();
                let now = [
                    map_sbs_performance(&sp).unwrap().error_rate,
                    lmmse_performance(&sp).unwrap().error_rate,
                    lasso_best_over(&sp, &grid).unwrap().error_rate,
                ];
                for k in 0..3 {
                    assert!(now[k] <= last[k] + 1e-12, "{kind:?} p={p} snr={snr} estimator {k}: {} > {}", now[k], last[k]);
                }
                last = now;
            }
        }
    }
}

#[test]
fn no_measurements() {
    let sp = params(EnsembleKind::Haar, 0.0, 0.2, 20.0);
    let r = lasso_performance(&sp, 1.0).unwrap();
    assert_eq!(r.error_rate, 0.2);
    assert_relative_eq!(r.mse, sp.snr());
    let r = lmmse_performance(&sp).unwrap();
    assert_eq!(r.error_rate, 0.2);
}
