use approx::assert_relative_eq;
use freecs_core::montecarlo::complex_gaussian;
use freecs_core::quadrature::adaptive_gk_semi_infinite;
use freecs_core::scalar_channel::*;
use freecs_core::Units;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn src(q: f64, px: f64) -> BernoulliGaussianSource {
    BernoulliGaussianSource::new(q, px).unwrap()
}

fn chan(q: f64, px: f64, eta: f64) -> DecoupledChannel {
    DecoupledChannel::new(src(q, px), eta).unwrap()
}

/// `I(V0; sqrt(a) V0 + Z) = -E log p_Y(Y) - log(pi e)`, integrated over `r = |y|^2`.
fn mutual_info_oracle(q: f64, px: f64, a: f64) -> f64 {
    let s = 1.0 + a * px;
    let pi = std::f64::consts::PI;
    let dens = |r: f64| q * (-r / s).exp() / s + (1.0 - q) * (-r).exp();
    let log_py = |r: f64| {
        let x = q.ln() - s.ln() - r / s;
        let y = (1.0 - q).ln() - r;
        let m = x.max(y);
        m + ((x - m).exp() + (y - m).exp()).ln() - pi.ln()
    };
    -adaptive_gk_semi_infinite(|r| dens(r) * log_py(r), 0.0, 1e-15, 1e-13) - (pi * std::f64::consts::E).ln()
}

#[test]
fn entropy_examples() {
    let h = binary_entropy(0.2).unwrap();
    assert!((Units::Bits.from_nats(h) - 0.7219).abs() < 5e-4);
    assert!((binary_entropy_inverse(binary_entropy(0.3).unwrap()).unwrap() - 0.3).abs() < 1e-11);
    for p in [0.0, 0.1, 0.5, 1.0] {
        assert_eq!(binary_divergence(p, p).unwrap(), 0.0);
    }
    assert!(binary_entropy(1.2).is_err());
    assert!(binary_entropy_inverse(0.8).is_err());
    assert!(binary_divergence(-0.1, 0.5).is_err());
}

#[test]
fn mutual_info_examples() {
    assert_relative_eq!(mutual_info_bg(&src(1.0, 4.0), 1.0).unwrap(), 5f64.ln(), max_relative = 1e-14);
    assert_eq!(mutual_info_bg(&src(0.2, 5.0), 0.0).unwrap(), 0.0);
    let i = mutual_info_bg(&src(0.2, 50.0), 1.0).unwrap();
    let o = mutual_info_oracle(0.2, 50.0, 1.0);
    assert!((i - o).abs() < 1e-8, "{i} vs {o}");
}

#[test]
fn mutual_info_against_oracle_on_grid() {
    for q in [0.05, 0.2, 0.5] {
        for px in [0.5, 20.0, 1e4] {
            for a in [0.01, 0.3, 2.0] {
                let i = mutual_info_bg(&src(q, px), a).unwrap();
                let o = mutual_info_oracle(q, px, a);
                assert!((i - o).abs() < 1e-8 * (1.0 + o), "q={q} px={px} a={a}: {i} vs {o}");
            }
        }
    }
}

#[test]
fn mmse_examples() {
    assert_relative_eq!(mmse_bg(&src(1.0, 3.0), 2.0).unwrap(), 3.0 / 7.0, max_relative = 1e-14);
    assert_relative_eq!(mmse_bg(&src(0.2, 5.0), 1e-12).unwrap(), 1.0, max_relative = 1e-9);
    assert_relative_eq!(mmse_bg(&src(0.2, 5.0), 0.0).unwrap(), 1.0);
}

#[test]
fn mmse_against_monte_carlo() {
    let (q, px, eta) = (0.2, 50.0, 0.5);
    let ch = chan(q, px, eta);
    let w = px * eta / (1.0 + px * eta);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = if rng.random_bool(q) { complex_gaussian(&mut rng, px) } else { 0.0.into() };
        let y = v + complex_gaussian(&mut rng, 1.0 / eta);
        let est = y * (w * posterior_active(&ch, y.norm_sqr()).unwrap());
        let e = (v - est).norm_sqr();
        s += e;
        s2 += e * e;
    }
    let m = s / n as f64;
    let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
    let exact = mmse_bg(&src(q, px), eta).unwrap();
    assert!((m - exact).abs() <= 3.0 * se, "{m} +- {se} vs {exact}");
}

#[test]
fn mmse_against_adaptive_oracle_on_grid() {
    // E[Var(V0 | Y)] by adaptive integration over r = |y|^2
    for q in [0.05, 0.2, 0.5] {
        for px in [0.5, 20.0, 1e4] {
            for eta in [0.01, 0.3, 2.0] {
                let ch = chan(q, px, eta);
                let k = px * eta;
                let w = k / (1.0 + k);
                let s2 = px / (1.0 + k);
                let mu = ch.mu();
                let g = |r: f64| {
                    let p = posterior_active(&ch, r).unwrap();
                    p * s2 + p * (1.0 - p) * w * w * r
                };
                let o = q * adaptive_gk_semi_infinite(|r| mu * (-mu * r).exp() * g(r), 0.0, 1e-16, 1e-13)
                    + (1.0 - q) * adaptive_gk_semi_infinite(|r| eta * (-eta * r).exp() * g(r), 0.0, 1e-16, 1e-13);
                let m = mmse_bg(&ch.source, eta).unwrap();
                assert!((m - o).abs() < 1e-9 * o, "q={q} px={px} eta={eta}: {m} vs {o}");
            }
        }
    }
}

#[test]
fn lerch_examples() {
    assert_relative_eq!(hurwitz_lerch_phi(0.0, 2.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
    assert_relative_eq!(hurwitz_lerch_phi(0.0, 2.0, 2.0).unwrap(), 0.25, max_relative = 1e-12);
    let o = adaptive_gk_semi_infinite(|t| t * (-0.5 * t).exp() / (1.0 + (-t).exp()), 0.0, 1e-15, 1e-14);
    assert!((hurwitz_lerch_phi(-1.0, 2.0, 0.5).unwrap() - o).abs() < 1e-9);
    assert!(hurwitz_lerch_phi(1.0, 2.0, 0.5).is_err());
}

#[test]
fn posterior_examples() {
    assert_eq!(posterior_active(&chan(1.0, 3.0, 0.4), 7.0).unwrap(), 1.0);
    assert!(posterior_active(&chan(1e-300, 3.0, 0.4), 7.0).unwrap() < 1e-290);
    // huge log-odds must not overflow
    let p = posterior_active(&chan(0.2, 1e6, 10.0), 1e9).unwrap();
    assert_eq!(p, 1.0);
    let ch = chan(0.2, 50.0, 0.5);
    let MapThreshold::Energy(tau) = map_threshold(&ch).unwrap() else { panic!() };
    assert!((posterior_active(&ch, tau).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn threshold_examples() {
    assert_eq!(map_threshold(&chan(0.9, 1.0, 0.1)).unwrap(), MapThreshold::AlwaysActive);
    let (px, eta) = (4.0, 0.7);
    let ch = chan(0.5, px, eta);
    let MapThreshold::Energy(tau) = map_threshold(&ch).unwrap() else { panic!() };
    assert_relative_eq!(tau, (1.0 + eta * px).ln() / (eta * px * ch.mu()), max_relative = 1e-14);
    assert!(map_threshold(&chan(0.5, px, 0.0)).is_err());
}

#[test]
fn error_rate_examples() {
    assert_relative_eq!(support_error_rate(&chan(0.9, 1.0, 0.1)).unwrap(), 0.1, max_relative = 1e-14);
    let mut last = 1.0;
    for px in [1e2, 1e4, 1e6, 1e8] {
        let d = support_error_rate(&chan(0.2, px, 0.3)).unwrap();
        assert!(d < last);
        last = d;
    }
    assert!(last <= 1e-3);
}

#[test]
fn error_rate_against_monte_carlo() {
    let (q, px, eta) = (0.2, 50.0, 0.5);
    let ch = chan(q, px, eta);
    let MapThreshold::Energy(tau) = map_threshold(&ch).unwrap() else { panic!() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let mut errs = 0usize;
    for _ in 0..n {
        let b = rng.random_bool(q);
        let v = if b { complex_gaussian(&mut rng, px) } else { 0.0.into() };
        let y = v + complex_gaussian(&mut rng, 1.0 / eta);
        if (y.norm_sqr() >= tau) != b {
            errs += 1;
        }
    }
    let d = support_error_rate(&ch).unwrap();
    let m = errs as f64 / n as f64;
    let se = (d * (1.0 - d) / n as f64).sqrt();
    assert!((m - d).abs() <= 3.0 * se, "{m} vs {d} (se {se})");
}

#[test]
fn error_rate_without_observation() {
    assert_eq!(support_error_rate(&chan(0.2, 5.0, 0.0)).unwrap(), 0.2);
    assert!((support_error_rate(&chan(0.2, 5.0, 1e-12)).unwrap() - 0.2).abs() < 1e-9);
}

#[test]
fn mi_derivative_is_mmse() {
    // d/da I(V0; sqrt(a) V0 + Z) = mmse at eta = a
    let s = src(0.2, 30.0);
    for a in [0.05, 0.5, 3.0] {
        let h = 1e-5 * a;
        let fd = (mutual_info_bg(&s, a + h).unwrap() - mutual_info_bg(&s, a - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, mmse_bg(&s, a).unwrap(), max_relative = 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_mmse_decreasing_and_bounded(q in 0.01f64..0.99, lpx in -1.0f64..6.0, leta in -3.0f64..2.0, f in 1.01f64..4.0) {
        let s = src(q, 10f64.powf(lpx));
        let eta = 10f64.powf(leta);
        let a = mmse_bg(&s, eta).unwrap();
        let b = mmse_bg(&s, eta * f).unwrap();
        prop_assert!(b < a);
        // the linear estimator's error dominates, and is itself below min(q px, 1/eta)
        let lin = s.snr() / (1.0 + s.snr() * eta);
        prop_assert!(a <= lin * (1.0 + 1e-10));
        prop_assert!(lin <= s.snr().min(1.0 / eta));
    }

    #[test]
    fn prop_mutual_info_concave_non_decreasing(q in 0.01f64..0.99, lpx in -1.0f64..5.0, la in -3.0f64..1.5) {
        let s = src(q, 10f64.powf(lpx));
        let a = 10f64.powf(la);
        let h = 0.05 * a;
        let (i0, i1, i2) = (
            mutual_info_bg(&s, a - h).unwrap(),
            mutual_info_bg(&s, a).unwrap(),
            mutual_info_bg(&s, a + h).unwrap(),
        );
        prop_assert!(i0 <= i1 && i1 <= i2);
        prop_assert!(i2 - 2.0 * i1 + i0 <= 1e-9 * (1.0 + i1));
    }

    #[test]
    fn prop_error_rate_range(q in 0.01f64..0.99, lpx in 0.0f64..6.0, leta in -3.0f64..2.0) {
        let px = 10f64.powf(lpx);
        let eta = 10f64.powf(leta);
        let d = support_error_rate(&chan(q, px, eta)).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        if eta * px >= 1.0 {
            prop_assert!(d <= q.min(1.0 - q) + 1e-12);
        }
    }

    #[test]
    fn prop_posterior_increasing(q in 0.01f64..0.99, lpx in -1.0f64..4.0, leta in -2.0f64..1.0, r in 0.0f64..50.0, dr in 0.01f64..5.0) {
        let ch = chan(q, 10f64.powf(lpx), 10f64.powf(leta));
        let a = posterior_active(&ch, r).unwrap();
        let b = posterior_active(&ch, r + dr).unwrap();
        prop_assert!(b >= a);
        prop_assert!(b > a || b == 1.0);
    }
}
