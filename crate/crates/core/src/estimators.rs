//! Asymptotic support-recovery performance of MAP symbol-by-symbol detection,
//! thresholded linear MMSE and thresholded Lasso.
//!
//! The suboptimal estimators are analysed through the mismatched fixed-point
//! system in `(chi, delta, xi, eta)`; each scalar rule contributes the two
//! functionals `E[sigma^2(Y; xi)]` and `E|V0 - v(Y; xi)|^2`.

use statrs::function::erf::erfc;

use crate::ensembles::{Ensemble, EnsembleKind};
use crate::error::{domain, Error, Result};
use crate::quadrature::{laguerre_integral, legendre_integral};
use crate::replica::{bisect, scan_roots, solve_matched, SystemParams};
use crate::scalar_channel::{
    mmse_bg, support_error_rate, BernoulliGaussianSource, DecoupledChannel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    MapSbs,
    ThresholdedLmmse,
    ThresholdedLasso,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::MapSbs => "map_sbs",
            EstimatorKind::ThresholdedLmmse => "lmmse",
            EstimatorKind::ThresholdedLasso => "lasso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorReport {
    pub kind: EstimatorKind,
    pub channel: DecoupledChannel,
    pub error_rate: f64,
    pub mse: f64,
    pub gamma_used: Option<f64>,
    /// Number of fixed points found for the system behind this report.
    pub multiplicity: usize,
    /// True when several mismatched fixed points were ranked with the
    /// large-deviation surrogate of the free energy.
    pub selection_extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchedFixedPoint {
    pub eta: f64,
    pub xi: f64,
    pub chi: f64,
    pub delta: f64,
    pub gamma: f64,
    pub multiplicity: usize,
    pub selection_extrapolated: bool,
    /// Largest relative residual of the `chi`, `delta` and `eta` equations.
    pub residual: f64,
}

/// Scalar estimation rule `v(y; xi)` of the decoupled channel.
pub trait ScalarRule: Sync {
    /// `E[sigma^2(Y; xi)]` with `Y = V0 + eta^{-1/2} Z`.
    fn mean_sigma2(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64>;
    /// `E|V0 - v(Y; xi)|^2`.
    fn mse(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64>;
    /// Stand-in for `-E[log q(Y; xi)]` in the free energy used to rank
    /// multiple fixed points.
    fn energy(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64>;
}

/// Which `sigma^2(y; xi)` the Lasso rule feeds into the `chi` equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LassoSigma2 {
    /// `(1/xi)` times the mean divergence of complex soft thresholding,
    /// `1 - t / (2|y|)` above the threshold `t`.
    #[default]
    Divergence,
    /// `(1/xi) 1{|y| > t}`: the curvature along the radial direction only.
    Radial,
}

/// Soft thresholding at `1/(2 xi)`, the scalar rule of the Lasso.
#[derive(Debug, Clone, Copy, Default)]
pub struct LassoRule {
    pub sigma2: LassoSigma2,
}

impl LassoRule {
    pub fn radial() -> Self {
        LassoRule { sigma2: LassoSigma2::Radial }
    }
}

/// `(1/xi) P[|Y| > 1/(2 xi)]` from the two exponential tails of `|Y|^2`.
pub fn lasso_sigma2_radial(src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
    check_pos(eta, xi)?;
    let mu = eta / (1.0 + src.px * eta);
    let t2 = 1.0 / (4.0 * xi * xi);
    Ok((src.q * (-mu * t2).exp() + (1.0 - src.q) * (-eta * t2).exp()) / xi)
}

/// `(1/xi) E[1{|Y| > t} (1 - t/(2|Y|))]`, `t = 1/(2 xi)`.
pub fn lasso_sigma2_divergence(src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
    check_pos(eta, xi)?;
    let mu = eta / (1.0 + src.px * eta);
    // with l = lambda t^2: E[1{r > t^2}] = e^{-l}, t E[r^{-1/2} 1{r > t^2}] = sqrt(pi l) erfc(sqrt l)
    let branch = |lambda: f64| {
        let l = lambda / (4.0 * xi * xi);
        (-l).exp() - 0.5 * (std::f64::consts::PI * l).sqrt() * erfc(l.sqrt())
    };
    Ok((src.q * branch(mu) + (1.0 - src.q) * branch(eta)) / xi)
}

/// Linear shrinkage `xi/(1+xi) y`, the scalar rule of the linear MMSE estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct LmmseRule;

/// Posterior mean under the true prior and an assumed channel parameter `xi`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PosteriorMeanRule;

fn check_pos(eta: f64, xi: f64) -> Result<()> {
    if !(eta > 0.0 && xi > 0.0) {
        return Err(domain(format!("scalar rule needs eta > 0 and xi > 0, got ({eta}, {xi})")));
    }
    Ok(())
}

impl ScalarRule for LassoRule {
    fn mean_sigma2(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        match self.sigma2 {
            LassoSigma2::Divergence => lasso_sigma2_divergence(src, eta, xi),
            LassoSigma2::Radial => lasso_sigma2_radial(src, eta, xi),
        }
    }

    fn mse(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        let (q, px) = (src.q, src.px);
        let k = px * eta;
        let mu = eta / (1.0 + k);
        let eta_p = eta / (4.0 * xi * xi);
        let mu_p = mu / (4.0 * xi * xi);
        let pi = std::f64::consts::PI;
        let inactive = ((-eta_p).exp() - (pi * eta_p).sqrt() * erfc(eta_p.sqrt())) / eta;
        let active = ((1.0 - k) / (1.0 + k) * (-mu_p).exp()
            - (pi * mu_p).sqrt() * erfc(mu_p.sqrt()) / (1.0 + k))
            / mu;
        Ok(q * px + (1.0 - q) * inactive + q * active)
    }

    fn energy(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        let mu = eta / (1.0 + src.px * eta);
        // E[min_v xi |Y - v|^2 + |v|] for |Y|^2 exponential with rate lambda
        let branch = |lambda: f64| {
            let big_t = 1.0 / (4.0 * xi * xi);
            let e = (-lambda * big_t).exp();
            xi * (1.0 - e * (1.0 + lambda * big_t)) / lambda
                + big_t.sqrt() * e
                + 0.5 * (std::f64::consts::PI / lambda).sqrt() * erfc((lambda * big_t).sqrt())
                - e / (4.0 * xi)
        };
        Ok(src.q * branch(mu) + (1.0 - src.q) * branch(eta))
    }
}

impl ScalarRule for LmmseRule {
    fn mean_sigma2(&self, _src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        Ok(1.0 / (1.0 + xi))
    }

    fn mse(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        Ok((src.snr() + xi * xi / eta) / ((1.0 + xi) * (1.0 + xi)))
    }

    fn energy(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        Ok(xi / (1.0 + xi) * (src.snr() + 1.0 / eta))
    }
}

fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// `E[g(r)]` for `r ~ Exp(lambda)`. The posterior sigmoids make `g` steep near
/// the `breaks`, so the bulk is cut into Legendre panels there and only the
/// smooth tail goes to Laguerre.
fn exp_expectation<G: Fn(f64) -> f64>(lambda: f64, breaks: &[f64], g: &G) -> f64 {
    let mut b: Vec<f64> = breaks.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    let mut total = 0.0;
    let mut lo = 0.0;
    for &hi in &b {
        total += legendre_integral(lo, hi, |r| lambda * (-lambda * r).exp() * g(r));
        lo = hi;
    }
    total + (-lambda * lo).exp() * laguerre_integral(0.0, |u| g(lo + u / lambda))
}

/// Break points around the transition of `sigmoid(slope r - ln_c)`.
fn sigmoid_breaks(slope: f64, ln_c: f64, out: &mut Vec<f64>) {
    for k in -4..=4 {
        out.push((ln_c + 10.0 * k as f64) / slope);
    }
}

impl PosteriorMeanRule {
    fn posterior(src: &BernoulliGaussianSource, xi: f64, breaks: &mut Vec<f64>) -> impl Fn(f64) -> f64 {
        let q = src.q;
        let k = src.px * xi;
        let slope = xi * k / (1.0 + k);
        let ln_c = ((1.0 - q) / q).ln() + k.ln_1p();
        if q < 1.0 {
            sigmoid_breaks(slope, ln_c, breaks);
        }
        move |r: f64| if q == 1.0 { 1.0 } else { logistic(slope * r - ln_c) }
    }

    fn expectation<G: Fn(f64) -> f64>(src: &BernoulliGaussianSource, eta: f64, breaks: &[f64], g: G) -> f64 {
        let mu = eta / (1.0 + src.px * eta);
        src.q * exp_expectation(mu, breaks, &g) + (1.0 - src.q) * exp_expectation(eta, breaks, &g)
    }
}

impl ScalarRule for PosteriorMeanRule {
    fn mean_sigma2(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        let px = src.px;
        let w = px * xi / (1.0 + px * xi);
        let s2 = px / (1.0 + px * xi);
        let mut breaks = Vec::new();
        let post = Self::posterior(src, xi, &mut breaks);
        Ok(Self::expectation(src, eta, &breaks, |r| {
            let pi = post(r);
            pi * s2 + pi * (1.0 - pi) * w * w * r
        }))
    }

    fn mse(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        let px = src.px;
        let w_xi = px * xi / (1.0 + px * xi);
        let w_eta = px * eta / (1.0 + px * eta);
        let mut breaks = Vec::new();
        let post_xi = Self::posterior(src, xi, &mut breaks);
        let post_eta = Self::posterior(src, eta, &mut breaks);
        // E|V0|^2 - 2 E[V0^* vhat] + E|vhat|^2, with E[V0 | Y] under the true channel
        let cross = Self::expectation(src, eta, &breaks, |r| post_eta(r) * post_xi(r) * r);
        let own = Self::expectation(src, eta, &breaks, |r| {
            let p = post_xi(r);
            p * p * r
        });
        Ok((src.snr() - 2.0 * w_eta * w_xi * cross + w_xi * w_xi * own).max(0.0))
    }

    fn energy(&self, src: &BernoulliGaussianSource, eta: f64, xi: f64) -> Result<f64> {
        check_pos(eta, xi)?;
        let (q, px) = (src.q, src.px);
        let mu_xi = xi / (1.0 + px * xi);
        let mut breaks = Vec::new();
        let _ = Self::posterior(src, xi, &mut breaks);
        // -E log q(Y; xi), q(y; xi) = (1/pi)[q mu_xi e^{-mu_xi r} + (1-q) xi e^{-xi r}]
        let neg_log = |r: f64| {
            let a = q.ln() + mu_xi.ln() - mu_xi * r;
            if q == 1.0 {
                return std::f64::consts::PI.ln() - a;
            }
            let b = (1.0 - q).ln() + xi.ln() - xi * r;
            let m = a.max(b);
            std::f64::consts::PI.ln() - (m + ((a - m).exp() + (b - m).exp()).ln())
        };
        Ok(Self::expectation(src, eta, &breaks, neg_log))
    }
}

const PICARD_DAMPING: f64 = 0.5;
const PICARD_MAX_ITER: usize = 5000;
const RESIDUAL_TOL: f64 = 1e-9;
const MISMATCHED_SCAN_POINTS: usize = 600;

struct System<'a, S: ScalarRule> {
    params: &'a SystemParams,
    src: BernoulliGaussianSource,
    rule: &'a S,
    gamma: f64,
}

impl<S: ScalarRule> System<'_, S> {
    fn xi_of(&self, chi: f64) -> Result<f64> {
        Ok(self.gamma * self.params.ensemble.r_transform(-chi)?)
    }

    /// `eta` from the last equation of the system.
    fn eta_of(&self, chi: f64, delta: f64, xi: f64) -> Result<f64> {
        let r = xi / self.gamma;
        let rdot = self.params.ensemble.r_transform_derivative(-chi)?;
        Ok(r * r / (r + rdot * (delta - chi)))
    }

    fn residual(&self, eta: f64, xi: f64, chi: f64, delta: f64) -> Result<f64> {
        let rc = (chi - self.gamma * self.rule.mean_sigma2(&self.src, eta, xi)?).abs() / chi.abs().max(1.0);
        let rd = (delta - self.rule.mse(&self.src, eta, xi)?).abs() / delta.abs().max(1.0);
        let re = (eta - self.eta_of(chi, delta, xi)?).abs() / eta.abs().max(1.0);
        let rx = (xi - self.xi_of(chi)?).abs() / xi.abs().max(1.0);
        Ok(rc.max(rd).max(re).max(rx))
    }

    fn point(&self, eta: f64, xi: f64, chi: f64, delta: f64) -> Result<MismatchedFixedPoint> {
        Ok(MismatchedFixedPoint {
            eta,
            xi,
            chi,
            delta,
            gamma: self.gamma,
            multiplicity: 1,
            selection_extrapolated: false,
            residual: self.residual(eta, xi, chi, delta)?,
        })
    }

    fn picard(&self, chi0: f64, delta0: f64) -> Option<MismatchedFixedPoint> {
        let (mut chi, mut delta) = (chi0, delta0);
        let mut last_change = f64::INFINITY;
        let mut rising = 0;
        for _ in 0..PICARD_MAX_ITER {
            let xi = self.xi_of(chi).ok()?;
            let eta = self.eta_of(chi, delta, xi).ok()?;
            if !(eta > 0.0 && eta.is_finite() && xi > 0.0) {
                return None;
            }
            let chi_new = self.gamma * self.rule.mean_sigma2(&self.src, eta, xi).ok()?;
            let delta_new = self.rule.mse(&self.src, eta, xi).ok()?;
            let change = ((chi_new - chi).abs() / chi.max(1e-300)).max((delta_new - delta).abs() / delta.max(1e-300));
            if change < 1e-14 {
                let p = self.point(eta, xi, chi, delta).ok()?;
                return (p.residual <= RESIDUAL_TOL).then_some(p);
            }
            // oscillation guard: the relative change must keep shrinking
            if change >= last_change {
                rising += 1;
                if rising >= 10 {
                    return None;
                }
            } else {
                rising = 0;
            }
            last_change = change;
            chi = (1.0 - PICARD_DAMPING) * chi + PICARD_DAMPING * chi_new;
            delta = (1.0 - PICARD_DAMPING) * delta + PICARD_DAMPING * delta_new;
        }
        None
    }

    /// For fixed `eta`, the `chi` solving `chi = gamma E[sigma^2(eta, gamma R(-chi))]`.
    fn inner_chi(&self, eta: f64) -> Result<f64> {
        let k = |chi: f64| -> Result<f64> {
            let xi = self.xi_of(chi)?;
            Ok(chi - self.gamma * self.rule.mean_sigma2(&self.src, eta, xi)?)
        };
        if k(0.0)? >= 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        for _ in 0..2000 {
            if k(hi)? > 0.0 {
                break;
            }
            hi *= 2.0;
        }
        bisect(&k, 0.0, hi, 1e-15)
    }

    /// `1/eta` as produced by the system for a trial `1/eta = s`.
    fn map_inv_eta(&self, s: f64) -> Result<(f64, f64, f64, f64)> {
        let eta = 1.0 / s;
        let chi = self.inner_chi(eta)?;
        let xi = self.xi_of(chi)?;
        let delta = self.rule.mse(&self.src, eta, xi)?;
        Ok((1.0 / self.eta_of(chi, delta, xi)?, xi, chi, delta))
    }

    fn scan(&self) -> Result<Vec<MismatchedFixedPoint>> {
        let g = |s: f64| Ok(self.map_inv_eta(s)?.0 - s);
        let scale = 1.0 + self.src.snr();
        let p = self.params.p().max(1e-3);
        let roots = scan_roots(&g, 1e-6, 10.0 * scale / p, MISMATCHED_SCAN_POINTS)?;
        roots
            .into_iter()
            .map(|s| {
                let (_, xi, chi, delta) = self.map_inv_eta(s)?;
                self.point(1.0 / s, xi, chi, delta)
            })
            .collect()
    }

    /// Free energy with `-E log q(Y; xi)` replaced by the rule's energy.
    fn free_energy(&self, fp: &MismatchedFixedPoint) -> Result<f64> {
        let (g, xi, eta, chi) = (self.gamma, fp.xi, fp.eta, fp.chi);
        Ok((xi / g).ln() - xi / eta + g - xi * chi + (xi / eta - 1.0) * xi * chi / g
            + self.params.ensemble.r_transform_integral(chi)?
            + self.rule.energy(&self.src, eta, xi)?)
    }

    fn solve(&self, init: (f64, f64)) -> Result<MismatchedFixedPoint> {
        let picard = self.picard(init.0, init.1);
        let mut found = self.scan()?;
        found.retain(|f| f.residual <= RESIDUAL_TOL && f.eta > 0.0);
        match (found.len(), picard) {
            (0, Some(p)) => Ok(p),
            (0, None) => {
                let residual = self
                    .residual(1.0, self.xi_of(init.0)?, init.0, init.1)
                    .unwrap_or(f64::INFINITY);
                Err(Error::NonConvergence { what: "mismatched fixed point".into(), residual })
            }
            (1, _) => Ok(found[0]),
            (n, _) => {
                let mut best = 0;
                let mut best_e = f64::INFINITY;
                for (k, f) in found.iter().enumerate() {
                    let e = self.free_energy(f)?;
                    if e < best_e {
                        best_e = e;
                        best = k;
                    }
                }
                let mut sel = found[best];
                sel.multiplicity = n;
                sel.selection_extrapolated = true;
                Ok(sel)
            }
        }
    }
}

/// Generic solver for the mismatched system with a given scalar rule.
pub fn mismatched_fixed_point<S: ScalarRule>(
    params: &SystemParams,
    rule: &S,
    gamma: f64,
) -> Result<MismatchedFixedPoint> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma = {gamma} must be positive and finite")));
    }
    let src = params.source();
    if params.p() == 0.0 {
        // no measurements: the estimate is zero
        return Ok(MismatchedFixedPoint {
            eta: 0.0,
            xi: 0.0,
            chi: 0.0,
            delta: src.snr(),
            gamma,
            multiplicity: 1,
            selection_extrapolated: false,
            residual: 0.0,
        });
    }
    let sys = System { params, src, rule, gamma };
    // start from the linear MMSE solution
    let gl = src.snr();
    let eta_l = params.ensemble.lmmse_efficiency(gl)?;
    let xi_l = gl * eta_l;
    let chi0 = gl / (1.0 + xi_l);
    sys.solve((chi0, chi0))
}

/// Mismatched free energy at a fixed point, with the rule's energy standing in
/// for `-E[log q(Y; xi)]`.
pub fn mismatched_free_energy<S: ScalarRule>(
    params: &SystemParams,
    rule: &S,
    fp: &MismatchedFixedPoint,
) -> Result<f64> {
    let sys = System { params, src: params.source(), rule, gamma: fp.gamma };
    sys.free_energy(fp)
}

pub fn lasso_fixed_point(params: &SystemParams, gamma: f64) -> Result<MismatchedFixedPoint> {
    mismatched_fixed_point(params, &LassoRule::default(), gamma)
}

/// Linear MMSE fixed point through the generic system.
pub fn lmmse_fixed_point(params: &SystemParams, gamma: f64) -> Result<MismatchedFixedPoint> {
    mismatched_fixed_point(params, &LmmseRule, gamma)
}

fn report(
    kind: EstimatorKind,
    src: BernoulliGaussianSource,
    eta: f64,
    mse: f64,
    gamma_used: Option<f64>,
    multiplicity: usize,
    selection_extrapolated: bool,
) -> Result<EstimatorReport> {
    let channel = DecoupledChannel::new(src, eta)?;
    Ok(EstimatorReport {
        kind,
        channel,
        error_rate: support_error_rate(&channel)?,
        mse,
        gamma_used,
        multiplicity,
        selection_extrapolated,
    })
}

/// MAP-SBS reports for the free-energy-selected and the right-most fixed point.
pub fn map_sbs_reports(params: &SystemParams) -> Result<(EstimatorReport, EstimatorReport)> {
    let sols = solve_matched(params)?;
    let src = params.source();
    let n = sols.solutions.len();
    let mk = |eta: f64| -> Result<EstimatorReport> {
        report(EstimatorKind::MapSbs, src, eta, mmse_bg(&src, eta)?, None, n, false)
    };
    Ok((mk(sols.selected().eta)?, mk(sols.rightmost().eta)?))
}

pub fn map_sbs_performance(params: &SystemParams) -> Result<EstimatorReport> {
    Ok(map_sbs_reports(params)?.0)
}

/// MAP-SBS at the right-most fixed point, the conjectured message-passing curve.
pub fn amp_conjectured_performance(params: &SystemParams) -> Result<EstimatorReport> {
    Ok(map_sbs_reports(params)?.1)
}

/// High-SNR limit of the MAP-SBS decoupled `eta`; zero when `p <= q`.
pub fn high_snr_efficiency(e: &Ensemble, q: f64) -> f64 {
    let p = e.p;
    if p <= q {
        return 0.0;
    }
    match e.kind {
        EnsembleKind::IidVar1OverN => p - q,
        EnsembleKind::Haar => (p - q) / (1.0 - q),
    }
}

/// High-SNR limit of the MMSE, `-R^{-1}(eta_inf)`.
pub fn high_snr_mmse(e: &Ensemble, q: f64) -> Result<f64> {
    if e.p <= q {
        return Err(domain(format!("high-SNR MMSE diverges for p = {} <= q = {q}", e.p)));
    }
    Ok(-e.r_transform_inverse(high_snr_efficiency(e, q))?)
}

/// Thresholded linear MMSE with `gamma = q px`, from the closed-form efficiency.
pub fn lmmse_performance(params: &SystemParams) -> Result<EstimatorReport> {
    let src = params.source();
    let gamma = src.snr();
    let eta = params.ensemble.lmmse_efficiency(gamma)?;
    let xi = gamma * eta;
    let mse = if eta > 0.0 {
        (gamma + xi * xi / eta) / ((1.0 + xi) * (1.0 + xi))
    } else {
        gamma
    };
    report(EstimatorKind::ThresholdedLmmse, src, eta, mse, Some(gamma), 1, false)
}

pub fn lasso_performance(params: &SystemParams, gamma: f64) -> Result<EstimatorReport> {
    lasso_performance_with(params, &LassoRule::default(), gamma)
}

pub fn lasso_performance_with(params: &SystemParams, rule: &LassoRule, gamma: f64) -> Result<EstimatorReport> {
    let fp = mismatched_fixed_point(params, rule, gamma)?;
    report(
        EstimatorKind::ThresholdedLasso,
        params.source(),
        fp.eta,
        fp.delta,
        Some(gamma),
        fp.multiplicity,
        fp.selection_extrapolated,
    )
}

/// Geometric grid of Lasso weights used when sweeping `gamma`.
pub fn lasso_gamma_grid(params: &SystemParams, points: usize) -> Vec<f64> {
    let hi = 50.0 * (1.0 + params.snr()).sqrt() / params.p().max(1e-3);
    let lo = 0.05;
    (0..points)
        .map(|k| lo * (hi / lo).powf(k as f64 / (points.max(2) - 1) as f64))
        .collect()
}

/// Lasso report with the smallest error rate over `gammas`.
pub fn lasso_best_over(params: &SystemParams, gammas: &[f64]) -> Result<EstimatorReport> {
    lasso_best_over_with(params, &LassoRule::default(), gammas)
}

pub fn lasso_best_over_with(params: &SystemParams, rule: &LassoRule, gammas: &[f64]) -> Result<EstimatorReport> {
    let mut best: Option<EstimatorReport> = None;
    let mut last_err = None;
    for &g in gammas {
        match lasso_performance_with(params, rule, g) {
            Ok(r) => {
                if best.is_none_or(|b| r.error_rate < b.error_rate) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| domain("empty gamma grid")))
}
