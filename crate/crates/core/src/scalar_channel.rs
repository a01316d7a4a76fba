//! Scalar Bernoulli-Gaussian source observed through `Y = V0 + eta^{-1/2} Z`.
//!
//! Every expectation here is a 1-D integral in `r = |y|^2`: conditioned on
//! the activity bit, `r` is exponential, so the integrals are evaluated with
//! Gauss-Laguerre rules after rescaling each branch to unit rate.

use statrs::function::gamma::gamma;

use crate::error::{domain, Result};
use crate::quadrature::laguerre_integral;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliGaussianSource {
    pub q: f64,
    pub px: f64,
}

impl BernoulliGaussianSource {
    pub fn new(q: f64, px: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(domain(format!("activity probability q = {q} outside (0, 1]")));
        }
        if !(px > 0.0 && px.is_finite()) {
            return Err(domain(format!("power px = {px} must be positive and finite")));
        }
        Ok(BernoulliGaussianSource { q, px })
    }

    /// Source whose per-component SNR `q * px` equals `snr_db`.
    pub fn from_snr_db(q: f64, snr_db: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(domain(format!("activity probability q = {q} outside (0, 1]")));
        }
        Self::new(q, 10f64.powf(snr_db / 10.0) / q)
    }

    /// `E|V0|^2`.
    pub fn snr(&self) -> f64 {
        self.q * self.px
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoupledChannel {
    pub source: BernoulliGaussianSource,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapThreshold {
    /// Declare active when `|y|^2 >= tau`.
    Energy(f64),
    /// Posterior is above 1/2 for every observation.
    AlwaysActive,
}

impl DecoupledChannel {
    pub fn new(source: BernoulliGaussianSource, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(domain(format!("channel parameter eta = {eta} must be >= 0")));
        }
        Ok(DecoupledChannel { source, eta })
    }

    pub fn mu(&self) -> f64 {
        self.eta / (1.0 + self.source.px * self.eta)
    }

    /// `ln c` with `c = ((1-q)/q)(1 + eta px)`, the prior log-odds against activity
    /// corrected by the variance ratio.
    fn ln_c(&self) -> f64 {
        let q = self.source.q;
        ((1.0 - q) / q).ln() + (self.source.px * self.eta).ln_1p()
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    Ok(xlnx_neg(x) + xlnx_neg(1.0 - x))
}

fn xlnx_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Inverse of the binary entropy on `[0, 1/2]`, by bisection to 1e-12.
pub fn binary_entropy_inverse(y: f64) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    if !(y >= -1e-12 && y <= ln2 + 1e-12) {
        return Err(domain(format!("binary entropy value {y} outside [0, ln 2]")));
    }
    let y = y.clamp(0.0, ln2);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `d(a || b)` in nats.
pub fn binary_divergence(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(domain(format!("binary divergence arguments ({a}, {b}) outside [0, 1]")));
    }
    let term = |x: f64, y: f64| {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x * (x / y).ln()
        }
    };
    Ok(term(a, b) + term(1.0 - a, 1.0 - b))
}

fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// `h(sigmoid(l))`.
fn entropy_of_logit(l: f64) -> f64 {
    if l > 0.0 {
        l * sigmoid(-l) + (-l).exp().ln_1p()
    } else {
        l.exp().ln_1p() - l * sigmoid(l)
    }
}

/// `e^l h(sigmoid(l))`, which grows only linearly for large `l`.
fn scaled_entropy_of_logit(l: f64) -> f64 {
    if l > 0.0 {
        // e^l ln(1 + e^-l) = ln(1 + t) / t with t = e^-l
        let t = (-l).exp();
        let tail = if t < 1e-8 { 1.0 - 0.5 * t } else { t.ln_1p() / t };
        l * sigmoid(l) + tail
    } else {
        l.exp() * entropy_of_logit(l)
    }
}

/// `I(V0; sqrt(a) V0 + Z)` in nats.
pub fn mutual_info_bg(src: &BernoulliGaussianSource, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(domain(format!("channel gain a = {a} must be >= 0")));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let q = src.q;
    let k = a * src.px;
    if q == 1.0 {
        return Ok(k.ln_1p());
    }
    let kappa = k / (1.0 + k);
    let ln_c = ((1.0 - q) / q).ln() + k.ln_1p();
    // H(B0 | Y) split by the value of B0; u = a |y|^2
    let inactive = laguerre_integral(0.0, |u| entropy_of_logit(kappa * u - ln_c));
    let active = laguerre_integral(0.0, |u| scaled_entropy_of_logit(kappa * u - ln_c));
    let h_cond = (1.0 - q) * inactive + q * (ln_c - k.ln_1p()).exp() * active;
    let hq = binary_entropy(q)?;
    let i = q * k.ln_1p() + hq - h_cond;
    debug_assert!(i.is_finite());
    Ok(i.max(0.0))
}

/// `mmse(V0 | V0 + eta^{-1/2} Z)`.
pub fn mmse_bg(src: &BernoulliGaussianSource, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(domain(format!("eta = {eta} must be >= 0")));
    }
    let q = src.q;
    if eta == 0.0 {
        return Ok(q * src.px);
    }
    let k = src.px * eta;
    let gauss = q * src.px / (1.0 + k);
    if q == 1.0 {
        return Ok(gauss);
    }
    let kappa = k / (1.0 + k);
    let ln_c = ((1.0 - q) / q).ln() + k.ln_1p();
    // Lerch form shifted by one in its third argument; no cancellation
    let j = laguerre_integral(0.0, |u| u * sigmoid(kappa * u - ln_c));
    Ok(gauss + kappa * kappa * (1.0 - q) * j / eta)
}

/// Unshifted Lerch-function expression of the MMSE. Subject to cancellation
/// when `px * eta` is large; kept as a cross-check of [`mmse_bg`].
pub fn mmse_bg_lerch(src: &BernoulliGaussianSource, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(domain(format!("eta = {eta} must be > 0")));
    }
    let (q, px) = (src.q, src.px);
    let k = px * eta;
    let z = -(1.0 + k) * (1.0 - q) / q;
    let phi = hurwitz_lerch_phi(z, 2.0, 1.0 / k)?;
    Ok(q * (px - phi / (eta * (1.0 + k))))
}

/// Hurwitz-Lerch transcendent `Phi(z, s, a)` for `z < 1` via its Laplace
/// representation.
pub fn hurwitz_lerch_phi(z: f64, s: f64, a: f64) -> Result<f64> {
    if !(z < 1.0) || !(s > 0.0) || !(a > 0.0) {
        return Err(domain(format!("Lerch Phi needs z < 1, s > 0, a > 0; got ({z}, {s}, {a})")));
    }
    if a < 1.0 {
        // Phi(z, s, a) = z Phi(z, s, a + 1) + a^{-s}; keeps the integrand smooth on the Laguerre scale
        return Ok(z * hurwitz_lerch_phi(z, s, a + 1.0)? + a.powf(-s));
    }
    // t = u / a; generalized Laguerre weight u^{s-1} e^{-u}
    let integral = laguerre_integral(s - 1.0, |u| 1.0 / (1.0 - z * (-u / a).exp()));
    Ok(integral * a.powf(-s) / gamma(s))
}

/// `P[B0 = 1 | |Y|^2 = y_sq]`.
pub fn posterior_active(ch: &DecoupledChannel, y_sq: f64) -> Result<f64> {
    if !(y_sq >= 0.0) {
        return Err(domain(format!("|y|^2 = {y_sq} must be >= 0")));
    }
    if ch.source.q == 1.0 {
        return Ok(1.0);
    }
    // log-odds; evaluated without forming the exponential
    let slope = ch.eta * ch.source.px * ch.mu();
    Ok(sigmoid(slope * y_sq - ch.ln_c()))
}

pub fn map_threshold(ch: &DecoupledChannel) -> Result<MapThreshold> {
    if !(ch.eta > 0.0) {
        return Err(domain("MAP threshold needs eta > 0"));
    }
    let ln_c = ch.ln_c();
    if ln_c < 0.0 || ch.source.q == 1.0 {
        return Ok(MapThreshold::AlwaysActive);
    }
    let slope = ch.eta * ch.source.px * ch.mu();
    Ok(MapThreshold::Energy(ln_c / slope))
}

/// Error probability of the MAP energy detector for one component.
pub fn support_error_rate(ch: &DecoupledChannel) -> Result<f64> {
    let q = ch.source.q;
    if ch.eta == 0.0 {
        return Ok(q.min(1.0 - q));
    }
    Ok(match map_threshold(ch)? {
        MapThreshold::AlwaysActive => 1.0 - q,
        MapThreshold::Energy(tau) => {
            q * (-(ch.mu() * tau)).exp_m1().abs() + (1.0 - q) * (-ch.eta * tau).exp()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_entropy_forms_agree() {
        for l in [-40.0f64, -3.0, -0.1, 0.0, 0.2, 5.0] {
            let s = sigmoid(l);
            let direct = xlnx_neg(s) + xlnx_neg(1.0 - s);
            assert!((entropy_of_logit(l) - direct).abs() < 1e-12);
            assert!((scaled_entropy_of_logit(l) - l.exp() * direct).abs() < 1e-10 * (1.0 + l.abs()));
        }
        // e^l h(sigmoid(l)) -> 1 + l for large l
        let l = 30.0f64;
        assert!((scaled_entropy_of_logit(l) - (1.0 + l)).abs() < 1e-10);
    }

    #[test]
    fn lerch_and_shifted_forms_agree() {
        for (q, px, eta) in [(0.2, 5.0, 0.3), (0.1, 50.0, 0.5), (0.5, 2.0, 2.0)] {
            let s = BernoulliGaussianSource::new(q, px).unwrap();
            let a = mmse_bg(&s, eta).unwrap();
            let b = mmse_bg_lerch(&s, eta).unwrap();
            assert!((a - b).abs() < 1e-9 * a, "{q} {px} {eta}: {a} {b}");
        }
    }
}
