//! Matched replica fixed points, the `(alpha, nu)` system, mutual-information
//! rates and the bounds built on them.

use crate::ensembles::{mp_terms, Ensemble, EnsembleKind};
use crate::error::{domain, Error, Result};
use crate::quadrature::legendre_integral;
use crate::scalar_channel::{
    binary_divergence, binary_entropy, binary_entropy_inverse, mmse_bg, mutual_info_bg,
    BernoulliGaussianSource,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub ensemble: Ensemble,
    pub q: f64,
    pub px: f64,
}

impl SystemParams {
    pub fn new(ensemble: Ensemble, q: f64, px: f64) -> Result<Self> {
        BernoulliGaussianSource::new(q, px)?;
        Ok(SystemParams { ensemble, q, px })
    }

    pub fn from_snr_db(ensemble: Ensemble, q: f64, snr_db: f64) -> Result<Self> {
        let s = BernoulliGaussianSource::from_snr_db(q, snr_db)?;
        Ok(SystemParams { ensemble, q, px: s.px })
    }

    pub fn source(&self) -> BernoulliGaussianSource {
        BernoulliGaussianSource { q: self.q, px: self.px }
    }

    pub fn snr(&self) -> f64 {
        self.q * self.px
    }

    pub fn p(&self) -> f64 {
        self.ensemble.p
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Ok(SystemParams { ensemble: Ensemble::new(self.ensemble.kind, p)?, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSolution {
    pub eta: f64,
    pub chi: f64,
    pub free_energy_i1: f64,
    pub stability: Stability,
    /// Slope of the mapping `f` at the solution.
    pub slope: f64,
}

impl FixedPointSolution {
    pub fn inv_eta(&self) -> f64 {
        1.0 / self.eta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSolutions {
    /// Sorted by increasing `1/eta`.
    pub solutions: Vec<FixedPointSolution>,
    /// Index of the free-energy minimizer.
    pub selected: usize,
    /// Index of the largest `1/eta`.
    pub rightmost: usize,
}

impl MatchedSolutions {
    pub fn selected(&self) -> &FixedPointSolution {
        &self.solutions[self.selected]
    }

    pub fn rightmost(&self) -> &FixedPointSolution {
        &self.solutions[self.rightmost]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaNuSolution {
    pub alpha: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoRate {
    pub i: f64,
    pub i1: f64,
    pub i2: f64,
    /// Set when `i1 - i2` exceeded `h(q)` by more than 1e-8 and was clipped.
    pub clipped: bool,
}

/// Upper bounds on the total rate `I = I1 - I2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoUpperBounds {
    pub unitary: Option<f64>,
    pub shannon: f64,
    pub matched_filter: f64,
}

impl InfoUpperBounds {
    pub fn min(&self) -> f64 {
        let m = self.shannon.min(self.matched_filter);
        self.unitary.map_or(m, |u| u.min(m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseCap {
    pub i_limit_upper: f64,
    pub below_hq: bool,
}

const SCAN_POINTS: usize = 2000;
const BISECT_RTOL: f64 = 1e-12;

/// `f(1/eta) = 1 / R(-mmse(eta))`.
pub fn matched_mapping(params: &SystemParams, inv_eta: f64) -> Result<f64> {
    if !(inv_eta > 0.0) {
        return Err(domain(format!("1/eta = {inv_eta} must be > 0")));
    }
    let chi = mmse_bg(&params.source(), 1.0 / inv_eta)?;
    let r = params.ensemble.r_transform(-chi)?;
    Ok(1.0 / r)
}

pub fn free_energy_i1(params: &SystemParams, eta: f64, chi: f64) -> Result<f64> {
    Ok(mutual_info_bg(&params.source(), eta)? + params.ensemble.r_transform_integral(chi)? - eta * chi)
}

fn sign_changes(grid: &[f64], vals: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..grid.len() - 1 {
        if vals[k] == 0.0 {
            out.push((grid[k], grid[k]));
        } else if vals[k] * vals[k + 1] < 0.0 {
            out.push((grid[k], grid[k + 1]));
        }
    }
    out
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Bisection for a sign change of `g` inside `[lo, hi]`, to `rtol` relative width.
pub(crate) fn bisect<G: Fn(f64) -> Result<f64>>(g: &G, mut lo: f64, mut hi: f64, rtol: f64) -> Result<f64> {
    let mut glo = g(lo)?;
    if glo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..400 {
        if hi - lo <= rtol * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm * glo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sign-change scan of `g` on a geometric grid, extended at either end until
/// the end values have the expected signs (`+` on the left, `-` on the right).
pub(crate) fn scan_roots<G: Fn(f64) -> Result<f64>>(
    g: &G,
    mut lo: f64,
    mut hi: f64,
    points: usize,
) -> Result<Vec<f64>> {
    for _ in 0..60 {
        if g(lo)? > 0.0 {
            break;
        }
        lo /= 10.0;
    }
    for _ in 0..60 {
        if g(hi)? < 0.0 {
            break;
        }
        hi *= 10.0;
    }
    let mut density = points;
    let mut brackets;
    loop {
        let grid = geomspace(lo, hi, density);
        let vals = grid.iter().map(|&s| g(s)).collect::<Result<Vec<_>>>()?;
        brackets = sign_changes(&grid, &vals);
        // an even count means a tangency near a fold was straddled
        if brackets.len() % 2 == 1 || brackets.is_empty() || density > points {
            break;
        }
        density = 10 * points;
    }
    let mut roots = Vec::with_capacity(brackets.len());
    for (a, b) in brackets {
        let r = if a == b { a } else { bisect(g, a, b, BISECT_RTOL)? };
        if roots.last().is_none_or(|&last: &f64| (r - last).abs() > 1e-10 * r) {
            roots.push(r);
        }
    }
    Ok(roots)
}

/// All solutions of the matched fixed-point system, with free-energy selection.
pub fn solve_matched(params: &SystemParams) -> Result<MatchedSolutions> {
    let p = params.p();
    let src = params.source();
    if p == 0.0 {
        // no measurements: eta = 0 and the posterior is the prior
        let sol = FixedPointSolution {
            eta: 0.0,
            chi: params.snr(),
            free_energy_i1: 0.0,
            stability: Stability::Stable,
            slope: 0.0,
        };
        return Ok(MatchedSolutions { solutions: vec![sol], selected: 0, rightmost: 0 });
    }
    let g = |s: f64| Ok(matched_mapping(params, s)? - s);
    let scale = 1.0 + params.snr();
    let roots = scan_roots(&g, 1e-9 * scale, 10.0 * scale / p.max(1e-3), SCAN_POINTS)?;
    if roots.is_empty() {
        return Err(Error::NoSolution(format!(
            "matched mapping has no crossing for {:?}, q = {}, px = {}",
            params.ensemble, params.q, params.px
        )));
    }
    let mut solutions = Vec::with_capacity(roots.len());
    for s in roots {
        let eta = 1.0 / s;
        let chi = mmse_bg(&src, eta)?;
        let h = 1e-6 * s;
        let slope = (matched_mapping(params, s + h)? - matched_mapping(params, s - h)?) / (2.0 * h);
        solutions.push(FixedPointSolution {
            eta,
            chi,
            free_energy_i1: free_energy_i1(params, eta, chi)?,
            stability: if slope.abs() < 1.0 { Stability::Stable } else { Stability::Unstable },
            slope,
        });
    }
    let selected = solutions
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.free_energy_i1.total_cmp(&b.1.free_energy_i1))
        .map(|(k, _)| k)
        .unwrap();
    let rightmost = solutions.len() - 1;
    Ok(MatchedSolutions { solutions, selected, rightmost })
}

fn alpha_nu_eta(q: f64, px: f64, nu: f64) -> f64 {
    q / (1.0 + nu * px) + 1.0 - q
}

fn alpha_from_nu(q: f64, px: f64, nu: f64) -> f64 {
    // from 1/(1 + alpha nu px) = q/(1 + nu px) + 1 - q
    q / (1.0 + (1.0 - q) * nu * px)
}

/// `(alpha, nu)` by bisection on `nu`, valid for any ensemble.
pub fn solve_alpha_nu_general(params: &SystemParams) -> Result<AlphaNuSolution> {
    let (q, px) = (params.q, params.px);
    if params.p() == 0.0 {
        return Ok(AlphaNuSolution { alpha: q, nu: 0.0 });
    }
    let resid = |nu: f64| -> Result<f64> {
        let alpha = alpha_from_nu(q, px, nu);
        Ok(params.ensemble.eta_transform(alpha * px)? - alpha_nu_eta(q, px, nu))
    };
    let mut hi = params.p().max(1e-300);
    for _ in 0..200 {
        if resid(hi)? > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let mut lo = hi;
    for _ in 0..2000 {
        lo *= 0.5;
        if resid(lo)? < 0.0 {
            break;
        }
    }
    if !(resid(lo)? < 0.0 && resid(hi)? > 0.0) {
        return Err(Error::NoSolution("(alpha, nu) system: no bracket".into()));
    }
    // bisection in log(nu)
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        if resid(m.exp())? < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let nu = (0.5 * (a + b)).exp();
    Ok(AlphaNuSolution { alpha: alpha_from_nu(q, px, nu), nu })
}

/// `(alpha, nu)`: closed form for Haar, bisection otherwise.
pub fn solve_alpha_nu(params: &SystemParams) -> Result<AlphaNuSolution> {
    let (q, px, p) = (params.q, params.px, params.p());
    match params.ensemble.kind {
        EnsembleKind::Haar if q < 1.0 => {
            if p == 0.0 {
                return Ok(AlphaNuSolution { alpha: q, nu: 0.0 });
            }
            let nu = if p == 1.0 {
                1.0
            } else {
                // px (1-q) nu^2 - (px (p-q) - 1) nu - p = 0
                let a = px * (1.0 - q);
                let b = px * (p - q) - 1.0;
                let d = (b * b + 4.0 * a * p).sqrt();
                if b > 0.0 {
                    (b + d) / (2.0 * a)
                } else {
                    2.0 * p / (d - b)
                }
            };
            Ok(AlphaNuSolution { alpha: alpha_from_nu(q, px, nu), nu })
        }
        _ => solve_alpha_nu_general(params),
    }
}

/// `I2` through the general `(alpha, nu)` expression.
pub fn mutual_info_i2_general(params: &SystemParams) -> Result<f64> {
    let AlphaNuSolution { alpha, nu } = solve_alpha_nu_general(params)?;
    let px = params.px;
    Ok(params.ensemble.shannon_transform(alpha * px)? + params.q * (nu * px).ln_1p()
        - (alpha * nu * px).ln_1p())
}

/// `I2` in nats, from the closed form of each ensemble.
pub fn mutual_info_i2(params: &SystemParams) -> Result<f64> {
    let (q, px, p) = (params.q, params.px, params.p());
    if p == 0.0 {
        return Ok(0.0);
    }
    match params.ensemble.kind {
        EnsembleKind::Haar => {
            if q == 1.0 {
                return mutual_info_i2_general(params);
            }
            let nu = solve_alpha_nu(params)?.nu;
            Ok(q * (nu * px).ln_1p() + binary_divergence(p, nu.min(1.0))?)
        }
        EnsembleKind::IidVar1OverN => {
            // F = F(p px, q/p); F / (4 px) = p * (F / (4 p px))
            let (la, lb, f4x) = mp_terms(p * px, q / p);
            Ok(q * la + p * lb - p * f4x)
        }
    }
}

pub fn mutual_info_total(params: &SystemParams) -> Result<InfoRate> {
    let i1 = solve_matched(params)?.selected().free_energy_i1;
    let i2 = mutual_info_i2(params)?;
    let hq = binary_entropy(params.q)?;
    let raw = i1 - i2;
    let clipped = raw > hq + 1e-8;
    if clipped {
        log::warn!("I1 - I2 = {raw} exceeds h(q) = {hq}; clipped");
    }
    Ok(InfoRate { i: raw.min(hq), i1, i2, clipped })
}

/// `I(V0; V0 + Z) - q log(1 + px)`, an upper bound on `I` for the Haar ensemble.
pub fn bound_unitary_upper(params: &SystemParams) -> Result<f64> {
    if params.ensemble.kind != EnsembleKind::Haar {
        return Err(domain("unitary bound applies to the Haar ensemble only"));
    }
    Ok(mutual_info_bg(&params.source(), 1.0)? - params.q * params.px.ln_1p())
}

/// Shannon-transform upper bound on `I1`.
pub fn bound_shannon_upper(params: &SystemParams) -> Result<f64> {
    params.ensemble.shannon_transform(params.snr())
}

/// Matched-filter upper bound on `I1`.
pub fn bound_mf_upper(params: &SystemParams) -> Result<f64> {
    mutual_info_bg(&params.source(), params.ensemble.spectrum_mean())
}

/// Successive-interference-cancellation lower bound on `I1`.
pub fn bound_sic_lower(params: &SystemParams) -> Result<f64> {
    let src = params.source();
    let s = params.snr();
    let err = std::cell::RefCell::new(None);
    let v = legendre_integral(0.0, 1.0, |beta| {
        match params
            .ensemble
            .sic_multiuser_efficiency(s, beta)
            .and_then(|eta| mutual_info_bg(&src, eta))
        {
            Ok(v) => v,
            Err(e) => {
                *err.borrow_mut() = Some(e);
                0.0
            }
        }
    });
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

pub fn info_upper_bounds(params: &SystemParams) -> Result<InfoUpperBounds> {
    let i2 = mutual_info_i2(params)?;
    let unitary = match params.ensemble.kind {
        EnsembleKind::Haar => Some(bound_unitary_upper(params)?),
        EnsembleKind::IidVar1OverN => None,
    };
    Ok(InfoUpperBounds {
        unitary,
        shannon: bound_shannon_upper(params)? - i2,
        matched_filter: bound_mf_upper(params)? - i2,
    })
}

/// `h^{-1}(h(q) - i_upper)`, clamped at 0.
pub fn distortion_lower_bound_from_info(q: f64, i_upper: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(domain(format!("distortion bound needs q in (0, 1/2], got {q}")));
    }
    let hq = binary_entropy(q)?;
    let gap = hq - i_upper.max(0.0);
    if gap <= 0.0 {
        return Ok(0.0);
    }
    binary_entropy_inverse(gap)
}

/// Lower bound on the support-error rate of any estimator, from the tightest
/// available upper bound on `I`.
pub fn distortion_lower_bound(params: &SystemParams) -> Result<f64> {
    if params.q > 0.5 {
        return Err(domain(format!("distortion bound needs q <= 1/2, got {}", params.q)));
    }
    distortion_lower_bound_from_info(params.q, info_upper_bounds(params)?.min())
}

/// Limit of the Shannon-based upper bound on `I` as `px -> inf`, for `p <= q`.
pub fn high_snr_converse_check(params: &SystemParams) -> Result<ConverseCap> {
    let (p, q) = (params.p(), params.q);
    if p > q {
        return Err(domain(format!("high-SNR converse needs p <= q, got p = {p}, q = {q}")));
    }
    let xlog = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    // (1-p) log(1/(1-p)) - (q-p) log(q/(q-p))
    let cap = if p == 0.0 {
        0.0
    } else {
        -xlog(1.0 - p, 1.0) + xlog(q - p, q)
    };
    let hq = binary_entropy(q)?;
    Ok(ConverseCap { i_limit_upper: cap, below_hq: cap < hq })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haar(p: f64, q: f64, snr_db: f64) -> SystemParams {
        SystemParams::from_snr_db(Ensemble::haar(p).unwrap(), q, snr_db).unwrap()
    }

    #[test]
    fn phase_transition_pattern() {
        assert_eq!(solve_matched(&haar(0.33, 0.2, 50.0)).unwrap().solutions.len(), 1);
        let s = solve_matched(&haar(0.23, 0.2, 50.0)).unwrap();
        assert_eq!(s.solutions.len(), 3);
        assert_eq!(s.selected, s.rightmost);
        let s = solve_matched(&haar(0.24, 0.2, 50.0)).unwrap();
        assert_eq!(s.solutions.len(), 3);
        assert_eq!(s.selected, 0);
    }

    #[test]
    fn alpha_from_nu_satisfies_first_equality() {
        let (q, px, nu) = (0.2, 100.0, 0.27);
        let a = alpha_from_nu(q, px, nu);
        assert!((1.0 / (1.0 + a * nu * px) - alpha_nu_eta(q, px, nu)).abs() < 1e-14);
    }
}
