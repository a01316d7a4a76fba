//! Closed-form transforms of the spectral law of `R = U^H A^H A U`.
//!
//! Two families are supported: the Marchenko-Pastur-type law of an iid
//! measurement matrix with entries of variance `1/n` observed on a fraction `p`
//! of its rows, and the law obtained from a Haar unitary with a random row
//! selection of rate `p` (which includes the identity at `p = 1`).

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    IidVar1OverN,
    Haar,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::IidVar1OverN => "iid",
            EnsembleKind::Haar => "haar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub p: f64,
}

/// `(-b + sqrt(b^2 + 4ac)) / 2a` for `a > 0, c >= 0`, without cancellation.
fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    let d = (b * b + 4.0 * a * c).sqrt();
    if b <= 0.0 {
        (d - b) / (2.0 * a)
    } else {
        2.0 * c / (d + b)
    }
}

/// Pieces of the Marchenko-Pastur Shannon transform with `F = F(x, y)`:
/// `(ln(1 + x - F/4), ln(1 + x y - F/4), F / (4x))`.
///
/// Each logarithm is taken of a sum of positive terms (via the conjugate where
/// the textbook form cancels), so the result stays accurate for very large `x`.
pub(crate) fn mp_terms(x: f64, y: f64) -> (f64, f64, f64) {
    let sy = y.sqrt();
    let (a, b) = ((1.0 + sy) * (1.0 + sy), (1.0 - sy) * (1.0 - sy));
    let s1 = (x * a + 1.0).sqrt();
    let s2 = (x * b + 1.0).sqrt();
    let prod = s1 * s2;
    // s1 s2 - 1
    let m = (x * x * a * b + x * (a + b)) / (prod + 1.0);
    // 1 + x(1-y) + s1 s2 = 2 (1 + x - F/4), with conjugate product 4xy
    let la = if y <= 1.0 {
        (0.5 * (x * (1.0 - y) + m)).ln_1p()
    } else {
        (2.0 * x * y / (m + x * (y - 1.0))).ln()
    };
    // 1 + x(y-1) + s1 s2 = 2 (1 + xy - F/4), with conjugate product 4x
    let lb = if y >= 1.0 {
        (0.5 * (x * (y - 1.0) + m)).ln_1p()
    } else if x < 1.0 {
        -((x * a * b - (1.0 + y) * m) / (2.0 * (prod + 1.0))).ln_1p()
    } else {
        (2.0 * x / (m + x * (1.0 - y))).ln()
    };
    let f4x = 4.0 * x * y / ((s1 + s2) * (s1 + s2));
    (la, lb, f4x)
}

impl Ensemble {
    pub fn new(kind: EnsembleKind, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("sampling rate p = {p} outside [0, 1]")));
        }
        Ok(Ensemble { kind, p })
    }

    pub fn iid(p: f64) -> Result<Self> {
        Self::new(EnsembleKind::IidVar1OverN, p)
    }

    pub fn haar(p: f64) -> Result<Self> {
        Self::new(EnsembleKind::Haar, p)
    }

    /// Unsampled orthogonal sensing, i.e. Haar at `p = 1`.
    pub fn identity() -> Self {
        Ensemble { kind: EnsembleKind::Haar, p: 1.0 }
    }

    fn haar_sqrt(&self, z: f64) -> f64 {
        ((z - 1.0) * (z - 1.0) + 4.0 * z * self.p).sqrt()
    }

    /// R-transform on the real axis.
    ///
    /// Intended for `z <= 0`, the region used by the fixed-point equations.
    pub fn r_transform(&self, z: f64) -> Result<f64> {
        let p = self.p;
        match self.kind {
            EnsembleKind::IidVar1OverN => {
                if z >= 1.0 {
                    return Err(domain(format!("iid R-transform pole at z = {z}")));
                }
                Ok(p / (1.0 - z))
            }
            EnsembleKind::Haar => {
                if p == 0.0 {
                    return Ok(0.0);
                }
                if p == 1.0 {
                    return Ok(1.0);
                }
                // conjugate form; finite at z = 0 where it equals p
                Ok(2.0 * p / (1.0 - z + self.haar_sqrt(z)))
            }
        }
    }

    pub fn r_transform_derivative(&self, z: f64) -> Result<f64> {
        let p = self.p;
        match self.kind {
            EnsembleKind::IidVar1OverN => {
                if z >= 1.0 {
                    return Err(domain(format!("iid R-transform pole at z = {z}")));
                }
                Ok(p / ((1.0 - z) * (1.0 - z)))
            }
            EnsembleKind::Haar => {
                if p == 0.0 || p == 1.0 {
                    return Ok(0.0);
                }
                let s = self.haar_sqrt(z);
                let ds = (z - 1.0 + 2.0 * p) / s;
                let den = 1.0 - z + s;
                Ok(2.0 * p * (1.0 - ds) / (den * den))
            }
        }
    }

    /// `int_0^chi R(-w) dw` for `chi >= 0`.
    pub fn r_transform_integral(&self, chi: f64) -> Result<f64> {
        if !(chi >= 0.0) {
            return Err(domain(format!("chi = {chi} must be >= 0")));
        }
        let p = self.p;
        match self.kind {
            EnsembleKind::IidVar1OverN => Ok(p * chi.ln_1p()),
            EnsembleKind::Haar => {
                if p == 0.0 {
                    return Ok(0.0);
                }
                if p == 1.0 {
                    return Ok(chi);
                }
                let rho = ((1.0 + chi) * (1.0 + chi) - 4.0 * chi * p).sqrt();
                let lead = 4.0 * chi * p / (1.0 + chi + rho); // 1 + chi - rho
                // ln(1 + chi - 2p + rho); the product with its conjugate is -4p(1-p)
                let b = 1.0 + chi - 2.0 * p;
                let ln_b = if b >= 0.0 {
                    (b + rho).ln()
                } else {
                    (4.0 * p).ln() + (1.0 - p).ln() - (rho - b).ln()
                };
                let ln_c = (1.0 + chi * (1.0 - 2.0 * p) + rho).ln();
                Ok(0.5
                    * (lead - 2.0 * p * (2.0 * (1.0 - p)).ln() + (1.0 - p).ln()
                        - (1.0 - 2.0 * p) * ln_b
                        + ln_c))
            }
        }
    }

    /// eta-transform `E[1 / (1 + x lambda)]`, `x >= 0`.
    pub fn eta_transform(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(domain(format!("eta-transform argument {x} must be >= 0")));
        }
        let p = self.p;
        match self.kind {
            EnsembleKind::Haar => Ok(1.0 - p + p / (1.0 + x)),
            EnsembleKind::IidVar1OverN => {
                if x == 0.0 {
                    return Ok(1.0);
                }
                // x eta^2 - ((1-p)x - 1) eta - 1 = 0
                Ok(positive_root(x, -((1.0 - p) * x - 1.0), 1.0))
            }
        }
    }

    /// Shannon transform `E[ln(1 + x lambda)]`, `x >= 0`, in nats.
    pub fn shannon_transform(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(domain(format!("Shannon-transform argument {x} must be >= 0")));
        }
        let p = self.p;
        match self.kind {
            EnsembleKind::Haar => Ok(p * x.ln_1p()),
            EnsembleKind::IidVar1OverN => {
                if x == 0.0 || p == 0.0 {
                    return Ok(0.0);
                }
                let (la, lb, f4x) = mp_terms(x, p);
                Ok(p * la + lb - f4x)
            }
        }
    }

    /// `E[lambda]`.
    pub fn spectrum_mean(&self) -> f64 {
        self.p
    }

    /// Asymptotic multiuser efficiency of successive interference cancellation
    /// at SNR `s`, after a fraction `beta` of the users has been decoded.
    pub fn sic_multiuser_efficiency(&self, s: f64, beta: f64) -> Result<f64> {
        if !(s >= 0.0) || !(0.0..=1.0).contains(&beta) {
            return Err(domain(format!("SIC efficiency needs s >= 0 and beta in [0,1], got s = {s}, beta = {beta}")));
        }
        let p = self.p;
        if s == 0.0 {
            return Ok(p);
        }
        let b = (p - beta) * s - 1.0;
        match self.kind {
            EnsembleKind::IidVar1OverN => Ok(positive_root(s, -b, p)),
            EnsembleKind::Haar => {
                let ob = 1.0 - beta;
                // the conjugate root below is already regular as beta -> 1
                if ob == 0.0 {
                    return Ok(p / (1.0 + (1.0 - p) * s));
                }
                Ok(positive_root(ob * s, -b, p))
            }
        }
    }

    /// Efficiency of the linear MMSE receiver at SNR `s`.
    pub fn lmmse_efficiency(&self, s: f64) -> Result<f64> {
        self.sic_multiuser_efficiency(s, 1.0)
    }

    /// The `z` with `R(z) = eta`.
    pub fn r_transform_inverse(&self, eta: f64) -> Result<f64> {
        let p = self.p;
        if !(eta > 0.0) {
            return Err(domain(format!("R-transform inverse needs eta > 0, got {eta}")));
        }
        match self.kind {
            EnsembleKind::IidVar1OverN => Ok(1.0 - p / eta),
            EnsembleKind::Haar => {
                if p == 0.0 || p == 1.0 || eta >= 1.0 {
                    return Err(domain(format!("Haar R-transform with p = {p} does not attain {eta}")));
                }
                // z R^2 + (1 - z) R = p
                Ok((eta - p) / ((1.0 - eta) * eta))
            }
        }
    }
}
