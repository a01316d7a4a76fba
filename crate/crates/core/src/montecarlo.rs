//! Finite-dimensional simulation of `y = A U X b + z` with thresholded linear
//! MMSE and thresholded Lasso support detectors.

use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::estimators::{lasso_fixed_point, EstimatorKind};
use crate::replica::SystemParams;
use crate::scalar_channel::{map_threshold, DecoupledChannel, MapThreshold};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    IidGaussian,
    Haar,
    Dft,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::IidGaussian => "iid",
            MatrixKind::Haar => "haar",
            MatrixKind::Dft => "dft",
        }
    }
}

impl FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" | "gaussian" => Ok(MatrixKind::IidGaussian),
            "haar" => Ok(MatrixKind::Haar),
            "dft" => Ok(MatrixKind::Dft),
            _ => Err(domain(format!("unknown matrix kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEstimator {
    Lmmse,
    Lasso,
}

impl SimEstimator {
    pub fn kind(self) -> EstimatorKind {
        match self {
            SimEstimator::Lmmse => EstimatorKind::ThresholdedLmmse,
            SimEstimator::Lasso => EstimatorKind::ThresholdedLasso,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    Heuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n: usize,
    pub matrix_kind: MatrixKind,
    pub params: SystemParams,
    pub trials: usize,
    pub base_seed: u64,
    pub estimator: SimEstimator,
    pub lasso_gamma_mode: GammaMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(domain(format!("dimension n = {} must be >= 2", self.n)));
        }
        if self.trials == 0 {
            return Err(domain("trials must be >= 1"));
        }
        if let GammaMode::Fixed(g) = self.lasso_gamma_mode {
            if !(g > 0.0 && g.is_finite()) {
                return Err(domain(format!("fixed gamma {g} must be positive")));
            }
        }
        Ok(())
    }
}

/// Independent stream for trial `k`.
pub fn trial_rng(base_seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(k);
    rng
}

/// Circular complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

pub fn gen_sensing_matrix<R: Rng + ?Sized>(kind: MatrixKind, n: usize, rng: &mut R) -> Result<CMatrix> {
    if n < 2 {
        return Err(domain(format!("dimension n = {n} must be >= 2")));
    }
    Ok(match kind {
        MatrixKind::IidGaussian => {
            let var = 1.0 / n as f64;
            CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, var))
        }
        MatrixKind::Haar => {
            let z = CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, 1.0));
            let qr = z.qr();
            let r = qr.r();
            let mut q = qr.q();
            // rotate each column so that R has a positive real diagonal
            for j in 0..n {
                let d = r[(j, j)];
                let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
                for c in q.column_mut(j).iter_mut() {
                    *c *= ph;
                }
            }
            q
        }
        MatrixKind::Dft => {
            let s = 1.0 / (n as f64).sqrt();
            CMatrix::from_fn(n, n, |m, k| {
                let ang = 2.0 * std::f64::consts::PI * ((m * k) % n) as f64 / n as f64;
                Complex64::from_polar(s, ang)
            })
        }
    })
}

/// Largest `|U^H U - I|` entry.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let g = u.ad_mul(u);
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub y: CVector,
    pub mask: Vec<bool>,
    pub u: CMatrix,
    pub x: CVector,
    pub b: Vec<bool>,
}

impl Sample {
    pub fn v(&self) -> CVector {
        CVector::from_fn(self.x.len(), |i, _| if self.b[i] { self.x[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn rows(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    /// Observed rows of `A U`.
    pub fn g(&self) -> CMatrix {
        self.u.select_rows(self.rows().iter())
    }

    pub fn y_observed(&self) -> CVector {
        self.y.select_rows(self.rows().iter())
    }

    pub fn measurements(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

pub fn sample_model<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Sample> {
    cfg.validate()?;
    let n = cfg.n;
    let (p, q, px) = (cfg.params.p(), cfg.params.q, cfg.params.px);
    let u = gen_sensing_matrix(cfg.matrix_kind, n, rng)?;
    let b: Vec<bool> = (0..n).map(|_| rng.random_bool(q)).collect();
    let x = CVector::from_fn(n, |_, _| complex_gaussian(rng, px));
    let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
    let z = CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0));
    let v = CVector::from_fn(n, |i, _| if b[i] { x[i] } else { Complex64::new(0.0, 0.0) });
    let uv = &u * &v;
    let y = CVector::from_fn(n, |i, _| if mask[i] { uv[i] + z[i] } else { z[i] });
    Ok(Sample { y, mask, u, x, b })
}

/// `[gamma^{-1} I + G^H G]^{-1} G^H y` by Cholesky.
pub fn lmmse_estimate(g: &CMatrix, y: &CVector, gamma: f64) -> Result<CVector> {
    if g.nrows() != y.len() {
        return Err(domain(format!("G has {} rows but y has {} entries", g.nrows(), y.len())));
    }
    if !(gamma > 0.0) {
        return Err(domain(format!("gamma = {gamma} must be positive")));
    }
    let n = g.ncols();
    let mut m = g.ad_mul(g);
    for i in 0..n {
        m[(i, i)] += Complex64::new(1.0 / gamma, 0.0);
    }
    let rhs = g.ad_mul(y);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Linalg("regularized Gram matrix is not positive definite".into()))?;
    let v = chol.solve(&rhs);
    if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Linalg("non-finite linear MMSE solution".into()));
    }
    Ok(v)
}

/// Complex soft thresholding: shrink the magnitude by `t`, keep the phase.
pub fn soft_threshold(c: Complex64, t: f64) -> Complex64 {
    let m = c.norm();
    if m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        c * ((m - t) / m)
    }
}

pub fn lasso_objective(g: &CMatrix, y: &CVector, v: &CVector, gamma: f64) -> f64 {
    let r = y - g * v;
    gamma * r.norm_squared() + v.iter().map(|c| c.norm()).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub v: CVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration, starting from `v = 0`.
    pub trace: Vec<f64>,
}

pub const LASSO_MAX_ITER: usize = 5000;
pub const LASSO_REL_TOL: f64 = 1e-8;
pub const LASSO_CERT_TOL: f64 = 1e-4;

/// Worst violation of the subgradient conditions, with `corr = G^H (y - G v)`:
/// `|2 gamma corr_i| <= 1` where `v_i = 0`, `2 gamma corr_i = v_i / |v_i|` elsewhere.
pub fn certificate_gap(v: &CVector, corr: &CVector, gamma: f64) -> f64 {
    v.iter()
        .zip(corr.iter())
        .map(|(vi, ci)| {
            let w = ci * (2.0 * gamma);
            if vi.norm() == 0.0 {
                (w.norm() - 1.0).max(0.0)
            } else {
                (w - vi / vi.norm()).norm()
            }
        })
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of `G^H G` by power iteration.
pub fn gram_norm_estimate(g: &CMatrix, iterations: usize) -> f64 {
    let n = g.ncols();
    let mut x = CVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut lam = 0.0;
    for _ in 0..iterations {
        let w = g.ad_mul(&(g * &x));
        lam = w.norm();
        if lam == 0.0 {
            return 0.0;
        }
        x = w / Complex64::new(lam, 0.0);
    }
    lam
}

/// Minimizes `gamma |y - G v|^2 + sum |v_i|` by proximal gradient from `v = 0`.
pub fn lasso_solve(g: &CMatrix, y: &CVector, gamma: f64) -> Result<LassoSolution> {
    if g.nrows() != y.len() {
        return Err(domain(format!("G has {} rows but y has {} entries", g.nrows(), y.len())));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma = {gamma} must be positive")));
    }
    let n = g.ncols();
    let mut v = CVector::zeros(n);
    let mut obj = lasso_objective(g, y, &v, gamma);
    let mut trace = vec![obj];
    let mut lip = gram_norm_estimate(g, 50) * 1.01;
    if lip == 0.0 {
        return Ok(LassoSolution { v, objective: obj, iterations: 0, converged: true, trace });
    }
    let mut rel = f64::INFINITY;
    for it in 1..=LASSO_MAX_ITER {
        let grad_step = g.ad_mul(&(y - g * &v));
        if rel < LASSO_REL_TOL && certificate_gap(&v, &grad_step, gamma) <= LASSO_CERT_TOL {
            return Ok(LassoSolution { v, objective: obj, iterations: it - 1, converged: true, trace });
        }
        let (next, next_obj) = loop {
            // step 1/(2 gamma L) on the quadratic term
            let t = 1.0 / (2.0 * gamma * lip);
            let cand = CVector::from_fn(n, |i, _| soft_threshold(v[i] + grad_step[i] / lip, t));
            let o = lasso_objective(g, y, &cand, gamma);
            if o <= obj * (1.0 + 1e-15) || lip > 1e300 {
                break (cand, o);
            }
            lip *= 2.0;
        };
        rel = (obj - next_obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        v = next;
        obj = next_obj;
        trace.push(obj);
    }
    let grad_step = g.ad_mul(&(y - g * &v));
    if rel < LASSO_REL_TOL && certificate_gap(&v, &grad_step, gamma) <= LASSO_CERT_TOL {
        return Ok(LassoSolution { v, objective: obj, iterations: LASSO_MAX_ITER, converged: true, trace });
    }
    log::warn!("lasso_solve: no convergence after {LASSO_MAX_ITER} iterations");
    Ok(LassoSolution { v, objective: obj, iterations: LASSO_MAX_ITER, converged: false, trace })
}

/// `v + D G^H (y - G v)` with `D = diag(1 / |g_l|^2)`.
pub fn noisy_lasso(v_hat: &CVector, g: &CMatrix, y: &CVector) -> Result<CVector> {
    let corr = g.ad_mul(&(y - g * v_hat));
    let mut out = v_hat.clone();
    for l in 0..g.ncols() {
        let nrm = g.column(l).norm_squared();
        if nrm < 1e-24 {
            return Err(Error::Degenerate(format!("column {l} of G has norm below 1e-12")));
        }
        out[l] += corr[l] / nrm;
    }
    Ok(out)
}

/// `(1/20) max_i |(G^H y)_i|`.
pub fn lasso_gamma_heuristic(g: &CMatrix, y: &CVector) -> f64 {
    g.ad_mul(y).iter().map(|c| c.norm()).fold(0.0, f64::max) / 20.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: usize,
    pub support_errors: usize,
    /// `|v_hat - v|^2 / n`.
    pub squared_error: f64,
    pub measurements: usize,
    pub gamma_used: f64,
    pub redraws: usize,
}

#[derive(Debug, Clone)]
pub struct SimSummary {
    pub d_hat: f64,
    pub d_ci95: f64,
    pub mse_hat: f64,
    pub mse_ci95: f64,
    pub gamma_mean: f64,
    pub per_trial: Vec<TrialOutcome>,
    pub failures: Vec<(usize, String)>,
}

fn energy_detect(v_tilde: &CVector, th: MapThreshold) -> Vec<bool> {
    v_tilde
        .iter()
        .map(|c| match th {
            MapThreshold::AlwaysActive => true,
            MapThreshold::Energy(tau) => c.norm_sqr() >= tau,
        })
        .collect()
}

/// Threshold of the asymptotic decoupled channel; zero `eta` detects nothing.
fn asymptotic_threshold(params: &SystemParams, eta: f64) -> Result<MapThreshold> {
    if eta <= 0.0 {
        return Ok(MapThreshold::Energy(f64::INFINITY));
    }
    map_threshold(&DecoupledChannel::new(params.source(), eta)?)
}

fn count_errors(est: &[bool], truth: &[bool]) -> usize {
    let fast = est.iter().zip(truth).filter(|(a, b)| a != b).count();
    let mut brute = 0;
    for i in 0..truth.len() {
        if est[i] != truth[i] {
            brute += 1;
        }
    }
    debug_assert_eq!(fast, brute);
    fast
}

const MAX_REDRAWS: usize = 100;

enum Attempt {
    Done(TrialOutcome),
    Redraw(String),
}

fn attempt(cfg: &SimConfig, rng: &mut ChaCha8Rng, k: usize, lmmse_eta: f64) -> Result<Attempt> {
    let s = sample_model(cfg, rng)?;
    if cfg.n <= 256 && cfg.matrix_kind != MatrixKind::IidGaussian {
        let def = unitarity_defect(&s.u);
        if def > 1e-11 {
            return Err(Error::Linalg(format!("sensing matrix unitarity defect {def:e}")));
        }
    }
    let n = cfg.n;
    let v = s.v();
    let m = s.measurements();
    let done = |errors: usize, v_hat: &CVector, gamma: f64| {
        Attempt::Done(TrialOutcome {
            trial_index: k,
            support_errors: errors,
            squared_error: (v_hat - &v).norm_squared() / n as f64,
            measurements: m,
            gamma_used: gamma,
            redraws: 0,
        })
    };
    let g = s.g();
    let y = s.y_observed();
    match cfg.estimator {
        SimEstimator::Lmmse => {
            let gamma = cfg.params.snr();
            if m == 0 {
                let zero = CVector::zeros(n);
                return Ok(done(s.b.iter().filter(|&&b| b).count(), &zero, gamma));
            }
            let v_hat = lmmse_estimate(&g, &y, gamma)?;
            let xi = gamma * lmmse_eta;
            let scale = Complex64::new((1.0 + xi) / xi, 0.0);
            let v_tilde = v_hat.map(|c| c * scale);
            let est = energy_detect(&v_tilde, asymptotic_threshold(&cfg.params, lmmse_eta)?);
            Ok(done(count_errors(&est, &s.b), &v_hat, gamma))
        }
        SimEstimator::Lasso => {
            if m == 0 {
                let zero = CVector::zeros(n);
                let gamma = match cfg.lasso_gamma_mode {
                    GammaMode::Fixed(g) => g,
                    GammaMode::Heuristic => 0.0,
                };
                return Ok(done(s.b.iter().filter(|&&b| b).count(), &zero, gamma));
            }
            let gamma = match cfg.lasso_gamma_mode {
                GammaMode::Fixed(g) => g,
                GammaMode::Heuristic => {
                    let h = lasso_gamma_heuristic(&g, &y);
                    if !(h > 0.0) {
                        return Ok(Attempt::Redraw("heuristic gamma is zero".into()));
                    }
                    h
                }
            };
            let sol = lasso_solve(&g, &y, gamma)?;
            if !sol.converged {
                log::warn!("trial {k}: lasso stopped at the iteration cap");
            }
            let v_tilde = match noisy_lasso(&sol.v, &g, &y) {
                Ok(t) => t,
                Err(Error::Degenerate(msg)) => return Ok(Attempt::Redraw(msg)),
                Err(e) => return Err(e),
            };
            let eta = lasso_fixed_point(&cfg.params, gamma)?.eta;
            let est = energy_detect(&v_tilde, asymptotic_threshold(&cfg.params, eta)?);
            Ok(done(count_errors(&est, &s.b), &sol.v, gamma))
        }
    }
}

fn run_one(cfg: &SimConfig, k: usize, lmmse_eta: f64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(cfg.base_seed, k as u64);
    for redraw in 0..=MAX_REDRAWS {
        match attempt(cfg, &mut rng, k, lmmse_eta)? {
            Attempt::Done(mut t) => {
                t.redraws = redraw;
                return Ok(t);
            }
            Attempt::Redraw(why) => log::info!("trial {k}: redrawn ({why})"),
        }
    }
    Err(Error::Degenerate(format!("trial {k}: {MAX_REDRAWS} degenerate draws in a row")))
}

fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / t;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1.0);
    (mean, 1.96 * (var / t).sqrt())
}

/// Runs `cfg.trials` independent trials. Results are in trial order and do not
/// depend on the number of worker threads.
pub fn run_trials(cfg: &SimConfig) -> Result<SimSummary> {
    cfg.validate()?;
    if cfg.trials < 30 {
        log::warn!("{} trials: normal-approximation confidence intervals are unreliable below 30", cfg.trials);
    }
    let lmmse_eta = cfg.params.ensemble.lmmse_efficiency(cfg.params.snr())?;
    let results: Vec<Result<TrialOutcome>> =
        (0..cfg.trials).into_par_iter().map(|k| run_one(cfg, k, lmmse_eta)).collect();
    let mut per_trial = Vec::with_capacity(cfg.trials);
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => per_trial.push(t),
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    if per_trial.is_empty() {
        return Err(Error::Degenerate(format!("all {} trials failed", cfg.trials)));
    }
    let n = cfg.n as f64;
    let fr: Vec<f64> = per_trial.iter().map(|t| t.support_errors as f64 / n).collect();
    let se: Vec<f64> = per_trial.iter().map(|t| t.squared_error).collect();
    let (d_hat, d_ci95) = mean_ci(&fr);
    let (mse_hat, mse_ci95) = mean_ci(&se);
    let gamma_mean = per_trial.iter().map(|t| t.gamma_used).sum::<f64>() / per_trial.len() as f64;
    Ok(SimSummary { d_hat, d_ci95, mse_hat, mse_ci95, gamma_mean, per_trial, failures })
}

pub const TRIAL_CSV_HEADER: [&str; 10] = [
    "trial_index",
    "n",
    "p",
    "q",
    "snr_db",
    "matrix_kind",
    "estimator",
    "gamma_used",
    "support_errors",
    "squared_error",
];

/// One CSV row per trial, header first.
pub fn write_trials_csv<W: Write>(w: W, cfg: &SimConfig, summary: &SimSummary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Domain(format!("csv output: {e}"));
    out.write_record(TRIAL_CSV_HEADER).map_err(io)?;
    let snr_db = cfg.params.source().snr_db();
    for t in &summary.per_trial {
        out.write_record([
            t.trial_index.to_string(),
            cfg.n.to_string(),
            cfg.params.p().to_string(),
            cfg.params.q.to_string(),
            snr_db.to_string(),
            cfg.matrix_kind.name().to_string(),
            cfg.estimator.kind().name().to_string(),
            t.gamma_used.to_string(),
            t.support_errors.to_string(),
            t.squared_error.to_string(),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| Error::Domain(format!("csv output: {e}")))?;
    Ok(())
}
