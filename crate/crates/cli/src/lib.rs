//! Sweeps and simulation reports as CSV text.
//!
//! Each `cmd_*` function returns the full file contents: a header row, one row
//! per point, and optional footer rows starting with `#`.

use std::fmt::Write as _;

use freecs_core::estimators::{
    amp_conjectured_performance, lasso_best_over_with, lasso_gamma_grid, lasso_performance_with,
    lmmse_performance, map_sbs_performance, EstimatorReport, LassoRule,
};
use freecs_core::montecarlo::{run_trials, write_trials_csv, GammaMode, SimConfig, SimEstimator, SimSummary};
use freecs_core::replica::{
    bound_mf_upper, bound_shannon_upper, bound_sic_lower, bound_unitary_upper, distortion_lower_bound,
    free_energy_i1, matched_mapping, mutual_info_total, solve_matched, Stability, SystemParams,
};
use freecs_core::scalar_channel::{binary_entropy, mmse_bg};
use freecs_core::{EnsembleKind, Error, Result, Units};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    P,
    SnrDb,
    Gamma,
}

impl Axis {
    pub fn column(self) -> &'static str {
        match self {
            Axis::P => "p",
            Axis::SnrDb => "snr_db",
            Axis::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// `fixed` carries every parameter; the swept one is overwritten per point.
#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: Scale,
    pub fixed: SystemParams,
    pub units: Units,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.start < self.stop) {
            return Err(Error::Domain(format!("sweep start {} must be below stop {}", self.start, self.stop)));
        }
        if self.points < 2 {
            return Err(Error::Domain(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        if self.scale == Scale::Log && self.start <= 0.0 {
            return Err(Error::Domain("log-scale sweep needs a positive start".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let m = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let t = k as f64 / m;
                match self.scale {
                    Scale::Linear => self.start * (1.0 - t) + self.stop * t,
                    Scale::Log => self.start * (self.stop / self.start).powf(t),
                }
            })
            .collect()
    }

    /// Parameters at one sweep value. For a `Gamma` sweep they are `fixed`.
    pub fn params_at(&self, x: f64) -> Result<SystemParams> {
        match self.axis {
            Axis::P => self.fixed.with_p(x),
            Axis::SnrDb => SystemParams::from_snr_db(self.fixed.ensemble, self.fixed.q, x),
            Axis::Gamma => Ok(self.fixed),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn cell(r: &Result<f64>, flags: &mut Vec<String>, col: &str) -> String {
    match r {
        Ok(v) => num(*v),
        Err(e) => {
            flags.push(format!("{col}:{}", e.kind()));
            String::new()
        }
    }
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub const INFO_COLUMNS: [&str; 9] = ["i_total", "i1", "i2", "ub_unitary", "ub_shannon", "ub_mf", "lb_sic", "clipped", "flag"];

/// Information rate, its two parts and the bounds along a `p` or SNR sweep.
///
/// `ub_shannon`, `ub_mf` and `lb_sic` bound `i1`; `ub_unitary` bounds
/// `i_total` and is empty for the iid ensemble.
pub fn cmd_info(spec: &SweepSpec) -> Result<String> {
    spec.validate()?;
    if spec.axis == Axis::Gamma {
        return Err(Error::Domain("info sweeps p or snr_db, not gamma".into()));
    }
    let u = spec.units;
    let xs = spec.values();
    let rows: Vec<(Vec<String>, Option<(f64, f64)>)> = xs
        .par_iter()
        .map(|&x| {
            let mut flags = Vec::new();
            let params = match spec.params_at(x) {
                Ok(p) => p,
                Err(e) => {
                    let mut cells = vec![num(x)];
                    cells.extend(std::iter::repeat_n(String::new(), 8));
                    cells.push(format!("params:{}", e.kind()));
                    return (cells, None);
                }
            };
            let conv = |r: Result<f64>| r.map(|v| u.from_nats(v));
            let total = mutual_info_total(&params);
            let i1 = total.as_ref().map(|t| u.from_nats(t.i1)).map_err(Clone::clone);
            let lb = conv(bound_sic_lower(&params));
            let mut cells = vec![num(x)];
            cells.push(cell(&total.as_ref().map(|t| u.from_nats(t.i)).map_err(Clone::clone), &mut flags, "i_total"));
            cells.push(cell(&i1, &mut flags, "i1"));
            cells.push(cell(&total.as_ref().map(|t| u.from_nats(t.i2)).map_err(Clone::clone), &mut flags, "i2"));
            cells.push(match params.ensemble.kind {
                EnsembleKind::Haar => cell(&conv(bound_unitary_upper(&params)), &mut flags, "ub_unitary"),
                EnsembleKind::IidVar1OverN => String::new(),
            });
            cells.push(cell(&conv(bound_shannon_upper(&params)), &mut flags, "ub_shannon"));
            cells.push(cell(&conv(bound_mf_upper(&params)), &mut flags, "ub_mf"));
            cells.push(cell(&lb, &mut flags, "lb_sic"));
            cells.push(total.as_ref().map_or(String::new(), |t| u8::from(t.clipped).to_string()));
            cells.push(flags.join(";"));
            let gap = match (i1, lb) {
                (Ok(a), Ok(b)) => Some((x, a - b)),
                _ => None,
            };
            (cells, gap)
        })
        .collect();
    let mut out = String::new();
    let mut header = vec![spec.axis.column()];
    header.extend(INFO_COLUMNS);
    push_row(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let mut worst: Option<(f64, f64)> = None;
    for (cells, gap) in rows {
        push_row(&mut out, &cells);
        if let Some((x, g)) = gap {
            if worst.is_none_or(|(_, w)| g > w) {
                worst = Some((x, g));
            }
        }
    }
    writeln!(out, "# units,{u}").unwrap();
    writeln!(out, "# h_q,{}", num(u.from_nats(binary_entropy(spec.fixed.q)?))).unwrap();
    if let Some((x, g)) = worst {
        writeln!(out, "# max_gap_i1_lb_sic,{},at_{},{}", num(g), spec.axis.column(), num(x)).unwrap();
    }
    Ok(out)
}

/// Mapping function of the matched fixed-point equation and its solutions.
pub struct FixedPointTables {
    /// `inv_eta, f_inv_eta, free_energy`, with `free_energy` evaluated at
    /// `chi = mmse(eta)`.
    pub mapping: String,
    /// `inv_eta, stability, i1, selected, rightmost`.
    pub solutions: String,
}

pub fn cmd_fixedpoint(params: &SystemParams, grid: &[f64], units: Units) -> Result<FixedPointTables> {
    if grid.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Domain("1/eta grid must be positive".into()));
    }
    let src = params.source();
    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&s| {
            let mut flags = Vec::new();
            let f = matched_mapping(params, s);
            let fe = mmse_bg(&src, 1.0 / s).and_then(|chi| free_energy_i1(params, 1.0 / s, chi)).map(|v| units.from_nats(v));
            vec![num(s), cell(&f, &mut flags, "f"), cell(&fe, &mut flags, "free_energy"), flags.join(";")]
        })
        .collect();
    let mut mapping = String::from("inv_eta,f_inv_eta,free_energy,flag\n");
    for r in rows {
        push_row(&mut mapping, &r);
    }
    writeln!(mapping, "# units,{units}").unwrap();

    let sols = solve_matched(params)?;
    let mut solutions = String::from("inv_eta,stability,i1,selected,rightmost\n");
    for (k, s) in sols.solutions.iter().enumerate() {
        let stab = match s.stability {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        };
        push_row(
            &mut solutions,
            &[
                num(s.inv_eta()),
                stab.to_string(),
                num(units.from_nats(s.free_energy_i1)),
                u8::from(k == sols.selected).to_string(),
                u8::from(k == sols.rightmost).to_string(),
            ],
        );
    }
    writeln!(solutions, "# units,{units}").unwrap();
    Ok(FixedPointTables { mapping, solutions })
}

/// How the Lasso column picks its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LassoGamma {
    /// Smallest error rate over `lasso_gamma_grid` with this many points.
    Best(usize),
    Fixed(f64),
}

pub const DISTORTION_COLUMNS: [&str; 8] =
    ["d_map", "d_amp_conjectured", "d_lmmse", "d_lasso", "lasso_gamma", "d_lower_bound", "map_solutions", "flag"];

/// Support-recovery error rates along a sweep. On a `Gamma` sweep the Lasso
/// weight is the swept value.
pub fn cmd_distortion(spec: &SweepSpec, lasso: LassoGamma, rule: LassoRule) -> Result<String> {
    spec.validate()?;
    let xs = spec.values();
    let rows: Vec<(Vec<String>, Option<f64>)> = xs
        .par_iter()
        .map(|&x| {
            let mut flags = Vec::new();
            let params = match spec.params_at(x) {
                Ok(p) => p,
                Err(e) => {
                    let mut cells = vec![num(x)];
                    cells.extend(std::iter::repeat_n(String::new(), 7));
                    cells.push(format!("params:{}", e.kind()));
                    return (cells, None);
                }
            };
            let d = |r: Result<EstimatorReport>| r.map(|r| r.error_rate);
            let map = map_sbs_performance(&params);
            let lasso_r = match (spec.axis, lasso) {
                (Axis::Gamma, _) => lasso_performance_with(&params, &rule, x),
                (_, LassoGamma::Fixed(g)) => lasso_performance_with(&params, &rule, g),
                (_, LassoGamma::Best(n)) => lasso_best_over_with(&params, &rule, &lasso_gamma_grid(&params, n)),
            };
            if let Ok(r) = &lasso_r {
                if r.selection_extrapolated {
                    flags.push("lasso:extrapolated".into());
                }
            }
            let gap = match (&map, &lasso_r) {
                (Ok(m), Ok(l)) => Some(l.error_rate - m.error_rate),
                _ => None,
            };
            let cells = vec![
                num(x),
                cell(&d(map.clone()), &mut flags, "d_map"),
                cell(&d(amp_conjectured_performance(&params)), &mut flags, "d_amp_conjectured"),
                cell(&d(lmmse_performance(&params)), &mut flags, "d_lmmse"),
                cell(&d(lasso_r.clone()), &mut flags, "d_lasso"),
                lasso_r.as_ref().ok().and_then(|r| r.gamma_used).map_or(String::new(), num),
                cell(&distortion_lower_bound(&params), &mut flags, "d_lower_bound"),
                map.as_ref().map_or(String::new(), |r| r.multiplicity.to_string()),
                flags.join(";"),
            ];
            (cells, gap)
        })
        .collect();
    let mut out = String::new();
    let mut header = vec![spec.axis.column()];
    header.extend(DISTORTION_COLUMNS);
    push_row(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let mut gaps = Vec::new();
    for (cells, gap) in rows {
        push_row(&mut out, &cells);
        gaps.extend(gap);
    }
    let src = spec.fixed.source();
    writeln!(out, "# snr_db,{}", num(src.snr_db())).unwrap();
    if !gaps.is_empty() {
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        writeln!(out, "# lasso_minus_map_mean,{}", num(mean)).unwrap();
        writeln!(out, "# lasso_minus_map_max,{}", num(max)).unwrap();
    }
    Ok(out)
}

/// Simulation summary with optional asymptotic comparison, plus the
/// per-trial rows of every point.
pub struct SimulateOutput {
    pub summary: String,
    pub trials: String,
}

pub const SIMULATE_COLUMNS: [&str; 13] = [
    "n",
    "p",
    "q",
    "snr_db",
    "matrix_kind",
    "estimator",
    "trials",
    "failures",
    "d_hat",
    "d_ci95",
    "mse_hat",
    "mse_ci95",
    "gamma_mean",
];

pub const COMPARE_COLUMNS: [&str; 5] = ["d_asymptotic", "mse_asymptotic", "z_d", "z_mse", "flag"];

/// Asymptotic counterpart of a simulation: the linear MMSE curve, or the
/// Lasso curve at the fixed weight or at the mean of the per-trial weights.
pub fn asymptotic_for(cfg: &SimConfig, summary: &SimSummary, rule: LassoRule) -> Result<EstimatorReport> {
    match cfg.estimator {
        SimEstimator::Lmmse => lmmse_performance(&cfg.params),
        SimEstimator::Lasso => {
            let g = match cfg.lasso_gamma_mode {
                GammaMode::Fixed(g) => g,
                GammaMode::Heuristic => summary.gamma_mean,
            };
            lasso_performance_with(&cfg.params, &rule, g)
        }
    }
}

fn z(hat: f64, ci: f64, target: f64) -> f64 {
    let se = ci / 1.96;
    if se > 0.0 {
        (hat - target) / se
    } else if hat == target {
        0.0
    } else {
        f64::INFINITY.copysign(hat - target)
    }
}

/// Runs each configuration in turn; trials inside a configuration run in
/// parallel. Output is identical for any thread count.
pub fn cmd_simulate(cfgs: &[SimConfig], compare: bool, rule: LassoRule) -> Result<SimulateOutput> {
    let mut summary = String::new();
    let mut header: Vec<&str> = SIMULATE_COLUMNS.to_vec();
    if compare {
        header.extend(COMPARE_COLUMNS);
    }
    push_row(&mut summary, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let mut trials = Vec::new();
    let mut first = true;
    for cfg in cfgs {
        let s = run_trials(cfg)?;
        for (k, msg) in &s.failures {
            writeln!(summary, "# failure,{},{},{}", num(cfg.params.p()), k, msg.replace(',', ";")).unwrap();
        }
        let src = cfg.params.source();
        let mut cells = vec![
            cfg.n.to_string(),
            num(cfg.params.p()),
            num(cfg.params.q),
            num(src.snr_db()),
            cfg.matrix_kind.name().to_string(),
            cfg.estimator.kind().name().to_string(),
            cfg.trials.to_string(),
            s.failures.len().to_string(),
            num(s.d_hat),
            num(s.d_ci95),
            num(s.mse_hat),
            num(s.mse_ci95),
            num(s.gamma_mean),
        ];
        if compare {
            match asymptotic_for(cfg, &s, rule) {
                Ok(a) => {
                    cells.push(num(a.error_rate));
                    cells.push(num(a.mse));
                    cells.push(num(z(s.d_hat, s.d_ci95, a.error_rate)));
                    cells.push(num(z(s.mse_hat, s.mse_ci95, a.mse)));
                    cells.push(if a.selection_extrapolated { "asymptotic:extrapolated".into() } else { String::new() });
                }
                Err(e) => {
                    cells.extend(std::iter::repeat_n(String::new(), 4));
                    cells.push(format!("asymptotic:{}", e.kind()));
                }
            }
        }
        push_row(&mut summary, &cells);
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, cfg, &s)?;
        let text = String::from_utf8(buf).expect("csv output is utf-8");
        if first {
            trials.push(text);
            first = false;
        } else {
            // drop the repeated header
            trials.push(text.split_once('\n').map_or(String::new(), |(_, rest)| rest.to_string()));
        }
    }
    Ok(SimulateOutput { summary, trials: trials.concat() })
}

/// `p` values from a single value or a `start,stop[,points]` range.
pub fn p_values(p: Option<f64>, range: Option<&[f64]>, default_points: usize) -> Result<Vec<f64>> {
    match (p, range) {
        (Some(_), Some(_)) => Err(Error::Domain("give either --p or --p-range".into())),
        (Some(p), None) => Ok(vec![p]),
        (None, Some(r)) => {
            let (a, b, n) = parse_range(r, default_points)?;
            Ok((0..n).map(|k| k as f64 / (n - 1) as f64).map(|t| a * (1.0 - t) + b * t).collect())
        }
        (None, None) => Err(Error::Domain("missing --p or --p-range".into())),
    }
}

/// `start,stop` or `start,stop,points`.
pub fn parse_range(r: &[f64], default_points: usize) -> Result<(f64, f64, usize)> {
    match r {
        [a, b] => Ok((*a, *b, default_points)),
        [a, b, n] if *n >= 2.0 && n.fract() == 0.0 => Ok((*a, *b, *n as usize)),
        _ => Err(Error::Domain(format!("range must be start,stop[,points], got {r:?}"))),
    }
}
