use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freecs_tool::*;
use freecs_core::estimators::{LassoRule, LassoSigma2};
use freecs_core::montecarlo::{GammaMode, MatrixKind, SimConfig, SimEstimator};
use freecs_core::replica::SystemParams;
use freecs_core::{Ensemble, EnsembleKind, Error, Units};

#[derive(Parser)]
#[command(name = "freecs", version, about = "Support-recovery asymptotics and simulations for sampled free random matrices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mutual-information rate and bounds versus p or SNR
    Info(SweepArgs),
    /// Fixed-point mapping function and its solutions at one p
    Fixedpoint(FixedpointArgs),
    /// Support-recovery error rates versus p, SNR or the Lasso weight
    Distortion(DistortionArgs),
    /// Finite-n Monte Carlo simulation
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Iid,
    Haar,
    Dft,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Bits,
    Nats,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sigma2Arg {
    Divergence,
    Radial,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "haar")]
    ensemble: EnsembleArg,
    /// Activity probability
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    /// SNR = q Px in dB
    #[arg(long = "snr-db", default_value_t = 20.0, allow_hyphen_values = true)]
    snr_db: f64,
    #[arg(long, value_enum, default_value = "bits")]
    units: UnitsArg,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Sampling rate, when another axis is swept
    #[arg(long)]
    p: Option<f64>,
    /// start,stop[,points]
    #[arg(long = "p-range", value_delimiter = ',')]
    p_range: Option<Vec<f64>>,
    /// start,stop[,points] in dB
    #[arg(long = "snr-range", value_delimiter = ',', allow_hyphen_values = true)]
    snr_range: Option<Vec<f64>>,
    /// start,stop[,points] for the Lasso weight (distortion only)
    #[arg(long = "gamma-range", value_delimiter = ',')]
    gamma_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 40)]
    points: usize,
    #[arg(long, value_enum, default_value = "linear")]
    scale: ScaleArg,
}

#[derive(Args)]
struct FixedpointArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p: f64,
    /// start,stop[,points] of the geometric 1/eta grid
    #[arg(long = "inv-eta-range", value_delimiter = ',')]
    inv_eta_range: Option<Vec<f64>>,
    /// Solutions table; `<out>.solutions.csv` when --out is given, else stdout
    #[arg(long = "solutions-out")]
    solutions_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistGammaMode {
    Best,
    Fixed,
}

#[derive(Args)]
struct DistortionArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Lasso weight for --gamma-mode fixed
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "gamma-mode", value_enum, default_value = "best")]
    gamma_mode: DistGammaMode,
    /// Grid size when minimizing over the Lasso weight
    #[arg(long = "gamma-points", default_value_t = 40)]
    gamma_points: usize,
    #[arg(long = "lasso-sigma2", value_enum, default_value = "divergence")]
    lasso_sigma2: Sigma2Arg,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Lmmse,
    Lasso,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimGammaMode {
    Heuristic,
    Fixed,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p: Option<f64>,
    /// start,stop[,points]
    #[arg(long = "p-range", value_delimiter = ',')]
    p_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "lmmse")]
    estimator: EstimatorArg,
    /// Lasso weight for --gamma-mode fixed
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "gamma-mode", value_enum, default_value = "heuristic")]
    gamma_mode: SimGammaMode,
    /// Add asymptotic values and z-scores
    #[arg(long)]
    compare: bool,
    /// Per-trial CSV
    #[arg(long = "trials-out")]
    trials_out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long = "lasso-sigma2", value_enum, default_value = "divergence")]
    lasso_sigma2: Sigma2Arg,
}

fn units(u: UnitsArg) -> Units {
    match u {
        UnitsArg::Bits => Units::Bits,
        UnitsArg::Nats => Units::Nats,
    }
}

fn rule(s: Sigma2Arg) -> LassoRule {
    LassoRule {
        sigma2: match s {
            Sigma2Arg::Divergence => LassoSigma2::Divergence,
            Sigma2Arg::Radial => LassoSigma2::Radial,
        },
    }
}

/// Asymptotic ensemble; the DFT matrix is modeled by the Haar ensemble.
fn ensemble_kind(e: EnsembleArg, allow_dft: bool) -> freecs_core::Result<EnsembleKind> {
    match e {
        EnsembleArg::Iid => Ok(EnsembleKind::IidVar1OverN),
        EnsembleArg::Haar => Ok(EnsembleKind::Haar),
        EnsembleArg::Dft if allow_dft => Ok(EnsembleKind::Haar),
        EnsembleArg::Dft => Err(Error::Domain("--ensemble dft is only available for simulate".into())),
    }
}

fn params(c: &Common, p: f64, allow_dft: bool) -> freecs_core::Result<SystemParams> {
    SystemParams::from_snr_db(Ensemble::new(ensemble_kind(c.ensemble, allow_dft)?, p)?, c.q, c.snr_db)
}

fn sweep_spec(a: &SweepArgs) -> freecs_core::Result<SweepSpec> {
    let given = [a.p_range.is_some(), a.snr_range.is_some(), a.gamma_range.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Error::Domain("give exactly one of --p-range, --snr-range, --gamma-range".into()));
    }
    let (axis, range) = if let Some(r) = &a.p_range {
        (Axis::P, r)
    } else if let Some(r) = &a.snr_range {
        (Axis::SnrDb, r)
    } else {
        (Axis::Gamma, a.gamma_range.as_ref().unwrap())
    };
    let (start, stop, points) = parse_range(range, a.points)?;
    let p = match (axis, a.p) {
        (Axis::P, _) => start.max(1e-6).min(1.0),
        (_, Some(p)) => p,
        (_, None) => return Err(Error::Domain("--p is required unless --p-range is swept".into())),
    };
    let scale = match a.scale {
        ScaleArg::Linear => Scale::Linear,
        ScaleArg::Log => Scale::Log,
    };
    Ok(SweepSpec { axis, start, stop, points, scale, fixed: params(&a.common, p, false)?, units: units(a.common.units) })
}

fn write_out(path: Option<&Path>, text: &str) -> freecs_core::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Domain(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> freecs_core::Result<()> {
    match cli.cmd {
        Cmd::Info(a) => {
            let spec = sweep_spec(&a)?;
            write_out(a.common.out.as_deref(), &cmd_info(&spec)?)
        }
        Cmd::Fixedpoint(a) => {
            let sp = params(&a.common, a.p, false)?;
            let (lo, hi, n) = match &a.inv_eta_range {
                Some(r) => parse_range(r, 200)?,
                None => (0.1, 10.0 * (1.0 + sp.snr()) / sp.p().max(1e-3), 200),
            };
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Domain("1/eta range must satisfy 0 < start < stop".into()));
            }
            let grid: Vec<f64> = (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect();
            let t = cmd_fixedpoint(&sp, &grid, units(a.common.units))?;
            let sol_path = a.solutions_out.clone().or_else(|| a.common.out.as_ref().map(|o| o.with_extension("solutions.csv")));
            write_out(a.common.out.as_deref(), &t.mapping)?;
            if sol_path.is_none() {
                println!();
            }
            write_out(sol_path.as_deref(), &t.solutions)
        }
        Cmd::Distortion(a) => {
            let spec = sweep_spec(&a.sweep)?;
            let lasso = match (a.gamma_mode, a.gamma) {
                (DistGammaMode::Fixed, Some(g)) => LassoGamma::Fixed(g),
                (DistGammaMode::Fixed, None) => return Err(Error::Domain("--gamma-mode fixed needs --gamma".into())),
                (DistGammaMode::Best, _) => LassoGamma::Best(a.gamma_points.max(2)),
            };
            write_out(a.sweep.common.out.as_deref(), &cmd_distortion(&spec, lasso, rule(a.lasso_sigma2))?)
        }
        Cmd::Simulate(a) => {
            let kind = match a.common.ensemble {
                EnsembleArg::Iid => MatrixKind::IidGaussian,
                EnsembleArg::Haar => MatrixKind::Haar,
                EnsembleArg::Dft => MatrixKind::Dft,
            };
            let gamma_mode = match (a.gamma_mode, a.gamma) {
                (SimGammaMode::Fixed, Some(g)) => GammaMode::Fixed(g),
                (SimGammaMode::Fixed, None) => return Err(Error::Domain("--gamma-mode fixed needs --gamma".into())),
                (SimGammaMode::Heuristic, _) => GammaMode::Heuristic,
            };
            let estimator = match a.estimator {
                EstimatorArg::Lmmse => SimEstimator::Lmmse,
                EstimatorArg::Lasso => SimEstimator::Lasso,
            };
            let cfgs = p_values(a.p, a.p_range.as_deref(), 5)?
                .into_iter()
                .map(|p| {
                    Ok(SimConfig {
                        n: a.n,
                        matrix_kind: kind,
                        params: params(&a.common, p, true)?,
                        trials: a.trials,
                        base_seed: a.seed,
                        estimator,
                        lasso_gamma_mode: gamma_mode,
                    })
                })
                .collect::<freecs_core::Result<Vec<_>>>()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(a.threads)
                .build()
                .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
            let out = pool.install(|| cmd_simulate(&cfgs, a.compare, rule(a.lasso_sigma2)))?;
            write_out(a.common.out.as_deref(), &out.summary)?;
            if let Some(p) = &a.trials_out {
                write_out(Some(p), &out.trials)?;
            }
            Ok(())
        }
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn go(args: &[&str]) -> freecs_core::Result<()> {
        let mut argv = vec!["freecs"];
        argv.extend_from_slice(args);
        run(Cli::try_parse_from(argv).expect("arguments parse"))
    }

    #[test]
    fn info_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("info.csv");
        go(&["info", "--p-range", "0.3,0.6,3", "--snr-db", "10", "--out", out.to_str().unwrap()]).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("p,i_total"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
    }

    #[test]
    fn snr_sweep_needs_p() {
        assert!(go(&["info", "--snr-range", "0,20,3"]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("snr.csv");
        go(&["info", "--snr-range", "-10,20,3", "--p", "0.5", "--ensemble", "iid", "--out", out.to_str().unwrap()]).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("snr_db,"));
        assert!(text.contains("\n-10,"));
    }

    #[test]
    fn fixedpoint_writes_both_tables() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fp.csv");
        go(&["fixedpoint", "--p", "0.33", "--snr-db", "50", "--inv-eta-range", "1,1000,20", "--out", out.to_str().unwrap()]).unwrap();
        let sol = fs::read_to_string(dir.path().join("fp.solutions.csv")).unwrap();
        assert_eq!(sol.lines().filter(|l| !l.starts_with('#')).count(), 2);
        assert!(go(&["fixedpoint", "--p", "0.3", "--inv-eta-range", "5,1"]).is_err());
    }

    #[test]
    fn simulate_outputs_are_identical_across_runs_and_threads() {
        let dir = tempfile::tempdir().unwrap();
        let mut texts = Vec::new();
        for (k, threads) in ["1", "2"].iter().enumerate() {
            let out = dir.path().join(format!("s{k}.csv"));
            let tr = dir.path().join(format!("t{k}.csv"));
            go(&[
                "simulate", "--p", "0.6", "--n", "30", "--trials", "6", "--seed", "5", "--estimator", "lasso",
                "--threads", threads, "--out", out.to_str().unwrap(), "--trials-out", tr.to_str().unwrap(),
            ])
            .unwrap();
            texts.push((fs::read(&out).unwrap(), fs::read(&tr).unwrap()));
        }
        assert_eq!(texts[0], texts[1]);
    }

    #[test]
    fn invalid_requests_are_errors() {
        assert!(go(&["distortion", "--p-range", "0.3,0.5,2", "--ensemble", "dft"]).is_err());
        assert!(go(&["distortion", "--p-range", "0.3,0.5,2", "--gamma-mode", "fixed"]).is_err());
        assert!(go(&["simulate", "--p", "0.5", "--gamma-mode", "fixed", "--estimator", "lasso"]).is_err());
        assert!(go(&["simulate", "--p", "0.5", "--n", "1"]).is_err());
        assert!(Cli::try_parse_from(["freecs", "info", "--units", "furlongs"]).is_err());
    }

    #[test]
    fn error_line_is_json() {
        let line = error_line("domain", "bad \"p\"");
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"], "domain");
        assert_eq!(v["message"], "bad \"p\"");
        assert!(!line.contains('\n'));
    }
}
