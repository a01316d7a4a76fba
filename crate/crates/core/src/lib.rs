//! Asymptotic support-recovery analysis for Bernoulli-Gaussian signals
//! observed through randomly sampled free random matrices.

pub mod ensembles;
pub mod estimators;
pub mod error;
pub mod montecarlo;
pub mod quadrature;
pub mod replica;
pub mod scalar_channel;
pub mod units;

pub use ensembles::{Ensemble, EnsembleKind};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, EstimatorReport, LassoRule, LassoSigma2, MismatchedFixedPoint};
pub use montecarlo::{GammaMode, MatrixKind, SimConfig, SimEstimator, SimSummary, TrialOutcome};
pub use replica::{FixedPointSolution, MatchedSolutions, SystemParams};
pub use scalar_channel::{BernoulliGaussianSource, DecoupledChannel, MapThreshold};
pub use units::Units;
