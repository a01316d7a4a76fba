//! Parameter points shared by the benchmarks.

use freecs_core::{BernoulliGaussianSource, Ensemble};

/// (ensemble, q, snr_db) operating points: moderate SNR and the multi-solution regime.
pub fn operating_points() -> Vec<(Ensemble, f64, f64)> {
    vec![
        (Ensemble::haar(0.4).unwrap(), 0.2, 20.0),
        (Ensemble::iid(0.4).unwrap(), 0.2, 20.0),
        (Ensemble::haar(0.23).unwrap(), 0.2, 50.0),
    ]
}

pub fn source(q: f64, snr_db: f64) -> BernoulliGaussianSource {
    BernoulliGaussianSource::from_snr_db(q, snr_db).unwrap()
}
