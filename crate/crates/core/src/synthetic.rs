//! Deterministic synthetic datasets for tests and benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DataMatrix, LabeledDataset};

/// Standard normal draw via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Gaussian blobs where only the first `informative` features carry cluster
/// structure; the remaining `noise` features are pure noise shared by all
/// clusters.
///
/// On informative axis f, the cluster with (f + c) % clusters == 0 centers
/// at `separation` and the rest at zero, so every informative axis separates
/// some cluster from the others. Instances are cluster-major and labeled
/// "c0", "c1", ...
#[allow(clippy::too_many_arguments)]
pub fn informative_noise_blobs(
    clusters: usize,
    per_cluster: usize,
    informative: usize,
    noise: usize,
    separation: f64,
    signal_std: f64,
    noise_std: f64,
    seed: u64,
) -> LabeledDataset {
    assert!(clusters >= 1 && per_cluster >= 1 && informative >= 1);
    let d = informative + noise;
    let n = clusters * per_cluster;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut values = Array2::zeros((d, n));
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..clusters {
        for member in 0..per_cluster {
            let col = cluster * per_cluster + member;
            for f in 0..informative {
                let center = if (f + cluster) % clusters == 0 {
                    separation
                } else {
                    0.0
                };
                values[[f, col]] = center + signal_std * normal(&mut rng);
            }
            for f in informative..d {
                values[[f, col]] = noise_std * normal(&mut rng);
            }
            labels.push(format!("c{cluster}"));
        }
    }

    let data = DataMatrix::from_values(values).expect("valid synthetic matrix");
    LabeledDataset::new(data, Some(labels)).expect("labels match instance count")
}

/// Uniformly random d x N data matrix.
pub fn random_matrix(d: usize, n: usize, lo: f64, hi: f64, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((d, n));
    values.mapv_inplace(|_: f64| rng.gen_range(lo..hi));
    DataMatrix::from_values(values).expect("valid random matrix")
}
