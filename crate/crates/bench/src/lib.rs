//! Fixtures shared by the benchmarks.

use subdetect::plantedclique::{sample_planted, AdjacencyMatrix};
use subdetect::{DataMatrix, MeanMatrixSpec, ReductionParams, StreamKey};

/// A noisy matrix with a planted `k x k` block of height `lambda`.
pub fn planted_matrix(p: usize, k: usize, lambda: f64, seed: u64) -> DataMatrix {
    let theta = MeanMatrixSpec::leading_block(p, k, lambda).expect("valid block");
    subdetect::model::sample_gaussian(&theta, StreamKey::new(seed))
}

/// Small reduction parameters (`p = 8`, `l = 2`, `w = 10`) and a planted graph to match.
pub fn desk_instance(seed: u64) -> (ReductionParams, AdjacencyMatrix) {
    let params = ReductionParams::desk(8, 1, 2, 8, 10).expect("valid parameters");
    let g = sample_planted(params.n, params.kappa, StreamKey::new(seed)).expect("kappa fits");
    (params, g)
}
