//! Submatrix detection: observation models, detection tests, the planted
//! clique reduction, numerical oracles, estimators and experiment drivers.

pub mod detectors;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod format;
pub mod model;
pub mod normal;
pub mod oracles;
pub mod plantedclique;
pub mod reduction;
pub mod rng;

pub use detectors::{error_bounds, regime, t_lin, t_max, t_scan, thresholds, ScanBudget, ScanResult, ErrorBoundReport, Regime, TestOutcome, Thresholds};
pub use error::{Error, Result};
pub use model::{quantize, DataMatrix, DyadicReal, MeanMatrixSpec, QuantizedMatrix};
pub use oracles::{DiscreteDist, MCEstimate};
pub use plantedclique::{AdjacencyMatrix, FoldReport};
pub use reduction::{CoinLedger, ReductionParams, TruncatedPair};
pub use rng::{CoinSource, SeededCoins, StreamKey};
