//! Sweeps over the `(alpha, beta)` phase diagram, the end-to-end reduction
//! demo and the self-check suite.

pub mod demo;
pub mod svg;
pub mod sweep;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use demo::{run_reduction_demo, DemoConfig, DemoReport};
pub use svg::phase_diagram;
pub use sweep::{run_sweep, sweep_k, sweep_lambda, CellStatus, CellTiming, SweepCell, SweepConfig, SweepReport};
pub use verify::{run_verify, Check, VerifyReport, VerifyScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Lin = 0,
    Scan = 1,
    Max = 2,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestKind::Lin => "lin",
            TestKind::Scan => "scan",
            TestKind::Max => "max",
        })
    }
}

impl std::str::FromStr for TestKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "lin" => Ok(TestKind::Lin),
            "scan" => Ok(TestKind::Scan),
            "max" => Ok(TestKind::Max),
            _ => Err(crate::Error::InvalidParameter(format!("unknown test '{s}' (expected lin, scan or max)"))),
        }
    }
}
