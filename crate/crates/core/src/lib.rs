//! Open-system simulation of a coined quantum walk on a chain of qutrits
//! linked by cavities.
//!
//! The walker is the position of the one excited qutrit and the coin is its
//! level (`f` or `e`). Each walk step is a coin pulse followed by two
//! cavity-mediated swaps; the chain is evolved under a Lindblad master
//! equation and the resulting walker distribution is compared with the ideal
//! walk.

pub mod error;
pub mod harness;
pub mod idealwalk;
pub mod linalg;
pub mod lindblad;
pub mod metrics;
pub mod protocol;
pub mod statespace;

pub use error::{Error, Result};
pub use idealwalk::{coin_matrix, run_ideal, CoinState, Distribution, WalkState};
pub use lindblad::{
    build_collapse_set, evolve_schedule, evolve_segment, liouvillian_apply, CollapseSet, DecoherenceRates,
    DensityMatrix, IntegratorConfig, Method,
};
pub use metrics::{extract_distribution, similarity, SimilarityResult};
pub use protocol::{build_schedule, h_coin, h_load, h_unload, Schedule, Segment, SegmentKind};
pub use statespace::{BasisLabel, DeviceParams, Level, Operator, SpaceMode, StateSpace};
