//! Quantum Fisher information for parameterized state and channel families.
//!
//! The crate computes SLD and RLD Fisher informations of states and
//! channels, Cramér–Rao bounds built from them, the generalized amplitude
//! damping channel example, and exports/certifies the associated
//! semi-definite programs.

pub mod bounds;
pub mod error;
pub mod families;
pub mod fisher_channel;
pub mod fisher_state;
pub mod format;
pub mod gadc;
pub mod linalg;
pub mod random;
pub mod sdp;
pub mod suite;

pub use bounds::{crb, heisenberg_verdict, BoundKind, BoundReport, BoundStatus, Scaling, Verdict};
pub use error::{Error, Result};
pub use families::{ChannelFamily, Differentiable, DistributionFamily, ParamPoint, StateFamily};
pub use fisher_channel::{ProbeConfig, ProbeResult, TraceConvention};
pub use fisher_state::{FisherKind, FisherMatrix, FisherValue, WeightMatrix};
pub use gadc::{GadcParam, GadcParams};
pub use linalg::{CMatrix, CVector, RMatrix, C64};
