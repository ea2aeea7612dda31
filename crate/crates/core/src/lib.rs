//! Meta-learned joint optimization of receive beamformers, stream powers and
//! a beyond-diagonal RIS scattering matrix for two-user uplink RSMA.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod autodiff;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metaopt;
pub mod scalar;
pub mod sysmodel;

pub use autodiff::DiffMatrix;
pub use error::{Error, Result};

pub type Matrix = linalg::CMatrix<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type Mlp = autodiff::Mlp<f64>;
pub type AdamState = autodiff::AdamState<f64>;
pub type ChannelSet = channel::ChannelSet<f64>;
pub type ScatteringMatrix = sysmodel::ScatteringMatrix<f64>;
pub type Solution = sysmodel::Solution<f64>;
pub type Budgets = sysmodel::Budgets<f64>;
pub type ConstraintResiduals = sysmodel::ConstraintResiduals<f64>;
pub type Problem = metaopt::Problem<f64>;
pub type Networks = metaopt::Networks<f64>;
pub type TrainResult = metaopt::TrainResult<f64>;
pub type MetaLossBreakdown = metaopt::MetaLossBreakdown<f64>;
pub type BaselineResult = baselines::BaselineResult<f64>;
