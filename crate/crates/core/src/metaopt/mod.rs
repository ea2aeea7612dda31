//! Learned optimizer: three update networks unrolled over inner iterations,
//! trained on a penalized sum-rate loss.

pub mod algorithm;
pub mod config;
pub mod loss;
pub mod problem;
pub mod steps;

pub use algorithm::{
    initial_beamformers, initial_powers, initialize, project_to_feasible, run_algorithm1, run_algorithm1_observed,
    train_from, EpochLog, TrainEvent, TrainFailure, TrainResult,
};
pub use config::{InputScaling, MetaConfig, MetaMode, PenaltyWeights};
pub use loss::{meta_loss, meta_loss_on, MetaLossBreakdown};
pub use problem::{Problem, SurfaceLayout};
pub use steps::{
    phase_regulator, rate_gradient_p, rate_gradient_phases, rate_gradient_w, rbn_batch, rbn_step, rbn_step_on,
    smn_block_input, smn_step, smn_step_on, smn_widths, tpn_batch, tpn_step, tpn_step_on, BoundNetworks, Networks,
};
