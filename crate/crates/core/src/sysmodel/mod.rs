//! BD-RIS scattering matrices, effective channels, stream rates, constraint
//! residuals and symmetric-unitary feasibility utilities.

pub mod constraints;
pub mod rates;
pub mod scattering;
pub mod unitary;

pub use constraints::{block_residuals, constraint_residuals, residuals_on, Budgets, ConstraintResiduals, ResidualNodes};
pub use rates::{
    effective_channel, evaluate_rates, rate_r11, rate_r12, rate_r2, rates_on, sum_rate, RateNodes, Rates, Solution,
    StackedChannels,
};
pub use scattering::{group_layout, Architecture, MagnitudeMode, ScatteringMatrix};
pub use unitary::{random_symmetric_unitary, symmetric_unitary_from_generator, takagi, takagi_project};
