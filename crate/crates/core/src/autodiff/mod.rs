//! Complex matrix arithmetic with reverse-mode gradients, the Adam rule, and
//! the small feed-forward networks used as learned update rules.

pub mod adam;
pub mod mlp;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use mlp::{mlp_forward, BoundMlp, Mlp, MlpOptimizer, HIDDEN_WIDTH};
pub use tape::{sigmoid, DiffMatrix, Tape};
