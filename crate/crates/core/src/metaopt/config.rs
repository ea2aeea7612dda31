use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the meta loss and the SMN update are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaMode {
    /// Per-residual hinge penalties; SMN updates the upper triangle and mirrors
    /// it; the returned iterate is the one whose projection rates highest.
    #[default]
    Default,
    /// Group indicator times raw residual sum; SMN updates every phase entry;
    /// the returned iterate is the one with the largest `−L`.
    StrictPaper,
}

/// Transform applied to gradients before they enter a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputScaling {
    Raw,
    /// `sign(x)·ln(1 + |x|)`
    Log,
    /// Each batch divided by its largest magnitude.
    #[default]
    Normalized,
}

impl InputScaling {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            InputScaling::Raw => x,
            InputScaling::Log => x.signum() * x.abs().ln_1p(),
            // needs the whole batch; see `scale_batch`
            InputScaling::Normalized => x,
        }
    }
}

/// Multipliers of the four penalty groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyWeights {
    pub threshold: f64,
    pub norm: f64,
    pub ris: f64,
    pub power: f64,
}

impl Default for PenaltyWeights {
    // The norm and power weights must exceed the marginal rate gain of
    // inflating ‖w‖ or p, otherwise violating those constraints pays off.
    // The scattering term is light: the final Takagi projection restores
    // feasibility, and a heavy weight pins BD blocks to their start.
    fn default() -> Self {
        Self {
            threshold: 1.0,
            norm: 10.0,
            ris: 0.3,
            power: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    /// `N_i`
    pub inner_iterations: usize,
    /// `N_o`
    pub outer_iterations: usize,
    /// `N_e`
    pub epochs: usize,
    pub lr_w: f64,
    pub lr_p: f64,
    pub lr_phi: f64,
    /// Phase-regulator scale in radians.
    pub alpha: f64,
    /// θ_Φ is updated when `(e + 1) % smn_update_period == 0` (0-based `e`).
    pub smn_update_period: usize,
    pub penalty_weights: PenaltyWeights,
    pub mode: MetaMode,
    /// One SMN per group instead of a shared one; needed for unequal groups.
    pub per_group_smn: bool,
    pub input_scaling: InputScaling,
    /// TPN outputs are fractions of the stream's power cap instead of watts.
    pub power_in_budget_units: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            inner_iterations: 10,
            outer_iterations: 5,
            epochs: 300,
            lr_w: 1e-3,
            lr_p: 1e-3,
            lr_phi: 1.5e-3,
            alpha: std::f64::consts::TAU,
            smn_update_period: 5,
            penalty_weights: PenaltyWeights::default(),
            mode: MetaMode::Default,
            per_group_smn: false,
            input_scaling: InputScaling::Normalized,
            power_in_budget_units: true,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("inner_iterations", self.inner_iterations),
            ("outer_iterations", self.outer_iterations),
            ("epochs", self.epochs),
            ("smn_update_period", self.smn_update_period),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("lr_w", self.lr_w), ("lr_p", self.lr_p), ("lr_phi", self.lr_phi), ("alpha", self.alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let w = &self.penalty_weights;
        for (name, v) in [("threshold", w.threshold), ("norm", w.norm), ("ris", w.ris), ("power", w.power)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("penalty weight {name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Whether θ_Φ is stepped at the end of 0-based epoch `e`.
    pub fn smn_updates_at(&self, e: usize) -> bool {
        (e + 1) % self.smn_update_period == 0
    }
}
