//! Penalized meta loss.

use crate::autodiff::{DiffMatrix, Tape};
use crate::error::Result;
use crate::metaopt::config::{MetaMode, PenaltyWeights};
use crate::metaopt::problem::Problem;
use crate::scalar::Real;
use crate::sysmodel::{rates_on, residuals_on, RateNodes, ResidualNodes, Solution};

/// Loss terms and the indicator of each penalty group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetaLossBreakdown<T> {
    pub l_rate: T,
    pub l_threshold: T,
    pub l_norm: T,
    pub l_ris: T,
    pub l_power: T,
    /// Rate-threshold indicator.
    pub lambda: u8,
    /// Beamformer-norm indicator.
    pub zeta: u8,
    /// Scattering-matrix indicator.
    pub eta: u8,
    /// Power-budget indicator.
    pub mu: u8,
    pub total: T,
}

impl<T: Real> MetaLossBreakdown<T> {
    pub fn is_finite(&self) -> bool {
        [self.l_rate, self.l_threshold, self.l_norm, self.l_ris, self.l_power, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Term-wise `self + other * scale`, used for epoch averages. Indicators
    /// are OR-ed.
    pub fn accumulate(&mut self, other: &Self, scale: T) {
        self.l_rate = self.l_rate + other.l_rate * scale;
        self.l_threshold = self.l_threshold + other.l_threshold * scale;
        self.l_norm = self.l_norm + other.l_norm * scale;
        self.l_ris = self.l_ris + other.l_ris * scale;
        self.l_power = self.l_power + other.l_power * scale;
        self.total = self.total + other.total * scale;
        self.lambda |= other.lambda;
        self.zeta |= other.zeta;
        self.eta |= other.eta;
        self.mu |= other.mu;
    }
}

fn sum<'t, T: Real>(nodes: &[DiffMatrix<'t, T>]) -> DiffMatrix<'t, T> {
    nodes[1..].iter().fold(nodes[0], |a, &b| a + b)
}

/// One penalty group: node, value and indicator.
fn penalty<'t, T: Real>(residuals: &[DiffMatrix<'t, T>], weight: T, mode: MetaMode) -> (DiffMatrix<'t, T>, u8) {
    let violated = residuals.iter().any(|r| r.scalar() > T::zero());
    let ind = u8::from(violated);
    let node = match mode {
        MetaMode::Default => {
            let hinges: Vec<_> = residuals.iter().map(|r| r.relu()).collect();
            sum(&hinges).scale_real(weight)
        }
        MetaMode::StrictPaper => sum(residuals).scale_real(weight * T::lit(f64::from(ind))),
    };
    (node, ind)
}

/// Taped meta loss from rate and residual nodes.
pub fn meta_loss_on<'t, T: Real>(
    rates: &RateNodes<'t, T>,
    residuals: &ResidualNodes<'t, T>,
    weights: &PenaltyWeights,
    mode: MetaMode,
) -> (DiffMatrix<'t, T>, MetaLossBreakdown<T>) {
    let l_rate = -rates.total;
    let (l_threshold, lambda) = penalty(&residuals.xi, T::lit(weights.threshold), mode);
    let (l_norm, zeta) = penalty(&residuals.gamma, T::lit(weights.norm), mode);
    let (l_ris, eta) = penalty(&residuals.sigma, T::lit(weights.ris), mode);
    let (l_power, mu) = penalty(&residuals.upsilon, T::lit(weights.power), mode);
    let total = l_rate + l_threshold + l_norm + l_ris + l_power;
    let breakdown = MetaLossBreakdown {
        l_rate: l_rate.scalar(),
        l_threshold: l_threshold.scalar(),
        l_norm: l_norm.scalar(),
        l_ris: l_ris.scalar(),
        l_power: l_power.scalar(),
        lambda,
        zeta,
        eta,
        mu,
        total: total.scalar(),
    };
    (total, breakdown)
}

/// Meta loss of a solution on a problem.
pub fn meta_loss<T: Real>(
    sol: &Solution<T>,
    problem: &Problem<T>,
    weights: &PenaltyWeights,
    mode: MetaMode,
) -> Result<MetaLossBreakdown<T>> {
    sol.check_dims(&problem.channels)?;
    let tape = Tape::new();
    let w = tape.constant(sol.w.clone());
    let p = tape.constant(sol.power_matrix());
    let blocks: Vec<_> = sol.phi.blocks().into_iter().map(|b| tape.constant(b)).collect();
    let phi = DiffMatrix::block_diag(&blocks);
    let rates = rates_on(w, p, phi, &problem.stacked, problem.noise_power);
    let res = residuals_on(w, p, &blocks, &rates, &problem.budgets);
    Ok(meta_loss_on(&rates, &res, weights, mode).1)
}
