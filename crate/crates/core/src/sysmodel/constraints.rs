//! Constraint residuals. A residual `<= 0` means its constraint holds.

use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffMatrix, Tape};
use crate::channel::ChannelSet;
use crate::error::Result;
use crate::linalg::CMatrix;
use crate::scalar::Real;
use crate::sysmodel::rates::{rates_on, RateNodes, Solution, StackedChannels};

/// Power budgets (watts) and rate thresholds (bits/s/Hz) of the two users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets<T> {
    pub p_max: [T; 2],
    pub r_th: [T; 2],
}

impl<T: Real> Default for Budgets<T> {
    /// 23 dBm per user and a 1 bit/s/Hz threshold.
    fn default() -> Self {
        let p = T::lit(crate::channel::dbm_to_watts(23.0));
        Self {
            p_max: [p, p],
            r_th: [T::one(), T::one()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals<T> {
    /// `R_th,k − R_k`
    pub xi: [T; 2],
    /// `| ‖w_i‖ − 1 |`
    pub gamma: [T; 3],
    /// `Σ_g ‖Φ_gᴴΦ_g − I‖_F`, `Σ_g ‖Φ_g − Φ_gᵀ‖_F`
    pub sigma: [T; 2],
    /// `p11 + p12 − P_max,1`, `p2 − P_max,2`
    pub upsilon: [T; 2],
}

impl<T: Real> ConstraintResiduals<T> {
    pub fn all(&self) -> impl Iterator<Item = T> + '_ {
        self.xi.iter().chain(&self.gamma).chain(&self.sigma).chain(&self.upsilon).copied()
    }

    pub fn max_violation(&self) -> T {
        self.all().fold(T::neg_infinity(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.all().all(|v| v.is_finite())
    }
}

/// Taped residual groups.
pub struct ResidualNodes<'t, T> {
    pub xi: [DiffMatrix<'t, T>; 2],
    pub gamma: [DiffMatrix<'t, T>; 3],
    pub sigma: [DiffMatrix<'t, T>; 2],
    pub upsilon: [DiffMatrix<'t, T>; 2],
}

impl<T: Real> ResidualNodes<'_, T> {
    pub fn values(&self) -> ConstraintResiduals<T> {
        ConstraintResiduals {
            xi: self.xi.map(|n| n.scalar()),
            gamma: self.gamma.map(|n| n.scalar()),
            sigma: self.sigma.map(|n| n.scalar()),
            upsilon: self.upsilon.map(|n| n.scalar()),
        }
    }
}

fn sum_nodes<'t, T: Real>(nodes: &[DiffMatrix<'t, T>]) -> DiffMatrix<'t, T> {
    let mut it = nodes.iter().copied();
    let first = it.next().expect("at least one term");
    it.fold(first, |a, b| a + b)
}

/// Taped residuals from beamformers, powers, realized blocks and rates.
pub fn residuals_on<'t, T: Real>(
    w: DiffMatrix<'t, T>,
    p: DiffMatrix<'t, T>,
    blocks: &[DiffMatrix<'t, T>],
    rates: &RateNodes<'t, T>,
    budgets: &Budgets<T>,
) -> ResidualNodes<'t, T> {
    let tape = w.tape();
    let xi = [
        (-rates.r1).add_real(budgets.r_th[0]),
        (-rates.r2).add_real(budgets.r_th[1]),
    ];
    let gamma = [0, 1, 2].map(|k| w.col(k).norm().add_real(-T::one()).abs());
    let unitarity: Vec<_> = blocks
        .iter()
        .map(|b| {
            let eye = tape.constant(CMatrix::identity(b.shape().0));
            (b.adjoint().matmul(b) - eye).norm()
        })
        .collect();
    let symmetry: Vec<_> = blocks.iter().map(|b| (*b - b.transpose()).norm()).collect();
    let sigma = [sum_nodes(&unitarity), sum_nodes(&symmetry)];
    let upsilon = [
        (p.entry(0, 0) + p.entry(1, 0)).add_real(-budgets.p_max[0]),
        p.entry(2, 0).add_real(-budgets.p_max[1]),
    ];
    ResidualNodes { xi, gamma, sigma, upsilon }
}

pub fn constraint_residuals<T: Real>(
    sol: &Solution<T>,
    ch: &ChannelSet<T>,
    noise_power: T,
    budgets: &Budgets<T>,
) -> Result<ConstraintResiduals<T>> {
    sol.check_dims(ch)?;
    let tape = Tape::new();
    let w = tape.constant(sol.w.clone());
    let p = tape.constant(sol.power_matrix());
    let blocks: Vec<_> = sol.phi.blocks().into_iter().map(|b| tape.constant(b)).collect();
    let phi = DiffMatrix::block_diag(&blocks);
    let rates = rates_on(w, p, phi, &StackedChannels::new(ch), noise_power);
    Ok(residuals_on(w, p, &blocks, &rates, budgets).values())
}

/// Residuals of the scattering blocks alone: `(Σ‖ΦᴴΦ−I‖_F, Σ‖Φ−Φᵀ‖_F)`.
pub fn block_residuals<T: Real>(blocks: &[CMatrix<T>]) -> (T, T) {
    let mut u = T::zero();
    let mut s = T::zero();
    for b in blocks {
        u = u + b.adjoint().matmul(b).sub(&CMatrix::identity(b.rows())).frobenius_norm();
        s = s + b.sub(&b.transpose()).frobenius_norm();
    }
    (u, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{Architecture, MagnitudeMode, ScatteringMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_channels() -> ChannelSet<f64> {
        let one = CMatrix::from_real(1, 1, vec![1.0]);
        ChannelSet {
            h_1b: one.clone(),
            h_2b: one.clone(),
            h_rb: CMatrix::zeros(1, 2),
            h_r1: CMatrix::zeros(2, 1),
            h_r2: CMatrix::zeros(2, 1),
        }
    }

    fn budgets() -> Budgets<f64> {
        Budgets {
            p_max: [0.2, 0.2],
            r_th: [1.0, 1.0],
        }
    }

    #[test]
    fn exact_symmetric_unitary_blocks_have_zero_sigma() {
        // 1/√2 [[1, j], [j, 1]] is symmetric unitary with equal-modulus entries.
        let h = std::f64::consts::FRAC_PI_2;
        let phases = CMatrix::from_real(2, 2, vec![0.0, h, h, 0.0]);
        let phi = ScatteringMatrix::new(Architecture::FullyConnected, vec![2], vec![phases], MagnitudeMode::ScaledModulus).unwrap();
        let sol = Solution::new(CMatrix::from_real(1, 3, vec![1.0, 1.0, 1.0]), [0.1, 0.1, 0.2], phi).unwrap();
        let r = constraint_residuals(&sol, &scalar_channels(), 1e-3, &budgets()).unwrap();
        assert!(r.sigma[0] < 1e-15, "{}", r.sigma[0]);
        assert_eq!(r.sigma[1], 0.0);
        assert_eq!(r.gamma, [0.0; 3]);
        // p11 + p12 = P_max,1 exactly on the boundary
        assert_eq!(r.upsilon[0], 0.0);
        assert_eq!(r.upsilon[1], 0.0);
    }

    #[test]
    fn unit_modulus_two_by_two_block_is_not_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let a: f64 = rng.gen_range(0.0..6.28);
            let b: f64 = rng.gen_range(0.0..6.28);
            let c: f64 = rng.gen_range(0.0..6.28);
            let block = CMatrix::from_real(2, 2, vec![a, b, b, c]).map(|t| num_complex::Complex::from_polar(1.0, t.re));
            // independent evaluation: diag(ΦᴴΦ) = 2 for a unit-modulus 2x2 block
            let g = block.adjoint().matmul(&block);
            assert!((g.get(0, 0).re - 2.0).abs() < 1e-12);
            let (u, _) = block_residuals(&[block]);
            assert!(u >= 1.0);
        }
    }

    #[test]
    fn norm_and_threshold_residuals() {
        let phi = ScatteringMatrix::new(Architecture::SingleConnected, vec![1, 1], vec![CMatrix::zeros(1, 1); 2], MagnitudeMode::UnitModulus)
            .unwrap();
        let sol = Solution::new(CMatrix::from_real(1, 3, vec![2.0, 0.5, 1.0]), [0.0, 0.0, 0.5], phi).unwrap();
        let r = constraint_residuals(&sol, &scalar_channels(), 1.0, &budgets()).unwrap();
        assert_eq!(r.gamma, [1.0, 0.5, 0.0]);
        // no UE-1 power: R1 = 0, so ξ1 = R_th,1
        assert_eq!(r.xi[0], 1.0);
        assert!((r.upsilon[1] - 0.3).abs() < 1e-15);
        assert!(r.is_finite());
    }
}
