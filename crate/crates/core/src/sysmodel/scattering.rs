use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::DiffMatrix;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Complex, Real};
use crate::sysmodel::unitary::symmetric_unitary_from_generator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Conventional diagonal RIS.
    SingleConnected,
    GroupConnected,
    FullyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnitudeMode {
    /// Every block entry is a pure phasor `e^{jθ}`.
    UnitModulus,
    /// Block entries are `e^{jθ}/√M_g`, so unitary blocks are attainable.
    ScaledModulus,
    /// Each block is `exp(jΘ_s)` with `Θ_s` the symmetric part of the phase
    /// block: symmetric unitary for every `Θ`, and `e^{jθ}` on unit blocks.
    #[default]
    Exponential,
}

/// Block-diagonal RIS scattering matrix parameterized by per-entry phases.
///
/// Each block holds a real `M_g x M_g` phase matrix. A single-connected
/// surface is stored as `M` blocks of size one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix<T> {
    architecture: Architecture,
    group_sizes: Vec<usize>,
    phases: Vec<CMatrix<T>>,
    magnitude_mode: MagnitudeMode,
    /// Blocks replaced by a feasibility projection; they take precedence over
    /// `phases` when realizing.
    projected: Option<Vec<CMatrix<T>>>,
}

/// Block sizes for `m` elements under an architecture with `groups` groups.
pub fn group_layout(architecture: Architecture, m: usize, groups: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidArgument("RIS needs at least one element".into()));
    }
    match architecture {
        Architecture::SingleConnected => Ok(vec![1; m]),
        Architecture::FullyConnected => Ok(vec![m]),
        Architecture::GroupConnected => {
            if groups == 0 || m % groups != 0 {
                return Err(Error::InvalidArgument(format!("{m} elements cannot be split into {groups} equal groups")));
            }
            Ok(vec![m / groups; groups])
        }
    }
}

impl<T: Real> ScatteringMatrix<T> {
    pub fn new(
        architecture: Architecture,
        group_sizes: Vec<usize>,
        phases: Vec<CMatrix<T>>,
        magnitude_mode: MagnitudeMode,
    ) -> Result<Self> {
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(Error::InvalidArgument("group sizes must be positive".into()));
        }
        if architecture == Architecture::SingleConnected && group_sizes.iter().any(|&g| g != 1) {
            return Err(Error::InvalidArgument("single-connected surfaces use unit blocks".into()));
        }
        if architecture == Architecture::FullyConnected && group_sizes.len() != 1 {
            return Err(Error::InvalidArgument("fully-connected surfaces have a single block".into()));
        }
        if phases.len() != group_sizes.len() || phases.iter().zip(&group_sizes).any(|(p, &g)| p.shape() != (g, g)) {
            return Err(Error::ShapeMismatch("phase blocks do not match group sizes".into()));
        }
        Ok(Self {
            architecture,
            group_sizes,
            phases,
            magnitude_mode,
            projected: None,
        })
    }

    /// Phases uniform in `[0, 2π)`, symmetric within each block.
    pub fn random<R: Rng + ?Sized>(
        architecture: Architecture,
        group_sizes: Vec<usize>,
        magnitude_mode: MagnitudeMode,
        rng: &mut R,
    ) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        let phases = group_sizes
            .iter()
            .map(|&g| {
                let mut p = CMatrix::zeros(g, g);
                for i in 0..g {
                    for j in i..g {
                        let v = Complex::new(T::lit(rng.gen_range(0.0..tau)), T::zero());
                        p.set(i, j, v);
                        p.set(j, i, v);
                    }
                }
                p
            })
            .collect();
        Self::new(architecture, group_sizes, phases, magnitude_mode)
    }

    /// Phases `θ_mn = d_m + d_n − 2πmn/M_g` with `d` uniform in `[0, 2π)`:
    /// a DFT block between two equal diagonal phase matrices. Under
    /// `ScaledModulus` every block is exactly symmetric unitary.
    pub fn random_dft<R: Rng + ?Sized>(
        architecture: Architecture,
        group_sizes: Vec<usize>,
        magnitude_mode: MagnitudeMode,
        rng: &mut R,
    ) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        let phases = group_sizes
            .iter()
            .map(|&g| {
                let d: Vec<f64> = (0..g).map(|_| rng.gen_range(0.0..tau)).collect();
                let mut p = CMatrix::zeros(g, g);
                for i in 0..g {
                    for j in 0..g {
                        let t = (d[i] + d[j] - tau * ((i * j) % g) as f64 / g as f64).rem_euclid(tau);
                        p.set(i, j, Complex::new(T::lit(t), T::zero()));
                    }
                }
                p
            })
            .collect();
        Self::new(architecture, group_sizes, phases, magnitude_mode)
    }

    /// Diagonal phase blocks with entries uniform in `[0, 2π)`. Under
    /// `Exponential` this starts every block as a random diagonal surface.
    pub fn random_diagonal<R: Rng + ?Sized>(
        architecture: Architecture,
        group_sizes: Vec<usize>,
        magnitude_mode: MagnitudeMode,
        rng: &mut R,
    ) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        let phases = group_sizes
            .iter()
            .map(|&g| {
                let mut p = CMatrix::zeros(g, g);
                for i in 0..g {
                    p.set(i, i, Complex::new(T::lit(rng.gen_range(0.0..tau)), T::zero()));
                }
                p
            })
            .collect();
        Self::new(architecture, group_sizes, phases, magnitude_mode)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn magnitude_mode(&self) -> MagnitudeMode {
        self.magnitude_mode
    }

    pub fn phases(&self) -> &[CMatrix<T>] {
        &self.phases
    }

    pub fn set_phases(&mut self, phases: Vec<CMatrix<T>>) -> Result<()> {
        if phases.len() != self.phases.len() || phases.iter().zip(&self.phases).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::ShapeMismatch("replacement phases have the wrong layout".into()));
        }
        self.phases = phases;
        self.projected = None;
        Ok(())
    }

    /// Replaces the realized blocks with explicit matrices (e.g. the output of
    /// a symmetric-unitary projection). The phases are kept for reference.
    pub fn with_projected_blocks(mut self, blocks: Vec<CMatrix<T>>) -> Result<Self> {
        if blocks.len() != self.group_sizes.len() || blocks.iter().zip(&self.group_sizes).any(|(b, &g)| b.shape() != (g, g)) {
            return Err(Error::ShapeMismatch("projected blocks do not match group sizes".into()));
        }
        self.projected = Some(blocks);
        Ok(self)
    }

    pub fn projected_blocks(&self) -> Option<&[CMatrix<T>]> {
        self.projected.as_deref()
    }

    pub fn is_projected(&self) -> bool {
        self.projected.is_some()
    }

    pub fn elements(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    fn block_scale(&self, g: usize) -> T {
        match self.magnitude_mode {
            MagnitudeMode::UnitModulus => T::one(),
            MagnitudeMode::ScaledModulus => T::one() / T::lit(g as f64).sqrt(),
            MagnitudeMode::Exponential => T::one(),
        }
    }

    /// Realized block `g` as a plain matrix.
    pub fn block(&self, g: usize) -> CMatrix<T> {
        if let Some(p) = &self.projected {
            return p[g].clone();
        }
        let m = self.group_sizes[g];
        if self.magnitude_mode == MagnitudeMode::Exponential {
            let th = &self.phases[g];
            let sym: Vec<T> = (0..m * m)
                .map(|k| (th.get(k / m, k % m).re + th.get(k % m, k / m).re) * T::lit(0.5))
                .collect();
            return symmetric_unitary_from_generator(&sym, m);
        }
        let s = self.block_scale(m);
        self.phases[g].map(|t| Complex::from_polar(s, t.re))
    }

    pub fn blocks(&self) -> Vec<CMatrix<T>> {
        (0..self.group_sizes.len()).map(|g| self.block(g)).collect()
    }

    /// Full `M x M` block-diagonal matrix.
    pub fn realize(&self) -> CMatrix<T> {
        CMatrix::block_diag(&self.blocks())
    }

    /// Places the phase blocks on `tape` as leaves.
    pub fn bind_phases<'t>(&self, tape: &'t Tape<T>, requires_grad: bool) -> Vec<DiffMatrix<'t, T>> {
        self.phases.iter().map(|p| tape.leaf(p.clone(), requires_grad)).collect()
    }

    /// Taped realization from phase-block nodes laid out like `self`.
    pub fn realize_on<'t>(&self, phases: &[DiffMatrix<'t, T>]) -> DiffMatrix<'t, T> {
        DiffMatrix::block_diag(&self.realize_blocks_on(phases))
    }

    /// Taped realization of each block separately from phase nodes. Projected
    /// blocks are ignored here.
    pub fn realize_blocks_on<'t>(&self, phases: &[DiffMatrix<'t, T>]) -> Vec<DiffMatrix<'t, T>> {
        phases
            .iter()
            .zip(&self.group_sizes)
            .map(|(p, &g)| match self.magnitude_mode {
                MagnitudeMode::UnitModulus => p.cis(),
                MagnitudeMode::ScaledModulus if g == 1 => p.cis(),
                MagnitudeMode::ScaledModulus => p.cis().scale_real(self.block_scale(g)),
                MagnitudeMode::Exponential if g == 1 => p.cis(),
                MagnitudeMode::Exponential => expm_j(&(*p + p.transpose()).scale_real(T::lit(0.5))),
            })
            .collect()
    }
}

/// `exp(jΘ)` for a real-valued node: scaling and squaring around a
/// degree-12 Taylor polynomial.
fn expm_j<'t, T: Real>(theta: &DiffMatrix<'t, T>) -> DiffMatrix<'t, T> {
    let m = theta.shape().0;
    let norm = theta.value().frobenius_norm().as_f64();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = theta.scale(Complex::new(T::zero(), T::lit(0.5f64.powi(squarings))));
    let id = theta.tape().constant(CMatrix::identity(m));
    let mut e = id;
    for k in (1..=12).rev() {
        e = a.matmul(&e).scale_real(T::lit(1.0 / k as f64)) + id;
    }
    for _ in 0..squarings {
        e = e.matmul(&e);
    }
    e
}
