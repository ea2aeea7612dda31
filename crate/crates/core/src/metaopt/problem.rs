use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;
use crate::sysmodel::{group_layout, Architecture, Budgets, MagnitudeMode, ScatteringMatrix, StackedChannels};

/// Architecture and block layout of the surface being optimized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceLayout {
    pub architecture: Architecture,
    pub group_sizes: Vec<usize>,
    pub magnitude_mode: MagnitudeMode,
}

impl SurfaceLayout {
    pub fn new(architecture: Architecture, m: usize, groups: usize, magnitude_mode: MagnitudeMode) -> Result<Self> {
        Ok(Self {
            architecture,
            group_sizes: group_layout(architecture, m, groups)?,
            magnitude_mode,
        })
    }

    /// Conventional diagonal surface with `m` elements.
    pub fn diagonal(m: usize) -> Self {
        Self {
            architecture: Architecture::SingleConnected,
            group_sizes: vec![1; m],
            magnitude_mode: MagnitudeMode::default(),
        }
    }

    pub fn elements(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn with_phases<T: Real>(&self, phases: Vec<CMatrix<T>>) -> Result<ScatteringMatrix<T>> {
        ScatteringMatrix::new(self.architecture, self.group_sizes.clone(), phases, self.magnitude_mode)
    }

    pub fn zero_phases<T: Real>(&self) -> ScatteringMatrix<T> {
        let phases = self.group_sizes.iter().map(|&g| CMatrix::zeros(g, g)).collect();
        self.with_phases(phases).expect("layout was validated on construction")
    }

    pub fn random<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScatteringMatrix<T>> {
        ScatteringMatrix::random(self.architecture, self.group_sizes.clone(), self.magnitude_mode, rng)
    }

    /// Random feasible start: a random diagonal surface under `Exponential`,
    /// a DFT-type block otherwise.
    pub fn random_start<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScatteringMatrix<T>> {
        match self.magnitude_mode {
            MagnitudeMode::Exponential => {
                ScatteringMatrix::random_diagonal(self.architecture, self.group_sizes.clone(), self.magnitude_mode, rng)
            }
            _ => self.random_dft(rng),
        }
    }

    /// See [`ScatteringMatrix::random_dft`].
    pub fn random_dft<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScatteringMatrix<T>> {
        ScatteringMatrix::random_dft(self.architecture, self.group_sizes.clone(), self.magnitude_mode, rng)
    }
}

/// One channel realization together with its noise level, budgets and surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    pub channels: ChannelSet<T>,
    pub stacked: StackedChannels<T>,
    pub noise_power: T,
    pub budgets: Budgets<T>,
    pub surface: SurfaceLayout,
}

impl<T: Real> Problem<T> {
    pub fn new(channels: ChannelSet<T>, noise_power: T, budgets: Budgets<T>, surface: SurfaceLayout) -> Result<Self> {
        channels.validate()?;
        if surface.elements() != channels.elements() {
            return Err(Error::ShapeMismatch(format!(
                "surface has {} elements but the channel has {}",
                surface.elements(),
                channels.elements()
            )));
        }
        if !(noise_power > T::zero()) {
            return Err(Error::InvalidArgument("noise power must be positive".into()));
        }
        if budgets.p_max.iter().any(|&p| !(p >= T::zero())) {
            return Err(Error::InvalidArgument("power budgets must be non-negative".into()));
        }
        let stacked = StackedChannels::new(&channels);
        Ok(Self {
            channels,
            stacked,
            noise_power,
            budgets,
            surface,
        })
    }

    /// Same channel and budgets with a different surface layout.
    pub fn with_surface(&self, surface: SurfaceLayout) -> Result<Self> {
        Self::new(self.channels.clone(), self.noise_power, self.budgets, surface)
    }

    pub fn antennas(&self) -> usize {
        self.channels.antennas()
    }

    pub fn elements(&self) -> usize {
        self.channels.elements()
    }

    /// Per-stream upper bounds `[P1, P1, P2]`.
    pub fn power_caps(&self) -> [T; 3] {
        [self.budgets.p_max[0], self.budgets.p_max[0], self.budgets.p_max[1]]
    }
}
