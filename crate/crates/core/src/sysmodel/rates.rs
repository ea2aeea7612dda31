//! Effective channels and the three stream rates under the SIC order
//! `s11 → s2 → s12`.

use crate::autodiff::{DiffMatrix, Tape};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;
use crate::sysmodel::ScatteringMatrix;

/// Column of the beamformer matrix for each stream.
pub const W11: usize = 0;
pub const W12: usize = 1;
pub const W2: usize = 2;

/// Receive beamformers, stream powers and scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    /// `N x 3`, columns `w11, w12, w2`.
    pub w: CMatrix<T>,
    /// `[p11, p12, p2]` in watts.
    pub p: [T; 3],
    pub phi: ScatteringMatrix<T>,
}

impl<T: Real> Solution<T> {
    pub fn new(w: CMatrix<T>, p: [T; 3], phi: ScatteringMatrix<T>) -> Result<Self> {
        if w.cols() != 3 {
            return Err(Error::ShapeMismatch(format!("beamformer matrix must have 3 columns, got {}", w.cols())));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("powers must be finite".into()));
        }
        Ok(Self { w, p, phi })
    }

    pub fn beamformer(&self, stream: usize) -> CMatrix<T> {
        self.w.col(stream)
    }

    pub fn power_matrix(&self) -> CMatrix<T> {
        CMatrix::from_real(3, 1, self.p.to_vec())
    }

    pub fn check_dims(&self, ch: &ChannelSet<T>) -> Result<()> {
        if self.w.rows() != ch.antennas() || self.phi.elements() != ch.elements() {
            return Err(Error::ShapeMismatch(format!(
                "solution is {}x{} but channel is {}x{}",
                self.w.rows(),
                self.phi.elements(),
                ch.antennas(),
                ch.elements()
            )));
        }
        Ok(())
    }
}

/// Per-stream and aggregate rates in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub r11: T,
    pub r12: T,
    pub r2: T,
    pub r1: T,
    pub total: T,
}

/// Taped rates.
#[derive(Clone, Copy)]
pub struct RateNodes<'t, T> {
    pub r11: DiffMatrix<'t, T>,
    pub r12: DiffMatrix<'t, T>,
    pub r2: DiffMatrix<'t, T>,
    pub r1: DiffMatrix<'t, T>,
    pub total: DiffMatrix<'t, T>,
}

impl<T: Real> RateNodes<'_, T> {
    pub fn values(&self) -> Rates<T> {
        Rates {
            r11: self.r11.scalar(),
            r12: self.r12.scalar(),
            r2: self.r2.scalar(),
            r1: self.r1.scalar(),
            total: self.total.scalar(),
        }
    }
}

/// Channels stacked per user: direct `N x 2` and RIS-side `M x 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedChannels<T> {
    pub direct: CMatrix<T>,
    pub h_rb: CMatrix<T>,
    pub ris_side: CMatrix<T>,
}

impl<T: Real> StackedChannels<T> {
    pub fn new(ch: &ChannelSet<T>) -> Self {
        let n = ch.antennas();
        let m = ch.elements();
        let mut direct = CMatrix::zeros(n, 2);
        direct.set_block(0, 0, &ch.h_1b);
        direct.set_block(0, 1, &ch.h_2b);
        let mut ris_side = CMatrix::zeros(m, 2);
        ris_side.set_block(0, 0, &ch.h_r1);
        ris_side.set_block(0, 1, &ch.h_r2);
        Self {
            direct,
            h_rb: ch.h_rb.clone(),
            ris_side,
        }
    }
}

/// `h_direct + H_rb · Φ · h_ru`.
pub fn effective_channel<T: Real>(
    h_direct: &CMatrix<T>,
    h_rb: &CMatrix<T>,
    phi: &CMatrix<T>,
    h_ru: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let (n, m) = h_rb.shape();
    if h_direct.shape() != (n, 1) || phi.shape() != (m, m) || h_ru.shape() != (m, 1) {
        return Err(Error::ShapeMismatch(format!(
            "effective channel: direct {:?}, cascade {:?}, phi {:?}, ris-user {:?}",
            h_direct.shape(),
            h_rb.shape(),
            phi.shape(),
            h_ru.shape()
        )));
    }
    Ok(h_direct.add(&h_rb.matmul(&phi.matmul(h_ru))))
}

/// Taped rates from beamformers `w` (`N x 3`), powers `p` (`3 x 1`) and the
/// realized scattering matrix `phi` (`M x M`).
pub fn rates_on<'t, T: Real>(
    w: DiffMatrix<'t, T>,
    p: DiffMatrix<'t, T>,
    phi: DiffMatrix<'t, T>,
    ch: &StackedChannels<T>,
    noise_power: T,
) -> RateNodes<'t, T> {
    let tape = w.tape();
    let direct = tape.constant(ch.direct.clone());
    let h_rb = tape.constant(ch.h_rb.clone());
    let ris_side = tape.constant(ch.ris_side.clone());
    // columns: g1, g2
    let g = direct + h_rb.matmul(&phi.matmul(&ris_side));
    // gains[s][u] = |w_sᴴ g_u|²
    let gains = w.adjoint().matmul(&g).abs_sq();
    let a = |s: usize, u: usize| gains.entry(s, u);
    let (p11, p12, p2) = (p.entry(0, 0), p.entry(1, 0), p.entry(2, 0));

    let sinr11 = (p11 * a(W11, 0)).div(&(p12 * a(W11, 0) + p2 * a(W11, 1)).add_real(noise_power));
    let sinr2 = (p2 * a(W2, 1)).div(&(p12 * a(W2, 0)).add_real(noise_power));
    let sinr12 = (p12 * a(W12, 0)).scale_real(T::one() / noise_power);

    let r11 = sinr11.log2_1p();
    let r2 = sinr2.log2_1p();
    let r12 = sinr12.log2_1p();
    let r1 = r11 + r12;
    let total = r1 + r2;
    RateNodes { r11, r12, r2, r1, total }
}

/// All rates of a solution, evaluated without gradients.
pub fn evaluate_rates<T: Real>(sol: &Solution<T>, ch: &ChannelSet<T>, noise_power: T) -> Result<Rates<T>> {
    sol.check_dims(ch)?;
    let tape = Tape::new();
    let w = tape.constant(sol.w.clone());
    let p = tape.constant(sol.power_matrix());
    let phi = tape.constant(sol.phi.realize());
    Ok(rates_on(w, p, phi, &StackedChannels::new(ch), noise_power).values())
}

pub fn rate_r11<T: Real>(sol: &Solution<T>, ch: &ChannelSet<T>, noise_power: T) -> Result<T> {
    Ok(evaluate_rates(sol, ch, noise_power)?.r11)
}

pub fn rate_r2<T: Real>(sol: &Solution<T>, ch: &ChannelSet<T>, noise_power: T) -> Result<T> {
    Ok(evaluate_rates(sol, ch, noise_power)?.r2)
}

pub fn rate_r12<T: Real>(sol: &Solution<T>, ch: &ChannelSet<T>, noise_power: T) -> Result<T> {
    Ok(evaluate_rates(sol, ch, noise_power)?.r12)
}

/// `(R1, R2, R)`.
pub fn sum_rate<T: Real>(sol: &Solution<T>, ch: &ChannelSet<T>, noise_power: T) -> Result<(T, T, T)> {
    let r = evaluate_rates(sol, ch, noise_power)?;
    Ok((r.r1, r.r2, r.total))
}
