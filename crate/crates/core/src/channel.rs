//! Geometry-driven channel generation: distance path loss with Rician
//! (cascaded links) or Rayleigh (direct links) small-scale fading.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Complex, Real};

pub type Point3 = [f64; 3];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Azimuth of `to` seen from `from`, in the horizontal plane.
pub fn azimuth(from: Point3, to: Point3) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeGeometry {
    pub bs_pos: Point3,
    pub ris_pos: Point3,
    pub ue1_pos: Point3,
    pub ue2_pos: Point3,
}

impl Default for NodeGeometry {
    fn default() -> Self {
        Self {
            bs_pos: [0.0, 0.0, 10.0],
            ris_pos: [100.0, 2.0, 10.0],
            ue1_pos: [80.0, 0.0, 0.0],
            ue2_pos: [110.0, 0.0, 0.0],
        }
    }
}

impl NodeGeometry {
    pub fn validate(&self) -> Result<()> {
        let pts = [self.bs_pos, self.ris_pos, self.ue1_pos, self.ue2_pos];
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = distance(pts[i], pts[j]);
                if !(d > 0.0) {
                    return Err(Error::InvalidArgument(format!("nodes {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingParams {
    /// Path loss at the reference distance, dB.
    pub l0_db: f64,
    /// Reference distance, meters.
    pub d0: f64,
    pub eta_direct: f64,
    pub eta_ris: f64,
    pub rician_k_db: f64,
    pub noise_power_dbm: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            l0_db: -30.0,
            d0: 1.0,
            eta_direct: 3.5,
            eta_ris: 2.2,
            rician_k_db: 5.0,
            noise_power_dbm: -80.0,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0) {
            return Err(Error::InvalidArgument(format!("reference distance must be positive, got {}", self.d0)));
        }
        if !(self.eta_direct >= 2.0 && self.eta_ris >= 2.0) {
            return Err(Error::InvalidArgument("path-loss exponents must be >= 2".into()));
        }
        Ok(())
    }

    pub fn noise_power_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }
}

/// The five channels of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    /// UE-1 → BS, `N x 1`.
    pub h_1b: CMatrix<T>,
    /// UE-2 → BS, `N x 1`.
    pub h_2b: CMatrix<T>,
    /// RIS → BS, `N x M`.
    pub h_rb: CMatrix<T>,
    /// UE-1 → RIS, `M x 1`.
    pub h_r1: CMatrix<T>,
    /// UE-2 → RIS, `M x 1`.
    pub h_r2: CMatrix<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn antennas(&self) -> usize {
        self.h_rb.rows()
    }

    pub fn elements(&self) -> usize {
        self.h_rb.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.h_rb.shape();
        let ok = self.h_1b.shape() == (n, 1)
            && self.h_2b.shape() == (n, 1)
            && self.h_r1.shape() == (m, 1)
            && self.h_r2.shape() == (m, 1);
        if !ok {
            return Err(Error::ShapeMismatch("channel set dimensions inconsistent".into()));
        }
        let all = [&self.h_1b, &self.h_2b, &self.h_rb, &self.h_r1, &self.h_r2];
        if !all.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("channel set has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Monte-Carlo tolerances over at least `MC_MIN_DRAWS` draws: relative error
/// of mean power against path loss (and of path-loss ratios between
/// distances), and of the deterministic-branch energy fraction against
/// `k/(1+k)` and the unit-variance scattered branch.
pub const MC_MIN_DRAWS: usize = 10_000;
pub const MC_POWER_TOL: f64 = 0.05;
pub const MC_BRANCH_TOL: f64 = 0.02;

/// Linear power gain `L0 · (d/d0)^(-η)`.
pub fn path_loss(distance: f64, params: &FadingParams, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {distance}")));
    }
    Ok(db_to_linear(params.l0_db) * (distance / params.d0).powf(-exponent))
}

/// Weights `(scattered, deterministic)` of the two Rician branches for a
/// K-factor given in dB. `-∞` dB gives pure Rayleigh.
pub fn rician_weights(k_db: f64) -> (f64, f64) {
    if k_db == f64::NEG_INFINITY {
        return (1.0, 0.0);
    }
    let k = db_to_linear(k_db);
    ((1.0 / (1.0 + k)).sqrt(), (k / (1.0 + k)).sqrt())
}

/// Standard circularly-symmetric complex Gaussian sample (unit variance).
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re * s), T::lit(im * s))
}

/// `√PL · (√(1/(1+k))·g + √(k/(1+k))·los)` with `g` i.i.d. CN(0, 1).
pub fn rician_sample<T: Real, R: Rng + ?Sized>(rng: &mut R, los: &CMatrix<T>, path_loss: f64, k_db: f64) -> CMatrix<T> {
    let (w_nlos, w_los) = rician_weights(k_db);
    let amp = path_loss.sqrt();
    let (a_nlos, a_los) = (T::lit(amp * w_nlos), T::lit(amp * w_los));
    let mut out = CMatrix::zeros(los.rows(), los.cols());
    for k in 0..los.len() {
        let g: Complex<T> = complex_gaussian(rng);
        let z = g * a_nlos + los.at(k) * a_los;
        out.re_mut()[k] = z.re;
        out.im_mut()[k] = z.im;
    }
    out
}

/// Half-wavelength ULA response: entry `m` is `exp(jπ m sin(angle))`.
pub fn steering_vector<T: Real>(n_elements: usize, angle: f64) -> CMatrix<T> {
    assert!(n_elements >= 1, "steering vector needs at least one element");
    let s = angle.sin();
    let data: Vec<Complex<T>> = (0..n_elements)
        .map(|m| {
            let ph = std::f64::consts::PI * m as f64 * s;
            Complex::new(T::lit(ph.cos()), T::lit(ph.sin()))
        })
        .collect();
    CMatrix::column(&data)
}

/// Draws one channel realization for an `N`-antenna BS and an `M`-element RIS.
pub fn generate_channel_set<T: Real, R: Rng + ?Sized>(
    geometry: &NodeGeometry,
    params: &FadingParams,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<ChannelSet<T>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("N and M must be at least 1".into()));
    }
    geometry.validate()?;
    params.validate()?;
    let g = geometry;

    let pl_1b = path_loss(distance(g.ue1_pos, g.bs_pos), params, params.eta_direct)?;
    let pl_2b = path_loss(distance(g.ue2_pos, g.bs_pos), params, params.eta_direct)?;
    let pl_rb = path_loss(distance(g.ris_pos, g.bs_pos), params, params.eta_ris)?;
    let pl_r1 = path_loss(distance(g.ris_pos, g.ue1_pos), params, params.eta_ris)?;
    let pl_r2 = path_loss(distance(g.ris_pos, g.ue2_pos), params, params.eta_ris)?;

    let zero_n = CMatrix::zeros(n, 1);
    let h_1b = rician_sample(rng, &zero_n, pl_1b, f64::NEG_INFINITY);
    let h_2b = rician_sample(rng, &zero_n, pl_2b, f64::NEG_INFINITY);

    let a_bs = steering_vector::<T>(n, azimuth(g.bs_pos, g.ris_pos));
    let a_ris = steering_vector::<T>(m, azimuth(g.ris_pos, g.bs_pos));
    let los_rb = a_bs.matmul(&a_ris.transpose());
    let h_rb = rician_sample(rng, &los_rb, pl_rb, params.rician_k_db);

    let los_r1 = steering_vector::<T>(m, azimuth(g.ris_pos, g.ue1_pos));
    let h_r1 = rician_sample(rng, &los_r1, pl_r1, params.rician_k_db);
    let los_r2 = steering_vector::<T>(m, azimuth(g.ris_pos, g.ue2_pos));
    let h_r2 = rician_sample(rng, &los_r2, pl_r2, params.rician_k_db);

    Ok(ChannelSet {
        h_1b,
        h_2b,
        h_rb,
        h_r1,
        h_r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_reference_and_square_law() {
        let p = FadingParams::default();
        assert!((path_loss(1.0, &p, 3.5).unwrap() - 1e-3).abs() < 1e-18);
        let p0 = FadingParams { l0_db: 0.0, ..p };
        assert!((path_loss(10.0, &p0, 2.0).unwrap() - 1e-2).abs() < 1e-16);
        let sq = path_loss(10.0, &p, 2.0).unwrap();
        assert!((sq - 1e-5).abs() < 1e-18);
        assert!(path_loss(0.0, &p, 2.0).is_err());
        assert!(path_loss(-1.0, &p, 2.0).is_err());
    }

    #[test]
    fn bs_ris_distance() {
        let g = NodeGeometry::default();
        let d = distance(g.bs_pos, g.ris_pos);
        assert!((d - (100f64.powi(2) + 4.0).sqrt()).abs() < 1e-12);
        assert!((d - 100.02).abs() < 1e-3);
    }

    #[test]
    fn rician_branch_weights_at_5db() {
        let (a, b) = rician_weights(5.0);
        // 10^0.5 = 3.16228
        assert!((a - 0.490_160).abs() < 1e-5, "{a}");
        assert!((b - 0.871_636).abs() < 1e-5, "{b}");
        assert!((a * a + b * b - 1.0).abs() < 1e-14);
        assert_eq!(rician_weights(f64::NEG_INFINITY), (1.0, 0.0));
    }

    #[test]
    fn huge_k_returns_scaled_los() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let los = steering_vector::<f64>(4, 0.3);
        let out = rician_sample(&mut rng, &los, 4.0, 300.0);
        for k in 0..4 {
            assert!((out.at(k) - los.at(k) * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_vector_cases() {
        let a = steering_vector::<f64>(5, 0.0);
        assert!(a.entries().all(|z| (z - Complex::new(1.0, 0.0)).norm() < 1e-15));
        let b = steering_vector::<f64>(2, std::f64::consts::FRAC_PI_2);
        assert!((b.at(1) - Complex::new(-1.0, 0.0)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let ang: f64 = rng.gen_range(-3.2..3.2);
            let v = steering_vector::<f64>(7, ang);
            assert!(v.entries().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn generation_is_deterministic_and_shaped() {
        let g = NodeGeometry::default();
        let p = FadingParams::default();
        let a: ChannelSet<f64> = generate_channel_set(&g, &p, 4, 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b: ChannelSet<f64> = generate_channel_set(&g, &p, 4, 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.h_rb.shape(), (4, 8));
        let s: ChannelSet<f64> = generate_channel_set(&g, &p, 1, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(s.h_rb.shape(), (1, 1));
        assert!(generate_channel_set::<f64, _>(&g, &p, 0, 1, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }

    #[test]
    fn coincident_nodes_rejected() {
        let g = NodeGeometry {
            ue1_pos: [0.0, 0.0, 10.0],
            ..NodeGeometry::default()
        };
        assert!(g.validate().is_err());
    }
}
