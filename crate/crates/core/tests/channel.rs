mod common;

use bdris::channel::{
    distance, generate_channel_set, path_loss, rician_sample, FadingParams, NodeGeometry, MC_BRANCH_TOL, MC_MIN_DRAWS,
    MC_POWER_TOL,
};
use bdris::linalg::CMatrix;
use common::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn mean_power_matches_path_loss() {
    let geo = NodeGeometry::default();
    let fp = FadingParams::default();
    let mut r = rng(21);
    let (n, m) = (2, 2);
    let mut acc = [0.0f64; 5];
    for _ in 0..MC_MIN_DRAWS {
        let ch = generate_channel_set::<f64, _>(&geo, &fp, n, m, &mut r).unwrap();
        for (k, h) in [&ch.h_1b, &ch.h_2b, &ch.h_rb, &ch.h_r1, &ch.h_r2].iter().enumerate() {
            acc[k] += h.re().iter().zip(h.im()).map(|(a, b)| a * a + b * b).sum::<f64>() / h.len() as f64;
        }
    }
    let pl = |a, b, eta| path_loss(distance(a, b), &fp, eta).unwrap();
    let want = [
        pl(geo.ue1_pos, geo.bs_pos, fp.eta_direct),
        pl(geo.ue2_pos, geo.bs_pos, fp.eta_direct),
        pl(geo.ris_pos, geo.bs_pos, fp.eta_ris),
        pl(geo.ue1_pos, geo.ris_pos, fp.eta_ris),
        pl(geo.ue2_pos, geo.ris_pos, fp.eta_ris),
    ];
    for k in 0..5 {
        let mean = acc[k] / MC_MIN_DRAWS as f64;
        assert!(rel(mean, want[k]) <= MC_POWER_TOL, "channel {k}: {mean:e} vs {:e}", want[k]);
    }
}

#[test]
fn direct_power_scales_with_distance() {
    let fp = FadingParams::default();
    let near = NodeGeometry {
        ue1_pos: [10.0, 0.0, 10.0],
        ..NodeGeometry::default()
    };
    let far = NodeGeometry {
        ue1_pos: [100.0, 0.0, 10.0],
        ..NodeGeometry::default()
    };
    let mean = |geo: &NodeGeometry, seed| {
        let mut r = rng(seed);
        (0..MC_MIN_DRAWS)
            .map(|_| generate_channel_set::<f64, _>(geo, &fp, 1, 1, &mut r).unwrap().h_1b.at(0).norm_sqr())
            .sum::<f64>()
            / MC_MIN_DRAWS as f64
    };
    let ratio = mean(&far, 1) / mean(&near, 2);
    assert!(rel(ratio, 10f64.powf(-3.5)) <= MC_POWER_TOL, "ratio {ratio:e}");
}

#[test]
fn rician_branch_energies() {
    let los = CMatrix::from_fn(1, 1, |_, _| C::new(0.6, 0.8));
    let mut r = rng(22);
    let draws = 100_000;
    for k_db in [0.0, 5.0] {
        let k = 10f64.powf(k_db / 10.0);
        let samples: Vec<C> = (0..draws).map(|_| rician_sample::<f64, _>(&mut r, &los, 1.0, k_db).at(0)).collect();
        let mean = samples.iter().sum::<C>() / draws as f64;
        let var = samples.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / draws as f64;
        let power = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / draws as f64;
        assert!(rel(mean.norm_sqr() / power, k / (1.0 + k)) <= MC_BRANCH_TOL, "k = {k_db} dB");
        assert!(rel(var, 1.0 / (1.0 + k)) <= MC_BRANCH_TOL, "k = {k_db} dB: variance {var}");
    }
}

#[test]
fn scattered_branch_has_unit_variance_at_k_zero() {
    // k = 0 linear is −∞ dB: pure scattering
    let los = CMatrix::from_fn(1, 1, |_, _| C::new(1.0, 0.0));
    let mut r = rng(23);
    let pl = 1e-6;
    let draws = 100_000;
    let var = (0..draws)
        .map(|_| (rician_sample::<f64, _>(&mut r, &los, pl, f64::NEG_INFINITY).at(0) / pl.sqrt()).norm_sqr())
        .sum::<f64>()
        / draws as f64;
    assert!(rel(var, 1.0) <= MC_BRANCH_TOL, "variance {var}");
}
