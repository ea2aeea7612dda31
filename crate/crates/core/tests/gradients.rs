mod common;

use bdris::metaopt::MetaMode;
use bdris::sysmodel::{Architecture, MagnitudeMode};
use bdris::metaopt::SurfaceLayout;
use bdris::DiffMatrix;
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-6;

fn config() -> Config {
    Config {
        cases: 100,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

fn assert_close(errs: &[f64], what: &str) -> Result<(), TestCaseError> {
    for (k, e) in errs.iter().enumerate() {
        prop_assert!(*e <= TOL, "{what}: input {k} relative error {e:e}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn matmul_and_adjoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_matrix(3, 4, &mut r), random_matrix(4, 2, &mut r), random_matrix(3, 4, &mut r));
        let f: Box<Objective> = Box::new(move |t, x| {
            let weights = t.constant(c.clone());
            x[0].matmul(&x[1]).adjoint().hadamard(&weights.matmul(&x[1]).adjoint()).abs_sq().sum()
        });
        assert_close(&gradient_errors(&*f, &[a, b], &[true, true], STEP), "matmul/adjoint")?;
    }

    #[test]
    fn modulus_squared_and_log2(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_matrix(3, 3, &mut r);
        let f: Box<Objective> = Box::new(|_, x| x[0].abs_sq().log2_1p().sum());
        assert_close(&gradient_errors(&*f, &[a], &[true], STEP), "abs_sq/log2")?;
    }

    #[test]
    fn sigmoid_and_relu(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_real(4, 3, -3.0, 3.0, &mut r);
        let c = random_real(4, 3, -1.0, 1.0, &mut r);
        let f: Box<Objective> = Box::new(move |t, x| {
            let w = t.constant(c.clone());
            (x[0].sigmoid().hadamard(&w).sum()) + x[0].relu().hadamard(&w).sum()
        });
        assert_close(&gradient_errors(&*f, &[a], &[false], STEP), "sigmoid/relu")?;
    }

    #[test]
    fn block_diagonal_assembly(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b) = (random_matrix(2, 2, &mut r), random_matrix(3, 3, &mut r));
        let v = random_matrix(5, 1, &mut r);
        let f: Box<Objective> = Box::new(move |t, x| {
            let v = t.constant(v.clone());
            DiffMatrix::block_diag(&[x[0], x[1]]).matmul(&v).abs_sq().sum()
        });
        assert_close(&gradient_errors(&*f, &[a, b], &[true, true], STEP), "block_diag")?;
    }

    #[test]
    fn rates_and_loss_diagonal(seed in any::<u64>()) {
        let p = problem(3, SurfaceLayout::diagonal(4), seed);
        let mut r = rng(seed ^ 0xabc);
        let x = system_point(&p, &mut r);
        let surface = p.surface.with_phases(x[2..].to_vec()).unwrap();
        for q in [Quantity::R11, Quantity::R2, Quantity::R12, Quantity::SumRate, Quantity::MetaLoss(MetaMode::Default)] {
            let f = system_objective(&p, surface.clone(), q);
            assert_close(&gradient_errors(&*f, &x, &system_complex_mask(&p), STEP), &format!("{q:?}"))?;
        }
    }

    #[test]
    fn rates_and_loss_group_connected(seed in any::<u64>()) {
        let layout = SurfaceLayout::new(Architecture::GroupConnected, 4, 2, MagnitudeMode::ScaledModulus).unwrap();
        let p = problem(2, layout, seed);
        let mut r = rng(seed ^ 0xdef);
        let x = system_point(&p, &mut r);
        let surface = p.surface.with_phases(x[2..].to_vec()).unwrap();
        for q in [Quantity::SumRate, Quantity::MetaLoss(MetaMode::Default), Quantity::MetaLoss(MetaMode::StrictPaper)] {
            let f = system_objective(&p, surface.clone(), q);
            assert_close(&gradient_errors(&*f, &x, &system_complex_mask(&p), STEP), &format!("{q:?}"))?;
        }
    }

    #[test]
    fn rates_and_loss_exponential_blocks(seed in any::<u64>()) {
        let layout = SurfaceLayout::new(Architecture::GroupConnected, 6, 2, MagnitudeMode::Exponential).unwrap();
        let p = problem(2, layout, seed);
        let mut r = rng(seed ^ 0x123);
        let x = system_point(&p, &mut r);
        let surface = p.surface.with_phases(x[2..].to_vec()).unwrap();
        for q in [Quantity::SumRate, Quantity::MetaLoss(MetaMode::Default)] {
            let f = system_objective(&p, surface.clone(), q);
            assert_close(&gradient_errors(&*f, &x, &system_complex_mask(&p), STEP), &format!("{q:?}"))?;
        }
    }
}
