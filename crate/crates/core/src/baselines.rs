//! Reference schemes: diagonal-RIS meta-learning, random feasible points and
//! a brute-force phase grid for tiny surfaces.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metaopt::{initial_powers, run_algorithm1, MetaConfig, Problem, SurfaceLayout, TrainFailure, TrainResult};
use crate::scalar::{Complex, Real};
use crate::sysmodel::{
    effective_channel, evaluate_rates, random_symmetric_unitary, Architecture, ScatteringMatrix, Solution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineScheme {
    DiagonalRIS,
    RandomPhases,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult<T> {
    pub scheme: BaselineScheme,
    pub sum_rate: T,
    pub solution: Solution<T>,
    /// Number of candidate solutions scored.
    pub evaluations: usize,
}

pub const ORACLE_MAX_POINTS: u128 = 1_000_000;
pub const ORACLE_MAX_LEVELS: usize = 16;
pub const ORACLE_MAX_ELEMENTS: usize = 2;

/// The meta-learner with the surface swapped for a diagonal one of the same
/// size and magnitude mode; every other setting is shared.
pub fn run_diagonal_baseline<T: Real, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &MetaConfig,
    rng: &mut R,
) -> std::result::Result<TrainResult<T>, TrainFailure<T>> {
    let diag = problem
        .with_surface(SurfaceLayout {
            magnitude_mode: problem.surface.magnitude_mode,
            ..SurfaceLayout::diagonal(problem.elements())
        })
        .map_err(|error| TrainFailure {
            error,
            per_epoch: Vec::new(),
        })?;
    run_algorithm1(&diag, config, rng)
}

/// `g / ‖g‖` for each stream: UE-1's effective channel for both of its
/// streams, UE-2's for the third.
pub fn matched_filters<T: Real>(problem: &Problem<T>, phi: &ScatteringMatrix<T>) -> Result<CMatrix<T>> {
    let ch = &problem.channels;
    let full = phi.realize();
    let g1 = effective_channel(&ch.h_1b, &ch.h_rb, &full, &ch.h_r1)?;
    let g2 = effective_channel(&ch.h_2b, &ch.h_rb, &full, &ch.h_r2)?;
    let n = ch.antennas();
    let mut w = CMatrix::zeros(n, 3);
    for (j, g) in [&g1, &g1, &g2].into_iter().enumerate() {
        let norm = g.frobenius_norm();
        for i in 0..n {
            let z = if norm > T::zero() {
                g.get(i, 0).unscale(norm)
            } else {
                Complex::new(T::lit(if i == 0 { 1.0 } else { 0.0 }), T::zero())
            };
            w.set(i, j, z);
        }
    }
    Ok(w)
}

fn score<T: Real>(problem: &Problem<T>, phi: ScatteringMatrix<T>) -> Result<(T, Solution<T>)> {
    let w = matched_filters(problem, &phi)?;
    let sol = Solution::new(w, initial_powers(problem), phi)?;
    let r = evaluate_rates(&sol, &problem.channels, problem.noise_power)?;
    Ok((r.total, sol))
}

/// Best of `trials` random feasible points: symmetric-unitary blocks from the
/// exact sampler, matched filters and the full power budget (split evenly
/// between UE-1's streams).
pub fn random_phases_baseline<T: Real, R: Rng + ?Sized>(
    problem: &Problem<T>,
    trials: usize,
    rng: &mut R,
) -> Result<BaselineResult<T>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let layout = &problem.surface;
    let mut best: Option<(T, Solution<T>)> = None;
    for _ in 0..trials {
        let blocks = layout.group_sizes.iter().map(|&g| random_symmetric_unitary(g, rng)).collect();
        let phi = layout.zero_phases::<T>().with_projected_blocks(blocks)?;
        let (rate, sol) = score(problem, phi)?;
        if best.as_ref().map_or(true, |(b, _)| rate > *b) {
            best = Some((rate, sol));
        }
    }
    let (sum_rate, solution) = best.expect("at least one trial");
    Ok(BaselineResult {
        scheme: BaselineScheme::RandomPhases,
        sum_rate,
        solution,
        evaluations: trials,
    })
}

/// Exhaustive search over `levels^M` phase combinations `2πk/levels` of a
/// single-connected surface with `M ≤ 2`, matched filters and the full power
/// budget. Ties resolve to the lowest grid index.
pub fn grid_oracle_tiny<T: Real>(problem: &Problem<T>, levels: usize) -> Result<BaselineResult<T>> {
    let m = problem.elements();
    if problem.surface.architecture != Architecture::SingleConnected {
        return Err(Error::InvalidArgument("grid oracle needs a single-connected surface".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let points = (levels as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if points > ORACLE_MAX_POINTS {
        return Err(Error::OracleTooLarge(points));
    }
    if m > ORACLE_MAX_ELEMENTS || levels > ORACLE_MAX_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "grid oracle is limited to M ≤ {ORACLE_MAX_ELEMENTS} and levels ≤ {ORACLE_MAX_LEVELS}, got M = {m}, levels = {levels}"
        )));
    }
    let points = points as usize;
    let step = std::f64::consts::TAU / levels as f64;
    let phases_at = |mut k: usize| -> Vec<CMatrix<T>> {
        (0..m)
            .map(|_| {
                let t = (k % levels) as f64 * step;
                k /= levels;
                CMatrix::from_real(1, 1, vec![T::lit(t)])
            })
            .collect()
    };
    let best = (0..points)
        .into_par_iter()
        .map(|k| -> Result<(usize, T)> {
            let phi = problem.surface.with_phases(phases_at(k))?;
            Ok((k, score(problem, phi)?.0))
        })
        .try_reduce(
            || (usize::MAX, T::neg_infinity()),
            |a, b| {
                let a_wins = a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
                Ok(if a_wins { a } else { b })
            },
        )?;
    let (sum_rate, solution) = score(problem, problem.surface.with_phases(phases_at(best.0))?)?;
    Ok(BaselineResult {
        scheme: BaselineScheme::GridOracle,
        sum_rate,
        solution,
        evaluations: points,
    })
}
