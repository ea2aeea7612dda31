//! The nested epoch / outer / inner meta-learning loop.

use std::fmt;

use rand::Rng;

use crate::autodiff::{MlpOptimizer, Tape};
use crate::channel::complex_gaussian;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metaopt::config::{MetaConfig, MetaMode};
use crate::metaopt::loss::{meta_loss_on, MetaLossBreakdown};
use crate::metaopt::problem::Problem;
use crate::metaopt::steps::{rbn_step_on, smn_step_on, tpn_step_on, Networks};
use crate::scalar::{Complex, Real};
use crate::sysmodel::{
    constraint_residuals, evaluate_rates, rates_on, residuals_on, takagi_project, Architecture, ConstraintResiduals,
    Rates, Solution,
};
use crate::DiffMatrix;

/// One record per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog<T> {
    pub epoch: usize,
    /// `L̄`, the loss averaged over outer iterations.
    pub mean_loss: T,
    /// Largest `−L^j` seen so far in the run.
    pub best_so_far: T,
    /// `R1 + R2` averaged over outer iterations.
    pub mean_sum_rate: T,
    /// Terms averaged over outer iterations; indicators OR-ed.
    pub breakdown: MetaLossBreakdown<T>,
    pub smn_updated: bool,
}

/// Instrumentation hooks.
pub enum TrainEvent<'a, T> {
    /// Variables were reset before outer iteration `outer`.
    OuterStart {
        epoch: usize,
        outer: usize,
        initial: &'a Solution<T>,
    },
    EpochEnd {
        log: &'a EpochLog<T>,
        networks: &'a Networks<T>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult<T> {
    /// Best iterate after projection onto the feasible set.
    pub best_solution: Solution<T>,
    /// `best_solution` re-scored with the rate model.
    pub rates: Rates<T>,
    /// Selection score of `raw_best_solution`: its projected sum rate, or
    /// `−L` under [`MetaMode::StrictPaper`].
    pub best_sum_rate: T,
    /// Largest `−L^j` over all outer iterations (before projection).
    pub best_objective: T,
    /// The iterate that attained `best_sum_rate` before projection.
    pub raw_best_solution: Solution<T>,
    /// Projected starting point and its sum rate.
    pub initial_solution: Solution<T>,
    pub initial_sum_rate: T,
    pub per_epoch: Vec<EpochLog<T>>,
    /// Residuals of `best_solution`.
    pub constraint_report: ConstraintResiduals<T>,
    pub networks: Networks<T>,
}

impl<T: Real> TrainResult<T> {
    /// Feasible sum rate of the returned solution.
    pub fn sum_rate(&self) -> T {
        self.rates.total
    }

    pub fn per_epoch_loss(&self) -> Vec<T> {
        self.per_epoch.iter().map(|l| l.mean_loss).collect()
    }

    pub fn per_epoch_sum_rate(&self) -> Vec<T> {
        self.per_epoch.iter().map(|l| l.best_so_far).collect()
    }
}

/// A run that stopped early, with the epochs logged before the failure.
#[derive(Debug)]
pub struct TrainFailure<T> {
    pub error: Error,
    pub per_epoch: Vec<EpochLog<T>>,
}

impl<T> fmt::Display for TrainFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} epochs)", self.error, self.per_epoch.len())
    }
}

impl<T: fmt::Debug> std::error::Error for TrainFailure<T> {}

impl<T> From<TrainFailure<T>> for Error {
    fn from(f: TrainFailure<T>) -> Self {
        f.error
    }
}

/// Starting point: unit-norm Gaussian beamformers, `p11 = p12 = P1/2`,
/// `p2 = P2`, uniform phases.
pub fn initial_beamformers<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    let mut w = CMatrix::from_fn(n, 3, |_, _| complex_gaussian(rng));
    normalize_columns(&mut w);
    w
}

pub fn initial_powers<T: Real>(problem: &Problem<T>) -> [T; 3] {
    let half = problem.budgets.p_max[0] / T::lit(2.0);
    [half, half, problem.budgets.p_max[1]]
}

fn normalize_columns<T: Real>(w: &mut CMatrix<T>) {
    let (n, k) = w.shape();
    for j in 0..k {
        let norm = (0..n).map(|i| w.get(i, j).norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
        for i in 0..n {
            let z = if norm > T::zero() {
                w.get(i, j).unscale(norm)
            } else if i == 0 {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            };
            w.set(i, j, z);
        }
    }
}

fn project_block<T: Real>(block: &CMatrix<T>) -> Result<CMatrix<T>> {
    match takagi_project(block) {
        Err(Error::DegenerateProjection(_)) => {
            // Rank-deficient: the nearest symmetric unitary is not unique, so
            // pick the one obtained after a small diagonal shift.
            let scale = block.frobenius_norm().max(T::one());
            let mut last = None;
            for eps in [1e-8, 1e-6, 1e-4, 1e-2] {
                let shifted = block.add(&CMatrix::identity(block.rows()).scale_real(scale * T::lit(eps)));
                match takagi_project(&shifted) {
                    Ok(p) => return Ok(p),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one attempt"))
        }
        other => other,
    }
}

/// Normalizes beamformers, scales powers into budget and replaces every
/// multi-element block by its nearest symmetric unitary matrix.
///
/// Unit blocks are already unit-modulus and are left untouched.
pub fn project_to_feasible<T: Real>(sol: &Solution<T>, problem: &Problem<T>) -> Result<Solution<T>> {
    sol.check_dims(&problem.channels)?;
    let mut w = sol.w.clone();
    normalize_columns(&mut w);

    let [p1max, p2max] = problem.budgets.p_max;
    let mut p = sol.p.map(|v| v.max(T::zero()));
    let s1 = p[0] + p[1];
    if s1 > p1max {
        let f = p1max / s1;
        p[0] = p[0] * f;
        p[1] = p[1] * f;
        // rounding can leave the pair a hair above budget
        while p[0] + p[1] > p1max {
            p[1] = p[1] - (p[0] + p[1] - p1max);
        }
    }
    p[2] = p[2].min(p2max);

    let needs_projection = sol.phi.architecture() != Architecture::SingleConnected
        && sol.phi.group_sizes().iter().any(|&g| g > 1);
    let phi = if needs_projection {
        let blocks = sol
            .phi
            .blocks()
            .iter()
            .map(|b| if b.rows() == 1 { Ok(b.clone()) } else { project_block(b) })
            .collect::<Result<Vec<_>>>()?;
        sol.phi.clone().with_projected_blocks(blocks)?
    } else {
        sol.phi.clone()
    };
    Solution::new(w, p, phi)
}

/// Runs the meta-learner on one problem.
pub fn run_algorithm1<T: Real, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &MetaConfig,
    rng: &mut R,
) -> std::result::Result<TrainResult<T>, TrainFailure<T>> {
    run_algorithm1_observed(problem, config, rng, &mut |_| {})
}

/// Random starting point and networks, drawn in a fixed order: beamformers,
/// RBN, TPN, phases, SMN. Layouts that differ only in the surface therefore
/// share the beamformers and the RBN/TPN weights for a given seed.
pub fn initialize<T: Real, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &MetaConfig,
    rng: &mut R,
) -> Result<(Solution<T>, Networks<T>)> {
    let w0 = initial_beamformers(problem.antennas(), rng);
    let rbn = crate::autodiff::Mlp::init(2, crate::autodiff::HIDDEN_WIDTH, 2, rng);
    let tpn = crate::autodiff::Mlp::init(1, crate::autodiff::HIDDEN_WIDTH, 1, rng);
    let phi0 = problem.surface.random_start(rng)?;
    let widths = crate::metaopt::steps::smn_widths(&problem.surface, config.per_group_smn)?;
    let smn = widths
        .into_iter()
        .map(|w| crate::autodiff::Mlp::init(w, crate::autodiff::HIDDEN_WIDTH, w, rng))
        .collect();
    let sol = Solution::new(w0, initial_powers(problem), phi0)?;
    Ok((sol, Networks { rbn, tpn, smn }))
}

pub fn run_algorithm1_observed<T: Real, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &MetaConfig,
    rng: &mut R,
    observer: &mut dyn FnMut(TrainEvent<'_, T>),
) -> std::result::Result<TrainResult<T>, TrainFailure<T>> {
    let fail = |error: Error, per_epoch: Vec<EpochLog<T>>| TrainFailure { error, per_epoch };
    config.validate().map_err(|e| fail(e, Vec::new()))?;
    let (initial, networks) = initialize(problem, config, rng).map_err(|e| fail(e, Vec::new()))?;
    train_from(problem, config, initial, networks, observer)
}

struct Outer<T> {
    loss: MetaLossBreakdown<T>,
    sum_rate: T,
    solution: Solution<T>,
    grads: Vec<CMatrix<T>>,
}

/// One outer iteration on its own tape: reset, N_i steps per group, loss, and
/// the loss gradient for every network tensor.
fn outer_iteration<T: Real>(
    problem: &Problem<T>,
    config: &MetaConfig,
    initial: &Solution<T>,
    networks: &Networks<T>,
    p_star: &[T; 3],
    phi_star: &CMatrix<T>,
) -> Result<Outer<T>> {
    let tape = Tape::new();
    let nets = networks.bind(&tape);
    let scaling = config.input_scaling;

    let mut w = tape.constant(initial.w.clone());
    for _ in 0..config.inner_iterations {
        w = rbn_step_on(&nets.rbn, w, p_star, phi_star, problem, scaling)?;
    }
    let w_star = w.value();

    let mut p = tape.constant(initial.power_matrix());
    for _ in 0..config.inner_iterations {
        p = tpn_step_on(&nets.tpn, p, &w_star, phi_star, problem, scaling, config.power_in_budget_units)?;
    }
    let p_star = {
        let v = p.value_ref();
        [v.re()[0], v.re()[1], v.re()[2]]
    };

    let mut phases = initial.phi.bind_phases(&tape, false);
    for _ in 0..config.inner_iterations {
        phases = smn_step_on(&nets.smn, &phases, &w_star, &p_star, problem, config)?;
    }

    let blocks = initial.phi.realize_blocks_on(&phases);
    let phi = DiffMatrix::block_diag(&blocks);
    let rates = rates_on(w, p, phi, &problem.stacked, problem.noise_power);
    let residuals = residuals_on(w, p, &blocks, &rates, &problem.budgets);
    let (loss, breakdown) = meta_loss_on(&rates, &residuals, &config.penalty_weights, config.mode);
    if !breakdown.is_finite() {
        return Err(Error::Diverged(format!("non-finite meta loss {:?}", breakdown.total)));
    }

    let mut leaves = vec![];
    leaves.extend(nets.rbn.leaves());
    leaves.extend(nets.tpn.leaves());
    for s in &nets.smn {
        leaves.extend(s.leaves());
    }
    let grads = tape.grad(loss, &leaves)?;

    let mut phi_sol = initial.phi.clone();
    phi_sol.set_phases(phases.iter().map(|n| n.value()).collect())?;
    Ok(Outer {
        loss: breakdown,
        sum_rate: rates.total.scalar(),
        solution: Solution::new(w_star, p_star, phi_sol)?,
        grads,
    })
}

/// Training loop from a given starting point and networks.
pub fn train_from<T: Real>(
    problem: &Problem<T>,
    config: &MetaConfig,
    initial: Solution<T>,
    mut networks: Networks<T>,
    observer: &mut dyn FnMut(TrainEvent<'_, T>),
) -> std::result::Result<TrainResult<T>, TrainFailure<T>> {
    let mut per_epoch: Vec<EpochLog<T>> = Vec::with_capacity(config.epochs);
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(TrainFailure { error, per_epoch }),
            }
        };
    }
    attempt!(config.validate());
    attempt!(initial.check_dims(&problem.channels));

    let mut rbn_opt = MlpOptimizer::new(&networks.rbn, T::lit(config.lr_w));
    let mut tpn_opt = MlpOptimizer::new(&networks.tpn, T::lit(config.lr_p));
    let mut smn_opts: Vec<_> = networks.smn.iter().map(|n| MlpOptimizer::new(n, T::lit(config.lr_phi))).collect();

    // P*, Φ* carry over between outer iterations and epochs.
    let mut p_star = initial.p;
    let mut phi_star = initial.phi.realize();
    let mut best_objective: Option<T> = None;
    let mut best: Option<(T, Solution<T>)> = None;
    let inv_outer = T::one() / T::lit(config.outer_iterations as f64);

    for epoch in 0..config.epochs {
        let mut acc: Option<Vec<CMatrix<T>>> = None;
        let mut mean = MetaLossBreakdown::default();
        let mut mean_rate = T::zero();
        for outer in 0..config.outer_iterations {
            observer(TrainEvent::OuterStart {
                epoch,
                outer,
                initial: &initial,
            });
            let out = attempt!(outer_iteration(problem, config, &initial, &networks, &p_star, &phi_star));
            p_star = out.solution.p;
            phi_star = out.solution.phi.realize();
            mean.accumulate(&out.loss, inv_outer);
            mean_rate = mean_rate + out.sum_rate * inv_outer;
            let objective = -out.loss.total;
            if best_objective.map_or(true, |b| objective > b) {
                best_objective = Some(objective);
            }
            let score = match config.mode {
                MetaMode::Default => {
                    let projected = attempt!(project_to_feasible(&out.solution, problem));
                    attempt!(evaluate_rates(&projected, &problem.channels, problem.noise_power)).total
                }
                MetaMode::StrictPaper => objective,
            };
            if best.as_ref().map_or(true, |(b, _)| score > *b) {
                best = Some((score, out.solution));
            }
            match &mut acc {
                None => acc = Some(out.grads.into_iter().map(|g| g.scale_real(inv_outer)).collect()),
                Some(a) => {
                    for (x, g) in a.iter_mut().zip(&out.grads) {
                        x.add_assign(&g.scale_real(inv_outer));
                    }
                }
            }
        }

        let grads = acc.expect("at least one outer iteration");
        attempt!(rbn_opt.step(&mut networks.rbn, &grads[0..4]));
        attempt!(tpn_opt.step(&mut networks.tpn, &grads[4..8]));
        let smn_updated = config.smn_updates_at(epoch);
        if smn_updated {
            for (k, (net, opt)) in networks.smn.iter_mut().zip(&mut smn_opts).enumerate() {
                attempt!(opt.step(net, &grads[8 + 4 * k..12 + 4 * k]));
            }
        }

        let log = EpochLog {
            epoch,
            mean_loss: mean.total,
            best_so_far: best_objective.expect("recorded"),
            mean_sum_rate: mean_rate,
            breakdown: mean,
            smn_updated,
        };
        per_epoch.push(log);
        observer(TrainEvent::EpochEnd {
            log: per_epoch.last().expect("just pushed"),
            networks: &networks,
        });
    }

    let (best_sum_rate, raw_best_solution) = best.expect("at least one epoch");
    let best_objective = best_objective.expect("at least one epoch");
    let best_solution = attempt!(project_to_feasible(&raw_best_solution, problem));
    let rates = attempt!(evaluate_rates(&best_solution, &problem.channels, problem.noise_power));
    let constraint_report = attempt!(constraint_residuals(
        &best_solution,
        &problem.channels,
        problem.noise_power,
        &problem.budgets
    ));
    let initial_solution = attempt!(project_to_feasible(&initial, problem));
    let initial_sum_rate = attempt!(evaluate_rates(&initial_solution, &problem.channels, problem.noise_power)).total;
    Ok(TrainResult {
        best_solution,
        rates,
        best_sum_rate,
        best_objective,
        raw_best_solution,
        initial_solution,
        initial_sum_rate,
        per_epoch,
        constraint_report,
        networks,
    })
}
