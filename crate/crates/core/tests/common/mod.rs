//! Independent oracles and instance generators shared by the integration
//! tests and the acceptance harness.

#![allow(dead_code)]

use bdris::channel::{generate_channel_set, FadingParams, NodeGeometry};
use bdris::linalg::CMatrix;
use bdris::metaopt::{meta_loss_on, MetaMode, PenaltyWeights, SurfaceLayout};
use bdris::scalar::Complex;
use bdris::sysmodel::{
    random_symmetric_unitary, rates_on, residuals_on, Architecture, Budgets, MagnitudeMode,
};
use bdris::{DiffMatrix, Problem, ScatteringMatrix, Solution, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn problem(n: usize, layout: SurfaceLayout, seed: u64) -> Problem {
    let fp = FadingParams::default();
    let ch = generate_channel_set(&NodeGeometry::default(), &fp, n, layout.elements(), &mut rng(seed)).unwrap();
    Problem::new(ch, fp.noise_power_watts(), Budgets::default(), layout).unwrap()
}

pub fn group_layout(m: usize, groups: usize) -> SurfaceLayout {
    SurfaceLayout::new(Architecture::GroupConnected, m, groups, MagnitudeMode::ScaledModulus).unwrap()
}

pub fn exponential_layout(m: usize, groups: usize) -> SurfaceLayout {
    SurfaceLayout::new(Architecture::GroupConnected, m, groups, MagnitudeMode::Exponential).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> CMatrix<f64> {
    CMatrix::from_fn(rows, cols, |_, _| C::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

pub fn random_real(rows: usize, cols: usize, lo: f64, hi: f64, r: &mut ChaCha8Rng) -> CMatrix<f64> {
    CMatrix::from_real(rows, cols, (0..rows * cols).map(|_| r.gen_range(lo..hi)).collect())
}

/// Unit-norm beamformers, powers inside the budgets and exactly symmetric
/// unitary blocks.
pub fn random_feasible_solution(p: &Problem, r: &mut ChaCha8Rng) -> Solution {
    let n = p.antennas();
    let mut w = random_matrix(n, 3, r);
    for j in 0..3 {
        let norm = (0..n).map(|i| w.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            w.set(i, j, w.get(i, j) / norm);
        }
    }
    let [p1, p2] = p.budgets.p_max;
    let split: f64 = r.gen_range(0.0..1.0);
    let total: f64 = r.gen_range(0.05..1.0) * p1;
    let pw = [total * split, total * (1.0 - split), r.gen_range(0.05..1.0) * p2];
    let blocks = p.surface.group_sizes.iter().map(|&g| random_symmetric_unitary(g, r)).collect();
    let phi = p.surface.zero_phases::<f64>().with_projected_blocks(blocks).unwrap();
    Solution::new(w, pw, phi).unwrap()
}

pub fn random_phases(layout: &SurfaceLayout, r: &mut ChaCha8Rng) -> Vec<CMatrix<f64>> {
    let tau = std::f64::consts::TAU;
    layout.group_sizes.iter().map(|&g| random_real(g, g, 0.0, tau, r)).collect()
}

fn dot_h(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn column(a: &CMatrix<f64>, j: usize) -> Vec<C> {
    (0..a.rows()).map(|i| a.get(i, j)).collect()
}

/// `h_direct + Σ_mn H_rb[:, m] Φ[m, n] h_ru[n]`, written element by element.
pub fn scalar_effective_channel(direct: &CMatrix<f64>, h_rb: &CMatrix<f64>, phi: &CMatrix<f64>, h_ru: &CMatrix<f64>) -> Vec<C> {
    let (n, m) = h_rb.shape();
    (0..n)
        .map(|i| {
            let mut acc = direct.get(i, 0);
            for a in 0..m {
                for b in 0..m {
                    acc += h_rb.get(i, a) * phi.get(a, b) * h_ru.get(b, 0);
                }
            }
            acc
        })
        .collect()
}

/// `[R11, R12, R2, R1, R]` from the SINR expressions with SIC order
/// s11 → s2 → s12.
pub fn scalar_rates(sol: &Solution, p: &Problem) -> [f64; 5] {
    let ch = &p.channels;
    let phi = sol.phi.realize();
    let g1 = scalar_effective_channel(&ch.h_1b, &ch.h_rb, &phi, &ch.h_r1);
    let g2 = scalar_effective_channel(&ch.h_2b, &ch.h_rb, &phi, &ch.h_r2);
    let (w11, w12, w2) = (column(&sol.w, 0), column(&sol.w, 1), column(&sol.w, 2));
    let [p11, p12, p2] = sol.p;
    let s2 = p.noise_power;
    let gain = |w: &[C], g: &[C]| dot_h(w, g).norm_sqr();
    let sinr11 = p11 * gain(&w11, &g1) / (p12 * gain(&w11, &g1) + p2 * gain(&w11, &g2) + s2);
    let sinr2 = p2 * gain(&w2, &g2) / (p12 * gain(&w2, &g1) + s2);
    let sinr12 = p12 * gain(&w12, &g1) / s2;
    let (r11, r2, r12) = ((1.0 + sinr11).log2(), (1.0 + sinr2).log2(), (1.0 + sinr12).log2());
    [r11, r12, r2, r11 + r12, r11 + r12 + r2]
}

/// Two-user MAC sum capacity `log2 det(I + Σ_k P_k g_k g_kᴴ / σ²)` at the
/// solution's total per-user powers, via the 2×2 Sylvester form.
pub fn mac_sum_capacity(sol: &Solution, p: &Problem) -> f64 {
    let ch = &p.channels;
    let phi = sol.phi.realize();
    let g1 = scalar_effective_channel(&ch.h_1b, &ch.h_rb, &phi, &ch.h_r1);
    let g2 = scalar_effective_channel(&ch.h_2b, &ch.h_rb, &phi, &ch.h_r2);
    let (q1, q2) = ((sol.p[0] + sol.p[1]) / p.noise_power, sol.p[2] / p.noise_power);
    let n1 = dot_h(&g1, &g1).re;
    let n2 = dot_h(&g2, &g2).re;
    let x = dot_h(&g1, &g2).norm_sqr();
    ((1.0 + q1 * n1) * (1.0 + q2 * n2) - q1 * q2 * x).log2()
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &CMatrix<f64>) -> CMatrix<f64> {
    let m = a.rows();
    let norm = a.frobenius_norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale_real(0.5f64.powi(squarings as i32));
    let mut term = CMatrix::identity(m);
    let mut sum = CMatrix::identity(m);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale_real(1.0 / k as f64);
        sum = sum.add(&term);
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// A taped scalar function of several matrix inputs.
pub type Objective = dyn for<'t> Fn(&'t Tape, &[DiffMatrix<'t, f64>]) -> DiffMatrix<'t, f64>;

fn eval(f: &Objective, inputs: &[CMatrix<f64>]) -> f64 {
    let tape = Tape::new();
    let nodes: Vec<_> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
    f(&tape, &nodes).scalar()
}

/// Norm-wise relative error between reverse-mode gradients and central
/// differences, one value per input. `complex[k]` selects whether input `k`
/// is perturbed in its imaginary part too. The step is relative to the
/// input's largest entry.
pub fn gradient_errors(f: &Objective, inputs: &[CMatrix<f64>], complex: &[bool], rel_step: f64) -> Vec<f64> {
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|x| tape.var(x.clone())).collect();
    let ad = tape.grad(f(&tape, &vars), &vars).unwrap();
    let mut errs = Vec::new();
    for (k, x) in inputs.iter().enumerate() {
        let scale = x.re().iter().chain(x.im()).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let h = rel_step * scale;
        let mut fd = CMatrix::zeros(x.rows(), x.cols());
        for e in 0..x.len() {
            for imag in [false, true] {
                if imag && !complex[k] {
                    continue;
                }
                let shifted = |d: f64| {
                    let mut xs = inputs.to_vec();
                    if imag {
                        xs[k].im_mut()[e] += d;
                    } else {
                        xs[k].re_mut()[e] += d;
                    }
                    eval(f, &xs)
                };
                let g = (shifted(h) - shifted(-h)) / (2.0 * h);
                if imag {
                    fd.im_mut()[e] = g;
                } else {
                    fd.re_mut()[e] = g;
                }
            }
        }
        let mut a = ad[k].clone();
        if !complex[k] {
            a = CMatrix::from_real(a.rows(), a.cols(), a.re().to_vec());
        }
        let denom = fd.frobenius_norm().max(a.frobenius_norm()).max(1e-300);
        errs.push(a.sub(&fd).frobenius_norm() / denom);
    }
    errs
}

/// Which taped quantity of the system model to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    R11,
    R2,
    R12,
    SumRate,
    MetaLoss(MetaMode),
}

/// Objective over `[w, p, phase blocks...]` for `surface` on `problem`.
pub fn system_objective(problem: &Problem, surface: ScatteringMatrix, q: Quantity) -> Box<Objective> {
    let problem = problem.clone();
    Box::new(move |_tape, x| {
        let (w, p, phases) = (x[0], x[1], &x[2..]);
        let blocks = surface.realize_blocks_on(phases);
        let phi = DiffMatrix::block_diag(&blocks);
        let rates = rates_on(w, p, phi, &problem.stacked, problem.noise_power);
        match q {
            Quantity::R11 => rates.r11,
            Quantity::R2 => rates.r2,
            Quantity::R12 => rates.r12,
            Quantity::SumRate => rates.total,
            Quantity::MetaLoss(mode) => {
                let res = residuals_on(w, p, &blocks, &rates, &problem.budgets);
                meta_loss_on(&rates, &res, &PenaltyWeights::default(), mode).0
            }
        }
    })
}

/// Random `[w, p, phases...]` point with moderate SINRs.
pub fn system_point(problem: &Problem, r: &mut ChaCha8Rng) -> Vec<CMatrix<f64>> {
    let [p1, p2] = problem.budgets.p_max;
    let mut x = vec![
        random_matrix(problem.antennas(), 3, r),
        CMatrix::from_real(3, 1, vec![r.gen_range(0.1..0.9) * p1, r.gen_range(0.1..0.9) * p1, r.gen_range(0.1..0.9) * p2]),
    ];
    x.extend(random_phases(&problem.surface, r));
    x
}

pub fn system_complex_mask(problem: &Problem) -> Vec<bool> {
    let mut m = vec![true, false];
    m.extend(std::iter::repeat(false).take(problem.surface.group_sizes.len()));
    m
}
