//! One inner update of each variable group: gradient of the sum rate on a
//! scratch tape, fed through the group's network, added to the variable.
//!
//! The gradient fed to a network is a constant on the caller's tape, so
//! meta-gradients are first order.

use crate::autodiff::{BoundMlp, DiffMatrix, Mlp, Tape, HIDDEN_WIDTH};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metaopt::config::{InputScaling, MetaConfig, MetaMode};
use crate::metaopt::problem::{Problem, SurfaceLayout};
use crate::scalar::{Complex, Real};
use crate::sysmodel::{rates_on, MagnitudeMode, Solution};

/// `α · sigmoid(δθ)`, the bounded phase increment.
pub fn phase_regulator<T: Real>(delta_theta: T, alpha: T) -> T {
    alpha * crate::autodiff::sigmoid(delta_theta)
}

/// Parameters of the beamformer (RBN), power (TPN) and scattering-matrix
/// (SMN) networks. `smn` holds one network shared by all groups, or one per
/// group.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks<T> {
    pub rbn: Mlp<T>,
    pub tpn: Mlp<T>,
    pub smn: Vec<Mlp<T>>,
}

/// SMN widths for a layout: a single shared width, or one per group.
pub fn smn_widths(surface: &SurfaceLayout, per_group: bool) -> Result<Vec<usize>> {
    if per_group {
        return Ok(surface.group_sizes.clone());
    }
    let first = surface.group_sizes[0];
    if surface.group_sizes.iter().any(|&g| g != first) {
        return Err(Error::InvalidArgument(format!(
            "a shared SMN needs equal group sizes, got {:?}; enable per-group networks",
            surface.group_sizes
        )));
    }
    Ok(vec![first])
}

impl<T: Real> Networks<T> {
    /// All-zero networks: every update is a no-op (the SMN still adds `α/2`).
    pub fn zeros(surface: &SurfaceLayout, per_group_smn: bool) -> Result<Self> {
        Ok(Self {
            rbn: Mlp::zeros(2, HIDDEN_WIDTH, 2),
            tpn: Mlp::zeros(1, HIDDEN_WIDTH, 1),
            smn: smn_widths(surface, per_group_smn)?
                .into_iter()
                .map(|w| Mlp::zeros(w, HIDDEN_WIDTH, w))
                .collect(),
        })
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>) -> BoundNetworks<'t, T> {
        BoundNetworks {
            rbn: self.rbn.bind(tape),
            tpn: self.tpn.bind(tape),
            smn: self.smn.iter().map(|n| n.bind(tape)).collect(),
        }
    }
}

pub struct BoundNetworks<'t, T> {
    pub rbn: BoundMlp<'t, T>,
    pub tpn: BoundMlp<'t, T>,
    pub smn: Vec<BoundMlp<'t, T>>,
}

fn scaled<T: Real>(x: T, scaling: InputScaling) -> T {
    match scaling {
        InputScaling::Raw | InputScaling::Normalized => x,
        InputScaling::Log => T::lit(scaling.apply(x.as_f64())),
    }
}

fn normalize_batch<T: Real>(mut batch: CMatrix<T>, scaling: InputScaling) -> CMatrix<T> {
    if scaling == InputScaling::Normalized {
        let peak = batch.max_abs();
        if peak > T::zero() {
            batch = batch.scale_real(T::one() / peak);
        }
    }
    batch
}

fn check_finite<T: Real>(node: &DiffMatrix<'_, T>, what: &str) -> Result<()> {
    if node.value_ref().is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("{what} produced a non-finite output")))
    }
}

/// `∂R/∂W` (packed re/im partials), `N x 3`.
pub fn rate_gradient_w<T: Real>(problem: &Problem<T>, w: &CMatrix<T>, p: &[T; 3], phi: &CMatrix<T>) -> Result<CMatrix<T>> {
    let tape = Tape::new();
    let wn = tape.var(w.clone());
    let pn = tape.constant(CMatrix::from_real(3, 1, p.to_vec()));
    let phin = tape.constant(phi.clone());
    let r = rates_on(wn, pn, phin, &problem.stacked, problem.noise_power).total;
    Ok(tape.grad(r, &[wn])?.remove(0))
}

/// `∂R/∂p` for `[p11, p12, p2]`.
pub fn rate_gradient_p<T: Real>(problem: &Problem<T>, w: &CMatrix<T>, p: &[T; 3], phi: &CMatrix<T>) -> Result<[T; 3]> {
    let tape = Tape::new();
    let wn = tape.constant(w.clone());
    let pn = tape.var(CMatrix::from_real(3, 1, p.to_vec()));
    let phin = tape.constant(phi.clone());
    let r = rates_on(wn, pn, phin, &problem.stacked, problem.noise_power).total;
    let g = tape.grad(r, &[pn])?.remove(0);
    Ok([g.re()[0], g.re()[1], g.re()[2]])
}

/// `∂R/∂θ` for every entry of every phase block, treating entries as independent.
pub fn rate_gradient_phases<T: Real>(
    problem: &Problem<T>,
    w: &CMatrix<T>,
    p: &[T; 3],
    phases: &[CMatrix<T>],
) -> Result<Vec<CMatrix<T>>> {
    let tape = Tape::new();
    let wn = tape.constant(w.clone());
    let pn = tape.constant(CMatrix::from_real(3, 1, p.to_vec()));
    let nodes: Vec<_> = phases.iter().map(|ph| tape.var(ph.clone())).collect();
    let phi = problem.surface.zero_phases::<T>().realize_on(&nodes);
    let r = rates_on(wn, pn, phi, &problem.stacked, problem.noise_power).total;
    tape.grad(r, &nodes)
}

/// RBN batch: one `(Re, Im)` row per beamformer entry, row-major over `N x 3`.
pub fn rbn_batch<T: Real>(grad_w: &CMatrix<T>, scaling: InputScaling) -> CMatrix<T> {
    let n = grad_w.len();
    let mut data = Vec::with_capacity(2 * n);
    for k in 0..n {
        data.push(scaled(grad_w.re()[k], scaling));
        data.push(scaled(grad_w.im()[k], scaling));
    }
    normalize_batch(CMatrix::from_real(n, 2, data), scaling)
}

/// TPN batch: one row per stream power.
pub fn tpn_batch<T: Real>(grad_p: &[T; 3], scaling: InputScaling) -> CMatrix<T> {
    normalize_batch(CMatrix::from_real(3, 1, grad_p.iter().map(|&g| scaled(g, scaling)).collect()), scaling)
}

/// SMN input of one block: rows of the phase gradient. In default mode the
/// upper triangle is the free parameter, so off-diagonal entries carry
/// `G + Gᵀ`.
pub fn smn_block_input<T: Real>(grad: &CMatrix<T>, mode: MetaMode, scaling: InputScaling) -> CMatrix<T> {
    let n = grad.rows();
    let x = CMatrix::from_fn(n, n, |i, j| {
        let g = match mode {
            MetaMode::Default if i != j => grad.re()[i * n + j] + grad.re()[j * n + i],
            _ => grad.re()[i * n + j],
        };
        crate::scalar::Complex::new(scaled(g, scaling), T::zero())
    });
    normalize_batch(x, scaling)
}

/// Taped RBN update `W + RBN(∂R/∂W)` at fixed powers and scattering matrix.
pub fn rbn_step_on<'t, T: Real>(
    net: &BoundMlp<'t, T>,
    w: DiffMatrix<'t, T>,
    p: &[T; 3],
    phi: &CMatrix<T>,
    problem: &Problem<T>,
    scaling: InputScaling,
) -> Result<DiffMatrix<'t, T>> {
    let (n, k) = w.shape();
    let g = rate_gradient_w(problem, &w.value_ref(), p, phi)?;
    let input = w.tape().constant(rbn_batch(&g, scaling));
    let out = net.forward(&input)?;
    check_finite(&out, "RBN")?;
    Ok(w + out.complexify().reshape(n, k))
}

/// Taped TPN update, clamped to `[0, P_max]` per stream. A plain clamp would
/// block every meta-gradient once a power sits at a bound, so the clamp lets
/// through gradients that push the power back inside.
pub fn tpn_step_on<'t, T: Real>(
    net: &BoundMlp<'t, T>,
    p: DiffMatrix<'t, T>,
    w: &CMatrix<T>,
    phi: &CMatrix<T>,
    problem: &Problem<T>,
    scaling: InputScaling,
    budget_units: bool,
) -> Result<DiffMatrix<'t, T>> {
    let pv = {
        let v = p.value_ref();
        [v.re()[0], v.re()[1], v.re()[2]]
    };
    let g = rate_gradient_p(problem, w, &pv, phi)?;
    let input = p.tape().constant(tpn_batch(&g, scaling));
    let out = net.forward(&input)?;
    check_finite(&out, "TPN")?;
    let caps = problem.power_caps();
    let step = if budget_units {
        out.hadamard(&p.tape().constant(CMatrix::from_real(3, 1, caps.to_vec())))
    } else {
        out
    };
    Ok((p + step).clamp_inward(&[T::zero(); 3], &caps))
}

/// Taped SMN update of every phase block.
pub fn smn_step_on<'t, T: Real>(
    nets: &[BoundMlp<'t, T>],
    phases: &[DiffMatrix<'t, T>],
    w: &CMatrix<T>,
    p: &[T; 3],
    problem: &Problem<T>,
    config: &MetaConfig,
) -> Result<Vec<DiffMatrix<'t, T>>> {
    let tape = phases[0].tape();
    let values: Vec<CMatrix<T>> = phases.iter().map(|ph| ph.value()).collect();
    let grads = rate_gradient_phases(problem, w, p, &values)?;
    let inputs: Vec<CMatrix<T>> = grads
        .iter()
        .map(|g| smn_block_input(g, config.mode, config.input_scaling))
        .collect();
    let alpha = T::lit(config.alpha);

    // raw network outputs, one M_g x M_g node per block
    let raw: Vec<DiffMatrix<'t, T>> = if nets.len() == 1 && phases.len() > 1 {
        let width = inputs[0].cols();
        let rows: usize = inputs.iter().map(|x| x.rows()).sum();
        let mut stacked = CMatrix::zeros(rows, width);
        let mut r0 = 0;
        for x in &inputs {
            stacked.set_block(r0, 0, x);
            r0 += x.rows();
        }
        let out = nets[0].forward(&tape.constant(stacked))?;
        check_finite(&out, "SMN")?;
        let mut r0 = 0;
        inputs
            .iter()
            .map(|x| {
                let b = out.block(r0, 0, x.rows(), width);
                r0 += x.rows();
                b
            })
            .collect()
    } else {
        if nets.len() != phases.len() {
            return Err(Error::ShapeMismatch(format!("{} SMNs for {} blocks", nets.len(), phases.len())));
        }
        let mut outs = Vec::with_capacity(phases.len());
        for (net, x) in nets.iter().zip(&inputs) {
            let out = net.forward(&tape.constant(x.clone()))?;
            check_finite(&out, "SMN")?;
            outs.push(out);
        }
        outs
    };

    Ok(phases
        .iter()
        .zip(raw)
        .map(|(ph, out)| {
            // exp(jΘ) is not 2π-periodic entrywise, so that mode takes
            // signed steps and keeps Θ unwrapped
            let exponential = problem.surface.magnitude_mode == MagnitudeMode::Exponential;
            let s = out.sigmoid();
            let delta = if exponential {
                let (r, c) = s.shape();
                s - tape.constant(CMatrix::from_fn(r, c, |_, _| Complex::new(T::lit(0.5), T::zero())))
            } else {
                s
            }
            .scale_real(alpha);
            let delta = match config.mode {
                MetaMode::Default => delta.mirror_upper(),
                MetaMode::StrictPaper => delta,
            };
            if exponential { *ph + delta } else { (*ph + delta).wrap_phase() }
        })
        .collect())
}

/// Updated beamformers after one RBN step.
pub fn rbn_step<T: Real>(net: &Mlp<T>, sol: &Solution<T>, problem: &Problem<T>, config: &MetaConfig) -> Result<CMatrix<T>> {
    sol.check_dims(&problem.channels)?;
    let tape = Tape::new();
    let bound = net.bind(&tape);
    let w = tape.constant(sol.w.clone());
    Ok(rbn_step_on(&bound, w, &sol.p, &sol.phi.realize(), problem, config.input_scaling)?.value())
}

/// Updated powers after one TPN step.
pub fn tpn_step<T: Real>(net: &Mlp<T>, sol: &Solution<T>, problem: &Problem<T>, config: &MetaConfig) -> Result<[T; 3]> {
    sol.check_dims(&problem.channels)?;
    let tape = Tape::new();
    let bound = net.bind(&tape);
    let p = tape.constant(sol.power_matrix());
    let out = tpn_step_on(&bound, p, &sol.w, &sol.phi.realize(), problem, config.input_scaling, config.power_in_budget_units)?.value();
    Ok([out.re()[0], out.re()[1], out.re()[2]])
}

/// Updated phase blocks after one SMN step.
pub fn smn_step<T: Real>(nets: &[Mlp<T>], sol: &Solution<T>, problem: &Problem<T>, config: &MetaConfig) -> Result<Vec<CMatrix<T>>> {
    sol.check_dims(&problem.channels)?;
    let expected = smn_widths(&problem.surface, config.per_group_smn)?;
    if nets.len() != expected.len() || nets.iter().zip(&expected).any(|(n, &w)| n.d_in != w) {
        return Err(Error::ShapeMismatch(format!("SMN widths do not match the layout {:?}", problem.surface.group_sizes)));
    }
    let tape = Tape::new();
    let bound: Vec<_> = nets.iter().map(|n| n.bind(&tape)).collect();
    let phases = sol.phi.bind_phases(&tape, false);
    let out = smn_step_on(&bound, &phases, &sol.w, &sol.p, problem, config)?;
    Ok(out.iter().map(|n| n.value()).collect())
}
