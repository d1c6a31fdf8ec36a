//! Maximum-entropy DDP solvers: Shannon-unimodal, Shannon-multimodal and
//! the generalized Tsallis variant with a q-Gaussian policy.
//!
//! The Tsallis policy covariance is `Σ_q = 2[(q-1)Ṽ + Cα]/(n_u+2-n_u q)
//! · Q_uu⁻¹`, where `Ṽ` is the nominal value estimate of the trajectory
//! and `C` the escort normalizer solved per timestep by bisection.
//! Exploration noise is drawn from the escort distribution `π^q/C`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qgauss::QGaussianND;
use crate::special::ln_gamma;
use crate::trajopt::{
    backward_pass, default_schedule, forward_line_search, rollout, BackwardResult, CostModel,
    DynamicsModel, Trajectory,
};
use crate::tsallis::EntropicIndex;

/// Which solver the driver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Plain DDP, single mode, no sampling.
    Ddp,
    /// Shannon entropy, unimodal Gaussian policy from the best mode.
    MeShannonUni,
    /// Shannon entropy, Gaussian-mixture policy over all modes.
    MeShannonMulti,
    /// Tsallis entropy, q-Gaussian policy with value-scaled covariance.
    MeTsallis,
}

/// Driver configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Entropy temperature α > 0.
    pub alpha: f64,
    /// Entropic index; used by `MeTsallis` only.
    pub q: f64,
    /// Number of concurrently optimized modes N ≥ 1.
    pub modes: usize,
    /// Sampling period m ≥ 1 (resample every m iterations).
    pub sample_every: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Optional cap on the scalar multiplier of `Q_uu⁻¹` in the Tsallis
    /// policy covariance. Off by default.
    pub sigma_cap: Option<f64>,
}

impl SolverConfig {
    pub fn validate(&self, n_u: usize) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Domain("alpha must be positive"));
        }
        if self.modes == 0 {
            return Err(Error::Domain("mode count must be >= 1"));
        }
        if self.sample_every == 0 {
            return Err(Error::Domain("sampling period must be >= 1"));
        }
        if self.algorithm == Algorithm::MeTsallis {
            EntropicIndex::new(self.q)?.require_in(1.0, 1.0 + 2.0 / n_u as f64)?;
        }
        Ok(())
    }
}

/// Solves `[Ṽ + αC/(q-1)]^{(n_u/2)(q-1)} · C = RHS` for the escort
/// normalization constant `C` by bisection in `ln C`, where the
/// right-hand side is
/// `((n_u+2-n_u q)/2)·[|Q_uu⁻¹|^{1/2}(2π)^{n_u/2}Γ(1/(q-1)-n_u/2)/Γ(1/(q-1))]^{1-q}`.
///
/// The left-hand side is monotonically increasing in `C`, so the root is
/// unique. The residual of the defining equation is driven below
/// `1e-10 · RHS`.
pub fn solve_normalization_constant(
    vtilde: f64,
    alpha: f64,
    q: EntropicIndex,
    n_u: usize,
    quu_inv_det: f64,
) -> Result<f64> {
    let qv = q.get();
    let nf = n_u as f64;
    q.require_in(1.0, 1.0 + 2.0 / nf)?;
    if !(vtilde >= 0.0) {
        return Err(Error::Domain("value estimate must be nonnegative"));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive"));
    }
    if !(quu_inv_det > 0.0) {
        return Err(Error::Domain("determinant must be positive"));
    }
    let inv_qm1 = 1.0 / (qv - 1.0);
    let gamma_arg = inv_qm1 - 0.5 * nf;
    if gamma_arg < 1e-10 {
        return Err(Error::Domain("q too close to 1 + 2/n_u (gamma pole)"));
    }
    let two_pi = 2.0 * core::f64::consts::PI;
    let ln_bracket = 0.5 * libm::log(quu_inv_det)
        + 0.5 * nf * libm::log(two_pi)
        + ln_gamma(gamma_arg)?
        - ln_gamma(inv_qm1)?;
    let ln_rhs = libm::log(0.5 * (nf + 2.0 - nf * qv)) + (1.0 - qv) * ln_bracket;

    // ln LHS as a function of ln C; monotone increasing.
    let expo = 0.5 * nf * (qv - 1.0);
    let ln_lhs = |ln_c: f64| -> f64 {
        let c = libm::exp(ln_c);
        expo * libm::log(vtilde + alpha * c * inv_qm1) + ln_c
    };

    let mut hi = 0.0_f64; // ln C = 0 → C = 1
    let mut lo = 0.0_f64;
    let mut expansions = 0;
    while ln_lhs(hi) < ln_rhs {
        hi += core::f64::consts::LN_2;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::BracketFailure);
        }
    }
    expansions = 0;
    while ln_lhs(lo) > ln_rhs {
        lo -= core::f64::consts::LN_2;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::BracketFailure);
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f = ln_lhs(mid) - ln_rhs;
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if libm::fabs(libm::expm1(f)) < 1e-12 {
            break;
        }
    }
    Ok(libm::exp(mid))
}

/// Gaussian policy `N(δu*, αQ_uu⁻¹)` per timestep.
pub struct GaussianPolicy {
    pub feedforward: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    pub covariance: Vec<DMatrix<f64>>,
}

/// q-Gaussian policy with value-scaled covariance.
pub struct QGaussianPolicy {
    pub feedforward: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    pub q: EntropicIndex,
    pub sigma_q: Vec<DMatrix<f64>>,
    pub normalizer: Vec<f64>,
}

/// Gaussian mixture over N modes; sampling uses the best mode's
/// trajectory and gains as reference, with the component (covariance
/// sequence) drawn once per sequence.
pub struct MixturePolicy {
    pub feedforward: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
    pub component_covariances: Vec<Vec<DMatrix<f64>>>,
}

pub enum Policy {
    Gaussian(GaussianPolicy),
    QGaussian(QGaussianPolicy),
    Mixture(MixturePolicy),
}

impl Policy {
    pub fn horizon(&self) -> usize {
        match self {
            Policy::Gaussian(p) => p.feedforward.len(),
            Policy::QGaussian(p) => p.feedforward.len(),
            Policy::Mixture(p) => p.feedforward.len(),
        }
    }

    pub fn feedforward(&self) -> &[DVector<f64>] {
        match self {
            Policy::Gaussian(p) => &p.feedforward,
            Policy::QGaussian(p) => &p.feedforward,
            Policy::Mixture(p) => &p.feedforward,
        }
    }

    pub fn feedback(&self) -> &[DMatrix<f64>] {
        match self {
            Policy::Gaussian(p) => &p.feedback,
            Policy::QGaussian(p) => &p.feedback,
            Policy::Mixture(p) => &p.feedback,
        }
    }

    /// Draws one zero-mean perturbation sequence `η_0..η_{T-1}`.
    ///
    /// Gaussian: `η_t ~ N(0, αQ_uu⁻¹)`. q-Gaussian: `η_t` from the escort
    /// distribution of the q-Gaussian with covariance `Σ_q,t`. Mixture:
    /// one component chosen by weight for the whole sequence, then its
    /// Gaussian per timestep.
    pub fn sample_noise_sequence<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<Vec<DVector<f64>>> {
        match self {
            Policy::Gaussian(p) => draw_gaussian_sequence(&p.covariance, rng),
            Policy::Mixture(p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = p.weights.len() - 1;
                for (i, w) in p.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                draw_gaussian_sequence(&p.component_covariances[idx], rng)
            }
            Policy::QGaussian(p) => {
                let n_u = p.feedforward[0].len();
                let zero = DVector::zeros(n_u);
                let mut out = Vec::with_capacity(p.sigma_q.len());
                for sigma in &p.sigma_q {
                    let dist = QGaussianND::new(p.q, zero.clone(), sigma.clone())?;
                    let escort = dist.escort_transform()?;
                    let s = escort.sample(rng, 1)?;
                    out.push(s.row(0).transpose());
                }
                Ok(out)
            }
        }
    }
}

fn draw_gaussian_sequence<R: Rng + ?Sized>(
    covariances: &[DMatrix<f64>],
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(covariances.len());
    for cov in covariances {
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
        let n = cov.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        out.push(chol.l() * z);
    }
    Ok(out)
}

/// Policy of Eq-style `N(δu*, αQ_uu⁻¹)` built from a backward pass.
pub fn build_gaussian_policy(bwd: &BackwardResult, alpha: f64) -> Result<GaussianPolicy> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive"));
    }
    Ok(GaussianPolicy {
        feedforward: bwd.feedforward.clone(),
        feedback: bwd.feedback.clone(),
        covariance: bwd.quu_inv.iter().map(|m| m * alpha).collect(),
    })
}

/// q-Gaussian policy: per timestep, solve the escort normalizer `C_t`
/// with the nominal cost-to-go `Ṽ_t`, then
/// `Σ_q,t = 2[(q-1)Ṽ_t + C_t α]/(n_u+2-n_u q) · Q_uu,t⁻¹`.
pub fn build_qgaussian_policy(
    bwd: &BackwardResult,
    alpha: f64,
    q: EntropicIndex,
    sigma_cap: Option<f64>,
) -> Result<QGaussianPolicy> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive"));
    }
    let horizon = bwd.horizon();
    let n_u = bwd.feedforward[0].len();
    let q = q.require_in(1.0, 1.0 + 2.0 / n_u as f64)?;
    let qv = q.get();
    let denom = n_u as f64 + 2.0 - n_u as f64 * qv;

    let mut sigma_q = Vec::with_capacity(horizon);
    let mut normalizer = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let vt = bwd.vtilde[t];
        if vt < 0.0 {
            return Err(Error::NegativeValueEstimate { timestep: t, value: vt });
        }
        let det = bwd.quu_inv[t].determinant();
        let c = solve_normalization_constant(vt, alpha, q, n_u, det)?;
        let mut scale = 2.0 * ((qv - 1.0) * vt + c * alpha) / denom;
        if let Some(cap) = sigma_cap {
            scale = scale.min(cap);
        }
        sigma_q.push(&bwd.quu_inv[t] * scale);
        normalizer.push(c);
    }
    Ok(QGaussianPolicy {
        feedforward: bwd.feedforward.clone(),
        feedback: bwd.feedback.clone(),
        q,
        sigma_q,
        normalizer,
    })
}

/// Mixture policy over N modes with weights `softmax(-J⁽ⁿ⁾/α)` computed
/// in log-space; reference gains come from the lowest-cost mode.
pub fn fuse_multimodal(
    bwds: &[BackwardResult],
    trajs: &[Trajectory],
    alpha: f64,
) -> Result<MixturePolicy> {
    if bwds.is_empty() || bwds.len() != trajs.len() {
        return Err(Error::DimensionMismatch { expected: trajs.len(), got: bwds.len() });
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive"));
    }
    let refs: Vec<&BackwardResult> = bwds.iter().collect();
    fuse_multimodal_refs(&refs, trajs, alpha)
}

/// Closed-loop rollout of `u_t = ū_t + k_t + K_t(x_t - x̄_t) + η_t`
/// around the reference trajectory.
pub fn rollout_with_perturbation<D: DynamicsModel, C: CostModel>(
    base: &Trajectory,
    feedforward: &[DVector<f64>],
    feedback: &[DMatrix<f64>],
    noise: &[DVector<f64>],
    dynamics: &D,
    cost: &C,
) -> Result<Trajectory> {
    let horizon = base.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon);
    states.push(base.states[0].clone());
    for t in 0..horizon {
        let dx = &states[t] - &base.states[t];
        let mut u = &base.controls[t] + &feedforward[t] + &feedback[t] * dx;
        if let Some(eta) = noise.get(t) {
            u += eta;
        }
        let next = dynamics.step(&states[t], &u);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RolloutDiverged { timestep: t });
        }
        controls.push(u);
        states.push(next);
    }
    let total = crate::trajopt::trajectory_cost(cost, &states, &controls);
    if !total.is_finite() {
        return Err(Error::RolloutDiverged { timestep: horizon });
    }
    Ok(Trajectory { states, controls, cost: total })
}

/// Samples a new trajectory from the policy around `base`. Divergent
/// rollouts are retried with fresh noise up to 5 times, after which the
/// base trajectory is returned unchanged.
pub fn sample_control_sequence<D: DynamicsModel, C: CostModel, R: Rng + ?Sized>(
    policy: &Policy,
    base: &Trajectory,
    dynamics: &D,
    cost: &C,
    rng: &mut R,
) -> Result<Trajectory> {
    if policy.horizon() != base.horizon() {
        return Err(Error::DimensionMismatch {
            expected: base.horizon(),
            got: policy.horizon(),
        });
    }
    for _ in 0..5 {
        let noise = policy.sample_noise_sequence(rng)?;
        match rollout_with_perturbation(
            base,
            policy.feedforward(),
            policy.feedback(),
            &noise,
            dynamics,
            cost,
        ) {
            Ok(traj) => return Ok(traj),
            Err(Error::RolloutDiverged { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(base.clone())
}

/// Output of the multi-mode driver.
pub struct RunResult {
    pub best: Trajectory,
    /// `cost_history[n][i]`: cost of mode `n` after iteration `i`.
    pub cost_history: Vec<Vec<f64>>,
    /// Best-mode cost after each iteration; non-increasing.
    pub best_cost_history: Vec<f64>,
    pub final_costs: Vec<f64>,
}

const REG_FLOOR: f64 = 1e-9;
const REG_CAP: f64 = 1e8;

struct Mode {
    traj: Trajectory,
    bwd: Option<BackwardResult>,
    reg: f64,
}

/// Multi-trajectory driver: every `m` iterations the lowest-cost mode
/// becomes the policy reference and the remaining modes are resampled
/// from it; every iteration each mode gets a backward pass and a
/// line-searched forward pass. Returns the lowest-cost mode.
pub fn run<D: DynamicsModel, C: CostModel>(
    config: &SolverConfig,
    dynamics: &D,
    cost: &C,
    x0: &DVector<f64>,
    initial_controls: &[Vec<DVector<f64>>],
) -> Result<RunResult> {
    config.validate(dynamics.control_dim())?;
    let n_modes = if config.algorithm == Algorithm::Ddp { 1 } else { config.modes };
    if initial_controls.len() < n_modes {
        return Err(Error::DimensionMismatch {
            expected: n_modes,
            got: initial_controls.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let schedule = default_schedule();

    let mut modes: Vec<Mode> = initial_controls[..n_modes]
        .iter()
        .map(|u| {
            rollout(dynamics, cost, x0, u).map(|traj| Mode { traj, bwd: None, reg: REG_FLOOR })
        })
        .collect::<Result<_>>()?;

    let mut cost_history: Vec<Vec<f64>> = vec![Vec::with_capacity(config.max_iter); n_modes];
    let mut best_cost_history = Vec::with_capacity(config.max_iter);

    for iter in 0..config.max_iter {
        let sampling_due = config.algorithm != Algorithm::Ddp
            && n_modes > 1
            && iter > 0
            && iter % config.sample_every == 0;
        if sampling_due {
            let best = argmin_cost(&modes);
            modes.swap(0, best);
            if let Some(policy) = build_policy(config, &modes, dynamics, cost)? {
                let base = modes[0].traj.clone();
                for mode in modes.iter_mut().skip(1) {
                    mode.traj = sample_control_sequence(&policy, &base, dynamics, cost, &mut rng)?;
                    mode.bwd = None;
                }
            }
        }

        for mode in modes.iter_mut() {
            match optimize_step(mode, dynamics, cost, &schedule) {
                Ok(()) => {}
                // A mode whose backward pass cannot be stabilized keeps
                // its previous trajectory for this iteration.
                Err(Error::RegularizationNeeded { .. }) => {}
                Err(e) => return Err(e),
            }
        }

        for (n, mode) in modes.iter().enumerate() {
            cost_history[n].push(mode.traj.cost);
        }
        let best = modes.iter().map(|m| m.traj.cost).fold(f64::INFINITY, f64::min);
        best_cost_history.push(best);
    }

    let best = argmin_cost(&modes);
    let final_costs: Vec<f64> = modes.iter().map(|m| m.traj.cost).collect();
    Ok(RunResult {
        best: modes.swap_remove(best).traj,
        cost_history,
        best_cost_history,
        final_costs,
    })
}

fn argmin_cost(modes: &[Mode]) -> usize {
    modes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.traj.cost.total_cmp(&b.1.traj.cost))
        .map(|(i, _)| i)
        .unwrap()
}

/// Backward pass used for the sampling policy. Unlike the stepping pass,
/// it starts from the minimal regularization so a converged mode (whose
/// Levenberg-Marquardt parameter has grown after repeated line-search
/// rejections) still yields a non-degenerate `Q_uu⁻¹` covariance.
fn policy_backward_pass<D: DynamicsModel, C: CostModel>(
    traj: &Trajectory,
    dynamics: &D,
    cost: &C,
) -> Result<BackwardResult> {
    let mut reg = REG_FLOOR;
    loop {
        match backward_pass(traj, dynamics, cost, reg) {
            Ok(b) => return Ok(b),
            Err(Error::RegularizationNeeded { min_eigenvalue }) => {
                reg *= 10.0;
                if reg > REG_CAP {
                    return Err(Error::RegularizationNeeded { min_eigenvalue });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn build_policy<D: DynamicsModel, C: CostModel>(
    config: &SolverConfig,
    modes: &[Mode],
    dynamics: &D,
    cost: &C,
) -> Result<Option<Policy>> {
    // Sampling needs modes that have been optimized at least once.
    if modes[0].bwd.is_none() {
        return Ok(None);
    }
    let policy = match config.algorithm {
        Algorithm::Ddp => return Ok(None),
        Algorithm::MeShannonUni => {
            let bwd = policy_backward_pass(&modes[0].traj, dynamics, cost)?;
            Policy::Gaussian(build_gaussian_policy(&bwd, config.alpha)?)
        }
        Algorithm::MeShannonMulti => {
            // A mode that has wandered somewhere so ill-conditioned that
            // even the capped regularization cannot make its Q_uu positive
            // definite carries no usable local policy; drop it from the
            // mixture rather than failing the solve.
            let mut trajs: Vec<Trajectory> = Vec::new();
            let mut bwds: Vec<BackwardResult> = Vec::new();
            for mode in modes.iter().filter(|m| m.bwd.is_some()) {
                if let Ok(bwd) = policy_backward_pass(&mode.traj, dynamics, cost) {
                    trajs.push(mode.traj.clone());
                    bwds.push(bwd);
                }
            }
            if bwds.is_empty() {
                let bwd = policy_backward_pass(&modes[0].traj, dynamics, cost)?;
                trajs.push(modes[0].traj.clone());
                bwds.push(bwd);
            }
            let refs: Vec<&BackwardResult> = bwds.iter().collect();
            Policy::Mixture(fuse_multimodal_refs(&refs, &trajs, config.alpha)?)
        }
        Algorithm::MeTsallis => {
            let bwd = policy_backward_pass(&modes[0].traj, dynamics, cost)?;
            Policy::QGaussian(build_qgaussian_policy(
                &bwd,
                config.alpha,
                EntropicIndex::new(config.q)?,
                config.sigma_cap,
            )?)
        }
    };
    Ok(Some(policy))
}

fn fuse_multimodal_refs(
    bwds: &[&BackwardResult],
    trajs: &[Trajectory],
    alpha: f64,
) -> Result<MixturePolicy> {
    let logits: Vec<f64> = trajs.iter().map(|t| -t.cost / alpha).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = unnorm.iter().sum();
    let weights: Vec<f64> = unnorm.iter().map(|w| w / total).collect();
    let best = trajs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .unwrap();
    Ok(MixturePolicy {
        feedforward: bwds[best].feedforward.clone(),
        feedback: bwds[best].feedback.clone(),
        weights,
        component_covariances: bwds
            .iter()
            .map(|b| b.quu_inv.iter().map(|m| m * alpha).collect())
            .collect(),
    })
}

fn optimize_step<D: DynamicsModel, C: CostModel>(
    mode: &mut Mode,
    dynamics: &D,
    cost: &C,
    schedule: &[f64],
) -> Result<()> {
    let bwd = loop {
        match backward_pass(&mode.traj, dynamics, cost, mode.reg) {
            Ok(b) => break b,
            Err(Error::RegularizationNeeded { min_eigenvalue }) => {
                mode.reg = (mode.reg * 10.0).max(REG_FLOOR * 10.0);
                if mode.reg > REG_CAP {
                    return Err(Error::RegularizationNeeded { min_eigenvalue });
                }
            }
            Err(e) => return Err(e),
        }
    };
    let ls = forward_line_search(&mode.traj, &bwd, dynamics, cost, schedule)?;
    if ls.improved {
        mode.traj = ls.trajectory;
        mode.reg = (mode.reg * 0.5).max(REG_FLOOR);
    } else {
        mode.reg = (mode.reg * 10.0).min(REG_CAP);
    }
    mode.bwd = Some(bwd);
    Ok(())
}
