//! Deterministic DDP machinery: dynamics and cost interfaces, rollout,
//! Gauss-Newton (iLQR) backward pass and line-searched forward pass.

use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Discrete-time dynamics `x_{t+1} = f(x_t, u_t)` with analytic Jacobians.
pub trait DynamicsModel {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    /// `(f_x, f_u)` evaluated at `(x, u)`.
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);
}

/// First and second derivatives of the running cost.
pub struct RunningDerivatives {
    pub l_x: DVector<f64>,
    pub l_u: DVector<f64>,
    pub l_xx: DMatrix<f64>,
    pub l_uu: DMatrix<f64>,
    pub l_ux: DMatrix<f64>,
}

/// Nonnegative running and terminal costs with analytic derivatives.
pub trait CostModel {
    fn running(&self, x: &DVector<f64>, u: &DVector<f64>, t: usize) -> f64;
    fn terminal(&self, x: &DVector<f64>) -> f64;
    fn running_derivatives(&self, x: &DVector<f64>, u: &DVector<f64>, t: usize)
        -> RunningDerivatives;
    /// `(Φ_x, Φ_xx)`.
    fn terminal_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
}

/// State/control sequences with their total cost.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub cost: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }
}

/// Total cost of a state/control sequence pair.
pub fn trajectory_cost<C: CostModel>(
    cost: &C,
    states: &[DVector<f64>],
    controls: &[DVector<f64>],
) -> f64 {
    let mut j = 0.0;
    for (t, u) in controls.iter().enumerate() {
        j += cost.running(&states[t], u, t);
    }
    j + cost.terminal(states.last().expect("nonempty state sequence"))
}

/// Rolls the controls through the dynamics and evaluates the cost.
pub fn rollout<D: DynamicsModel, C: CostModel>(
    dynamics: &D,
    cost: &C,
    x0: &DVector<f64>,
    controls: &[DVector<f64>],
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.clone());
    for (t, u) in controls.iter().enumerate() {
        let next = dynamics.step(&states[t], u);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RolloutDiverged { timestep: t });
        }
        states.push(next);
    }
    let cost = trajectory_cost(cost, &states, controls);
    if !cost.is_finite() {
        return Err(Error::RolloutDiverged { timestep: controls.len() });
    }
    Ok(Trajectory { states, controls: controls.to_vec(), cost })
}

/// Gains and value expansions from a backward pass.
///
/// `vtilde[t]` is the nominal cost-to-go from timestep `t`
/// (`Σ_{s>=t} l_s + Φ`), the scalar that scales the Tsallis policy
/// covariance.
pub struct BackwardResult {
    pub feedforward: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    pub quu: Vec<DMatrix<f64>>,
    pub quu_inv: Vec<DMatrix<f64>>,
    pub vtilde: Vec<f64>,
    pub v_x: Vec<DVector<f64>>,
    pub v_xx: Vec<DMatrix<f64>>,
    /// Expected cost change terms for a step of size ε:
    /// `ΔJ(ε) ≈ ε·dv1 + ε²·dv2`.
    pub dv1: f64,
    pub dv2: f64,
}

impl BackwardResult {
    pub fn horizon(&self) -> usize {
        self.feedforward.len()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Standard iLQR recursion from `t = T-1` down to 0. Dynamics Hessians are
/// omitted (Gauss-Newton expansion). `reg` is added to `Q_uu` before
/// factorization; an indefinite `Q_uu` after regularization signals
/// `RegularizationNeeded` with its smallest eigenvalue.
pub fn backward_pass<D: DynamicsModel, C: CostModel>(
    traj: &Trajectory,
    dynamics: &D,
    cost: &C,
    reg: f64,
) -> Result<BackwardResult> {
    let horizon = traj.horizon();
    let n_u = dynamics.control_dim();

    let (phi_x, phi_xx) = cost.terminal_derivatives(&traj.states[horizon]);
    let mut v_x_next = phi_x;
    let mut v_xx_next = phi_xx;

    let mut feedforward = Vec::with_capacity(horizon);
    let mut feedback = Vec::with_capacity(horizon);
    let mut quu_all = Vec::with_capacity(horizon);
    let mut quu_inv_all = Vec::with_capacity(horizon);
    let mut v_x_all = Vec::with_capacity(horizon + 1);
    let mut v_xx_all = Vec::with_capacity(horizon + 1);
    let mut cost_to_go = Vec::with_capacity(horizon + 1);

    v_x_all.push(v_x_next.clone());
    v_xx_all.push(v_xx_next.clone());
    cost_to_go.push(cost.terminal(&traj.states[horizon]));

    let mut dv1 = 0.0;
    let mut dv2 = 0.0;

    for t in (0..horizon).rev() {
        let x = &traj.states[t];
        let u = &traj.controls[t];
        let (f_x, f_u) = dynamics.jacobians(x, u);
        let d = cost.running_derivatives(x, u, t);

        let q_x = &d.l_x + f_x.transpose() * &v_x_next;
        let q_u = &d.l_u + f_u.transpose() * &v_x_next;
        let q_xx = symmetrize(&(&d.l_xx + f_x.transpose() * &v_xx_next * &f_x));
        let q_ux = &d.l_ux + f_u.transpose() * &v_xx_next * &f_x;
        let q_uu = symmetrize(
            &(&d.l_uu + f_u.transpose() * &v_xx_next * &f_u + DMatrix::identity(n_u, n_u) * reg),
        );

        let chol = match Cholesky::new(q_uu.clone()) {
            Some(c) => c,
            None => {
                let min_eigenvalue = q_uu
                    .symmetric_eigenvalues()
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                return Err(Error::RegularizationNeeded { min_eigenvalue });
            }
        };
        let k = -chol.solve(&q_u);
        let big_k = -chol.solve(&q_ux);
        let quu_inv = chol.inverse();

        dv1 += k.dot(&q_u);
        dv2 += 0.5 * (&q_uu * &k).dot(&k);

        let v_x = &q_x
            + big_k.transpose() * &q_uu * &k
            + big_k.transpose() * &q_u
            + q_ux.transpose() * &k;
        let v_xx = symmetrize(
            &(&q_xx
                + big_k.transpose() * &q_uu * &big_k
                + big_k.transpose() * &q_ux
                + q_ux.transpose() * &big_k),
        );

        cost_to_go.push(cost_to_go.last().unwrap() + cost.running(x, u, t));

        feedforward.push(k);
        feedback.push(big_k);
        quu_all.push(q_uu);
        quu_inv_all.push(quu_inv);
        v_x_all.push(v_x.clone());
        v_xx_all.push(v_xx.clone());
        v_x_next = v_x;
        v_xx_next = v_xx;
    }

    feedforward.reverse();
    feedback.reverse();
    quu_all.reverse();
    quu_inv_all.reverse();
    v_x_all.reverse();
    v_xx_all.reverse();
    cost_to_go.reverse();

    Ok(BackwardResult {
        feedforward,
        feedback,
        quu: quu_all,
        quu_inv: quu_inv_all,
        vtilde: cost_to_go,
        v_x: v_x_all,
        v_xx: v_xx_all,
        dv1,
        dv2,
    })
}

/// Outcome of the line-searched forward pass.
pub struct LineSearchResult {
    pub trajectory: Trajectory,
    /// False when no candidate improved on the input cost; the input
    /// trajectory is returned unchanged in that case.
    pub improved: bool,
    pub step: Option<f64>,
}

/// Default backtracking schedule: 1, 1/2, ..., 2⁻¹⁰.
pub fn default_schedule() -> Vec<f64> {
    (0..11).map(|i| libm::pow(0.5, i as f64)).collect()
}

/// Rolls out `u = ū + ε·k + K(x - x̄)` for each ε and accepts the first
/// strict cost decrease. Diverging candidates are skipped.
pub fn forward_line_search<D: DynamicsModel, C: CostModel>(
    traj: &Trajectory,
    gains: &BackwardResult,
    dynamics: &D,
    cost: &C,
    schedule: &[f64],
) -> Result<LineSearchResult> {
    let horizon = traj.horizon();
    if gains.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: gains.horizon(),
        });
    }
    for &eps in schedule {
        let mut states = Vec::with_capacity(horizon + 1);
        let mut controls = Vec::with_capacity(horizon);
        states.push(traj.states[0].clone());
        let mut diverged = false;
        for t in 0..horizon {
            let dx = &states[t] - &traj.states[t];
            let u = &traj.controls[t] + &gains.feedforward[t] * eps + &gains.feedback[t] * dx;
            let next = dynamics.step(&states[t], &u);
            if next.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break;
            }
            controls.push(u);
            states.push(next);
        }
        if diverged {
            continue;
        }
        let candidate_cost = trajectory_cost(cost, &states, &controls);
        if candidate_cost.is_finite() && candidate_cost < traj.cost {
            return Ok(LineSearchResult {
                trajectory: Trajectory { states, controls, cost: candidate_cost },
                improved: true,
                step: Some(eps),
            });
        }
    }
    Ok(LineSearchResult {
        trajectory: traj.clone(),
        improved: false,
        step: None,
    })
}
