//! Benchmark systems: a 2D car and a quadrotor, plus the composite cost
//! (quadratic tracking with Gaussian obstacle hills) they are optimized
//! against.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::trajopt::{CostModel, DynamicsModel, RunningDerivatives};

/// Kinematic car: state `(p_x, p_y, θ)`, control `(v, ω)`, explicit Euler.
#[derive(Debug, Clone)]
pub struct Car2D {
    pub dt: f64,
}

impl DynamicsModel for Car2D {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (px, py, th) = (x[0], x[1], x[2]);
        let (v, w) = (u[0], u[1]);
        DVector::from_column_slice(&[
            px + self.dt * v * libm::cos(th),
            py + self.dt * v * libm::sin(th),
            th + self.dt * w,
        ])
    }

    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let th = x[2];
        let v = u[0];
        let (s, c) = (libm::sin(th), libm::cos(th));
        let f_x = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0, 0.0, -self.dt * v * s,
                0.0, 1.0, self.dt * v * c,
                0.0, 0.0, 1.0,
            ],
        );
        let f_u = DMatrix::from_row_slice(
            3,
            2,
            &[
                self.dt * c, 0.0,
                self.dt * s, 0.0,
                0.0, self.dt,
            ],
        );
        (f_x, f_u)
    }
}

/// Quadrotor with Euler-angle orientation (roll-pitch-yaw) and four rotor
/// forces as controls; 12 states: position, velocity, Euler angles, body
/// rates. Explicit Euler integration.
///
/// Euler angles carry the usual gimbal-lock singularity at pitch ±π/2;
/// the benchmark trajectories stay far from it.
#[derive(Debug, Clone)]
pub struct Quadrotor {
    pub dt: f64,
    pub mass: f64,
    pub gravity: f64,
    pub arm_length: f64,
    /// Diagonal body inertia `(I_xx, I_yy, I_zz)`.
    pub inertia: [f64; 3],
    /// Yaw torque per unit rotor thrust.
    pub torque_coeff: f64,
}

impl Quadrotor {
    pub fn default_params(dt: f64) -> Self {
        Self {
            dt,
            mass: 0.5,
            gravity: 9.81,
            arm_length: 0.17,
            inertia: [2.3e-3, 2.3e-3, 4.0e-3],
            torque_coeff: 0.016,
        }
    }

    /// Per-rotor force that balances gravity: `m g₀ / 4`.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity / 4.0
    }

    fn xdot(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (phi, theta, psi) = (x[6], x[7], x[8]);
        let (wx, wy, wz) = (x[9], x[10], x[11]);
        let (sp, cp) = (libm::sin(phi), libm::cos(phi));
        let (st, ct) = (libm::sin(theta), libm::cos(theta));
        let (ss, cs) = (libm::sin(psi), libm::cos(psi));
        let tt = st / ct;

        let thrust = u.sum();
        let [ix, iy, iz] = self.inertia;
        let l = self.arm_length;
        let c = self.torque_coeff;
        let tau_x = l * (u[3] - u[1]);
        let tau_y = l * (u[2] - u[0]);
        let tau_z = c * (u[0] - u[1] + u[2] - u[3]);

        let mut d = DVector::zeros(12);
        // position
        d[0] = x[3];
        d[1] = x[4];
        d[2] = x[5];
        // velocity: gravity plus body-z thrust rotated to world frame
        let a = thrust / self.mass;
        d[3] = a * (cs * st * cp + ss * sp);
        d[4] = a * (ss * st * cp - cs * sp);
        d[5] = a * (ct * cp) - self.gravity;
        // Euler-rate kinematics
        d[6] = wx + sp * tt * wy + cp * tt * wz;
        d[7] = cp * wy - sp * wz;
        d[8] = (sp * wy + cp * wz) / ct;
        // body rates
        d[9] = (tau_x + (iy - iz) * wy * wz) / ix;
        d[10] = (tau_y + (iz - ix) * wx * wz) / iy;
        d[11] = (tau_z + (ix - iy) * wx * wy) / iz;
        d
    }
}

impl DynamicsModel for Quadrotor {
    fn state_dim(&self) -> usize {
        12
    }

    fn control_dim(&self) -> usize {
        4
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        x + self.xdot(x, u) * self.dt
    }

    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (phi, theta, psi) = (x[6], x[7], x[8]);
        let (wx, wy, wz) = (x[9], x[10], x[11]);
        let (sp, cp) = (libm::sin(phi), libm::cos(phi));
        let (st, ct) = (libm::sin(theta), libm::cos(theta));
        let (ss, cs) = (libm::sin(psi), libm::cos(psi));
        let tt = st / ct;
        let sec2 = 1.0 / (ct * ct);

        let thrust = u.sum();
        let a = thrust / self.mass;
        let [ix, iy, iz] = self.inertia;
        let l = self.arm_length;
        let c = self.torque_coeff;

        let mut j_x = DMatrix::zeros(12, 12);
        // dp/dv
        for i in 0..3 {
            j_x[(i, 3 + i)] = 1.0;
        }
        // dv/dη
        j_x[(3, 6)] = a * (-cs * st * sp + ss * cp);
        j_x[(3, 7)] = a * (cs * ct * cp);
        j_x[(3, 8)] = a * (-ss * st * cp + cs * sp);
        j_x[(4, 6)] = a * (-ss * st * sp - cs * cp);
        j_x[(4, 7)] = a * (ss * ct * cp);
        j_x[(4, 8)] = a * (cs * st * cp + ss * sp);
        j_x[(5, 6)] = a * (-ct * sp);
        j_x[(5, 7)] = a * (-st * cp);
        // dη̇/dη
        j_x[(6, 6)] = cp * tt * wy - sp * tt * wz;
        j_x[(6, 7)] = (sp * wy + cp * wz) * sec2;
        j_x[(7, 6)] = -sp * wy - cp * wz;
        j_x[(8, 6)] = (cp * wy - sp * wz) / ct;
        j_x[(8, 7)] = (sp * wy + cp * wz) * st * sec2;
        // dη̇/dω
        j_x[(6, 9)] = 1.0;
        j_x[(6, 10)] = sp * tt;
        j_x[(6, 11)] = cp * tt;
        j_x[(7, 10)] = cp;
        j_x[(7, 11)] = -sp;
        j_x[(8, 10)] = sp / ct;
        j_x[(8, 11)] = cp / ct;
        // dω̇/dω
        j_x[(9, 10)] = (iy - iz) * wz / ix;
        j_x[(9, 11)] = (iy - iz) * wy / ix;
        j_x[(10, 9)] = (iz - ix) * wz / iy;
        j_x[(10, 11)] = (iz - ix) * wx / iy;
        j_x[(11, 9)] = (ix - iy) * wy / iz;
        j_x[(11, 10)] = (ix - iy) * wx / iz;

        let mut j_u = DMatrix::zeros(12, 4);
        let e = [cs * st * cp + ss * sp, ss * st * cp - cs * sp, ct * cp];
        for col in 0..4 {
            for row in 0..3 {
                j_u[(3 + row, col)] = e[row] / self.mass;
            }
        }
        j_u[(9, 1)] = -l / ix;
        j_u[(9, 3)] = l / ix;
        j_u[(10, 0)] = -l / iy;
        j_u[(10, 2)] = l / iy;
        j_u[(11, 0)] = c / iz;
        j_u[(11, 1)] = -c / iz;
        j_u[(11, 2)] = c / iz;
        j_u[(11, 3)] = -c / iz;

        let f_x = DMatrix::identity(12, 12) + j_x * self.dt;
        let f_u = j_u * self.dt;
        (f_x, f_u)
    }
}

/// One Gaussian obstacle hill.
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub center: DVector<f64>,
    pub radius: f64,
    pub weight: f64,
}

/// Sum of Gaussian hills `w·exp(-‖p(x) - c‖²/(2r²))` over the position
/// components of the state. `position_dim` is how many leading state
/// entries form the position.
#[derive(Debug, Clone, Default)]
pub struct ObstacleField {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleField {
    pub fn cost(&self, x: &DVector<f64>, position_dim: usize) -> f64 {
        let p = x.rows(0, position_dim);
        self.obstacles
            .iter()
            .map(|o| {
                let d2 = (p - &o.center).norm_squared();
                o.weight * libm::exp(-d2 / (2.0 * o.radius * o.radius))
            })
            .sum()
    }

    /// Gradient and Hessian with respect to the full state; only the
    /// leading `position_dim` block is nonzero.
    pub fn derivatives(
        &self,
        x: &DVector<f64>,
        position_dim: usize,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let p = x.rows(0, position_dim).clone_owned();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for o in &self.obstacles {
            let d = &p - &o.center;
            let r2 = o.radius * o.radius;
            let e = o.weight * libm::exp(-d.norm_squared() / (2.0 * r2));
            for i in 0..position_dim {
                grad[i] += -e * d[i] / r2;
                for j in 0..position_dim {
                    let outer = d[i] * d[j] / (r2 * r2);
                    let diag = if i == j { 1.0 / r2 } else { 0.0 };
                    hess[(i, j)] += e * (outer - diag);
                }
            }
        }
        (grad, hess)
    }
}

/// Quadratic tracking cost around a target plus an obstacle field:
/// `l = ½(x-x*)ᵀQ(x-x*) + ½uᵀRu + l_obs`, `Φ = ½(x-x*)ᵀQ_f(x-x*) + l_obs`.
#[derive(Debug, Clone)]
pub struct CompositeCost {
    pub q_run: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_final: DMatrix<f64>,
    pub target: DVector<f64>,
    pub field: ObstacleField,
    pub position_dim: usize,
}

impl CostModel for CompositeCost {
    fn running(&self, x: &DVector<f64>, u: &DVector<f64>, _t: usize) -> f64 {
        let dx = x - &self.target;
        0.5 * (&self.q_run * &dx).dot(&dx)
            + 0.5 * (&self.r * u).dot(u)
            + self.field.cost(x, self.position_dim)
    }

    fn terminal(&self, x: &DVector<f64>) -> f64 {
        let dx = x - &self.target;
        0.5 * (&self.q_final * &dx).dot(&dx) + self.field.cost(x, self.position_dim)
    }

    fn running_derivatives(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        _t: usize,
    ) -> RunningDerivatives {
        let dx = x - &self.target;
        let (obs_grad, obs_hess) = self.field.derivatives(x, self.position_dim);
        RunningDerivatives {
            l_x: &self.q_run * &dx + obs_grad,
            l_u: &self.r * u,
            l_xx: &self.q_run + obs_hess,
            l_uu: self.r.clone(),
            l_ux: DMatrix::zeros(u.len(), x.len()),
        }
    }

    fn terminal_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dx = x - &self.target;
        let (obs_grad, obs_hess) = self.field.derivatives(x, self.position_dim);
        (&self.q_final * &dx + obs_grad, &self.q_final + obs_hess)
    }
}
