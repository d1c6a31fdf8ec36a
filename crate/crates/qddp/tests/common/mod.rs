//! Shared test oracles: quadrature, finite differences and an
//! independent Riccati recursion. These stay independent of the library
//! code paths they are used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qddp::trajopt::{CostModel, DynamicsModel, RunningDerivatives};

/// Adaptive Simpson quadrature on [a, b].
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    let whole = simpson(&f, a, b);
    recurse(&f, a, b, whole, tol, 40)
}

/// Integral of `f` over the whole real line via the substitution
/// `x = center + scale·sinh(t)`, which turns power-law tails into
/// exponential decay.
pub fn integrate_real_line<F: Fn(f64) -> f64 + Copy>(f: F, center: f64, scale: f64) -> f64 {
    let g = move |t: f64| f(center + scale * t.sinh()) * scale * t.cosh();
    adaptive_simpson(g, -80.0, 80.0, 1e-11)
}

/// Tensor-product integral of `f` over the plane with the same sinh
/// substitution per axis. `nodes` is the per-axis composite-Simpson
/// panel count.
pub fn integrate_plane<F: Fn(f64, f64) -> f64>(
    f: F,
    center: (f64, f64),
    scale: f64,
    t_max: f64,
    nodes: usize,
) -> f64 {
    let n = nodes * 2; // even intervals for Simpson
    let h = 2.0 * t_max / n as f64;
    let weight = |i: usize| -> f64 {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut total = 0.0;
    for i in 0..=n {
        let ti = -t_max + i as f64 * h;
        let xi = center.0 + scale * ti.sinh();
        let ji = scale * ti.cosh();
        let mut row = 0.0;
        for j in 0..=n {
            let tj = -t_max + j as f64 * h;
            let xj = center.1 + scale * tj.sinh();
            let jj = scale * tj.cosh();
            row += weight(j) * f(xi, xj) * jj;
        }
        total += weight(i) * row * ji;
    }
    total * h * h / 9.0
}

/// Central finite-difference Jacobian of `f: R^n -> R^m`.
pub fn fd_jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: F,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Central finite-difference gradient of a scalar function.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(n, |j, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = a.norm().max(b.norm()).max(1.0);
    (a - b).norm() / denom
}

/// Time-invariant linear dynamics `x' = Ax + Bu`.
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl DynamicsModel for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn control_dim(&self) -> usize {
        self.b.ncols()
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.clone(), self.b.clone())
    }
}

/// Quadratic cost `½xᵀQx + ½uᵀRu`, terminal `½xᵀQ_f x`.
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_final: DMatrix<f64>,
}

impl CostModel for QuadraticCost {
    fn running(&self, x: &DVector<f64>, u: &DVector<f64>, _t: usize) -> f64 {
        0.5 * (&self.q * x).dot(x) + 0.5 * (&self.r * u).dot(u)
    }
    fn terminal(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.q_final * x).dot(x)
    }
    fn running_derivatives(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        _t: usize,
    ) -> RunningDerivatives {
        RunningDerivatives {
            l_x: &self.q * x,
            l_u: &self.r * u,
            l_xx: self.q.clone(),
            l_uu: self.r.clone(),
            l_ux: DMatrix::zeros(u.len(), x.len()),
        }
    }
    fn terminal_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (&self.q_final * x, self.q_final.clone())
    }
}

/// Car-with-two-obstacles benchmark: a quadratic goal cost with two
/// Gaussian hills flanking the straight-line path, which creates
/// distinct local optima above, below and between the hills.
pub fn car_obstacle_problem() -> (qddp::models::Car2D, qddp::models::CompositeCost) {
    use qddp::models::{Car2D, CompositeCost, Obstacle, ObstacleField};
    let car = Car2D { dt: 0.02 };
    let mut q_run = DMatrix::zeros(3, 3);
    q_run[(0, 0)] = 0.1;
    q_run[(1, 1)] = 0.1;
    let mut q_final = DMatrix::identity(3, 3) * 50.0;
    q_final[(2, 2)] = 1.0;
    let cost = CompositeCost {
        q_run,
        r: DMatrix::identity(2, 2) * 0.05,
        q_final,
        target: DVector::from_column_slice(&[3.0, 0.0, 0.0]),
        field: ObstacleField {
            obstacles: vec![
                Obstacle {
                    center: DVector::from_column_slice(&[1.5, 0.45]),
                    radius: 0.4,
                    weight: 40.0,
                },
                Obstacle {
                    center: DVector::from_column_slice(&[1.5, -0.45]),
                    radius: 0.4,
                    weight: 40.0,
                },
            ],
        },
        position_dim: 2,
    };
    (car, cost)
}

/// Finite-horizon discrete Riccati recursion. Returns the cost-to-go
/// matrices `S_0..S_T` and feedback gains `K_0..K_{T-1}` for
/// `u_t = K_t x_t`; the optimal cost from `x0` is `½ x0ᵀ S_0 x0`.
pub fn riccati_recursion(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q_final: &DMatrix<f64>,
    horizon: usize,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let mut s = q_final.clone();
    let mut s_all = vec![s.clone()];
    let mut k_all = Vec::new();
    for _ in 0..horizon {
        let bt_s = b.transpose() * &s;
        let guu = r + &bt_s * b;
        let guu_inv = guu.try_inverse().expect("R + BᵀSB invertible");
        let k = -(&guu_inv * &bt_s * a);
        let acl = a + b * &k;
        s = q + k.transpose() * r * &k + acl.transpose() * &s * &acl;
        s = (&s + s.transpose()) * 0.5;
        s_all.push(s.clone());
        k_all.push(k);
    }
    s_all.reverse();
    k_all.reverse();
    (s_all, k_all)
}
