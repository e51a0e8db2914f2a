//! Per-task LQR machinery: cost, gradient, Hessian action and the Riccati
//! optimum for the static feedback `u = -W x`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    ensure_finite, is_symmetric, min_sym_eigenvalue, sigma_min, solve_dlyap,
    solve_dlyap_transpose, spectral_radius, unvec, vec, Mat, SpectralReport,
};

/// Feedback gain, `m x n`.
pub type Policy = Mat;

/// Smallest eigenvalue accepted for matrices required to be positive definite.
pub const PD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrTask {
    pub id: String,
    #[serde(with = "crate::tasks::rows")]
    pub a: Mat,
    #[serde(with = "crate::tasks::rows")]
    pub b: Mat,
    #[serde(with = "crate::tasks::rows")]
    pub q: Mat,
    #[serde(with = "crate::tasks::rows")]
    pub r: Mat,
}

impl LqrTask {
    pub fn new(id: impl Into<String>, a: Mat, b: Mat, q: Mat, r: Mat) -> Result<Self> {
        let task = LqrTask {
            id: id.into(),
            a,
            b,
            q,
            r,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        if n == 0 || m == 0 {
            return Err(Error::dim(format!("task {}: empty system", self.id)));
        }
        if self.a.ncols() != n || self.b.nrows() != n {
            return Err(Error::dim(format!(
                "task {}: A is {}x{}, B is {}x{}",
                self.id,
                self.a.nrows(),
                self.a.ncols(),
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        if self.q.shape() != (n, n) || self.r.shape() != (m, m) {
            return Err(Error::dim(format!(
                "task {}: Q must be {n}x{n} and R {m}x{m}",
                self.id
            )));
        }
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("Q", &self.q), ("R", &self.r)] {
            ensure_finite(mat, &format!("task {} {name}", self.id))?;
        }
        for (name, mat) in [("Q", &self.q), ("R", &self.r)] {
            if !is_symmetric(mat) {
                return Err(Error::invalid(format!(
                    "task {}: {name} is not symmetric",
                    self.id
                )));
            }
            let lo = min_sym_eigenvalue(mat);
            if lo <= PD_TOL {
                return Err(Error::invalid(format!(
                    "task {}: {name} is not positive definite (min eigenvalue {lo:e})",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn closed_loop(&self, w: &Policy) -> Result<Mat> {
        self.check_policy(w)?;
        Ok(&self.a - &self.b * w)
    }

    fn check_policy(&self, w: &Policy) -> Result<()> {
        if w.shape() != (self.input_dim(), self.state_dim()) {
            return Err(Error::dim(format!(
                "policy is {}x{} but task {} expects {}x{}",
                w.nrows(),
                w.ncols(),
                self.id,
                self.input_dim(),
                self.state_dim()
            )));
        }
        Ok(())
    }
}

/// Second-moment description of the initial state distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitStateModel {
    #[serde(with = "crate::tasks::rows")]
    pub sigma0: Mat,
    /// `σ_min(Σ₀)`
    pub mu: f64,
    /// `E‖x₀‖² = tr(Σ₀)`
    pub second_moment: f64,
}

impl InitStateModel {
    pub fn new(sigma0: Mat) -> Result<Self> {
        if sigma0.nrows() != sigma0.ncols() || sigma0.is_empty() {
            return Err(Error::dim("Σ₀ must be square and nonempty"));
        }
        ensure_finite(&sigma0, "Σ₀")?;
        if !is_symmetric(&sigma0) {
            return Err(Error::invalid("Σ₀ is not symmetric"));
        }
        let mu = sigma_min(&sigma0);
        if min_sym_eigenvalue(&sigma0) <= 0.0 || mu <= 0.0 {
            return Err(Error::invalid("Σ₀ must be full rank positive semidefinite"));
        }
        let second_moment = sigma0.trace();
        Ok(InitStateModel {
            sigma0,
            mu,
            second_moment,
        })
    }

    pub fn identity(n: usize) -> Self {
        InitStateModel {
            sigma0: DMatrix::identity(n, n),
            mu: 1.0,
            second_moment: n as f64,
        }
    }

    fn check(&self, task: &LqrTask) -> Result<()> {
        if self.sigma0.nrows() != task.state_dim() {
            return Err(Error::dim(format!(
                "Σ₀ is {}x{} but task {} has {} states",
                self.sigma0.nrows(),
                self.sigma0.ncols(),
                task.id,
                task.state_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrEvaluation {
    /// Value matrix `P_W`.
    pub p: Mat,
    /// State correlation `Σ_W`.
    pub sigma: Mat,
    /// Gradient kernel `E_W = (R + BᵀPB)W − BᵀPA`.
    pub e: Mat,
    pub cost: f64,
    pub grad: Mat,
    pub closed_loop: Mat,
}

pub fn closed_loop_radius(task: &LqrTask, w: &Policy) -> Result<SpectralReport> {
    spectral_radius(&task.closed_loop(w)?)
}

pub fn is_task_stabilizing(task: &LqrTask, w: &Policy) -> Result<bool> {
    Ok(closed_loop_radius(task, w)?.stable)
}

fn require_stabilizing(task: &LqrTask, w: &Policy) -> Result<Mat> {
    let acl = task.closed_loop(w)?;
    let spec = spectral_radius(&acl)?;
    if !spec.stable {
        return Err(Error::Unstable {
            context: format!("task {}", task.id),
            radius: spec.radius,
        });
    }
    Ok(acl)
}

pub fn evaluate(task: &LqrTask, w: &Policy, init: &InitStateModel) -> Result<LqrEvaluation> {
    init.check(task)?;
    let acl = require_stabilizing(task, w)?;
    let stage = &task.q + w.transpose() * &task.r * w;
    let p = solve_dlyap_transpose(&acl, &stage)?;
    let sigma = solve_dlyap(&acl, &init.sigma0)?;
    let bt_p = task.b.transpose() * &p;
    let e = (&task.r + &bt_p * &task.b) * w - &bt_p * &task.a;
    let cost = (&p * &init.sigma0).trace();
    let grad = &e * &sigma * 2.0;
    Ok(LqrEvaluation {
        p,
        sigma,
        e,
        cost,
        grad,
        closed_loop: acl,
    })
}

/// `P'_W[Y]`, the directional derivative of the value matrix.
pub fn value_derivative(eval: &LqrEvaluation, y: &Mat) -> Result<Mat> {
    let rhs = y.transpose() * &eval.e + eval.e.transpose() * y;
    solve_dlyap_transpose(&eval.closed_loop, &rhs)
}

/// `Σ'_W[Y]`, the directional derivative of the state correlation.
pub fn correlation_derivative(task: &LqrTask, eval: &LqrEvaluation, y: &Mat) -> Result<Mat> {
    let half = &task.b * y * &eval.sigma * eval.closed_loop.transpose();
    let rhs = -(&half + half.transpose());
    solve_dlyap(&eval.closed_loop, &rhs)
}

fn check_direction(task: &LqrTask, y: &Mat) -> Result<()> {
    if y.shape() != (task.input_dim(), task.state_dim()) {
        return Err(Error::dim(format!(
            "direction is {}x{}, expected {}x{}",
            y.nrows(),
            y.ncols(),
            task.input_dim(),
            task.state_dim()
        )));
    }
    Ok(())
}

/// Hessian action from a precomputed evaluation at `W`.
pub fn hessian_vec_at(task: &LqrTask, eval: &LqrEvaluation, y: &Mat) -> Result<Mat> {
    check_direction(task, y)?;
    let p_prime = value_derivative(eval, y)?;
    let sigma_prime = correlation_derivative(task, eval, y)?;
    let curvature = &task.r + task.b.transpose() * &eval.p * &task.b;
    let d_e = curvature * y - task.b.transpose() * p_prime * &eval.closed_loop;
    Ok((d_e * &eval.sigma + &eval.e * sigma_prime) * 2.0)
}

/// Directional derivative of `∇C` at `W` along `Y`.
pub fn hessian_vec(task: &LqrTask, w: &Policy, y: &Mat, init: &InitStateModel) -> Result<Mat> {
    let eval = evaluate(task, w, init)?;
    hessian_vec_at(task, &eval, y)
}

/// Quadratic form `∇²C(W)[Y,Y]` written with `P'` only.
pub fn hessian_quadratic_form(task: &LqrTask, eval: &LqrEvaluation, y: &Mat) -> Result<f64> {
    check_direction(task, y)?;
    let p_prime = value_derivative(eval, y)?;
    let curvature = &task.r + task.b.transpose() * &eval.p * &task.b;
    let first = (curvature * y * &eval.sigma).dot(y);
    let second = (task.b.transpose() * p_prime * &eval.closed_loop * &eval.sigma).dot(y);
    Ok(2.0 * first - 4.0 * second)
}

pub fn hessian_matrix_at(task: &LqrTask, eval: &LqrEvaluation) -> Result<Mat> {
    let (m, n) = (task.input_dim(), task.state_dim());
    let dim = m * n;
    let mut h = DMatrix::zeros(dim, dim);
    let mut basis = nalgebra::DVector::zeros(dim);
    for k in 0..dim {
        basis[k] = 1.0;
        let col = hessian_vec_at(task, eval, &unvec(&basis, m, n)?)?;
        h.set_column(k, &vec(&col));
        basis[k] = 0.0;
    }
    let asym = (&h - h.transpose()).norm();
    if asym > 1e-6 * (1.0 + h.norm()) {
        return Err(Error::Numerical(format!(
            "assembled Hessian is not symmetric (‖H−Hᵀ‖_F = {asym:e})"
        )));
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Hessian of `C` in `vec(W)` coordinates, `(mn) x (mn)`.
pub fn hessian_matrix(task: &LqrTask, w: &Policy, init: &InitStateModel) -> Result<Mat> {
    let eval = evaluate(task, w, init)?;
    hessian_matrix_at(task, &eval)
}

pub const RICCATI_TOL: f64 = 1e-12;
pub const RICCATI_MAX_ITERS: usize = 100_000;

/// Optimal gain from value iteration on the algebraic Riccati equation,
/// started at `P₀ = Q`.
pub fn riccati_optimal(task: &LqrTask) -> Result<Policy> {
    let (a, b, q, r) = (&task.a, &task.b, &task.q, &task.r);
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    let gain = |p: &Mat| -> Result<Mat> {
        let lhs = r + &bt * p * b;
        lhs.cholesky()
            .map(|c| c.solve(&(&bt * p * a)))
            .ok_or_else(|| Error::Numerical("R + BᵀPB lost positive definiteness".into()))
    };
    let mut converged = false;
    for _ in 0..RICCATI_MAX_ITERS {
        let k = gain(&p)?;
        let next = q + &at * &p * a - &at * &p * b * k;
        let next = (&next + next.transpose()) * 0.5;
        ensure_finite(&next, "Riccati iterate")?;
        let change = (&next - &p).norm();
        p = next;
        if change <= RICCATI_TOL * p.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: format!("Riccati value iteration for task {}", task.id),
            iterations: RICCATI_MAX_ITERS,
        });
    }
    let w = gain(&p)?;
    let spec = closed_loop_radius(task, &w)?;
    if !spec.stable {
        return Err(Error::Unstable {
            context: format!("Riccati gain for task {}", task.id),
            radius: spec.radius,
        });
    }
    Ok(w)
}
