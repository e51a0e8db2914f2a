//! The one-step MAML objective `F(W) = Σᵢ Cᵢ(W − η∇Cᵢ(W))` and its exact
//! gradient.

use crate::error::{Error, Result};
use crate::lqr::{evaluate, hessian_vec_at, InitStateModel, LqrEvaluation, LqrTask, Policy};
use crate::matrix::{spectral_radius, Mat};
use crate::tasks::TaskSet;

/// Which half of the MAML-stabilizing predicate failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityCheck {
    Task,
    InnerAdapted,
}

impl std::fmt::Display for StabilityCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StabilityCheck::Task => f.write_str("task-stabilizing check"),
            StabilityCheck::InnerAdapted => f.write_str("inner-adapted policy check"),
        }
    }
}

/// Everything computed for one task at one outer iterate.
#[derive(Debug, Clone)]
pub struct InnerStep {
    pub at_w: LqrEvaluation,
    pub adapted: Policy,
    pub at_adapted: LqrEvaluation,
    pub radius_adapted: f64,
}

fn unstable(task: &LqrTask, check: StabilityCheck, radius: f64) -> Error {
    Error::Unstable {
        context: format!("task {} ({check})", task.id),
        radius,
    }
}

pub fn inner_step(
    task: &LqrTask,
    w: &Policy,
    eta: f64,
    init: &InitStateModel,
) -> Result<InnerStep> {
    let at_w = match evaluate(task, w, init) {
        Err(Error::Unstable { radius, .. }) => {
            return Err(unstable(task, StabilityCheck::Task, radius))
        }
        other => other?,
    };
    let adapted = w - &at_w.grad * eta;
    let spec = spectral_radius(&task.closed_loop(&adapted)?)?;
    if !spec.stable {
        return Err(unstable(task, StabilityCheck::InnerAdapted, spec.radius));
    }
    let radius_adapted = spec.radius;
    let at_adapted = evaluate(task, &adapted, init)?;
    Ok(InnerStep {
        at_w,
        adapted,
        at_adapted,
        radius_adapted,
    })
}

/// Objective value and gradient at one point, with the per-task pieces kept.
#[derive(Debug, Clone)]
pub struct MamlPoint {
    pub w: Policy,
    pub value: f64,
    pub grad: Mat,
    pub steps: Vec<InnerStep>,
    pub rad_max_task: f64,
    pub rad_max_inner: f64,
}

impl MamlPoint {
    pub fn task_grads(&self) -> impl Iterator<Item = &Mat> {
        self.steps.iter().map(|s| &s.at_w.grad)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("inner step size must be >= 0, got {eta}")))
    }
}

fn inner_steps(
    tasks: &TaskSet,
    w: &Policy,
    eta: f64,
    init: &InitStateModel,
) -> Result<Vec<InnerStep>> {
    check_eta(eta)?;
    tasks
        .tasks()
        .iter()
        .map(|t| inner_step(t, w, eta, init))
        .collect()
}

pub fn maml_objective(tasks: &TaskSet, w: &Policy, eta: f64, init: &InitStateModel) -> Result<f64> {
    Ok(inner_steps(tasks, w, eta, init)?
        .iter()
        .map(|s| s.at_adapted.cost)
        .sum())
}

pub fn maml_point(
    tasks: &TaskSet,
    w: &Policy,
    eta: f64,
    init: &InitStateModel,
) -> Result<MamlPoint> {
    let steps = inner_steps(tasks, w, eta, init)?;
    let mut value = 0.0;
    let mut grad = Mat::zeros(w.nrows(), w.ncols());
    let mut rad_max_task = 0.0_f64;
    let mut rad_max_inner = 0.0_f64;
    for (task, step) in tasks.tasks().iter().zip(&steps) {
        value += step.at_adapted.cost;
        let outer = &step.at_adapted.grad;
        // G_i(W) ∇C_i(W̃_i) with G_i = I − η∇²C_i(W)
        let correction = if eta == 0.0 {
            Mat::zeros(outer.nrows(), outer.ncols())
        } else {
            hessian_vec_at(task, &step.at_w, outer)? * eta
        };
        grad += outer - correction;
        rad_max_task = rad_max_task.max(spectral_radius(&step.at_w.closed_loop)?.radius);
        rad_max_inner = rad_max_inner.max(step.radius_adapted);
    }
    Ok(MamlPoint {
        w: w.clone(),
        value,
        grad,
        steps,
        rad_max_task,
        rad_max_inner,
    })
}

pub fn maml_gradient(tasks: &TaskSet, w: &Policy, eta: f64, init: &InitStateModel) -> Result<Mat> {
    Ok(maml_point(tasks, w, eta, init)?.grad)
}

/// Task-stabilizing for every task, and every inner-adapted policy is too.
pub fn is_maml_stabilizing(
    tasks: &TaskSet,
    w: &Policy,
    eta: f64,
    init: &InitStateModel,
) -> Result<bool> {
    match inner_steps(tasks, w, eta, init) {
        Ok(_) => Ok(true),
        Err(Error::Unstable { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Margin of one step against the sufficient-decrease inequality
/// `F_{j+1} ≤ F_j − (2a − b²)‖∇F‖²/(2L)`.
pub fn descent_slack(f_j: f64, f_next: f64, grad_norm: f64, lipschitz: f64, a: f64, b: f64) -> f64 {
    f_j - f_next - (2.0 * a - b * b) * grad_norm * grad_norm / (2.0 * lipschitz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::riccati_optimal;
    use nalgebra::dmatrix;

    fn scalar_pair() -> TaskSet {
        TaskSet::new(vec![
            LqrTask::new("a", dmatrix![0.9], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]).unwrap(),
            LqrTask::new("b", dmatrix![0.9], dmatrix![1.0], dmatrix![4.0], dmatrix![0.5]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn zero_eta_sums_costs() {
        let ts = scalar_pair();
        let init = InitStateModel::identity(1);
        let w = dmatrix![0.2];
        let f = maml_objective(&ts, &w, 0.0, &init).unwrap();
        let direct: f64 = ts
            .tasks()
            .iter()
            .map(|t| evaluate(t, &w, &init).unwrap().cost)
            .sum();
        assert_eq!(f, direct);
        let g = maml_gradient(&ts, &w, 0.0, &init).unwrap();
        let direct_g = ts
            .tasks()
            .iter()
            .fold(dmatrix![0.0], |acc, t| acc + evaluate(t, &w, &init).unwrap().grad);
        assert_eq!(g, direct_g);
    }

    #[test]
    fn objective_matches_direct_composition() {
        let ts = scalar_pair();
        let init = InitStateModel::identity(1);
        let w = dmatrix![0.2];
        let eta = 0.05;
        let f = maml_objective(&ts, &w, eta, &init).unwrap();
        let direct: f64 = ts
            .tasks()
            .iter()
            .map(|t| {
                let ev = evaluate(t, &w, &init).unwrap();
                let adapted = &w - (&ev.e * &ev.sigma * 2.0) * eta;
                evaluate(t, &adapted, &init).unwrap().cost
            })
            .sum();
        assert!((f - direct).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn single_task_optimum_is_fixed() {
        let t = LqrTask::new("a", dmatrix![0.9], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let w = riccati_optimal(&t).unwrap();
        let init = InitStateModel::identity(1);
        let c = evaluate(&t, &w, &init).unwrap().cost;
        let ts = TaskSet::new(vec![t]).unwrap();
        let f = maml_objective(&ts, &w, 0.1, &init).unwrap();
        assert!((f - c).abs() <= 1e-12 * c);
        assert!(maml_gradient(&ts, &w, 0.1, &init).unwrap().norm() < 1e-9);
    }

    #[test]
    fn failing_check_is_named() {
        let ts = scalar_pair();
        let init = InitStateModel::identity(1);
        let err = maml_objective(&ts, &dmatrix![-0.5], 0.0, &init).unwrap_err();
        assert!(err.to_string().contains("task-stabilizing check"), "{err}");
        // a huge inner step throws the adapted policy out of the stable set
        let err = maml_objective(&ts, &dmatrix![0.0], 50.0, &init).unwrap_err();
        assert!(err.to_string().contains("inner-adapted"), "{err}");
        assert!(!is_maml_stabilizing(&ts, &dmatrix![0.0], 50.0, &init).unwrap());
    }

    #[test]
    fn descent_slack_arithmetic() {
        assert_eq!(descent_slack(5.0, 5.0, 0.0, 1.0, 0.4, 0.8), 0.0);
        let s = descent_slack(10.0, 9.0, 1.0, 1.0, 0.4, 0.8);
        assert!((s - 0.92).abs() < 1e-15);
    }
}
