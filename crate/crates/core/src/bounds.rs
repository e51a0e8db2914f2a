//! Computable stability ceilings, Lipschitz constants and step-size
//! conditions for the MAML-LQR iteration.
//!
//! Norms written `‖·‖` are spectral norms. Hessian norms are taken on the
//! assembled `(mn) x (mn)` matrix. Two per-task constants are not given in
//! closed form by the underlying analysis and are built here from quantities
//! that are: the gradient Lipschitz constant `ℓ = ‖∇²C‖ + ρδ` and the cost
//! Lipschitz constant `θ = (‖∇C‖ + ℓδ)/E‖x₀‖²`, both mean-value bounds over
//! the ball of radius `δ`. Since `ρ` itself depends on `θ`, it is computed
//! once with the provisional `ℓ⁰ = ‖∇²C‖`.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqr::{evaluate, hessian_matrix_at, InitStateModel, LqrEvaluation, LqrTask, Policy};
use crate::maml::{maml_point, MamlPoint};
use crate::matrix::{op_norm, sigma_min, Mat};
use crate::tasks::TaskSet;

/// Per-task constants at one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConstants {
    pub cost: f64,
    pub grad_norm: f64,
    pub grad_fro: f64,
    pub hess_norm: f64,
    pub delta: f64,
    pub bar_delta: f64,
    pub m: f64,
    pub n: f64,
    pub psi: f64,
    pub phi: f64,
    pub zeta: f64,
    pub zeta_clamped: bool,
    pub e: f64,
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub ell: f64,
    pub theta: f64,
    pub kappa: f64,
    /// Bound on the mean-value matrix: `‖∇²C‖ + ρδ`.
    pub h_norm_bound: f64,
    pub tr_sigma: f64,
    pub tr_sigma_bound: f64,
    pub p_norm: f64,
    pub p_bound: f64,
    pub e_norm: f64,
    pub e_bound: f64,
}

/// Scalars that only depend on the task data and the policy.
struct Norms {
    b: f64,
    b_fro: f64,
    a: f64,
    acl: f64,
    r: f64,
    w: f64,
    tr_r: f64,
    tr_acl: f64,
    q_min: f64,
}

impl Norms {
    fn new(task: &LqrTask, w: &Policy, eval: &LqrEvaluation) -> Self {
        Norms {
            b: op_norm(&task.b),
            b_fro: task.b.norm(),
            a: op_norm(&task.a),
            acl: op_norm(&eval.closed_loop),
            r: op_norm(&task.r),
            w: op_norm(w),
            tr_r: task.r.trace(),
            // the perturbation bound uses the trace as a size measure
            tr_acl: eval.closed_loop.trace().abs(),
            q_min: sigma_min(&task.q),
        }
    }
}

fn delta_from(cost: f64, nm: &Norms, mu: f64) -> f64 {
    nm.q_min * mu / (4.0 * cost * nm.b * (nm.acl + 1.0))
}

fn bar_delta_from(cost: f64, nm: &Norms, mu: f64) -> f64 {
    ((nm.acl * nm.acl + mu * nm.q_min / cost).sqrt() - nm.acl) / nm.b
}

/// Stability radius `δᵢ(W)` around a task-stabilizing policy.
pub fn delta_i(task: &LqrTask, w: &Policy, init: &InitStateModel) -> Result<f64> {
    let eval = evaluate(task, w, init)?;
    Ok(delta_from(eval.cost, &Norms::new(task, w, &eval), init.mu))
}

/// Outer-step stability radius `δ̄ᵢ(W)`.
pub fn bar_delta_i(task: &LqrTask, w: &Policy, init: &InitStateModel) -> Result<f64> {
    let eval = evaluate(task, w, init)?;
    Ok(bar_delta_from(eval.cost, &Norms::new(task, w, &eval), init.mu))
}

pub fn task_constants(task: &LqrTask, w: &Policy, init: &InitStateModel) -> Result<TaskConstants> {
    let eval = evaluate(task, w, init)?;
    let hess = hessian_matrix_at(task, &eval)?;
    Ok(constants_from(task, w, init, &eval, op_norm(&hess)))
}

fn constants_from(
    task: &LqrTask,
    w: &Policy,
    init: &InitStateModel,
    eval: &LqrEvaluation,
    hess_norm: f64,
) -> TaskConstants {
    let nm = Norms::new(task, w, eval);
    let mu = init.mu;
    let c = eval.cost;
    let c_q = c / nm.q_min;
    let c_mu = c / mu;
    let c_muq = c / (mu * nm.q_min);

    let delta = delta_from(c, &nm, mu);
    let bar_delta = bar_delta_from(c, &nm, mu);

    let m = 4.0 * c_q * c_q * nm.b * (nm.acl + 1.0) / mu;
    let n = 6.0 * (c_q * c_q * nm.w * nm.w * nm.r * nm.b * (nm.acl + 1.0) + c_q * nm.w * nm.r);
    let psi = nm.r + nm.b * nm.b * c_mu + (nm.b * nm.a + nm.b * nm.b * nm.w) * n;
    let phi = 2.0 * (nm.r * nm.w + nm.b * nm.acl * c_mu);
    let zeta_arg = (nm.r + (1.0 + nm.b * nm.b) * c_mu) / nm.q_min - 1.0;
    let zeta_clamped = zeta_arg < 0.0;
    if zeta_clamped {
        warn!("task {}: ζ square-root argument {zeta_arg:e} clamped to 0", task.id);
    }
    let zeta = zeta_arg.max(0.0).sqrt();
    let e = 4.0 * (c_muq * psi + 8.0 * c_muq * c_muq * nm.b * (nm.acl + 1.0) * phi);

    let grad_norm = op_norm(&eval.grad);
    let grad_fro = eval.grad.norm();
    let second_moment = init.second_moment;

    // provisional gradient Lipschitz constant feeds θ and hence ρ
    let ell0 = hess_norm;
    let theta0 = (grad_norm + ell0 * delta) / second_moment;
    let d = 1.0 + second_moment * theta0 / (delta * c);
    let a = n * nm.b * nm.b * c_q + d * m * nm.b_fro * c_mu + m * nm.tr_r;
    let b = nm.b
        * c
        * (zeta * m * nm.tr_acl / mu + nm.b * zeta * d * c / (mu * nm.q_min) + d * e / nm.q_min);
    let rho = 2.0 * a + 4.0 * b;

    let ell = hess_norm + rho * delta;
    let theta = (grad_norm + ell * delta) / second_moment;
    let kappa = ell + rho * bar_delta;

    TaskConstants {
        cost: c,
        grad_norm,
        grad_fro,
        hess_norm,
        delta,
        bar_delta,
        m,
        n,
        psi,
        phi,
        zeta,
        zeta_clamped,
        e,
        d,
        a,
        b,
        rho,
        ell,
        theta,
        kappa,
        h_norm_bound: hess_norm + rho * delta,
        tr_sigma: eval.sigma.trace(),
        tr_sigma_bound: c_q,
        p_norm: op_norm(&eval.p),
        p_bound: c_mu,
        e_norm: op_norm(&eval.e),
        e_bound: phi,
    }
}

/// The `Σ`, `P`, `E` and `P'` bound constants; see [`TaskConstants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBoundConstants {
    pub m: f64,
    pub n: f64,
    pub psi: f64,
    pub phi: f64,
    pub zeta: f64,
    pub zeta_clamped: bool,
    pub tr_sigma_bound: f64,
    pub p_bound: f64,
    pub e_bound: f64,
}

pub fn appendix_a_constants(
    task: &LqrTask,
    w: &Policy,
    init: &InitStateModel,
) -> Result<CostBoundConstants> {
    let tc = task_constants(task, w, init)?;
    Ok(CostBoundConstants {
        m: tc.m,
        n: tc.n,
        psi: tc.psi,
        phi: tc.phi,
        zeta: tc.zeta,
        zeta_clamped: tc.zeta_clamped,
        tr_sigma_bound: tc.tr_sigma_bound,
        p_bound: tc.p_bound,
        e_bound: tc.e_bound,
    })
}

/// Hessian Lipschitz constant on the ball of radius `δ(W)`.
pub fn rho(task: &LqrTask, w: &Policy, init: &InitStateModel) -> Result<f64> {
    Ok(task_constants(task, w, init)?.rho)
}

fn per_task(tasks: &TaskSet, w: &Policy, init: &InitStateModel) -> Result<Vec<TaskConstants>> {
    tasks
        .tasks()
        .iter()
        .map(|t| task_constants(t, w, init))
        .collect()
}

fn ceiling(numer: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        f64::INFINITY
    } else {
        numer / denom
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

/// `minᵢ δᵢ(W)/‖∇Cᵢ(W)‖`; infinite when every gradient vanishes.
pub fn eta_max_stability(tasks: &TaskSet, w: &Policy, init: &InitStateModel) -> Result<f64> {
    let mut best = f64::INFINITY;
    for t in tasks.tasks() {
        let eval = evaluate(t, w, init)?;
        let delta = delta_from(eval.cost, &Norms::new(t, w, &eval), init.mu);
        best = best.min(ceiling(delta, op_norm(&eval.grad)));
    }
    Ok(best)
}

fn eta_stability_ceiling(consts: &[TaskConstants]) -> f64 {
    min_of(consts.iter().map(|c| ceiling(c.delta, c.grad_norm)))
}

fn eta_curvature_ceiling(consts: &[TaskConstants]) -> f64 {
    min_of(
        consts
            .iter()
            .map(|c| ceiling(1.0, 4.0 * c.hess_norm + 2.0 * c.rho * c.delta)),
    )
}

fn eta_condition_ceiling(consts: &[TaskConstants], alpha: f64) -> f64 {
    let delta = min_of(consts.iter().map(|c| c.delta));
    min_of(
        consts
            .iter()
            .map(|c| ceiling((1.0 - alpha) * delta, alpha * delta * c.ell + c.grad_norm)),
    )
}

fn eta_spread_ceiling(consts: &[TaskConstants]) -> f64 {
    min_of(
        consts
            .iter()
            .map(|c| ceiling(1.0, 2.0 * (1.0 + c.rho * c.delta) * c.hess_norm)),
    )
}

/// Ceiling on `η` that keeps `γ(W) < 3/4`.
pub fn eta_max_spread(tasks: &TaskSet, w: &Policy, init: &InitStateModel) -> Result<f64> {
    Ok(eta_spread_ceiling(&per_task(tasks, w, init)?))
}

/// `maxᵢ ‖I − Gᵢ(W)(I − ηHᵢ(W))‖` with `Gᵢ = I − η∇²Cᵢ(W)` and the
/// mean-value matrix `Hᵢ` replaced by the Hessian at `W`.
pub fn gamma(tasks: &TaskSet, w: &Policy, eta: f64, init: &InitStateModel) -> Result<f64> {
    let mut worst = 0.0_f64;
    for t in tasks.tasks() {
        let eval = evaluate(t, w, init)?;
        let h = hessian_matrix_at(t, &eval)?;
        let id = Mat::identity(h.nrows(), h.ncols());
        let g = &id - &h * eta;
        worst = worst.max(op_norm(&(&id - &g * &g)));
    }
    Ok(worst)
}

/// Root-mean-square spread of the task gradients around their mean.
pub fn empirical_sigma(tasks: &TaskSet, w: &Policy, init: &InitStateModel) -> Result<f64> {
    let grads = tasks
        .tasks()
        .iter()
        .map(|t| Ok(evaluate(t, w, init)?.grad))
        .collect::<Result<Vec<_>>>()?;
    Ok(sigma_of(&grads))
}

fn sigma_of(grads: &[Mat]) -> f64 {
    let k = grads.len() as f64;
    let mean = grads
        .iter()
        .fold(Mat::zeros(grads[0].nrows(), grads[0].ncols()), |acc, g| acc + g)
        / k;
    (grads.iter().map(|g| (g - &mean).norm_squared()).sum::<f64>() / k).sqrt()
}

/// Aggregated Lipschitz data for `∇F` at a given `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzParts {
    pub ell: f64,
    pub ell_bar: f64,
    pub kappa: f64,
    pub rho: f64,
    pub delta: f64,
    pub h_norm: f64,
    pub grad_fro_sum: f64,
    /// `(1 + ηκ) ℓ̄ (1 + ηℓ) + ηρ(1 + η‖H‖) Σᵢ‖∇Cᵢ‖_F`
    pub lipschitz: f64,
    /// `ℓ̄ (1 + η(ℓ + δρ))(1 + ηℓ) + ηρ(1 + η‖H‖) Eᵢ‖∇Cᵢ‖_F`, for comparison.
    pub lipschitz_statement: f64,
}

fn lipschitz_parts(
    tasks: &TaskSet,
    consts: &[TaskConstants],
    point: &MamlPoint,
    eta: f64,
    init: &InitStateModel,
) -> Result<LipschitzParts> {
    let ell_bar = if eta == 0.0 {
        max_of(consts.iter().map(|c| c.ell))
    } else {
        let mut best = 0.0_f64;
        for (t, step) in tasks.tasks().iter().zip(&point.steps) {
            let hess = hessian_matrix_at(t, &step.at_adapted)?;
            let adapted =
                constants_from(t, &step.adapted, init, &step.at_adapted, op_norm(&hess));
            best = best.max(adapted.ell);
        }
        best
    };
    let ell = max_of(consts.iter().map(|c| c.ell));
    let kappa = max_of(consts.iter().map(|c| c.kappa));
    let rho = max_of(consts.iter().map(|c| c.rho));
    let delta = min_of(consts.iter().map(|c| c.delta));
    let h_norm = max_of(consts.iter().map(|c| c.h_norm_bound));
    let grad_fro_sum: f64 = consts.iter().map(|c| c.grad_fro).sum();
    let tail = eta * rho * (1.0 + eta * h_norm);
    let lipschitz = (1.0 + eta * kappa) * ell_bar * (1.0 + eta * ell) + tail * grad_fro_sum;
    let lipschitz_statement = ell_bar * (1.0 + eta * (ell + delta * rho)) * (1.0 + eta * ell)
        + tail * grad_fro_sum / consts.len() as f64;
    Ok(LipschitzParts {
        ell,
        ell_bar,
        kappa,
        rho,
        delta,
        h_norm,
        grad_fro_sum,
        lipschitz,
        lipschitz_statement,
    })
}

/// Lipschitz constant `L(W)` of `∇F` near `W`.
pub fn lipschitz_l(tasks: &TaskSet, w: &Policy, eta: f64, init: &InitStateModel) -> Result<f64> {
    let consts = per_task(tasks, w, init)?;
    let point = maml_point(tasks, w, eta, init)?;
    Ok(lipschitz_parts(tasks, &consts, &point, eta, init)?.lipschitz)
}

/// Constants of the step-size condition that do not depend on the step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCondition {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for StepCondition {
    fn default() -> Self {
        StepCondition {
            alpha: 0.5,
            a: 0.4,
            b: 0.8,
        }
    }
}

impl StepCondition {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::invalid("a and b must be positive"));
        }
        if 2.0 * self.a <= self.b * self.b {
            return Err(Error::invalid(format!(
                "need 2a > b², got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    EtaCurvature,
    EtaStability,
    BetaWindow,
    StabilityCap,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Constraint::EtaCurvature => "eta curvature bound",
            Constraint::EtaStability => "eta stability bound",
            Constraint::BetaWindow => "beta window",
            Constraint::StabilityCap => "stability cap",
        })
    }
}

/// Outcome of checking one `(η, β)` pair against the step-size condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition1Verdict {
    pub eta: f64,
    pub beta: f64,
    pub eta_curvature_bound: f64,
    pub eta_stability_bound: f64,
    pub beta_lower: f64,
    pub beta_upper: f64,
    pub beta_cap: f64,
    pub eta_curvature_ok: bool,
    pub eta_stability_ok: bool,
    pub beta_window_ok: bool,
    pub stability_cap_ok: bool,
    pub passed: bool,
    /// The violated constraint, or the one with the least slack when all hold.
    pub binding: Constraint,
}

fn verdict(
    consts: &[TaskConstants],
    lipschitz: f64,
    grad_f_norm: f64,
    eta: f64,
    beta: f64,
    cond: &StepCondition,
) -> Condition1Verdict {
    let eta_curvature_bound = eta_curvature_ceiling(consts);
    let eta_stability_bound = eta_condition_ceiling(consts, cond.alpha);
    let beta_lower = cond.a / lipschitz;
    let beta_upper = cond.b / lipschitz;
    let beta_cap = min_of(
        consts
            .iter()
            .map(|c| ceiling(cond.alpha * c.bar_delta, grad_f_norm)),
    );
    let eta_curvature_ok = eta < eta_curvature_bound;
    let eta_stability_ok = eta < eta_stability_bound;
    let beta_window_ok = beta_lower < beta && beta < beta_upper;
    let stability_cap_ok = beta_upper < beta_cap && beta < beta_cap;
    let passed = eta_curvature_ok && eta_stability_ok && beta_window_ok && stability_cap_ok;
    let binding = if beta >= beta_cap {
        Constraint::StabilityCap
    } else if !eta_stability_ok {
        Constraint::EtaStability
    } else if !eta_curvature_ok {
        Constraint::EtaCurvature
    } else if !beta_window_ok {
        Constraint::BetaWindow
    } else if !stability_cap_ok {
        Constraint::StabilityCap
    } else {
        let margins = [
            (Constraint::EtaCurvature, 1.0 - eta / eta_curvature_bound),
            (Constraint::EtaStability, 1.0 - eta / eta_stability_bound),
            (
                Constraint::BetaWindow,
                ((beta - beta_lower) / beta).min((beta_upper - beta) / beta_upper),
            ),
            (Constraint::StabilityCap, 1.0 - beta_upper / beta_cap),
        ];
        margins
            .iter()
            .copied()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|x| x.0)
            .unwrap_or(Constraint::BetaWindow)
    };
    Condition1Verdict {
        eta,
        beta,
        eta_curvature_bound,
        eta_stability_bound,
        beta_lower,
        beta_upper,
        beta_cap,
        eta_curvature_ok,
        eta_stability_ok,
        beta_window_ok,
        stability_cap_ok,
        passed,
        binding,
    }
}

/// All per-task and aggregate constants at one `(W, η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub eta: f64,
    pub tasks: Vec<TaskConstants>,
    pub delta: f64,
    pub lipschitz: LipschitzParts,
    pub gamma: f64,
    pub eta_max_stability: f64,
    pub eta_max_condition1: f64,
    pub eta_max_spread: f64,
    pub beta_window: (f64, f64),
    pub beta_cap: f64,
    pub sigma_hat: f64,
    pub grad_f_fro: f64,
    pub objective: f64,
}

impl BoundsReport {
    /// Requires `W` to be MAML-stabilizing at `eta`.
    pub fn compute(
        tasks: &TaskSet,
        w: &Policy,
        eta: f64,
        cond: &StepCondition,
        init: &InitStateModel,
    ) -> Result<Self> {
        let consts = per_task(tasks, w, init)?;
        let point = maml_point(tasks, w, eta, init)?;
        Self::assemble(tasks, consts, &point, eta, cond, init)
    }

    pub(crate) fn assemble(
        tasks: &TaskSet,
        consts: Vec<TaskConstants>,
        point: &MamlPoint,
        eta: f64,
        cond: &StepCondition,
        init: &InitStateModel,
    ) -> Result<Self> {
        let lipschitz = lipschitz_parts(tasks, &consts, point, eta, init)?;
        let grad_f_fro = point.grad.norm();
        let grad_f_norm = op_norm(&point.grad);
        let grads: Vec<Mat> = point.task_grads().cloned().collect();
        let gamma = gamma(tasks, &point.w, eta, init)?;
        let beta_cap = min_of(
            consts
                .iter()
                .map(|c| ceiling(cond.alpha * c.bar_delta, grad_f_norm)),
        );
        Ok(BoundsReport {
            eta,
            delta: min_of(consts.iter().map(|c| c.delta)),
            eta_max_stability: eta_stability_ceiling(&consts),
            eta_max_condition1: eta_curvature_ceiling(&consts)
                .min(eta_condition_ceiling(&consts, cond.alpha)),
            eta_max_spread: eta_spread_ceiling(&consts),
            beta_window: (
                cond.a / lipschitz.lipschitz,
                cond.b / lipschitz.lipschitz,
            ),
            beta_cap,
            sigma_hat: sigma_of(&grads),
            grad_f_fro,
            objective: point.value,
            gamma,
            lipschitz,
            tasks: consts,
        })
    }

    pub fn condition1(&self, beta: f64, cond: &StepCondition, grad_f_norm: f64) -> Condition1Verdict {
        verdict(
            &self.tasks,
            self.lipschitz.lipschitz,
            grad_f_norm,
            self.eta,
            beta,
            cond,
        )
    }

    /// One numeric entry per constant; per-task keys are `task_<i>.<name>`.
    /// Non-finite values map to `null` when serialized.
    pub fn to_flat(&self) -> BTreeMap<String, Option<f64>> {
        let mut out = BTreeMap::new();
        let mut put = |k: String, v: f64| {
            out.insert(k, v.is_finite().then_some(v));
        };
        for (i, c) in self.tasks.iter().enumerate() {
            let fields = [
                ("cost", c.cost),
                ("grad_norm", c.grad_norm),
                ("grad_fro", c.grad_fro),
                ("hess_norm", c.hess_norm),
                ("delta", c.delta),
                ("bar_delta", c.bar_delta),
                ("m", c.m),
                ("n", c.n),
                ("psi", c.psi),
                ("phi", c.phi),
                ("zeta", c.zeta),
                ("zeta_clamped", f64::from(u8::from(c.zeta_clamped))),
                ("e", c.e),
                ("d", c.d),
                ("a", c.a),
                ("b", c.b),
                ("rho", c.rho),
                ("ell", c.ell),
                ("theta", c.theta),
                ("kappa", c.kappa),
                ("h_norm_bound", c.h_norm_bound),
                ("tr_sigma", c.tr_sigma),
                ("tr_sigma_bound", c.tr_sigma_bound),
                ("p_norm", c.p_norm),
                ("p_bound", c.p_bound),
                ("e_norm", c.e_norm),
                ("e_bound", c.e_bound),
            ];
            for (name, v) in fields {
                put(format!("task_{i}.{name}"), v);
            }
        }
        let lp = &self.lipschitz;
        for (name, v) in [
            ("eta", self.eta),
            ("delta", self.delta),
            ("ell", lp.ell),
            ("ell_bar", lp.ell_bar),
            ("kappa", lp.kappa),
            ("rho", lp.rho),
            ("h_norm", lp.h_norm),
            ("L", lp.lipschitz),
            ("L_statement", lp.lipschitz_statement),
            ("gamma", self.gamma),
            ("eta_max_stability", self.eta_max_stability),
            ("eta_max_condition1", self.eta_max_condition1),
            ("eta_max_spread", self.eta_max_spread),
            ("beta_window_lo", self.beta_window.0),
            ("beta_window_hi", self.beta_window.1),
            ("beta_cap", self.beta_cap),
            ("sigma_hat", self.sigma_hat),
            ("grad_F_fro", self.grad_f_fro),
            ("F", self.objective),
        ] {
            put(name.to_string(), v);
        }
        out
    }
}

/// Condition check for an explicit `(W, η, β)`.
pub fn condition1_check(
    tasks: &TaskSet,
    w: &Policy,
    eta: f64,
    beta: f64,
    cond: &StepCondition,
    init: &InitStateModel,
) -> Result<Condition1Verdict> {
    let consts = per_task(tasks, w, init)?;
    let point = maml_point(tasks, w, eta, init)?;
    let lp = lipschitz_parts(tasks, &consts, &point, eta, init)?;
    Ok(verdict(
        &consts,
        lp.lipschitz,
        op_norm(&point.grad),
        eta,
        beta,
        cond,
    ))
}
