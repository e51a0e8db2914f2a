//! Outer MAML iteration `W ← W − β∇F(W)` with step-size scheduling, the
//! stability safeguard and a full per-iteration trace.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::bounds::{task_constants, BoundsReport, StepCondition, TaskConstants};
use crate::error::{Error, Result};
use crate::lqr::{closed_loop_radius, InitStateModel, Policy};
use crate::maml::{maml_objective, maml_point, MamlPoint};
use crate::matrix::op_norm;
use crate::tasks::TaskSet;

pub const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant { eta: f64 },
    /// `η_j = min(start · factor^j, end)`
    GeometricRamp { start: f64, end: f64, factor: f64 },
    /// `safety ×` the tightest stability and step-size ceilings at `W_j`.
    Auto { safety: f64 },
}

impl EtaSchedule {
    /// Ramp that reaches `end` exactly at iterate `steps`.
    pub fn ramp(start: f64, end: f64, steps: usize) -> Self {
        let factor = (end / start).powf(1.0 / steps.max(1) as f64);
        EtaSchedule::GeometricRamp { start, end, factor }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EtaSchedule::Constant { eta } => eta.is_finite() && eta >= 0.0,
            EtaSchedule::GeometricRamp { start, end, factor } => {
                start > 0.0 && end >= start && factor >= 1.0 && end.is_finite()
            }
            EtaSchedule::Auto { safety } => safety > 0.0 && safety < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid inner step-size schedule {self:?}")))
        }
    }

    fn fixed_at(&self, j: usize) -> Option<f64> {
        match *self {
            EtaSchedule::Constant { eta } => Some(eta),
            EtaSchedule::GeometricRamp { start, end, factor } => {
                let v = start * factor.powi(j as i32);
                // snap rounding noise at the top of the ramp
                Some(if v >= end * (1.0 - 1e-12) { end } else { v })
            }
            EtaSchedule::Auto { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaRule {
    Constant { beta: f64 },
    /// Midpoint of the certified window `(a/L, min(b/L, cap))`.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizeConfig {
    pub eta: EtaSchedule,
    pub beta: BetaRule,
    #[serde(flatten)]
    pub condition: StepCondition,
}

impl StepSizeConfig {
    pub fn auto() -> Self {
        StepSizeConfig {
            eta: EtaSchedule::Auto { safety: 0.9 },
            beta: BetaRule::Auto,
            condition: StepCondition::default(),
        }
    }

    pub fn constant(eta: f64, beta: f64) -> Self {
        StepSizeConfig {
            eta: EtaSchedule::Constant { eta },
            beta: BetaRule::Constant { beta },
            condition: StepCondition::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.eta.validate()?;
        if let BetaRule::Constant { beta } = self.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::invalid(format!("outer step size must be > 0, got {beta}")));
            }
        }
        self.condition.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    #[serde(with = "crate::tasks::rows")]
    pub w: Policy,
    pub f: f64,
    pub grad_f_fro: f64,
    pub eta: f64,
    /// Step actually taken from this iterate; absent on the last row.
    pub beta: Option<f64>,
    pub rad_max_task: f64,
    pub rad_max_inner: f64,
    /// `F(W_j) − F(W_{j+1}) − (2a − b²)‖∇F‖²/(2L)`, both values at `η_j`.
    pub descent_slack: Option<f64>,
    pub lipschitz: Option<f64>,
    pub condition1: Option<bool>,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MamlResult {
    #[serde(with = "crate::tasks::rows")]
    pub w_final: Policy,
    pub iterations_used: usize,
    pub reached_epsilon: bool,
    pub final_grad_norm: f64,
    pub trace: Vec<IterationRecord>,
}

fn auto_eta(consts: &[TaskConstants], cond: &StepCondition, safety: f64) -> f64 {
    let delta = consts.iter().map(|c| c.delta).fold(f64::INFINITY, f64::min);
    let mut ceiling = f64::INFINITY;
    for c in consts {
        let stability = if c.grad_norm == 0.0 {
            f64::INFINITY
        } else {
            c.delta / c.grad_norm
        };
        let curvature = 1.0 / (4.0 * c.hess_norm + 2.0 * c.rho * c.delta);
        let step = (1.0 - cond.alpha) * delta / (cond.alpha * delta * c.ell + c.grad_norm);
        ceiling = ceiling.min(stability).min(curvature).min(step);
    }
    safety * ceiling
}

fn auto_beta(report: &BoundsReport, iter: usize) -> f64 {
    let (lo, hi) = report.beta_window;
    let top = hi.min(report.beta_cap);
    if top > lo {
        return 0.5 * (lo + top);
    }
    warn!(
        "iteration {iter}: certified outer step window is empty (a/L = {lo:e}, cap = {:e}); \
         falling back to half the stability cap",
        report.beta_cap
    );
    0.5 * report.beta_cap
}

fn all_task_stabilizing(tasks: &TaskSet, w: &Policy) -> Result<bool> {
    for t in tasks.tasks() {
        if !closed_loop_radius(t, w)?.stable {
            return Ok(false);
        }
    }
    Ok(true)
}

fn maml_ok(tasks: &TaskSet, w: &Policy, eta: f64, init: &InitStateModel) -> Result<Option<f64>> {
    match maml_objective(tasks, w, eta, init) {
        Ok(f) => Ok(Some(f)),
        Err(Error::Unstable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the outer iteration from `w0` until `‖∇F‖_F ≤ epsilon` or
/// `max_iters` updates have been taken.
pub fn run_maml(
    tasks: &TaskSet,
    w0: &Policy,
    cfg: &StepSizeConfig,
    epsilon: f64,
    max_iters: usize,
    init: &InitStateModel,
) -> Result<MamlResult> {
    cfg.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    for t in tasks.tasks() {
        let spec = closed_loop_radius(t, w0)?;
        if !spec.stable {
            return Err(Error::Unstable {
                context: format!("initial policy on task {}", t.id),
                radius: spec.radius,
            });
        }
    }
    let cond = cfg.condition;
    let mut w = w0.clone();
    let mut trace = Vec::new();
    let mut j = 0usize;
    loop {
        let consts = tasks
            .tasks()
            .iter()
            .map(|t| task_constants(t, &w, init))
            .collect::<Result<Vec<_>>>()?;
        let eta = match cfg.eta {
            EtaSchedule::Auto { safety } => auto_eta(&consts, &cond, safety),
            ref fixed => fixed.fixed_at(j).expect("fixed schedule"),
        };
        let point: MamlPoint = maml_point(tasks, &w, eta, init)?;
        let grad_f_fro = point.grad.norm();
        let mut record = IterationRecord {
            iter: j,
            w: w.clone(),
            f: point.value,
            grad_f_fro,
            eta,
            beta: None,
            rad_max_task: point.rad_max_task,
            rad_max_inner: point.rad_max_inner,
            descent_slack: None,
            lipschitz: None,
            condition1: None,
            halvings: 0,
        };
        if grad_f_fro <= epsilon || j == max_iters {
            trace.push(record);
            break;
        }

        let report = BoundsReport::assemble(tasks, consts, &point, eta, &cond, init)?;
        let beta0 = match cfg.beta {
            BetaRule::Constant { beta } => beta,
            BetaRule::Auto => auto_beta(&report, j),
        };
        let next_eta = cfg.eta.fixed_at(j + 1);
        let mut beta = beta0;
        let mut accepted = None;
        for halvings in 0..=MAX_HALVINGS {
            let cand = &w - &point.grad * beta;
            if all_task_stabilizing(tasks, &cand)? {
                let f_next = maml_ok(tasks, &cand, eta, init)?;
                let next_ok = match next_eta {
                    Some(e) if e != eta => maml_ok(tasks, &cand, e, init)?.is_some(),
                    _ => true,
                };
                if let (Some(f_next), true) = (f_next, next_ok) {
                    accepted = Some((cand, f_next, halvings));
                    break;
                }
            }
            beta *= 0.5;
        }
        let Some((cand, f_next, halvings)) = accepted else {
            return Err(Error::Safeguard {
                iteration: j,
                halvings: MAX_HALVINGS,
                last_good: Box::new(w),
            });
        };
        if halvings > 0 {
            debug!("iteration {j}: outer step halved {halvings} times to {beta:e}");
        }
        let verdict = report.condition1(beta, &cond, op_norm(&point.grad));
        let lipschitz = report.lipschitz.lipschitz;
        record.beta = Some(beta);
        record.halvings = halvings;
        record.lipschitz = Some(lipschitz);
        record.condition1 = Some(verdict.passed);
        record.descent_slack = Some(crate::maml::descent_slack(
            point.value,
            f_next,
            grad_f_fro,
            lipschitz,
            cond.a,
            cond.b,
        ));
        trace.push(record);
        w = cand;
        j += 1;
    }
    let last = trace.last().expect("trace has at least one row");
    Ok(MamlResult {
        w_final: w,
        iterations_used: trace.len() - 1,
        reached_epsilon: last.grad_f_fro <= epsilon,
        final_grad_norm: last.grad_f_fro,
        trace,
    })
}
