//! Reference computations that do not share code paths with the analytic
//! derivatives: lattice search for the MAML optimum and central finite
//! differences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqr::{evaluate, InitStateModel, LqrTask, Policy};
use crate::maml::maml_objective;
use crate::matrix::{unvec, Mat};
use crate::tasks::TaskSet;

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// `(lo, hi)` per coordinate of `vec(W)`.
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
    pub resolution: f64,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: f64) -> Result<Self> {
        let spec = GridSpec { bounds, resolution };
        spec.validate()?;
        Ok(spec)
    }

    /// Box containing the per-task optima of the two-state example family.
    pub fn paper_default() -> Self {
        GridSpec {
            bounds: vec![(-1.0, 4.0), (-6.0, 1.0)],
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::invalid(format!(
                "grid resolution must be positive, got {}",
                self.resolution
            )));
        }
        if self.bounds.is_empty() {
            return Err(Error::invalid("grid box has no coordinates"));
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!(
                    "grid coordinate {k}: need lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    /// Lattice values `lo + k·resolution ≤ hi` for coordinate `k`.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[k];
        let steps = ((hi - lo) / self.resolution + 1e-9).floor() as usize;
        (0..=steps).map(|i| lo + i as f64 * self.resolution).collect()
    }

    pub fn point_count(&self) -> usize {
        (0..self.bounds.len()).map(|k| self.axis(k).len()).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracleResult {
    pub eta: f64,
    #[serde(with = "crate::tasks::rows")]
    pub w_star: Policy,
    pub f_star: f64,
    pub evaluated_points: usize,
    pub skipped_unstable: usize,
}

/// Exhaustive search of the lattice for the smallest MAML objective among
/// MAML-stabilizing points. Ties go to the lexicographically smallest
/// `vec(W)`.
pub fn grid_search(
    tasks: &TaskSet,
    spec: &GridSpec,
    eta: f64,
    init: &InitStateModel,
) -> Result<GridOracleResult> {
    spec.validate()?;
    let (m, n) = (tasks.input_dim(), tasks.state_dim());
    if spec.bounds.len() != m * n {
        return Err(Error::dim(format!(
            "grid box has {} coordinates but policies have {}",
            spec.bounds.len(),
            m * n
        )));
    }
    let axes: Vec<Vec<f64>> = (0..m * n).map(|k| spec.axis(k)).collect();
    let total: usize = axes.iter().map(Vec::len).product();

    // index -> coordinates, last coordinate fastest, so index order is
    // lexicographic order of vec(W)
    let coords = |mut idx: usize| -> Vec<f64> {
        let mut out = vec![0.0; axes.len()];
        for k in (0..axes.len()).rev() {
            let len = axes[k].len();
            out[k] = axes[k][idx % len];
            idx /= len;
        }
        out
    };

    let values: Vec<Result<Option<f64>>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let w = unvec(&coords(idx).into(), m, n)?;
            match maml_objective(tasks, &w, eta, init) {
                Ok(f) => Ok(Some(f)),
                Err(Error::Unstable { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut evaluated = 0;
    for (idx, v) in values.into_iter().enumerate() {
        if let Some(f) = v? {
            evaluated += 1;
            if best.is_none_or(|(_, bf)| f < bf) {
                best = Some((idx, f));
            }
        }
    }
    let (idx, f_star) = best.ok_or(Error::EmptyRegion { evaluated: total })?;
    Ok(GridOracleResult {
        eta,
        w_star: unvec(&coords(idx).into(), m, n)?,
        f_star,
        evaluated_points: evaluated,
        skipped_unstable: total - evaluated,
    })
}

fn probe_error(err: Error, what: String) -> Error {
    match err {
        Error::Unstable { radius, .. } => Error::Unstable {
            context: format!("finite-difference probe {what}"),
            radius,
        },
        other => other,
    }
}

/// Central differences `(f(W + hE_kl) − f(W − hE_kl)) / 2h`.
pub fn fd_gradient<F>(f: F, w: &Policy, h: f64) -> Result<Mat>
where
    F: Fn(&Policy) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut g = Mat::zeros(w.nrows(), w.ncols());
    for k in 0..w.nrows() {
        for l in 0..w.ncols() {
            let mut plus = w.clone();
            plus[(k, l)] += h;
            let mut minus = w.clone();
            minus[(k, l)] -= h;
            let fp = f(&plus).map_err(|e| probe_error(e, format!("({k}, {l}) + h")))?;
            let fm = f(&minus).map_err(|e| probe_error(e, format!("({k}, {l}) - h")))?;
            g[(k, l)] = (fp - fm) / (2.0 * h);
        }
    }
    Ok(g)
}

fn richardson_agree(coarse: &Mat, fine: &Mat) -> Result<()> {
    let scale = fine.norm().max(f64::MIN_POSITIVE);
    let rel = (coarse - fine).norm() / scale;
    if rel > 1e-3 && (coarse - fine).norm() > 1e-12 {
        return Err(Error::Numerical(format!(
            "finite differences at h and h/2 disagree (relative {rel:e})"
        )));
    }
    Ok(())
}

/// [`fd_gradient`] at `h` and `h/2`; the finer value is returned only when
/// the two agree to 1e-3 relative.
pub fn fd_gradient_checked<F>(f: F, w: &Policy, h: f64) -> Result<Mat>
where
    F: Fn(&Policy) -> Result<f64>,
{
    let coarse = fd_gradient(&f, w, h)?;
    let fine = fd_gradient(&f, w, h / 2.0)?;
    richardson_agree(&coarse, &fine)?;
    Ok(fine)
}

/// `(∇C(W + hY) − ∇C(W − hY)) / 2h`.
pub fn fd_hessian_vec(
    task: &LqrTask,
    w: &Policy,
    y: &Mat,
    h: f64,
    init: &InitStateModel,
) -> Result<Mat> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let plus = evaluate(task, &(w + y * h), init).map_err(|e| probe_error(e, "W + hY".into()))?;
    let minus = evaluate(task, &(w - y * h), init).map_err(|e| probe_error(e, "W - hY".into()))?;
    Ok((plus.grad - minus.grad) / (2.0 * h))
}

pub fn fd_hessian_vec_checked(
    task: &LqrTask,
    w: &Policy,
    y: &Mat,
    h: f64,
    init: &InitStateModel,
) -> Result<Mat> {
    let coarse = fd_hessian_vec(task, w, y, h, init)?;
    let fine = fd_hessian_vec(task, w, y, h / 2.0, init)?;
    richardson_agree(&coarse, &fine)?;
    Ok(fine)
}
