//! Task sets, the seeded task-family generator and the JSON task file.
//!
//! Coefficients come from ChaCha20 seeded with `seed_from_u64`; each draw
//! maps the top 53 bits of one `next_u64` to `[0, 1)` and rejects values that
//! land on either endpoint of the coefficient interval. Draw order is the
//! Q-basis coefficients followed by the R-basis coefficients, task by task.

use std::fs;
use std::path::Path;

use nalgebra::{dmatrix, DMatrix};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqr::{LqrTask, PD_TOL};
use crate::matrix::{is_symmetric, min_sym_eigenvalue, Mat};

pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    tasks: Vec<LqrTask>,
    shared_dynamics: bool,
}

impl TaskSet {
    pub fn new(tasks: Vec<LqrTask>) -> Result<Self> {
        let first = tasks
            .first()
            .ok_or_else(|| Error::invalid("task set must not be empty"))?;
        let (n, m) = (first.state_dim(), first.input_dim());
        for t in &tasks {
            t.validate()?;
            if t.state_dim() != n || t.input_dim() != m {
                return Err(Error::dim(format!(
                    "task {} has (n, m) = ({}, {}), expected ({n}, {m})",
                    t.id,
                    t.state_dim(),
                    t.input_dim()
                )));
            }
        }
        let shared_dynamics = tasks.iter().all(|t| t.a == first.a && t.b == first.b);
        Ok(TaskSet {
            tasks,
            shared_dynamics,
        })
    }

    pub fn tasks(&self) -> &[LqrTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn shared_dynamics(&self) -> bool {
        self.shared_dynamics
    }

    pub fn state_dim(&self) -> usize {
        self.tasks[0].state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.tasks[0].input_dim()
    }

    /// Same tasks in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let tasks = order
            .iter()
            .map(|&i| {
                self.tasks
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("task index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        TaskSet::new(tasks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(with = "rows")]
    pub a: Mat,
    #[serde(with = "rows")]
    pub b: Mat,
    #[serde(with = "rows_list")]
    pub q_bases: Vec<Mat>,
    #[serde(with = "rows_list")]
    pub r_bases: Vec<Mat>,
    pub coeff_range: (f64, f64),
    pub count: usize,
    pub seed: u64,
}

impl FamilySpec {
    /// Two-state, one-input family with unstable open loop `diag(1.5, −2)`.
    pub fn paper(seed: u64) -> Self {
        FamilySpec {
            a: dmatrix![1.5, 0.0; 0.0, -2.0],
            b: dmatrix![0.5; 0.5],
            q_bases: vec![
                dmatrix![0.01, -0.5; -0.5, 200.0],
                dmatrix![200.0, 1.0; 1.0, 0.01],
            ],
            r_bases: vec![dmatrix![2.0], dmatrix![0.1]],
            coeff_range: (0.0, 10.0),
            count: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        if self.count == 0 {
            return Err(Error::invalid("count must be positive"));
        }
        if self.a.ncols() != n || self.b.nrows() != n || n == 0 || m == 0 {
            return Err(Error::dim("A must be n x n and B n x m"));
        }
        if self.q_bases.is_empty() || self.r_bases.is_empty() {
            return Err(Error::invalid("at least one Q basis and one R basis required"));
        }
        for (kind, bases, dim) in [("Q", &self.q_bases, n), ("R", &self.r_bases, m)] {
            for (i, base) in bases.iter().enumerate() {
                if base.shape() != (dim, dim) {
                    return Err(Error::dim(format!("{kind} basis {i} must be {dim}x{dim}")));
                }
                if !is_symmetric(base) {
                    return Err(Error::invalid(format!("{kind} basis {i} is not symmetric")));
                }
            }
        }
        let (lo, hi) = self.coeff_range;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
            return Err(Error::invalid(format!(
                "coefficient range ({lo}, {hi}) must satisfy 0 <= lo <= hi"
            )));
        }
        if lo == hi && lo == 0.0 {
            return Err(Error::invalid("degenerate coefficient range must be positive"));
        }
        Ok(())
    }
}

/// Uniform draw on the open interval `(lo, hi)`; `lo == hi` yields `lo`.
fn draw_open(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        // still consume a draw so the stream position does not depend on the range
        rng.next_u64();
        return lo;
    }
    loop {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let x = lo + (hi - lo) * u;
        if x > lo && x < hi {
            return x;
        }
    }
}

fn combine(bases: &[Mat], coeffs: &[f64]) -> Mat {
    let mut out = DMatrix::zeros(bases[0].nrows(), bases[0].ncols());
    for (b, c) in bases.iter().zip(coeffs) {
        out += b * *c;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFamily {
    pub tasks: TaskSet,
    /// Per task: Q-basis coefficients then R-basis coefficients.
    pub coefficients: Vec<Vec<f64>>,
    pub spec: FamilySpec,
}

pub fn generate(spec: &FamilySpec) -> Result<GeneratedFamily> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.coeff_range;
    let nq = spec.q_bases.len();
    let mut tasks = Vec::with_capacity(spec.count);
    let mut coefficients = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut accepted = None;
        for _ in 0..=MAX_REDRAWS {
            let coeffs: Vec<f64> = (0..nq + spec.r_bases.len())
                .map(|_| draw_open(&mut rng, lo, hi))
                .collect();
            let q = combine(&spec.q_bases, &coeffs[..nq]);
            let r = combine(&spec.r_bases, &coeffs[nq..]);
            if min_sym_eigenvalue(&q) > PD_TOL && min_sym_eigenvalue(&r) > PD_TOL {
                accepted = Some((coeffs, q, r));
                break;
            }
        }
        let (coeffs, q, r) = accepted.ok_or_else(|| {
            Error::invalid(format!(
                "task {i}: no positive definite (Q, R) after {MAX_REDRAWS} redraws"
            ))
        })?;
        tasks.push(LqrTask::new(
            format!("task-{i}"),
            spec.a.clone(),
            spec.b.clone(),
            q,
            r,
        )?);
        coefficients.push(coeffs);
    }
    Ok(GeneratedFamily {
        tasks: TaskSet::new(tasks)?,
        coefficients,
        spec: spec.clone(),
    })
}

// ---------------------------------------------------------------------------
// task file

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaskFile {
    #[serde(rename = "shared_A")]
    shared_a: Vec<Vec<f64>>,
    #[serde(rename = "shared_B")]
    shared_b: Vec<Vec<f64>>,
    tasks: Vec<TaskEntry>,
    #[serde(default)]
    meta: TaskFileMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaskEntry {
    id: String,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaskFileMeta {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: Option<FamilySpec>,
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> std::result::Result<Mat, String> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err("matrix has no rows".into());
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err("matrix has no columns".into());
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub mod rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub mod rows_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ms: &[Mat], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Mat>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|rows| from_rows(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serializes a task set; the set must share `(A, B)`.
pub fn to_json(
    tasks: &TaskSet,
    coefficients: Option<&[Vec<f64>]>,
    meta: &TaskFileMeta,
) -> Result<String> {
    if !tasks.shared_dynamics() {
        return Err(Error::invalid(
            "task file format stores one shared (A, B); tasks differ in dynamics",
        ));
    }
    let first = &tasks.tasks()[0];
    let file = TaskFile {
        shared_a: to_rows(&first.a),
        shared_b: to_rows(&first.b),
        tasks: tasks
            .tasks()
            .iter()
            .enumerate()
            .map(|(i, t)| TaskEntry {
                id: t.id.clone(),
                q: to_rows(&t.q),
                r: to_rows(&t.r),
                coefficients: coefficients.and_then(|c| c.get(i).cloned()),
            })
            .collect(),
        meta: meta.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Numerical(format!("serializing task file: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<(TaskSet, TaskFileMeta)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: TaskFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        location: format!(
            "field `{}` (line {}, column {})",
            e.path(),
            e.inner().line(),
            e.inner().column()
        ),
        message: e.inner().to_string(),
    })?;
    let field = |path: String, r: std::result::Result<Mat, String>| {
        r.map_err(|message| Error::Parse {
            location: format!("field `{path}`"),
            message,
        })
    };
    let a = field("shared_A".into(), from_rows(&file.shared_a))?;
    let b = field("shared_B".into(), from_rows(&file.shared_b))?;
    if file.tasks.is_empty() {
        return Err(Error::invalid("task file contains no tasks"));
    }
    let mut tasks = Vec::with_capacity(file.tasks.len());
    for (i, entry) in file.tasks.iter().enumerate() {
        let q = field(format!("tasks[{i}].Q"), from_rows(&entry.q))?;
        let r = field(format!("tasks[{i}].R"), from_rows(&entry.r))?;
        tasks.push(LqrTask::new(entry.id.clone(), a.clone(), b.clone(), q, r)?);
    }
    Ok((TaskSet::new(tasks)?, file.meta))
}

/// Writes to a temporary sibling and renames over the destination.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save(tasks: &TaskSet, meta: &TaskFileMeta, path: &Path) -> Result<()> {
    write_atomic(path, &to_json(tasks, None, meta)?)
}

pub fn save_family(family: &GeneratedFamily, path: &Path) -> Result<()> {
    let meta = TaskFileMeta {
        seed: Some(family.spec.seed),
        spec: Some(family.spec.clone()),
    };
    write_atomic(
        path,
        &to_json(&family.tasks, Some(&family.coefficients), &meta)?,
    )
}

pub fn load(path: &Path) -> Result<TaskSet> {
    let text = fs::read_to_string(path)?;
    Ok(from_json(&text)?.0)
}
