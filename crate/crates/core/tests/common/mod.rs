#![allow(dead_code)]

use maml_lqr::lqr::{is_task_stabilizing, riccati_optimal};
use maml_lqr::tasks::{generate, FamilySpec};
use maml_lqr::{LqrTask, Mat, Policy, TaskSet};
use nalgebra::dmatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| r.random_range(-scale..scale))
}

pub fn random_task(r: &mut ChaCha8Rng, n: usize, m: usize) -> LqrTask {
    let a = uniform(r, n, n, 0.7);
    let b = uniform(r, n, m, 1.0);
    let mq = uniform(r, n, n, 1.0);
    let mr = uniform(r, m, m, 1.0);
    let q = mq.transpose() * &mq + Mat::identity(n, n) * 0.5;
    let rr = mr.transpose() * &mr + Mat::identity(m, m) * 0.5;
    LqrTask::new("random", a, b, q, rr).unwrap()
}

pub fn near_optimum(r: &mut ChaCha8Rng, task: &LqrTask, spread: f64) -> Policy {
    let opt = riccati_optimal(task).unwrap();
    loop {
        let w = &opt + uniform(r, opt.nrows(), opt.ncols(), spread);
        if is_task_stabilizing(task, &w).unwrap() {
            return w;
        }
    }
}

pub fn family() -> TaskSet {
    generate(&FamilySpec::paper(7)).unwrap().tasks
}

pub fn scalar(a: f64, b: f64, q: f64, r: f64) -> LqrTask {
    LqrTask::new("scalar", dmatrix![a], dmatrix![b], dmatrix![q], dmatrix![r]).unwrap()
}

pub fn rel(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
