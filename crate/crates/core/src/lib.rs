//! Gradient-based model-agnostic meta-learning (MAML) for families of
//! discrete-time LQR tasks that share their dynamics `(A, B)` and differ in
//! their cost weights `(Q, R)`.
//!
//! Modules, bottom-up:
//! - [`matrix`]: spectral radius, discrete Lyapunov solves, vectorization
//! - [`lqr`]: per-task cost, gradient, Hessian action, Riccati optimum
//! - [`maml`]: the MAML objective and its gradient
//! - [`bounds`]: stability ceilings, Lipschitz constants, step-size checks
//! - [`engine`]: the outer iteration with step-size scheduling and safeguards
//! - [`oracle`]: grid search and finite-difference reference derivatives
//! - [`tasks`]: task sets, seeded family generation and the JSON task file

pub mod bounds;
pub mod engine;
pub mod error;
pub mod lqr;
pub mod maml;
pub mod matrix;
pub mod oracle;
pub mod tasks;

pub use error::{Error, Result};
pub use lqr::{InitStateModel, LqrEvaluation, LqrTask, Policy};
pub use matrix::Mat;
pub use tasks::TaskSet;
