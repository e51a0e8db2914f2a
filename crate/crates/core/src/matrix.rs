//! Dense matrix kernels shared by every other module: spectral radius,
//! both orientations of the discrete Lyapunov equation, and column-stacking
//! vectorization.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Iteration cap handed to the Schur decomposition.
pub const EIGEN_MAX_ITERS: usize = 10_000;
/// Radii within this distance of 1 count as unstable; eigenvalues computed
/// on the unit circle land a few ulps either side of it.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Relative asymmetry accepted for matrices that must be symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub radius: f64,
    pub stable: bool,
}

impl SpectralReport {
    fn from_radius(radius: f64) -> Self {
        SpectralReport {
            radius,
            stable: radius < 1.0 - STABILITY_MARGIN,
        }
    }
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} contains non-finite entries")))
    }
}

fn ensure_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "{what} must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn is_symmetric(m: &Mat) -> bool {
    m.nrows() == m.ncols() && (m - m.transpose()).norm() <= SYMMETRY_TOL * (1.0 + m.norm())
}

/// Largest eigenvalue modulus. Stability is the strict test `radius < 1`.
pub fn spectral_radius(m: &Mat) -> Result<SpectralReport> {
    ensure_square(m, "spectral radius argument")?;
    ensure_finite(m, "spectral radius argument")?;
    if m.nrows() == 1 {
        return Ok(SpectralReport::from_radius(m[(0, 0)].abs()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITERS).ok_or(
        Error::EigenNonConvergence {
            iterations: EIGEN_MAX_ITERS,
        },
    )?;
    let radius = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    Ok(SpectralReport::from_radius(radius))
}

/// Solves `X = Q + Aclᵀ X Acl` (the value-matrix orientation).
pub fn solve_dlyap_transpose(acl: &Mat, q: &Mat) -> Result<Mat> {
    solve_lyapunov(&acl.transpose(), q)
}

/// Solves `X = Q + Acl X Aclᵀ` (the state-correlation orientation).
pub fn solve_dlyap(acl: &Mat, q: &Mat) -> Result<Mat> {
    solve_lyapunov(acl, q)
}

// X = Q + M X Mᵀ  <=>  (I - M ⊗ M) vec(X) = vec(Q)
fn solve_lyapunov(m: &Mat, q: &Mat) -> Result<Mat> {
    ensure_square(m, "closed-loop matrix")?;
    ensure_square(q, "Lyapunov right-hand side")?;
    let n = m.nrows();
    if q.nrows() != n {
        return Err(Error::dim(format!(
            "closed loop is {n}x{n} but right-hand side is {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(q, "Lyapunov right-hand side")?;
    if !is_symmetric(q) {
        return Err(Error::invalid("Lyapunov right-hand side is not symmetric"));
    }
    let spec = spectral_radius(m)?;
    if !spec.stable {
        return Err(Error::Unstable {
            context: "Lyapunov solve".into(),
            radius: spec.radius,
        });
    }
    let system = DMatrix::identity(n * n, n * n) - m.kronecker(m);
    let rhs = vec(q);
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Unstable {
            context: "Lyapunov solve (singular Kronecker system)".into(),
            radius: spec.radius,
        })?;
    let x = unvec(&sol, n, n)?;
    let x = (&x + x.transpose()) * 0.5;
    ensure_finite(&x, "Lyapunov solution")?;
    Ok(x)
}

/// Column-stacking vectorization.
pub fn vec(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::dim(format!(
            "cannot reshape length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Largest singular value.
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn sigma_min(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().min()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// `⟨Z1, Z2⟩ = tr(Z1ᵀ Z2)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn radius_of_diagonal_matrix() {
        let r = spectral_radius(&dmatrix![1.5, 0.0; 0.0, -2.0]).unwrap();
        assert_eq!(r.radius, 2.0);
        assert!(!r.stable);
    }

    #[test]
    fn identity_is_not_stable() {
        let r = spectral_radius(&DMatrix::identity(2, 2)).unwrap();
        assert!((r.radius - 1.0).abs() < 1e-15);
        assert!(!r.stable);
    }

    #[test]
    fn radius_handles_complex_pair() {
        // rotation scaled by 0.9
        let r = spectral_radius(&dmatrix![0.0, -0.9; 0.9, 0.0]).unwrap();
        assert!((r.radius - 0.9).abs() < 1e-14);
        assert!(r.stable);
    }

    #[test]
    fn radius_rejects_non_square() {
        assert!(matches!(
            spectral_radius(&DMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_closed_loop_returns_rhs() {
        let q = dmatrix![3.0, 0.0; 0.0, 5.0];
        let z = DMatrix::zeros(2, 2);
        assert_eq!(solve_dlyap_transpose(&z, &q).unwrap(), q);
        assert_eq!(solve_dlyap(&z, &q).unwrap(), q);
    }

    #[test]
    fn scalar_lyapunov() {
        let a = dmatrix![0.5];
        let q = dmatrix![1.0];
        let x = solve_dlyap_transpose(&a, &q).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let x = solve_dlyap(&a, &q).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn unstable_lyapunov_is_rejected() {
        let err = solve_dlyap(&dmatrix![1.0], &dmatrix![1.0]).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn vec_stacks_columns() {
        let m = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&m), 2, 2).unwrap(), m);
        assert!(unvec(&vec(&m), 3, 2).is_err());
    }

    #[test]
    fn kronecker_vec_identity() {
        let z1 = dmatrix![0.3, -1.2; 2.0, 0.7];
        let z2 = dmatrix![1.1, 0.4; -0.5, 0.9];
        let lhs = vec(&(&z1 * &z2));
        let rhs = DMatrix::<f64>::identity(2, 2).kronecker(&z1) * vec(&z2);
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
