use nalgebra::{DMatrix, DVector, Matrix6, Matrix6xX, MatrixXx6};

use crate::error::KinematicsError;

/// Relative singular-value threshold below which `J` counts as rank deficient
/// for an undamped inverse (eigenvalues of `J J^T` carry ~eps relative error).
const SINGULAR_RTOL: f64 = 1e-7;

/// Smallest singular value of a 6×n matrix (zero when n < 6).
pub fn smallest_singular_value(jac: &Matrix6xX<f64>) -> f64 {
    let gram: Matrix6<f64> = jac * jac.transpose();
    let lambda_min = gram.symmetric_eigenvalues().min();
    lambda_min.max(0.0).sqrt()
}

/// `J^T (J J^T + damping^2 I)^-1`.
///
/// With `damping == 0` this is the Moore–Penrose inverse of a full-row-rank
/// `J`; a rank-deficient `J` is rejected with its smallest singular value.
pub fn pseudoinverse(jac: &Matrix6xX<f64>, damping: f64) -> Result<MatrixXx6<f64>, KinematicsError> {
    if jac.ncols() < 6 {
        return Err(KinematicsError::Dimension {
            what: "jacobian columns (need n >= 6)",
            expected: 6,
            got: jac.ncols(),
        });
    }
    let mut gram: Matrix6<f64> = jac * jac.transpose();
    if damping == 0.0 {
        let eig = gram.symmetric_eigenvalues();
        let (lo, hi) = (eig.min().max(0.0), eig.max().max(0.0));
        if lo <= SINGULAR_RTOL * SINGULAR_RTOL * hi.max(1.0) {
            return Err(KinematicsError::Singular {
                sigma_min: lo.sqrt(),
            });
        }
    } else {
        gram += Matrix6::identity() * (damping * damping);
    }
    let chol = gram.cholesky().ok_or(KinematicsError::Singular {
        sigma_min: smallest_singular_value(jac),
    })?;
    // (J J^T + l^2 I)^-1 J  is 6×n; its transpose is the result.
    Ok(chol.solve(jac).transpose())
}

/// `I - J_pinv * J`.
pub fn null_projector(jac: &Matrix6xX<f64>, jac_pinv: &MatrixXx6<f64>) -> Result<DMatrix<f64>, KinematicsError> {
    let n = jac.ncols();
    if jac_pinv.nrows() != n {
        return Err(KinematicsError::Dimension {
            what: "pseudoinverse rows",
            expected: n,
            got: jac_pinv.nrows(),
        });
    }
    Ok(DMatrix::identity(n, n) - jac_pinv * jac)
}

/// When to regularize the pseudoinverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingPolicy {
    /// Damping switches on when the smallest singular value drops below this.
    pub sigma_threshold: f64,
    pub damping: f64,
}

impl Default for DampingPolicy {
    fn default() -> Self {
        DampingPolicy {
            sigma_threshold: 0.05,
            damping: 0.01,
        }
    }
}

/// A Jacobian together with its pseudoinverse and null-space projector.
#[derive(Debug, Clone)]
pub struct JacobianSet {
    pub jacobian: Matrix6xX<f64>,
    pub pinv: MatrixXx6<f64>,
    pub null: DMatrix<f64>,
    pub sigma_min: f64,
    /// Damping actually used for `pinv` (0 when exact).
    pub damping: f64,
}

impl JacobianSet {
    pub fn new(jacobian: Matrix6xX<f64>) -> Result<Self, KinematicsError> {
        Self::with_policy(jacobian, DampingPolicy::default())
    }

    pub fn with_policy(jacobian: Matrix6xX<f64>, policy: DampingPolicy) -> Result<Self, KinematicsError> {
        let sigma_min = smallest_singular_value(&jacobian);
        let damping = if sigma_min < policy.sigma_threshold {
            policy.damping
        } else {
            0.0
        };
        let pinv = pseudoinverse(&jacobian, damping)?;
        let null = null_projector(&jacobian, &pinv)?;
        Ok(JacobianSet {
            jacobian,
            pinv,
            null,
            sigma_min,
            damping,
        })
    }

    pub fn dof(&self) -> usize {
        self.jacobian.ncols()
    }

    /// `v^T N v` in a form that cannot round below zero: `|N v|^2` for the
    /// exact projector, and `l^2 |L^-1 v|^2` with `L L^T = l^2 I + J^T J` for
    /// the damped one (`N = l^2 (l^2 I + J^T J)^-1`).
    pub fn null_quadratic(&self, v: &DVector<f64>) -> f64 {
        if self.damping == 0.0 {
            return (&self.null * v).norm_squared();
        }
        let n = self.dof();
        let l2 = self.damping * self.damping;
        let gram = self.jacobian.tr_mul(&self.jacobian) + DMatrix::identity(n, n) * l2;
        let chol = gram.cholesky().expect("damped gram matrix is positive definite");
        let w = chol.l().solve_lower_triangular(v).expect("non-singular factor");
        l2 * w.norm_squared()
    }
}
