//! Numerically robust primitives: Moore-Penrose pseudoinverse, row-space
//! projectors, and minimum-norm linear solves.
//!
//! Everything is SVD-based. Projectors and minimum-norm solutions are never
//! formed through explicit Gram inverses `(XXᵀ)⁻¹`, which would be fragile for
//! near-collinear rows; instead the rank decision is made once on the singular
//! values and all downstream quantities reuse the factors.
//!
//! All functions are pure; the returned values are plain dense matrices and
//! vectors that can be shared freely across threads.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Dense real matrix used throughout the crate.
pub type RealMatrix = DMatrix<f64>;
/// Dense real vector used throughout the crate.
pub type RealVector = DVector<f64>;

fn check_finite_matrix(m: &RealMatrix, what: &str) -> Result<()> {
    if m.is_empty() {
        return Err(Error::Shape(format!("{what} must be nonempty")));
    }
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(format!(
            "{what} contains non-finite entries"
        )))
    }
}

fn check_finite_vector(v: &RealVector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Shape(format!("{what} must be nonempty")));
    }
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ` with singular values
/// sorted nonincreasing and orthonormal columns in both factors.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `U`, shape rows × min(rows, cols).
    pub left_vectors: RealMatrix,
    /// Nonnegative, sorted nonincreasing.
    pub singular_values: RealVector,
    /// `V`, shape cols × min(rows, cols).
    pub right_vectors: RealMatrix,
}

impl SvdFactors {
    /// Factor a finite matrix. The factors are re-sorted so the singular
    /// values are nonincreasing regardless of backend ordering.
    pub fn of(m: &RealMatrix) -> Result<Self> {
        check_finite_matrix(m, "svd input")?;
        let svd = m.clone().svd(true, true);
        let u = svd.u.expect("svd requested with left vectors");
        let v_t = svd.v_t.expect("svd requested with right vectors");
        let s = svd.singular_values;

        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).expect("finite singular values"));

        let k = order.len();
        let mut left = RealMatrix::zeros(u.nrows(), k);
        let mut right = RealMatrix::zeros(v_t.ncols(), k);
        let mut values = RealVector::zeros(k);
        for (dst, &src) in order.iter().enumerate() {
            left.set_column(dst, &u.column(src));
            right.set_column(dst, &v_t.row(src).transpose());
            values[dst] = s[src];
        }
        Ok(SvdFactors {
            left_vectors: left,
            singular_values: values,
            right_vectors: right,
        })
    }

    /// Number of rows of the factored matrix.
    pub fn rows(&self) -> usize {
        self.left_vectors.nrows()
    }

    /// Number of columns of the factored matrix.
    pub fn cols(&self) -> usize {
        self.right_vectors.nrows()
    }

    /// Absolute cutoff below which a singular value is treated as zero.
    ///
    /// `rel_tol = 0` selects the standard numerical-rank convention
    /// `max(rows, cols) · ε_machine · σ_max`; a positive `rel_tol` is applied
    /// relative to `σ_max`.
    pub fn cutoff(&self, rel_tol: f64) -> f64 {
        let sigma_max = self.singular_values.get(0).copied().unwrap_or(0.0);
        if rel_tol == 0.0 {
            self.rows().max(self.cols()) as f64 * f64::EPSILON * sigma_max
        } else {
            rel_tol * sigma_max
        }
    }

    /// Numerical rank under the given relative tolerance.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = self.cutoff(rel_tol);
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    /// Moore-Penrose inverse `V diag(1/s) Uᵀ`, truncating singular values at
    /// the cutoff.
    pub fn pseudoinverse(&self, rel_tol: f64) -> RealMatrix {
        let r = self.rank(rel_tol);
        let mut out = RealMatrix::zeros(self.cols(), self.rows());
        for i in 0..r {
            let scale = 1.0 / self.singular_values[i];
            // out += scale * v_i u_iᵀ
            out.ger(
                scale,
                &self.right_vectors.column(i),
                &self.left_vectors.column(i),
                1.0,
            );
        }
        out
    }
}

/// Moore-Penrose pseudoinverse of an arbitrary finite matrix.
///
/// The result has shape cols × rows and satisfies the four Penrose identities
/// to relative accuracy ~1e-8 for well-scaled inputs. `rel_tol = 0` uses the
/// default rank cutoff (see [`SvdFactors::cutoff`]).
pub fn pseudoinverse(m: &RealMatrix, rel_tol: f64) -> Result<RealMatrix> {
    if rel_tol < 0.0 || !rel_tol.is_finite() {
        return Err(Error::Domain(format!(
            "pseudoinverse tolerance must be finite and nonnegative, got {rel_tol}"
        )));
    }
    Ok(SvdFactors::of(m)?.pseudoinverse(rel_tol))
}

/// Orthogonal projector `H = Xᵀ(XXᵀ)†X` onto the row space of `x`.
///
/// `H` is cols × cols, symmetric, idempotent, and fixes every row of `x`:
/// `HXᵀ = Xᵀ`.
pub fn row_space_projector(x: &RealMatrix) -> Result<RealMatrix> {
    Ok(DesignSvd::new(x)?.projector_matrix())
}

/// Minimum-ℓ2-norm solution `β̂ = Xᵀ(XXᵀ)†y` of the interpolation system
/// `Xβ = y`.
///
/// For a consistent system the residual is at numerical-noise level and the
/// solution lies in the row space of `x` (zero null-space component), which is
/// what makes it the unique smallest-norm interpolator.
pub fn min_norm_solve(x: &RealMatrix, y: &RealVector) -> Result<RealVector> {
    check_finite_vector(y, "right-hand side")?;
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "design has {} rows but right-hand side has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    Ok(DesignSvd::new(x)?.min_norm_apply(y))
}

/// Cached SVD of a design matrix, exposing the operations the estimators and
/// risk formulas reuse: row-space projection, its complement, and the
/// minimum-norm solve, each applied in factored form (O(n·p) per vector
/// instead of materializing p × p projectors).
#[derive(Debug, Clone)]
pub struct DesignSvd {
    factors: SvdFactors,
    rank: usize,
}

impl DesignSvd {
    /// Factor a design matrix using the default rank cutoff.
    pub fn new(x: &RealMatrix) -> Result<Self> {
        let factors = SvdFactors::of(x)?;
        let rank = factors.rank(0.0);
        Ok(DesignSvd { factors, rank })
    }

    /// Numerical rank of the design.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Ambient dimension p (columns of the design).
    pub fn dim(&self) -> usize {
        self.factors.cols()
    }

    /// Number of rows of the design.
    pub fn rows(&self) -> usize {
        self.factors.rows()
    }

    /// Retained singular values (the first `rank` entries).
    pub fn singular_values(&self) -> &RealVector {
        &self.factors.singular_values
    }

    /// Orthonormal basis of the row space: the first `rank` right singular
    /// vectors, shape p × rank.
    pub fn row_basis(&self) -> RealMatrix {
        self.factors.right_vectors.columns(0, self.rank).into()
    }

    /// `H v`: projection of `v` onto the design row space.
    pub fn project(&self, v: &RealVector) -> RealVector {
        let w = self.factors.right_vectors.columns(0, self.rank);
        w * (w.transpose() * v)
    }

    /// `(I − H) v`: component of `v` orthogonal to the design row space.
    pub fn reject(&self, v: &RealVector) -> RealVector {
        v - self.project(v)
    }

    /// Apply `(I − H)` to every column of `m`.
    pub fn reject_cols(&self, m: &RealMatrix) -> RealMatrix {
        let w = self.factors.right_vectors.columns(0, self.rank);
        m - w * (w.transpose() * m)
    }

    /// `X† y = V diag(1/s) Uᵀ y`: the minimum-norm solution of `Xβ = y`.
    pub fn min_norm_apply(&self, y: &RealVector) -> RealVector {
        let mut coeffs = self.factors.left_vectors.columns(0, self.rank).transpose() * y;
        for i in 0..self.rank {
            coeffs[i] /= self.factors.singular_values[i];
        }
        self.factors.right_vectors.columns(0, self.rank) * coeffs
    }

    /// Materialized projector `H = W Wᵀ` (p × p).
    pub fn projector_matrix(&self) -> RealMatrix {
        let w = self.factors.right_vectors.columns(0, self.rank);
        w * w.transpose()
    }
}
