//! Dense materialization and operator norm computation.
//!
//! Norm convention: all `L^2` integrals use Lebesgue measure on `[0,1)`, a
//! factor `2^-L` per cell. The factor cancels in every norm ratio, so the
//! dense matrix acts directly on cell values and its spectral norm equals the
//! `L^2 -> L^2` operator norm.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{Component, KernelCoeffs};
use crate::tree::CellVector;
use crate::weights::{Weight, WeightPair};

/// Default memory guard for dense matrices.
pub const DEFAULT_DEPTH_GUARD: u32 = 12;

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 100_000;

/// Dense cell-to-cell matrix of a linear operator on the tree; matrix-vector
/// product reproduces operator application on cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    depth: u32,
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    /// Build by applying `op` to every cell indicator (one column each).
    pub fn materialize_with(
        depth: u32,
        guard: u32,
        op: impl Fn(&CellVector) -> Result<CellVector>,
    ) -> Result<Self> {
        if depth > guard {
            return Err(Error::DepthGuard { depth, guard });
        }
        let n = 1usize << depth;
        let mut matrix = DMatrix::zeros(n, n);
        for col in 0..n {
            let image = op(&CellVector::cell_indicator(depth, col))?;
            for (row, &v) in image.values().iter().enumerate() {
                matrix[(row, col)] = v;
            }
        }
        Ok(DenseOperator { depth, matrix })
    }

    pub fn materialize_kernel(kernel: &KernelCoeffs) -> Result<Self> {
        Self::materialize_with(kernel.depth(), DEFAULT_DEPTH_GUARD, |f| kernel.apply(f))
    }

    pub fn materialize_adjoint(kernel: &KernelCoeffs) -> Result<Self> {
        Self::materialize_with(kernel.depth(), DEFAULT_DEPTH_GUARD, |f| {
            kernel.apply_adjoint(f)
        })
    }

    pub fn materialize_component(kernel: &KernelCoeffs, which: Component) -> Result<Self> {
        Self::materialize_with(kernel.depth(), DEFAULT_DEPTH_GUARD, |f| {
            kernel.apply_component(which, f)
        })
    }

    pub fn materialize_t0(pair: &WeightPair) -> Result<Self> {
        Self::materialize_with(pair.depth(), DEFAULT_DEPTH_GUARD, |f| {
            crate::conditions::apply_t0(pair, f)
        })
    }

    pub fn identity(depth: u32) -> Self {
        let n = 1usize << depth;
        DenseOperator {
            depth,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn transpose(&self) -> DenseOperator {
        DenseOperator {
            depth: self.depth,
            matrix: self.matrix.transpose(),
        }
    }

    /// Largest entrywise difference against another dense operator.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        if self.depth != other.depth {
            return f64::INFINITY;
        }
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn apply(&self, f: &CellVector) -> Result<CellVector> {
        crate::tree::check_depths(self.depth, f.depth())?;
        let v = DVector::from_column_slice(f.values());
        let out = &self.matrix * v;
        CellVector::new(self.depth, out.as_slice().to_vec())
    }

    /// Conjugate by the diagonal weight factors: `D_{sqrt(u)} A D_{sqrt(v^-1)}`.
    pub fn weighted(&self, v_inv: &Weight, u: &Weight) -> Result<DenseOperator> {
        crate::tree::check_depths(self.depth, u.depth())?;
        crate::tree::check_depths(self.depth, v_inv.depth())?;
        let n = self.matrix.nrows();
        let mut matrix = self.matrix.clone();
        for row in 0..n {
            let ru = u.cells().values()[row].sqrt();
            for col in 0..n {
                matrix[(row, col)] *= ru * v_inv.cells().values()[col].sqrt();
            }
        }
        Ok(DenseOperator {
            depth: self.depth,
            matrix,
        })
    }

    /// Largest singular value via power iteration on `A^T A` with a
    /// deterministic all-ones start, relative tolerance 1e-10. Below depth 9
    /// a non-converged iteration falls back to the full eigendecomposition;
    /// otherwise non-convergence is reported, never silently truncated.
    pub fn l2_norm(&self) -> Result<f64> {
        match self.power_iteration() {
            Ok(v) => Ok(v),
            Err(Error::NoConvergence { .. }) if self.depth < 9 => Ok(self.l2_norm_eig()),
            Err(e) => Err(e),
        }
    }

    fn power_iteration(&self) -> Result<f64> {
        let n = self.matrix.nrows();
        let gram = self.matrix.transpose() * &self.matrix;
        if gram.iter().all(|&x| x == 0.0) {
            return Ok(0.0);
        }
        let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut sigma2 = 0.0f64;
        for it in 0..POWER_ITER_MAX {
            let mut w = &gram * &v;
            let norm = w.norm();
            if norm == 0.0 {
                // start vector lies in the kernel of A^T A; restart off a
                // deterministic skewed vector
                v = DVector::from_iterator(n, (0..n).map(|i| 1.0 + (i as f64 + 1.0).ln()));
                v /= v.norm();
                continue;
            }
            w /= norm;
            let next = w.dot(&(&gram * &w));
            let done = (next - sigma2).abs() <= POWER_ITER_TOL * next.max(f64::MIN_POSITIVE);
            sigma2 = next;
            v = w;
            if done && it > 2 {
                return Ok(sigma2.max(0.0).sqrt());
            }
        }
        Err(Error::NoConvergence {
            iterations: POWER_ITER_MAX,
            value: sigma2.max(0.0).sqrt(),
        })
    }

    /// Oracle route: largest singular value via full symmetric
    /// eigendecomposition of `A^T A`.
    pub fn l2_norm_eig(&self) -> f64 {
        let gram = self.matrix.transpose() * &self.matrix;
        let eig = gram.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .fold(0.0f64, |m, &l| m.max(l))
            .sqrt()
    }

    /// Dump as dense CSV for external verification.
    pub fn dump_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        for row in 0..self.matrix.nrows() {
            let line: Vec<String> = (0..self.matrix.ncols())
                .map(|col| format!("{:.17e}", self.matrix[(row, col)]))
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        Ok(std::fs::write(path, out)?)
    }
}

/// Two-weight operator norm `sup ||Tf||_{L^2(u)} / ||f||_{L^2(v)}` of the
/// perfect dyadic operator, via the weighted dense matrix. The one-weight
/// `L^2(w)` norm is the pair `(v^-1, u) = (w^-1, w)`.
pub fn weighted_norm(kernel: &KernelCoeffs, v_inv: &Weight, u: &Weight) -> Result<f64> {
    DenseOperator::materialize_kernel(kernel)?
        .weighted(v_inv, u)?
        .l2_norm()
}
