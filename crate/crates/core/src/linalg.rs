//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use matrixmultiply::CGemmOption;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `a · b` through a blocked complex GEMM.
///
/// nalgebra multiplies complex matrices with scalar loops, which dominates
/// every check at grid sizes above a few dozen.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = CMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex64 is repr(C) with layout [re, im], nalgebra storage is
    // contiguous column-major, and the strides below describe exactly that.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `a* · b` without materializing a copy beyond the adjoint.
pub fn matmul_adj(a: &CMatrix, b: &CMatrix) -> CMatrix {
    matmul(&a.adjoint(), b)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Operator 2-norm, the largest singular value.
///
/// The matrix is rescaled to unit max-entry first; the SVD runs with a
/// bounded iteration count and falls back to the spectrum of `m* m`.
pub fn op_norm(m: &CMatrix) -> f64 {
    let scale = max_abs(m);
    if m.is_empty() || scale == 0.0 {
        return 0.0;
    }
    let unit = m.map(|z| z / scale);
    let largest = match unit.clone().try_svd(false, false, 1e-15, 10_000) {
        Some(svd) => svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s)),
        None => {
            let gram = matmul_adj(&unit, &unit);
            let herm = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
            herm.symmetric_eigenvalues().iter().fold(0.0_f64, |acc, &l| acc.max(l)).max(0.0).sqrt()
        }
    };
    largest * scale
}

/// `max(‖p² − p‖_max, ‖p − p*‖_max)`.
pub fn projection_defect(p: &CMatrix) -> f64 {
    let sq = matmul(p, p);
    max_abs(&(&sq - p)).max(max_abs(&(p - p.adjoint())))
}

/// `‖v* v − I‖_max`.
pub fn isometry_defect(v: &CMatrix) -> f64 {
    let g = matmul_adj(v, v);
    max_abs(&(g - identity(v.ncols())))
}

/// Worst of `‖u* u − I‖_max` and `‖u u* − I‖_max`.
pub fn unitary_defect(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let left = matmul_adj(u, u);
    let right = matmul(u, &u.adjoint());
    let id = identity(u.nrows());
    max_abs(&(left - &id)).max(max_abs(&(right - id)))
}

/// Size of the difference between two operators, in both norms the checks report.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Deviation {
    pub max_entry: f64,
    pub op_norm: f64,
}

impl Deviation {
    pub fn between(a: &CMatrix, b: &CMatrix) -> Self {
        let diff = a - b;
        Self {
            max_entry: max_abs(&diff),
            op_norm: op_norm(&diff),
        }
    }

    /// A scalar defect that has no natural operator-norm counterpart.
    pub fn scalar(value: f64) -> Self {
        Self {
            max_entry: value,
            op_norm: value,
        }
    }

    pub fn max(self, other: Self) -> Self {
        Self {
            max_entry: self.max_entry.max(other.max_entry),
            op_norm: self.op_norm.max(other.op_norm),
        }
    }

    pub fn worst(&self) -> f64 {
        self.max_entry.max(self.op_norm)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_entry <= tol && self.op_norm <= tol
    }
}

impl std::iter::FromIterator<Deviation> for Deviation {
    fn from_iter<I: IntoIterator<Item = Deviation>>(iter: I) -> Self {
        iter.into_iter().fold(Deviation::default(), Deviation::max)
    }
}

/// Orthonormal basis (as columns) of the eigenspace of a Hermitian matrix
/// with eigenvalues above `threshold`.
pub fn eigenspace_above(h: &CMatrix, threshold: f64) -> CMatrix {
    let n = h.nrows();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    // symmetrize so rounding noise cannot break the Hermitian solver
    let herm = (h + h.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > threshold).collect();
    // deterministic column order: by eigenvalue position
    keep.sort_unstable();
    let mut basis = CMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        basis.set_column(col, &eig.eigenvectors.column(i));
    }
    basis
}

/// Number of eigenvalues of a Hermitian matrix above `threshold`.
pub fn rank_above(h: &CMatrix, threshold: f64) -> usize {
    if h.nrows() == 0 {
        return 0;
    }
    let herm = (h + h.adjoint()).scale(0.5);
    herm.symmetric_eigenvalues()
        .iter()
        .filter(|&&l| l > threshold)
        .count()
}

/// Row-major `[re, im]` pairs, the on-disk matrix layout.
pub fn to_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Option<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(CMatrix::from_fn(nrows, ncols, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}
