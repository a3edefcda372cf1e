//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative singular-value cutoff for numerical rank decisions.
pub const NULLSPACE_RTOL: f64 = 1e-10;

/// Orthonormal basis (as columns) of the right nullspace of `a`.
///
/// Singular values below `NULLSPACE_RTOL` times the largest one count as zero.
pub fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cut = NULLSPACE_RTOL * smax;
    let null_rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= cut)
        .collect();
    let mut out = DMatrix::zeros(cols, null_rows.len());
    for (c, &r) in null_rows.iter().enumerate() {
        out.set_column(c, &v_t.row(r).transpose());
    }
    out
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
pub fn sym_eigen_sorted(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Incrementally built orthonormal basis used to measure the span of a vector family.
#[derive(Clone, Debug)]
pub struct SpanBuilder {
    dim: usize,
    tol: f64,
    basis: Vec<DVector<f64>>,
}

impl SpanBuilder {
    pub fn new(dim: usize, tol: f64) -> Self {
        Self {
            dim,
            tol,
            basis: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() >= self.dim
    }

    /// Adds `v` if it is linearly independent of the current span; returns whether it was.
    pub fn add(&mut self, v: &DVector<f64>) -> bool {
        let norm = v.norm();
        if norm == 0.0 || self.is_full() {
            return false;
        }
        let mut r = v / norm;
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.dot(&r);
                r.axpy(-c, b, 1.0);
            }
        }
        let rn = r.norm();
        if rn > self.tol {
            self.basis.push(r / rn);
            true
        } else {
            false
        }
    }
}
