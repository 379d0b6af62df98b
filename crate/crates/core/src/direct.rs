//! Sparse direct solves used as reference answers.

use faer::prelude::*;
use faer::sparse::Triplet;
use faer::sparse::SparseColMat;
use faer::Mat;

use crate::error::SolverError;
use crate::sparse::CsrMatrix;

/// Solves `K x = b` by sparse LU. With a null vector `n`, the bordered system
/// `[K n; nᵀ 0]` is solved instead, which returns the solution orthogonal
/// to `n` when `b` is consistent.
pub fn solve_direct(k: &CsrMatrix, b: &[f64], null: Option<&[f64]>) -> Result<Vec<f64>, SolverError> {
    let n = k.nrows();
    let extra = usize::from(null.is_some());
    let mut t: Vec<Triplet<usize, usize, f64>> =
        k.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    if let Some(nv) = null {
        for (i, &v) in nv.iter().enumerate() {
            if v != 0.0 {
                t.push(Triplet::new(i, n, v));
                t.push(Triplet::new(n, i, v));
            }
        }
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n + extra, n + extra, &t)
        .map_err(|e| SolverError::Setup(format!("{e:?}")))?;
    let lu = m.sp_lu().map_err(|e| SolverError::Factorization {
        what: "bordered system".into(),
        msg: format!("{e:?}"),
    })?;
    let rhs = Mat::from_fn(n + extra, 1, |i, _| if i < n { b[i] } else { 0.0 });
    let x = lu.solve(rhs);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_laplacian_with_border() {
        // 1D Neumann Laplacian, null space = constants
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let k = CsrMatrix::from_triplets(n, n, &t);
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        let b = vec![1.0, 0.0, 0.0, 0.0, -1.0];
        let x = solve_direct(&k, &b, Some(&ones)).unwrap();
        let r = k.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
        assert!(x.iter().sum::<f64>().abs() < 1e-12);
    }
}
