//! Minimal CSR sparse matrix, just enough for the QP solver: matvec,
//! transposed matvec, and the Gram product `A' diag(w) A` into dense storage.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<_> = triplets.to_vec();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut row = 0usize;
        indptr.push(0);
        for &(r, c, v) in &sorted {
            debug_assert!(r < nrows && c < ncols);
            while row < r {
                indptr.push(indices.len());
                row += 1;
            }
            if indices.len() > indptr[row] && *indices.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
            }
        }
        while row < nrows {
            indptr.push(indices.len());
            row += 1;
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for (c, v) in self.row(i) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = A' x`
    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (c, v) in self.row(i) {
                y[c] += v * xi;
            }
        }
        y
    }

    /// Dense `A' diag(w) A`, exploiting row sparsity.
    pub fn gram_weighted(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ncols, self.ncols);
        for i in 0..self.nrows {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let lo = self.indptr[i];
            let hi = self.indptr[i + 1];
            for a in lo..hi {
                let (ca, va) = (self.indices[a], self.values[a]);
                let wva = wi * va;
                for b in lo..hi {
                    m[(ca, self.indices[b])] += wva * self.values[b];
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_triplets_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 1, 2.0), (1, 2, 3.0), (0, 1, 0.5)]);
        let x = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let y = a.mul_vec(&x);
        assert_eq!(y[0], 2.5);
        assert_eq!(y[1], 3.0);
    }

    #[test]
    fn matvec_and_transpose_agree_with_dense() {
        let trips = vec![
            (0, 0, 1.0),
            (0, 2, -2.0),
            (1, 1, 3.0),
            (2, 0, 4.0),
            (2, 2, 5.0),
        ];
        let a = CsrMatrix::from_triplets(3, 3, &trips);
        let mut dense = DMatrix::zeros(3, 3);
        for &(r, c, v) in &trips {
            dense[(r, c)] += v;
        }
        let x = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        assert_eq!(a.mul_vec(&x), &dense * &x);
        assert_eq!(a.tr_mul_vec(&x), dense.transpose() * &x);
        let w = DVector::from_vec(vec![2.0, 1.0, 0.5]);
        let gram = a.gram_weighted(&w);
        let expected = dense.transpose() * DMatrix::from_diagonal(&w) * &dense;
        assert!((gram - expected).amax() < 1e-12);
    }
}
