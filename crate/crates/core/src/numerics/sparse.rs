use super::{Scalar, Tensor};

/// Compressed sparse row matrix used for neighborhood aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<S> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> SparseMatrix<S> {
    /// Builds from per-row `(column, value)` lists; column order within a row is kept.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, S)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for r in &rows {
            for &(c, v) in r {
                assert!(c < cols, "column index out of range");
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    /// `self * x` for a dense `cols x d` matrix.
    pub fn matmul_dense(&self, x: &Tensor<S>) -> Tensor<S> {
        assert_eq!(x.rows(), self.cols, "sparse matmul inner dimension");
        let d = x.cols();
        let mut out = Tensor::zeros(self.rows, d);
        for i in 0..self.rows {
            let dst = out.row_mut(i);
            for (j, w) in self.row(i) {
                for (o, &v) in dst.iter_mut().zip(x.row(j)) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// `self^T * g` for a dense `rows x d` matrix, accumulated in row order.
    pub fn matmul_dense_t(&self, g: &Tensor<S>) -> Tensor<S> {
        assert_eq!(g.rows(), self.rows, "sparse transpose matmul dimension");
        let d = g.cols();
        let mut out = Tensor::zeros(self.cols, d);
        for i in 0..self.rows {
            let src = g.row(i);
            for (j, w) in self.row(i) {
                for (o, &v) in out.row_mut(j).iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Tensor<S> {
        let mut t = Tensor::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, w) in self.row(i) {
                let cur = t.get(i, j);
                t.set(i, j, cur + w);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_sparse_products_agree() {
        let s = SparseMatrix::from_rows(
            3,
            vec![
                vec![(0, 0.5), (2, 0.5)],
                vec![(1, 1.0)],
                vec![(0, 0.25), (1, 0.25), (2, 0.5)],
            ],
        );
        let x = Tensor::<f64>::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 1.0);
        let dense = s.to_dense();
        assert_eq!(s.matmul_dense(&x), dense.matmul(&x).unwrap());
        assert_eq!(s.matmul_dense_t(&x), dense.transpose().matmul(&x).unwrap());
    }
}
