use super::{NumericsError, Scalar};

/// Dense row-major tensor.
///
/// Almost everything in this crate is a matrix, so most helpers assume rank 2
/// and treat a rank-1 tensor of length `n` as a `1 x n` row.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<S>) -> Result<Self, NumericsError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::DataLength {
                shape,
                len: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, S::zero())
    }

    pub fn full(rows: usize, cols: usize, value: S) -> Self {
        Self {
            shape: vec![rows, cols],
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: S) -> Self {
        Self {
            shape: vec![1, 1],
            data: vec![value],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = S::one();
        }
        t
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericsError::DataLength {
                    shape: vec![rows.len(), cols],
                    len: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(vec![rows.len(), cols], data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Single value of a `1 x 1` tensor.
    pub fn item(&self) -> S {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, NumericsError> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = Self::zeros(m, n);
        S::gemm(
            m,
            k,
            n,
            S::one(),
            &self.data,
            k as isize,
            1,
            &other.data,
            n as isize,
            1,
            S::zero(),
            &mut out.data,
            n as isize,
            1,
        );
        Ok(out)
    }

    /// `self^T * other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self, NumericsError> {
        let (k, m) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul_tn",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = Self::zeros(m, n);
        S::gemm(
            m,
            k,
            n,
            S::one(),
            &self.data,
            1,
            m as isize,
            &other.data,
            n as isize,
            1,
            S::zero(),
            &mut out.data,
            n as isize,
            1,
        );
        Ok(out)
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self, NumericsError> {
        let (m, k) = (self.rows(), self.cols());
        let (n, k2) = (other.rows(), other.cols());
        if k != k2 {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul_nt",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = Self::zeros(m, n);
        S::gemm(
            m,
            k,
            n,
            S::one(),
            &self.data,
            k as isize,
            1,
            &other.data,
            1,
            k as isize,
            S::zero(),
            &mut out.data,
            n as isize,
            1,
        );
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        Self::from_fn(c, r, |i, j| self.data[j * c + i])
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self, NumericsError> {
        if self.shape != other.shape {
            return Err(NumericsError::ShapeMismatch {
                op: "elementwise",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericsError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NumericsError> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|x| x * c)
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: S, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn sum_sq(&self) -> S {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(
            S::zero(),
            |acc, &x| if x.abs() > acc { x.abs() } else { acc },
        )
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Row-wise softmax, stabilized by max subtraction.
    pub fn softmax_rows(&self) -> Self {
        let c = self.cols();
        let mut out = self.clone();
        for row in out.data.chunks_mut(c.max(1)) {
            softmax_in_place(row);
        }
        out
    }

    /// Copies the given rows (with repetition) into a new matrix.
    pub fn gather_rows(&self, idx: &[usize]) -> Self {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            shape: vec![idx.len(), c],
            data,
        }
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(parts: &[&Self]) -> Result<Self, NumericsError> {
        let rows = parts.first().map_or(0, |p| p.rows());
        for p in parts {
            if p.rows() != rows {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_cols",
                    left: parts[0].shape.clone(),
                    right: p.shape.clone(),
                });
            }
        }
        let total: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(Self {
            shape: vec![rows, total],
            data,
        })
    }

    /// Max relative difference, with denominator `max(|a|, |b|, floor)`.
    pub fn max_rel_diff(&self, other: &Self, floor: S) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(S::zero(), |acc, x| acc.max(x))
    }
}

pub fn softmax_in_place<S: Scalar>(row: &mut [S]) {
    let max = row.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type T = Tensor<f64>;

    #[test]
    fn identity_times_b_is_b() {
        let b = T::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 3.5);
        assert_eq!(T::eye(3).matmul(&b).unwrap(), b);
    }

    #[test]
    fn hand_product() {
        let a = T::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = T::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn zeros_times_anything() {
        let b = T::from_fn(3, 4, |i, j| (i + j) as f64 + 0.25);
        let c = T::zeros(2, 3).matmul(&b).unwrap();
        assert_eq!(c, T::zeros(2, 4));
    }

    #[test]
    fn inner_dimension_mismatch() {
        let err = T::zeros(2, 3).matmul(&T::zeros(2, 3)).unwrap_err();
        assert!(matches!(
            err,
            NumericsError::ShapeMismatch { op: "matmul", .. }
        ));
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = T::from_fn(4, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let b = T::from_fn(4, 2, |i, j| ((i * 2 + j) % 3) as f64 + 0.5);
        assert_eq!(a.matmul_tn(&b).unwrap(), a.transpose().matmul(&b).unwrap());
        let c = T::from_fn(2, 3, |i, j| (i as f64) - (j as f64) * 0.5);
        assert_eq!(a.matmul_nt(&c).unwrap(), a.matmul(&c.transpose()).unwrap());
    }

    #[test]
    fn f32_matmul() {
        let a = Tensor::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = a.matmul(&Tensor::<f32>::eye(2)).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let t = T::from_rows(&[vec![1000.0, -1000.0, 3.0], vec![0.1, 0.2, 0.3]]).unwrap();
        let s = t.softmax_rows();
        for i in 0..2 {
            let total: f64 = s.row(i).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(s.all_finite());
    }

    #[test]
    fn data_length_checked() {
        assert!(T::from_vec(vec![2, 2], vec![1.0; 3]).is_err());
    }
}
