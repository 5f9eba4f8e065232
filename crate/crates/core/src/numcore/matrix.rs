use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Precondition(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Precondition(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Value of a 1x1 matrix.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.shape(), (1, 1));
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul", self.shape(), other.shape()));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        // Accumulation runs over the inner index in ascending order for every
        // entry, so A·Bᵀ and (B·Aᵀ)ᵀ agree bit for bit.
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Softmax applied independently to every row, with per-row max subtraction.
    pub fn row_softmax(&self) -> Matrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let row = &mut out.data[r * self.cols..(r + 1) * self.cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        out
    }

    /// `self · weight + bias`, with `bias` (1×h) added to every row.
    pub fn affine(&self, weight: &Matrix, bias: &Matrix) -> Result<Matrix> {
        let mut out = self.matmul(weight)?;
        out.add_row_in_place(bias)?;
        Ok(out)
    }

    pub(crate) fn add_row_in_place(&mut self, bias: &Matrix) -> Result<()> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::dim("row broadcast add", self.shape(), bias.shape()));
        }
        for r in 0..self.rows {
            for (v, b) in self.data[r * self.cols..(r + 1) * self.cols]
                .iter_mut()
                .zip(&bias.data)
            {
                *v += b;
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn tanh(&self) -> Matrix {
        self.map(f64::tanh)
    }

    pub fn sigmoid(&self) -> Matrix {
        self.map(sigmoid)
    }

    pub fn zip_with(
        &self,
        other: &Matrix,
        op: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim(op, self.shape(), other.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "elementwise product", |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|v| v * c)
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Juxtaposes the columns of `parts` in order.
    pub fn concat_cols(parts: &[&Matrix]) -> Result<Matrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Precondition("concat_cols of an empty list".into()))?;
        let rows = first.rows;
        for p in parts {
            if p.rows != rows {
                return Err(Error::dim("concat_cols", first.shape(), p.shape()));
            }
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(r));
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Column means as a 1×d row.
    pub fn mean_rows(&self) -> Result<Matrix> {
        if self.rows == 0 {
            return Err(Error::Precondition(
                "mean_rows of a matrix with no rows".into(),
            ));
        }
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, v) in out.data.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        let n = self.rows as f64;
        for o in out.data.iter_mut() {
            *o /= n;
        }
        Ok(out)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Index of the largest entry of row `r`; ties go to the lowest index.
    pub fn argmax_row(&self, r: usize) -> usize {
        let row = self.row(r);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        best
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    /// Three-loop scalar product, kept independent of `Matrix::matmul`.
    fn naive_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; b[0].len()]; a.len()];
        for i in 0..a.len() {
            for j in 0..b[0].len() {
                for p in 0..b.len() {
                    out[i][j] += a[i][p] * b[p][j];
                }
            }
        }
        out
    }

    #[test]
    fn matmul_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&Matrix::zeros(2, 2)).unwrap(), Matrix::zeros(2, 2));

        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        let oracle = naive_product(&a.to_rows(), &b.to_rows());
        assert_eq!(oracle, vec![vec![19.0, 22.0], vec![43.0, 50.0]]);
        assert_eq!(a.matmul(&b).unwrap().to_rows(), oracle);
    }

    #[test]
    fn matmul_shape_error_carries_both_shapes() {
        let err = Matrix::zeros(2, 3)
            .matmul(&Matrix::zeros(2, 3))
            .unwrap_err();
        match err {
            Error::Dimension { left, right, .. } => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (2, 3));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn softmax_examples() {
        let u = m(&[&[0.0, 0.0, 0.0]]).row_softmax();
        for &v in u.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let a = m(&[&[1.0, 2.0, 3.0]]).row_softmax();
        let b = m(&[&[101.0, 102.0, 103.0]]).row_softmax();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-15);
        }

        // scalar oracle: exp(i) / Σ exp(j)
        let denom: f64 = (1..=3).map(|i| (i as f64).exp()).sum();
        let expected: Vec<f64> = (1..=3).map(|i| (i as f64).exp() / denom).collect();
        for ((x, e), frozen) in a
            .data()
            .iter()
            .zip(&expected)
            .zip([0.09003057, 0.24472847, 0.66524096])
        {
            assert!((x - e).abs() < 1e-15);
            assert!((x - frozen).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_never_overflows() {
        let s = m(&[&[1e300, -1e300, 0.0], &[700.0, 710.0, 720.0]]).row_softmax();
        assert!(s.is_finite());
        assert_eq!(s.get(0, 0), 1.0);
    }

    #[test]
    fn affine_examples() {
        let out = m(&[&[1.0, 0.0]])
            .affine(&Matrix::identity(2), &Matrix::zeros(1, 2))
            .unwrap();
        assert_eq!(out, m(&[&[1.0, 0.0]]));

        let w = m(&[&[0.3, -2.0], &[5.0, 1.0]]);
        let out = m(&[&[0.0, 0.0]]).affine(&w, &m(&[&[3.0, 4.0]])).unwrap();
        assert_eq!(out, m(&[&[3.0, 4.0]]));

        let w = m(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let out = m(&[&[1.0, 2.0]]).affine(&w, &m(&[&[0.5, 0.5]])).unwrap();
        // 1·1 + 2·1 + 0.5, 1·1 + 2·(−1) + 0.5
        assert_eq!(out, m(&[&[3.5, -0.5]]));

        assert!(m(&[&[1.0, 2.0]]).affine(&w, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn tanh_examples() {
        assert_eq!(m(&[&[0.0]]).tanh(), m(&[&[0.0]]));
        assert_eq!(m(&[&[-0.7]]).tanh().item(), -m(&[&[0.7]]).tanh().item());
        assert!((m(&[&[1.0]]).tanh().item() - 0.76159416).abs() < 1e-8);
    }

    #[test]
    fn concat_examples() {
        let a = m(&[&[1.0]]);
        let b = m(&[&[2.0]]);
        assert_eq!(Matrix::concat_cols(&[&a, &b]).unwrap(), m(&[&[1.0, 2.0]]));
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(Matrix::concat_cols(&[&x]).unwrap(), x);

        let parts = [m(&[&[1.0, 2.0]]), m(&[&[3.0]]), m(&[&[4.0, 5.0]])];
        let refs: Vec<&Matrix> = parts.iter().collect();
        let out = Matrix::concat_cols(&refs).unwrap();
        // index-mapping oracle: output column j comes from the part covering j
        let mut expected = Vec::new();
        for p in &parts {
            for c in 0..p.cols() {
                expected.push(p.get(0, c));
            }
        }
        assert_eq!(out.data(), expected.as_slice());
        assert_eq!(out, m(&[&[1.0, 2.0, 3.0, 4.0, 5.0]]));

        assert!(Matrix::concat_cols(&[&a, &x]).is_err());
        assert!(Matrix::concat_cols(&[]).is_err());
    }

    #[test]
    fn mean_rows_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(x.mean_rows().unwrap(), m(&[&[2.0, 3.0]]));
        let single = m(&[&[7.5, -1.0]]);
        assert_eq!(single.mean_rows().unwrap(), single);

        let data: Vec<f64> = (0..100).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let col = Matrix::from_vec(100, 1, data.clone()).unwrap();
        let mut naive = 0.0;
        for v in &data {
            naive += v;
        }
        naive /= 100.0;
        assert!((col.mean_rows().unwrap().item() - naive).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_go_low() {
        let x = m(&[&[1.0, 3.0, 3.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(x.argmax_row(0), 1);
        assert_eq!(x.argmax_row(1), 0);
    }

    fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-50.0f64..50.0, rows * cols)
            .prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn softmax_rows_are_distributions(
            x in (1usize..6, 1usize..8).prop_flat_map(|(r, c)| matrix_strategy(r, c))
        ) {
            let s = x.row_softmax();
            for r in 0..s.rows() {
                let sum: f64 = s.row(r).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(s.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            a in matrix_strategy(5, 5),
            b in matrix_strategy(5, 5),
            c in matrix_strategy(5, 5),
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.data().iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn transposed_products_agree_bitwise(
            a in matrix_strategy(3, 4),
            b in matrix_strategy(5, 4),
        ) {
            let ab = a.matmul(&b.transpose()).unwrap();
            let ba = b.matmul(&a.transpose()).unwrap();
            prop_assert_eq!(ab.transpose(), ba);
        }
    }
}
