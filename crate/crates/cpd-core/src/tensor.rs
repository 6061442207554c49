//! Dense tensors, matricization, and multilinear contractions.
//!
//! Conventions used throughout the crate:
//!
//! * Linearization is first-index-fastest (column-major): entry
//!   (i₁, ..., i_N) of a d₁ × ... × d_N tensor sits at flat position
//!   i₁ + d₁ i₂ + d₁d₂ i₃ + ... (0-based indices).
//! * [`DenseTensor::unfold`] is the forward-cyclic mode-k matricization:
//!   rows run over mode k, columns over modes (k+1, ..., N, 1, ..., k−1)
//!   with the first of those fastest.
//! * [`DenseTensor::unfold_group`] matricizes a mode subset S: rows run over
//!   the modes of S in increasing order (lowest fastest), columns over the
//!   complement likewise, so the rows of a rank-1 tensor linearize as the
//!   vectorized outer product of its S-mode vectors.
//!
//! Mode arguments in the public API are 1-based to match the multilinear
//! algebra; entry indices in `get`/`set` are 0-based like everything else in
//! Rust.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Mirror used to re-check the size invariant when deserializing.
#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix {rows}x{cols} expects {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_cols(rows: usize, cols: &[&[f64]]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols.len());
        for c in cols {
            if c.len() != rows {
                return Err(Error::ShapeMismatch(format!(
                    "column length {} does not match {rows} rows",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Matrix::new(rows, cols.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        self.col_mut(j).copy_from_slice(v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[i * self.cols + j] = self.data[j * self.rows + i];
            }
        }
        t
    }

    /// self · other
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.data[j * other.rows + k];
                if b == 0.0 {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for i in 0..self.rows {
                    oc[i] += b * ac[i];
                }
            }
        }
        Ok(out)
    }

    /// selfᵀ · other
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "t_matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            for i in 0..self.cols {
                let mut s = 0.0;
                let a = self.col(i);
                let b = other.col(j);
                for t in 0..self.rows {
                    s += a[t] * b[t];
                }
                out.data[j * self.cols + i] = s;
            }
        }
        Ok(out)
    }

    /// Gram matrix selfᵀ·self.
    pub fn gram(&self) -> Matrix {
        self.t_matmul(self).expect("gram dimensions always agree")
    }

    /// self · v for a vector v.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "matvec {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let c = self.col(j);
            for i in 0..self.rows {
                out[i] += x * c[i];
            }
        }
        Ok(out)
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        for x in m.data.iter_mut() {
            *x *= s;
        }
        m
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch("matrix subtraction".into()));
        }
        let mut m = self.clone();
        for (x, y) in m.data.iter_mut().zip(other.data.iter()) {
            *x -= y;
        }
        Ok(m)
    }
}

/// Dense tensor of arbitrary order; an empty shape is an order-0 scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn shape_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("zero-size mode".into()));
        }
        if data.len() != shape_len(&shape) {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} expects {} entries, got {}",
                shape,
                shape_len(&shape),
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {x}")));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape_len(&shape);
        DenseTensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(x: f64) -> Self {
        DenseTensor {
            shape: vec![],
            data: vec![x],
        }
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat data in linearization order; `vec(T)` is exactly this slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Extract the order-0 value.
    pub fn scalar_value(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::ShapeMismatch("tensor is not a scalar".into()))
        }
    }

    /// Entry at a 0-based multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let p = self.flat_index(idx);
        self.data[p] = v;
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut p = 0;
        let mut stride = 1;
        for (l, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[l]);
            p += i * stride;
            stride *= self.shape[l];
        }
        p
    }

    fn check_mode(&self, mode: usize) -> Result<usize> {
        if mode == 0 || mode > self.order() {
            Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(mode - 1)
        }
    }

    /// ⟨vec(self), vec(self)⟩^(1/2): the Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Forward-cyclic mode-k matricization (1-based `mode`).
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        let k = self.check_mode(mode)?;
        let n = self.order();
        let col_modes: Vec<usize> = (1..n).map(|s| (k + s) % n).collect();
        self.gather(&[k], &col_modes)
    }

    /// Subset matricization with S and its complement in increasing order.
    /// `subset` holds distinct 1-based modes; it must be nonempty and proper.
    pub fn unfold_group(&self, subset: &[usize]) -> Result<Matrix> {
        let row_modes = self.normalize_subset(subset)?;
        let col_modes: Vec<usize> = (0..self.order())
            .filter(|m| !row_modes.contains(m))
            .collect();
        self.gather(&row_modes, &col_modes)
    }

    fn normalize_subset(&self, subset: &[usize]) -> Result<Vec<usize>> {
        if subset.is_empty() || subset.len() >= self.order() {
            return Err(Error::InvalidArgument(format!(
                "mode subset {:?} must be nonempty and proper for order {}",
                subset,
                self.order()
            )));
        }
        let mut modes = Vec::with_capacity(subset.len());
        for &m in subset {
            modes.push(self.check_mode(m)?);
        }
        modes.sort_unstable();
        if modes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "mode subset {subset:?} has duplicates"
            )));
        }
        Ok(modes)
    }

    /// Undo `unfold`: rebuild a tensor of `shape` from its mode-k unfolding.
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(shape.to_vec());
        let k = t.check_mode(mode)?;
        let n = t.order();
        if m.rows() != shape[k] || m.cols() != t.len() / shape[k] {
            return Err(Error::ShapeMismatch(format!(
                "fold: matrix {}x{} does not match mode {mode} of shape {shape:?}",
                m.rows(),
                m.cols()
            )));
        }
        let col_modes: Vec<usize> = (1..n).map(|s| (k + s) % n).collect();
        let (rs, cs) = t.stride_maps(&[k], &col_modes);
        t.scatter_from(m, &rs, &cs);
        Ok(t)
    }

    /// Reinterpret a flat vector as a tensor (inverse of `data().to_vec()`).
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<DenseTensor> {
        DenseTensor::new(shape, data)
    }

    /// Mode-k product with `u`: contracts mode k of self (length d_k = u.rows)
    /// and replaces it by a mode of length u.cols.
    pub fn mode_product(&self, mode: usize, u: &Matrix) -> Result<DenseTensor> {
        let k = self.check_mode(mode)?;
        if u.rows() != self.shape[k] {
            return Err(Error::ShapeMismatch(format!(
                "mode_product: mode {mode} has size {}, matrix has {} rows",
                self.shape[k],
                u.rows()
            )));
        }
        let inner: usize = self.shape[..k].iter().product();
        let dk = self.shape[k];
        let outer: usize = self.shape[k + 1..].iter().product();
        let mut shape = self.shape.clone();
        shape[k] = u.cols();
        let mut out = DenseTensor::zeros(shape);
        let ob = inner * u.cols();
        let ib = inner * dk;
        for o in 0..outer {
            let src = &self.data[o * ib..(o + 1) * ib];
            let dst = &mut out.data[o * ob..(o + 1) * ob];
            for j in 0..u.cols() {
                let dj = &mut dst[j * inner..(j + 1) * inner];
                for i in 0..dk {
                    let w = u.get(i, j);
                    if w == 0.0 {
                        continue;
                    }
                    let si = &src[i * inner..(i + 1) * inner];
                    for q in 0..inner {
                        dj[q] += w * si[q];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Simultaneous contraction of the listed modes with vectors; the result
    /// drops those modes (an order-0 result is a scalar tensor). Contraction
    /// order does not affect the result beyond float roundoff.
    pub fn contract_modes(&self, assignments: &[(usize, &[f64])]) -> Result<DenseTensor> {
        let mut pairs: Vec<(usize, &[f64])> = Vec::with_capacity(assignments.len());
        for &(mode, v) in assignments {
            let k = self.check_mode(mode)?;
            if v.len() != self.shape[k] {
                return Err(Error::ShapeMismatch(format!(
                    "contract_modes: mode {mode} has size {}, vector length {}",
                    self.shape[k],
                    v.len()
                )));
            }
            pairs.push((k, v));
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(
                "contract_modes: duplicate mode".into(),
            ));
        }
        let mut cur = self.clone();
        for (k, v) in pairs {
            cur = cur.contract_one(k, v);
        }
        Ok(cur)
    }

    /// Contract 0-based mode `k` (higher modes must still be intact).
    fn contract_one(&self, k: usize, v: &[f64]) -> DenseTensor {
        let inner: usize = self.shape[..k].iter().product();
        let dk = self.shape[k];
        let outer: usize = self.shape[k + 1..].iter().product();
        let mut shape = self.shape.clone();
        shape.remove(k);
        let mut out = DenseTensor::zeros(shape);
        let ib = inner * dk;
        for o in 0..outer {
            let src = &self.data[o * ib..(o + 1) * ib];
            let dst = &mut out.data[o * inner..(o + 1) * inner];
            for (i, &w) in v.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let si = &src[i * inner..(i + 1) * inner];
                for q in 0..inner {
                    dst[q] += w * si[q];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("tensor addition".into()));
        }
        let mut t = self.clone();
        for (x, y) in t.data.iter_mut().zip(other.data.iter()) {
            *x += y;
        }
        Ok(t)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("tensor subtraction".into()));
        }
        let mut t = self.clone();
        for (x, y) in t.data.iter_mut().zip(other.data.iter()) {
            *x -= y;
        }
        Ok(t)
    }

    pub fn scaled(&self, s: f64) -> DenseTensor {
        let mut t = self.clone();
        for x in t.data.iter_mut() {
            *x *= s;
        }
        t
    }

    pub fn axpy(&mut self, a: f64, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("tensor axpy".into()));
        }
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * y;
        }
        Ok(())
    }

    /// Row/column strides per 0-based mode for a matricization where
    /// `row_modes` (in the given order, first fastest) index rows and
    /// `col_modes` index columns.
    fn stride_maps(&self, row_modes: &[usize], col_modes: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let n = self.order();
        let mut rs = vec![0usize; n];
        let mut cs = vec![0usize; n];
        let mut stride = 1;
        for &m in row_modes {
            rs[m] = stride;
            stride *= self.shape[m];
        }
        stride = 1;
        for &m in col_modes {
            cs[m] = stride;
            stride *= self.shape[m];
        }
        (rs, cs)
    }

    fn gather(&self, row_modes: &[usize], col_modes: &[usize]) -> Result<Matrix> {
        let rows: usize = row_modes.iter().map(|&m| self.shape[m]).product();
        let cols = self.len() / rows;
        let (rs, cs) = self.stride_maps(row_modes, col_modes);
        let mut out = Matrix::zeros(rows, cols);
        let n = self.order();
        let mut idx = vec![0usize; n];
        let mut row = 0usize;
        let mut col = 0usize;
        for p in 0..self.len() {
            out.data[col * rows + row] = self.data[p];
            // odometer increment
            for l in 0..n {
                idx[l] += 1;
                row += rs[l];
                col += cs[l];
                if idx[l] < self.shape[l] {
                    break;
                }
                row -= rs[l] * self.shape[l];
                col -= cs[l] * self.shape[l];
                idx[l] = 0;
            }
        }
        Ok(out)
    }

    fn scatter_from(&mut self, m: &Matrix, rs: &[usize], cs: &[usize]) {
        let rows = m.rows();
        let n = self.order();
        let mut idx = vec![0usize; n];
        let mut row = 0usize;
        let mut col = 0usize;
        for p in 0..self.len() {
            self.data[p] = m.data[col * rows + row];
            for l in 0..n {
                idx[l] += 1;
                row += rs[l];
                col += cs[l];
                if idx[l] < self.shape[l] {
                    break;
                }
                row -= rs[l] * self.shape[l];
                col -= cs[l] * self.shape[l];
                idx[l] = 0;
            }
        }
    }
}

/// Outer product ⊗ₖ vₖ of the given vectors, order = vectors.len().
pub fn outer(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("outer of no vectors".into()));
    }
    let mut data = vec![1.0];
    let mut shape = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.is_empty() {
            return Err(Error::InvalidArgument("outer with empty vector".into()));
        }
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &x in v.iter() {
            next.extend(data.iter().map(|&p| p * x));
        }
        data = next;
        shape.push(v.len());
    }
    DenseTensor::new(shape, data)
}

/// Euclidean inner product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
