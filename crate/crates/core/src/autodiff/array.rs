//! Dense row-major arrays of reals.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense n-dimensional array, row-major. Vectors have shape `[n]`,
/// matrices `[rows, cols]`, scalars `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Array<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Array<F> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<F>) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(len, data.len(), "shape {:?} incompatible with data length {}", shape, data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![F::zero(); len] }
    }

    pub fn full(shape: Vec<usize>, v: F) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![v; len] }
    }

    /// A scalar wrapped as a `[1]` array.
    pub fn scalar(v: F) -> Self {
        Self { shape: vec![1], data: vec![v] }
    }

    pub fn vector(data: Vec<F>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<F>) -> Self {
        Self::from_vec(vec![rows, cols], data)
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

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// The single element of a `[1]`-shaped array.
    pub fn item(&self) -> F {
        assert_eq!(self.data.len(), 1, "item() on non-scalar array {:?}", self.shape);
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, i: usize, j: usize) -> F {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j] = v;
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(F, F) -> F) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { shape: self.shape.clone(), data }
    }

    /// `self += other * scale`, shapes must already match.
    pub fn add_scaled(&mut self, other: &Self, scale: F) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * scale;
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, F> {
        self.data.iter()
    }

    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|v| !v.is_finite())
    }

    /// One row of a matrix as a plain slice.
    pub fn row(&self, i: usize) -> &[F] {
        debug_assert_eq!(self.shape.len(), 2);
        let c = self.shape[1];
        &self.data[i * c..(i + 1) * c]
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch { op, lhs: a.to_vec(), rhs: b.to_vec() }
}

/// Matrix/vector product supporting the four shape combinations the model
/// needs: 2D×2D, 2D×1D, 1D×2D and the 1D·1D dot product (result `[1]`).
pub fn matmul<F: Scalar>(a: &Array<F>, b: &Array<F>) -> Result<Array<F>> {
    match (a.shape.len(), b.shape.len()) {
        (2, 2) => {
            let (m, k) = (a.shape[0], a.shape[1]);
            let (k2, n) = (b.shape[0], b.shape[1]);
            if k != k2 {
                return Err(mismatch("matmul", &a.shape, &b.shape));
            }
            let mut out = vec![F::zero(); m * n];
            for i in 0..m {
                for p in 0..k {
                    let av = a.data[i * k + p];
                    if av == F::zero() {
                        continue;
                    }
                    let brow = &b.data[p * n..(p + 1) * n];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
            Ok(Array::from_vec(vec![m, n], out))
        }
        (2, 1) => {
            let (m, k) = (a.shape[0], a.shape[1]);
            if k != b.shape[0] {
                return Err(mismatch("matmul", &a.shape, &b.shape));
            }
            let mut out = vec![F::zero(); m];
            for i in 0..m {
                let mut acc = F::zero();
                for p in 0..k {
                    acc += a.data[i * k + p] * b.data[p];
                }
                out[i] = acc;
            }
            Ok(Array::vector(out))
        }
        (1, 2) => {
            let m = a.shape[0];
            let (k, n) = (b.shape[0], b.shape[1]);
            if m != k {
                return Err(mismatch("matmul", &a.shape, &b.shape));
            }
            let mut out = vec![F::zero(); n];
            for p in 0..k {
                let av = a.data[p];
                if av == F::zero() {
                    continue;
                }
                for j in 0..n {
                    out[j] += av * b.data[p * n + j];
                }
            }
            Ok(Array::vector(out))
        }
        (1, 1) => {
            if a.shape[0] != b.shape[0] {
                return Err(mismatch("matmul", &a.shape, &b.shape));
            }
            let mut acc = F::zero();
            for (&x, &y) in a.data.iter().zip(&b.data) {
                acc += x * y;
            }
            Ok(Array::scalar(acc))
        }
        _ => Err(mismatch("matmul", &a.shape, &b.shape)),
    }
}
