//! Scalar abstraction shared by the network, losses and diagnostics.
//!
//! Everything numeric in the crate is generic over [`Real`]. `f64` is the
//! working precision; `f32` is supported for the network and losses.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type usable by the crate, with an optional fast matrix
/// product.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// `c = alpha * a * b + beta * c`.
    ///
    /// The default is a straightforward triple loop; `f32` and `f64`
    /// dispatch to a blocked kernel.
    fn gemm(alpha: Self, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: &mut Matrix<Self>) {
        naive_gemm(alpha, a, b, beta, c);
    }

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

macro_rules! impl_real_blas {
    ($t:ty, $kernel:path) => {
        impl Real for $t {
            fn gemm(alpha: Self, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: &mut Matrix<Self>) {
                check_gemm_shapes(&a, &b, c);
                if a.rows == 0 || b.cols == 0 {
                    return;
                }
                let (m, k, n) = (a.rows, a.cols, b.cols);
                // SAFETY: check_gemm_shapes verified that every index reached
                // through the given strides lies inside the three buffers.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.data.as_ptr(),
                        a.row_stride,
                        a.col_stride,
                        b.data.as_ptr(),
                        b.row_stride,
                        b.col_stride,
                        beta,
                        c.data.as_mut_ptr(),
                        c.cols as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_real_blas!(f64, matrixmultiply::dgemm);
impl_real_blas!(f32, matrixmultiply::sgemm);

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix buffer has wrong length");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn view(&self) -> MatRef<'_, T> {
        MatRef {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            row_stride: self.cols as isize,
            col_stride: 1,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `Some(v)` when the matrix is 1x1.
    pub fn as_scalar(&self) -> Option<T> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }
}

/// Borrowed strided matrix view. Strides are in elements and non-negative.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: isize,
    pub col_stride: isize,
}

impl<'a, T: Copy> MatRef<'a, T> {
    /// View of a row-major `rows x cols` buffer.
    pub fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, row_stride: cols as isize, col_stride: 1 }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.row_stride as usize + c * self.col_stride as usize]
    }

    fn max_offset(&self) -> Option<usize> {
        if self.rows == 0 || self.cols == 0 {
            return None;
        }
        Some((self.rows - 1) * self.row_stride as usize + (self.cols - 1) * self.col_stride as usize)
    }
}

fn check_gemm_shapes<T: Copy>(a: &MatRef<'_, T>, b: &MatRef<'_, T>, c: &Matrix<T>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimensions differ");
    assert_eq!((a.rows, b.cols), (c.rows, c.cols), "gemm output shape mismatch");
    assert_eq!(c.data.len(), c.rows * c.cols);
    for v in [a, b] {
        assert!(v.row_stride >= 0 && v.col_stride >= 0, "negative strides unsupported");
        if let Some(off) = v.max_offset() {
            assert!(off < v.data.len(), "strided view exceeds its buffer");
        }
    }
}

/// Reference kernel, also used to cross-check the blocked path.
pub fn naive_gemm<T: Real>(alpha: T, a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, c: &mut Matrix<T>) {
    check_gemm_shapes(&a, &b, c);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = T::zero();
            for p in 0..a.cols {
                acc = acc + a.at(i, p) * b.at(p, j);
            }
            let slot = &mut c.data[i * c.cols + j];
            *slot = if beta == T::zero() { alpha * acc } else { alpha * acc + beta * *slot };
        }
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(sigmoid(z)) = -softplus(-z)`.
#[inline]
pub fn log_sigmoid<T: Real>(z: T) -> T {
    -softplus(-z)
}
