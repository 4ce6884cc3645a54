use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point element type usable by the engine.
///
/// Models run in `f32`; gradient checks rebuild the same graph in `f64`.
pub trait Real:
    Float + FromPrimitive + Sum + Default + Debug + Send + Sync + 'static
{
    /// Row-major `c = alpha * a * b + beta * c` with explicit strides.
    ///
    /// # Safety
    /// Strides and extents must describe in-bounds views of the slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Real for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// `out = a (m×k) · b (k×n)`, all row-major, optionally transposing either input.
pub(crate) fn matmul<T: Real>(
    a: &[T],
    a_rows: usize,
    a_cols: usize,
    trans_a: bool,
    b: &[T],
    b_rows: usize,
    b_cols: usize,
    trans_b: bool,
    out: &mut [T],
    accumulate: bool,
) {
    let (m, k, rsa, csa) = if trans_a {
        (a_cols, a_rows, 1, a_cols as isize)
    } else {
        (a_rows, a_cols, a_cols as isize, 1)
    };
    let (kb, n, rsb, csb) = if trans_b {
        (b_cols, b_rows, 1, b_cols as isize)
    } else {
        (b_rows, b_cols, b_cols as isize, 1)
    };
    assert_eq!(k, kb, "inner extents differ");
    assert!(a.len() >= a_rows * a_cols && b.len() >= b_rows * b_cols);
    assert!(out.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { T::one() } else { T::zero() };
    if k == 0 {
        if !accumulate {
            out[..m * n].iter_mut().for_each(|v| *v = T::zero());
        }
        return;
    }
    // SAFETY: extents checked above; strides describe dense row-major storage.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
