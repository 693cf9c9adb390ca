//! Row-major matrix products on slices, backed by the scalar's gemm kernel.

use crate::scalar::Scalar;

/// `c[m×n] = a[m×k] · b[k×n] + beta · c`
pub fn gemm_nn<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], b: &[S], beta: S, c: &mut [S]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        S::gemm_raw(
            m,
            k,
            n,
            S::one(),
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c[m×n] = a[m×k] · b[n×k]ᵀ + beta · c`
pub fn gemm_nt<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], b: &[S], beta: S, c: &mut [S]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    unsafe {
        S::gemm_raw(
            m,
            k,
            n,
            S::one(),
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c[m×n] = a[k×m]ᵀ · b[k×n] + beta · c`
pub fn gemm_tn<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], b: &[S], beta: S, c: &mut [S]) {
    assert!(a.len() >= k * m && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        S::gemm_raw(
            m,
            k,
            n,
            S::one(),
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
