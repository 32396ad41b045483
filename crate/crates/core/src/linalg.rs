//! Dense eigendecompositions and matrix products over the system LAPACK.
//!
//! The divide-and-conquer drivers `dsyevd`/`zheevd` carry every spectral
//! computation in the lattice laboratory, so they are bound directly against
//! the system OpenBLAS rather than through a source-build wrapper crate.
//! Buffers are staged in column-major order at the call boundary; the
//! wrappers below speak row-major `ndarray` throughout.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigensolver failed to converge (LAPACK info = {0})")]
    NoConvergence(i32),
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
}

#[link(name = "openblas")]
extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const f64,
        a: *const f64,
        lda: *const i32,
        b: *const f64,
        ldb: *const i32,
        beta: *const f64,
        c: *mut f64,
        ldc: *const i32,
    );
    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

/// Eigendecomposition of a real symmetric matrix.
///
/// `vectors` holds eigenvectors as rows: `vectors[[k, i]]` is component `i`
/// of the eigenvector for `values[k]`, and values are ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Eigendecomposition of a complex Hermitian matrix, eigenvectors as rows.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<Complex64>,
}

/// Full eigendecomposition of a real symmetric matrix (`dsyevd`).
///
/// Only the lower triangle of `a` is referenced.
pub fn eigh_real(a: &Array2<f64>) -> Result<SymEigen, LinalgError> {
    let n = square_dim(a.nrows(), a.ncols())?;
    if n == 0 {
        return Ok(SymEigen { values: Vec::new(), vectors: Array2::zeros((0, 0)) });
    }
    // Row-major buffer of a symmetric matrix doubles as its own column-major
    // staging, so the data is handed to LAPACK in place of a transpose copy.
    let mut buf: Vec<f64> = a.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let nn = n as i32;
    let (jobz, uplo) = (b'V', b'L');
    let mut info: i32 = 0;

    let mut work_query = [0.0f64; 1];
    let mut iwork_query = [0i32; 1];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work_query.as_mut_ptr(), &-1, iwork_query.as_mut_ptr(), &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::NoConvergence(info));
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::NoConvergence(info));
    }
    // Column-major eigenvector columns read back row-major become rows.
    let vectors = Array2::from_shape_vec((n, n), buf).expect("shape checked above");
    Ok(SymEigen { values: w, vectors })
}

/// Full eigendecomposition of a complex Hermitian matrix (`zheevd`).
///
/// Only the lower triangle of `a` is referenced.
pub fn eigh_hermitian(a: &Array2<Complex64>) -> Result<HermEigen, LinalgError> {
    let n = square_dim(a.nrows(), a.ncols())?;
    if n == 0 {
        return Ok(HermEigen { values: Vec::new(), vectors: Array2::zeros((0, 0)) });
    }
    // The row-major buffer is the column-major staging of conj(A); zheevd then
    // diagonalizes conj(A), whose eigenvectors are conjugates of those of A,
    // so the output rows are conjugated once more below.
    let mut buf: Vec<Complex64> = a.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let nn = n as i32;
    let (jobz, uplo) = (b'V', b'L');
    let mut info: i32 = 0;

    let mut work_query = [Complex64::new(0.0, 0.0); 1];
    let mut rwork_query = [0.0f64; 1];
    let mut iwork_query = [0i32; 1];
    unsafe {
        zheevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work_query.as_mut_ptr(), &-1, rwork_query.as_mut_ptr(), &-1,
            iwork_query.as_mut_ptr(), &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::NoConvergence(info));
    }
    let lwork = work_query[0].re as i32;
    let lrwork = rwork_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        zheevd_(
            &jobz, &uplo, &nn, buf.as_mut_ptr(), &nn, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &lrwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::NoConvergence(info));
    }
    for z in buf.iter_mut() {
        *z = z.conj();
    }
    let vectors = Array2::from_shape_vec((n, n), buf).expect("shape checked above");
    Ok(HermEigen { values: w, vectors })
}

/// Row-major matrix product via `dgemm`.
pub fn matmul_real(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions must agree");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m == 0 || k == 0 || n == 0 {
        return Array2::zeros((m, n));
    }
    let a_buf: Vec<f64> = a.iter().copied().collect();
    let b_buf: Vec<f64> = b.iter().copied().collect();
    let mut c_buf = vec![0.0f64; m * n];
    // Row-major C = A B is column-major C^T = B^T A^T, and the row-major
    // buffers already are the column-major stagings of those transposes.
    let (mm, nn, kk) = (n as i32, m as i32, k as i32);
    let (alpha, beta) = (1.0f64, 0.0f64);
    unsafe {
        dgemm_(
            &b'N', &b'N', &mm, &nn, &kk, &alpha,
            b_buf.as_ptr(), &mm, a_buf.as_ptr(), &kk, &beta,
            c_buf.as_mut_ptr(), &mm,
        );
    }
    Array2::from_shape_vec((m, n), c_buf).expect("dimensions fixed above")
}

/// Row-major matrix product via `zgemm`.
pub fn matmul_complex(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions must agree");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m == 0 || k == 0 || n == 0 {
        return Array2::zeros((m, n));
    }
    let a_buf: Vec<Complex64> = a.iter().copied().collect();
    let b_buf: Vec<Complex64> = b.iter().copied().collect();
    let mut c_buf = vec![Complex64::new(0.0, 0.0); m * n];
    let (mm, nn, kk) = (n as i32, m as i32, k as i32);
    let alpha = Complex64::new(1.0, 0.0);
    let beta = Complex64::new(0.0, 0.0);
    unsafe {
        zgemm_(
            &b'N', &b'N', &mm, &nn, &kk, &alpha,
            b_buf.as_ptr(), &mm, a_buf.as_ptr(), &kk, &beta,
            c_buf.as_mut_ptr(), &mm,
        );
    }
    Array2::from_shape_vec((m, n), c_buf).expect("dimensions fixed above")
}

fn square_dim(rows: usize, cols: usize) -> Result<usize, LinalgError> {
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    Ok(rows)
}
