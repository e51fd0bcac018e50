//! Dense linear algebra on complex matrices.
//!
//! Matrix products go through BLAS (ndarray's `blas` feature). Hermitian
//! eigenproblems and singular values call the LAPACK divide-and-conquer
//! drivers directly; real symmetric input is routed to `dsyevd`, which is
//! roughly four times cheaper than `zheevd` at the same dimension.

use std::os::raw::{c_char, c_int};

use lapack_sys::__BindgenComplex as LapackComplex;
use ndarray::{Array1, Array2, ShapeBuilder, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn eye(n: usize) -> CMat {
    CMat::eye(n)
}

pub fn dagger(a: &CMat) -> CMat {
    let mut out = CMat::zeros(a.raw_dim().f());
    Zip::from(&mut out).and(a.t()).for_each(|o, &x| *o = x.conj());
    out.as_standard_layout().into_owned()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Largest entry of `a - a†` in modulus.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn is_real(a: &CMat) -> bool {
    a.iter().all(|z| z.im == 0.0)
}

pub fn real_part(a: &CMat) -> Array2<f64> {
    a.mapv(|z| z.re)
}

pub fn imag_part(a: &CMat) -> Array2<f64> {
    a.mapv(|z| z.im)
}

pub fn to_complex(a: &Array2<f64>) -> CMat {
    a.mapv(|x| C64::new(x, 0.0))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn inner(x: &CVec, y: &CVec) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvectors stored as columns. Real Hamiltonians keep a real basis so
/// that basis changes of real operators stay in double-precision BLAS.
#[derive(Debug, Clone)]
pub enum Basis {
    Real(Array2<f64>),
    Complex(CMat),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Real(v) => v.nrows(),
            Basis::Complex(v) => v.nrows(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Basis::Real(_))
    }

    pub fn to_complex(&self) -> CMat {
        match self {
            Basis::Real(v) => to_complex(v),
            Basis::Complex(v) => v.clone(),
        }
    }

    pub fn column(&self, k: usize) -> CVec {
        match self {
            Basis::Real(v) => v.column(k).mapv(|x| C64::new(x, 0.0)),
            Basis::Complex(v) => v.column(k).to_owned(),
        }
    }

    /// `V† A V`.
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        match self {
            Basis::Real(v) => {
                let vt = v.t();
                let re = vt.dot(&real_part(a)).dot(v);
                if is_real(a) {
                    to_complex(&re)
                } else {
                    let im = vt.dot(&imag_part(a)).dot(v);
                    combine(&re, &im)
                }
            }
            Basis::Complex(v) => dagger(v).dot(a).dot(v),
        }
    }

    /// `V M V†`.
    pub fn from_eigenbasis(&self, m: &CMat) -> CMat {
        match self {
            Basis::Real(v) => {
                let vt = v.t();
                let re = v.dot(&real_part(m)).dot(&vt);
                if is_real(m) {
                    to_complex(&re)
                } else {
                    let im = v.dot(&imag_part(m)).dot(&vt);
                    combine(&re, &im)
                }
            }
            Basis::Complex(v) => v.dot(m).dot(&dagger(v)),
        }
    }

    /// Coordinates of `x` in the eigenbasis, `V† x`.
    pub fn vec_to_eigenbasis(&self, x: &CVec) -> CVec {
        match self {
            Basis::Real(v) => {
                let re = v.t().dot(&x.mapv(|z| z.re));
                let im = v.t().dot(&x.mapv(|z| z.im));
                Zip::from(&re).and(&im).map_collect(|&r, &i| C64::new(r, i))
            }
            Basis::Complex(v) => dagger(v).dot(x),
        }
    }

    pub fn vec_from_eigenbasis(&self, y: &CVec) -> CVec {
        match self {
            Basis::Real(v) => {
                let re = v.dot(&y.mapv(|z| z.re));
                let im = v.dot(&y.mapv(|z| z.im));
                Zip::from(&re).and(&im).map_collect(|&r, &i| C64::new(r, i))
            }
            Basis::Complex(v) => v.dot(y),
        }
    }
}

fn combine(re: &Array2<f64>, im: &Array2<f64>) -> CMat {
    Zip::from(re).and(im).map_collect(|&r, &i| C64::new(r, i))
}

fn check_square(a: &CMat) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Dimension { expected: r, found: c });
    }
    Ok(r)
}

/// Full eigendecomposition of a Hermitian matrix; eigenvalues ascending.
///
/// The result is validated with a few matrix-vector products, so a
/// miscompiled or misconfigured LAPACK surfaces as an error instead of
/// silently wrong eigenvectors.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, Basis)> {
    check_square(a)?;
    let (w, basis) = if is_real(a) {
        let (w, v) = dsyevd(&real_part(a), true)?;
        (w, Basis::Real(v.expect("vectors requested")))
    } else {
        let (w, v) = zheevd(a, true)?;
        (w, Basis::Complex(v.expect("vectors requested")))
    };
    validate_eigh(a, &w, &basis)?;
    Ok((w, basis))
}

fn validate_eigh(a: &CMat, w: &[f64], basis: &Basis) -> Result<()> {
    let n = w.len();
    if n == 0 {
        return Ok(());
    }
    let probe = CVec::from_shape_fn(n, |k| C64::new((0.7 * k as f64 + 0.3).sin(), (1.3 * k as f64).cos()));
    let norm = vec_norm(&probe);
    let scale = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let back = basis.vec_to_eigenbasis(&basis.vec_from_eigenbasis(&probe));
    let orth = vec_norm(&(&back - &probe)) / norm;
    let x = basis.vec_from_eigenbasis(&probe);
    let ex = basis.vec_from_eigenbasis(&Array1::from_shape_fn(n, |k| probe[k] * w[k]));
    let resid = vec_norm(&(a.dot(&x) - ex)) / (norm * scale);
    let tol = 1e-10 * (n as f64).sqrt();
    if !(orth <= tol && resid <= tol) {
        return Err(Error::Backend(format!(
            "eigendecomposition of dimension {n}: orthogonality defect {orth:.3e}, residual {resid:.3e}"
        )));
    }
    Ok(())
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    check_square(a)?;
    if is_real(a) {
        Ok(dsyevd(&real_part(a), false)?.0)
    } else {
        Ok(zheevd(a, false)?.0)
    }
}

fn lapack_dim(n: usize) -> c_int {
    c_int::try_from(n).expect("matrix dimension exceeds LAPACK integer range")
}

fn dsyevd(a: &Array2<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), vectors.then(|| Array2::zeros((0, 0)))));
    }
    let mut fa = Array2::<f64>::zeros((n, n).f());
    fa.assign(a);
    let mut w = vec![0.0f64; n];
    let jobz: c_char = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = lapack_dim(n);
    let mut info: c_int = 0;
    let mut work_q = [0.0f64];
    let mut iwork_q: [c_int; 1] = [0];
    let query: c_int = -1;
    let data = fa.as_slice_memory_order_mut().expect("contiguous");
    // SAFETY: buffers are sized per the LAPACK workspace query and outlive the calls.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            data.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work_q.as_mut_ptr(),
            &query,
            iwork_q.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    let lwork = work_q[0] as c_int;
    let liwork = iwork_q[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            data.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    Ok((w, vectors.then_some(fa)))
}

fn zheevd(a: &CMat, vectors: bool) -> Result<(Vec<f64>, Option<CMat>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), vectors.then(|| CMat::zeros((0, 0)))));
    }
    let mut fa = CMat::zeros((n, n).f());
    fa.assign(a);
    let mut w = vec![0.0f64; n];
    let jobz: c_char = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = lapack_dim(n);
    let mut info: c_int = 0;
    let mut work_q = [LapackComplex { re: 0.0, im: 0.0 }];
    let mut rwork_q = [0.0f64];
    let mut iwork_q: [c_int; 1] = [0];
    let query: c_int = -1;
    let data = fa.as_slice_memory_order_mut().expect("contiguous");
    let ptr = data.as_mut_ptr() as *mut LapackComplex<f64>;
    // SAFETY: Complex64 and the bindgen complex type are both #[repr(C)] {re, im}.
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            ptr,
            &nn,
            w.as_mut_ptr(),
            work_q.as_mut_ptr(),
            &query,
            rwork_q.as_mut_ptr(),
            &query,
            iwork_q.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheevd", info });
    }
    let lwork = work_q[0].re as c_int;
    let lrwork = rwork_q[0] as c_int;
    let liwork = iwork_q[0];
    let mut work = vec![LapackComplex { re: 0.0, im: 0.0 }; lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            ptr,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheevd", info });
    }
    Ok((w, vectors.then_some(fa)))
}

/// Singular value decomposition `A = U diag(s) V†` of a square or
/// rectangular matrix; singular values descending.
pub struct Svd {
    pub u: Option<CMat>,
    pub s: Vec<f64>,
    pub vt: Option<CMat>,
}

pub fn svd(a: &CMat, vectors: bool) -> Result<Svd> {
    let (m, n) = a.dim();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd { u: None, s: Vec::new(), vt: None });
    }
    let mut fa = CMat::zeros((m, n).f());
    fa.assign(a);
    let mut s = vec![0.0f64; k];
    let jobz: c_char = if vectors { b'A' } else { b'N' } as c_char;
    let (mm, nn) = (lapack_dim(m), lapack_dim(n));
    let mut u = CMat::zeros((if vectors { m } else { 1 }, if vectors { m } else { 1 }).f());
    let mut vt = CMat::zeros((if vectors { n } else { 1 }, if vectors { n } else { 1 }).f());
    let ldu = lapack_dim(u.nrows());
    let ldvt = lapack_dim(vt.nrows());
    let lrwork = if vectors {
        (5 * k * k + 5 * k).max(2 * m.max(n) * k + 2 * k * k + k)
    } else {
        7 * k
    };
    let mut rwork = vec![0.0f64; lrwork.max(1)];
    let mut iwork = vec![0 as c_int; 8 * k];
    let mut info: c_int = 0;
    let a_ptr = fa.as_slice_memory_order_mut().expect("contiguous").as_mut_ptr() as *mut LapackComplex<f64>;
    let u_ptr = u.as_slice_memory_order_mut().expect("contiguous").as_mut_ptr() as *mut LapackComplex<f64>;
    let vt_ptr = vt.as_slice_memory_order_mut().expect("contiguous").as_mut_ptr() as *mut LapackComplex<f64>;
    let mut work_q = [LapackComplex { re: 0.0, im: 0.0 }];
    let query: c_int = -1;
    // SAFETY: see `zheevd`; buffer sizes follow the zgesdd documentation.
    unsafe {
        lapack_sys::zgesdd_(
            &jobz,
            &mm,
            &nn,
            a_ptr,
            &mm,
            s.as_mut_ptr(),
            u_ptr,
            &ldu,
            vt_ptr,
            &ldvt,
            work_q.as_mut_ptr(),
            &query,
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgesdd", info });
    }
    let lwork = work_q[0].re as c_int;
    let mut work = vec![LapackComplex { re: 0.0, im: 0.0 }; lwork.max(1) as usize];
    unsafe {
        lapack_sys::zgesdd_(
            &jobz,
            &mm,
            &nn,
            a_ptr,
            &mm,
            s.as_mut_ptr(),
            u_ptr,
            &ldu,
            vt_ptr,
            &ldvt,
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgesdd", info });
    }
    if vectors {
        Ok(Svd { u: Some(u), s, vt: Some(vt) })
    } else {
        Ok(Svd { u: None, s, vt: None })
    }
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    Ok(svd(a, false)?.s)
}

/// Operator norm. Hermitian and anti-Hermitian inputs use the cheaper
/// eigenvalue route.
pub fn operator_norm(a: &CMat) -> Result<f64> {
    let n = check_square(a)?;
    if n == 0 {
        return Ok(0.0);
    }
    let scale = max_abs(a);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-13 * scale;
    if hermiticity_defect(a) <= tol {
        return spectral_radius_hermitian(&hermitian_part(a));
    }
    let ia = a.mapv(|z| z * I);
    if hermiticity_defect(&ia) <= tol {
        return spectral_radius_hermitian(&hermitian_part(&ia));
    }
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

fn spectral_radius_hermitian(a: &CMat) -> Result<f64> {
    let w = eigvalsh(a)?;
    Ok(w.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// `(A + A†)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

/// `f(A)` for Hermitian `A`, through its eigendecomposition; diagonal input
/// is mapped entrywise.
pub fn hermitian_function<F: Fn(f64) -> C64>(a: &CMat, f: F) -> Result<CMat> {
    check_square(a)?;
    if a.indexed_iter().all(|((i, j), z)| i == j || *z == ZERO) {
        return Ok(CMat::from_diag(&a.diag().mapv(|z| f(z.re))));
    }
    let (w, basis) = eigh(a)?;
    let v = basis.to_complex();
    let mut scaled = v.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let fj = f(w[j]);
        col.mapv_inplace(|z| z * fj);
    }
    Ok(scaled.dot(&dagger(&v)))
}

/// Unitary factor of the polar decomposition `A = W |A|`, together with the
/// smallest singular value of `A`.
pub fn polar_unitary(a: &CMat) -> Result<(CMat, f64)> {
    let Svd { u, s, vt } = svd(a, true)?;
    let u = u.expect("vectors requested");
    let vt = vt.expect("vectors requested");
    let smallest = s.last().copied().unwrap_or(0.0);
    Ok((u.dot(&vt), smallest))
}

/// `‖U†U − 1‖_max`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs(&(dagger(u).dot(u) - eye(n)))
}
