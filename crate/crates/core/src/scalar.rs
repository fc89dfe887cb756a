//! Scalar abstraction shared by every numerical module.
//!
//! All algebra and cochain arithmetic runs over `Complex<T>` for a real field
//! `T`. The crate is exercised with `f64`; `f32` builds and runs with
//! tolerances floored at the type's own precision.

use nalgebra::{ComplexField, DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Complex scalar over the real field `T`.
pub type C<T> = Complex<T>;

/// Real field the crate is generic over.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + std::fmt::Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only on non-finite input.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// A tolerance of `x`, floored at a small multiple of machine epsilon.
    fn tol(x: f64) -> Self {
        let t = Self::lit(x);
        let floor = Self::default_epsilon() * Self::lit(1024.0);
        if t > floor {
            t
        } else {
            floor
        }
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn real<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn modulus<T: Real>(z: C<T>) -> T {
    ComplexField::modulus(z)
}

/// `Re(conj(a) * b)`, the real inner product on coordinates.
#[inline]
pub fn re_dot<T: Real>(a: &DVector<C<T>>, b: &DVector<C<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc + x.re * y.re + x.im * y.im)
}

/// Largest entry modulus; zero for empty input.
pub fn max_modulus<'a, T: Real, I: IntoIterator<Item = &'a C<T>>>(it: I) -> T {
    it.into_iter()
        .fold(T::zero(), |m, z| {
            let a = modulus(*z);
            if a > m {
                a
            } else {
                m
            }
        })
}

/// Largest singular value, with the matching left and right singular vectors.
pub fn top_singular<T: Real>(m: &DMatrix<C<T>>) -> (T, DVector<C<T>>, DVector<C<T>>) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (T::zero(), DVector::zeros(r), DVector::zeros(c));
    }
    let svd = m.clone().svd(true, true);
    let (idx, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bs), (i, &s)| if s > bs { (i, s) } else { (bi, bs) });
    let u = svd.u.as_ref().expect("u requested").column(idx).into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("v_t requested")
        .row(idx)
        .adjoint()
        .into_owned();
    (s, u, v)
}

pub fn spectral_norm<T: Real>(m: &DMatrix<C<T>>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |a, &s| if s > a { s } else { a })
}

/// `W V^*` from the SVD `m = W S V^*`: the maximizer of `Re tr(m^* U)` over
/// the spectral unit ball.
pub fn polar_factor<T: Real>(m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    u * v_t
}
