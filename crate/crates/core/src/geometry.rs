//! Unit-ball geometry of an algebra's norm in coordinates.
//!
//! The norm estimators only need four things from a norm: evaluate it, find a
//! norming functional, maximize a linear functional over the unit ball, and
//! know how far it sits from the Euclidean norm. Functionals are represented by
//! coordinate vectors `g` acting as `x ↦ Re Σ conj(g_i) x_i`.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{modulus, polar_factor, re_dot, real, spectral_norm, top_singular, Real, C};

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry<T: Real> {
    /// Euclidean norm of the coordinates.
    Euclidean { dim: usize },
    /// Largest singular value of `Σ x_i R_i` for a Frobenius-orthonormal basis `R_i`.
    Spectral { basis: Vec<DMatrix<C<T>>>, size: usize },
    /// `|x_0| + ‖(x_1, …)‖_base`, the norm of a forced unitization.
    Unitized { base: Box<Geometry<T>> },
    /// Restriction of `ambient` to the span of the orthonormal columns of `frame`.
    Embedded { ambient: Box<Geometry<T>>, frame: DMatrix<C<T>> },
}

impl<T: Real> Geometry<T> {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Euclidean { dim } => *dim,
            Geometry::Spectral { basis, .. } => basis.len(),
            Geometry::Unitized { base } => base.dim() + 1,
            Geometry::Embedded { frame, .. } => frame.ncols(),
        }
    }

    pub fn norm(&self, x: &DVector<C<T>>) -> T {
        match self {
            Geometry::Euclidean { .. } => x.norm(),
            Geometry::Spectral { basis, size } => spectral_norm(&realize(basis, *size, x)),
            Geometry::Unitized { base } => {
                modulus(x[0]) + base.norm(&x.rows(1, x.len() - 1).into_owned())
            }
            Geometry::Embedded { ambient, frame } => ambient.norm(&(frame * x)),
        }
    }

    /// A functional of dual norm at most one with `Re⟨f, x⟩ = ‖x‖`.
    pub fn norming(&self, x: &DVector<C<T>>) -> DVector<C<T>> {
        self.norm_and_norming(x).1
    }

    /// `‖x‖` together with a norming functional, sharing one decomposition.
    pub fn norm_and_norming(&self, x: &DVector<C<T>>) -> (T, DVector<C<T>>) {
        match self {
            Geometry::Euclidean { .. } => {
                let n = x.norm();
                if n > T::zero() {
                    (n, x.unscale(n))
                } else {
                    (n, DVector::zeros(x.len()))
                }
            }
            Geometry::Spectral { basis, size } => {
                let m = realize(basis, *size, x);
                let (s, u, v) = top_singular(&m);
                (s, coordinates(basis, &(u * v.adjoint())))
            }
            Geometry::Unitized { base } => {
                let a = modulus(x[0]);
                let head = if a > T::zero() { x[0].unscale(a) } else { real(T::one()) };
                let (n, tail) = base.norm_and_norming(&x.rows(1, x.len() - 1).into_owned());
                (a + n, prepend(head, &tail))
            }
            Geometry::Embedded { ambient, frame } => {
                let (n, f) = ambient.norm_and_norming(&(frame * x));
                (n, frame.ad_mul(&f))
            }
        }
    }

    /// A point of the unit ball maximizing `Re⟨g, x⟩`.
    pub fn maximize(&self, g: &DVector<C<T>>) -> DVector<C<T>> {
        match self {
            Geometry::Euclidean { .. } => {
                let n = g.norm();
                if n > T::zero() {
                    g.unscale(n)
                } else {
                    DVector::zeros(g.len())
                }
            }
            Geometry::Spectral { basis, size } => {
                let gm = realize(basis, *size, g);
                if gm.norm() == T::zero() {
                    return DVector::zeros(g.len());
                }
                // The polar factor lies in the span for the algebras built here
                // (it is a function of the realized element); projecting and
                // rescaling keeps the answer feasible regardless.
                let x = coordinates(basis, &polar_factor(&gm));
                if basis.len() == size * size {
                    x
                } else {
                    self.clamp(x)
                }
            }
            Geometry::Unitized { base } => {
                let tail_g = g.rows(1, g.len() - 1).into_owned();
                let tail = base.maximize(&tail_g);
                let tail_val = re_dot(&tail_g, &tail);
                let head_val = modulus(g[0]);
                if head_val >= tail_val && head_val > T::zero() {
                    let mut x = DVector::zeros(g.len());
                    x[0] = g[0].unscale(head_val);
                    x
                } else {
                    prepend(real(T::zero()), &tail)
                }
            }
            Geometry::Embedded { ambient, frame } => {
                let x = frame.ad_mul(&ambient.maximize(&(frame * g)));
                self.clamp(x)
            }
        }
    }

    /// Rescales into the unit ball if needed.
    pub fn clamp(&self, x: DVector<C<T>>) -> DVector<C<T>> {
        let n = self.norm(&x);
        if n > T::one() {
            x.unscale(n)
        } else {
            x
        }
    }

    /// `sup ‖x‖₂ / ‖x‖` over nonzero `x`, or an upper bound for it.
    pub fn input_factor(&self) -> T {
        match self {
            Geometry::Euclidean { .. } => T::one(),
            Geometry::Spectral { size, .. } => T::lit(*size as f64).sqrt(),
            Geometry::Unitized { base } => base.input_factor().max(T::one()),
            Geometry::Embedded { ambient, .. } => ambient.input_factor(),
        }
    }

    /// `sup ‖x‖ / ‖x‖₂` over nonzero `x`, or an upper bound for it.
    pub fn output_factor(&self) -> T {
        match self {
            Geometry::Euclidean { .. } => T::one(),
            Geometry::Spectral { .. } => T::one(),
            Geometry::Unitized { base } => {
                let b = base.output_factor();
                (T::one() + b * b).sqrt()
            }
            Geometry::Embedded { ambient, .. } => ambient.output_factor(),
        }
    }

    /// Splits an ℓ₁-sum into its summands: coordinate index lists with the
    /// geometry of each piece. Multilinear maps on an ℓ₁-sum attain their norm
    /// on a single summand per slot.
    pub fn pieces(&self) -> Vec<(Vec<usize>, Geometry<T>)> {
        match self {
            Geometry::Unitized { base } => {
                let mut out = vec![(vec![0], Geometry::Euclidean { dim: 1 })];
                for (idx, g) in base.pieces() {
                    out.push((idx.into_iter().map(|i| i + 1).collect(), g));
                }
                out
            }
            _ => vec![((0..self.dim()).collect(), self.clone())],
        }
    }

    /// Geometry of the opposite algebra (realizations transposed).
    pub fn transposed(&self) -> Self {
        match self {
            Geometry::Euclidean { dim } => Geometry::Euclidean { dim: *dim },
            Geometry::Spectral { basis, size } => Geometry::Spectral {
                basis: basis.iter().map(|m| m.transpose()).collect(),
                size: *size,
            },
            Geometry::Unitized { base } => Geometry::Unitized {
                base: Box::new(base.transposed()),
            },
            Geometry::Embedded { ambient, frame } => Geometry::Embedded {
                ambient: Box::new(ambient.transposed()),
                frame: frame.clone(),
            },
        }
    }

    /// Restriction to the span of orthonormal columns `frame`.
    pub fn restrict(&self, frame: &DMatrix<C<T>>) -> Self {
        match self {
            Geometry::Euclidean { .. } => Geometry::Euclidean { dim: frame.ncols() },
            Geometry::Spectral { basis, size } => Geometry::Spectral {
                basis: (0..frame.ncols())
                    .map(|j| realize(basis, *size, &frame.column(j).into_owned()))
                    .collect(),
                size: *size,
            },
            Geometry::Embedded { ambient, frame: outer } => Geometry::Embedded {
                ambient: ambient.clone(),
                frame: outer * frame,
            },
            Geometry::Unitized { .. } => Geometry::Embedded {
                ambient: Box::new(self.clone()),
                frame: frame.clone(),
            },
        }
    }
}

pub(crate) fn realize<T: Real>(basis: &[DMatrix<C<T>>], size: usize, x: &DVector<C<T>>) -> DMatrix<C<T>> {
    let mut m = DMatrix::zeros(size, size);
    for (b, xi) in basis.iter().zip(x.iter()) {
        m.zip_apply(b, |a, r| *a += r * *xi);
    }
    m
}

/// Frobenius inner products `⟨R_i, m⟩`.
pub(crate) fn coordinates<T: Real>(basis: &[DMatrix<C<T>>], m: &DMatrix<C<T>>) -> DVector<C<T>> {
    DVector::from_iterator(basis.len(), basis.iter().map(|b| b.dotc(m)))
}

fn prepend<T: Real>(head: C<T>, tail: &DVector<C<T>>) -> DVector<C<T>> {
    let mut x = DVector::zeros(tail.len() + 1);
    x[0] = head;
    x.rows_mut(1, tail.len()).copy_from(tail);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::scalar::czero;

    fn matrix_units(k: usize) -> Vec<DMatrix<C<f64>>> {
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let mut m = DMatrix::from_element(k, k, czero());
                m[(i, j)] = real(1.0);
                out.push(m);
            }
        }
        out
    }

    #[test]
    fn spectral_norming_and_maximize_are_dual() {
        let g = Geometry::Spectral { basis: matrix_units(3), size: 3 };
        let mut rng = StreamRng::new(3, 0);
        for _ in 0..20 {
            let x = rng.complex_vector::<f64>(9);
            let f = g.norming(&x);
            assert!((re_dot(&f, &x) - g.norm(&x)).abs() < 1e-10);
            let y = g.maximize(&x);
            assert!(g.norm(&y) <= 1.0 + 1e-10);
            // max over the spectral ball equals the nuclear norm
            let nuc: f64 = realize(&matrix_units(3), 3, &x).singular_values().iter().sum();
            assert!((re_dot(&x, &y) - nuc).abs() < 1e-9);
        }
    }

    #[test]
    fn unitized_pieces_cover_coordinates() {
        let g = Geometry::<f64>::Unitized { base: Box::new(Geometry::Euclidean { dim: 3 }) };
        let p = g.pieces();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].0, vec![0]);
        assert_eq!(p[1].0, vec![1, 2, 3]);
        let mut x = DVector::from_element(4, czero());
        x[0] = real(2.0);
        x[1] = real(0.3);
        x[2] = real(0.4);
        assert!((g.norm(&x) - 2.5).abs() < 1e-14);
    }
}
