//! Linear maps, multilinear cochains, the defect map and the approximate
//! coboundary operators, plus certified norm estimation.

mod norm;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{basis_vector, Algebra, Subalgebra};
use crate::error::{Error, Result};
use crate::scalar::{max_modulus, Real, C};

pub use norm::{
    defect, evaluate_at, linear_map_norm, lower_estimate, multilinear_norm, Budget, DefectEstimate, Interval,
};

type Vector<T> = DVector<C<T>>;

#[derive(Clone, Debug)]
pub struct LinearMap<T: Real> {
    source: Arc<Algebra<T>>,
    target: Arc<Algebra<T>>,
    matrix: DMatrix<C<T>>,
}

impl<T: Real> LinearMap<T> {
    pub fn new(source: Arc<Algebra<T>>, target: Arc<Algebra<T>>, matrix: DMatrix<C<T>>) -> Result<Self> {
        if matrix.shape() != (target.dim(), source.dim()) {
            return Err(Error::Shape(format!(
                "matrix is {:?}, expected {}×{}",
                matrix.shape(),
                target.dim(),
                source.dim()
            )));
        }
        Ok(Self { source, target, matrix })
    }

    pub fn identity(a: &Arc<Algebra<T>>) -> Self {
        Self { source: a.clone(), target: a.clone(), matrix: DMatrix::identity(a.dim(), a.dim()) }
    }

    pub fn zero(source: &Arc<Algebra<T>>, target: &Arc<Algebra<T>>) -> Self {
        Self {
            source: source.clone(),
            target: target.clone(),
            matrix: DMatrix::zeros(target.dim(), source.dim()),
        }
    }

    pub fn source(&self) -> &Arc<Algebra<T>> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Algebra<T>> {
        &self.target
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn apply(&self, x: &Vector<T>) -> Vector<T> {
        &self.matrix * x
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.source.same_as(&other.source) && self.target.same_as(&other.target) {
            Ok(())
        } else {
            Err(Error::ParentMismatch("maps between different algebras".into()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { matrix: &self.matrix + &other.matrix, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { matrix: &self.matrix - &other.matrix, ..self.clone() })
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self { matrix: self.matrix.map(|z| z * s), ..self.clone() }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if !inner.target.same_as(&self.source) {
            return Err(Error::ParentMismatch("composition of non-matching maps".into()));
        }
        Ok(Self { source: inner.source.clone(), target: self.target.clone(), matrix: &self.matrix * &inner.matrix })
    }

    /// Same matrix over other algebras of the same dimensions.
    pub fn reparent(&self, source: &Arc<Algebra<T>>, target: &Arc<Algebra<T>>) -> Result<Self> {
        Self::new(source.clone(), target.clone(), self.matrix.clone())
    }

    /// Largest basis-pair residual of `φ(ab) − φ(a)φ(b)` in the target norm.
    pub fn multiplicativity_residual(&self) -> Result<T> {
        check_map(self).map(|c| c.max_column_norm())
    }
}

/// A multilinear map `A₁ × … × A_n → B` stored as a `dim B × Π dim A_i`
/// coefficient matrix; column index is mixed radix, first slot most significant.
#[derive(Clone, Debug)]
pub struct Cochain<T: Real> {
    slots: Vec<Arc<Algebra<T>>>,
    target: Arc<Algebra<T>>,
    data: DMatrix<C<T>>,
}

impl<T: Real> Cochain<T> {
    pub fn new(slots: Vec<Arc<Algebra<T>>>, target: Arc<Algebra<T>>, data: DMatrix<C<T>>) -> Result<Self> {
        let cols: usize = slots.iter().map(|s| s.dim()).product();
        if data.shape() != (target.dim(), cols) {
            return Err(Error::Shape(format!("tensor is {:?}, expected {}×{cols}", data.shape(), target.dim())));
        }
        Ok(Self { slots, target, data })
    }

    pub fn zeros(slots: Vec<Arc<Algebra<T>>>, target: Arc<Algebra<T>>) -> Self {
        let cols: usize = slots.iter().map(|s| s.dim()).product();
        let data = DMatrix::zeros(target.dim(), cols);
        Self { slots, target, data }
    }

    pub fn from_linear_map(phi: &LinearMap<T>) -> Self {
        Self { slots: vec![phi.source.clone()], target: phi.target.clone(), data: phi.matrix.clone() }
    }

    pub fn to_linear_map(&self) -> Result<LinearMap<T>> {
        if self.arity() != 1 {
            return Err(Error::Domain(format!("arity {} cochain is not a linear map", self.arity())));
        }
        LinearMap::new(self.slots[0].clone(), self.target.clone(), self.data.clone())
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Arc<Algebra<T>>] {
        &self.slots
    }

    pub fn target(&self) -> &Arc<Algebra<T>> {
        &self.target
    }

    pub fn data(&self) -> &DMatrix<C<T>> {
        &self.data
    }

    pub fn dims(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.dim()).collect()
    }

    pub fn column_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.slots.iter()).fold(0, |acc, (&i, s)| acc * s.dim() + i)
    }

    /// Value on basis tuple `idx`.
    pub fn basis_value(&self, idx: &[usize]) -> Vector<T> {
        self.data.column(self.column_of(idx)).into_owned()
    }

    /// `ψ(x₁, …, x_n)`.
    pub fn eval(&self, args: &[Vector<T>]) -> Vector<T> {
        assert_eq!(args.len(), self.arity());
        let mut k = DVector::from_element(1, crate::scalar::cone());
        for x in args {
            k = k.kronecker(x);
        }
        &self.data * k
    }

    /// Substitutes `v` into slot `slot`, lowering the arity by one.
    pub fn contract_slot(&self, slot: usize, v: &Vector<T>) -> Self {
        let dims = self.dims();
        let (outer, inner) = split_dims(&dims, slot);
        let ds = dims[slot];
        let mut data = DMatrix::zeros(self.target.dim(), outer * inner);
        for o in 0..outer {
            for p in 0..ds {
                if v[p] == crate::scalar::czero() {
                    continue;
                }
                for i in 0..inner {
                    let src = (o * ds + p) * inner + i;
                    let mut col = data.column_mut(o * inner + i);
                    col.axpy(v[p], &self.data.column(src), crate::scalar::cone());
                }
            }
        }
        let mut slots = self.slots.clone();
        slots.remove(slot);
        Self { slots, target: self.target.clone(), data }
    }

    /// Precomposes slot `slot` with the linear map `m : X → slot algebra`.
    pub fn transform_slot(&self, slot: usize, m: &LinearMap<T>) -> Result<Self> {
        if !m.target.same_as(&self.slots[slot]) {
            return Err(Error::Shape("slot map lands outside the slot algebra".into()));
        }
        let dims = self.dims();
        let (outer, inner) = split_dims(&dims, slot);
        let (old, new) = (dims[slot], m.source.dim());
        let mut data = DMatrix::zeros(self.target.dim(), outer * new * inner);
        for o in 0..outer {
            for q in 0..new {
                for p in 0..old {
                    let c = m.matrix[(p, q)];
                    if c == crate::scalar::czero() {
                        continue;
                    }
                    for i in 0..inner {
                        let mut col = data.column_mut((o * new + q) * inner + i);
                        col.axpy(c, &self.data.column((o * old + p) * inner + i), crate::scalar::cone());
                    }
                }
            }
        }
        let mut slots = self.slots.clone();
        slots[slot] = m.source.clone();
        Ok(Self { slots, target: self.target.clone(), data })
    }

    /// Restricts slot `slot` to a subalgebra.
    pub fn restrict_slot(&self, slot: usize, sub: &Subalgebra<T>) -> Result<Self> {
        if slot >= self.arity() {
            return Err(Error::Domain(format!("slot {slot} out of range")));
        }
        self.transform_slot(slot, &sub.embedding)
    }

    /// `b · ψ(…)` in the target algebra.
    pub fn left_multiply(&self, b: &Vector<T>) -> Self {
        Self { data: self.target.left_matrix(b) * &self.data, ..self.clone() }
    }

    /// `ψ(…) · b`.
    pub fn right_multiply(&self, b: &Vector<T>) -> Self {
        Self { data: self.target.right_matrix(b) * &self.data, ..self.clone() }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        let same = self.arity() == other.arity()
            && self.target.same_as(&other.target)
            && self.slots.iter().zip(other.slots.iter()).all(|(a, b)| a.same_as(b));
        if same {
            Ok(())
        } else {
            Err(Error::ParentMismatch("cochains over different algebras".into()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { data: &self.data + &other.data, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { data: &self.data - &other.data, ..self.clone() })
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self { data: self.data.map(|z| z * s), ..self.clone() }
    }

    pub fn max_abs(&self) -> T {
        max_modulus(self.data.iter())
    }

    /// Largest target norm of a basis-tuple value.
    pub fn max_column_norm(&self) -> T {
        (0..self.data.ncols()).fold(T::zero(), |m, j| m.max(self.target.norm_of(&self.data.column(j).into_owned())))
    }

    /// Max entry difference relative to `max(1, max entries)`.
    pub fn relative_distance(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        let diff = max_modulus((&self.data - &other.data).iter());
        Ok(diff / self.max_abs().max(other.max_abs()).max(T::one()))
    }
}

fn split_dims(dims: &[usize], slot: usize) -> (usize, usize) {
    (dims[..slot].iter().product(), dims[slot + 1..].iter().product())
}

/// Decodes a mixed-radix column index.
pub(crate) fn decode(mut col: usize, dims: &[usize], out: &mut [usize]) {
    for s in (0..dims.len()).rev() {
        out[s] = col % dims[s];
        col /= dims[s];
    }
}

/// `φ^∨(a, b) = φ(ab) − φ(a)φ(b)`.
pub fn check_map<T: Real>(phi: &LinearMap<T>) -> Result<Cochain<T>> {
    let a = &phi.source;
    let b = &phi.target;
    let d = a.dim();
    let mut data = DMatrix::zeros(b.dim(), d * d);
    for i in 0..d {
        let pi = phi.matrix.column(i).into_owned();
        let li = b.left_matrix(&pi);
        for j in 0..d {
            let ab = a.mul(&basis_vector(d, i), &basis_vector(d, j));
            let col = &phi.matrix * ab - &li * phi.matrix.column(j);
            data.set_column(i * d + j, &col);
        }
    }
    Cochain::new(vec![a.clone(), a.clone()], b.clone(), data)
}

/// The approximate coboundary `d^n_φ`:
/// `φ(a₁)ψ(a₂,…) + Σ_j (−1)^j ψ(…, a_j a_{j+1}, …) + (−1)^{n+1} ψ(a₁,…,a_n)φ(a_{n+1})`.
pub fn coboundary<T: Real>(phi: &LinearMap<T>, psi: &Cochain<T>) -> Result<Cochain<T>> {
    let n = psi.arity();
    if n == 0 {
        return Err(Error::Domain("coboundary of an arity-0 cochain".into()));
    }
    let a = &phi.source;
    if psi.slots.iter().any(|s| !s.same_as(a)) || !psi.target.same_as(&phi.target) {
        return Err(Error::ParentMismatch("cochain and map live on different algebras".into()));
    }
    let b = &phi.target;
    let d = a.dim();
    let dims = vec![d; n + 1];
    let cols = d.pow((n + 1) as u32);
    let mut data = DMatrix::zeros(b.dim(), cols);
    let left: Vec<DMatrix<C<T>>> = (0..d).map(|i| b.left_matrix(&phi.matrix.column(i).into_owned())).collect();
    let right: Vec<DMatrix<C<T>>> = (0..d).map(|i| b.right_matrix(&phi.matrix.column(i).into_owned())).collect();
    let mut idx = vec![0; n + 1];
    let mut sub = vec![0; n];
    let sign_last = if (n + 1) % 2 == 0 { T::one() } else { -T::one() };
    for col in 0..cols {
        decode(col, &dims, &mut idx);
        let mut acc: Vector<T> = &left[idx[0]] * psi.basis_value(&idx[1..]);
        for j in 0..n {
            let sign = if (j + 1) % 2 == 0 { T::one() } else { -T::one() };
            // ψ(…, e_{i_j} e_{i_{j+1}}, …)
            for k in 0..d {
                let c = a.constant(idx[j], idx[j + 1], k);
                if c == crate::scalar::czero() {
                    continue;
                }
                sub[..j].copy_from_slice(&idx[..j]);
                sub[j] = k;
                sub[j + 1..].copy_from_slice(&idx[j + 2..]);
                acc.axpy(c.scale(sign), &psi.data.column(psi.column_of(&sub)), crate::scalar::cone());
            }
        }
        let tail = &right[idx[n]] * psi.basis_value(&idx[..n]);
        acc.axpy(crate::scalar::real(sign_last), &tail, crate::scalar::cone());
        data.set_column(col, &acc);
    }
    Cochain::new(vec![a.clone(); n + 1], b.clone(), data)
}

/// `Res_D ψ`: the first slot restricted to `D`.
pub fn restrict_first<T: Real>(sub: &Subalgebra<T>, psi: &Cochain<T>) -> Result<Cochain<T>> {
    psi.restrict_slot(0, sub)
}

/// `(a₁, a₂) ↦ γ(a₁)γ(a₂)`, the quadratic term of the linearization identity.
pub fn product_cochain<T: Real>(gamma: &LinearMap<T>) -> Result<Cochain<T>> {
    let b = &gamma.target;
    let d = gamma.source.dim();
    let mut data = DMatrix::zeros(b.dim(), d * d);
    for i in 0..d {
        let li = b.left_matrix(&gamma.matrix.column(i).into_owned());
        for j in 0..d {
            data.set_column(i * d + j, &(&li * gamma.matrix.column(j)));
        }
    }
    Cochain::new(vec![gamma.source.clone(), gamma.source.clone()], b.clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::scalar::real;

    fn random_map(a: &Arc<Algebra<f64>>, b: &Arc<Algebra<f64>>, seed: u64) -> LinearMap<f64> {
        let mut rng = StreamRng::new(seed, 0);
        LinearMap::new(a.clone(), b.clone(), rng.complex_matrix(b.dim(), a.dim())).unwrap()
    }

    #[test]
    fn check_map_of_scalar_multiple() {
        let c1 = Algebra::<f64>::commutative(1).unwrap();
        let phi = LinearMap::identity(&c1).scale(real(3.0));
        let chk = check_map(&phi).unwrap();
        assert!((chk.data()[(0, 0)] - real(3.0 - 9.0)).norm() < 1e-14);
    }

    #[test]
    fn check_map_matches_direct_evaluation() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let phi = random_map(&m2, &m2, 4);
        let chk = check_map(&phi).unwrap();
        let mut rng = StreamRng::new(5, 0);
        let x = rng.complex_vector::<f64>(4);
        let y = rng.complex_vector::<f64>(4);
        let direct = phi.apply(&m2.mul(&x, &y)) - m2.mul(&phi.apply(&x), &phi.apply(&y));
        assert!((chk.eval(&[x, y]) - direct).norm() < 1e-12);
    }

    #[test]
    fn two_cocycle_and_contract() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        for seed in 0..5 {
            let phi = random_map(&m2, &m2, seed);
            let chk = check_map(&phi).unwrap();
            let dd = coboundary(&phi, &chk).unwrap();
            assert!(dd.max_abs() < 1e-10 * chk.max_abs().powi(2).max(1.0));
        }
        let phi = random_map(&m2, &m2, 9);
        let chk = check_map(&phi).unwrap();
        let v = StreamRng::new(1, 1).complex_vector::<f64>(4);
        let w = StreamRng::new(1, 2).complex_vector::<f64>(4);
        let c = chk.contract_slot(0, &v);
        assert!((c.eval(std::slice::from_ref(&w)) - chk.eval(&[v, w])).norm() < 1e-12);
    }

    #[test]
    fn coboundary_of_degree_one() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let phi = random_map(&m2, &m2, 1);
        let gamma = random_map(&m2, &m2, 2);
        let d1 = coboundary(&phi, &Cochain::from_linear_map(&gamma)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (x, y) = (basis_vector::<f64>(4, i), basis_vector::<f64>(4, j));
                let want = m2.mul(&phi.apply(&x), &gamma.apply(&y)) - gamma.apply(&m2.mul(&x, &y))
                    + m2.mul(&gamma.apply(&x), &phi.apply(&y));
                assert!((d1.basis_value(&[i, j]) - want).norm() < 1e-12);
            }
        }
    }
}
