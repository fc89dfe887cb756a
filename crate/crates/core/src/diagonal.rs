//! Exact diagonals of library algebras and the averaging / splitting
//! operators they induce on cochains.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::algebra::{basis_vector, Algebra, PairList, Subalgebra};
use crate::error::{Error, Result};
use crate::multilinear::{Cochain, LinearMap};
use crate::scalar::{modulus, Real, C};

type Vector<T> = DVector<C<T>>;

/// `Σ_k c_k ⊗ d_k` in `D ⊗ D`, with the representation bound `Σ ‖c_k‖‖d_k‖`.
#[derive(Clone, Debug)]
pub struct TensorRep<T: Real> {
    algebra: Arc<Algebra<T>>,
    pairs: PairList<T>,
    proj_bound: T,
}

impl<T: Real> TensorRep<T> {
    pub fn new(algebra: Arc<Algebra<T>>, pairs: PairList<T>) -> Result<Self> {
        let d = algebra.dim();
        if pairs.iter().any(|(c, dd)| c.len() != d || dd.len() != d) {
            return Err(Error::Shape("tensor pair coordinates differ from algebra dimension".into()));
        }
        let proj_bound = pairs
            .iter()
            .fold(T::zero(), |acc, (c, dd)| acc + algebra.norm_of(c) * algebra.norm_of(dd));
        Ok(Self { algebra, pairs, proj_bound })
    }

    pub fn zero(algebra: &Arc<Algebra<T>>) -> Self {
        Self { algebra: algebra.clone(), pairs: Vec::new(), proj_bound: T::zero() }
    }

    pub fn elementary(algebra: &Arc<Algebra<T>>, c: Vector<T>, d: Vector<T>) -> Result<Self> {
        Self::new(algebra.clone(), vec![(c, d)])
    }

    pub fn algebra(&self) -> &Arc<Algebra<T>> {
        &self.algebra
    }

    pub fn pairs(&self) -> &[(Vector<T>, Vector<T>)] {
        &self.pairs
    }

    pub fn proj_bound(&self) -> T {
        self.proj_bound
    }

    /// Image under the flip `c ⊗ d ↦ d ⊗ c`, as a tensor over `opposite`.
    pub fn flipped(&self, opposite: &Arc<Algebra<T>>) -> Result<Self> {
        if opposite.dim() != self.algebra.dim() {
            return Err(Error::Shape("flip target has a different dimension".into()));
        }
        Self::new(opposite.clone(), self.pairs.iter().map(|(c, d)| (d.clone(), c.clone())).collect())
    }

    /// Coefficient matrix `M` with `Σ c_k ⊗ d_k = Σ M_ij e_i ⊗ e_j`.
    pub fn dense(&self) -> DMatrix<C<T>> {
        let d = self.algebra.dim();
        let mut m = DMatrix::zeros(d, d);
        for (c, dd) in &self.pairs {
            m += c * dd.transpose();
        }
        m
    }

    /// `π(w) = Σ c_k d_k`.
    pub fn multiply_out(&self) -> Vector<T> {
        self.pairs
            .iter()
            .fold(DVector::zeros(self.algebra.dim()), |acc, (c, d)| acc + self.algebra.mul(c, d))
    }

    /// `a · w = Σ a c_k ⊗ d_k`.
    pub fn left_act(&self, a: &Vector<T>) -> Self {
        let pairs = self.pairs.iter().map(|(c, d)| (self.algebra.mul(a, c), d.clone())).collect();
        Self::new(self.algebra.clone(), pairs).expect("shapes preserved")
    }

    /// `w · a = Σ c_k ⊗ d_k a`.
    pub fn right_act(&self, a: &Vector<T>) -> Self {
        let pairs = self.pairs.iter().map(|(c, d)| (c.clone(), self.algebra.mul(d, a))).collect();
        Self::new(self.algebra.clone(), pairs).expect("shapes preserved")
    }
}

impl<T: Real> Serialize for TensorRep<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coords = |v: &Vector<T>| v.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect::<Vec<_>>();
        let pairs: Vec<[Vec<[f64; 2]>; 2]> = self.pairs.iter().map(|(c, d)| [coords(c), coords(d)]).collect();
        let mut st = s.serialize_struct("TensorRep", 2)?;
        st.serialize_field("pairs", &pairs)?;
        st.serialize_field("proj_bound", &self.proj_bound.as_f64())?;
        st.end()
    }
}

/// Upper bound for the projective norm of `Σ M_ij e_i ⊗ e_j`.
pub fn projective_upper<T: Real>(algebra: &Algebra<T>, m: &DMatrix<C<T>>) -> T {
    let d = algebra.dim();
    let norms: Vec<T> = (0..d).map(|i| algebra.norm_of(&basis_vector(d, i))).collect();
    let mut acc = T::zero();
    for i in 0..d {
        for j in 0..d {
            acc += modulus(m[(i, j)]) * norms[i] * norms[j];
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct DiagonalCert<T: Real> {
    pub rep: TensorRep<T>,
    /// Representation bound, an upper bound for the amenability constant.
    pub k_bound: T,
    /// `max_a ‖a·w − w·a‖` over basis `a`, measured by [`projective_upper`].
    pub commutation_residual: T,
    /// `max_a ‖a π(w) − a‖` over basis `a`.
    pub pi_residual: T,
    pub valid: bool,
}

impl<T: Real> Serialize for DiagonalCert<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DiagonalCert", 5)?;
        st.serialize_field("rep", &self.rep)?;
        st.serialize_field("k_bound", &self.k_bound.as_f64())?;
        st.serialize_field("commutation_residual", &self.commutation_residual.as_f64())?;
        st.serialize_field("pi_residual", &self.pi_residual.as_f64())?;
        st.serialize_field("valid", &self.valid)?;
        st.end()
    }
}

/// Computes both diagonal residuals over the basis of `D`.
pub fn verify_diagonal<T: Real>(d: &Arc<Algebra<T>>, w: &TensorRep<T>) -> Result<DiagonalCert<T>> {
    if !w.algebra.same_as(d) {
        return Err(Error::ParentMismatch("tensor lives over a different algebra".into()));
    }
    let n = d.dim();
    let m = w.dense();
    let pi = w.multiply_out();
    let mut comm = T::zero();
    let mut pires = T::zero();
    for i in 0..n {
        let a = basis_vector(n, i);
        // a·w has matrix L_a M; w·a has matrix M R_aᵀ.
        let diff = d.left_matrix(&a) * &m - &m * d.right_matrix(&a).transpose();
        comm = comm.max(projective_upper(d, &diff));
        pires = pires.max(d.norm_of(&(d.mul(&a, &pi) - &a)));
    }
    let scale = w.proj_bound.max(T::one()) * d.scale();
    let tol = T::tol(1e-10) * scale;
    Ok(DiagonalCert {
        rep: w.clone(),
        k_bound: w.proj_bound,
        commutation_residual: comm,
        pi_residual: pires,
        valid: comm <= tol && pires <= tol,
    })
}

/// The recorded exact diagonal of a library algebra: `(1/k) Σ e_ij ⊗ e_ji`
/// for `M_k`, `Σ e_i ⊗ e_i` for `ℂ^k`, concatenations for direct sums, and
/// transports along recorded isomorphisms.
pub fn library_diagonal<T: Real>(d: &Arc<Algebra<T>>) -> Result<DiagonalCert<T>> {
    let seed = d.diagonal_seed().ok_or(Error::NoLibraryDiagonal)?;
    let cert = verify_diagonal(d, &TensorRep::new(d.clone(), seed.clone())?)?;
    if !cert.valid {
        return Err(Error::Domain(format!(
            "recorded diagonal failed verification (residuals {:?}, {:?})",
            cert.commutation_residual, cert.pi_residual
        )));
    }
    Ok(cert)
}

/// `Σ_k φ(c_k) ψ(d_k, ·)` for pairs given in coordinates of `φ`'s source.
pub fn average_pairs<T: Real>(phi: &LinearMap<T>, pairs: &[(Vector<T>, Vector<T>)], psi: &Cochain<T>) -> Result<Cochain<T>> {
    if psi.arity() == 0 {
        return Err(Error::Domain("averaging needs a cochain of arity at least 1".into()));
    }
    if !psi.slots()[0].same_as(phi.source()) || !psi.target().same_as(phi.target()) {
        return Err(Error::ParentMismatch("cochain and map live on different algebras".into()));
    }
    let mut out = Cochain::zeros(psi.slots()[1..].to_vec(), psi.target().clone());
    for (c, d) in pairs {
        let term = psi.contract_slot(0, d).left_multiply(&phi.apply(c));
        out = out.add(&term)?;
    }
    Ok(out)
}

/// `⟨w⟩^n_φ(ψ)(a₁, …, a_n) = Σ_k φ(c_k) ψ(d_k, a₁, …, a_n)` with `w` over
/// `D ⊆ source(φ)`.
pub fn average<T: Real>(
    n: usize,
    phi: &LinearMap<T>,
    sub: &Subalgebra<T>,
    w: &TensorRep<T>,
    psi: &Cochain<T>,
) -> Result<Cochain<T>> {
    if psi.arity() != n + 1 {
        return Err(Error::Domain(format!("average of order {n} needs arity {}, got {}", n + 1, psi.arity())));
    }
    if !w.algebra.same_as(&sub.algebra) || !sub.ambient().same_as(phi.source()) {
        return Err(Error::ParentMismatch("tensor, subalgebra and map do not fit together".into()));
    }
    let e = &sub.embedding;
    let pairs: Vec<_> = w.pairs.iter().map(|(c, d)| (e.apply(c), e.apply(d))).collect();
    average_pairs(phi, &pairs, psi)
}

/// `Σ^n_φ(ψ)`: the average over a verified exact diagonal.
pub fn split<T: Real>(
    n: usize,
    phi: &LinearMap<T>,
    psi: &Cochain<T>,
    sub: &Subalgebra<T>,
    cert: &DiagonalCert<T>,
) -> Result<Cochain<T>> {
    if !cert.valid {
        return crate::error::precondition("split", "diagonal certificate is not valid");
    }
    average(n, phi, sub, &cert.rep, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Element, NormMode};
    use crate::scalar::real;

    #[test]
    fn full_matrix_diagonal() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let cert = library_diagonal(&m2).unwrap();
        assert!(cert.valid);
        assert_eq!(cert.commutation_residual, 0.0);
        assert_eq!(cert.pi_residual, 0.0);
        let f = m2.with_norm_mode(NormMode::Frobenius).unwrap();
        let cf = library_diagonal(&f).unwrap();
        assert!((cf.k_bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_candidates_are_flagged() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let one = m2.unit_coords().unwrap().clone();
        let w = TensorRep::elementary(&m2, one.clone(), one).unwrap();
        let cert = verify_diagonal(&m2, &w).unwrap();
        assert!(!cert.valid);
        assert!(cert.commutation_residual > 0.0);
        let z = verify_diagonal(&m2, &TensorRep::zero(&m2)).unwrap();
        assert!((z.pi_residual - 1.0).abs() < 1e-12);
        assert!(!z.valid);
    }

    #[test]
    fn direct_sum_bound_adds() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let c1 = Algebra::<f64>::commutative(1).unwrap();
        let s = Algebra::direct_sum(&m2, &c1).unwrap();
        let k = library_diagonal(&s).unwrap().k_bound;
        let want = library_diagonal(&m2).unwrap().k_bound + library_diagonal(&c1).unwrap().k_bound;
        assert!((k - want).abs() < 1e-12);
    }

    #[test]
    fn averaging_single_pair() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let whole = Subalgebra::whole(&m2);
        let phi = LinearMap::identity(&m2).scale(real(0.5));
        let psi = crate::multilinear::check_map(&phi).unwrap();
        let c = Element::labeled(&m2, "e12").unwrap().coords().clone();
        let d = Element::labeled(&m2, "e21").unwrap().coords().clone();
        let w = TensorRep::elementary(&m2, c.clone(), d.clone()).unwrap();
        let avg = average(1, &phi, &whole, &w, &psi).unwrap();
        for i in 0..4 {
            let a = basis_vector::<f64>(4, i);
            let want = m2.mul(&phi.apply(&c), &psi.eval(&[d.clone(), a.clone()]));
            assert!((avg.eval(&[a]) - want).norm() < 1e-14);
        }
    }
}
