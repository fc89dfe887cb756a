//! Certified interval estimates of multilinear operator norms.
//!
//! The lower end is the norm of `ψ` at an explicit unit-ball witness found by
//! alternating maximization; each slot step maximizes a linear functional over
//! the slot's unit ball in closed form. The upper end is a Euclidean bound
//! (tensor unfoldings) converted with norm-equivalence factors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::{decode, Cochain, LinearMap};
use crate::algebra::Subalgebra;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::rng::{derive_seed, StreamRng};
use crate::scalar::{cone, czero, spectral_norm, top_singular, Real, C};

type Vector<T> = DVector<C<T>>;

/// Restart and sweep budget of the alternating ascent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Budget {
    pub restarts: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { restarts: 32, sweeps: 200, seed: 0 }
    }
}

impl Budget {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// A closed interval `[lo, hi]` known to contain some quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    /// Interval product for nonnegative intervals.
    pub fn mul(self, other: Self) -> Self {
        Self { lo: self.lo * other.lo, hi: self.hi * other.hi }
    }

    pub fn scale(self, s: T) -> Self {
        Self { lo: self.lo * s, hi: self.hi * s }
    }

    pub fn add(self, other: Self) -> Self {
        Self { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }
}

impl<T: Real> Serialize for Interval<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Interval", 2)?;
        st.serialize_field("lo", &self.lo.as_f64())?;
        st.serialize_field("hi", &self.hi.as_f64())?;
        st.end()
    }
}

#[derive(Clone, Debug)]
pub struct DefectEstimate<T: Real> {
    pub lower: T,
    pub upper: T,
    /// One unit-ball argument per slot, attaining `lower`.
    pub witness: Vec<Vector<T>>,
    pub restarts_used: usize,
    pub seed: u64,
}

impl<T: Real> DefectEstimate<T> {
    pub fn interval(&self) -> Interval<T> {
        Interval::new(self.lower, self.upper)
    }
}

impl<T: Real> Serialize for DefectEstimate<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let witness: Vec<Vec<[f64; 2]>> = self
            .witness
            .iter()
            .map(|v| v.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect())
            .collect();
        let mut st = s.serialize_struct("DefectEstimate", 5)?;
        st.serialize_field("lower", &self.lower.as_f64())?;
        st.serialize_field("upper", &self.upper.as_f64())?;
        st.serialize_field("witness", &witness)?;
        st.serialize_field("restarts_used", &self.restarts_used)?;
        st.serialize_field("seed", &self.seed)?;
        st.end()
    }
}

/// Norm estimate for arity 1 or 2.
pub fn multilinear_norm<T: Real>(psi: &Cochain<T>, budget: Budget) -> Result<DefectEstimate<T>> {
    match psi.arity() {
        1 | 2 => lower_estimate(psi, budget),
        n => Err(Error::Unsupported(format!("norm estimation for arity {n} (only 1 and 2)"))),
    }
}

pub fn linear_map_norm<T: Real>(phi: &LinearMap<T>, budget: Budget) -> Result<DefectEstimate<T>> {
    multilinear_norm(&Cochain::from_linear_map(phi), budget)
}

/// `def`, `def_{D×A}`, `def_{A×D}` or `def_{D×D}` depending on which slots are
/// restricted.
pub fn defect<T: Real>(
    phi: &LinearMap<T>,
    left: Option<&Subalgebra<T>>,
    right: Option<&Subalgebra<T>>,
    budget: Budget,
) -> Result<DefectEstimate<T>> {
    let mut chk = super::check_map(phi)?;
    if let Some(d) = left {
        chk = chk.restrict_slot(0, d)?;
    }
    if let Some(d) = right {
        chk = chk.restrict_slot(1, d)?;
    }
    multilinear_norm(&chk, budget)
}

/// `‖ψ(x₁, …, x_n)‖`.
pub fn evaluate_at<T: Real>(psi: &Cochain<T>, args: &[Vector<T>]) -> T {
    psi.target().norm_of(&psi.eval(args))
}

/// Interval estimate for any arity ≥ 1. Arity 3 and above use the Frobenius
/// norm of the coefficient tensor for the upper end.
pub fn lower_estimate<T: Real>(psi: &Cochain<T>, budget: Budget) -> Result<DefectEstimate<T>> {
    let n = psi.arity();
    if n == 0 {
        return Err(Error::Domain("norm of an arity-0 cochain".into()));
    }
    let dims = psi.dims();
    if psi.max_abs() == T::zero() {
        return Ok(DefectEstimate {
            lower: T::zero(),
            upper: T::zero(),
            witness: dims.iter().map(|&d| DVector::zeros(d)).collect(),
            restarts_used: 0,
            seed: budget.seed,
        });
    }
    let pieces: Vec<Vec<(Vec<usize>, Geometry<T>)>> = psi.slots().iter().map(|s| s.geometry().pieces()).collect();
    let target = psi.target().geometry();
    let mut best: Option<(T, Vec<Vector<T>>)> = None;
    let mut upper = T::zero();
    let counts: Vec<usize> = pieces.iter().map(|p| p.len()).collect();
    let mut choice = vec![0usize; n];
    for combo in 0..counts.iter().product() {
        decode(combo, &counts, &mut choice);
        let sel: Vec<&(Vec<usize>, Geometry<T>)> = choice.iter().enumerate().map(|(s, &c)| &pieces[s][c]).collect();
        let sub_dims: Vec<usize> = sel.iter().map(|p| p.0.len()).collect();
        let data = sub_tensor(psi.data(), &dims, &sel.iter().map(|p| p.0.as_slice()).collect::<Vec<_>>(), &sub_dims);
        let geoms: Vec<&Geometry<T>> = sel.iter().map(|p| &p.1).collect();
        let leaf = estimate_leaf(&data, &sub_dims, &geoms, target, budget);
        upper = upper.max(leaf.upper);
        let witness: Vec<Vector<T>> = sel
            .iter()
            .zip(leaf.witness.iter())
            .zip(dims.iter())
            .map(|((p, w), &d)| {
                let mut full = DVector::zeros(d);
                for (k, &i) in p.0.iter().enumerate() {
                    full[i] = w[k];
                }
                full
            })
            .collect();
        let replace = match &best {
            None => true,
            Some((b, _)) => leaf.lower > *b + T::tol(1e-12) * *b,
        };
        if replace {
            best = Some((leaf.lower, witness));
        }
    }
    let (_, witness) = best.expect("at least one piece");
    // The lower end is recomputed at the lifted witness so it is exactly the
    // value the witness attains.
    let lower = evaluate_at(psi, &witness);
    Ok(DefectEstimate {
        lower,
        upper: upper.max(lower),
        witness,
        restarts_used: budget.restarts.max(1),
        seed: budget.seed,
    })
}

fn sub_tensor<T: Real>(data: &DMatrix<C<T>>, dims: &[usize], idx: &[&[usize]], sub_dims: &[usize]) -> DMatrix<C<T>> {
    let cols: usize = sub_dims.iter().product();
    let mut out = DMatrix::zeros(data.nrows(), cols);
    let mut t = vec![0; dims.len()];
    for c in 0..cols {
        decode(c, sub_dims, &mut t);
        let src = t.iter().enumerate().fold(0, |acc, (s, &k)| acc * dims[s] + idx[s][k]);
        out.set_column(c, &data.column(src));
    }
    out
}

struct Leaf<T: Real> {
    lower: T,
    upper: T,
    witness: Vec<Vector<T>>,
}

fn kron_eval<T: Real>(data: &DMatrix<C<T>>, x: &[Vector<T>]) -> Vector<T> {
    let mut k = DVector::from_element(1, cone());
    for v in x {
        k = k.kronecker(v);
    }
    data * k
}

/// Matricization with slot `slot` as rows (`slot = None` gives the target).
fn unfolding<T: Real>(data: &DMatrix<C<T>>, dims: &[usize], slot: Option<usize>) -> DMatrix<C<T>> {
    let Some(s) = slot else { return data.clone() };
    let cols: usize = dims.iter().product();
    let ds = dims[s];
    let rest = data.nrows() * cols / ds.max(1);
    let mut out = DMatrix::zeros(ds, rest);
    let mut t = vec![0; dims.len()];
    let mut counters = vec![0usize; ds];
    for c in 0..cols {
        decode(c, dims, &mut t);
        let row = t[s];
        for r in 0..data.nrows() {
            out[(row, counters[row])] = data[(r, c)];
            counters[row] += 1;
        }
    }
    out
}

fn euclidean_upper<T: Real>(data: &DMatrix<C<T>>, dims: &[usize]) -> T {
    match dims.len() {
        1 => spectral_norm(data),
        2 => [None, Some(0), Some(1)]
            .iter()
            .map(|s| spectral_norm(&unfolding(data, dims, *s)))
            .fold(T::lit(f64::INFINITY), |a, b| a.min(b)),
        _ => data.norm(),
    }
}

fn gradient<T: Real>(data: &DMatrix<C<T>>, dims: &[usize], f: &Vector<T>, x: &[Vector<T>], slot: usize) -> Vector<T> {
    let s = data.tr_mul(&f.conjugate());
    let mut h = DVector::zeros(dims[slot]);
    let mut t = vec![0; dims.len()];
    for (c, sc) in s.iter().enumerate() {
        if *sc == czero() {
            continue;
        }
        decode(c, dims, &mut t);
        let mut w = *sc;
        for (l, xl) in x.iter().enumerate() {
            if l != slot {
                w *= xl[t[l]];
            }
        }
        h[t[slot]] += w;
    }
    h.conjugate()
}

fn estimate_leaf<T: Real>(
    data: &DMatrix<C<T>>,
    dims: &[usize],
    geoms: &[&Geometry<T>],
    target: &Geometry<T>,
    budget: Budget,
) -> Leaf<T> {
    let factor = geoms.iter().fold(target.output_factor(), |a, g| a * g.input_factor());
    let euclid = euclidean_upper(data, dims);
    let upper = euclid * factor * (T::one() + T::tol(1e-12));
    if data.norm() == T::zero() {
        return Leaf { lower: T::zero(), upper: T::zero(), witness: dims.iter().map(|&d| DVector::zeros(d)).collect() };
    }
    let all_euclid = matches!(target, Geometry::Euclidean { .. })
        && geoms.iter().all(|g| matches!(g, Geometry::Euclidean { .. }));
    if all_euclid && dims.len() == 1 {
        let (_, _, v) = top_singular(data);
        let lower = target.norm(&(data * &v));
        return Leaf { lower, upper: upper.max(lower), witness: vec![v] };
    }

    let restarts = budget.restarts.max(1);
    let runs: Vec<(T, Vec<Vector<T>>)> = (0..restarts)
        .into_par_iter()
        .map(|r| ascend(data, dims, geoms, target, budget, r))
        .collect();
    let mut best = runs[0].clone();
    for run in runs.into_iter().skip(1) {
        if run.0 > best.0 + T::tol(1e-12) * best.0 {
            best = run;
        }
    }
    Leaf { lower: best.0, upper: upper.max(best.0), witness: best.1 }
}

fn ascend<T: Real>(
    data: &DMatrix<C<T>>,
    dims: &[usize],
    geoms: &[&Geometry<T>],
    target: &Geometry<T>,
    budget: Budget,
    restart: usize,
) -> (T, Vec<Vector<T>>) {
    let mut rng = StreamRng::new(derive_seed(budget.seed, restart as u64), 0);
    let mut x: Vec<Vector<T>> = Vec::with_capacity(dims.len());
    for (s, g) in geoms.iter().enumerate() {
        let dir = if restart == 0 {
            top_singular(&unfolding(data, dims, Some(s))).1
        } else {
            rng.complex_vector(dims[s])
        };
        let mut v = g.maximize(&dir);
        if v.norm() == T::zero() {
            v = g.clamp(crate::algebra::basis_vector(dims[s], 0));
        }
        x.push(v);
    }
    // Fallback functional when the current value is zero.
    let fallback = || target.norming(&top_singular(data).1);
    let (mut value, mut f) = target.norm_and_norming(&kron_eval(data, &x));
    let mut current = value;
    let mut best = (value, x.clone());
    for _ in 0..budget.sweeps.max(1) {
        for s in 0..dims.len() {
            if s > 0 {
                (current, f) = target.norm_and_norming(&kron_eval(data, &x));
            }
            if current == T::zero() {
                f = fallback();
            }
            let g = gradient(data, dims, &f, &x, s);
            if g.norm() > T::zero() {
                x[s] = geoms[s].maximize(&g);
            }
        }
        let (next, f_next) = target.norm_and_norming(&kron_eval(data, &x));
        (current, f) = (next, f_next);
        if next > best.0 {
            best = (next, x.clone());
        }
        let improved = next - value;
        value = next;
        if improved <= T::tol(1e-12) * next {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Algebra, NormMode};
    use crate::scalar::real;
    use std::sync::Arc;

    #[test]
    fn scalar_defect_closed_form() {
        let c1 = Algebra::<f64>::commutative(1).unwrap();
        let phi = LinearMap::identity(&c1).scale(real(2.0));
        let d = defect(&phi, None, None, Budget::default()).unwrap();
        assert!((d.lower - 2.0).abs() < 1e-12 && (d.upper - 2.0).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn rank_one_bilinear_is_exact_in_frobenius_mode() {
        let a = Algebra::<f64>::full_matrix(2).unwrap().with_norm_mode(NormMode::Frobenius).unwrap();
        let mut rng = StreamRng::new(11, 0);
        let (u, v, w) = (rng.complex_vector::<f64>(4), rng.complex_vector::<f64>(4), rng.complex_vector::<f64>(4));
        let k = u.conjugate().kronecker(&v.conjugate());
        let data = &w * k.transpose();
        let psi = Cochain::new(vec![a.clone(), a.clone()], a.clone(), data).unwrap();
        let est = multilinear_norm(&psi, Budget::default()).unwrap();
        let want = u.norm() * v.norm() * w.norm();
        assert!((est.lower - want).abs() < 1e-9 * want);
        assert!((est.upper - want).abs() < 1e-9 * want);
        assert!((evaluate_at(&psi, &est.witness) - est.lower).abs() < 1e-12);
    }

    #[test]
    fn identity_norm_and_zero_map() {
        let a = Algebra::<f64>::full_matrix(2).unwrap();
        let f = a.with_norm_mode(NormMode::Frobenius).unwrap();
        let e = linear_map_norm(&LinearMap::identity(&f), Budget::default()).unwrap();
        assert!((e.lower - 1.0).abs() < 1e-12 && (e.upper - 1.0).abs() < 1e-9);
        let s = linear_map_norm(&LinearMap::identity(&a), Budget::default()).unwrap();
        assert!((s.lower - 1.0).abs() < 1e-9 && s.upper >= 1.0);
        let z = linear_map_norm(&LinearMap::zero(&a, &a), Budget::default()).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
    }

    #[test]
    fn more_restarts_never_lower() {
        let a: Arc<Algebra<f64>> = Algebra::full_matrix(2).unwrap();
        let mut rng = StreamRng::new(3, 0);
        let phi = LinearMap::new(a.clone(), a.clone(), rng.complex_matrix(4, 4)).unwrap();
        let chk = crate::multilinear::check_map(&phi).unwrap();
        let mut prev = 0.0;
        for r in [1, 2, 4, 8, 16] {
            let e = multilinear_norm(&chk, Budget { restarts: r, sweeps: 50, seed: 9 }).unwrap();
            assert!(e.lower >= prev);
            assert!(e.lower <= e.upper);
            prev = e.lower;
        }
    }

    #[test]
    fn arity_three_unsupported() {
        let a: Arc<Algebra<f64>> = Algebra::commutative(2).unwrap();
        let psi = Cochain::zeros(vec![a.clone(); 3], a.clone());
        assert!(matches!(multilinear_norm(&psi, Budget::default()), Err(Error::Unsupported(_))));
        assert!(lower_estimate(&psi, Budget::default()).is_ok());
    }
}
