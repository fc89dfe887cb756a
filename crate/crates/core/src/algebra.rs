//! Finite-dimensional normed algebras given by structure constants.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{coordinates, realize, Geometry};
use crate::multilinear::LinearMap;
use crate::rng::StreamRng;
use crate::scalar::{cone, czero, max_modulus, modulus, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    Spectral,
    Frobenius,
    UnitizationComposite,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::Spectral => "spectral",
            NormMode::Frobenius => "frobenius",
            NormMode::UnitizationComposite => "unitization-composite",
        })
    }
}

type Vector<T> = DVector<C<T>>;
/// Pairs `(c_k, d_k)` of coordinate vectors representing `Σ c_k ⊗ d_k`.
pub(crate) type PairList<T> = Vec<(Vector<T>, Vector<T>)>;

#[derive(Clone, Debug)]
pub struct Algebra<T: Real> {
    dim: usize,
    labels: Vec<String>,
    /// Dense constants, `c[i][j][k]` at `(i * dim + j) * dim + k`.
    structure: Vec<C<T>>,
    /// Nonzero constants as `(i, j, k, c)`.
    terms: Vec<(usize, usize, usize, C<T>)>,
    unit: Option<Vector<T>>,
    norm_mode: NormMode,
    realization: Option<Vec<DMatrix<C<T>>>>,
    geometry: Geometry<T>,
    diagonal_seed: Option<PairList<T>>,
    /// Coordinate blocks when built as a direct sum.
    summands: Vec<Arc<Algebra<T>>>,
    /// The algebra this one is the forced unitization of.
    base: Option<Arc<Algebra<T>>>,
}

impl<T: Real> PartialEq for Algebra<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.norm_mode == other.norm_mode && self.structure == other.structure
    }
}

fn scale_of<T: Real>(structure: &[C<T>]) -> T {
    max_modulus(structure.iter()).max(T::one())
}

impl<T: Real> Algebra<T> {
    /// Builds and validates an algebra from dense structure constants.
    ///
    /// A realization must consist of Frobenius-orthonormal matrices whose
    /// products match the constants. `norm_mode` defaults to spectral when a
    /// realization is given and frobenius otherwise.
    pub fn from_structure(
        labels: Vec<String>,
        structure: Vec<C<T>>,
        unit: Option<Vector<T>>,
        realization: Option<Vec<DMatrix<C<T>>>>,
        norm_mode: Option<NormMode>,
    ) -> Result<Arc<Self>> {
        let dim = labels.len();
        if structure.len() != dim * dim * dim {
            return Err(Error::Shape(format!(
                "structure has {} entries, expected {}",
                structure.len(),
                dim * dim * dim
            )));
        }
        let mode = norm_mode.unwrap_or(if realization.is_some() {
            NormMode::Spectral
        } else {
            NormMode::Frobenius
        });
        let geometry = match (mode, &realization) {
            (NormMode::Spectral, Some(r)) => Geometry::Spectral {
                basis: r.clone(),
                size: r.first().map_or(1, |m| m.nrows()),
            },
            (NormMode::Spectral, None) => {
                return Err(Error::Configuration("spectral norm requires a matrix realization".into()))
            }
            (NormMode::Frobenius, _) => Geometry::Euclidean { dim },
            (NormMode::UnitizationComposite, _) => {
                return Err(Error::Configuration(
                    "unitization-composite norms are built with unitize".into(),
                ))
            }
        };
        let alg = Self::assemble(labels, structure, unit, mode, realization, geometry)?;
        alg.validate()?;
        Ok(Arc::new(alg))
    }

    fn assemble(
        labels: Vec<String>,
        structure: Vec<C<T>>,
        unit: Option<Vector<T>>,
        norm_mode: NormMode,
        realization: Option<Vec<DMatrix<C<T>>>>,
        geometry: Geometry<T>,
    ) -> Result<Self> {
        let dim = labels.len();
        let mut terms = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let c = structure[(i * dim + j) * dim + k];
                    if c != czero() {
                        terms.push((i, j, k, c));
                    }
                }
            }
        }
        if let Some(u) = &unit {
            if u.len() != dim {
                return Err(Error::Shape(format!("unit has length {}, expected {dim}", u.len())));
            }
        }
        Ok(Self {
            dim,
            labels,
            structure,
            terms,
            unit,
            norm_mode,
            realization,
            geometry,
            diagonal_seed: None,
            summands: Vec::new(),
            base: None,
        })
    }

    fn validate(&self) -> Result<()> {
        let tol = T::tol(1e-9) * scale_of(&self.structure) * scale_of(&self.structure);
        let assoc = self.associativity_residual();
        if assoc > tol {
            return Err(Error::Domain(format!("structure constants are not associative (residual {assoc:?})")));
        }
        if let Some(u) = &self.unit {
            let r = self.unit_residual(u);
            if r > T::tol(1e-9) * scale_of(&self.structure) {
                return Err(Error::Domain(format!("unit is not a two-sided identity (residual {r:?})")));
            }
        }
        if let Some(real) = &self.realization {
            if real.len() != self.dim {
                return Err(Error::Shape("realization length differs from dim".into()));
            }
            let size = real.first().map_or(0, |m| m.nrows());
            if real.iter().any(|m| m.nrows() != size || m.ncols() != size) {
                return Err(Error::Shape("realization matrices must be square of one size".into()));
            }
            let tol = T::tol(1e-9);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let g = real[i].dotc(&real[j]);
                    let want = if i == j { cone() } else { czero() };
                    if modulus(g - want) > tol {
                        return Err(Error::Domain("realization is not Frobenius-orthonormal".into()));
                    }
                    let prod = &real[i] * &real[j];
                    let ij = self.mul(&basis_vector(self.dim, i), &basis_vector(self.dim, j));
                    let diff = prod - realize(real, size, &ij);
                    if diff.norm() > tol * scale_of(&self.structure) {
                        return Err(Error::Domain(
                            "realization products do not match structure constants".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest modulus of `(e_i e_j) e_k − e_i (e_j e_k)` over basis triples.
    pub fn associativity_residual(&self) -> T {
        let d = self.dim;
        let mut first: Vec<Vec<(usize, usize, C<T>)>> = vec![Vec::new(); d];
        for &(i, j, k, c) in &self.terms {
            first[i].push((j, k, c));
        }
        let mut acc = vec![czero::<T>(); d * d * d * d];
        let at = |i: usize, j: usize, k: usize, n: usize| ((i * d + j) * d + k) * d + n;
        for &(i, j, m, c1) in &self.terms {
            for &(k, n, c2) in &first[m] {
                acc[at(i, j, k, n)] += c1 * c2;
            }
        }
        for &(j, k, m, c1) in &self.terms {
            for i in 0..d {
                for &(mm, n, c2) in first[i].iter() {
                    if mm == m {
                        acc[at(i, j, k, n)] -= c1 * c2;
                    }
                }
            }
        }
        max_modulus(acc.iter())
    }

    fn unit_residual(&self, u: &Vector<T>) -> T {
        let mut r = T::zero();
        for i in 0..self.dim {
            let e = basis_vector(self.dim, i);
            r = r.max((self.mul(u, &e) - &e).norm()).max((self.mul(&e, u) - &e).norm());
        }
        r
    }

    /// The full matrix algebra `M_k` with the matrix-unit basis, spectral norm.
    pub fn full_matrix(k: usize) -> Result<Arc<Self>> {
        if k == 0 {
            return Err(Error::Domain("matrix size must be at least 1".into()));
        }
        let dim = k * k;
        let idx = |i: usize, j: usize| i * k + j;
        let mut structure = vec![czero(); dim * dim * dim];
        let mut realization = Vec::with_capacity(dim);
        let mut labels = Vec::with_capacity(dim);
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    structure[(idx(i, j) * dim + idx(j, l)) * dim + idx(i, l)] = cone();
                }
                let mut m = DMatrix::from_element(k, k, czero());
                m[(i, j)] = cone();
                realization.push(m);
                labels.push(format!("e{}{}", i + 1, j + 1));
            }
        }
        let mut unit = DVector::zeros(dim);
        for i in 0..k {
            unit[idx(i, i)] = cone();
        }
        let mut alg = Self::assemble(
            labels,
            structure,
            Some(unit),
            NormMode::Spectral,
            Some(realization.clone()),
            Geometry::Spectral { basis: realization, size: k },
        )?;
        // Δ = (1/k) Σ_{i,j} e_ij ⊗ e_ji
        let w = T::one() / T::lit(k as f64);
        let mut seed = Vec::with_capacity(dim);
        for i in 0..k {
            for j in 0..k {
                seed.push((
                    basis_vector(dim, idx(i, j)).map(|z| z.scale(w)),
                    basis_vector(dim, idx(j, i)),
                ));
            }
        }
        alg.diagonal_seed = Some(seed);
        Ok(Arc::new(alg))
    }

    /// `ℂ^k` with pointwise product, realized as diagonal matrices (spectral
    /// norm = sup norm).
    pub fn commutative(k: usize) -> Result<Arc<Self>> {
        if k == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let mut structure = vec![czero(); k * k * k];
        let mut realization = Vec::with_capacity(k);
        for i in 0..k {
            structure[(i * k + i) * k + i] = cone();
            let mut m = DMatrix::from_element(k, k, czero());
            m[(i, i)] = cone();
            realization.push(m);
        }
        let labels = (1..=k).map(|i| format!("e{i}")).collect();
        let mut alg = Self::assemble(
            labels,
            structure,
            Some(DVector::from_element(k, cone())),
            NormMode::Spectral,
            Some(realization.clone()),
            Geometry::Spectral { basis: realization, size: k },
        )?;
        alg.diagonal_seed = Some((0..k).map(|i| (basis_vector(k, i), basis_vector(k, i))).collect());
        Ok(Arc::new(alg))
    }

    /// Copy with a different norm. Switching to spectral needs a realization.
    pub fn with_norm_mode(self: &Arc<Self>, mode: NormMode) -> Result<Arc<Self>> {
        if mode == self.norm_mode {
            return Ok(self.clone());
        }
        let geometry = match mode {
            NormMode::Frobenius => Geometry::Euclidean { dim: self.dim },
            NormMode::Spectral => match &self.realization {
                Some(r) => Geometry::Spectral {
                    basis: r.clone(),
                    size: r.first().map_or(1, |m| m.nrows()),
                },
                None => {
                    return Err(Error::Configuration("spectral norm requires a matrix realization".into()))
                }
            },
            NormMode::UnitizationComposite => {
                return Err(Error::Configuration(
                    "unitization-composite norms are built with unitize".into(),
                ))
            }
        };
        let mut alg = (**self).clone();
        alg.norm_mode = mode;
        alg.geometry = geometry;
        alg.summands = self
            .summands
            .iter()
            .map(|s| s.with_norm_mode(mode))
            .collect::<Result<_>>()?;
        Ok(Arc::new(alg))
    }

    /// Block algebra `A₁ ⊕ A₂` with componentwise product.
    pub fn direct_sum(a: &Arc<Self>, b: &Arc<Self>) -> Result<Arc<Self>> {
        if a.norm_mode != b.norm_mode {
            return Err(Error::Configuration(format!(
                "direct sum of {} and {} algebras",
                a.norm_mode, b.norm_mode
            )));
        }
        if a.norm_mode == NormMode::UnitizationComposite {
            return Err(Error::Unsupported("direct sums of unitizations".into()));
        }
        let (da, db) = (a.dim, b.dim);
        let dim = da + db;
        let mut structure = vec![czero(); dim * dim * dim];
        for &(i, j, k, c) in &a.terms {
            structure[(i * dim + j) * dim + k] = c;
        }
        for &(i, j, k, c) in &b.terms {
            structure[((i + da) * dim + j + da) * dim + k + da] = c;
        }
        let unit = match (&a.unit, &b.unit) {
            (Some(u), Some(v)) => Some(concat(u, v)),
            _ => None,
        };
        let realization = match (&a.realization, &b.realization) {
            (Some(ra), Some(rb)) => {
                let (sa, sb) = (ra[0].nrows(), rb[0].nrows());
                let n = sa + sb;
                let mut out = Vec::with_capacity(dim);
                for m in ra {
                    let mut big = DMatrix::from_element(n, n, czero());
                    big.view_mut((0, 0), (sa, sa)).copy_from(m);
                    out.push(big);
                }
                for m in rb {
                    let mut big = DMatrix::from_element(n, n, czero());
                    big.view_mut((sa, sa), (sb, sb)).copy_from(m);
                    out.push(big);
                }
                Some(out)
            }
            _ => None,
        };
        let geometry = match a.norm_mode {
            NormMode::Spectral => match &realization {
                Some(r) => Geometry::Spectral { basis: r.clone(), size: r[0].nrows() },
                None => return Err(Error::Configuration("spectral summand without realization".into())),
            },
            _ => Geometry::Euclidean { dim },
        };
        let mut labels: Vec<String> = a.labels.iter().map(|l| format!("{l}⊕0")).collect();
        labels.extend(b.labels.iter().map(|l| format!("0⊕{l}")));
        let mut alg = Self::assemble(labels, structure, unit, a.norm_mode, realization, geometry)?;
        if let (Some(sa), Some(sb)) = (&a.diagonal_seed, &b.diagonal_seed) {
            let zero_b = DVector::zeros(db);
            let zero_a = DVector::zeros(da);
            let mut seed: PairList<T> = sa.iter().map(|(c, d)| (concat(c, &zero_b), concat(d, &zero_b))).collect();
            seed.extend(sb.iter().map(|(c, d)| (concat(&zero_a, c), concat(&zero_a, d))));
            alg.diagonal_seed = Some(seed);
        }
        alg.summands = vec![a.clone(), b.clone()];
        Ok(Arc::new(alg))
    }

    /// The quotient of a two-summand direct sum by summand `drop`, with the
    /// quotient map. The quotient norm equals the kept summand's norm.
    pub fn quotient_by_summand(self: &Arc<Self>, drop: usize) -> Result<(Arc<Self>, LinearMap<T>)> {
        if self.summands.len() != 2 || drop > 1 {
            return Err(Error::Domain("quotient needs a two-summand direct sum and index 0 or 1".into()));
        }
        let keep = 1 - drop;
        let q = self.summands[keep].clone();
        let offset = if keep == 0 { 0 } else { self.summands[0].dim };
        let mut m = DMatrix::zeros(q.dim, self.dim);
        for i in 0..q.dim {
            m[(i, offset + i)] = cone();
        }
        let map = LinearMap::new(self.clone(), q.clone(), m)?;
        Ok((q, map))
    }

    /// Forced unitization `ℂ1 ⊕₁ A`; coordinate 0 is the adjoined unit.
    pub fn unitize(self: &Arc<Self>) -> Result<Arc<Self>> {
        let d = self.dim;
        let n = d + 1;
        let mut structure = vec![czero(); n * n * n];
        structure[0] = cone();
        for j in 0..d {
            structure[(j + 1) * n + j + 1] = cone();
            structure[((j + 1) * n) * n + j + 1] = cone();
        }
        for &(i, j, k, c) in &self.terms {
            structure[((i + 1) * n + j + 1) * n + k + 1] = c;
        }
        let mut labels = vec!["1#".to_string()];
        labels.extend(self.labels.iter().cloned());
        let mut alg = Self::assemble(
            labels,
            structure,
            Some(basis_vector(n, 0)),
            NormMode::UnitizationComposite,
            None,
            Geometry::Unitized { base: Box::new(self.geometry.clone()) },
        )?;
        // D₀# ≅ ℂ ⊕ D₀ via (1 − e, e) when D₀ has unit e, so a diagonal of D₀
        // extends by the idempotent f = (1, −e): Δ# = f ⊗ f + Σ (0,c_k) ⊗ (0,d_k).
        if let (Some(seed), Some(e)) = (&self.diagonal_seed, &self.unit) {
            let f = concat(&DVector::from_element(1, cone()), &(-e));
            let zero = DVector::zeros(1);
            let mut out = vec![(f.clone(), f)];
            out.extend(seed.iter().map(|(c, dd)| (concat(&zero, c), concat(&zero, dd))));
            alg.diagonal_seed = Some(out);
        }
        alg.base = Some(self.clone());
        Ok(Arc::new(alg))
    }

    /// Same space and norm with the reversed product.
    pub fn opposite(self: &Arc<Self>) -> Arc<Self> {
        let d = self.dim;
        let mut structure = vec![czero(); d * d * d];
        for &(i, j, k, c) in &self.terms {
            structure[(j * d + i) * d + k] = c;
        }
        let realization = self
            .realization
            .as_ref()
            .map(|r| r.iter().map(|m| m.transpose()).collect::<Vec<_>>());
        let mut alg = Self::assemble(
            self.labels.clone(),
            structure,
            self.unit.clone(),
            self.norm_mode,
            realization,
            self.geometry.transposed(),
        )
        .expect("opposite preserves shapes");
        alg.diagonal_seed = self
            .diagonal_seed
            .as_ref()
            .map(|s| s.iter().map(|(c, dd)| (dd.clone(), c.clone())).collect());
        alg.summands = self.summands.iter().map(|s| s.opposite()).collect();
        alg.base = self.base.as_ref().map(|b| b.opposite());
        Arc::new(alg)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn norm_mode(&self) -> NormMode {
        self.norm_mode
    }

    pub fn geometry(&self) -> &Geometry<T> {
        &self.geometry
    }

    pub fn realization(&self) -> Option<&[DMatrix<C<T>>]> {
        self.realization.as_deref()
    }

    pub fn unit_coords(&self) -> Option<&Vector<T>> {
        self.unit.as_ref()
    }

    pub fn unit(self: &Arc<Self>) -> Result<Element<T>> {
        self.unit
            .clone()
            .map(|u| Element::from_coords_unchecked(self.clone(), u))
            .ok_or_else(|| Error::Domain("algebra has no unit".into()))
    }

    /// Constant `c[i][j][k]`.
    pub fn constant(&self, i: usize, j: usize, k: usize) -> C<T> {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn structure(&self) -> &[C<T>] {
        &self.structure
    }

    pub(crate) fn diagonal_seed(&self) -> Option<&PairList<T>> {
        self.diagonal_seed.as_ref()
    }

    pub fn summands(&self) -> &[Arc<Algebra<T>>] {
        &self.summands
    }

    /// The algebra this is the unitization of, if any.
    pub fn unitization_base(&self) -> Option<&Arc<Algebra<T>>> {
        self.base.as_ref()
    }

    /// Largest structure-constant modulus, at least one.
    pub fn scale(&self) -> T {
        scale_of(&self.structure)
    }

    /// Product of coordinate vectors.
    pub fn mul(&self, a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
        let mut out = DVector::zeros(self.dim);
        for &(i, j, k, c) in &self.terms {
            out[k] += a[i] * b[j] * c;
        }
        out
    }

    /// Matrix of `x ↦ a x`.
    pub fn left_matrix(&self, a: &Vector<T>) -> DMatrix<C<T>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, k, c) in &self.terms {
            m[(k, j)] += a[i] * c;
        }
        m
    }

    /// Matrix of `x ↦ x a`.
    pub fn right_matrix(&self, a: &Vector<T>) -> DMatrix<C<T>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, k, c) in &self.terms {
            m[(k, i)] += a[j] * c;
        }
        m
    }

    pub fn norm_of(&self, x: &Vector<T>) -> T {
        self.geometry.norm(x)
    }

    /// Pointer equality, else equal structure, dimension and norm mode.
    pub fn same_as(&self, other: &Self) -> bool {
        std::ptr::eq(self, other) || self == other
    }

    /// Largest observed `‖ab‖ − ‖a‖‖b‖` over random pairs (nonpositive when
    /// the norm is submultiplicative on the sample).
    pub fn submultiplicativity_gap(&self, samples: usize, seed: u64) -> T {
        let mut rng = StreamRng::new(seed, 0);
        let mut worst = T::lit(f64::NEG_INFINITY);
        for _ in 0..samples {
            let a = rng.complex_vector::<T>(self.dim);
            let b = rng.complex_vector::<T>(self.dim);
            let gap = self.norm_of(&self.mul(&a, &b)) - self.norm_of(&a) * self.norm_of(&b);
            let scale = (self.norm_of(&a) * self.norm_of(&b)).max(T::one());
            worst = worst.max(gap / scale);
        }
        worst
    }

    pub fn to_doc(&self) -> AlgebraDoc {
        let d = self.dim;
        let pair = |z: &C<T>| [z.re.as_f64(), z.im.as_f64()];
        let structure = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|k| pair(&self.constant(i, j, k))).collect())
                    .collect()
            })
            .collect();
        AlgebraDoc {
            dim: d,
            labels: self.labels.clone(),
            structure,
            unit: self.unit.as_ref().map(|u| u.iter().map(pair).collect()),
            norm_mode: self.norm_mode,
            realization: self.realization.as_ref().map(|r| {
                r.iter()
                    .map(|m| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(&m[(i, j)])).collect()).collect())
                    .collect()
            }),
            base: self.base.as_ref().map(|b| Box::new(b.to_doc())),
        }
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<Arc<Self>> {
        let c = |p: &[f64; 2]| C::new(T::lit(p[0]), T::lit(p[1]));
        if doc.labels.len() != doc.dim {
            return Err(Error::Shape("labels length differs from dim".into()));
        }
        if doc.norm_mode == NormMode::UnitizationComposite {
            let base = doc
                .base
                .as_ref()
                .ok_or_else(|| Error::Configuration("unitization-composite document without base".into()))?;
            let base = Self::from_doc(base)?;
            let alg = base.unitize()?;
            let mine: Self = Self::from_doc_plain(doc, c, NormMode::Frobenius)?;
            if mine.structure != alg.structure {
                return Err(Error::Domain("structure is not the unitization of its base".into()));
            }
            return Ok(alg);
        }
        let plain = Self::from_doc_plain(doc, c, doc.norm_mode)?;
        Self::from_structure(plain.labels, plain.structure, plain.unit, plain.realization, Some(doc.norm_mode))
    }

    fn from_doc_plain(doc: &AlgebraDoc, c: impl Fn(&[f64; 2]) -> C<T>, mode: NormMode) -> Result<Self> {
        let d = doc.dim;
        let mut structure = Vec::with_capacity(d * d * d);
        if doc.structure.len() != d || doc.structure.iter().any(|r| r.len() != d || r.iter().any(|s| s.len() != d)) {
            return Err(Error::Shape("structure must be dim × dim × dim".into()));
        }
        for plane in &doc.structure {
            for row in plane {
                structure.extend(row.iter().map(&c));
            }
        }
        let unit = doc.unit.as_ref().map(|u| DVector::from_iterator(u.len(), u.iter().map(&c)));
        let realization = match &doc.realization {
            Some(r) => {
                let mut out = Vec::with_capacity(r.len());
                for m in r {
                    let n = m.len();
                    if m.iter().any(|row| row.len() != n) {
                        return Err(Error::Shape("realization matrices must be square".into()));
                    }
                    out.push(DMatrix::from_fn(n, n, |i, j| c(&m[i][j])));
                }
                Some(out)
            }
            None => None,
        };
        let geometry = Geometry::Euclidean { dim: d };
        Self::assemble(doc.labels.clone(), structure, unit, mode, realization, geometry)
    }
}

/// JSON form of an algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub dim: usize,
    pub labels: Vec<String>,
    pub structure: Vec<Vec<Vec<[f64; 2]>>>,
    pub unit: Option<Vec<[f64; 2]>>,
    pub norm_mode: NormMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<AlgebraDoc>>,
}

pub(crate) fn basis_vector<T: Real>(n: usize, i: usize) -> Vector<T> {
    let mut v = DVector::zeros(n);
    v[i] = cone();
    v
}

pub(crate) fn concat<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    let mut v = DVector::zeros(a.len() + b.len());
    v.rows_mut(0, a.len()).copy_from(a);
    v.rows_mut(a.len(), b.len()).copy_from(b);
    v
}

#[derive(Clone, Debug)]
pub struct Element<T: Real> {
    coords: Vector<T>,
    parent: Arc<Algebra<T>>,
}

impl<T: Real> Element<T> {
    pub fn new(parent: Arc<Algebra<T>>, coords: Vector<T>) -> Result<Self> {
        if coords.len() != parent.dim {
            return Err(Error::Shape(format!(
                "element has {} coordinates, algebra has dim {}",
                coords.len(),
                parent.dim
            )));
        }
        Ok(Self { coords, parent })
    }

    pub(crate) fn from_coords_unchecked(parent: Arc<Algebra<T>>, coords: Vector<T>) -> Self {
        Self { coords, parent }
    }

    pub fn basis(parent: &Arc<Algebra<T>>, i: usize) -> Result<Self> {
        if i >= parent.dim {
            return Err(Error::Domain(format!("basis index {i} out of range")));
        }
        Ok(Self::from_coords_unchecked(parent.clone(), basis_vector(parent.dim, i)))
    }

    /// Basis element by label, e.g. `"e12"`.
    pub fn labeled(parent: &Arc<Algebra<T>>, label: &str) -> Result<Self> {
        let i = parent
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Domain(format!("no basis element labeled {label}")))?;
        Self::basis(parent, i)
    }

    pub fn zero(parent: &Arc<Algebra<T>>) -> Self {
        Self::from_coords_unchecked(parent.clone(), DVector::zeros(parent.dim))
    }

    pub fn coords(&self) -> &Vector<T> {
        &self.coords
    }

    pub fn parent(&self) -> &Arc<Algebra<T>> {
        &self.parent
    }

    fn check_parent(&self, other: &Self) -> Result<()> {
        if self.parent.same_as(&other.parent) {
            Ok(())
        } else {
            Err(Error::ParentMismatch("elements of different algebras".into()))
        }
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_parent(other)?;
        Ok(Self::from_coords_unchecked(self.parent.clone(), self.parent.mul(&self.coords, &other.coords)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_parent(other)?;
        Ok(Self::from_coords_unchecked(self.parent.clone(), &self.coords + &other.coords))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_parent(other)?;
        Ok(Self::from_coords_unchecked(self.parent.clone(), &self.coords - &other.coords))
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self::from_coords_unchecked(self.parent.clone(), self.coords.map(|z| z * s))
    }

    pub fn norm(&self) -> T {
        self.parent.norm_of(&self.coords)
    }

    /// `‖a² − a‖`.
    pub fn idempotent_residual(&self) -> T {
        self.parent.norm_of(&(self.parent.mul(&self.coords, &self.coords) - &self.coords))
    }
}

/// A subalgebra `D` together with its (isometric) embedding into `A`.
#[derive(Clone, Debug)]
pub struct Subalgebra<T: Real> {
    pub algebra: Arc<Algebra<T>>,
    pub embedding: LinearMap<T>,
}

impl<T: Real> Subalgebra<T> {
    pub fn ambient(&self) -> &Arc<Algebra<T>> {
        self.embedding.target()
    }

    /// `A` as a subalgebra of itself.
    pub fn whole(a: &Arc<Algebra<T>>) -> Self {
        Self { algebra: a.clone(), embedding: LinearMap::identity(a) }
    }

    /// Smallest (unital, if flagged) subalgebra containing the generators,
    /// with a Frobenius-orthonormal basis.
    pub fn generated(a: &Arc<Algebra<T>>, generators: &[Element<T>], unital: bool) -> Result<Self> {
        for g in generators {
            if !g.parent.same_as(a) {
                return Err(Error::ParentMismatch("generator outside the ambient algebra".into()));
            }
        }
        let mut cols: Vec<Vector<T>> = generators.iter().map(|g| g.coords.clone()).collect();
        if unital {
            cols.push(
                a.unit
                    .clone()
                    .ok_or_else(|| Error::Domain("unital closure in an algebra without unit".into()))?,
            );
        }
        let mut q = orthonormal_span(a.dim, &cols);
        loop {
            let mut all: Vec<Vector<T>> = (0..q.ncols()).map(|j| q.column(j).into_owned()).collect();
            for i in 0..q.ncols() {
                for j in 0..q.ncols() {
                    all.push(a.mul(&q.column(i).into_owned(), &q.column(j).into_owned()));
                }
            }
            let next = orthonormal_span(a.dim, &all);
            if next.ncols() == q.ncols() {
                break;
            }
            q = next;
        }
        Self::from_frame(a, q, unital)
    }

    /// Subalgebra spanned by the orthonormal columns of `frame` (assumed closed).
    fn from_frame(a: &Arc<Algebra<T>>, frame: DMatrix<C<T>>, unital: bool) -> Result<Self> {
        let d = frame.ncols();
        let mut structure = vec![czero(); d * d * d];
        for i in 0..d {
            for j in 0..d {
                let prod = a.mul(&frame.column(i).into_owned(), &frame.column(j).into_owned());
                let c = frame.ad_mul(&prod);
                for k in 0..d {
                    structure[(i * d + j) * d + k] = c[k];
                }
            }
        }
        let labels: Vec<String> = (0..d).map(|i| format!("d{i}")).collect();
        let realization = a.realization.as_ref().map(|r| {
            let size = r[0].nrows();
            (0..d).map(|j| realize(r, size, &frame.column(j).into_owned())).collect::<Vec<_>>()
        });
        let geometry = a.geometry.restrict(&frame);
        let mut alg = Algebra::assemble(labels, structure, None, a.norm_mode, realization, geometry)?;
        alg.unit = if unital {
            a.unit.as_ref().map(|u| frame.ad_mul(u))
        } else {
            alg.find_unit()
        };
        alg.validate()?;
        let alg = Arc::new(alg);
        let embedding = LinearMap::new(alg.clone(), a.clone(), frame)?;
        Ok(Self { algebra: alg, embedding })
    }

    /// Records that `images` (one per basis vector of `library`) realize a
    /// unital isomorphism `library → D` and transports the library diagonal.
    pub fn record_isomorphism(&self, library: &Arc<Algebra<T>>, images: &[Element<T>]) -> Result<Self> {
        if images.len() != library.dim || library.dim != self.algebra.dim {
            return Err(Error::Shape("isomorphism needs one image per basis vector of equal dimension".into()));
        }
        let mut m = DMatrix::zeros(self.algebra.dim, library.dim);
        for (j, im) in images.iter().enumerate() {
            if !im.parent.same_as(&self.algebra) {
                return Err(Error::ParentMismatch("isomorphism image outside the subalgebra".into()));
            }
            m.set_column(j, &im.coords);
        }
        let iso = LinearMap::new(library.clone(), self.algebra.clone(), m)?;
        let tol = T::tol(1e-9) * library.scale();
        if crate::multilinear::check_map(&iso)?.max_abs() > tol {
            return Err(Error::Domain("recorded map is not multiplicative".into()));
        }
        match (library.unit_coords(), self.algebra.unit_coords()) {
            (Some(u), Some(v)) if (iso.apply(u) - v).norm() <= tol => {}
            _ => return Err(Error::Domain("recorded map is not unital".into())),
        }
        if iso.matrix().clone().rank(T::tol(1e-9)) != library.dim {
            return Err(Error::Domain("recorded map is not injective".into()));
        }
        let seed = library.diagonal_seed.as_ref().ok_or(Error::NoLibraryDiagonal)?;
        let mut alg = (*self.algebra).clone();
        alg.diagonal_seed = Some(seed.iter().map(|(c, d)| (iso.apply(c), iso.apply(d))).collect());
        let alg = Arc::new(alg);
        let embedding = LinearMap::new(alg.clone(), self.ambient().clone(), self.embedding.matrix().clone())?;
        Ok(Self { algebra: alg, embedding })
    }

    /// The diagonal matrices in `M_k`, carrying the library diagonal of `ℂ^k`.
    pub fn diagonal_of_full_matrix(a: &Arc<Algebra<T>>, k: usize) -> Result<Self> {
        if a.dim != k * k {
            return Err(Error::Shape(format!("expected M_{k}")));
        }
        let gens: Vec<Element<T>> = (0..k).map(|i| Element::basis(a, i * k + i)).collect::<Result<_>>()?;
        let sub = Self::generated(a, &gens, true)?;
        let lib = Algebra::commutative(k)?;
        let images: Vec<Element<T>> = (0..k)
            .map(|i| Element::from_coords_unchecked(sub.algebra.clone(), sub.embedding.matrix().ad_mul(&basis_vector(k * k, i * k + i))))
            .collect();
        sub.record_isomorphism(&lib, &images)
    }

    /// `D₀#` inside `A#` for `A# = unitize(A)`: `(λ, d) ↦ (λ, E d)`.
    pub fn unitize(&self, ambient_sharp: &Arc<Algebra<T>>) -> Result<Self> {
        match ambient_sharp.unitization_base() {
            Some(b) if b.same_as(self.ambient()) => {}
            _ => return Err(Error::ParentMismatch("ambient is not the unitization of this subalgebra's ambient".into())),
        }
        let d_sharp = self.algebra.unitize()?;
        let (n, d) = (ambient_sharp.dim, d_sharp.dim);
        let mut m = DMatrix::zeros(n, d);
        m[(0, 0)] = cone();
        m.view_mut((1, 1), (n - 1, d - 1)).copy_from(self.embedding.matrix());
        let embedding = LinearMap::new(d_sharp.clone(), ambient_sharp.clone(), m)?;
        Ok(Self { algebra: d_sharp, embedding })
    }

    /// `D^op ⊂ A^op` with the same embedding matrix.
    pub fn opposite(&self, ambient_op: &Arc<Algebra<T>>) -> Result<Self> {
        let alg = self.algebra.opposite();
        let embedding = LinearMap::new(alg.clone(), ambient_op.clone(), self.embedding.matrix().clone())?;
        Ok(Self { algebra: alg, embedding })
    }
}

impl<T: Real> Algebra<T> {
    /// Solves for a two-sided identity; `None` if there is none.
    fn find_unit(&self) -> Option<Vector<T>> {
        let d = self.dim;
        if d == 0 {
            return None;
        }
        // Σ_j u_j e_j e_i = e_i and Σ_j u_j e_i e_j = e_i for every i.
        let mut m = DMatrix::zeros(2 * d * d, d);
        let mut rhs = DVector::zeros(2 * d * d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    m[(i * d + k, j)] = self.constant(j, i, k);
                    m[(d * d + i * d + k, j)] = self.constant(i, j, k);
                }
            }
            rhs[i * d + i] = cone();
            rhs[d * d + i * d + i] = cone();
        }
        let svd = m.clone().svd(true, true);
        let u = svd.solve(&rhs, T::tol(1e-12)).ok()?;
        let res = (&m * &u - &rhs).norm();
        if res <= T::tol(1e-9) * self.scale() {
            Some(u)
        } else {
            None
        }
    }
}

/// Orthonormal basis of the span of `cols` via SVD; singular values below
/// `1e-9 ×` the largest are dropped.
pub(crate) fn orthonormal_span<T: Real>(n: usize, cols: &[Vector<T>]) -> DMatrix<C<T>> {
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let m = DMatrix::from_columns(cols);
    let svd = m.svd(true, false);
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
    if smax == T::zero() {
        return DMatrix::zeros(n, 0);
    }
    let cut = smax * T::tol(1e-9);
    let u = svd.u.expect("u requested");
    let mut keep: Vec<(usize, T)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(i, &s)| (i, s))
        .collect();
    keep.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut q = DMatrix::from_columns(&keep.iter().map(|(i, _)| u.column(*i).into_owned()).collect::<Vec<_>>());
    // Fix the phase of each column (first entry of largest modulus made real
    // positive) so bases do not depend on LAPACK-style sign conventions.
    for j in 0..q.ncols() {
        let (_, z) = q.column(j).iter().enumerate().fold((0, czero::<T>()), |(bi, bz), (i, &z)| {
            if modulus(z) > modulus(bz) * (T::one() + T::tol(1e-9)) {
                (i, z)
            } else {
                (bi, bz)
            }
        });
        let a = modulus(z);
        if a > T::zero() {
            let phase = z.conj().unscale(a);
            q.column_mut(j).apply(|x| *x *= phase);
        }
    }
    q
}

/// Coordinates of a realized matrix (for algebras with a realization).
pub fn coords_of_matrix<T: Real>(a: &Algebra<T>, m: &DMatrix<C<T>>) -> Result<Vector<T>> {
    let r = a
        .realization
        .as_ref()
        .ok_or_else(|| Error::Configuration("algebra has no matrix realization".into()))?;
    Ok(coordinates(r, m))
}

/// Matrix realizing an element.
pub fn matrix_of<T: Real>(a: &Algebra<T>, x: &Vector<T>) -> Result<DMatrix<C<T>>> {
    let r = a
        .realization
        .as_ref()
        .ok_or_else(|| Error::Configuration("algebra has no matrix realization".into()))?;
    Ok(realize(r, r[0].nrows(), x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::real;

    fn el(a: &Arc<Algebra<f64>>, label: &str) -> Element<f64> {
        Element::labeled(a, label).unwrap()
    }

    #[test]
    fn matrix_units_multiply() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let p = el(&m2, "e12").multiply(&el(&m2, "e21")).unwrap();
        assert_eq!(p.coords(), el(&m2, "e11").coords());
        assert_eq!(m2.unit_coords().unwrap().iter().filter(|z| **z == cone()).count(), 2);
        assert!((el(&m2, "e11").norm() - 1.0).abs() < 1e-12);
        let m1 = Algebra::<f64>::full_matrix(1).unwrap();
        assert_eq!(m1.dim(), 1);
        assert!(Algebra::<f64>::full_matrix(0).is_err());
    }

    #[test]
    fn commutative_product_is_pointwise() {
        let c2 = Algebra::<f64>::commutative(2).unwrap();
        let a = Element::new(c2.clone(), DVector::from_vec(vec![real(1.0), real(2.0)])).unwrap();
        let b = Element::new(c2.clone(), DVector::from_vec(vec![real(3.0), real(4.0)])).unwrap();
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.coords()[0], real(3.0));
        assert_eq!(p.coords()[1], real(8.0));
    }

    #[test]
    fn frobenius_identity_norm() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap().with_norm_mode(NormMode::Frobenius).unwrap();
        assert!((m2.unit().unwrap().norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn opposite_reverses() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let op = m2.opposite();
        let p = el(&op, "e12").multiply(&el(&op, "e21")).unwrap();
        assert_eq!(p.coords(), el(&op, "e22").coords());
        assert_eq!(op.opposite().structure(), m2.structure());
        let c3 = Algebra::<f64>::commutative(3).unwrap();
        assert!(c3.opposite().same_as(&c3));
    }

    #[test]
    fn unitization_product_and_norm() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let s = m2.unitize().unwrap();
        assert_eq!(s.dim(), 5);
        assert_eq!(s.unit_coords().unwrap(), &basis_vector(5, 0));
        let a = Element::basis(&s, 2).unwrap(); // (0, e12)
        let b = Element::basis(&s, 3).unwrap(); // (0, e21)
        assert_eq!(a.multiply(&b).unwrap().coords(), &basis_vector(5, 1));
        let mut x = DVector::zeros(5);
        x[0] = real(2.0);
        x[1] = real(0.5);
        assert!((s.norm_of(&x) - 2.5).abs() < 1e-12);
        assert!(s.submultiplicativity_gap(200, 5) <= 1e-9);
    }

    #[test]
    fn generated_subalgebras() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let one = Subalgebra::generated(&m2, &[m2.unit().unwrap()], false).unwrap();
        assert_eq!(one.algebra.dim(), 1);
        let diag = Subalgebra::generated(&m2, &[el(&m2, "e11")], true).unwrap();
        assert_eq!(diag.algebra.dim(), 2);
        let all = Subalgebra::generated(&m2, &[el(&m2, "e12"), el(&m2, "e21")], false).unwrap();
        assert_eq!(all.algebra.dim(), 4);
        assert!(all.algebra.unit_coords().is_some());
        let nil = Subalgebra::generated(&m2, &[el(&m2, "e12")], false).unwrap();
        assert_eq!(nil.algebra.dim(), 1);
        assert!(nil.algebra.unit_coords().is_none());
    }

    #[test]
    fn direct_sum_and_quotient() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let c1 = Algebra::<f64>::commutative(1).unwrap();
        let s = Algebra::direct_sum(&m2, &c1).unwrap();
        assert_eq!(s.dim(), 5);
        let a = Element::basis(&s, 0).unwrap();
        let b = Element::basis(&s, 4).unwrap();
        assert!(a.multiply(&b).unwrap().coords().iter().all(|z| *z == czero()));
        let (q, map) = s.quotient_by_summand(1).unwrap();
        assert_eq!(q.dim(), 4);
        assert!(crate::multilinear::check_map(&map).unwrap().max_abs() < 1e-14);
        let frob = Algebra::<f64>::commutative(1).unwrap().with_norm_mode(NormMode::Frobenius).unwrap();
        assert!(matches!(Algebra::direct_sum(&m2, &frob), Err(Error::Configuration(_))));
    }

    #[test]
    fn doc_round_trip() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let doc = m2.to_doc();
        let json = serde_json::to_string(&doc).unwrap();
        let back: AlgebraDoc = serde_json::from_str(&json).unwrap();
        let again = Algebra::<f64>::from_doc(&back).unwrap();
        assert!(again.same_as(&m2));
        let s = m2.unitize().unwrap();
        let again = Algebra::<f64>::from_doc(&s.to_doc()).unwrap();
        assert!(again.same_as(&s));
    }

    #[test]
    fn rejects_non_associative_constants() {
        // e0 e0 = e1, e1 e0 = e0, everything else zero: (e0e0)e0 = e0 but e0(e0e0) = 0.
        let mut s = vec![czero::<f64>(); 8];
        s[1] = cone();
        s[(2) * 2] = cone();
        let r = Algebra::from_structure(vec!["a".into(), "b".into()], s, None, None, None);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
