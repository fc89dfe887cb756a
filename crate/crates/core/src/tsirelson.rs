//! Tsirelson norm on finitely supported vectors, Schreier sets, the binary
//! clone families `M(f)` and their basis projections on truncations.
//!
//! The norm is the Figiel–Johnson implicit equation
//! `‖x‖ = max(‖x‖_∞, ½ sup Σ_j ‖E_j x‖)` over admissible families
//! `k ≤ E₁ < E₂ < … < E_k`, computed by iterating from `‖x‖₀ = ‖x‖_∞`.
//! The value only depends on the moduli of the entries, and for such norms
//! the sets `E_j` may be taken to be intervals, so the iteration runs over
//! contiguous ranges of the support.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::rng::StreamRng;
use crate::Rational;

/// Default support cap for norm evaluation.
pub const SUPPORT_CAP: usize = 16;

/// Nonnegative values the norm is computed in.
pub trait Magnitude:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    /// Round-off allowance when comparing quantities of size `scale`; zero for
    /// exact arithmetic.
    fn slack(scale: &Self) -> Self;
    fn to_f64(&self) -> f64;
}

impl Magnitude for f64 {
    fn slack(scale: &Self) -> Self {
        1e-12 * scale.max(1.0)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Magnitude for f32 {
    fn slack(scale: &Self) -> Self {
        1e-5 * scale.max(1.0)
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Magnitude for Rational {
    fn slack(_: &Self) -> Self {
        Rational::zero()
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Entry type of a Tsirelson vector.
pub trait Coefficient: Clone + Debug + Send + Sync {
    type Mag: Magnitude;
    fn magnitude(&self) -> Self::Mag;
}

impl Coefficient for f64 {
    type Mag = f64;
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Coefficient for f32 {
    type Mag = f32;
    fn magnitude(&self) -> f32 {
        self.abs()
    }
}

impl Coefficient for Rational {
    type Mag = Rational;
    fn magnitude(&self) -> Rational {
        self.abs()
    }
}

impl Coefficient for Complex<f64> {
    type Mag = f64;
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Coefficient for Complex<f32> {
    type Mag = f32;
    fn magnitude(&self) -> f32 {
        self.norm()
    }
}

/// A finitely supported vector `Σ x_j t_j`, indices from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TsirelsonVector<S> {
    entries: BTreeMap<usize, S>,
}

impl<S: Coefficient> TsirelsonVector<S> {
    /// Entries with zero modulus are dropped.
    pub fn new(entries: impl IntoIterator<Item = (usize, S)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, x) in entries {
            if i == 0 {
                return Err(Error::Domain("Tsirelson indices start at 1".into()));
            }
            if x.magnitude() != S::Mag::zero() {
                map.insert(i, x);
            }
        }
        Ok(Self { entries: map })
    }

    /// `x_1, x_2, …` from a dense list.
    pub fn from_dense(xs: &[S]) -> Self {
        Self::new(xs.iter().cloned().enumerate().map(|(i, x)| (i + 1, x))).expect("indices start at 1")
    }

    /// The unit vector `t_n`.
    pub fn basis(n: usize) -> Result<Self>
    where
        S: One,
    {
        Self::new([(n, S::one())])
    }

    pub fn entries(&self) -> &BTreeMap<usize, S> {
        &self.entries
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn max_index(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    pub fn get(&self, i: usize) -> Option<&S> {
        self.entries.get(&i)
    }

    /// Coordinate projection onto the indices in `keep`.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self { entries: self.entries.iter().filter(|(i, _)| keep(**i)).map(|(i, x)| (*i, x.clone())).collect() }
    }

    pub fn sup_norm(&self) -> S::Mag {
        self.entries.values().map(|x| x.magnitude()).fold(S::Mag::zero(), max_of)
    }
}

fn max_of<M: PartialOrd>(a: M, b: M) -> M {
    if b > a {
        b
    } else {
        a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TsirelsonNorm<M> {
    pub value: M,
    /// First level `m` with `‖·‖_m = ‖·‖_{m+1}` on every range of the support.
    pub stabilization_step: usize,
    /// `‖x‖_m` for `m = 0, …, stabilization_step`.
    pub levels: Vec<M>,
}

pub fn tsirelson_norm<S: Coefficient>(x: &TsirelsonVector<S>) -> Result<TsirelsonNorm<S::Mag>> {
    tsirelson_norm_capped(x, SUPPORT_CAP)
}

pub fn tsirelson_norm_capped<S: Coefficient>(x: &TsirelsonVector<S>, cap: usize) -> Result<TsirelsonNorm<S::Mag>> {
    let idx = x.support();
    let n = idx.len();
    if n > cap {
        return precondition("tsirelson norm", format!("support size {n} exceeds the cap {cap}"));
    }
    if n == 0 {
        return Ok(TsirelsonNorm { value: S::Mag::zero(), stabilization_step: 0, levels: vec![S::Mag::zero()] });
    }
    let v: Vec<S::Mag> = x.entries.values().map(|z| z.magnitude()).collect();
    let two = S::Mag::one() + S::Mag::one();

    // cur[a][b]: level-m norm of the restriction to support positions a..=b
    let mut cur = vec![vec![S::Mag::zero(); n]; n];
    for a in 0..n {
        let mut m = S::Mag::zero();
        for b in a..n {
            m = max_of(m, v[b].clone());
            cur[a][b] = m.clone();
        }
    }
    let mut levels = vec![cur[0][n - 1].clone()];
    let mut step = 0;
    loop {
        let mut next = cur.clone();
        for b in 0..n {
            // h[q][j]: best sum of at most j successive blocks inside q..=b
            let mut h = vec![vec![S::Mag::zero(); n + 1]; b + 2];
            for q in (0..=b).rev() {
                for j in 1..=n {
                    let mut best = h[q + 1][j].clone();
                    for e in q..=b {
                        best = max_of(best, cur[q][e].clone() + h[e + 1][j - 1].clone());
                    }
                    h[q][j] = best;
                }
            }
            for a in 0..=b {
                let mut split = S::Mag::zero();
                for p in a..=b {
                    // a family starting at index idx[p] may have up to idx[p] sets
                    let blocks = idx[p].min(b - p + 1);
                    for e in p..=b {
                        split = max_of(split, cur[p][e].clone() + h[e + 1][blocks - 1].clone());
                    }
                }
                next[a][b] = max_of(cur[a][b].clone(), split / two.clone());
            }
        }
        if next == cur {
            break;
        }
        cur = next;
        step += 1;
        levels.push(cur[0][n - 1].clone());
        if step > n + 1 {
            return Err(Error::Domain("Tsirelson iteration failed to stabilize".into()));
        }
    }
    Ok(TsirelsonNorm { value: cur[0][n - 1].clone(), stabilization_step: step, levels })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SchreierCert {
    pub set: Vec<usize>,
    /// `|J| ≤ min J`.
    pub schreier: bool,
    /// `σ(ℕ, J) ≤ 2`, which follows from the Schreier inequality.
    pub sigma_bound: Option<u32>,
}

pub fn schreier_check(set: &BTreeSet<usize>) -> SchreierCert {
    let schreier = set.first().is_some_and(|&m| set.len() <= m);
    SchreierCert { set: set.iter().copied().collect(), schreier, sigma_bound: schreier.then_some(2) }
}

#[derive(Clone, Debug, Serialize)]
pub struct SchreierInequality<M> {
    pub cert: SchreierCert,
    pub norm: M,
    /// `½ Σ_{j∈J} |x_j|`.
    pub half_sum: M,
    /// Whether `‖x‖ ≥ ½ Σ_{j∈J} |x_j|`; vacuous when `J` is not Schreier.
    pub holds: bool,
}

pub fn schreier_inequality<S: Coefficient>(
    x: &TsirelsonVector<S>,
    set: &BTreeSet<usize>,
) -> Result<SchreierInequality<S::Mag>> {
    if set.is_empty() {
        return Err(Error::Domain("the Schreier inequality needs a nonempty set".into()));
    }
    let cert = schreier_check(set);
    let norm = tsirelson_norm(x)?.value;
    let sum = set
        .iter()
        .filter_map(|j| x.get(*j))
        .fold(S::Mag::zero(), |acc, z| acc + z.magnitude());
    let half_sum = sum / (S::Mag::one() + S::Mag::one());
    let holds = !cert.schreier || norm.clone() + S::Mag::slack(&half_sum) >= half_sum;
    Ok(SchreierInequality { cert, norm, half_sum, holds })
}

/// The first `n` terms of `M(f)`: `m₁ = 1`, `m_{j+1} = 2m_j + f(j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CloneFamily {
    /// `f(1), f(2), …` as read; positions past the end count as 0.
    pub word: Vec<bool>,
    pub terms: Vec<u64>,
}

/// Largest supported number of terms (`m_n < 2^n` must fit in `u64`).
pub const MAX_TERMS: usize = 63;

pub fn parse_word(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Domain(format!("binary word contains {c:?}"))),
        })
        .collect()
}

fn bit(word: &[bool], j: usize) -> u64 {
    // j is 1-based
    u64::from(word.get(j - 1).copied().unwrap_or(false))
}

pub fn clone_family(word: &[bool], n: usize) -> Result<CloneFamily> {
    if n == 0 || n > MAX_TERMS {
        return Err(Error::Domain(format!("number of terms {n} outside 1..={MAX_TERMS}")));
    }
    let mut terms = Vec::with_capacity(n);
    terms.push(1u64);
    for j in 1..n {
        terms.push(2 * terms[j - 1] + bit(word, j));
    }
    Ok(CloneFamily { word: word.to_vec(), terms })
}

/// `m_n = 2^{n−1} + Σ_{j<n} f(j) 2^{n−1−j}`.
pub fn closed_form_term(word: &[bool], n: usize) -> Result<u64> {
    if n == 0 || n > MAX_TERMS {
        return Err(Error::Domain(format!("term index {n} outside 1..={MAX_TERMS}")));
    }
    Ok((1..n).fold(1u64 << (n - 1), |acc, j| acc + (bit(word, j) << (n - 1 - j))))
}

impl CloneFamily {
    pub fn contains(&self, m: u64) -> bool {
        self.terms.binary_search(&m).is_ok()
    }

    pub fn last(&self) -> u64 {
        *self.terms.last().expect("families have at least one term")
    }

    /// `m₁ = 1` and `m_{j+1} ≤ 2m_j + 2` for every consecutive pair.
    pub fn satisfies_growth(&self) -> bool {
        self.terms[0] == 1 && self.terms.windows(2).all(|w| w[1] <= 2 * w[0] + 2)
    }

    pub fn matches_closed_form(&self) -> bool {
        self.terms
            .iter()
            .enumerate()
            .all(|(i, &m)| closed_form_term(&self.word, i + 1) == Ok(m))
    }

    /// Every interval `[a, b] ∩ ℕ` inside `[1, m_n]` missing the family is a
    /// Schreier set. Returns the first violating interval, if any.
    ///
    /// Such intervals lie in a gap `(m_j, m_{j+1})`, and `b − a + 1 ≤ a` is
    /// hardest for the longest interval at the left end of the gap, so one
    /// check per gap covers all of them.
    pub fn interval_schreier_violation(&self) -> Option<(u64, u64)> {
        self.terms.windows(2).find_map(|w| {
            let (a, end) = (w[0] + 1, w[1] - 1);
            (end >= a && end - a + 1 > a).then_some((a, 2 * a))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntersectionReport {
    pub count: usize,
    /// Smallest `k` with `f(k) ≠ g(k)`, if it occurs before the horizon.
    pub first_disagreement: Option<usize>,
    /// The words agree on `1..horizon`, so the truncations coincide.
    pub equal_within_horizon: bool,
    pub holds: bool,
}

/// `|M(f) ∩ M(g)|` over the first `horizon` terms of both families.
pub fn intersection_size(f: &[bool], g: &[bool], horizon: usize) -> Result<IntersectionReport> {
    let mf = clone_family(f, horizon)?;
    let mg = clone_family(g, horizon)?;
    let count = mf.terms.iter().filter(|m| mg.contains(**m)).count();
    let first_disagreement = (1..horizon).find(|&j| bit(f, j) != bit(g, j));
    let (equal_within_horizon, holds) = match first_disagreement {
        Some(k) => (false, count == k),
        None => (true, count == horizon),
    };
    Ok(IntersectionReport { count, first_disagreement, equal_within_horizon, holds })
}

/// Coordinate projection `P_M` on the truncation `span{t_1, …, t_N}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisProjection {
    mask: Vec<bool>,
}

impl BasisProjection {
    pub fn new(set: impl Fn(usize) -> bool, n: usize) -> Self {
        Self { mask: (1..=n).map(set).collect() }
    }

    pub fn of_family(family: &CloneFamily, n: usize) -> Self {
        Self::new(|i| family.contains(i as u64), n)
    }

    pub fn identity(n: usize) -> Self {
        Self { mask: vec![true; n] }
    }

    pub fn size(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= 1 && self.mask.get(i - 1).copied().unwrap_or(false)
    }

    pub fn matrix(&self) -> Vec<Vec<Rational>> {
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j && self.mask[i] { Rational::one() } else { Rational::zero() }).collect())
            .collect()
    }

    pub fn apply<S: Coefficient>(&self, x: &TsirelsonVector<S>) -> TsirelsonVector<S> {
        x.restrict(|i| self.contains(i))
    }
}

pub fn matmul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().zip(b).fold(Rational::zero(), |acc, (x, brow)| acc + *x * brow[j]))
                .collect()
        })
        .collect()
}

/// Exact rank by Gaussian elimination.
pub fn rank(m: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = m.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c];
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c] / pivot;
                for k in c..cols {
                    let sub = f * m[r][k];
                    m[i][k] -= sub;
                }
            }
        }
        r += 1;
    }
    r
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyCheck {
    pub word: String,
    pub idempotent: bool,
    /// Largest sampled `‖P_M x‖_T − ‖x‖_T`.
    pub worst_excess: f64,
    pub contractive: bool,
    /// `‖P_M t_m‖ = 1` for every `m ∈ M ∩ [1, N]`.
    pub attains_one: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub left: usize,
    pub right: usize,
    pub rank: usize,
    pub common: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CloneSystemReport {
    pub truncation: usize,
    pub families: Vec<FamilyCheck>,
    pub pairs: Vec<PairCheck>,
    pub passed: bool,
}

/// Checks the clone-system properties of `{P_M}` on `span{t_1, …, t_N}`:
/// exact idempotence, contractivity for the Tsirelson norm on `samples`
/// seeded vectors, and `rank(P_M P_M') = |M ∩ M' ∩ [1, N]|` for all pairs.
pub fn clone_system_verify(families: &[CloneFamily], n: usize, samples: usize, seed: u64) -> Result<CloneSystemReport> {
    let projections: Vec<BasisProjection> = families.iter().map(|f| BasisProjection::of_family(f, n)).collect();
    let support = n.min(12);
    let mut checks = Vec::with_capacity(families.len());
    for (i, (fam, p)) in families.iter().zip(&projections).enumerate() {
        let m = p.matrix();
        let idempotent = matmul(&m, &m) == m;
        let mut rng = StreamRng::new(seed, i as u64);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let x = random_vector(&mut rng, n, support);
            let px = tsirelson_norm(&p.apply(&x))?.value;
            let nx = tsirelson_norm(&x)?.value;
            worst = worst.max(px - nx);
        }
        let attains_one = (1..=n)
            .filter(|&j| p.contains(j))
            .map(|j| TsirelsonVector::<Rational>::basis(j).and_then(|t| tsirelson_norm(&p.apply(&t))))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(|v| v.value == Rational::one());
        checks.push(FamilyCheck {
            word: fam.word.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            idempotent,
            worst_excess: if samples == 0 { 0.0 } else { worst },
            contractive: samples == 0 || worst <= 1e-12,
            attains_one,
        });
    }
    let mut pairs = Vec::new();
    for i in 0..families.len() {
        for j in i + 1..families.len() {
            let prod = matmul(&projections[i].matrix(), &projections[j].matrix());
            let common = (1..=n).filter(|&k| projections[i].contains(k) && projections[j].contains(k)).count();
            pairs.push(PairCheck { left: i, right: j, rank: rank(&prod), common });
        }
    }
    let passed = checks.iter().all(|c| c.idempotent && c.contractive && c.attains_one)
        && pairs.iter().all(|p| p.rank == p.common);
    Ok(CloneSystemReport { truncation: n, families: checks, pairs, passed })
}

/// A seeded real vector on `[1, n]` with at most `max_support` nonzero
/// entries in `[-1, 1]`.
pub fn random_vector(rng: &mut StreamRng, n: usize, max_support: usize) -> TsirelsonVector<f64> {
    let size = 1 + rng.below(max_support.min(n));
    let mut idx: Vec<usize> = (1..=n).collect();
    // partial Fisher–Yates
    for i in 0..size {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    TsirelsonVector::new(idx[..size].iter().map(|&i| (i, 2.0 * rng.uniform() - 1.0))).expect("indices start at 1")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vectors_have_norm_one() {
        for n in 1..=20 {
            assert_eq!(tsirelson_norm(&TsirelsonVector::<Rational>::basis(n).unwrap()).unwrap().value, Rational::one());
        }
    }

    #[test]
    fn two_three_splits() {
        let x = TsirelsonVector::from_dense(&[Rational::zero(), Rational::one(), Rational::one()]);
        let r = tsirelson_norm(&x).unwrap();
        assert_eq!(r.value, Rational::one());
        // t_1 + t_2 cannot be split: only one set is admissible from index 1
        let y = TsirelsonVector::from_dense(&[Rational::one(), Rational::one()]);
        assert_eq!(tsirelson_norm(&y).unwrap().value, Rational::one());
        // 3(t_3 + t_4 + t_5) splits into three singletons: ½·9 > 3
        let z = TsirelsonVector::new([(3, 3.0), (4, 3.0), (5, 3.0)]).unwrap();
        let r = tsirelson_norm(&z).unwrap();
        assert_eq!(r.value, 4.5);
        assert_eq!(r.stabilization_step, 1);
    }

    #[test]
    fn cap_is_enforced() {
        let x = TsirelsonVector::from_dense(&[1.0f64; 17]);
        assert!(matches!(tsirelson_norm(&x), Err(Error::Precondition { .. })));
        assert!(tsirelson_norm_capped(&x, 17).is_ok());
    }

    #[test]
    fn schreier_sets() {
        assert!(schreier_check(&BTreeSet::from([2, 3])).schreier);
        assert!(!schreier_check(&BTreeSet::from([1, 2])).schreier);
    }

    #[test]
    fn families_and_closed_form() {
        let zeros = clone_family(&[], 6).unwrap();
        assert_eq!(zeros.terms, vec![1, 2, 4, 8, 16, 32]);
        let ones = clone_family(&[true; 5], 5).unwrap();
        assert_eq!(ones.terms, vec![1, 3, 7, 15, 31]);
        let f = clone_family(&parse_word("0110").unwrap(), 12).unwrap();
        assert!(f.matches_closed_form() && f.satisfies_growth());
        assert_eq!(f.interval_schreier_violation(), None);
    }

    fn brute_violation(f: &CloneFamily) -> Option<(u64, u64)> {
        for a in 1..=f.last() {
            let mut b = a;
            while b <= f.last() && !f.contains(b) {
                if b - a + 1 > a {
                    return Some((a, b));
                }
                b += 1;
            }
        }
        None
    }

    #[test]
    fn gap_check_matches_exhaustive_scan() {
        for bits in 0u32..64 {
            let word: Vec<bool> = (0..6).map(|i| bits >> i & 1 == 1).collect();
            let f = clone_family(&word, 10).unwrap();
            assert_eq!(f.interval_schreier_violation(), brute_violation(&f));
        }
        let wide = CloneFamily { word: vec![], terms: vec![1, 2, 9, 10] };
        assert_eq!(wide.interval_schreier_violation(), Some((3, 6)));
        assert_eq!(brute_violation(&wide), Some((3, 6)));
    }

    #[test]
    fn first_disagreement() {
        let r = intersection_size(&[false], &[true], 20).unwrap();
        assert_eq!((r.count, r.first_disagreement), (1, Some(1)));
        assert!(r.holds);
        let r = intersection_size(&[true, false], &[true, false], 10).unwrap();
        assert!(r.equal_within_horizon && r.count == 10);
    }

    #[test]
    fn rank_of_products() {
        let f = clone_family(&[false], 20).unwrap();
        let g = clone_family(&[true], 20).unwrap();
        let (p, q) = (BasisProjection::of_family(&f, 20), BasisProjection::of_family(&g, 20));
        assert_eq!(rank(&matmul(&p.matrix(), &q.matrix())), 1);
        assert_eq!(rank(&BasisProjection::identity(5).matrix()), 5);
    }
}
