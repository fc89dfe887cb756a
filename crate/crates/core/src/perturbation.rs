//! Checkers for the elementary quantitative lemmas about approximately
//! multiplicative maps: perturbed defects, absorption, equivalent idempotents,
//! the norm dichotomy, separation of orthogonal idempotents and the
//! Murray–von Neumann chain on a finite quotient model.
//!
//! Every checker refuses (returns [`Error::Precondition`]) when a hypothesis
//! fails. Defect hypotheses are compared against certified upper estimates;
//! conclusions compare certified lower estimates of the left side.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::algebra::{matrix_of, Algebra, Element, NormMode, Subalgebra};
use crate::error::{precondition, Error, Result};
use crate::multilinear::{defect, linear_map_norm, Budget, DefectEstimate, Interval, LinearMap};
use crate::rng::derive_seed;
use crate::scalar::{top_singular, Real};
use crate::stabilizer::not_falsified;
use crate::Rational;

/// One checked inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct Certificate<T: Real> {
    pub lemma: &'static str,
    pub lhs: Interval<T>,
    pub rhs: Interval<T>,
    pub passed: bool,
}

impl<T: Real> Certificate<T> {
    fn new(lemma: &'static str, lhs: Interval<T>, rhs: Interval<T>) -> Self {
        let passed = not_falsified(lhs.lo, rhs.hi, rhs.hi);
        Self { lemma, lhs, rhs, passed }
    }
}

/// Which side the absorbing element multiplies from, or which slot of the
/// defect is restricted to the subalgebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Roots of `u = u² + c` and the bound `3c/2` on the smaller one.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(bound = "")]
pub struct SmallRoot<T: Real> {
    #[serde(serialize_with = "ser_real")]
    pub u1: T,
    #[serde(serialize_with = "ser_real")]
    pub u2: T,
    #[serde(serialize_with = "ser_real")]
    pub bound: T,
    pub holds: bool,
}

fn ser_real<T: Real, S: serde::Serializer>(x: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(x.as_f64())
}

/// If `x ≤ x² + c` with `0 ≤ c ≤ 2/9` then `min(x, 1 − x) ≤ 3c/2 ≤ 1/3`.
pub fn kicsi_nagy<T: Real>(c: T) -> Result<SmallRoot<T>> {
    let two_ninths = T::lit(2.0) / T::lit(9.0);
    if !(c >= T::zero() && c <= two_ninths) {
        return Err(Error::Domain(format!("c = {} is outside [0, 2/9]", c.as_f64())));
    }
    let s = (T::one() - T::lit(4.0) * c).sqrt();
    // 2c / (1 + s) avoids the cancellation in (1 − s) / 2 for small c
    let u1 = T::lit(2.0) * c / (T::one() + s);
    let u2 = T::one() - u1;
    let bound = T::lit(1.5) * c;
    let third = T::one() / T::lit(3.0);
    let slack = T::tol(1e-12);
    Ok(SmallRoot { u1, u2, bound, holds: u1 <= bound + slack && bound <= third + slack })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Small,
    Large,
    /// Strictly between the thresholds: the dichotomy is falsified.
    Neither,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct DichotomyVerdict<T: Real> {
    #[serde(serialize_with = "ser_real")]
    pub value: T,
    pub branch: Branch,
    /// `(3/2)‖p‖²δ`.
    #[serde(serialize_with = "ser_real")]
    pub small_threshold: T,
    /// `1 − (3/2)‖p‖²δ`.
    #[serde(serialize_with = "ser_real")]
    pub large_threshold: T,
}

impl<T: Real> DichotomyVerdict<T> {
    pub fn passed(&self) -> bool {
        self.branch != Branch::Neither
    }
}

/// The dichotomy thresholds for `δ‖p‖²` in exact arithmetic.
pub fn dichotomy_thresholds_exact(delta_p2: Rational) -> Result<(Rational, Rational)> {
    if delta_p2 < Rational::zero() || delta_p2 > Rational::new(2, 9) {
        return Err(Error::Domain(format!("δ‖p‖² = {delta_p2} is outside [0, 2/9]")));
    }
    let small = Rational::new(3, 2) * delta_p2;
    Ok((small, Rational::one() - small))
}

fn slack<T: Real>(scale: T) -> T {
    T::tol(1e-9) * scale.max(T::one())
}

fn same_source<T: Real>(psi: &LinearMap<T>, x: &Element<T>) -> Result<()> {
    if psi.source().same_as(x.parent()) {
        Ok(())
    } else {
        Err(Error::ParentMismatch("element is not in the source of the map".into()))
    }
}

fn nonnegative<T: Real>(check: &'static str, eta: T) -> Result<()> {
    if eta >= T::zero() {
        Ok(())
    } else {
        precondition(check, format!("η = {} is negative", eta.as_f64()))
    }
}

/// Certifies `def(ψ) ≤ η` with the upper estimate.
fn require_defect<T: Real>(check: &'static str, psi: &LinearMap<T>, eta: T, budget: Budget) -> Result<DefectEstimate<T>> {
    nonnegative(check, eta)?;
    let d = defect(psi, None, None, budget)?;
    if d.upper > eta + T::tol(1e-12) * eta.max(T::tol(1e-12)) {
        return precondition(
            check,
            format!("def(ψ) ≤ {:.6e} is not certified below η = {:.6e}", d.upper.as_f64(), eta.as_f64()),
        );
    }
    Ok(d)
}

fn idempotent<T: Real>(check: &'static str, name: &str, p: &Element<T>) -> Result<()> {
    let r = p.idempotent_residual();
    if r > slack(p.norm() * p.norm()) {
        return precondition(check, format!("‖{name}² − {name}‖ = {:.3e} > 1e-9", r.as_f64()));
    }
    Ok(())
}

fn image_norm<T: Real>(psi: &LinearMap<T>, x: &Element<T>) -> T {
    psi.target().norm_of(&psi.apply(x.coords()))
}

/// Either `‖ψ(p)‖ ≤ (3/2)‖p‖²δ` or `‖ψ(p)‖ ≥ 1 − (3/2)‖p‖²δ`.
pub fn norm_dichotomy_check<T: Real>(
    psi: &LinearMap<T>,
    p: &Element<T>,
    delta: T,
    budget: Budget,
) -> Result<DichotomyVerdict<T>> {
    const CHECK: &str = "norm dichotomy";
    same_source(psi, p)?;
    idempotent(CHECK, "p", p)?;
    let p2 = p.norm() * p.norm();
    if delta * p2 > T::lit(2.0) / T::lit(9.0) {
        return precondition(CHECK, format!("δ‖p‖² = {:.6e} > 2/9", (delta * p2).as_f64()));
    }
    require_defect(CHECK, psi, delta, budget)?;
    let value = image_norm(psi, p);
    let small_threshold = T::lit(1.5) * p2 * delta;
    let large_threshold = T::one() - small_threshold;
    let s = slack(value);
    let branch = if value <= small_threshold + s {
        Branch::Small
    } else if value + s >= large_threshold {
        Branch::Large
    } else {
        Branch::Neither
    };
    Ok(DichotomyVerdict { value, branch, small_threshold, large_threshold })
}

/// `ab = b` and `‖ψ(a)‖ ≤ 1/3` give `‖ψ(b)‖ ≤ (3/2)η‖a‖‖b‖`; with
/// [`Side::Right`] the hypothesis is `ba = b` instead.
pub fn absorption_check<T: Real>(
    psi: &LinearMap<T>,
    a: &Element<T>,
    b: &Element<T>,
    side: Side,
    eta: T,
    budget: Budget,
) -> Result<Certificate<T>> {
    const CHECK: &str = "absorption";
    same_source(psi, a)?;
    same_source(psi, b)?;
    let prod = match side {
        Side::Left => a.multiply(b)?,
        Side::Right => b.multiply(a)?,
    };
    let r = prod.sub(b)?.norm();
    if r > slack(a.norm() * b.norm()) {
        let eq = if side == Side::Left { "ab = b" } else { "ba = b" };
        return precondition(CHECK, format!("{eq} fails by {:.3e}", r.as_f64()));
    }
    let pa = image_norm(psi, a);
    if pa > T::one() / T::lit(3.0) + slack(T::one()) {
        return precondition(CHECK, format!("‖ψ(a)‖ = {:.6e} > 1/3", pa.as_f64()));
    }
    require_defect(CHECK, psi, eta, budget)?;
    let lemma = match side {
        Side::Left => "absorption by a left unit",
        Side::Right => "absorption by a right unit",
    };
    Ok(Certificate::new(
        lemma,
        Interval::point(image_norm(psi, b)),
        Interval::point(T::lit(1.5) * eta * a.norm() * b.norm()),
    ))
}

/// `uv`, `vu` idempotent, `η‖u‖³‖v‖³ ≤ 2/9` and `‖ψ(uv)‖ ≤ 1/3` give
/// `‖ψ(vu)‖ ≤ 1/3`.
pub fn equivalent_projection_check<T: Real>(
    psi: &LinearMap<T>,
    u: &Element<T>,
    v: &Element<T>,
    eta: T,
    budget: Budget,
) -> Result<Certificate<T>> {
    const CHECK: &str = "equivalent idempotents";
    same_source(psi, u)?;
    same_source(psi, v)?;
    nonnegative(CHECK, eta)?;
    let uv = u.multiply(v)?;
    let vu = v.multiply(u)?;
    idempotent(CHECK, "uv", &uv)?;
    idempotent(CHECK, "vu", &vu)?;
    let size = (u.norm() * v.norm()).powi(3);
    if eta * size > T::lit(2.0) / T::lit(9.0) {
        return precondition(CHECK, format!("η‖u‖³‖v‖³ = {:.6e} > 2/9", (eta * size).as_f64()));
    }
    let puv = image_norm(psi, &uv);
    let third = T::one() / T::lit(3.0);
    if puv > third + slack(T::one()) {
        return precondition(CHECK, format!("‖ψ(uv)‖ = {:.6e} > 1/3", puv.as_f64()));
    }
    require_defect(CHECK, psi, eta, budget)?;
    Ok(Certificate::new(CHECK, Interval::point(image_norm(psi, &vu)), Interval::point(third)))
}

/// `‖ψ(1)‖ ≤ 1/3` gives `‖ψ‖ ≤ 3η/2`.
pub fn small_on_identity<T: Real>(psi: &LinearMap<T>, eta: T, budget: Budget) -> Result<Certificate<T>> {
    const CHECK: &str = "small on the identity";
    let one = psi.source().unit().map_err(|_| Error::Domain("source algebra has no unit".into()))?;
    let p1 = image_norm(psi, &one);
    if p1 > T::one() / T::lit(3.0) + slack(T::one()) {
        return precondition(CHECK, format!("‖ψ(1)‖ = {:.6e} > 1/3", p1.as_f64()));
    }
    require_defect(CHECK, psi, eta, budget.with_seed(derive_seed(budget.seed, 1)))?;
    let norm = linear_map_norm(psi, budget.with_seed(derive_seed(budget.seed, 2)))?;
    Ok(Certificate::new(CHECK, norm.interval(), Interval::point(T::lit(1.5) * eta)))
}

/// `def(θ) ≤ def(ψ) + 2‖θ − ψ‖(1 + ‖ψ‖)` whenever `‖θ − ψ‖ ≤ 1`.
pub fn perturbed_defect_check<T: Real>(
    psi: &LinearMap<T>,
    theta: &LinearMap<T>,
    budget: Budget,
) -> Result<Certificate<T>> {
    const CHECK: &str = "defect of a perturbation";
    let b = |l: u64| budget.with_seed(derive_seed(budget.seed, l));
    let gap = linear_map_norm(&theta.sub(psi)?, b(1))?;
    if gap.lower > T::one() {
        return precondition(CHECK, format!("‖θ − ψ‖ ≥ {:.6e} > 1", gap.lower.as_f64()));
    }
    let def_theta = defect(theta, None, None, b(2))?;
    let def_psi = defect(psi, None, None, b(3))?;
    let norm_psi = linear_map_norm(psi, b(4))?;
    let rhs = def_psi.upper + T::lit(2.0) * gap.upper * (T::one() + norm_psi.upper);
    Ok(Certificate::new(CHECK, def_theta.interval(), Interval::point(rhs)))
}

/// `def_{D×A}(φ + γ) ≤ def_{D×A}(φ) + (2‖φ‖ + 1)‖γ‖ + ‖γ‖²`, and the same with
/// `A×D` when `side` is [`Side::Right`].
pub fn relative_perturbed_defect_check<T: Real>(
    phi: &LinearMap<T>,
    gamma: &LinearMap<T>,
    sub: &Subalgebra<T>,
    side: Side,
    budget: Budget,
) -> Result<Certificate<T>> {
    let b = |l: u64| budget.with_seed(derive_seed(budget.seed, l));
    let (left, right, lemma) = match side {
        Side::Left => (Some(sub), None, "relative defect of a perturbation (D×A)"),
        Side::Right => (None, Some(sub), "relative defect of a perturbation (A×D)"),
    };
    let sum = phi.add(gamma)?;
    let lhs = defect(&sum, left, right, b(1))?;
    let base = defect(phi, left, right, b(2))?;
    let n_phi = linear_map_norm(phi, b(3))?.upper;
    let n_gamma = linear_map_norm(gamma, b(4))?.upper;
    let rhs = base.upper + (T::lit(2.0) * n_phi + T::one()) * n_gamma + n_gamma * n_gamma;
    Ok(Certificate::new(lemma, lhs.interval(), Interval::point(rhs)))
}

/// `1/(6C³)`.
pub fn clone_constant<T: Real>(c: T) -> Result<T> {
    if !(c >= T::one()) {
        return Err(Error::Domain(format!("factorization constant C = {} is below 1", c.as_f64())));
    }
    Ok(T::one() / (T::lit(6.0) * c * c * c))
}

/// Result of scanning a finite family of orthogonal idempotents.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct FamilyScan<T: Real> {
    /// Indices with `‖ψ(p)‖ ≤ 2ηL²`.
    pub survivors: Vec<usize>,
    /// Indices with `‖ψ(p)‖ > c`.
    pub large: Vec<usize>,
    #[serde(serialize_with = "ser_real")]
    pub threshold: T,
    #[serde(serialize_with = "ser_real")]
    pub c: T,
    /// Norms `‖ψ(p)‖` for the whole family.
    pub images: Vec<f64>,
    /// Smallest `‖ψ(p)‖·‖y_p − y_r‖ − (c − 2ηL²)` over ordered large pairs.
    pub min_separation_margin: Option<f64>,
    /// Smallest `‖ψ(p)y_p‖ − (c − ηL²)` and largest `‖ψ(p)y_r‖ − ηL²`.
    pub min_self_margin: Option<f64>,
    pub max_cross_excess: Option<f64>,
    pub dim_x: usize,
    /// `(1 + 2R/s)^{2 dim X}` with `R = ‖ψ‖L`, `s = (c − 2ηL²)/(‖ψ‖L)`.
    pub packing_bound: f64,
    pub passed: bool,
}

/// Finite-scale separation lemma. The target must be a spectral-norm matrix
/// algebra acting on `X = ℂ^n`; `c > 2ηL²` selects the large set.
pub fn orthogonal_family_scan<T: Real>(
    psi: &LinearMap<T>,
    family: &[Element<T>],
    l: T,
    eta: T,
    c: T,
    budget: Budget,
) -> Result<FamilyScan<T>> {
    const CHECK: &str = "separation of orthogonal idempotents";
    let target = psi.target();
    if target.norm_mode() != NormMode::Spectral || target.realization().is_none() {
        return Err(Error::Unsupported("family scan needs a spectral-norm target with a realization".into()));
    }
    if l < T::one() {
        return precondition(CHECK, format!("L = {} < 1", l.as_f64()));
    }
    for (i, p) in family.iter().enumerate() {
        same_source(psi, p)?;
        idempotent(CHECK, "p", p)?;
        if p.norm() > l + slack(l) {
            return precondition(CHECK, format!("‖p_{i}‖ = {:.6e} > L", p.norm().as_f64()));
        }
        for (j, q) in family.iter().enumerate().skip(i + 1) {
            let r = p.multiply(q)?.norm().max(q.multiply(p)?.norm());
            if r > slack(l * l) {
                return precondition(CHECK, format!("p_{i} and p_{j} are not orthogonal ({:.3e})", r.as_f64()));
            }
        }
    }
    let eta_l2 = eta * l * l;
    let threshold = T::lit(2.0) * eta_l2;
    if !(c > threshold) {
        return precondition(CHECK, format!("c = {:.6e} is not above 2ηL² = {:.6e}", c.as_f64(), threshold.as_f64()));
    }
    require_defect(CHECK, psi, eta, budget.with_seed(derive_seed(budget.seed, 1)))?;
    let norm_psi = linear_map_norm(psi, budget.with_seed(derive_seed(budget.seed, 2)))?.upper;

    let mats = family
        .iter()
        .map(|p| matrix_of(target, &psi.apply(p.coords())))
        .collect::<Result<Vec<_>>>()?;
    let dim_x = mats.first().map_or(target.realization().map_or(0, |r| r[0].nrows()), |m| m.nrows());
    let images: Vec<T> = mats.iter().map(|m| top_singular(m).0).collect();
    let survivors = (0..family.len()).filter(|&i| images[i] <= threshold + slack(T::one())).collect();
    let large: Vec<usize> = (0..family.len()).filter(|&i| images[i] > c).collect();

    // y_p = ψ(p) x_p with x_p a top right singular vector, so ‖y_p‖ = ‖ψ(p)‖ > c.
    let ys: Vec<_> = large
        .iter()
        .map(|&i| {
            let (s, u, _) = top_singular(&mats[i]);
            u.scale(s)
        })
        .collect();
    let gap = c - threshold;
    let mut sep: Option<T> = None;
    let mut self_margin: Option<T> = None;
    let mut cross: Option<T> = None;
    let fold_min = |acc: Option<T>, x: T| Some(acc.map_or(x, |a: T| a.min(x)));
    let fold_max = |acc: Option<T>, x: T| Some(acc.map_or(x, |a: T| a.max(x)));
    for (a, &i) in large.iter().enumerate() {
        self_margin = fold_min(self_margin, (&mats[i] * &ys[a]).norm() - (c - eta_l2));
        for (b, _) in large.iter().enumerate() {
            if a == b {
                continue;
            }
            cross = fold_max(cross, (&mats[i] * &ys[b]).norm() - eta_l2);
            sep = fold_min(sep, images[i] * (&ys[a] - &ys[b]).norm() - gap);
        }
    }
    let packing_bound = if norm_psi > T::zero() {
        let r = norm_psi * l;
        let s = gap / r;
        (1.0 + 2.0 * (r / s).as_f64()).powf(2.0 * dim_x as f64)
    } else {
        f64::INFINITY
    };
    let tol = slack(norm_psi * l);
    let passed = sep.map_or(true, |m| m >= -tol)
        && self_margin.map_or(true, |m| m >= -tol)
        && cross.map_or(true, |m| m <= tol)
        && (large.len() as f64) <= packing_bound;
    Ok(FamilyScan {
        survivors,
        large,
        threshold,
        c,
        images: images.iter().map(|x| x.as_f64()).collect(),
        min_separation_margin: sep.map(|x| x.as_f64()),
        min_self_margin: self_margin.map(|x| x.as_f64()),
        max_cross_excess: cross.map(|x| x.as_f64()),
        dim_x,
        packing_bound,
        passed,
    })
}

/// The finite quotient model: `A = M_k ⊕ M_j`, `Q = A / (0 ⊕ M_j) ≅ M_k`.
#[derive(Clone, Debug)]
pub struct QuotientModel<T: Real> {
    pub a: Arc<Algebra<T>>,
    pub q: Arc<Algebra<T>>,
    pub quotient: LinearMap<T>,
    pub k: usize,
}

impl<T: Real> QuotientModel<T> {
    pub fn new(k: usize, j: usize) -> Result<Self> {
        if !(1..=9).contains(&k) {
            return Err(Error::Configuration(format!("quotient block size {k} outside 1..=9")));
        }
        let a = Algebra::direct_sum(&Algebra::full_matrix(k)?, &Algebra::full_matrix(j)?)?;
        let (q, quotient) = a.quotient_by_summand(1)?;
        Ok(Self { a, q, quotient, k })
    }

    /// Matrix unit `e_{ij}` of `Q` (zero-based).
    pub fn unit(&self, i: usize, j: usize) -> Result<Element<T>> {
        Element::labeled(&self.q, &format!("e{}{}", i + 1, j + 1))
    }

    /// The corner idempotents `e_{ii}` of `Q`.
    pub fn corners(&self) -> Result<Vec<Element<T>>> {
        (0..self.k).map(|i| self.unit(i, i)).collect()
    }
}

/// The Murray–von Neumann chain on the quotient model.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct MvnReport<T: Real> {
    /// `max ‖e_{ij}‖‖e_{ji}‖` over the factorizations used.
    #[serde(serialize_with = "ser_real")]
    pub factor_constant: T,
    #[serde(serialize_with = "ser_real")]
    pub c_e: T,
    /// `def(ψ)` and `def(ψ∘q)`, which agree because `q` maps the unit ball onto
    /// the unit ball.
    pub def_psi: Interval<T>,
    pub def_lifted: Interval<T>,
    pub survivor: usize,
    pub steps: Vec<Certificate<T>>,
    pub dichotomies: Vec<DichotomyVerdict<T>>,
    pub conclusion: Certificate<T>,
    pub passed: bool,
}

/// Scan the corner idempotents for a small image, move smallness to every
/// corner through `e_{ij}e_{ji} = e_{ii}`, sharpen with the dichotomy, sum to
/// the identity and conclude `‖ψ‖ ≤ (3/2)η`.
///
/// Needs `η ≤ min(1/(6C³), 2/(9k))`: the second bound replaces the single
/// equivalence `p ~ 1` available in infinite dimensions.
pub fn mvn_pipeline<T: Real>(
    model: &QuotientModel<T>,
    psi: &LinearMap<T>,
    eta: T,
    budget: Budget,
) -> Result<MvnReport<T>> {
    const CHECK: &str = "Murray–von Neumann chain";
    if !psi.source().same_as(&model.q) {
        return Err(Error::ParentMismatch("ψ is not defined on the quotient".into()));
    }
    let b = |l: u64| budget.with_seed(derive_seed(budget.seed, l));
    let k = model.k;
    let mut factor_constant = T::one();
    for i in 0..k {
        for j in 0..k {
            factor_constant = factor_constant.max(model.unit(i, j)?.norm() * model.unit(j, i)?.norm());
        }
    }
    let c_e = clone_constant(factor_constant)?;
    let limit = c_e.min(T::lit(2.0) / T::lit(9.0 * k as f64));
    nonnegative(CHECK, eta)?;
    if eta > limit {
        return precondition(
            CHECK,
            format!("η = {:.6e} > min(1/(6C³), 2/(9k)) = {:.6e}", eta.as_f64(), limit.as_f64()),
        );
    }
    let def_psi = require_defect(CHECK, psi, eta, b(1))?;
    let def_lifted = defect(&psi.compose(&model.quotient)?, None, None, b(2))?;

    let corners = model.corners()?;
    let l = corners.iter().fold(T::one(), |m, p| m.max(p.norm()));
    let third = T::one() / T::lit(3.0);
    let scan = orthogonal_family_scan(psi, &corners, l, eta, third.max(T::lit(3.0) * eta * l * l), b(3))?;
    let Some(&survivor) = scan.survivors.first() else {
        return precondition(CHECK, "no corner idempotent has a small image");
    };

    let mut steps = Vec::with_capacity(k);
    let mut dichotomies = Vec::with_capacity(k);
    for j in 0..k {
        let u = model.unit(survivor, j)?;
        let v = model.unit(j, survivor)?;
        steps.push(equivalent_projection_check(psi, &u, &v, eta, b(10 + j as u64))?);
        dichotomies.push(norm_dichotomy_check(psi, &corners[j], eta, b(100 + j as u64))?);
    }
    let conclusion = small_on_identity(psi, eta, b(4))?;
    let passed = scan.passed
        && steps.iter().all(|c| c.passed)
        && dichotomies.iter().all(|d| d.branch == Branch::Small)
        && not_falsified(def_lifted.lower, def_psi.upper, T::one())
        && conclusion.passed;
    Ok(MvnReport {
        factor_constant,
        c_e,
        def_psi: def_psi.interval(),
        def_lifted: def_lifted.interval(),
        survivor,
        steps,
        dichotomies,
        conclusion,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::scalar::{cone, real};

    fn budget() -> Budget {
        Budget { restarts: 8, sweeps: 100, seed: 5 }
    }

    fn eta_of(psi: &LinearMap<f64>) -> f64 {
        defect(psi, None, None, budget()).unwrap().upper
    }

    fn small_map(src: &Arc<Algebra<f64>>, tgt: &Arc<Algebra<f64>>, scale: f64, seed: u64) -> LinearMap<f64> {
        let mut rng = StreamRng::new(seed, 0);
        let m = rng.complex_matrix::<f64>(tgt.dim(), src.dim()).map(|z| z * scale);
        LinearMap::new(src.clone(), tgt.clone(), m).unwrap()
    }

    #[test]
    fn small_root_examples() {
        let r = kicsi_nagy(2.0f64 / 9.0).unwrap();
        assert!((r.u1 - 1.0 / 3.0).abs() < 1e-12 && (r.bound - 1.0 / 3.0).abs() < 1e-12);
        let r = kicsi_nagy(0.0f64).unwrap();
        assert_eq!((r.u1, r.u2), (0.0, 1.0));
        let r = kicsi_nagy(0.1f64).unwrap();
        assert!((r.u1 - r.u1 * r.u1 - 0.1).abs() < 1e-15);
        assert!((r.u1 - 0.112_701_665).abs() < 1e-8 && r.holds);
        assert!(kicsi_nagy(0.3f64).is_err());
        assert!(kicsi_nagy(-1e-3f64).is_err());
    }

    #[test]
    fn exact_thresholds() {
        let (s, l) = dichotomy_thresholds_exact(Rational::new(2, 9)).unwrap();
        assert_eq!((s, l), (Rational::new(1, 3), Rational::new(2, 3)));
    }

    #[test]
    fn dichotomy_for_homomorphism() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let id = LinearMap::identity(&m2);
        let p = Element::labeled(&m2, "e11").unwrap();
        let v = norm_dichotomy_check(&id, &p, 0.0, budget()).unwrap();
        assert_eq!(v.branch, Branch::Large);
        assert_eq!((v.small_threshold, v.large_threshold), (0.0, 1.0));
        let z = LinearMap::zero(&m2, &m2);
        assert_eq!(norm_dichotomy_check(&z, &p, 0.0, budget()).unwrap().branch, Branch::Small);
    }

    #[test]
    fn absorption_on_matrix_units() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let psi = small_map(&m2, &m2, 1e-2, 1);
        let eta = eta_of(&psi);
        let a = Element::labeled(&m2, "e11").unwrap();
        let b = Element::labeled(&m2, "e12").unwrap();
        let c = absorption_check(&psi, &a, &b, Side::Left, eta, budget()).unwrap();
        assert!(c.passed, "{c:?}");
        let r = absorption_check(&psi, &Element::labeled(&m2, "e22").unwrap(), &b, Side::Right, eta, budget());
        assert!(r.unwrap().passed);
        // e22·e12 = 0 ≠ e12
        let bad = absorption_check(&psi, &Element::labeled(&m2, "e22").unwrap(), &b, Side::Left, eta, budget());
        assert!(matches!(bad, Err(Error::Precondition { .. })));
        // η below the certified defect is refused
        let low = absorption_check(&psi, &a, &b, Side::Left, eta * 0.1, budget());
        assert!(matches!(low, Err(Error::Precondition { .. })));
    }

    #[test]
    fn equivalent_corners() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let psi = small_map(&m2, &m2, 1e-2, 2);
        let eta = eta_of(&psi);
        let u = Element::labeled(&m2, "e12").unwrap();
        let v = Element::labeled(&m2, "e21").unwrap();
        assert!(equivalent_projection_check(&psi, &u, &v, eta, budget()).unwrap().passed);
        let big = equivalent_projection_check(&psi, &u.scale(real(2.0)), &v, 0.05, budget());
        assert!(matches!(big, Err(Error::Precondition { .. })));
    }

    #[test]
    fn scalar_small_on_identity() {
        let c1 = Algebra::<f64>::commutative(1).unwrap();
        for eps in [0.0, 0.01, 0.1, 1.0 / 3.0] {
            let psi = LinearMap::new(c1.clone(), c1.clone(), nalgebra::DMatrix::from_element(1, 1, real(eps))).unwrap();
            let eta = (eps - eps * eps).abs();
            let c = small_on_identity(&psi, eta.max(eta_of(&psi)), budget()).unwrap();
            assert!(c.passed && eps <= 1.5 * eta + 1e-15);
        }
        let psi = LinearMap::new(c1.clone(), c1.clone(), nalgebra::DMatrix::from_element(1, 1, cone())).unwrap();
        assert!(small_on_identity(&psi, 0.0, budget()).is_err());
    }

    #[test]
    fn perturbed_defects() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let id = LinearMap::identity(&m2);
        let gamma = small_map(&m2, &m2, 0.05, 3);
        let theta = id.add(&gamma).unwrap();
        assert!(perturbed_defect_check(&id, &theta, budget()).unwrap().passed);
        let d = Subalgebra::diagonal_of_full_matrix(&m2, 2).unwrap();
        for side in [Side::Left, Side::Right] {
            assert!(relative_perturbed_defect_check(&id, &gamma, &d, side, budget()).unwrap().passed);
        }
        let far = id.add(&small_map(&m2, &m2, 5.0, 4)).unwrap();
        assert!(perturbed_defect_check(&id, &far, budget()).is_err());
    }

    #[test]
    fn clone_constants() {
        assert!((clone_constant(1.0f64).unwrap() - 1.0 / 6.0).abs() < 1e-16);
        assert!((clone_constant(2.0f64).unwrap() - 1.0 / 48.0).abs() < 1e-16);
        assert!(clone_constant(0.5f64).is_err());
    }

    #[test]
    fn family_scan_commutative_image() {
        let c4 = Algebra::<f64>::commutative(4).unwrap();
        let c2 = Algebra::<f64>::commutative(2).unwrap();
        let mut m = nalgebra::DMatrix::from_element(2, 4, real(0.0));
        m[(0, 0)] = cone();
        m[(1, 1)] = cone();
        let psi = LinearMap::new(c4.clone(), c2, m).unwrap();
        let family: Vec<_> = (0..4).map(|i| Element::basis(&c4, i).unwrap()).collect();
        let scan = orthogonal_family_scan(&psi, &family, 1.0, 1e-12, 0.5, budget()).unwrap();
        assert_eq!(scan.survivors, vec![2, 3]);
        assert_eq!(scan.large, vec![0, 1]);
        assert!(scan.passed, "{scan:?}");
        let zero = LinearMap::zero(&c4, &c4);
        assert_eq!(orthogonal_family_scan(&zero, &family, 1.0, 0.0, 0.5, budget()).unwrap().survivors.len(), 4);
        let overlap = vec![family[0].clone(), family[0].clone()];
        assert!(orthogonal_family_scan(&psi, &overlap, 1.0, 0.0, 0.5, budget()).is_err());
    }

    #[test]
    fn mvn_chain_on_quotient() {
        let model = QuotientModel::<f64>::new(3, 2).unwrap();
        let m3 = Algebra::<f64>::full_matrix(3).unwrap();
        let psi = small_map(&model.q, &m3, 2e-3, 9);
        let eta = eta_of(&psi);
        let r = mvn_pipeline(&model, &psi, eta, budget()).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!((r.c_e - 1.0 / 6.0).abs() < 1e-15);
    }
}
