//! The improving operator `F(φ) = φ + Σ¹_φ(φ^∨)`, its iteration to a
//! one-sided modular map, the opposite-algebra switch, the unitization route
//! for maps that do not preserve the unit, and decomposition over an ideal.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::algebra::{basis_vector, Algebra, Element, NormMode, Subalgebra};
use crate::diagonal::{library_diagonal, split, verify_diagonal, DiagonalCert};
use crate::error::{precondition, Error, Result};
use crate::multilinear::{check_map, defect, linear_map_norm, Budget, Interval, LinearMap};
use crate::rng::derive_seed;
use crate::scalar::Real;

/// No-falsification comparison: certified lower end of the left side against
/// the upper end of the right side, with round-off slack relative to `scale`.
pub fn not_falsified<T: Real>(lhs_lo: T, rhs_hi: T, scale: T) -> bool {
    lhs_lo <= rhs_hi + T::tol(1e-12) * scale.max(T::one())
}

fn unit_residual<T: Real>(phi: &LinearMap<T>, sub: &Subalgebra<T>) -> Result<T> {
    let ud = sub
        .algebra
        .unit_coords()
        .ok_or_else(|| Error::Domain("subalgebra has no unit".into()))?;
    let ub = phi
        .target()
        .unit_coords()
        .ok_or_else(|| Error::Domain("target algebra has no unit".into()))?;
    Ok(phi.target().norm_of(&(phi.apply(&sub.embedding.apply(ud)) - ub)))
}

fn map_scale<T: Real>(phi: &LinearMap<T>) -> T {
    let m = crate::scalar::max_modulus(phi.matrix().iter()).max(T::one());
    m * m * phi.target().scale()
}

/// `F(φ) = φ + Σ¹_φ(φ^∨)`.
pub fn improve<T: Real>(phi: &LinearMap<T>, sub: &Subalgebra<T>, cert: &DiagonalCert<T>) -> Result<LinearMap<T>> {
    if !sub.ambient().same_as(phi.source()) {
        return Err(Error::ParentMismatch("subalgebra is not inside the source of the map".into()));
    }
    if !cert.rep.algebra().same_as(&sub.algebra) {
        return Err(Error::ParentMismatch("diagonal certificate is for another algebra".into()));
    }
    let r = unit_residual(phi, sub)?;
    if r > T::tol(1e-9) * map_scale(phi) {
        return precondition("improve", format!("φ(1_D) differs from 1_B by {:.3e}", r.as_f64()));
    }
    let gamma = split(1, phi, &check_map(phi)?, sub, cert)?.to_linear_map()?;
    phi.add(&gamma)
}

/// Largest basis residual of `φ(a x) − φ(a)φ(x)` over `a ∈ A`, `x ∈ D`.
pub fn right_modular_residual<T: Real>(phi: &LinearMap<T>, sub: &Subalgebra<T>) -> Result<T> {
    Ok(check_map(phi)?.restrict_slot(1, sub)?.max_column_norm())
}

/// Largest basis residual of `φ(x a) − φ(x)φ(a)` over `x ∈ D`, `a ∈ A`.
pub fn left_modular_residual<T: Real>(phi: &LinearMap<T>, sub: &Subalgebra<T>) -> Result<T> {
    Ok(check_map(phi)?.restrict_slot(0, sub)?.max_column_norm())
}

/// Whether a residual counts as a structural zero for maps of this size.
pub fn structurally_zero<T: Real>(residual: T, phi: &LinearMap<T>, tol: f64) -> bool {
    residual <= T::tol(tol) * map_scale(phi)
}

/// The four properties of one improving step.
#[derive(Clone, Debug)]
pub struct ImproveReport<T: Real> {
    pub improved: LinearMap<T>,
    pub k_bound: T,
    pub unit_residual: T,
    pub unit_preserved: bool,
    pub norm_phi: Interval<T>,
    pub def_da: Interval<T>,
    pub def_dd: Interval<T>,
    pub step: Interval<T>,
    /// `K ‖φ‖ def_{D×A}(φ)`.
    pub step_bound: T,
    pub step_ok: bool,
    pub def_da_after: Interval<T>,
    /// `3 K² ‖φ‖² def_{D×D}(φ) def_{D×A}(φ)`.
    pub defect_bound: T,
    pub defect_ok: bool,
    pub right_modular_before: bool,
    pub right_modular_after: bool,
}

impl<T: Real> ImproveReport<T> {
    pub fn passed(&self) -> bool {
        self.unit_preserved
            && self.step_ok
            && self.defect_ok
            && (!self.right_modular_before || self.right_modular_after)
    }
}

pub fn improve_report<T: Real>(
    phi: &LinearMap<T>,
    sub: &Subalgebra<T>,
    cert: &DiagonalCert<T>,
    budget: Budget,
) -> Result<ImproveReport<T>> {
    let next = improve(phi, sub, cert)?;
    let b = |label: u64| budget.with_seed(derive_seed(budget.seed, label));
    let norm_phi = linear_map_norm(phi, b(1))?.interval();
    let def_da = defect(phi, Some(sub), None, b(2))?.interval();
    let def_dd = defect(phi, Some(sub), Some(sub), b(3))?.interval();
    let step = linear_map_norm(&next.sub(phi)?, b(4))?.interval();
    let def_da_after = defect(&next, Some(sub), None, b(5))?.interval();
    let k = cert.k_bound;
    let step_bound = k * norm_phi.hi * def_da.hi;
    let defect_bound = T::lit(3.0) * k * k * norm_phi.hi * norm_phi.hi * def_dd.hi * def_da.hi;
    let unit_residual = unit_residual(&next, sub)?;
    let scale = norm_phi.hi.max(T::one());
    Ok(ImproveReport {
        k_bound: k,
        unit_preserved: structurally_zero(unit_residual, &next, 1e-10),
        unit_residual,
        norm_phi,
        def_da,
        def_dd,
        step,
        step_bound,
        step_ok: not_falsified(step.lo, step_bound, scale),
        def_da_after,
        defect_bound,
        defect_ok: not_falsified(def_da_after.lo, defect_bound, scale * scale),
        right_modular_before: structurally_zero(right_modular_residual(phi, sub)?, phi, 1e-10),
        right_modular_after: structurally_zero(right_modular_residual(&next, sub)?, &next, 1e-10),
        improved: next,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizeConfig {
    /// Target for the lower estimate of `def_{D×A}` (absolute).
    pub tol: f64,
    pub max_iter: usize,
    /// Declared bound `L` for `‖φ‖`.
    #[serde(rename = "L")]
    pub l_bound: f64,
    pub seed: u64,
    pub check_paper_bounds: bool,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
}

fn default_restarts() -> usize {
    Budget::default().restarts
}

fn default_sweeps() -> usize {
    Budget::default().sweeps
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            l_bound: 2.0,
            seed: 0,
            check_paper_bounds: true,
            restarts: default_restarts(),
            sweeps: default_sweeps(),
        }
    }
}

impl StabilizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Configuration("tol must be positive".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Configuration("max_iter must be at least 1".into()));
        }
        if !(self.l_bound >= 1.0) {
            return Err(Error::Configuration("L must be at least 1".into()));
        }
        if self.restarts < 1 || self.sweeps < 1 {
            return Err(Error::Configuration("restarts and sweeps must be at least 1".into()));
        }
        Ok(())
    }

    fn budget(&self, label: u64) -> Budget {
        Budget { restarts: self.restarts, sweeps: self.sweeps, seed: derive_seed(self.seed, label) }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct IterateRecord<T: Real> {
    pub iter: usize,
    pub step_norm: Interval<T>,
    pub def_da: Interval<T>,
    pub def_dd: Interval<T>,
    pub norm_phi: Interval<T>,
    /// `K L δ₀ 2^{-(n-1)}`.
    #[serde(serialize_with = "ser_real")]
    pub claim_step_bound: T,
    /// `3 δ₀ 2^{-2n-1}`.
    #[serde(serialize_with = "ser_real")]
    pub claim_defect_bound: T,
    pub step_ok: bool,
    pub defect_ok: bool,
    /// `‖F^n(φ)‖ ≤ 5L/4`.
    pub norm_ok: bool,
}

fn ser_real<T: Real, S: Serializer>(x: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(x.as_f64())
}

#[derive(Clone, Debug)]
pub struct StabilizeReport<T: Real> {
    pub config: StabilizeConfig,
    pub k_bound: T,
    /// `max(def_{D×A}, def_{A×D})` upper estimates at the input.
    pub delta0: T,
    pub def_da0: Interval<T>,
    pub def_ad0: Interval<T>,
    pub norm0: Interval<T>,
    pub iterates: Vec<IterateRecord<T>>,
    pub converged: bool,
    pub switch_applied: bool,
    pub final_map: LinearMap<T>,
    pub final_left_residual: T,
    pub final_right_residual: T,
    pub self_modular: bool,
    pub total_distance: Interval<T>,
    /// `12 K² L³ δ₀`.
    pub theorem_bound: T,
    pub distance_ok: bool,
    /// Whether the paper bounds are asserted (checks requested and the norm
    /// keeps `‖1‖ = 1`, so `‖φ‖ ≥ 1` holds).
    pub bounds_asserted: bool,
}

const ENVELOPE_NOTE: &str =
    "K is the representation bound of the diagonal used, so 12K²L³ is an upper envelope for the constant";

impl<T: Real> StabilizeReport<T> {
    pub fn claims_ok(&self) -> bool {
        self.iterates.iter().all(|r| r.step_ok && r.defect_ok && r.norm_ok)
    }

    /// Converged, self-modular, and (when asserted) every paper bound holds.
    pub fn passed(&self) -> bool {
        self.converged && self.self_modular && (!self.bounds_asserted || (self.claims_ok() && self.distance_ok))
    }

    /// CSV with one row per iterate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,step_norm_lo,step_norm_hi,def_da_lo,def_da_hi,claim_step,claim_defect\n");
        for r in &self.iterates {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.iter,
                r.step_norm.lo.as_f64(),
                r.step_norm.hi.as_f64(),
                r.def_da.lo.as_f64(),
                r.def_da.hi.as_f64(),
                r.claim_step_bound.as_f64(),
                r.claim_defect_bound.as_f64()
            ));
        }
        out
    }
}

impl<T: Real> Serialize for StabilizeReport<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("StabilizeReport", 16)?;
        st.serialize_field("schema", &1)?;
        st.serialize_field("config", &self.config)?;
        st.serialize_field("k_bound", &self.k_bound.as_f64())?;
        st.serialize_field("delta0", &self.delta0.as_f64())?;
        st.serialize_field("def_da0", &self.def_da0)?;
        st.serialize_field("def_ad0", &self.def_ad0)?;
        st.serialize_field("norm0", &self.norm0)?;
        st.serialize_field("iterates", &self.iterates)?;
        st.serialize_field("final_distance", &self.total_distance)?;
        st.serialize_field("theorem_bound", &self.theorem_bound.as_f64())?;
        st.serialize_field("distance_ok", &self.distance_ok)?;
        st.serialize_field("bounds_asserted", &self.bounds_asserted)?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("switch_applied", &self.switch_applied)?;
        st.serialize_field("final_left_residual", &self.final_left_residual.as_f64())?;
        st.serialize_field("final_right_residual", &self.final_right_residual.as_f64())?;
        st.serialize_field("self_modular", &self.self_modular)?;
        st.serialize_field("passed", &self.passed())?;
        st.serialize_field("note", ENVELOPE_NOTE)?;
        st.end()
    }
}

/// Same matrix over `(A^op, B^op)`.
pub fn opposite_switch<T: Real>(phi: &LinearMap<T>) -> LinearMap<T> {
    phi.reparent(&phi.source().opposite(), &phi.target().opposite())
        .expect("opposites keep dimensions")
}

/// Iterates `F` until `def_{D×A}` is below `tol`, then kills `def_{A×D}` with
/// one improving step on the opposite algebras.
pub fn stabilize<T: Real>(
    phi: &LinearMap<T>,
    sub: &Subalgebra<T>,
    cert: &DiagonalCert<T>,
    config: &StabilizeConfig,
) -> Result<StabilizeReport<T>> {
    config.validate()?;
    let r = unit_residual(phi, sub)?;
    if r > T::tol(1e-9) * map_scale(phi) {
        return precondition("stabilize", format!("φ(1_D) differs from 1_B by {:.3e}", r.as_f64()));
    }
    let l = T::lit(config.l_bound);
    let k = cert.k_bound;
    let def_da0 = defect(phi, Some(sub), None, config.budget(1))?.interval();
    let def_ad0 = defect(phi, None, Some(sub), config.budget(2))?.interval();
    let norm0 = linear_map_norm(phi, config.budget(3))?.interval();
    let delta0 = def_da0.hi.max(def_ad0.hi);
    if config.check_paper_bounds {
        let lhs = k * k * l * l * delta0;
        if lhs > T::lit(0.125) {
            return precondition(
                "stabilize",
                format!("K²L²δ₀ = {:.4e} exceeds 1/8 (K = {:.4}, L = {}, δ₀ = {:.4e})", lhs.as_f64(), k.as_f64(), config.l_bound, delta0.as_f64()),
            );
        }
        if norm0.lo > l {
            return precondition("stabilize", format!("‖φ‖ ≥ {:.4} exceeds L = {}", norm0.lo.as_f64(), config.l_bound));
        }
    }
    let bounds_asserted = config.check_paper_bounds && phi.target().norm_mode() != NormMode::Frobenius;

    let tol = T::lit(config.tol);
    let mut current = phi.clone();
    let mut iterates = Vec::new();
    let mut converged = def_da0.lo <= tol;
    let two = T::lit(2.0);
    let mut n = 0;
    while !converged && n < config.max_iter {
        n += 1;
        let next = improve(&current, sub, cert)?;
        let base = 16 * n as u64;
        let step_norm = linear_map_norm(&next.sub(&current)?, config.budget(base))?.interval();
        let def_da = defect(&next, Some(sub), None, config.budget(base + 1))?.interval();
        let def_dd = defect(&next, Some(sub), Some(sub), config.budget(base + 2))?.interval();
        let norm_phi = linear_map_norm(&next, config.budget(base + 3))?.interval();
        let claim_step_bound = k * l * delta0 / two.powi(n as i32 - 1);
        let claim_defect_bound = T::lit(3.0) * delta0 / two.powi(2 * n as i32 + 1);
        iterates.push(IterateRecord {
            iter: n,
            step_ok: not_falsified(step_norm.lo, claim_step_bound, l),
            defect_ok: not_falsified(def_da.lo, claim_defect_bound, l * l),
            norm_ok: not_falsified(norm_phi.lo, T::lit(1.25) * l, l),
            step_norm,
            def_da,
            def_dd,
            norm_phi,
            claim_step_bound,
            claim_defect_bound,
        });
        converged = def_da.lo <= tol;
        current = next;
    }

    // Opposite side: same matrix, reversed products, flipped diagonal.
    let a_op = phi.source().opposite();
    let b_op = phi.target().opposite();
    let sub_op = sub.opposite(&a_op)?;
    let cert_op = verify_diagonal(&sub_op.algebra, &cert.rep.flipped(&sub_op.algebra)?)?;
    if !cert_op.valid {
        return Err(Error::Domain("flipped diagonal failed verification".into()));
    }
    let switched = current.reparent(&a_op, &b_op)?;
    let improved_op = improve(&switched, &sub_op, &cert_op)?;
    let final_map = improved_op.reparent(phi.source(), phi.target())?;

    let final_left_residual = left_modular_residual(&final_map, sub)?;
    let final_right_residual = right_modular_residual(&final_map, sub)?;
    let self_modular = structurally_zero(final_left_residual, &final_map, 1e-8)
        && structurally_zero(final_right_residual, &final_map, 1e-8);
    let total_distance = linear_map_norm(&final_map.sub(phi)?, config.budget(4))?.interval();
    let theorem_bound = T::lit(12.0) * k * k * l * l * l * delta0;
    Ok(StabilizeReport {
        config: config.clone(),
        k_bound: k,
        delta0,
        def_da0,
        def_ad0,
        norm0,
        iterates,
        converged,
        switch_applied: true,
        final_map,
        final_left_residual,
        final_right_residual,
        self_modular,
        distance_ok: not_falsified(total_distance.lo, theorem_bound, l),
        total_distance,
        theorem_bound,
        bounds_asserted,
    })
}

/// `ψ#(λ, a) = λ 1_B + ψ(a)` on `A# = unitize(A)`.
pub fn unitize_map<T: Real>(psi: &LinearMap<T>, a_sharp: &Arc<Algebra<T>>) -> Result<LinearMap<T>> {
    match a_sharp.unitization_base() {
        Some(base) if base.same_as(psi.source()) => {}
        _ => return Err(Error::ParentMismatch("not the unitization of the map's source".into())),
    }
    let ub = psi
        .target()
        .unit_coords()
        .ok_or_else(|| Error::Domain("target algebra has no unit".into()))?;
    let (m, n) = (psi.target().dim(), psi.source().dim());
    let mut mat = DMatrix::zeros(m, n + 1);
    mat.set_column(0, ub);
    mat.view_mut((0, 1), (m, n)).copy_from(psi.matrix());
    LinearMap::new(a_sharp.clone(), psi.target().clone(), mat)
}

#[derive(Clone, Debug)]
pub struct UnitizedReport<T: Real> {
    pub inner: StabilizeReport<T>,
    /// Restriction of the stabilized `ψ#` to `A`.
    pub theta: LinearMap<T>,
    pub defect_psi: Interval<T>,
    pub distance: Interval<T>,
    /// `C′ = 12 K² L³`.
    pub c_prime: T,
    pub bound_ok: bool,
}

/// Stabilizes a map that need not preserve the unit by passing to `ψ#` on
/// `A#` with `D₀#` and its extended diagonal.
pub fn stabilize_unitized<T: Real>(
    psi: &LinearMap<T>,
    d0: &Subalgebra<T>,
    config: &StabilizeConfig,
) -> Result<UnitizedReport<T>> {
    let a_sharp = psi.source().unitize()?;
    let d_sharp = d0.unitize(&a_sharp)?;
    let cert = library_diagonal(&d_sharp.algebra)?;
    let psi_sharp = unitize_map(psi, &a_sharp)?;
    let inner = stabilize(&psi_sharp, &d_sharp, &cert, config)?;
    let n = psi.source().dim();
    let theta = LinearMap::new(
        psi.source().clone(),
        psi.target().clone(),
        inner.final_map.matrix().columns(1, n).into_owned(),
    )?;
    let defect_psi = defect(psi, None, None, config.budget(5))?.interval();
    let distance = linear_map_norm(&theta.sub(psi)?, config.budget(6))?.interval();
    let l = T::lit(config.l_bound);
    let c_prime = T::lit(12.0) * cert.k_bound * cert.k_bound * l * l * l;
    Ok(UnitizedReport {
        bound_ok: not_falsified(distance.lo, c_prime * defect_psi.hi, l),
        inner,
        theta,
        defect_psi,
        distance,
        c_prime,
    })
}

/// A two-sided ideal `J ⊆ A` with a local identity `e ∈ J`.
#[derive(Clone, Debug)]
pub struct IdealData<T: Real> {
    pub ideal: Subalgebra<T>,
    pub e: Element<T>,
    /// `‖e‖`.
    pub bound_m: T,
}

impl<T: Real> IdealData<T> {
    pub fn new(ideal: Subalgebra<T>, e: Element<T>) -> Result<Self> {
        let a = ideal.ambient().clone();
        if !e.parent().same_as(&a) {
            return Err(Error::ParentMismatch("local identity outside the ambient algebra".into()));
        }
        let frame = ideal.embedding.matrix();
        let tol = T::tol(1e-9) * a.scale();
        for x in 0..frame.ncols() {
            let xv = frame.column(x).into_owned();
            for i in 0..a.dim() {
                let av = basis_vector(a.dim(), i);
                for prod in [a.mul(&av, &xv), a.mul(&xv, &av)] {
                    let off = &prod - frame * frame.ad_mul(&prod);
                    if off.norm() > tol {
                        return Err(Error::Domain(format!("J is not a two-sided ideal (basis {i}, generator {x})")));
                    }
                }
            }
            let ex = a.mul(e.coords(), &xv) - &xv;
            let xe = a.mul(&xv, e.coords()) - &xv;
            if ex.norm() > tol || xe.norm() > tol {
                return Err(Error::Domain("e does not act as an identity on J".into()));
            }
        }
        let in_j = e.coords() - frame * frame.ad_mul(e.coords());
        if in_j.norm() > tol {
            return Err(Error::Domain("e does not lie in J".into()));
        }
        Ok(Self { bound_m: e.norm(), ideal, e })
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition<T: Real> {
    pub phi: LinearMap<T>,
    pub theta_s: LinearMap<T>,
    pub p: Element<T>,
    /// `φ^∨` relative to `max(1, ‖entries‖)`.
    pub multiplicative_residual: T,
    /// `θ_s` on the basis of `J`.
    pub vanishing_residual: T,
    /// Relative distance of the tensors `θ_s^∨` and `θ^∨`.
    pub defect_identity_residual: T,
    pub passed: bool,
}

/// `p = θ(e)`, `φ = pθ`, `θ_s = θ − φ` for `θ ∈ Hom_J(A, B)`.
pub fn decompose_over_ideal<T: Real>(theta: &LinearMap<T>, ideal: &IdealData<T>) -> Result<Decomposition<T>> {
    let a = theta.source();
    let b = theta.target();
    if !ideal.ideal.ambient().same_as(a) {
        return Err(Error::ParentMismatch("ideal is not inside the source of θ".into()));
    }
    let frame = ideal.ideal.embedding.matrix();
    let tol = T::tol(1e-9) * map_scale(theta);
    for x in 0..frame.ncols() {
        let xv = frame.column(x).into_owned();
        let tx = theta.apply(&xv);
        for i in 0..a.dim() {
            let av = basis_vector(a.dim(), i);
            let ta = theta.apply(&av);
            let left = theta.apply(&a.mul(&av, &xv)) - b.mul(&ta, &tx);
            let right = theta.apply(&a.mul(&xv, &av)) - b.mul(&tx, &ta);
            if left.norm() > tol || right.norm() > tol {
                return precondition(
                    "decompose_over_ideal",
                    format!("θ is not J-modular at basis pair ({}, J[{x}])", a.labels()[i]),
                );
            }
        }
    }
    let p_coords = theta.apply(ideal.e.coords());
    let phi = LinearMap::new(a.clone(), b.clone(), b.left_matrix(&p_coords) * theta.matrix())?;
    let theta_s = theta.sub(&phi)?;
    let multiplicative_residual = check_map(&phi)?.max_abs() / map_scale(theta);
    let vanishing_residual = (0..frame.ncols())
        .map(|x| b.norm_of(&theta_s.apply(&frame.column(x).into_owned())))
        .fold(T::zero(), |m, v| m.max(v));
    let defect_identity_residual = check_map(&theta_s)?.relative_distance(&check_map(theta)?)?;
    let t = T::tol(1e-9);
    Ok(Decomposition {
        passed: multiplicative_residual <= t
            && vanishing_residual <= t * map_scale(theta)
            && defect_identity_residual <= t,
        p: Element::new(b.clone(), p_coords)?,
        phi,
        theta_s,
        multiplicative_residual,
        vanishing_residual,
        defect_identity_residual,
    })
}

/// `c_k ⊗ d_k ↦ Σ φ^∨(a, c_k) φ(d_k)`: the correction the opposite-side
/// improving step applies, written in the original algebras.
pub fn opposite_correction<T: Real>(phi: &LinearMap<T>, sub: &Subalgebra<T>, cert: &DiagonalCert<T>) -> Result<LinearMap<T>> {
    let chk = check_map(phi)?;
    let b = phi.target();
    let e = &sub.embedding;
    let mut out = DMatrix::zeros(b.dim(), phi.source().dim());
    for (c, d) in cert.rep.pairs() {
        let slice = chk.contract_slot(1, &e.apply(c)).right_multiply(&phi.apply(&e.apply(d)));
        out += slice.data();
    }
    LinearMap::new(phi.source().clone(), b.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn m2_setup() -> (Arc<Algebra<f64>>, Subalgebra<f64>, DiagonalCert<f64>) {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let d = Subalgebra::diagonal_of_full_matrix(&m2, 2).unwrap();
        let cert = library_diagonal(&d.algebra).unwrap();
        (m2, d, cert)
    }

    fn perturbed(m2: &Arc<Algebra<f64>>, size: f64, seed: u64) -> LinearMap<f64> {
        let mut rng = StreamRng::new(seed, 0);
        let mut g = rng.complex_matrix::<f64>(4, 4);
        // γ(1) = 0: subtract the value on the unit from the e11 column and the e22 column halves.
        let u = m2.unit_coords().unwrap().clone();
        let gu = &g * &u;
        for j in [0usize, 3] {
            let col = g.column(j) - gu.scale(0.5);
            g.set_column(j, &col);
        }
        let s = crate::scalar::spectral_norm(&g);
        LinearMap::new(m2.clone(), m2.clone(), DMatrix::identity(4, 4) + g.scale(size / s)).unwrap()
    }

    #[test]
    fn homomorphism_is_fixed() {
        let (m2, d, cert) = m2_setup();
        let id = LinearMap::identity(&m2);
        let f = improve(&id, &d, &cert).unwrap();
        assert!((f.matrix() - id.matrix()).norm() < 1e-14);
        let rep = stabilize(&id, &d, &cert, &StabilizeConfig::default()).unwrap();
        assert!(rep.iterates.is_empty() && rep.converged && rep.passed());
        assert!(rep.total_distance.lo < 1e-12);
    }

    #[test]
    fn non_unital_input_refused() {
        let (m2, d, cert) = m2_setup();
        let half = LinearMap::identity(&m2).scale(crate::scalar::real(0.5));
        assert!(matches!(improve(&half, &d, &cert), Err(Error::Precondition { .. })));
    }

    #[test]
    fn stabilize_small_perturbation() {
        let (m2, d, cert) = m2_setup();
        let phi = perturbed(&m2, 1e-3, 1);
        let rep = stabilize(&phi, &d, &cert, &StabilizeConfig::default()).unwrap();
        assert!(rep.converged, "{:?}", rep.iterates);
        assert!(rep.passed(), "{}", serde_json::to_string_pretty(&rep).unwrap());
        assert!(rep.iterates.len() <= 30);
    }

    #[test]
    fn opposite_correction_matches_switch() {
        let (m2, d, cert) = m2_setup();
        let phi = perturbed(&m2, 1e-2, 2);
        let a_op = m2.opposite();
        let sub_op = d.opposite(&a_op).unwrap();
        let cert_op = verify_diagonal(&sub_op.algebra, &cert.rep.flipped(&sub_op.algebra).unwrap()).unwrap();
        let switched = opposite_switch(&phi);
        let f = improve(&switched, &sub_op, &cert_op).unwrap();
        let corr = opposite_correction(&phi, &d, &cert).unwrap();
        assert!((f.matrix() - phi.matrix() - corr.matrix()).norm() < 1e-13);
        let back = opposite_switch(&switched);
        assert!(back.source().same_as(&m2) && back.matrix() == phi.matrix());
    }

    #[test]
    fn unitized_route() {
        let m2 = Algebra::<f64>::full_matrix(2).unwrap();
        let d0 = Subalgebra::diagonal_of_full_matrix(&m2, 2).unwrap();
        let zero = LinearMap::zero(&m2, &m2);
        let a_sharp = m2.unitize().unwrap();
        let z = unitize_map(&zero, &a_sharp).unwrap();
        assert_eq!(z.matrix().column(0).into_owned(), m2.unit_coords().unwrap().clone());
        let mut rng = StreamRng::new(5, 0);
        let psi = LinearMap::new(m2.clone(), m2.clone(), rng.complex_matrix::<f64>(4, 4).scale(1e-5)).unwrap();
        let rep = stabilize_unitized(&psi, &d0, &StabilizeConfig::default()).unwrap();
        assert!(rep.inner.passed());
        assert!(rep.bound_ok);
    }
}
