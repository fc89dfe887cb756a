//! Run configuration and seeded instance generation.
//!
//! An instance is `A = M_k`, `B = M_{km}`, `D` the diagonal of `A` with the
//! library diagonal of `ℂ^k`, the amplification `x ↦ x ⊗ I_m` and a
//! perturbation `γ` with `γ(1_D) = 0`. Instance `i` of seed `s` draws from
//! `StreamRng::new(s, i)`.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, NormMode, Subalgebra};
use crate::diagonal::{library_diagonal, DiagonalCert};
use crate::error::{Error, Result};
use crate::multilinear::{linear_map_norm, Budget, Interval, LinearMap};
use crate::rng::{derive_seed, StreamRng};
use crate::scalar::{cone, real, Real, C};
use crate::stabilizer::StabilizeConfig;
use crate::tsirelson::{MAX_TERMS, SUPPORT_CAP};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Stabilize,
    Defect,
    Suite,
    Tsirelson,
    Clones,
}

/// `A = M_k`, `B = M_{km}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub k: usize,
    pub m: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { k: 2, m: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative tolerance of the exact-identity checks.
    pub identity: f64,
    /// Convergence target for the lower estimate of `def_{D×A}`.
    pub stabilize: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { identity: 1e-10, stabilize: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub restarts: usize,
    pub sweeps: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { restarts: 8, sweeps: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilizeParams {
    #[serde(rename = "L")]
    pub l_bound: f64,
    pub max_iter: usize,
    pub check_paper_bounds: bool,
}

impl Default for StabilizeParams {
    fn default() -> Self {
        Self { l_bound: 2.0, max_iter: 30, check_paper_bounds: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteParams {
    /// Seeded instances per randomized lemma.
    pub instances: usize,
    /// Criteria to run, from `1..=6`.
    pub criteria: Vec<u8>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self { instances: 100, criteria: vec![1, 2, 3, 4, 5, 6] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsirelsonParams {
    /// Dense coefficients of `t_1, t_2, …`; a seeded vector when absent.
    pub vector: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloneParams {
    /// Binary words; seeded words of length 10 when empty.
    pub words: Vec<String>,
    /// Truncation `N` for the projection ranks.
    pub n: usize,
    /// Number of family terms compared for intersections.
    pub horizon: usize,
    /// Seeded vectors per family for the contractivity check.
    pub samples: usize,
}

impl Default for CloneParams {
    fn default() -> Self {
        Self { words: Vec::new(), n: 20, horizon: 20, samples: 4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    pub dir: Option<PathBuf>,
}

/// The JSON run configuration (`schema: 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub command: Option<Command>,
    pub seed: u64,
    #[serde(default = "spectral")]
    pub norm_mode: NormMode,
    #[serde(default)]
    pub dims: Dims,
    /// Requested `‖γ‖`.
    #[serde(default = "default_gamma")]
    pub gamma_norm: f64,
    /// Instance index used by `stabilize` and `defect`.
    #[serde(default)]
    pub instance: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub stabilize: StabilizeParams,
    #[serde(default)]
    pub suite: SuiteParams,
    #[serde(default)]
    pub tsirelson: TsirelsonParams,
    #[serde(default)]
    pub clones: CloneParams,
    #[serde(default)]
    pub output: OutputParams,
}

fn spectral() -> NormMode {
    NormMode::Spectral
}

fn default_gamma() -> f64 {
    1e-3
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Configuration(msg()))
    }
}

impl RunConfig {
    /// Defaults for everything but the seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            schema: SCHEMA,
            command: None,
            seed,
            norm_mode: NormMode::Spectral,
            dims: Dims::default(),
            gamma_norm: default_gamma(),
            instance: 0,
            tolerances: Tolerances::default(),
            budget: BudgetConfig::default(),
            stabilize: StabilizeParams::default(),
            suite: SuiteParams::default(),
            tsirelson: TsirelsonParams::default(),
            clones: CloneParams::default(),
            output: OutputParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.schema == SCHEMA, || format!("schema must be {SCHEMA}, got {}", self.schema))?;
        check(self.norm_mode != NormMode::UnitizationComposite, || {
            "norm_mode must be spectral or frobenius".into()
        })?;
        let Dims { k, m } = self.dims;
        check((1..=4).contains(&k), || format!("dims.k = {k} outside 1..=4"))?;
        check((1..=3).contains(&m), || format!("dims.m = {m} outside 1..=3"))?;
        check(k * m <= 6, || format!("dims.k·dims.m = {} exceeds 6", k * m))?;
        check((0.0..=1.0).contains(&self.gamma_norm), || {
            format!("gamma_norm = {} outside [0, 1]", self.gamma_norm)
        })?;
        for (name, t) in [("identity", self.tolerances.identity), ("stabilize", self.tolerances.stabilize)] {
            check(t > 0.0 && t < 1.0, || format!("tolerances.{name} = {t} outside (0, 1)"))?;
        }
        let b = self.budget;
        check((1..=1024).contains(&b.restarts), || format!("budget.restarts = {} outside 1..=1024", b.restarts))?;
        check((1..=10_000).contains(&b.sweeps), || format!("budget.sweeps = {} outside 1..=10000", b.sweeps))?;
        let s = self.stabilize;
        check(s.l_bound >= 1.0 && s.l_bound <= 1e3, || format!("stabilize.L = {} outside [1, 1000]", s.l_bound))?;
        check((1..=1000).contains(&s.max_iter), || format!("stabilize.max_iter = {} outside 1..=1000", s.max_iter))?;
        let inst = self.suite.instances;
        check((1..=10_000).contains(&inst), || format!("suite.instances = {inst} outside 1..=10000"))?;
        for c in &self.suite.criteria {
            check((1..=6).contains(c), || format!("suite.criteria entry {c} outside 1..=6"))?;
        }
        if let Some(v) = &self.tsirelson.vector {
            check(!v.is_empty() && v.iter().all(|x| x.is_finite()), || {
                "tsirelson.vector must be nonempty and finite".into()
            })?;
            let support = v.iter().filter(|x| **x != 0.0).count();
            check(support <= SUPPORT_CAP, || format!("tsirelson.vector has {support} nonzeros, cap {SUPPORT_CAP}"))?;
        }
        let c = &self.clones;
        check((1..=MAX_TERMS).contains(&c.horizon), || format!("clones.horizon outside 1..={MAX_TERMS}"))?;
        check((1..=40).contains(&c.n), || format!("clones.n = {} outside 1..=40", c.n))?;
        check(c.samples <= 1000, || format!("clones.samples = {} exceeds 1000", c.samples))?;
        for w in &c.words {
            check(!w.is_empty() && w.chars().all(|ch| ch == '0' || ch == '1'), || {
                format!("clone word {w:?} is not a nonempty binary string")
            })?;
        }
        Ok(())
    }

    pub fn budget(&self) -> Budget {
        Budget { restarts: self.budget.restarts, sweeps: self.budget.sweeps, seed: self.seed }
    }

    /// The stabilizer settings for instance `index`.
    pub fn stabilize_config(&self, index: u64) -> StabilizeConfig {
        StabilizeConfig {
            tol: self.tolerances.stabilize,
            max_iter: self.stabilize.max_iter,
            l_bound: self.stabilize.l_bound,
            seed: derive_seed(self.seed, index),
            check_paper_bounds: self.stabilize.check_paper_bounds,
            restarts: self.budget.restarts,
            sweeps: self.budget.sweeps,
        }
    }
}

/// A generated perturbation problem.
#[derive(Clone, Debug)]
pub struct Instance<T: Real> {
    pub index: u64,
    pub a: Arc<Algebra<T>>,
    pub b: Arc<Algebra<T>>,
    pub d: Subalgebra<T>,
    pub cert: DiagonalCert<T>,
    pub hom: LinearMap<T>,
    pub gamma: LinearMap<T>,
    pub phi: LinearMap<T>,
    /// Certified interval for `‖γ‖` after normalization.
    pub gamma_norm: Interval<T>,
}

/// The coordinates of `x ↦ x ⊗ I_m` from `M_k` to `M_{km}`.
pub fn amplification<T: Real>(a: &Arc<Algebra<T>>, b: &Arc<Algebra<T>>, k: usize, m: usize) -> Result<LinearMap<T>> {
    let n = k * m;
    let mut mat = DMatrix::zeros(n * n, k * k);
    for i in 0..k {
        for j in 0..k {
            for r in 0..m {
                mat[((i * m + r) * n + j * m + r, i * k + j)] = cone();
            }
        }
    }
    LinearMap::new(a.clone(), b.clone(), mat)
}

/// `G(I − u uᴴ/|u|²)`: kills `u` in coordinates.
pub fn annihilate<T: Real>(g: &DMatrix<C<T>>, u: &nalgebra::DVector<C<T>>) -> DMatrix<C<T>> {
    let uu = u.norm_squared();
    if uu == T::zero() {
        return g.clone();
    }
    let gu = g * u;
    g - (gu * u.adjoint()).map(|z| z / real(uu))
}

/// Rescales `g` so the certified lower estimate of its norm equals `target`.
/// In Frobenius mode the lower estimate is the exact top singular value.
pub fn normalize<T: Real>(g: &LinearMap<T>, target: T, budget: Budget) -> Result<LinearMap<T>> {
    if target == T::zero() {
        return Ok(LinearMap::zero(g.source(), g.target()));
    }
    let n = linear_map_norm(g, budget)?.lower;
    if n == T::zero() {
        // On `M_1` the condition `γ(1) = 0` leaves only `γ = 0`.
        return Ok(g.clone());
    }
    Ok(g.scale(real(target / n)))
}

pub fn generate_instance<T: Real>(config: &RunConfig, index: u64) -> Result<Instance<T>> {
    config.validate()?;
    let Dims { k, m } = config.dims;
    let a = Algebra::<T>::full_matrix(k)?.with_norm_mode(config.norm_mode)?;
    let b = Algebra::<T>::full_matrix(k * m)?.with_norm_mode(config.norm_mode)?;
    let d = Subalgebra::diagonal_of_full_matrix(&a, k)?;
    let cert = library_diagonal(&d.algebra)?;
    let hom = amplification(&a, &b, k, m)?;
    let mut rng = StreamRng::new(config.seed, index);
    let g = rng.complex_matrix::<T>(b.dim(), a.dim());
    let unit_d = d.embedding.apply(d.algebra.unit_coords().expect("diagonal subalgebra is unital"));
    let raw = LinearMap::new(a.clone(), b.clone(), annihilate(&g, &unit_d))?;
    let budget = config.budget().with_seed(derive_seed(config.seed, index ^ 0x9e37_79b9));
    let gamma = normalize(&raw, T::lit(config.gamma_norm), budget)?;
    let gamma_norm = linear_map_norm(&gamma, budget)?.interval();
    let phi = hom.add(&gamma)?;
    Ok(Instance { index, a, b, d, cert, hom, gamma, phi, gamma_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilinear::check_map;

    fn cfg(seed: u64) -> RunConfig {
        RunConfig::with_seed(seed)
    }

    #[test]
    fn same_seed_same_instance() {
        let x = generate_instance::<f64>(&cfg(7), 3).unwrap();
        let y = generate_instance::<f64>(&cfg(7), 3).unwrap();
        assert_eq!(x.phi.matrix(), y.phi.matrix());
        let z = generate_instance::<f64>(&cfg(7), 4).unwrap();
        assert_ne!(x.phi.matrix(), z.phi.matrix());
    }

    #[test]
    fn zero_perturbation_is_a_homomorphism() {
        let mut c = cfg(1);
        c.gamma_norm = 0.0;
        c.dims = Dims { k: 2, m: 2 };
        let inst = generate_instance::<f64>(&c, 0).unwrap();
        assert_eq!(check_map(&inst.phi).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn perturbation_has_requested_norm_and_kills_the_unit() {
        for mode in [NormMode::Spectral, NormMode::Frobenius] {
            let mut c = cfg(11);
            c.norm_mode = mode;
            let inst = generate_instance::<f64>(&c, 2).unwrap();
            let measured = linear_map_norm(&inst.gamma, c.budget().with_seed(99)).unwrap();
            assert!((0.999e-3..=1.001e-3).contains(&inst.gamma_norm.lo));
            assert!(measured.lower <= 1.001e-3 && measured.upper >= 0.999e-3);
            let one = inst.a.unit_coords().unwrap();
            assert!(inst.gamma.apply(one).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"schema": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 2, "seed": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 1, "seed": 1, "dims": {"k": 5, "m": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 1, "seed": 1, "bogus": 0}"#).is_err());
        let ok = RunConfig::from_json(r#"{"schema": 1, "seed": 1, "command": "suite"}"#).unwrap();
        assert_eq!(ok.command, Some(Command::Suite));
        assert_eq!(ok.suite.instances, 100);
    }
}
