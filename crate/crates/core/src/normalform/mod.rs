//! Normal forms of manifolds of solutions and of the ODEs behind them.
//!
//! A manifold `y = Φ(x, a, b)` is in normal form when, writing
//! `Φ = Σ Φ_{kl}(b) x^k a^l`, every `Φ_{kl}` with `k ≤ 1` or `l ≤ 1` vanishes
//! beyond the model `b + ax`, and so do `Φ_{22}, Φ_{23}, Φ_{32}, Φ_{33}`.

mod homological;
pub mod special;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use homological::{homological_operator, homological_solve, is_killed};
pub use special::{decide_equivalence, special_normalize, SpecialForm, Verdict, VerdictKind};

use crate::invariants::{InvariantError, OdeJet, PointKind};
use crate::pseries::{Rational, SeriesError, TermJson, TruncatedSeries, VarContext};
use crate::solutions::{
    geometric_inverse, integrate_to_manifold, manifold_to_ode, transform_manifold, CoupledMap,
    PointMap, SolutionError, SolutionManifold,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalFormError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error("input is not weighted homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("scaling parameters s and t must be nonzero")]
    ZeroScale,
    #[error("weight {0} is too low (need at least {1})")]
    WeightTooLow(u32, u32),
    #[error("the origin is {0}, a special normal form needs a strongly nonflat point")]
    NotStronglyNonflat(PointKind),
    #[error("parameter solve failed: {0}")]
    ParameterSolve(String),
    #[error("invalid precision: {0}")]
    Precision(String),
}

pub type Result<T> = std::result::Result<T, NormalFormError>;

/// Parameters of the projective automorphism `g0(s, t) ∘ g+(α, β, r)` of
/// the model that is applied before the normalizing map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizationParams {
    pub s: Rational,
    pub t: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    pub r: Rational,
}

impl NormalizationParams {
    pub fn new(
        s: Rational,
        t: Rational,
        alpha: Rational,
        beta: Rational,
        r: Rational,
    ) -> Result<Self> {
        if s.is_zero() || t.is_zero() {
            return Err(NormalFormError::ZeroScale);
        }
        Ok(Self {
            s,
            t,
            alpha,
            beta,
            r,
        })
    }

    pub fn identity() -> Self {
        Self {
            s: Rational::one(),
            t: Rational::one(),
            alpha: Rational::zero(),
            beta: Rational::zero(),
            r: Rational::zero(),
        }
    }

    pub fn with_abr(alpha: Rational, beta: Rational, r: Rational) -> Self {
        Self {
            alpha,
            beta,
            r,
            ..Self::identity()
        }
    }

    pub fn to_json(&self) -> ParamsJson {
        let f = |q: &Rational| crate::pseries::format_rational(q);
        ParamsJson {
            s: f(&self.s),
            t: f(&self.t),
            alpha: f(&self.alpha),
            beta: f(&self.beta),
            r: f(&self.r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub s: String,
    pub t: String,
    pub alpha: String,
    pub beta: String,
    pub r: String,
}

/// The projective automorphism of the model with parameters `p`, expanded
/// to weight `w`:
///
/// `x ↦ s(x + αy)/D`, `y ↦ st·y/D`, `a ↦ t(a + 2βb)/E`, `b ↦ st·b/E` with
/// `D = 1 − 2βx + (r + αβ)y` and `E = 1 + αa + (r + 3αβ)b`.
pub fn model_automorphism(p: &NormalizationParams, w: u32) -> Result<CoupledMap> {
    if p.s.is_zero() || p.t.is_zero() {
        return Err(NormalFormError::ZeroScale);
    }
    let xy = VarContext::xy();
    let ab = VarContext::ab();
    let two = Rational::from_integer(2.into());
    let three = Rational::from_integer(3.into());
    let st = &p.s * &p.t;
    let ab_coef = &p.alpha * &p.beta;

    let x = TruncatedSeries::var_at(&xy, 0, w);
    let y = TruncatedSeries::var_at(&xy, 1, w);
    let d = TruncatedSeries::one(&xy, w)
        .sub(&x.scale(&(&two * &p.beta)))?
        .add(&y.scale(&(&p.r + &ab_coef)))?;
    let dinv = geometric_inverse(&d)?;
    let f = x.add(&y.scale(&p.alpha))?.mul(&dinv)?.scale(&p.s);
    let g = y.mul(&dinv)?.scale(&st);

    let a = TruncatedSeries::var_at(&ab, 0, w);
    let b = TruncatedSeries::var_at(&ab, 1, w);
    let e = TruncatedSeries::one(&ab, w)
        .add(&a.scale(&p.alpha))?
        .add(&b.scale(&(&p.r + &three * &ab_coef)))?;
    let einv = geometric_inverse(&e)?;
    let lam = a.add(&b.scale(&(&two * &p.beta)))?.mul(&einv)?.scale(&p.t);
    let mu = b.mul(&einv)?.scale(&st);
    Ok(CoupledMap { f, g, lam, mu })
}

/// A manifold in normal form with the map that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalFormResult {
    pub phi: SolutionManifold,
    /// Coupled map from the input manifold to `phi`; `f` and `λ` are known
    /// to weight `W − 1`, `g` and `μ` to `W`.
    pub map: CoupledMap,
    pub params: NormalizationParams,
    pub weight: u32,
}

/// Brings `m` to normal form through weight `w`, starting with the model
/// automorphism `p`.
pub fn normalize_manifold(
    m: &SolutionManifold,
    w: u32,
    p: &NormalizationParams,
) -> Result<NormalFormResult> {
    if m.trunc() < w {
        return Err(SolutionError::InsufficientTruncation(format!(
            "manifold known to weight {}, normalization to {} requested",
            m.trunc(),
            w
        ))
        .into());
    }
    let h0 = model_automorphism(p, w)?;
    let mut phi = transform_manifold(&m.truncate(w), &h0)?;
    let mut tilde = CoupledMap::identity(w);
    for k in 3..=w {
        let comp = phi.phi().component(k)?;
        let psi = TruncatedSeries::from_terms(
            &VarContext::xab(),
            k,
            comp.terms()
                .filter(|(mono, _)| is_killed(mono.exp(0), mono.exp(1)))
                .map(|(mono, c)| (mono.exps(3), -c.clone())),
        );
        if psi.is_zero() {
            continue;
        }
        let d = homological_solve(&psi)?;
        let id = CoupledMap::identity(w);
        let step = CoupledMap {
            f: id.f.add(&d.f.with_trunc(w))?,
            g: id.g.add(&d.g.with_trunc(w))?,
            lam: id.lam.add(&d.lam.with_trunc(w))?,
            mu: id.mu.add(&d.mu.with_trunc(w))?,
        };
        phi = transform_manifold(&phi, &step)?;
        tilde = step.compose(&tilde)?;
    }
    let map = tilde.compose(&h0)?.truncate(w - 1, w);
    Ok(NormalFormResult {
        phi,
        map,
        params: p.clone(),
        weight: w,
    })
}

/// A coefficient `Φ_{kl}` that should vanish but does not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub k: u32,
    pub l: u32,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Φ{}{} ≠ 0", self.k, self.l)
    }
}

/// The killed coefficients present beyond weight 2.
pub fn check_normal_conditions(m: &SolutionManifold) -> Vec<Violation> {
    let mut out: Vec<Violation> = m
        .phi()
        .terms()
        .filter(|(mono, _)| mono.weight() >= 3 && is_killed(mono.exp(0), mono.exp(1)))
        .map(|(mono, _)| Violation {
            k: mono.exp(0),
            l: mono.exp(1),
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// The normal form of an ODE at the origin; `N` is known to weight `W − 2`.
pub fn normal_form_ode(
    f: &OdeJet,
    w: u32,
    p: &NormalizationParams,
) -> Result<(OdeJet, PointMap, NormalFormResult)> {
    let m = integrate_to_manifold(f, w)?;
    let res = normalize_manifold(&m, w, p)?;
    let n = manifold_to_ode(&res.phi)?;
    Ok((n, res.map.point_map(), res))
}

/// JSON table of a normal form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalFormTable {
    pub weight: u32,
    pub params: ParamsJson,
    pub phi_terms: Vec<TermJson>,
    pub ode_terms: Vec<TermJson>,
}

impl NormalFormTable {
    pub fn new(res: &NormalFormResult, ode: &OdeJet) -> Self {
        Self {
            weight: res.weight,
            params: res.params.to_json(),
            phi_terms: res.phi.phi().to_json().terms,
            ode_terms: ode.f().to_json().terms,
        }
    }
}
