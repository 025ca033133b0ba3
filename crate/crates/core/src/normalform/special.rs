//! Special normal form at a strongly nonflat point and the equivalence test.
//!
//! The normalization parameters `α, β, r` are solved exactly (the relevant
//! coefficients depend affinely on them). The final scaling needs an eighth
//! root, so the coefficient table is then produced in decimal floating point.

use std::num::NonZeroU64;

use bigdecimal::{BigDecimal, Context};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{
    normalize_manifold, NormalFormError, NormalFormResult, NormalFormTable, NormalizationParams,
    Result,
};
use crate::invariants::{classify_point, tresse_invariants, OdeJet, PointKind};
use crate::pseries::{Rational, TruncatedSeries};
use crate::solutions::{integrate_to_manifold, manifold_to_ode, SolutionManifold};

/// Lowest weight carrying every coefficient the special conditions touch.
pub const MIN_WEIGHT: u32 = 8;

/// A special normal form: `Φ_{42}(0) = 1`, `Φ_{24}(0) = ε`,
/// `Φ_{43}(0) = Φ_{34}(0) = Φ_{53}(0) = 0`.
#[derive(Clone, Debug)]
pub struct SpecialForm {
    /// Normal form with `s = t = 1` and the solved `α, β, r`.
    pub exact: NormalFormResult,
    /// Its ODE, known to weight `W − 2`.
    pub exact_ode: OdeJet,
    pub epsilon: i8,
    /// Scale factors applied to the exact form: the coefficient of
    /// `x^k a^l b^j` is multiplied by `σ^{k+j−1} τ^{l+j−1}`.
    pub sigma: BigDecimal,
    pub tau: BigDecimal,
    /// Whether the `(x, a) ↦ (−x, −a)` representative was taken.
    pub z2_flipped: bool,
    pub precision: u64,
    pub phi_terms: Vec<(Vec<u32>, BigDecimal)>,
    pub ode_terms: Vec<(Vec<u32>, BigDecimal)>,
}

impl SpecialForm {
    pub fn weight(&self) -> u32 {
        self.exact.weight
    }

    pub fn tolerance(&self) -> BigDecimal {
        tolerance(self.precision)
    }

    pub fn phi_coeff(&self, exp: &[u32]) -> BigDecimal {
        lookup(&self.phi_terms, exp)
    }

    pub fn ode_coeff(&self, exp: &[u32]) -> BigDecimal {
        lookup(&self.ode_terms, exp)
    }

    /// The other representative under `(x, a) ↦ (−x, −a)`.
    pub fn z2_image(&self) -> Vec<(Vec<u32>, BigDecimal)> {
        flip_odd(&self.phi_terms)
    }

    pub fn to_json(&self) -> SpecialFormJson {
        let digits = self.precision;
        let fmt = |v: &BigDecimal| format_decimal(v, digits);
        SpecialFormJson {
            table: NormalFormTable::new(&self.exact, &self.exact_ode),
            epsilon: self.epsilon,
            precision: self.precision,
            sigma: fmt(&self.sigma),
            tau: fmt(&self.tau),
            z2_flipped: self.z2_flipped,
            float_terms: self
                .phi_terms
                .iter()
                .map(|(e, v)| FloatTerm {
                    exp: e.clone(),
                    val: fmt(v),
                })
                .collect(),
            ode_float_terms: self
                .ode_terms
                .iter()
                .map(|(e, v)| FloatTerm {
                    exp: e.clone(),
                    val: fmt(v),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatTerm {
    pub exp: Vec<u32>,
    pub val: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialFormJson {
    #[serde(flatten)]
    pub table: NormalFormTable,
    pub epsilon: i8,
    pub precision: u64,
    pub sigma: String,
    pub tau: String,
    pub z2_flipped: bool,
    pub float_terms: Vec<FloatTerm>,
    pub ode_float_terms: Vec<FloatTerm>,
}

fn lookup(terms: &[(Vec<u32>, BigDecimal)], exp: &[u32]) -> BigDecimal {
    terms
        .iter()
        .find(|(e, _)| e.as_slice() == exp)
        .map(|(_, v)| v.clone())
        .unwrap_or_else(BigDecimal::zero)
}

fn flip_odd(terms: &[(Vec<u32>, BigDecimal)]) -> Vec<(Vec<u32>, BigDecimal)> {
    terms
        .iter()
        .map(|(e, v)| {
            if (e[0] + e[1]) % 2 == 1 {
                (e.clone(), -v.clone())
            } else {
                (e.clone(), v.clone())
            }
        })
        .collect()
}

/// `10^(−precision/2)`.
pub fn tolerance(precision: u64) -> BigDecimal {
    BigDecimal::new(1.into(), (precision / 2) as i64)
}

fn context(precision: u64) -> Context {
    Context::default().with_precision(NonZeroU64::new(precision + 10).unwrap())
}

pub fn to_decimal(q: &Rational, ctx: &Context) -> BigDecimal {
    let n = BigDecimal::new(q.numer().clone(), 0);
    let d = BigDecimal::new(q.denom().clone(), 0);
    ctx.round_decimal(n * ctx.invert(&d))
}

pub fn format_decimal(v: &BigDecimal, digits: u64) -> String {
    let r = v.with_prec(digits.max(1));
    if r.is_zero() {
        "0".to_string()
    } else {
        r.normalized().to_string()
    }
}

/// `σ^e` for a possibly negative `e`.
fn power(base: &BigDecimal, e: i64, ctx: &Context) -> BigDecimal {
    let mut acc = BigDecimal::one();
    for _ in 0..e.unsigned_abs() {
        acc = ctx.round_decimal(acc * base);
    }
    if e < 0 {
        ctx.invert(&acc)
    } else {
        acc
    }
}

fn special_coeffs(phi: &TruncatedSeries) -> [Rational; 3] {
    [
        phi.coeff(&[4, 3, 0]),
        phi.coeff(&[3, 4, 0]),
        phi.coeff(&[5, 3, 0]),
    ]
}

/// Computes the special normal form of `F` at the origin to weight `w`.
pub fn special_normalize(f: &OdeJet, w: u32, precision: u64) -> Result<SpecialForm> {
    if precision == 0 {
        return Err(NormalFormError::Precision(
            "precision must be positive".into(),
        ));
    }
    if w < MIN_WEIGHT {
        return Err(NormalFormError::WeightTooLow(w, MIN_WEIGHT));
    }
    let class = classify_point(&f.at_trunc(f.trunc().max(w.saturating_sub(2))))?;
    if class.kind != PointKind::StronglyNonflat {
        return Err(NormalFormError::NotStronglyNonflat(class.kind));
    }
    let m = integrate_to_manifold(f, w)?;
    let params = solve_parameters(&m, w)?;
    let exact = normalize_manifold(&m, w, &params)?;
    let phi = exact.phi.phi().clone();
    let [c43, c34, c53] = special_coeffs(&phi);
    if !(c43.is_zero() && c34.is_zero() && c53.is_zero()) {
        return Err(NormalFormError::ParameterSolve(
            "solved parameters do not annihilate the special coefficients".into(),
        ));
    }
    let exact_ode = manifold_to_ode(&exact.phi)?;

    let p = phi.coeff(&[4, 2, 0]);
    let q = phi.coeff(&[2, 4, 0]);
    if p.is_zero() || q.is_zero() {
        return Err(NormalFormError::ParameterSolve(
            "vanishing weight-6 coefficient at a strongly nonflat point".into(),
        ));
    }
    let epsilon: i8 = if (&p * &q).is_positive() { 1 } else { -1 };
    let ctx = context(precision);
    // σ⁸ = q / (ε p³), τ = 1 / (p σ³).
    let eight = &q / (&p * &p * &p * Rational::from_integer(epsilon.into()));
    let mut sigma = to_decimal(&eight, &ctx);
    for _ in 0..3 {
        sigma = sigma
            .sqrt_with_context(&ctx)
            .ok_or_else(|| NormalFormError::Precision("square root of a negative".into()))?;
    }
    let pd = to_decimal(&p, &ctx);
    let mut tau = ctx.invert(&ctx.round_decimal(&pd * &power(&sigma, 3, &ctx)));

    let scale_phi = |sigma: &BigDecimal, tau: &BigDecimal| -> Vec<(Vec<u32>, BigDecimal)> {
        phi.terms()
            .map(|(mono, c)| {
                let e = mono.exps(3);
                let (k, l, j) = (e[0] as i64, e[1] as i64, e[2] as i64);
                let v = to_decimal(c, &ctx)
                    * power(sigma, k + j - 1, &ctx)
                    * power(tau, l + j - 1, &ctx);
                (e, ctx.round_decimal(v))
            })
            .collect()
    };
    let mut phi_terms = scale_phi(&sigma, &tau);

    let tol = tolerance(precision);
    let first_odd = phi_terms
        .iter()
        .find(|(e, v)| (e[0] + e[1]) % 2 == 1 && v.abs() > tol)
        .map(|(_, v)| v.is_negative());
    let z2_flipped = first_odd == Some(true);
    if z2_flipped {
        sigma = -sigma;
        tau = -tau;
        phi_terms = flip_odd(&phi_terms);
    }

    let ode_terms: Vec<(Vec<u32>, BigDecimal)> = exact_ode
        .f()
        .terms()
        .map(|(mono, c)| {
            // x^k y^j u^l scales by σ^{1+k+j} τ^{j+l−1}.
            let e = mono.exps(3);
            let (k, j, l) = (e[0] as i64, e[1] as i64, e[2] as i64);
            let v =
                to_decimal(c, &ctx) * power(&sigma, 1 + k + j, &ctx) * power(&tau, j + l - 1, &ctx);
            (e, ctx.round_decimal(v))
        })
        .collect();

    let form = SpecialForm {
        exact,
        exact_ode,
        epsilon,
        sigma,
        tau,
        z2_flipped,
        precision,
        phi_terms,
        ode_terms,
    };
    let one = BigDecimal::one();
    let eps = BigDecimal::from(epsilon as i64);
    if (form.phi_coeff(&[4, 2, 0]) - one).abs() > tol
        || (form.phi_coeff(&[2, 4, 0]) - eps).abs() > tol
    {
        return Err(NormalFormError::Precision(
            "scaled coefficients miss their targets; raise the precision".into(),
        ));
    }
    Ok(form)
}

/// Exact `(α, β, r)` with `s = t = 1` giving `Φ_{43}(0) = Φ_{34}(0) = Φ_{53}(0) = 0`.
///
/// The first two coefficients are affine in `(α, β)` and the third is affine
/// in `r`; the affine models are fitted from normalizations at a few
/// parameter values and the solution is checked by a final normalization.
fn solve_parameters(m: &SolutionManifold, w: u32) -> Result<NormalizationParams> {
    let z = Rational::zero;
    let o = Rational::one;
    let coeffs = |a: Rational, b: Rational, r: Rational| -> Result<[Rational; 3]> {
        let res = normalize_manifold(m, w, &NormalizationParams::with_abr(a, b, r))?;
        Ok(special_coeffs(res.phi.phi()))
    };
    let base = coeffs(z(), z(), z())?;
    let da = coeffs(o(), z(), z())?;
    let db = coeffs(z(), o(), z())?;
    // [c43; c34](α, β) = base + J (α, β)
    let j = [
        [&da[0] - &base[0], &db[0] - &base[0]],
        [&da[1] - &base[1], &db[1] - &base[1]],
    ];
    let det = &j[0][0] * &j[1][1] - &j[0][1] * &j[1][0];
    if det.is_zero() {
        return Err(NormalFormError::ParameterSolve(
            "degenerate dependence of Φ43, Φ34 on (α, β)".into(),
        ));
    }
    let (r0, r1) = (-base[0].clone(), -base[1].clone());
    let alpha = (&r0 * &j[1][1] - &j[0][1] * &r1) / &det;
    let beta = (&j[0][0] * &r1 - &j[1][0] * &r0) / &det;

    let at0 = coeffs(alpha.clone(), beta.clone(), z())?;
    if !(at0[0].is_zero() && at0[1].is_zero()) {
        return Err(NormalFormError::ParameterSolve(
            "Φ43, Φ34 are not affine in (α, β)".into(),
        ));
    }
    let at1 = coeffs(alpha.clone(), beta.clone(), o())?;
    let slope = &at1[2] - &at0[2];
    if slope.is_zero() {
        return Err(NormalFormError::ParameterSolve(
            "Φ53 does not depend on r".into(),
        ));
    }
    let r = -&at0[2] / slope;
    Ok(NormalizationParams::with_abr(alpha, beta, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Inequivalent,
    EquivalentToWeight,
    BothFlatToWeight,
    Undecided,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerdictKind::Inequivalent => "INEQUIVALENT",
            VerdictKind::EquivalentToWeight => "EQUIVALENT_TO_WEIGHT",
            VerdictKind::BothFlatToWeight => "BOTH_FLAT_TO_WEIGHT",
            VerdictKind::Undecided => "UNDECIDED",
        })
    }
}

/// What tells two equations apart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp: Option<Vec<u32>>,
    pub left: String,
    pub right: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub weight: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

fn first_difference(
    a: &[(Vec<u32>, BigDecimal)],
    b: &[(Vec<u32>, BigDecimal)],
    tol: &BigDecimal,
) -> Option<(Vec<u32>, BigDecimal, BigDecimal, BigDecimal)> {
    let mut exps: Vec<&Vec<u32>> = a.iter().chain(b.iter()).map(|(e, _)| e).collect();
    exps.sort_by_key(|e| (e[0] + e[1] + 2 * e[2], (*e).clone()));
    exps.dedup();
    for e in exps {
        let va = lookup(a, e);
        let vb = lookup(b, e);
        let gap = (&va - &vb).abs();
        let scale = BigDecimal::one().max(va.abs()).max(vb.abs());
        if gap > tol * scale {
            return Some((e.clone(), va, vb, gap));
        }
    }
    None
}

/// Decides point equivalence of `y'' = F1` and `y'' = F2` at their origins,
/// as far as weight `w` can tell.
pub fn decide_equivalence(f1: &OdeJet, f2: &OdeJet, w: u32, precision: u64) -> Result<Verdict> {
    let inv_trunc = w.max(MIN_WEIGHT).saturating_sub(2).max(6);
    let g1 = f1.at_trunc(f1.trunc().max(inv_trunc));
    let g2 = f2.at_trunc(f2.trunc().max(inv_trunc));
    let c1 = classify_point(&g1)?;
    let c2 = classify_point(&g2)?;
    let pattern = |c: &crate::invariants::PointClass| (c.i1_at.is_zero(), c.i2_at.is_zero());
    let verdict = |kind, witness| Verdict {
        kind,
        weight: w,
        witness,
    };
    if pattern(&c1) != pattern(&c2) {
        return Ok(verdict(
            VerdictKind::Inequivalent,
            Some(Witness {
                label: "point class".into(),
                exp: None,
                left: format!("{} (I1={}, I2={})", c1.kind, c1.i1_at, c1.i2_at),
                right: format!("{} (I1={}, I2={})", c2.kind, c2.i1_at, c2.i2_at),
                gap: None,
            }),
        ));
    }
    match c1.kind {
        PointKind::Flat => {
            let vanish = |g: &OdeJet| -> Result<bool> {
                let (i1, i2) = tresse_invariants(g)?;
                Ok(i1.is_zero() && i2.is_zero())
            };
            let (z1, z2) = (vanish(&g1)?, vanish(&g2)?);
            if z1 && z2 {
                Ok(verdict(VerdictKind::BothFlatToWeight, None))
            } else if z1 != z2 {
                Ok(verdict(
                    VerdictKind::Inequivalent,
                    Some(Witness {
                        label: "identically vanishing invariants".into(),
                        exp: None,
                        left: z1.to_string(),
                        right: z2.to_string(),
                        gap: None,
                    }),
                ))
            } else {
                Ok(verdict(VerdictKind::Undecided, None))
            }
        }
        PointKind::SemiFlat => Ok(verdict(VerdictKind::Undecided, None)),
        PointKind::StronglyNonflat => {
            let s1 = special_normalize(f1, w, precision)?;
            let s2 = special_normalize(f2, w, precision)?;
            if s1.epsilon != s2.epsilon {
                return Ok(verdict(
                    VerdictKind::Inequivalent,
                    Some(Witness {
                        label: "epsilon".into(),
                        exp: None,
                        left: s1.epsilon.to_string(),
                        right: s2.epsilon.to_string(),
                        gap: None,
                    }),
                ));
            }
            let tol = tolerance(precision);
            let direct = first_difference(&s1.phi_terms, &s2.phi_terms, &tol);
            let flipped = first_difference(&s1.phi_terms, &s2.z2_image(), &tol);
            match (direct, flipped) {
                (None, _) | (_, None) => Ok(verdict(VerdictKind::EquivalentToWeight, None)),
                (Some((e, a, b, gap)), Some(_)) => Ok(verdict(
                    VerdictKind::Inequivalent,
                    Some(Witness {
                        label: "special normal form coefficient".into(),
                        exp: Some(e),
                        left: format_decimal(&a, precision),
                        right: format_decimal(&b, precision),
                        gap: Some(format_decimal(&gap, 6)),
                    }),
                )),
            }
        }
    }
}
