//! Moving between an ODE `y'' = F` and its manifold of solutions
//! `y = Φ(x, a, b)`, and transporting both under point transformations.
//!
//! Parameters are admissible in the sense `Φ(0, a, b) = b`, `Φ_x(0, a, b) = a`.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::invariants::{InvariantError, OdeJet};
use crate::pseries::{int, invert_map, rat, Rational, SeriesError, TruncatedSeries, VarContext};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolutionError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error("insufficient truncation: {0}")]
    InsufficientTruncation(String),
    #[error("manifold shape violated: {0}")]
    Shape(String),
    #[error("recentering away from the origin needs a polynomial right-hand side")]
    NotPolynomial,
    #[error("point map is not admissible: {0}")]
    BadMap(String),
}

pub type Result<T> = std::result::Result<T, SolutionError>;

/// `y = Φ(x, a, b)` with `Φ = b + ax + O(3)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionManifold {
    phi: TruncatedSeries,
}

impl SolutionManifold {
    pub fn new(phi: TruncatedSeries) -> Result<Self> {
        if **phi.ctx() != *VarContext::xab() {
            return Err(SolutionError::Shape(
                "expected a series in (x, a, b)".into(),
            ));
        }
        if phi.trunc() < 2 {
            return Err(SolutionError::Shape("truncation below 2".into()));
        }
        let low: Vec<_> = phi.terms().filter(|(m, _)| m.weight() <= 2).collect();
        let model = TruncatedSeries::from_terms(
            &VarContext::xab(),
            2,
            [(vec![0, 0, 1], int(1)), (vec![1, 1, 0], int(1))],
        );
        let have = TruncatedSeries::from_terms(
            &VarContext::xab(),
            2,
            low.into_iter().map(|(m, c)| (m.exps(3), c.clone())),
        );
        if have != model {
            return Err(SolutionError::Shape(format!(
                "low-weight part is `{have}`, expected `b + x*a`"
            )));
        }
        Ok(Self { phi })
    }

    /// The model `y = b + ax`, truncated at `w`.
    pub fn model(w: u32) -> Self {
        Self {
            phi: TruncatedSeries::from_terms(
                &VarContext::xab(),
                w,
                [(vec![0, 0, 1], int(1)), (vec![1, 1, 0], int(1))],
            ),
        }
    }

    pub fn phi(&self) -> &TruncatedSeries {
        &self.phi
    }

    pub fn trunc(&self) -> u32 {
        self.phi.trunc()
    }

    pub fn truncate(&self, w: u32) -> Self {
        Self {
            phi: self.phi.truncate(w),
        }
    }

    /// Coefficient `Φ_{kl}(0)` of `x^k a^l`.
    pub fn coeff(&self, k: u32, l: u32, j: u32) -> Rational {
        self.phi.coeff(&[k, l, j])
    }
}

/// Point transformation `(x, y) ↦ (f, g)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointMap {
    pub f: TruncatedSeries,
    pub g: TruncatedSeries,
}

impl PointMap {
    pub fn new(f: TruncatedSeries, g: TruncatedSeries) -> Result<Self> {
        let ctx = VarContext::xy();
        if **f.ctx() != *ctx || **g.ctx() != *ctx {
            return Err(SolutionError::BadMap("expected series in (x, y)".into()));
        }
        Ok(Self { f, g })
    }

    pub fn identity(w: u32) -> Self {
        let ctx = VarContext::xy();
        Self {
            f: TruncatedSeries::var_at(&ctx, 0, w),
            g: TruncatedSeries::var_at(&ctx, 1, w),
        }
    }

    pub fn trunc(&self) -> u32 {
        self.f.trunc().min(self.g.trunc())
    }

    /// Checks the conditions for a map whose prolongation fixes the origin
    /// of the jet space.
    pub fn check_admissible(&self) -> Result<()> {
        if !self.f.constant_term().is_zero() || !self.g.constant_term().is_zero() {
            return Err(SolutionError::BadMap("the origin is not fixed".into()));
        }
        if !self.g.coeff(&[1, 0]).is_zero() {
            return Err(SolutionError::BadMap("g_x(0,0) must vanish".into()));
        }
        if self.f.coeff(&[1, 0]).is_zero() || self.g.coeff(&[0, 1]).is_zero() {
            return Err(SolutionError::BadMap(
                "Jacobian at the origin is singular".into(),
            ));
        }
        Ok(())
    }

    /// `(x, y) ↦ self(other(x, y))`.
    pub fn compose(&self, other: &PointMap) -> Result<PointMap> {
        let subs = [other.f.clone(), other.g.clone()];
        Ok(PointMap {
            f: self.f.compose_exact(&subs)?,
            g: self.g.compose_exact(&subs)?,
        })
    }

    /// Treats both components as polynomials known to every weight.
    pub fn as_polynomial(&self, w: u32) -> PointMap {
        PointMap {
            f: self.f.clone().with_trunc(w),
            g: self.g.clone().with_trunc(w),
        }
    }
}

/// Product transformation `(f(x,y), g(x,y), λ(a,b), μ(a,b))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledMap {
    pub f: TruncatedSeries,
    pub g: TruncatedSeries,
    pub lam: TruncatedSeries,
    pub mu: TruncatedSeries,
}

impl CoupledMap {
    pub fn identity(w: u32) -> Self {
        let xy = VarContext::xy();
        let ab = VarContext::ab();
        Self {
            f: TruncatedSeries::var_at(&xy, 0, w),
            g: TruncatedSeries::var_at(&xy, 1, w),
            lam: TruncatedSeries::var_at(&ab, 0, w),
            mu: TruncatedSeries::var_at(&ab, 1, w),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &CoupledMap) -> Result<CoupledMap> {
        let pt = [other.f.clone(), other.g.clone()];
        let par = [other.lam.clone(), other.mu.clone()];
        Ok(CoupledMap {
            f: self.f.compose(&pt)?,
            g: self.g.compose(&pt)?,
            lam: self.lam.compose(&par)?,
            mu: self.mu.compose(&par)?,
        })
    }

    pub fn point_map(&self) -> PointMap {
        PointMap {
            f: self.f.clone(),
            g: self.g.clone(),
        }
    }

    pub fn truncate(&self, wf: u32, wg: u32) -> CoupledMap {
        CoupledMap {
            f: self.f.truncate(wf),
            g: self.g.truncate(wg),
            lam: self.lam.truncate(wf),
            mu: self.mu.truncate(wg),
        }
    }
}

fn xyu_var(i: usize, w: u32) -> TruncatedSeries {
    TruncatedSeries::var_at(&VarContext::xyu(), i, w)
}

fn xab_var(i: usize, w: u32) -> TruncatedSeries {
    TruncatedSeries::var_at(&VarContext::xab(), i, w)
}

/// Moves the 1-jet `p = (x0, y0, u0)` to the origin and removes `F(p)`.
///
/// Returns the new right-hand side together with the map
/// `x ↦ x − x0`, `y ↦ y − y0 − u0 (x − x0) − ½ F(p) (x − x0)²`.
pub fn recenter(f: &OdeJet, p: &[Rational; 3]) -> Result<(OdeJet, PointMap)> {
    let at_origin = p.iter().all(|v| v.is_zero());
    if !at_origin && !f.is_exact() {
        return Err(SolutionError::NotPolynomial);
    }
    let s = f.f();
    let w = s.trunc();
    let c = if at_origin {
        s.constant_term()
    } else {
        s.eval(p)
    };
    let half_c = &c * rat(1, 2);
    let ctx = VarContext::xyu();
    let cst = |v: &Rational| TruncatedSeries::constant(&ctx, v.clone(), w);
    let x = xyu_var(0, w);
    let y = xyu_var(1, w);
    let u = xyu_var(2, w);
    let x2 = x.mul(&x)?;
    let sx = x.add(&cst(&p[0]))?;
    let sy = y
        .add(&cst(&p[1]))?
        .add(&x.scale(&p[2]))?
        .add(&x2.scale(&half_c))?;
    let su = u.add(&cst(&p[2]))?.add(&x.scale(&c))?;
    let shifted = if at_origin {
        s.compose(&[sx, sy, su])?
    } else {
        s.compose_exact(&[sx, sy, su])?.with_trunc(w)
    };
    let fnew = shifted.sub(&cst(&c))?;
    let jet = if f.is_exact() {
        OdeJet::polynomial(fnew)?
    } else {
        OdeJet::new(fnew)?
    };

    let xy = VarContext::xy();
    let mw = w.max(4);
    let xs = TruncatedSeries::var_at(&xy, 0, mw).sub(&TruncatedSeries::constant(
        &xy,
        p[0].clone(),
        mw,
    ))?;
    let ys = TruncatedSeries::var_at(&xy, 1, mw);
    let g = ys
        .sub(&TruncatedSeries::constant(&xy, p[1].clone(), mw))?
        .sub(&xs.scale(&p[2]))?
        .sub(&xs.mul(&xs)?.scale(&half_c))?;
    Ok((jet.with_base(p.clone()), PointMap { f: xs, g }))
}

/// Solves `Φ_xx = F(x, Φ, Φ_x)`, `Φ(0) = b`, `Φ_x(0) = a` to weight `w`.
pub fn integrate_to_manifold(f: &OdeJet, w: u32) -> Result<SolutionManifold> {
    let need = w.saturating_sub(2);
    let fs = if f.trunc() >= need {
        f.f().truncate(need)
    } else if f.is_exact() {
        f.f().clone().with_trunc(need)
    } else {
        return Err(SolutionError::InsufficientTruncation(format!(
            "F known to weight {}, weight {} manifold needs {}",
            f.trunc(),
            w,
            need
        )));
    };
    let ctx = VarContext::xab();
    let model = SolutionManifold::model(w).phi;
    let x = xab_var(0, w);
    let mut phi = model.clone();
    // Each pass fixes one more weight; the cap grows with it.
    for k in 0..w {
        let cap = (k + 2).min(w);
        let p = phi.truncate(cap);
        let px = p.differentiate_at(0);
        let inner = cap.saturating_sub(2);
        let rhs = fs.compose_capped(&[x.truncate(inner), p, px], &ctx, inner);
        let next = model.add(&rhs.antiderivative_at(0).antiderivative_at(0).with_trunc(w))?;
        phi = next;
    }
    Ok(SolutionManifold { phi })
}

/// Inverts `(x, a, b) ↦ (x, Φ, Φ_x)`, returning `(A, B)` in `(x, y, u)`.
pub fn solve_parameters(m: &SolutionManifold) -> Result<(TruncatedSeries, TruncatedSeries)> {
    let w = m.trunc();
    let phi = &m.phi;
    let inv = invert_map(
        &[xab_var(0, w), phi.clone(), phi.differentiate_at(0)],
        &VarContext::xyu(),
    )?;
    Ok((inv[1].clone(), inv[2].clone()))
}

/// The ODE whose solutions are the graphs of `Φ`; truncated at `trunc − 2`.
pub fn manifold_to_ode(m: &SolutionManifold) -> Result<OdeJet> {
    let w = m.trunc();
    if w < 2 {
        return Err(SolutionError::InsufficientTruncation(
            "manifold below weight 2".into(),
        ));
    }
    let (a, b) = solve_parameters(m)?;
    let pxx = m.phi.differentiate_at(0).differentiate_at(0);
    let x = xyu_var(0, w);
    let f = pxx
        .compose_capped(&[x, a, b], &VarContext::xyu(), w - 2)
        .with_trunc(w - 2);
    Ok(OdeJet::new(f)?)
}

/// The prolonged map on `(x, y, u)`.
pub fn prolong_map(h: &PointMap) -> Result<[TruncatedSeries; 3]> {
    let xyu = VarContext::xyu();
    let w = h.trunc();
    let x = xyu_var(0, w);
    let y = xyu_var(1, w);
    let u = xyu_var(2, w);
    let lift = |s: &TruncatedSeries| s.compose(&[x.clone(), y.clone()]);
    let f = lift(&h.f)?;
    let g = lift(&h.g)?;
    let num = g
        .differentiate_at(0)
        .add(&u.mul_exact(&g.differentiate_at(1))?)?;
    let den = f
        .differentiate_at(0)
        .add(&u.mul_exact(&f.differentiate_at(1))?)?;
    let d0 = den.constant_term();
    if d0.is_zero() {
        return Err(SolutionError::BadMap(
            "f_x(0,0) = 0: prolongation undefined".into(),
        ));
    }
    let inv = geometric_inverse(&den)?;
    let _ = xyu;
    Ok([f, g, num.mul_exact(&inv)?])
}

/// `1/s` for a series with nonzero constant term.
pub fn geometric_inverse(s: &TruncatedSeries) -> Result<TruncatedSeries> {
    let c = s.constant_term();
    if c.is_zero() {
        return Err(SeriesError::VanishingLinearCoefficient("constant term".into()).into());
    }
    let w = s.trunc();
    let cinv = c.recip();
    let ctx = s.ctx();
    let q = TruncatedSeries::one(ctx, w).sub(&s.scale(&cinv))?;
    let mut acc = TruncatedSeries::one(ctx, w);
    let mut pw = TruncatedSeries::one(ctx, w);
    for _ in 0..w {
        pw = pw.mul(&q)?;
        if pw.is_zero() {
            break;
        }
        acc = acc.add(&pw)?;
    }
    Ok(acc.scale(&cinv))
}

/// Image of the manifold under a coupled map: the `Φ*` with
/// `g(x, Φ(x,a,b)) = Φ*(f(x, Φ), λ(a,b), μ(a,b))`.
pub fn transform_manifold(m: &SolutionManifold, h: &CoupledMap) -> Result<SolutionManifold> {
    let w = m.trunc();
    let ctx = VarContext::xab();
    let x = xab_var(0, w);
    let on_graph = [x.clone(), m.phi.clone()];
    let p = h.f.compose(&on_graph)?;
    let q = h.g.compose(&on_graph)?;
    let inv = invert_map(&[h.lam.clone(), h.mu.clone()], &VarContext::ab())?;
    let big_l = inv[0].embed(&ctx)?;
    let big_m = inv[1].embed(&ctx)?;
    let re = [x.clone(), big_l, big_m];
    let p2 = p.compose(&re)?;
    let q2 = q.compose(&re)?;
    let xi = p2.invert_in_x()?;
    let a = xab_var(1, xi.trunc());
    let b = xab_var(2, xi.trunc());
    let phi = q2.compose(&[xi, a, b])?;
    let phi = phi.truncate(w);
    SolutionManifold::new(phi)
}

/// Image graph family `Ψ(x, a, b)` of the solutions under `h`, before the
/// parameters are made admissible.
fn image_family(m: &SolutionManifold, h: &PointMap) -> Result<TruncatedSeries> {
    let w = m.trunc();
    let x = xab_var(0, w);
    let on_graph = [x, m.phi.clone()];
    let xs = h.f.compose(&on_graph)?;
    let ys = h.g.compose(&on_graph)?;
    let xi = xs.invert_in_x()?;
    let t = xi.trunc();
    Ok(ys.compose(&[xi, xab_var(1, t), xab_var(2, t)])?)
}

/// Reparameterizes a graph family so that `Ψ(0,a,b) = b`, `Ψ_x(0,a,b) = a`.
/// Returns the admissible family and the parameter map `(λ, μ)` with
/// `Ψ(x, a, b) = Φ*(x, λ(a,b), μ(a,b))`.
pub fn admissibilize(
    psi: &TruncatedSeries,
) -> Result<(SolutionManifold, TruncatedSeries, TruncatedSeries)> {
    let ab = VarContext::ab();
    let xab = VarContext::xab();
    let lam = psi.differentiate_at(0).at_zero(0).restrict(&ab)?;
    let mu = psi.at_zero(0).restrict(&ab)?;
    let inv = invert_map(&[lam.clone(), mu.clone()], &ab)?;
    let t = psi.trunc();
    let phi = psi.compose(&[xab_var(0, t), inv[0].embed(&xab)?, inv[1].embed(&xab)?])?;
    Ok((SolutionManifold::new(phi)?, lam, mu))
}

/// The ODE satisfied by the images of the solutions of `F` under `h`,
/// recentered so that it vanishes at the origin, to weight `w`.
pub fn transform_ode(f: &OdeJet, h: &PointMap, w: u32) -> Result<OdeJet> {
    Ok(transform_ode_with_map(f, h, w)?.0)
}

/// As [`transform_ode`], also returning the full map applied (including
/// the final quadratic recentering).
pub fn transform_ode_with_map(f: &OdeJet, h: &PointMap, w: u32) -> Result<(OdeJet, PointMap)> {
    h.check_admissible()?;
    let wm = w + 2;
    let hw = if h.trunc() >= wm {
        h.clone()
    } else {
        h.as_polynomial(wm)
    };
    let m = integrate_to_manifold(f, wm)?;
    let psi = image_family(&m, &hw)?;
    // Remove the constant curvature of the image family: (x, y) ↦ (x, y − κx²).
    let kappa = psi.coeff(&[2, 0, 0]);
    let psi = psi.sub(&TruncatedSeries::monomial(
        &VarContext::xab(),
        &[2, 0, 0],
        kappa.clone(),
        psi.trunc(),
    ))?;
    let (star, _, _) = admissibilize(&psi)?;
    if star.trunc() < wm {
        return Err(SolutionError::InsufficientTruncation(format!(
            "transformed manifold known to weight {} < {}",
            star.trunc(),
            wm
        )));
    }
    let out = manifold_to_ode(&star.truncate(wm))?;
    let xy = VarContext::xy();
    let x = TruncatedSeries::var_at(&xy, 0, wm);
    let shift = PointMap {
        f: x.clone(),
        g: TruncatedSeries::var_at(&xy, 1, wm).sub(&x.mul(&x)?.scale(&kappa))?,
    };
    let total = shift.compose(&hw)?;
    Ok((out, total))
}

/// Convenience: `(a, b)` parameters of the solution through `(x0, y0, u0)`
/// are `(u0, y0)` only at `x0 = 0`; this returns the solution's value and
/// slope at `x` as exact numbers for a polynomial truncation.
pub fn solution_jet(
    m: &SolutionManifold,
    x: &Rational,
    a: &Rational,
    b: &Rational,
) -> [Rational; 3] {
    let p = [x.clone(), a.clone(), b.clone()];
    let phi = &m.phi;
    [
        phi.eval(&p),
        phi.differentiate_at(0).eval(&p),
        phi.differentiate_at(0).differentiate_at(0).eval(&p),
    ]
}

#[allow(dead_code)]
fn one() -> Rational {
    Rational::one()
}
