//! The two order-4 relative invariants of `y'' = F(x, y, y')` and pointwise
//! flatness.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_ode_complete, ParseError};
use crate::pseries::{int, Rational, SeriesError, TruncatedSeries, VarContext};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantError {
    #[error("insufficient truncation: F known to weight {0}, need at least {1}")]
    InsufficientTruncation(u32, u32),
    #[error("expected a series in (x, y, u)")]
    WrongContext,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Right-hand side of `y'' = F(x, y, u)`, `u = y'`, expanded around `base`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OdeJet {
    f: TruncatedSeries,
    base: [Rational; 3],
    exact: bool,
}

impl OdeJet {
    /// A truncated expansion at the origin.
    pub fn new(f: TruncatedSeries) -> Result<Self, InvariantError> {
        if **f.ctx() != *VarContext::xyu() {
            return Err(InvariantError::WrongContext);
        }
        Ok(Self {
            f,
            base: [Rational::zero(), Rational::zero(), Rational::zero()],
            exact: false,
        })
    }

    /// A polynomial right-hand side: the stored terms are all of `F`.
    pub fn polynomial(f: TruncatedSeries) -> Result<Self, InvariantError> {
        let mut j = Self::new(f)?;
        j.exact = true;
        Ok(j)
    }

    /// Parses `F`. The jet is exact when the whole polynomial fits within
    /// `trunc`, and a plain truncation otherwise.
    pub fn parse(text: &str, trunc: u32) -> Result<Self, ParseError> {
        let (f, complete) = parse_ode_complete(text, trunc)?;
        let jet = if complete && f.max_weight() <= trunc {
            Self::polynomial(f)
        } else {
            Self::new(f)
        };
        Ok(jet.expect("parser yields (x,y,u)"))
    }

    pub fn with_base(mut self, base: [Rational; 3]) -> Self {
        self.base = base;
        self
    }

    pub fn f(&self) -> &TruncatedSeries {
        &self.f
    }

    pub fn trunc(&self) -> u32 {
        self.f.trunc()
    }

    pub fn base(&self) -> &[Rational; 3] {
        &self.base
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Re-truncates; an exact polynomial may be raised to any weight.
    pub fn at_trunc(&self, w: u32) -> Self {
        let f = if self.exact {
            self.f.clone().with_trunc(w)
        } else {
            self.f.truncate(w)
        };
        Self {
            f,
            base: self.base.clone(),
            exact: self.exact && f_is_complete(&self.f, w),
        }
    }
}

fn f_is_complete(f: &TruncatedSeries, w: u32) -> bool {
    f.max_weight() <= w
}

/// `DG = G_x + u G_y + F G_u`.
pub fn total_derivative(
    f: &OdeJet,
    g: &TruncatedSeries,
) -> Result<TruncatedSeries, InvariantError> {
    if **g.ctx() != *VarContext::xyu() {
        return Err(InvariantError::WrongContext);
    }
    let ctx = g.ctx();
    let u = TruncatedSeries::var_at(ctx, 2, g.trunc());
    let gx = g.differentiate_at(0);
    let gy = g.differentiate_at(1);
    let gu = g.differentiate_at(2);
    let r = gx.add(&u.mul_exact(&gy)?)?.add(&f.f.mul_exact(&gu)?)?;
    Ok(r)
}

/// `(I1, I2)` as series; both are truncated at `F.trunc - 4`.
pub fn tresse_invariants(f: &OdeJet) -> Result<(TruncatedSeries, TruncatedSeries), InvariantError> {
    if f.trunc() < 6 {
        return Err(InvariantError::InsufficientTruncation(f.trunc(), 6));
    }
    let w = f.trunc() - 4;
    let s = &f.f;
    let d = |g: &TruncatedSeries| total_derivative(f, g);
    let fu = s.differentiate_at(2);
    let fy = s.differentiate_at(1);
    let fuu = fu.differentiate_at(2);
    let fyu = fy.differentiate_at(2);
    let fyy = fy.differentiate_at(1);
    let i1 = fuu.differentiate_at(2).differentiate_at(2).truncate(w);

    let dfuu = d(&fuu)?;
    let mut i2 = d(&dfuu)?;
    i2 = i2.sub(&fu.mul_exact(&dfuu)?)?;
    i2 = i2.sub(&d(&fyu)?.scale(&int(4)))?;
    i2 = i2.add(&fyy.scale(&int(6)))?;
    i2 = i2.sub(&fy.mul_exact(&fuu)?.scale(&int(3)))?;
    i2 = i2.add(&fu.mul_exact(&fyu)?.scale(&int(4)))?;
    Ok((i1, i2.truncate(w)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointKind {
    Flat,
    SemiFlat,
    StronglyNonflat,
}

impl std::fmt::Display for PointKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointKind::Flat => "flat",
            PointKind::SemiFlat => "semi-flat",
            PointKind::StronglyNonflat => "strongly-nonflat",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointClass {
    pub kind: PointKind,
    pub i1_at: Rational,
    pub i2_at: Rational,
}

impl PointClass {
    pub fn from_values(i1_at: Rational, i2_at: Rational) -> Self {
        let kind = match (i1_at.is_zero(), i2_at.is_zero()) {
            (true, true) => PointKind::Flat,
            (false, false) => PointKind::StronglyNonflat,
            _ => PointKind::SemiFlat,
        };
        Self { kind, i1_at, i2_at }
    }
}

/// Classifies the origin of `F`.
pub fn classify_point(f: &OdeJet) -> Result<PointClass, InvariantError> {
    let (i1, i2) = tresse_invariants(f)?;
    Ok(PointClass::from_values(
        i1.constant_term(),
        i2.constant_term(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_marks_truncated_input() {
        assert!(OdeJet::parse("u^2*(x^2+u^2)*(1+y)", 8).unwrap().is_exact());
        assert!(!OdeJet::parse("x^4*u^5", 8).unwrap().is_exact());
        assert!(!OdeJet::parse("(x+u)^3*(x+u)^6", 8).unwrap().is_exact());
        assert!(!OdeJet::parse("y", 1).unwrap().is_exact());
        assert!(OdeJet::parse("y", 2).unwrap().is_exact());
    }

    fn ode(s: &str, w: u32) -> OdeJet {
        OdeJet::parse(s, w).unwrap()
    }

    #[test]
    fn total_derivative_examples() {
        let ctx = VarContext::xyu();
        let x = TruncatedSeries::var(&ctx, "x", 8).unwrap();
        let d = total_derivative(&ode("x*u + y^3", 8), &x).unwrap();
        assert_eq!(d, TruncatedSeries::one(&ctx, 7));
        let y = TruncatedSeries::var(&ctx, "y", 8).unwrap();
        let d = total_derivative(&ode("0", 8), &y).unwrap();
        assert_eq!(d, TruncatedSeries::var(&ctx, "u", 7).unwrap());
        let g = crate::expr::parse_ode("2*x^2", 8).unwrap();
        let d = total_derivative(&ode("x^2*u^2", 8), &g).unwrap();
        assert_eq!(d, TruncatedSeries::monomial(&ctx, &[1, 0, 0], int(4), 7));
    }

    #[test]
    fn invariant_examples() {
        let (i1, i2) = tresse_invariants(&ode("0", 8)).unwrap();
        assert!(i1.is_zero() && i2.is_zero());
        let (i1, _) = tresse_invariants(&ode("u^4", 8)).unwrap();
        assert_eq!(
            i1,
            TruncatedSeries::constant(&VarContext::xyu(), int(24), 4)
        );
        let (_, i2) = tresse_invariants(&ode("x^2*u^2", 10)).unwrap();
        let want = crate::expr::parse_ode("4 - 8*x^3*u", 6).unwrap();
        assert_eq!(i2, want);
        assert!(matches!(
            tresse_invariants(&ode("u^2", 5)),
            Err(InvariantError::InsufficientTruncation(5, 6))
        ));
    }

    #[test]
    fn classify_examples() {
        let c = classify_point(&ode("0", 8)).unwrap();
        assert_eq!(c.kind, PointKind::Flat);
        let f = ode("x*y*u^3", 12);
        let (i1, i2) = tresse_invariants(&f).unwrap();
        assert!(i1.is_zero() && i2.is_zero());
        let c = classify_point(&ode("u^2*(x^2+u^2)*(1+y)", 10)).unwrap();
        assert_eq!(c.kind, PointKind::StronglyNonflat);
        assert_eq!(c.i1_at, int(24));
        assert_eq!(c.i2_at, int(4));
        let c = classify_point(&ode("u^4", 8)).unwrap();
        assert_eq!(c.kind, PointKind::SemiFlat);
    }
}
