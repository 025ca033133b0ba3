//! The linear operator `ℒ(f, g, λ, μ) = g(x, b+ax) − μ − a f(x, b+ax) − x λ`
//! and its inverse on the complement of the normal-form space.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::NormalFormError;
use crate::pseries::{int, Rational, TruncatedSeries, VarContext};
use crate::solutions::CoupledMap;

/// Whether the coefficient `Φ_{kl}` of `x^k a^l` must vanish in normal form.
pub fn is_killed(k: u32, l: u32) -> bool {
    k <= 1 || l <= 1 || ((2..=3).contains(&k) && (2..=3).contains(&l))
}

/// `ℒ(d)` as a series in `(x, a, b)`.
pub fn homological_operator(d: &CoupledMap) -> Result<TruncatedSeries, NormalFormError> {
    let xab = VarContext::xab();
    let w = [
        d.f.trunc() + 1,
        d.g.trunc(),
        d.lam.trunc() + 1,
        d.mu.trunc(),
    ]
    .into_iter()
    .min()
    .unwrap();
    let big = w + 2;
    let x = TruncatedSeries::var_at(&xab, 0, big);
    let a = TruncatedSeries::var_at(&xab, 1, big);
    let model = TruncatedSeries::var_at(&xab, 2, big).add(&x.mul_exact(&a)?)?;
    let on_model = [x.clone(), model];
    let g = d.g.compose(&on_model)?;
    let f = d.f.compose(&on_model)?;
    let lam = d.lam.embed(&xab)?;
    let mu = d.mu.embed(&xab)?;
    let out = g
        .sub(&mu)?
        .sub(&a.mul_exact(&f)?)?
        .sub(&x.mul_exact(&lam)?)?;
    Ok(out.truncate(w))
}

/// Polynomial in one variable, dense coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Poly1(Vec<Rational>);

impl Poly1 {
    fn coeff(&self, j: usize) -> Rational {
        self.0.get(j).cloned().unwrap_or_else(Rational::zero)
    }

    fn trim(mut self) -> Self {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        Poly1((0..n).map(|j| self.coeff(j) + o.coeff(j)).collect()).trim()
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&int(-1)))
    }

    fn scale(&self, k: &Rational) -> Self {
        Poly1(self.0.iter().map(|c| c * k).collect()).trim()
    }

    fn deriv(&self) -> Self {
        Poly1(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| c * int(j as i64))
                .collect(),
        )
        .trim()
    }

    /// Antiderivative vanishing at 0.
    fn integ(&self) -> Self {
        let mut v = vec![Rational::zero()];
        v.extend(
            self.0
                .iter()
                .enumerate()
                .map(|(j, c)| c / int(j as i64 + 1)),
        );
        Poly1(v).trim()
    }

    fn at0(&self) -> Rational {
        self.coeff(0)
    }
}

/// Components `Ψ_{kl}(b)` of a series in `(x, a, b)`.
struct Components(BTreeMap<(u32, u32), Poly1>);

impl Components {
    fn of(s: &TruncatedSeries) -> Self {
        let mut map: BTreeMap<(u32, u32), Poly1> = BTreeMap::new();
        for (m, c) in s.terms() {
            let p = map.entry((m.exp(0), m.exp(1))).or_default();
            let j = m.exp(2) as usize;
            if p.0.len() <= j {
                p.0.resize(j + 1, Rational::zero());
            }
            p.0[j] = c.clone();
        }
        Self(map)
    }

    fn get(&self, k: u32, l: u32) -> Poly1 {
        self.0.get(&(k, l)).cloned().unwrap_or_default()
    }
}

/// Assembles `Σ_K p_K(v) w^K` in a two-variable context where `w` is the
/// first variable and `v` the second.
fn assemble(
    ctx: &std::sync::Arc<VarContext>,
    parts: &BTreeMap<u32, Poly1>,
    trunc: u32,
) -> TruncatedSeries {
    TruncatedSeries::from_terms(
        ctx,
        trunc,
        parts.iter().flat_map(|(&k, p)| {
            p.0.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(move |(j, c)| (vec![k, j as u32], c.clone()))
        }),
    )
}

/// The unique normalized deviation `(f, g, λ, μ)` of weights
/// `(m−1, m, m−1, m)` whose image under `ℒ` agrees with `psi` on every
/// coefficient killed by the normal form.
pub fn homological_solve(psi: &TruncatedSeries) -> Result<CoupledMap, NormalFormError> {
    if **psi.ctx() != *VarContext::xab() {
        return Err(NormalFormError::NotHomogeneous(
            "expected a series in (x, a, b)".into(),
        ));
    }
    let m = psi
        .terms()
        .map(|(k, _)| k.weight())
        .next()
        .unwrap_or(psi.trunc());
    if !psi.is_homogeneous(m) {
        return Err(NormalFormError::NotHomogeneous(format!(
            "terms of several weights starting at {m}"
        )));
    }
    let p = Components::of(psi);
    let kmax = psi.terms().map(|(k, _)| k.exp(0)).max().unwrap_or(0);
    let lmax = psi.terms().map(|(k, _)| k.exp(1)).max().unwrap_or(0);

    let mut f: BTreeMap<u32, Poly1> = BTreeMap::new();
    let mut g: BTreeMap<u32, Poly1> = BTreeMap::new();
    let mut lam: BTreeMap<u32, Poly1> = BTreeMap::new();
    let mut mu: BTreeMap<u32, Poly1> = BTreeMap::new();

    for k in 2..=kmax {
        g.insert(k, p.get(k, 0));
    }
    for k in 3..=kmax + 1 {
        let gk1 = g.get(&(k - 1)).cloned().unwrap_or_default();
        f.insert(k, gk1.deriv().sub(&p.get(k, 1)));
    }
    for l in 3..=lmax.max(3) {
        lam.insert(l, p.get(1, l).scale(&int(-1)));
    }
    for l in 2..=lmax.max(2) {
        mu.insert(l, p.get(0, l).scale(&int(-1)));
    }

    let f0 = p.get(2, 3).scale(&int(-2)).integ().integ();

    // g1'' = 2Ψ21' − 2Ψ32 with g1(0) = 0, g1'(0) = Ψ21(0).
    let g1pp = p.get(2, 1).deriv().sub(&p.get(3, 2)).scale(&int(2));
    let g1 = g1pp.integ().add(&Poly1(vec![p.get(2, 1).at0()])).integ();
    let f2 = g1.deriv().sub(&p.get(2, 1));
    let lam0 = g1.sub(&p.get(1, 0));

    // g0''' = 6Ψ22' − 12Ψ33 with zero initial data; f1' = g0''/2 − Ψ22.
    let g0ppp = p
        .get(2, 2)
        .deriv()
        .scale(&int(6))
        .sub(&p.get(3, 3).scale(&int(12)));
    let g0 = g0ppp.integ().integ().integ();
    let f1 = g0
        .deriv()
        .deriv()
        .scale(&crate::pseries::rat(1, 2))
        .sub(&p.get(2, 2))
        .integ();

    let mu0 = g0.sub(&p.get(0, 0));
    let mu1 = f0.scale(&int(-1)).sub(&p.get(0, 1));
    let lam1 = g0.deriv().sub(&f1).sub(&p.get(1, 1));
    let lam2 = f0.deriv().scale(&int(-1)).sub(&p.get(1, 2));

    f.insert(0, f0);
    f.insert(1, f1);
    f.insert(2, f2);
    g.insert(0, g0);
    g.insert(1, g1);
    lam.insert(0, lam0);
    lam.insert(1, lam1);
    lam.insert(2, lam2);
    mu.insert(0, mu0);
    mu.insert(1, mu1);

    let xy = VarContext::xy();
    let ab = VarContext::ab();
    let d = CoupledMap {
        f: assemble(&xy, &f, m),
        g: assemble(&xy, &g, m),
        lam: assemble(&ab, &lam, m),
        mu: assemble(&ab, &mu, m),
    };
    for (name, s, w) in [
        ("f", &d.f, m.saturating_sub(1)),
        ("g", &d.g, m),
        ("λ", &d.lam, m.saturating_sub(1)),
        ("μ", &d.mu, m),
    ] {
        if !s.is_zero() && !s.is_homogeneous(w) {
            return Err(NormalFormError::NotHomogeneous(format!(
                "solution component {name} is not of weight {w}"
            )));
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_map, parse_polynomial};

    fn dev(f: &str, g: &str, lam: &str, mu: &str, w: u32) -> CoupledMap {
        let (f, g) = parse_map(&format!("{f} ; {g}"), w).unwrap();
        let ab = VarContext::ab();
        CoupledMap {
            f,
            g,
            lam: parse_polynomial(lam, &ab, w).unwrap(),
            mu: parse_polynomial(mu, &ab, w).unwrap(),
        }
    }

    fn xab(s: &str, w: u32) -> TruncatedSeries {
        parse_polynomial(s, &VarContext::xab(), w).unwrap()
    }

    #[test]
    fn operator_examples() {
        assert!(homological_operator(&dev("0", "0", "0", "0", 6))
            .unwrap()
            .is_zero());
        let l = homological_operator(&dev("-y^2", "0", "2*b*a^2", "a*b^2", 6)).unwrap();
        assert_eq!(l, xab("x^2*a^3", 5).with_trunc(l.trunc()));
        let l = homological_operator(&dev("-2*y*x^2", "-y^2*x", "-b^2", "0", 6)).unwrap();
        assert_eq!(l, xab("x^3*a^2", 5).with_trunc(l.trunc()));
    }

    #[test]
    fn solve_examples() {
        let d = homological_solve(&xab("0", 5)).unwrap();
        assert!(d.f.is_zero() && d.g.is_zero() && d.lam.is_zero() && d.mu.is_zero());
        let d = homological_solve(&xab("x^2*a^3", 5)).unwrap();
        assert_eq!(d, dev("-y^2", "0", "2*b*a^2", "a*b^2", 5));
        let d = homological_solve(&xab("x^3*a^2", 5)).unwrap();
        assert_eq!(d, dev("-2*y*x^2", "-y^2*x", "-b^2", "0", 5));
    }

    #[test]
    fn solve_rejects_mixed_weights() {
        assert!(matches!(
            homological_solve(&xab("x^3 + x^4", 5)),
            Err(NormalFormError::NotHomogeneous(_))
        ));
    }

    #[test]
    fn killed_set() {
        assert!(is_killed(0, 5) && is_killed(7, 1) && is_killed(3, 3));
        assert!(!is_killed(4, 2) && !is_killed(2, 4) && !is_killed(2, 2 + 3));
    }
}
