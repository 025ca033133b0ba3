//! Test support: a deliberately naive exact polynomial type used as an
//! oracle, plus seeded random inputs.
#![allow(dead_code, unused_imports)]

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use odenorm::chains::JetPoint;
use odenorm::invariants::OdeJet;
use odenorm::normalform::is_killed;
use odenorm::pseries::{Rational, TruncatedSeries, VarContext};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Polynomial in `n` variables, coefficients keyed by exponent vector.
/// No truncation anywhere; every operation is the textbook one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    pub n: usize,
    pub c: BTreeMap<Vec<u32>, Rational>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            c: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, v: Rational) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![0; n], v);
        p
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.add_term(e, Rational::one());
        p
    }

    pub fn add_term(&mut self, e: Vec<u32>, v: Rational) {
        let slot = self.c.entry(e.clone()).or_insert_with(Rational::zero);
        *slot += v;
        if slot.is_zero() {
            self.c.remove(&e);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, v) in &o.c {
            r.add_term(e.clone(), v.clone());
        }
        r
    }

    pub fn scale(&self, k: &Rational) -> Self {
        let mut r = Self::zero(self.n);
        for (e, v) in &self.c {
            r.add_term(e.clone(), v * k);
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-Rational::one()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.n);
        for (e1, v1) in &self.c {
            for (e2, v2) in &o.c {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_term(e, v1 * v2);
            }
        }
        r
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut r = Self::constant(self.n, Rational::one());
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    pub fn diff(&self, i: usize) -> Self {
        let mut r = Self::zero(self.n);
        for (e, v) in &self.c {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                r.add_term(f, v * Rational::from_integer(e[i].into()));
            }
        }
        r
    }

    /// Substitutes `subs[i]` (polynomials in `m` variables) for variable `i`.
    pub fn subst(&self, subs: &[Poly]) -> Poly {
        let m = subs[0].n;
        let mut r = Poly::zero(m);
        for (e, v) in &self.c {
            let mut t = Poly::constant(m, v.clone());
            for (i, &k) in e.iter().enumerate() {
                t = t.mul(&subs[i].pow(k));
            }
            r = r.add(&t);
        }
        r
    }

    /// Keeps terms of weight at most `w`.
    pub fn truncate(&self, weights: &[u32], w: u32) -> Poly {
        let mut r = Poly::zero(self.n);
        for (e, v) in &self.c {
            if weight(e, weights) <= w {
                r.add_term(e.clone(), v.clone());
            }
        }
        r
    }

    pub fn coeff(&self, e: &[u32]) -> Rational {
        self.c.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn from_series(s: &TruncatedSeries) -> Poly {
        let n = s.ctx().len();
        let mut p = Poly::zero(n);
        for (m, v) in s.terms() {
            p.add_term(m.exps(n).to_vec(), v.clone());
        }
        p
    }

    pub fn to_series(&self, ctx: &std::sync::Arc<VarContext>, trunc: u32) -> TruncatedSeries {
        TruncatedSeries::from_terms(
            ctx,
            trunc,
            self.c.iter().map(|(e, v)| (e.clone(), v.clone())),
        )
    }
}

pub fn weight(e: &[u32], weights: &[u32]) -> u32 {
    e.iter().zip(weights).map(|(a, b)| a * b).sum()
}

pub const XYU: [u32; 3] = [1, 2, 1];

/// `D = ∂x + u ∂y + F ∂u` on polynomials in `(x, y, u)`.
pub fn total_d(f: &Poly, g: &Poly) -> Poly {
    let u = Poly::var(3, 2);
    g.diff(0).add(&u.mul(&g.diff(1))).add(&f.mul(&g.diff(2)))
}

/// Tresse's pair, straight from the defining formulas.
pub fn oracle_invariants(f: &Poly) -> (Poly, Poly) {
    let fu = f.diff(2);
    let fuu = fu.diff(2);
    let fy = f.diff(1);
    let fyu = fy.diff(2);
    let fyy = fy.diff(1);
    let i1 = fuu.diff(2).diff(2);
    let dfuu = total_d(f, &fuu);
    let i2 = total_d(f, &dfuu)
        .sub(&fu.mul(&dfuu))
        .sub(&total_d(f, &fyu).scale(&q(4, 1)))
        .add(&fyy.scale(&q(6, 1)))
        .sub(&fy.mul(&fuu).scale(&q(3, 1)))
        .add(&fu.mul(&fyu).scale(&q(4, 1)));
    (i1, i2)
}

pub fn small_rational(rng: &mut TestRng) -> Rational {
    let n: i64 = rng.gen_range(-5..=5);
    let d: i64 = rng.gen_range(1..=4);
    q(if n == 0 { 1 } else { n }, d)
}

/// Random polynomial `F(x, y, u)` with `F(0) = 0`, `terms` monomials of
/// weight between `lo` and `hi`.
pub fn random_poly_f(rng: &mut TestRng, terms: usize, lo: u32, hi: u32) -> Poly {
    let mut p = Poly::zero(3);
    while p.c.len() < terms {
        let e = vec![
            rng.gen_range(0..=hi),
            rng.gen_range(0..=hi / 2),
            rng.gen_range(0..=hi),
        ];
        let w = weight(&e, &XYU);
        if w >= lo.max(1) && w <= hi {
            p.add_term(e, small_rational(rng));
        }
    }
    p
}

pub fn ode_of(p: &Poly, trunc: u32) -> OdeJet {
    OdeJet::polynomial(p.to_series(
        &VarContext::xyu(),
        trunc.max(p.c.keys().map(|e| weight(e, &XYU)).max().unwrap_or(0)),
    ))
    .unwrap()
}

/// Projective map of the plane in homogeneous coordinates, with its action
/// on 1-jets.
#[derive(Clone, Copy, Debug)]
pub struct Projective([[f64; 3]; 3]);

impl Projective {
    /// `g0(s, t) ∘ g+(α, β, r)`: `x ↦ s(x + αy)/D`, `y ↦ st·y/D`,
    /// `D = 1 − 2βx + (r + αβ)y`.
    pub fn model(s: f64, t: f64, al: f64, be: f64, r: f64) -> Self {
        Self([
            [s, s * al, 0.0],
            [0.0, s * t, 0.0],
            [-2.0 * be, r + al * be, 1.0],
        ])
    }

    pub fn inverse(&self) -> Self {
        let m = &self.0;
        let c = |i: usize, j: usize| {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
        };
        let det: f64 = (0..3).map(|j| m[0][j] * c(0, j)).sum();
        Self(std::array::from_fn(|i| {
            std::array::from_fn(|j| c(j, i) / det)
        }))
    }

    pub fn apply(&self, p: &JetPoint) -> JetPoint {
        let m = &self.0;
        let row = |i: usize| m[i][0] * p.x + m[i][1] * p.y + m[i][2];
        let drow = |i: usize| m[i][0] + m[i][1] * p.u;
        let (pp, q, r) = (row(0), row(1), row(2));
        let (dp, dq, dr) = (drow(0), drow(1), drow(2));
        JetPoint::new(pp / r, q / r, (dq * r - q * dr) / (dp * r - pp * dr))
    }

    /// Pushes the tangent `v` at `p` forward, by central differences.
    pub fn push(&self, p: &JetPoint, v: [f64; 3]) -> [f64; 3] {
        let h = 1e-6;
        let at = |s: f64| {
            self.apply(&JetPoint::new(
                p.x + s * v[0],
                p.y + s * v[1],
                p.u + s * v[2],
            ))
        };
        let (a, b) = (at(h), at(-h));
        [
            (a.x - b.x) / (2.0 * h),
            (a.y - b.y) / (2.0 * h),
            (a.u - b.u) / (2.0 * h),
        ]
    }
}

/// Residual of the flat chain through `p` labelled `(α, β)`: in the
/// coordinates `X = x − x0`, `Y = y − y0 − u0 X`, `U = u − u0` it is
/// `X = −αY`, `U (1 + 2αβY) = −2βY`.
pub fn flat_residual(p: &JetPoint, al: f64, be: f64, q: &JetPoint) -> f64 {
    let xx = q.x - p.x;
    let yy = q.y - p.y - p.u * xx;
    let uu = q.u - p.u;
    (xx + al * yy)
        .abs()
        .max((uu * (1.0 + 2.0 * al * be * yy) + 2.0 * be * yy).abs())
}

pub const XAB: [u32; 3] = [1, 1, 2];
pub const XY: [u32; 2] = [1, 2];

/// `g(x, b + ax) − μ(a, b) − a f(x, b + ax) − x λ(a, b)`, all in `(x, a, b)`.
pub fn oracle_operator(f: &Poly, g: &Poly, lam: &Poly, mu: &Poly) -> Poly {
    let x = Poly::var(3, 0);
    let a = Poly::var(3, 1);
    let b = Poly::var(3, 2);
    let graph = [x.clone(), b.add(&a.mul(&x))];
    let params = [a.clone(), b.clone()];
    g.subst(&graph)
        .sub(&mu.subst(&params))
        .sub(&a.mul(&f.subst(&graph)))
        .sub(&x.mul(&lam.subst(&params)))
}

pub fn killed_part(p: &Poly) -> Poly {
    let mut r = Poly::zero(3);
    for (e, v) in &p.c {
        if is_killed(e[0], e[1]) {
            r.add_term(e.clone(), v.clone());
        }
    }
    r
}

/// Exponents of weight exactly `w` for the given weights.
pub fn monomials(weights: &[u32], w: u32) -> Vec<Vec<u32>> {
    fn go(weights: &[u32], left: u32, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if acc.len() == weights.len() {
            if left == 0 {
                out.push(acc.clone());
            }
            return;
        }
        let wi = weights[acc.len()];
        for k in 0..=left / wi {
            acc.push(k);
            go(weights, left - k * wi, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(weights, w, &mut Vec::new(), &mut out);
    out
}

pub fn random_psi(rng: &mut TestRng, m: u32) -> Poly {
    let all = monomials(&XAB, m);
    let mut p = Poly::zero(3);
    let count = rng.gen_range(1..=4.min(all.len()));
    for _ in 0..count {
        let e = all[rng.gen_range(0..all.len())].clone();
        p.add_term(e, small_rational(rng));
    }
    p
}

pub fn basis_poly(n: usize, e: &[u32]) -> Poly {
    let mut p = Poly::zero(n);
    p.add_term(e.to_vec(), Rational::one());
    p
}
