//! Sparse multivariate power series over exact rationals, truncated by weight.
//!
//! Every series lives in a [`VarContext`] that fixes the variable names and
//! their positive integer weights. A monomial `x^k a^l b^j` in the `(x,a,b)`
//! context has weight `k + l + 2j`. A series carries a truncation weight `W`:
//! the stored terms are exact for all weights `<= W` and nothing is known
//! about weights above it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact coefficient field.
pub type Rational = BigRational;

/// Maximum number of variables in one context.
pub const MAX_VARS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("variable context mismatch: {0} vs {1}")]
    ContextMismatch(String, String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("weight {0} out of range 0..={1}")]
    WeightOutOfRange(u32, u32),
    #[error("substitution for `{0}` is not weight-nilpotent (order {1} < weight {2})")]
    NonNilpotent(String, u32, u32),
    #[error("insufficient truncation: {0}")]
    InsufficientTruncation(String),
    #[error("vanishing linear coefficient of `{0}`")]
    VanishingLinearCoefficient(String),
    #[error("linear part of the map is not invertible")]
    SingularLinearPart,
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("malformed series data: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// Ordered variable names with their weights.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarContext {
    names: Vec<String>,
    weights: Vec<u32>,
}

impl VarContext {
    pub fn new<S: Into<String>>(vars: impl IntoIterator<Item = (S, u32)>) -> Result<Arc<Self>> {
        let (names, weights): (Vec<String>, Vec<u32>) =
            vars.into_iter().map(|(n, w)| (n.into(), w)).unzip();
        if names.is_empty() || names.len() > MAX_VARS {
            return Err(SeriesError::InvalidContext(format!(
                "expected 1..={} variables, got {}",
                MAX_VARS,
                names.len()
            )));
        }
        if weights.contains(&0) {
            return Err(SeriesError::InvalidContext(
                "weights must be positive".into(),
            ));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(SeriesError::InvalidContext(format!(
                    "duplicate variable `{n}`"
                )));
            }
        }
        Ok(Arc::new(Self { names, weights }))
    }

    /// Jet coordinates `(x, y, u)` with weights `(1, 2, 1)`.
    pub fn xyu() -> Arc<Self> {
        static CTX: OnceLock<Arc<VarContext>> = OnceLock::new();
        CTX.get_or_init(|| Self::new([("x", 1), ("y", 2), ("u", 1)]).unwrap())
            .clone()
    }

    /// Manifold-of-solutions coordinates `(x, a, b)` with weights `(1, 1, 2)`.
    pub fn xab() -> Arc<Self> {
        static CTX: OnceLock<Arc<VarContext>> = OnceLock::new();
        CTX.get_or_init(|| Self::new([("x", 1), ("a", 1), ("b", 2)]).unwrap())
            .clone()
    }

    /// Parameter coordinates `(a, b)` with weights `(1, 2)`.
    pub fn ab() -> Arc<Self> {
        static CTX: OnceLock<Arc<VarContext>> = OnceLock::new();
        CTX.get_or_init(|| Self::new([("a", 1), ("b", 2)]).unwrap())
            .clone()
    }

    /// Plane coordinates `(x, y)` with weights `(1, 2)`.
    pub fn xy() -> Arc<Self> {
        static CTX: OnceLock<Arc<VarContext>> = OnceLock::new();
        CTX.get_or_init(|| Self::new([("x", 1), ("y", 2)]).unwrap())
            .clone()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> u32 {
        self.weights[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SeriesError::UnknownVariable(name.to_string()))
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .names
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| format!("{n}:{w}"))
            .collect();
        format!("({})", parts.join(","))
    }
}

/// Exponent vector with its cached weight.
///
/// The derived ordering compares weight first, then exponents
/// lexicographically; this is the canonical term order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    weight: u32,
    exps: [u16; MAX_VARS],
}

impl Monomial {
    pub fn new(ctx: &VarContext, exps: &[u32]) -> Self {
        assert_eq!(exps.len(), ctx.len(), "exponent vector length");
        let mut e = [0u16; MAX_VARS];
        let mut weight = 0;
        for (i, &x) in exps.iter().enumerate() {
            e[i] = u16::try_from(x).expect("exponent overflow");
            weight += x * ctx.weight(i);
        }
        Self { weight, exps: e }
    }

    pub fn one() -> Self {
        Self {
            weight: 0,
            exps: [0; MAX_VARS],
        }
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn exp(&self, i: usize) -> u32 {
        self.exps[i] as u32
    }

    pub fn exps(&self, n: usize) -> Vec<u32> {
        self.exps[..n].iter().map(|&e| e as u32).collect()
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum()
    }

    fn mul(&self, other: &Self) -> Self {
        let mut exps = self.exps;
        for (e, o) in exps.iter_mut().zip(other.exps) {
            *e += o;
        }
        Self {
            weight: self.weight + other.weight,
            exps,
        }
    }

    fn with_exp(&self, ctx: &VarContext, i: usize, e: u32) -> Self {
        let mut exps = self.exps;
        let old = exps[i] as u32;
        exps[i] = e as u16;
        Self {
            weight: self.weight - old * ctx.weight(i) + e * ctx.weight(i),
            exps,
        }
    }
}

/// A power series truncated at a weight.
#[derive(Clone, Debug)]
pub struct TruncatedSeries {
    ctx: Arc<VarContext>,
    trunc: u32,
    terms: BTreeMap<Monomial, Rational>,
}

impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        self.trunc == other.trunc && *self.ctx == *other.ctx && self.terms == other.terms
    }
}

impl Eq for TruncatedSeries {}

fn check_same_ctx(a: &VarContext, b: &VarContext) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(SeriesError::ContextMismatch(a.describe(), b.describe()))
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `p/q`, or just `p` for integers.
pub fn format_rational(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Parses `p` or `p/q`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rational::new(n, d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl TruncatedSeries {
    pub fn zero(ctx: &Arc<VarContext>, trunc: u32) -> Self {
        Self {
            ctx: ctx.clone(),
            trunc,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ctx: &Arc<VarContext>, c: Rational, trunc: u32) -> Self {
        let mut s = Self::zero(ctx, trunc);
        s.insert(Monomial::one(), c);
        s
    }

    pub fn one(ctx: &Arc<VarContext>, trunc: u32) -> Self {
        Self::constant(ctx, Rational::one(), trunc)
    }

    /// The coordinate function of variable `name`.
    pub fn var(ctx: &Arc<VarContext>, name: &str, trunc: u32) -> Result<Self> {
        let i = ctx.index_of(name)?;
        Ok(Self::var_at(ctx, i, trunc))
    }

    pub fn var_at(ctx: &Arc<VarContext>, i: usize, trunc: u32) -> Self {
        let mut exps = vec![0; ctx.len()];
        exps[i] = 1;
        Self::monomial(ctx, &exps, Rational::one(), trunc)
    }

    pub fn monomial(ctx: &Arc<VarContext>, exps: &[u32], c: Rational, trunc: u32) -> Self {
        let mut s = Self::zero(ctx, trunc);
        s.insert(Monomial::new(ctx, exps), c);
        s
    }

    /// Builds a series from `(exponents, coefficient)` pairs; terms above
    /// `trunc` are dropped and repeated monomials are summed.
    pub fn from_terms<I>(ctx: &Arc<VarContext>, trunc: u32, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut s = Self::zero(ctx, trunc);
        for (e, c) in terms {
            s.add_term(Monomial::new(ctx, &e), c);
        }
        s
    }

    fn insert(&mut self, m: Monomial, c: Rational) {
        if m.weight <= self.trunc && !c.is_zero() {
            self.terms.insert(m, c);
        }
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if m.weight > self.trunc || c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn ctx(&self) -> &Arc<VarContext> {
        &self.ctx
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    /// Smallest weight of a stored term, or `trunc + 1` for the zero series.
    pub fn order(&self) -> u32 {
        self.terms
            .keys()
            .next()
            .map(|m| m.weight)
            .unwrap_or(self.trunc + 1)
    }

    /// Largest weight of a stored term (0 for the zero series).
    pub fn max_weight(&self) -> u32 {
        self.terms.keys().map(|m| m.weight).max().unwrap_or(0)
    }

    pub fn coeff(&self, exps: &[u32]) -> Rational {
        let m = Monomial::new(&self.ctx, exps);
        self.terms.get(&m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Lowers the truncation weight, dropping terms above it.
    pub fn truncate(&self, w: u32) -> Self {
        let w = w.min(self.trunc);
        Self {
            ctx: self.ctx.clone(),
            trunc: w,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.weight <= w)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// Resets the truncation weight. Raising it asserts that the stored terms
    /// are the complete expansion up to the new weight (e.g. for a polynomial).
    pub fn with_trunc(mut self, w: u32) -> Self {
        self.trunc = w;
        self.terms.retain(|m, _| m.weight <= w);
        self
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_ctx(&self.ctx, &other.ctx)?;
        let trunc = self.trunc.min(other.trunc);
        let mut out = self.truncate(trunc);
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_ctx(&self.ctx, &other.ctx)?;
        let trunc = self.trunc.min(other.trunc);
        let mut out = self.truncate(trunc);
        for (m, c) in &other.terms {
            out.add_term(*m, -c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        Self {
            ctx: self.ctx.clone(),
            trunc: self.trunc,
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }

    pub fn scale(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero(&self.ctx, self.trunc);
        }
        Self {
            ctx: self.ctx.clone(),
            trunc: self.trunc,
            terms: self.terms.iter().map(|(m, c)| (*m, c * k)).collect(),
        }
    }

    /// Cauchy product truncated at `min(a.trunc, b.trunc)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_same_ctx(&self.ctx, &other.ctx)?;
        let trunc = self.trunc.min(other.trunc);
        Ok(self.mul_capped(other, trunc))
    }

    /// Cauchy product keeping every weight the operands determine:
    /// the truncation is `min(a.trunc + ord(b), b.trunc + ord(a))`.
    pub fn mul_exact(&self, other: &Self) -> Result<Self> {
        check_same_ctx(&self.ctx, &other.ctx)?;
        let trunc = (self.trunc + other.order()).min(other.trunc + self.order());
        Ok(self.mul_capped(other, trunc))
    }

    /// Multiplies by the monomial with exponents `exps`; the truncation rises
    /// by the monomial weight.
    pub fn shift(&self, exps: &[u32]) -> Self {
        let m = Monomial::new(&self.ctx, exps);
        Self {
            ctx: self.ctx.clone(),
            trunc: self.trunc + m.weight,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.mul(&m), c.clone()))
                .collect(),
        }
    }

    pub(crate) fn mul_capped(&self, other: &Self, cap: u32) -> Self {
        let mut out = Self::zero(&self.ctx, cap);
        if self.terms.is_empty() || other.terms.is_empty() {
            return out;
        }
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        if small.terms.len() == 1 {
            let (m, c) = small.terms.iter().next().unwrap();
            for (k, d) in &large.terms {
                let w = k.weight + m.weight;
                if w > cap {
                    break;
                }
                let p = c * d;
                out.terms.insert(k.mul(m), p);
            }
            return out;
        }
        // Sums are kept as unreduced fractions and reduced once per term.
        let mut acc: HashMap<Monomial, (BigInt, BigInt)> = HashMap::new();
        let large_terms: Vec<(&Monomial, &Rational)> = large.terms.iter().collect();
        for (ma, ca) in &small.terms {
            if ma.weight > cap {
                break;
            }
            let limit = cap - ma.weight;
            for (mb, cb) in &large_terms {
                if mb.weight > limit {
                    break;
                }
                let num = ca.numer() * cb.numer();
                let den = ca.denom() * cb.denom();
                match acc.entry(ma.mul(mb)) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        let (n, d) = e.get_mut();
                        if *d == den {
                            *n += num;
                        } else {
                            *n = &*n * &den + num * &*d;
                            *d *= den;
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert((num, den));
                    }
                }
            }
        }
        out.terms = acc
            .into_iter()
            .filter(|(_, (n, _))| !n.is_zero())
            .map(|(m, (n, d))| (m, Rational::new(n, d)))
            .collect();
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one(&self.ctx, self.trunc);
        for _ in 0..n {
            acc = acc.mul_exact(self).expect("same context");
        }
        acc
    }

    /// Exactly the terms of weight `m`, truncated at `m`.
    pub fn component(&self, m: u32) -> Result<Self> {
        if m > self.trunc {
            return Err(SeriesError::WeightOutOfRange(m, self.trunc));
        }
        Ok(Self {
            ctx: self.ctx.clone(),
            trunc: m,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.weight == m)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        })
    }

    pub fn is_homogeneous(&self, m: u32) -> bool {
        self.terms.keys().all(|k| k.weight == m)
    }

    /// Partial derivative; the truncation drops by the variable's weight.
    pub fn differentiate(&self, name: &str) -> Result<Self> {
        let i = self.ctx.index_of(name)?;
        Ok(self.differentiate_at(i))
    }

    pub fn differentiate_at(&self, i: usize) -> Self {
        let w = self.ctx.weight(i);
        let mut out = Self::zero(&self.ctx, self.trunc.saturating_sub(w));
        if self.trunc < w {
            return out;
        }
        for (m, c) in &self.terms {
            let e = m.exp(i);
            if e == 0 {
                continue;
            }
            out.insert(m.with_exp(&self.ctx, i, e - 1), c * int(e as i64));
        }
        out
    }

    /// Termwise antiderivative with zero constant of integration; the
    /// truncation rises by the variable's weight.
    pub fn antiderivative(&self, name: &str) -> Result<Self> {
        let i = self.ctx.index_of(name)?;
        Ok(self.antiderivative_at(i))
    }

    pub fn antiderivative_at(&self, i: usize) -> Self {
        let w = self.ctx.weight(i);
        let mut out = Self::zero(&self.ctx, self.trunc + w);
        for (m, c) in &self.terms {
            let e = m.exp(i);
            out.insert(m.with_exp(&self.ctx, i, e + 1), c / int(e as i64 + 1));
        }
        out
    }

    /// Sets variable `i` to zero.
    pub fn at_zero(&self, i: usize) -> Self {
        Self {
            ctx: self.ctx.clone(),
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.exp(i) == 0)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// Coefficient of `v^e` as a series in the remaining variables (still
    /// in the same context, with `v` absent).
    pub fn coeff_of_power(&self, i: usize, e: u32) -> Self {
        let w = self.ctx.weight(i) * e;
        let mut out = Self::zero(&self.ctx, self.trunc.saturating_sub(w));
        if self.trunc < w {
            return out;
        }
        for (m, c) in &self.terms {
            if m.exp(i) == e {
                out.insert(m.with_exp(&self.ctx, i, 0), c.clone());
            }
        }
        out
    }

    /// Moves the series into another context, sending variable `i` to
    /// `target` variable `map[i]`. Weights must agree.
    pub fn rename(&self, target: &Arc<VarContext>, map: &[usize]) -> Result<Self> {
        if map.len() != self.ctx.len() {
            return Err(SeriesError::ContextMismatch(
                self.ctx.describe(),
                target.describe(),
            ));
        }
        for (i, &j) in map.iter().enumerate() {
            if j >= target.len() || self.ctx.weight(i) != target.weight(j) {
                return Err(SeriesError::ContextMismatch(
                    self.ctx.describe(),
                    target.describe(),
                ));
            }
        }
        let mut out = Self::zero(target, self.trunc);
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; target.len()];
            for (i, &j) in map.iter().enumerate() {
                exps[j] += m.exp(i);
            }
            out.add_term(Monomial::new(target, &exps), c.clone());
        }
        Ok(out)
    }

    /// Moves the series into `target` by matching variable names.
    pub fn embed(&self, target: &Arc<VarContext>) -> Result<Self> {
        let map = self
            .ctx
            .names()
            .iter()
            .map(|n| target.index_of(n))
            .collect::<Result<Vec<_>>>()?;
        self.rename(target, &map)
    }

    /// Moves the series into a context that may lack some variables; those
    /// variables must not occur.
    pub fn restrict(&self, target: &Arc<VarContext>) -> Result<Self> {
        let n = self.ctx.len();
        let map: Vec<Option<usize>> = (0..n)
            .map(|i| {
                let j = target.index_of(self.ctx.name(i)).ok();
                if let Some(j) = j {
                    if target.weight(j) != self.ctx.weight(i) {
                        return Err(SeriesError::ContextMismatch(
                            self.ctx.describe(),
                            target.describe(),
                        ));
                    }
                }
                Ok(j)
            })
            .collect::<Result<_>>()?;
        let mut out = Self::zero(target, self.trunc);
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; target.len()];
            for (i, j) in map.iter().enumerate() {
                match j {
                    Some(j) => exps[*j] += m.exp(i),
                    None if m.exp(i) > 0 => {
                        return Err(SeriesError::UnknownVariable(self.ctx.name(i).to_string()))
                    }
                    None => {}
                }
            }
            out.add_term(Monomial::new(target, &exps), c.clone());
        }
        Ok(out)
    }

    /// Formal composition `s(subs[0], subs[1], ...)` with one substituted
    /// series per variable of `s`.
    ///
    /// Each substituted series must have no terms of weight below the weight
    /// of the variable it replaces; the result truncation is the largest
    /// weight the inputs determine.
    pub fn compose(&self, subs: &[TruncatedSeries]) -> Result<Self> {
        let target = self.check_subs(subs)?;
        for (i, s) in subs.iter().enumerate() {
            let w = self.ctx.weight(i);
            if !s.is_zero() && s.order() < w {
                return Err(SeriesError::NonNilpotent(
                    self.ctx.name(i).to_string(),
                    s.order(),
                    w,
                ));
            }
            if s.trunc < w && self.terms.keys().any(|m| m.exp(i) > 0) {
                return Err(SeriesError::InsufficientTruncation(format!(
                    "substitution for `{}` known only to weight {}",
                    self.ctx.name(i),
                    s.trunc
                )));
            }
        }
        let lower: Vec<u32> = (0..self.ctx.len()).map(|i| self.ctx.weight(i)).collect();
        let cap = self.trunc.min(self.error_bound(subs, &lower));
        Ok(self.compose_capped(subs, &target, cap))
    }

    /// Composition treating `self` as an exact polynomial, so substituted
    /// series may carry constant or low-weight terms (used for translations).
    pub fn compose_exact(&self, subs: &[TruncatedSeries]) -> Result<Self> {
        let target = self.check_subs(subs)?;
        let lower: Vec<u32> = subs
            .iter()
            .map(|s| {
                if s.is_zero() {
                    s.trunc + 1
                } else {
                    s.order().min(s.trunc + 1)
                }
            })
            .collect();
        let cap = self.error_bound(subs, &lower);
        Ok(self.compose_capped(subs, &target, cap))
    }

    fn check_subs(&self, subs: &[TruncatedSeries]) -> Result<Arc<VarContext>> {
        if subs.len() != self.ctx.len() {
            return Err(SeriesError::Malformed(format!(
                "expected {} substitutions, got {}",
                self.ctx.len(),
                subs.len()
            )));
        }
        let target = subs[0].ctx.clone();
        for s in subs {
            check_same_ctx(&target, &s.ctx)?;
        }
        Ok(target)
    }

    /// Largest weight to which the composition is determined by the
    /// substituted series' truncations, given a lower bound on the weight of
    /// every substituted factor.
    fn error_bound(&self, subs: &[TruncatedSeries], lower: &[u32]) -> u32 {
        let mut bound = u32::MAX;
        for (i, s) in subs.iter().enumerate() {
            let cof = self
                .terms
                .keys()
                .filter(|m| m.exp(i) > 0)
                .map(|m| {
                    (0..self.ctx.len())
                        .map(|j| {
                            let e = m.exp(j) - u32::from(j == i);
                            e * lower[j]
                        })
                        .sum::<u32>()
                })
                .min();
            if let Some(c) = cof {
                bound = bound.min(s.trunc.saturating_add(c));
            }
        }
        if bound == u32::MAX {
            // Constant series: nothing is substituted.
            bound = subs
                .iter()
                .map(|s| s.trunc)
                .min()
                .unwrap_or(0)
                .max(self.trunc);
        }
        bound
    }

    /// Horner-style evaluation of the composition, dropping every term above
    /// `cap`. Truncation bookkeeping is the caller's responsibility.
    pub(crate) fn compose_capped(
        &self,
        subs: &[TruncatedSeries],
        target: &Arc<VarContext>,
        cap: u32,
    ) -> Self {
        let n = self.ctx.len();
        let mut powers: Vec<Vec<TruncatedSeries>> = Vec::with_capacity(n);
        for (i, s) in subs.iter().enumerate() {
            let maxe = self.terms.keys().map(|m| m.exp(i)).max().unwrap_or(0);
            let base = s.truncate_to_cap(cap);
            let mut pw = vec![TruncatedSeries::one(target, cap)];
            for e in 1..=maxe {
                let next = pw[e as usize - 1].mul_capped(&base, cap);
                pw.push(next);
            }
            powers.push(pw);
        }
        let groups: Vec<(Vec<u32>, &Rational)> =
            self.terms.iter().map(|(m, c)| (m.exps(n), c)).collect();
        horner(&groups, 0, &powers, target, cap)
    }

    fn truncate_to_cap(&self, cap: u32) -> Self {
        let mut s = self.truncate(cap);
        s.trunc = cap;
        s
    }

    /// Substitutes the named variables; every variable occurring in `self`
    /// must be assigned.
    pub fn substitute(&self, assignment: &[(&str, TruncatedSeries)]) -> Result<Self> {
        let subs = self.ordered_assignment(assignment)?;
        self.compose(&subs)
    }

    fn ordered_assignment(&self, assignment: &[(&str, TruncatedSeries)]) -> Result<Vec<Self>> {
        let target = assignment
            .first()
            .map(|(_, s)| s.ctx.clone())
            .ok_or_else(|| SeriesError::Malformed("empty assignment".into()))?;
        let trunc = assignment.iter().map(|(_, s)| s.trunc).max().unwrap_or(0);
        let mut subs: Vec<Option<Self>> = vec![None; self.ctx.len()];
        for (name, s) in assignment {
            let i = self.ctx.index_of(name)?;
            subs[i] = Some(s.clone());
        }
        subs.into_iter()
            .enumerate()
            .map(|(i, s)| match s {
                Some(s) => Ok(s),
                None if self.terms.keys().all(|m| m.exp(i) == 0) => Ok(Self::zero(&target, trunc)),
                None => Err(SeriesError::UnknownVariable(format!(
                    "{} (occurs but is not assigned)",
                    self.ctx.name(i)
                ))),
            })
            .collect()
    }

    /// Compositional inverse in variable `name`: returns `t` with
    /// `self(t, rest) = name` up to the truncation, where the remaining
    /// variables act as parameters.
    pub fn invert_in(&self, name: &str) -> Result<Self> {
        let i = self.ctx.index_of(name)?;
        let n = self.ctx.len();
        let mut unit = vec![0; n];
        unit[i] = 1;
        let c = self.coeff(&unit);
        if c.is_zero() {
            return Err(SeriesError::VanishingLinearCoefficient(name.to_string()));
        }
        if !self.constant_term().is_zero() {
            return Err(SeriesError::NonNilpotent(
                name.to_string(),
                0,
                self.ctx.weight(i),
            ));
        }
        let trunc = self.trunc;
        let ctx = self.ctx.clone();
        let mut rest = self.clone();
        rest.terms.remove(&Monomial::new(&ctx, &unit));
        let cinv = c.recip();
        let v = Self::var_at(&ctx, i, trunc);
        let mut subs: Vec<Self> = (0..n).map(|j| Self::var_at(&ctx, j, trunc)).collect();
        let mut t = v.scale(&cinv);
        for _ in 0..=trunc + 1 {
            subs[i] = t.clone();
            let r = rest.compose_capped(&subs, &ctx, trunc);
            let next = v.sub(&r)?.scale(&cinv);
            if next == t {
                break;
            }
            t = next;
        }
        t.trunc = trunc;
        Ok(t)
    }

    /// Compositional inverse in the first variable.
    pub fn invert_in_x(&self) -> Result<Self> {
        let name = self.ctx.name(0).to_string();
        self.invert_in(&name)
    }

    /// Exact value at a rational point (the series is read as a polynomial).
    pub fn eval(&self, point: &[Rational]) -> Rational {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (i, p) in point.iter().enumerate() {
                let e = m.exp(i);
                if e > 0 {
                    term *= num_traits::pow(p.clone(), e as usize);
                }
            }
            total += term;
        }
        total
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut term = c.to_f64().unwrap_or(f64::NAN);
                for (i, p) in point.iter().enumerate() {
                    term *= p.powi(m.exp(i) as i32);
                }
                term
            })
            .sum()
    }

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson::from(self)
    }
}

fn horner(
    terms: &[(Vec<u32>, &Rational)],
    var: usize,
    powers: &[Vec<TruncatedSeries>],
    target: &Arc<VarContext>,
    cap: u32,
) -> TruncatedSeries {
    let n = powers.len();
    let mut out = TruncatedSeries::zero(target, cap);
    if var + 1 == n {
        for (e, c) in terms {
            let p = &powers[var][e[var] as usize];
            for (m, d) in &p.terms {
                out.add_term(*m, *c * d);
            }
        }
        return out;
    }
    let mut by_exp: BTreeMap<u32, Vec<(Vec<u32>, &Rational)>> = BTreeMap::new();
    for (e, c) in terms {
        by_exp.entry(e[var]).or_default().push((e.clone(), *c));
    }
    for (e, group) in by_exp {
        let inner = horner(&group, var + 1, powers, target, cap);
        let prod = powers[var][e as usize].mul_capped(&inner, cap);
        for (m, d) in prod.terms {
            out.add_term(m, d);
        }
    }
    out
}

/// Inverts a map given by one series per target coordinate, each written in
/// the source context `components[j].ctx()`. Returns one series per source
/// variable written in `target`.
///
/// The linear part must be invertible and every component must be weight
/// compatible (no term below the weight of the coordinate it defines).
pub fn invert_map(
    components: &[TruncatedSeries],
    target: &Arc<VarContext>,
) -> Result<Vec<TruncatedSeries>> {
    let n = target.len();
    if components.len() != n {
        return Err(SeriesError::Malformed(format!(
            "map has {} components for {} target variables",
            components.len(),
            n
        )));
    }
    let source = components[0].ctx.clone();
    for c in components {
        check_same_ctx(&source, &c.ctx)?;
    }
    if source.len() != n {
        return Err(SeriesError::SingularLinearPart);
    }
    for (j, c) in components.iter().enumerate() {
        if !c.constant_term().is_zero() {
            return Err(SeriesError::NonNilpotent(
                target.name(j).to_string(),
                0,
                target.weight(j),
            ));
        }
    }
    // Precision of each component above the weight of its coordinate; the
    // inverse keeps the smallest such margin above each source weight.
    let margin = components
        .iter()
        .enumerate()
        .map(|(j, c)| c.trunc as i64 - target.weight(j) as i64)
        .min()
        .unwrap_or(0)
        .max(0) as u32;
    let out_trunc: Vec<u32> = (0..n).map(|i| source.weight(i) + margin).collect();
    let trunc = *out_trunc.iter().max().unwrap();
    // jac[j][i]: coefficient of source variable i in component j.
    let jac: Vec<Vec<Rational>> = components
        .iter()
        .map(|c| {
            (0..n)
                .map(|i| {
                    let mut e = vec![0; n];
                    e[i] = 1;
                    c.coeff(&e)
                })
                .collect()
        })
        .collect();
    let kinv = invert_matrix(&jac).ok_or(SeriesError::SingularLinearPart)?;
    let nonlinear: Vec<TruncatedSeries> = components
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut r = c.clone();
            for i in 0..n {
                let mut e = vec![0; n];
                e[i] = 1;
                r.terms.remove(&Monomial::new(&source, &e));
            }
            let _ = j;
            r
        })
        .collect();
    let tvars: Vec<TruncatedSeries> = (0..n)
        .map(|j| TruncatedSeries::var_at(target, j, trunc))
        .collect();
    let apply_kinv = |rhs: &[TruncatedSeries]| -> Result<Vec<TruncatedSeries>> {
        (0..n)
            .map(|i| {
                let mut acc = TruncatedSeries::zero(target, trunc);
                for (j, r) in rhs.iter().enumerate() {
                    if !kinv[i][j].is_zero() {
                        acc = acc.add(&r.scale(&kinv[i][j]))?;
                    }
                }
                Ok(acc)
            })
            .collect()
    };
    let mut psi = apply_kinv(&tvars)?;
    for (i, p) in psi.iter().enumerate() {
        if !p.is_zero() && p.order() < source.weight(i) {
            return Err(SeriesError::NonNilpotent(
                source.name(i).to_string(),
                p.order(),
                source.weight(i),
            ));
        }
    }
    for _ in 0..=trunc + 1 {
        let rhs: Vec<TruncatedSeries> = (0..n)
            .map(|j| {
                let nl = nonlinear[j].compose_capped(&psi, target, trunc);
                tvars[j].sub(&nl)
            })
            .collect::<Result<_>>()?;
        let next = apply_kinv(&rhs)?;
        if next == psi {
            break;
        }
        psi = next;
    }
    Ok(psi
        .into_iter()
        .zip(out_trunc)
        .map(|(p, t)| p.truncate_to_cap(t))
        .collect())
}

fn invert_matrix(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= &f * pv;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Spec-level free functions mirroring the methods.
pub fn add(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.add(b)
}

pub fn multiply(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.mul(b)
}

pub fn weighted_component(s: &TruncatedSeries, m: u32) -> Result<TruncatedSeries> {
    s.component(m)
}

/// One term of the JSON encoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub num: String,
    pub den: String,
}

/// JSON encoding: `{"vars":[..],"weights":[..],"trunc":W,"terms":[..]}` with
/// terms in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub vars: Vec<String>,
    pub weights: Vec<u32>,
    pub trunc: u32,
    pub terms: Vec<TermJson>,
}

impl From<&TruncatedSeries> for SeriesJson {
    fn from(s: &TruncatedSeries) -> Self {
        let n = s.ctx.len();
        Self {
            vars: s.ctx.names.clone(),
            weights: s.ctx.weights.clone(),
            trunc: s.trunc,
            terms: s
                .terms
                .iter()
                .map(|(m, c)| TermJson {
                    exp: m.exps(n),
                    num: c.numer().to_string(),
                    den: c.denom().to_string(),
                })
                .collect(),
        }
    }
}

impl TryFrom<&SeriesJson> for TruncatedSeries {
    type Error = SeriesError;

    fn try_from(j: &SeriesJson) -> Result<Self> {
        if j.vars.len() != j.weights.len() {
            return Err(SeriesError::Malformed(
                "vars/weights length mismatch".into(),
            ));
        }
        let ctx = VarContext::new(j.vars.iter().cloned().zip(j.weights.iter().copied()))?;
        let mut s = Self::zero(&ctx, j.trunc);
        for t in &j.terms {
            if t.exp.len() != ctx.len() {
                return Err(SeriesError::Malformed("exponent length".into()));
            }
            let num: BigInt = t
                .num
                .parse()
                .map_err(|_| SeriesError::Malformed(format!("numerator `{}`", t.num)))?;
            let den: BigInt = t
                .den
                .parse()
                .map_err(|_| SeriesError::Malformed(format!("denominator `{}`", t.den)))?;
            if den.is_zero() || den.is_negative() {
                return Err(SeriesError::Malformed(
                    "denominator must be positive".into(),
                ));
            }
            let m = Monomial::new(&ctx, &t.exp);
            if m.weight > j.trunc {
                return Err(SeriesError::Malformed(format!(
                    "term of weight {} above truncation {}",
                    m.weight, j.trunc
                )));
            }
            s.add_term(m, Rational::new(num, den));
        }
        Ok(s)
    }
}

impl Serialize for TruncatedSeries {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        SeriesJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TruncatedSeries {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let j = SeriesJson::deserialize(deserializer)?;
        TruncatedSeries::try_from(&j).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::expr::format_series(self))
    }
}
