//! Chains: distinguished transverse curves in the 1-jet space.
//!
//! Through a 1-jet `p` and a transverse direction there is one chain. It is
//! found by normalizing the equation at `p` with the model automorphism
//! `g+(α, β, r)` and pulling the vertical line `{x = u = 0}` of the normal
//! coordinates back through the prolonged normalizing map.
//!
//! A chain is traced as a solution of the second-order system obtained from
//! that construction, parameterized by the contact form `dy − u dx`.

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invariants::OdeJet;
use crate::normalform::{normalize_manifold, NormalFormError, NormalizationParams};
use crate::pseries::{int, invert_map, Rational, SeriesError, VarContext};
use crate::solutions::{integrate_to_manifold, prolong_map, recenter, SolutionError};

/// Weight of the normalization. The chain's 2-jet only involves the
/// weight-5 part of the map, but one more weight keeps the inverse's
/// truncation bookkeeping at 4 in every component.
const NORMAL_WEIGHT: u32 = 6;
/// Weight that fixes the chain's tangent.
const TANGENT_WEIGHT: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error("degenerate direction field: {0}")]
    Degenerate(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, ChainError>;

/// A point `(x, y, u)` of the 1-jet space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub x: f64,
    pub y: f64,
    pub u: f64,
}

impl JetPoint {
    pub fn new(x: f64, y: f64, u: f64) -> Self {
        Self { x, y, u }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// The exact rational value of each coordinate.
    pub fn to_rational(&self) -> Result<[Rational; 3]> {
        Ok([exact(self.x)?, exact(self.y)?, exact(self.u)?])
    }
}

fn exact(v: f64) -> Result<Rational> {
    Rational::from_float(v).ok_or_else(|| ChainError::NonFinite(v.to_string()))
}

/// Bits kept when a float enters the exact pipeline.
const GRID_BITS: i32 = 40;

/// Nearest multiple of `2^-GRID_BITS`. Exact float conversions carry 52-bit
/// denominators through every recentered power and make each normalization
/// far slower, for a change in the evaluation point below `1e-12`.
fn snapped(v: f64) -> Result<Rational> {
    if !v.is_finite() {
        return Err(ChainError::NonFinite(v.to_string()));
    }
    let scale = 2f64.powi(GRID_BITS);
    let n = (v * scale).round();
    let den = num_bigint::BigInt::from(1u64 << GRID_BITS);
    Ok(Rational::new(exact(n)?.to_integer(), den))
}

fn snapped_point(p: &JetPoint) -> Result<[Rational; 3]> {
    Ok([snapped(p.x)?, snapped(p.y)?, snapped(p.u)?])
}

fn float(v: &Rational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// 2-jet of a chain at the origin of recentered coordinates `(X, Y, U)`,
/// as a curve `t ↦ c1·t + c2·t²` in the normal-coordinate parameter `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainJet {
    pub c1: [Rational; 3],
    pub c2: [Rational; 3],
    /// `F(p)`, used to undo the recentering of `u`.
    pub curvature: Rational,
}

/// The chain's 2-jet at `p` for the normalization with parameters `params`.
pub fn chain_jet(f: &OdeJet, p: &[Rational; 3], params: &NormalizationParams) -> Result<ChainJet> {
    chain_jet_at(f, p, params, NORMAL_WEIGHT)
}

/// [`chain_jet`] computed from a normalization to weight `w`. Below the
/// default weight only `c1` is meaningful (weight 4 already fixes it) and
/// `c2` is left unchecked.
pub fn chain_jet_at(
    f: &OdeJet,
    p: &[Rational; 3],
    params: &NormalizationParams,
    w: u32,
) -> Result<ChainJet> {
    let curvature = if p.iter().all(Zero::is_zero) {
        f.f().constant_term()
    } else {
        f.f().eval(p)
    };
    let (local, _) = recenter(f, p)?;
    let m = integrate_to_manifold(&local, w)?;
    let res = normalize_manifold(&m, w, params)?;
    let pro = prolong_map(&res.map.point_map())?;
    let inv = invert_map(&pro, &VarContext::xyu())?;
    let need = if w >= NORMAL_WEIGHT { 4 } else { 2 };
    if let Some(s) = inv.iter().find(|s| s.trunc() < need) {
        return Err(ChainError::Degenerate(format!(
            "inverse prolongation known only to weight {}",
            s.trunc()
        )));
    }
    let coeffs =
        |e: &[u32]| -> [Rational; 3] { [inv[0].coeff(e), inv[1].coeff(e), inv[2].coeff(e)] };
    Ok(ChainJet {
        c1: coeffs(&[0, 1, 0]),
        c2: coeffs(&[0, 2, 0]),
        curvature,
    })
}

/// Tangent `(dx/db, da/db)` of the chain through `p` in the direction
/// labelled by `params`, in the recentered coordinates of `p`.
pub fn chain_direction_with(
    f: &OdeJet,
    p: &[Rational; 3],
    params: &NormalizationParams,
) -> Result<[Rational; 2]> {
    let jet = chain_jet_at(f, p, params, TANGENT_WEIGHT)?;
    let [dx, dy, du] = jet.c1;
    if dy.is_zero() {
        return Err(ChainError::Degenerate(
            "chain tangent has no b-component".into(),
        ));
    }
    Ok([dx / &dy, du / &dy])
}

/// [`chain_direction_with`] for the parameters `(1, 1, α, β, 0)`.
pub fn chain_direction(
    f: &OdeJet,
    p: &[Rational; 3],
    dir: &[Rational; 2],
) -> Result<[Rational; 2]> {
    let params = NormalizationParams::with_abr(dir[0].clone(), dir[1].clone(), Rational::zero());
    chain_direction_with(f, p, &params)
}

/// The direction label `(α, β)` whose chain at `p` has recentered tangent
/// `(dx/db, da/db)`. The tangent moves by `(−α, −2β)` with the label.
pub fn direction_label(
    f: &OdeJet,
    p: &[Rational; 3],
    tangent: &[Rational; 2],
) -> Result<[Rational; 2]> {
    let base = chain_direction(f, p, &[Rational::zero(), Rational::zero()])?;
    Ok([&base[0] - &tangent[0], (&base[1] - &tangent[1]) / int(2)])
}

/// Position and velocity along a chain parameterized by `dy − u dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct State {
    x: f64,
    y: f64,
    u: f64,
    vx: f64,
    vu: f64,
}

impl State {
    fn axpy(&self, h: f64, d: &[f64; 5]) -> State {
        State {
            x: self.x + h * d[0],
            y: self.y + h * d[1],
            u: self.u + h * d[2],
            vx: self.vx + h * d[3],
            vu: self.vu + h * d[4],
        }
    }
}

/// Acceleration `(x'', u'')` of the chain through `p` with velocity
/// `(vx, vu)`, both with respect to the contact parameter.
pub fn chain_acceleration(f: &OdeJet, p: &JetPoint, vx: f64, vu: f64) -> Result<[f64; 2]> {
    let pr = snapped_point(p)?;
    let c = if pr.iter().all(Zero::is_zero) {
        f.f().constant_term()
    } else {
        f.f().eval(&pr)
    };
    let vx_r = snapped(vx)?;
    let du = snapped(vu)? - &c * &vx_r;
    let label = direction_label(f, &pr, &[vx_r, du])?;
    let params =
        NormalizationParams::with_abr(label[0].clone(), label[1].clone(), Rational::zero());
    let jet = chain_jet(f, &pr, &params)?;
    let [x1, y1, u1] = &jet.c1;
    let [x2, y2, u2] = &jet.c2;
    if y1.is_zero() {
        return Err(ChainError::Degenerate(
            "chain tangent has no b-component".into(),
        ));
    }
    // Reparameterize t ↦ s with ds = dY − U dX; at the origin U = 0.
    let s1 = y1.clone();
    let s2 = int(2) * y2 - u1 * x1;
    let cube = &s1 * &s1 * &s1;
    let xss = (int(2) * x2 * &s1 - x1 * &s2) / &cube;
    let uss = (int(2) * u2 * &s1 - u1 * &s2) / &cube;
    let ax = float(&xss);
    let au = float(&(uss + &jet.curvature * &xss));
    if !ax.is_finite() || !au.is_finite() {
        return Err(ChainError::NonFinite("chain acceleration".into()));
    }
    Ok([ax, au])
}

fn field(f: &OdeJet, z: &State) -> Result<[f64; 5]> {
    let [ax, au] = chain_acceleration(f, &JetPoint::new(z.x, z.y, z.u), z.vx, z.vu)?;
    Ok([z.vx, 1.0 + z.u * z.vx, z.vu, ax, au])
}

/// A point of a traced chain with its contact parameter `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub b: f64,
    pub x: f64,
    pub y: f64,
    pub u: f64,
}

impl ChainPoint {
    pub fn jet(&self) -> JetPoint {
        JetPoint::new(self.x, self.y, self.u)
    }
}

/// A traced chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPolyline {
    pub points: Vec<ChainPoint>,
    pub step: f64,
    /// Direction label `(α, β)` at the start.
    pub alpha: f64,
    pub beta: f64,
}

impl ChainPolyline {
    /// CSV with header `b,x,y,u`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,x,y,u\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.b, p.x, p.y, p.u));
        }
        out
    }
}

/// Traces the chain through `p` labelled `dir = (α, β)` with `n` classical
/// Runge–Kutta steps of size `step` in the contact parameter.
pub fn trace_chain(
    f: &OdeJet,
    p: &JetPoint,
    dir: &[Rational; 2],
    step: f64,
    n: usize,
) -> Result<ChainPolyline> {
    let pr = snapped_point(p)?;
    let t = chain_direction(f, &pr, dir)?;
    let c = if pr.iter().all(Zero::is_zero) {
        f.f().constant_term()
    } else {
        f.f().eval(&pr)
    };
    let vx = float(&t[0]);
    let vu = float(&(&t[1] + &c * &t[0]));
    let mut out = trace_chain_from(f, p, vx, vu, step, n)?;
    out.alpha = float(&dir[0]);
    out.beta = float(&dir[1]);
    Ok(out)
}

/// Traces the chain through `p` with initial velocity `(vx, 1 + u·vx, vu)`,
/// i.e. a tangent normalized by `dy − u dx = 1`.
pub fn trace_chain_from(
    f: &OdeJet,
    p: &JetPoint,
    vx: f64,
    vu: f64,
    step: f64,
    n: usize,
) -> Result<ChainPolyline> {
    if !step.is_finite() || !vx.is_finite() || !vu.is_finite() {
        return Err(ChainError::NonFinite("step or initial velocity".into()));
    }
    let pr = snapped_point(p)?;
    let c = if pr.iter().all(Zero::is_zero) {
        f.f().constant_term()
    } else {
        f.f().eval(&pr)
    };
    let label = direction_label(f, &pr, &[snapped(vx)?, snapped(vu)? - &c * snapped(vx)?])?;
    let mut z = State {
        x: p.x,
        y: p.y,
        u: p.u,
        vx,
        vu,
    };
    let mut points = Vec::with_capacity(n + 1);
    points.push(ChainPoint {
        b: 0.0,
        x: z.x,
        y: z.y,
        u: z.u,
    });
    for i in 1..=n {
        let k1 = field(f, &z)?;
        let k2 = field(f, &z.axpy(step / 2.0, &k1))?;
        let k3 = field(f, &z.axpy(step / 2.0, &k2))?;
        let k4 = field(f, &z.axpy(step, &k3))?;
        let d: [f64; 5] =
            std::array::from_fn(|j| (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0);
        z = z.axpy(step, &d);
        if [z.x, z.y, z.u, z.vx, z.vu].iter().any(|v| !v.is_finite()) {
            return Err(ChainError::NonFinite(format!("step {i}")));
        }
        points.push(ChainPoint {
            b: step * i as f64,
            x: z.x,
            y: z.y,
            u: z.u,
        });
    }
    Ok(ChainPolyline {
        points,
        step,
        alpha: float(&label[0]),
        beta: float(&label[1]),
    })
}
