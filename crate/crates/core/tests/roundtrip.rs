//! Integrating an ODE to its manifold of solutions and differentiating back.

mod common;

use common::*;
use odenorm::invariants::OdeJet;
use odenorm::solutions::{integrate_to_manifold, manifold_to_ode, solve_parameters};

#[test]
fn manifold_round_trip_on_random_polynomials() {
    let mut rng = TestRng::seed_from_u64(5);
    for i in 0..50 {
        let w = 6 + (i % 5) as u32;
        let p = random_poly_f(&mut rng, 4, 1, 7);
        let f = ode_of(&p, w);
        let m = integrate_to_manifold(&f, w).unwrap();
        let back = manifold_to_ode(&m).unwrap();
        assert_eq!(back.trunc(), w - 2);
        assert_eq!(
            Poly::from_series(back.f()),
            p.truncate(&XYU, w - 2),
            "F = {p:?}, W = {w}"
        );
    }
}

#[test]
fn parameters_are_the_initial_jet() {
    // For y'' = 0 the solution through (x, y, u) has a = u, b = y − xu.
    let m = integrate_to_manifold(&OdeJet::parse("0", 6).unwrap(), 6).unwrap();
    let (a, b) = solve_parameters(&m).unwrap();
    assert_eq!(Poly::from_series(&a), Poly::var(3, 2));
    assert_eq!(
        Poly::from_series(&b),
        Poly::var(3, 1).sub(&Poly::var(3, 0).mul(&Poly::var(3, 2)))
    );
}

#[test]
fn manifold_satisfies_the_equation() {
    // Φ_xx = F(x, Φ, Φ_x) checked with the naive oracle.
    let mut rng = TestRng::seed_from_u64(6);
    for _ in 0..10 {
        let p = random_poly_f(&mut rng, 3, 1, 5);
        let w = 8;
        let phi = Poly::from_series(integrate_to_manifold(&ode_of(&p, w), w).unwrap().phi());
        let lhs = phi.diff(0).diff(0);
        let rhs = p.subst(&[Poly::var(3, 0), phi.clone(), phi.diff(0)]);
        assert_eq!(
            lhs.truncate(&XAB, w - 2),
            rhs.truncate(&XAB, w - 2),
            "F = {p:?}"
        );
    }
}
