//! The homological solver against an independently assembled operator and a
//! generic Gaussian elimination over the same unknowns.

mod common;

use common::*;
use num_traits::Zero;
use odenorm::expr::{parse_map, parse_polynomial};
use odenorm::normalform::{homological_solve, is_killed};
use odenorm::pseries::{Rational, VarContext};

/// Solves `A z = rhs` by Gauss–Jordan elimination; `None` if inconsistent.
fn gauss(mut a: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        rhs.swap(r, p);
        let inv = a[r][c].recip();
        for v in a[r].iter_mut() {
            *v = &*v * &inv;
        }
        rhs[r] = &rhs[r] * &inv;
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let k = a[i][c].clone();
                let pivot = a[r].clone();
                for (v, pv) in a[i].iter_mut().zip(&pivot) {
                    *v -= pv * &k;
                }
                let t = &rhs[r] * &k;
                rhs[i] -= t;
            }
        }
        pivots.push(c);
        r += 1;
    }
    if rhs[r..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    let mut z = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        z[c] = rhs[i].clone();
    }
    Some(z)
}

/// The killed equations at weight `m`, solved generically.
fn generic_solve(psi: &Poly, m: u32) -> Option<Poly> {
    let fm = monomials(&XY, m - 1);
    let gm = monomials(&XY, m);
    let lm = monomials(&XY, m - 1);
    let mm = monomials(&XY, m);
    let z2 = Poly::zero(2);
    let mut columns: Vec<Poly> = Vec::new();
    for e in &fm {
        columns.push(oracle_operator(&basis_poly(2, e), &z2, &z2, &z2));
    }
    for e in &gm {
        columns.push(oracle_operator(&z2, &basis_poly(2, e), &z2, &z2));
    }
    for e in &lm {
        columns.push(oracle_operator(&z2, &z2, &basis_poly(2, e), &z2));
    }
    for e in &mm {
        columns.push(oracle_operator(&z2, &z2, &z2, &basis_poly(2, e)));
    }
    let rows: Vec<Vec<u32>> = monomials(&XAB, m)
        .into_iter()
        .filter(|e| is_killed(e[0], e[1]))
        .collect();
    let a: Vec<Vec<Rational>> = rows
        .iter()
        .map(|e| columns.iter().map(|c| c.coeff(e)).collect())
        .collect();
    let rhs: Vec<Rational> = rows.iter().map(|e| psi.coeff(e)).collect();
    let z = gauss(a, rhs)?;
    let mut image = Poly::zero(3);
    for (c, v) in columns.iter().zip(&z) {
        image = image.add(&c.scale(v));
    }
    Some(image)
}

#[test]
fn random_right_hand_sides() {
    let mut rng = TestRng::seed_from_u64(2024);
    let ctx = VarContext::xab();
    for i in 0..200 {
        let m = 3 + (i % 7) as u32;
        let psi = random_psi(&mut rng, m);
        let d = homological_solve(&psi.to_series(&ctx, m)).unwrap();
        let image = oracle_operator(
            &Poly::from_series(&d.f),
            &Poly::from_series(&d.g),
            &Poly::from_series(&d.lam),
            &Poly::from_series(&d.mu),
        );
        assert_eq!(
            killed_part(&image),
            killed_part(&psi),
            "weight {m}, Ψ = {psi:?}"
        );
        for e in Poly::from_series(&d.f).c.keys() {
            assert_eq!(weight(e, &XY), m - 1);
        }
        for e in Poly::from_series(&d.g).c.keys() {
            assert_eq!(weight(e, &XY), m);
        }
        let generic = generic_solve(&psi, m).expect("killed part lies in the image");
        assert_eq!(killed_part(&generic), killed_part(&psi));
    }
}

#[test]
fn worked_cases() {
    let xab = VarContext::xab();
    let ab = VarContext::ab();
    let d = homological_solve(&parse_polynomial("x^2*a^3", &xab, 5).unwrap()).unwrap();
    let (f, g) = parse_map("-y^2 ; 0", 5).unwrap();
    assert_eq!((d.f.clone(), d.g.clone()), (f, g));
    assert_eq!(d.lam, parse_polynomial("2*b*a^2", &ab, 5).unwrap());
    assert_eq!(d.mu, parse_polynomial("a*b^2", &ab, 5).unwrap());

    let d = homological_solve(&parse_polynomial("x^3*a^2", &xab, 5).unwrap()).unwrap();
    let (f, g) = parse_map("-2*y*x^2 ; -y^2*x", 5).unwrap();
    assert_eq!((d.f.clone(), d.g.clone()), (f, g));
    assert_eq!(d.lam, parse_polynomial("-b^2", &ab, 5).unwrap());
    assert!(d.mu.is_zero());

    let image = oracle_operator(
        &Poly::from_series(&d.f),
        &Poly::from_series(&d.g),
        &Poly::from_series(&d.lam),
        &Poly::from_series(&d.mu),
    );
    assert_eq!(image, basis_poly(3, &[3, 2, 0]));
}
