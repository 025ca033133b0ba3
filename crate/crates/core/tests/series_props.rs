//! Algebraic properties of truncated series, checked on random inputs.

use std::sync::Arc;

use odenorm::expr::{format_series, parse_polynomial};
use odenorm::pseries::{invert_map, Rational, TruncatedSeries, VarContext};
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = Rational> + Clone {
    (-6i64..=6, 1i64..=5).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

/// Random series in `(x, y, u)` of truncation `t`, terms of weight at least `lo`.
fn series(lo: u32, t: u32) -> impl Strategy<Value = TruncatedSeries> {
    prop::collection::vec(((0u32..=6, 0u32..=3, 0u32..=6), coeff()), 0..8).prop_map(move |terms| {
        let ctx = VarContext::xyu();
        let terms = terms
            .into_iter()
            .map(|((a, b, c), v)| (vec![a, b, c], v))
            .filter(|(e, _)| {
                let w = e[0] + 2 * e[1] + e[2];
                w >= lo && w <= t
            });
        TruncatedSeries::from_terms(&ctx, t, terms)
    })
}

fn xy_var(i: usize, t: u32) -> TruncatedSeries {
    TruncatedSeries::var_at(&VarContext::xy(), i, t)
}

/// `(x + p, y + q)` with `p` of weight ≥ 2 and `q` of weight ≥ 3.
fn near_identity(t: u32) -> impl Strategy<Value = [TruncatedSeries; 2]> {
    let term = ((0u32..=5, 0u32..=3), coeff());
    (
        prop::collection::vec(term.clone(), 0..4),
        prop::collection::vec(term, 0..4),
    )
        .prop_map(move |(p, q)| {
            let ctx: Arc<VarContext> = VarContext::xy();
            let keep = |lo: u32| {
                move |((a, b), v): ((u32, u32), Rational)| {
                    let w = a + 2 * b;
                    (w >= lo && w <= t).then(|| (vec![a, b], v))
                }
            };
            let p = TruncatedSeries::from_terms(&ctx, t, p.into_iter().filter_map(keep(2)));
            let q = TruncatedSeries::from_terms(&ctx, t, q.into_iter().filter_map(keep(3)));
            [xy_var(0, t).add(&p).unwrap(), xy_var(1, t).add(&q).unwrap()]
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(a in series(0, 7), b in series(0, 7), c in series(0, 7)) {
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(
            a.mul(&b).unwrap().mul(&c).unwrap(),
            a.mul(&b.mul(&c).unwrap()).unwrap()
        );
        prop_assert_eq!(
            a.mul(&b.add(&c).unwrap()).unwrap(),
            a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
        );
        prop_assert!(a.sub(&a).unwrap().is_zero());
        let one = TruncatedSeries::one(&VarContext::xyu(), 7);
        prop_assert_eq!(a.mul(&one).unwrap(), a.clone());
    }

    #[test]
    fn truncation_commutes_with_products(a in series(0, 8), b in series(0, 8)) {
        prop_assert_eq!(
            a.mul(&b).unwrap().truncate(5),
            a.truncate(5).mul(&b.truncate(5)).unwrap()
        );
    }

    #[test]
    fn derivative_undoes_antiderivative(a in series(0, 7)) {
        for i in 0..3 {
            let back = a.antiderivative_at(i).differentiate_at(i);
            prop_assert_eq!(back.truncate(back.trunc().min(a.trunc())), a.truncate(back.trunc().min(a.trunc())));
        }
    }

    #[test]
    fn leibniz_rule(a in series(0, 7), b in series(0, 7)) {
        for i in 0..3 {
            let lhs = a.mul(&b).unwrap().differentiate_at(i);
            let rhs = a.differentiate_at(i).mul(&b).unwrap()
                .add(&a.mul(&b.differentiate_at(i)).unwrap()).unwrap();
            let t = lhs.trunc().min(rhs.trunc());
            prop_assert_eq!(lhs.truncate(t), rhs.truncate(t));
        }
    }

    #[test]
    fn inverse_map_round_trip(m in near_identity(7)) {
        let inv = invert_map(&m, &VarContext::xy()).unwrap();
        for (i, c) in m.iter().enumerate() {
            let back = c.compose(&inv).unwrap();
            let t = back.trunc();
            prop_assert!(t >= 5, "inverse only known to weight {}", t);
            prop_assert_eq!(back, xy_var(i, t));
        }
    }

    #[test]
    fn format_then_parse(a in series(0, 9)) {
        let text = format_series(&a);
        let back = parse_polynomial(&text, &VarContext::xyu(), a.trunc()).unwrap();
        prop_assert_eq!(back, a);
    }
}
