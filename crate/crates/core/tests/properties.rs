//! Property tests: ring axioms of the truncated series ring, the Gauss
//! lemma, sigma as a ring homomorphism, Laurent inversion round trips, and
//! canonical-serialization round trips.

use proptest::prelude::*;

use urzeta_core::padic::{PAdicScalar, PadicCtx};
use urzeta_core::series::{apply_sigma, LaurentSeries1, SigmaLift, TruncSeries};

fn ctx() -> urzeta_core::padic::Ctx {
    PadicCtx::new(2, 8).unwrap()
}

fn series_strategy(max_deg: u32) -> impl Strategy<Value = TruncSeries> {
    prop::collection::vec(0u64..256, 0..=(max_deg as usize + 1)).prop_map(move |coeffs| {
        let c = ctx();
        let mut out = TruncSeries::zero(&c, 1, max_deg);
        for (e, v) in coeffs.into_iter().enumerate() {
            out = out.add(&TruncSeries::monomial(
                &c,
                1,
                max_deg,
                vec![e as u32],
                PAdicScalar::from_u64(&c, v),
            ));
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_ring_axioms(f in series_strategy(6), g in series_strategy(6), h in series_strategy(6)) {
        prop_assert_eq!(f.mul(&g), g.mul(&f));
        prop_assert_eq!(f.mul(&g.mul(&h)), f.mul(&g).mul(&h));
        prop_assert_eq!(f.mul(&g.add(&h)), f.mul(&g).add(&f.mul(&h)));
    }

    #[test]
    fn gauss_lemma(f in series_strategy(5), g in series_strategy(5)) {
        let fg = f.mul(&g);
        if let (Some(a), Some(b), Some(c)) = (f.gauss_ord(), g.gauss_ord(), fg.gauss_ord()) {
            prop_assert!(c >= a + b, "ord(fg) = {c} < {a} + {b}");
        }
        // unit-leading pairs give equality
        let c = ctx();
        let one = TruncSeries::one(&c, 1, 5);
        let fu = f.add(&one);
        let gu = g.add(&one);
        if fu.gauss_ord() == Some(0) && gu.gauss_ord() == Some(0) {
            prop_assert_eq!(fu.mul(&gu).gauss_ord(), Some(0));
        }
    }

    #[test]
    fn sigma_is_ring_hom(f in series_strategy(4), g in series_strategy(4)) {
        let c = ctx();
        let lift = SigmaLift::new(&c, 1, vec![TruncSeries::from_int_terms(&c, 1, 8, &[(vec![1], 1)])]).unwrap();
        let cap = 32u32;
        let (fw, gw) = (f.with_cap(8), g.with_cap(8));
        let sf = apply_sigma(&fw, &lift, Some(cap)).unwrap();
        let sg = apply_sigma(&gw, &lift, Some(cap)).unwrap();
        let sfg = apply_sigma(&fw.mul(&gw), &lift, Some(cap)).unwrap();
        prop_assert!(sfg.congruent(&sf.mul(&sg), 8));
        let sfpg = apply_sigma(&fw.add(&gw), &lift, Some(cap)).unwrap();
        prop_assert!(sfpg.congruent(&sf.add(&sg), 8));
    }

    #[test]
    fn laurent_invert_round_trip(shift in -3i64..3, f in series_strategy(3)) {
        let c = ctx();
        let one = TruncSeries::one(&c, 1, 3);
        let unit = f.mul_p_pow(1).add(&one); // a 1-unit polynomial
        let g = unit.to_laurent(-24, 12).unwrap()
            .mul_monomial(shift, &PAdicScalar::one(&c)).unwrap();
        let (inv, content) = g.invert_unit_part().unwrap();
        prop_assert_eq!(content, 0);
        let prod = g.mul(&inv).unwrap();
        prop_assert_eq!(prod.coeff(0), PAdicScalar::one(&c));
        for e in -12..=6i64 {
            if e != 0 {
                prop_assert!(prod.coeff(e).is_zero(), "junk at {}", e);
            }
        }
        let _ = LaurentSeries1::one(&c, -24, 12);
    }

    #[test]
    fn canonical_serialization_round_trip(f in series_strategy(6)) {
        let c = ctx();
        let terms = f.canonical_terms();
        // lexicographically sorted
        for w in terms.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
        }
        let mut rebuilt = TruncSeries::zero(&c, 1, 6);
        for (e, digits) in &terms {
            let v: u64 = digits.parse().unwrap();
            rebuilt = rebuilt.add(&TruncSeries::monomial(&c, 1, 6, e.clone(), PAdicScalar::from_u64(&c, v)));
        }
        prop_assert_eq!(rebuilt, f);
    }

    #[test]
    fn lseries_mul_inv_round_trip(coeffs in prop::collection::vec(0u64..256, 1..6)) {
        let c = ctx();
        let mut v = vec![PAdicScalar::one(&c)];
        v.extend(coeffs.iter().map(|&x| PAdicScalar::from_u64(&c, x)));
        let f = urzeta_core::lseries::LSeries::from_coeffs(v);
        let inv = f.inv().unwrap();
        let prod = f.mul(&inv);
        prop_assert!(prod.congruent(&urzeta_core::lseries::LSeries::one(&c, f.t_cap()), 8, f.t_cap()));
    }
}
