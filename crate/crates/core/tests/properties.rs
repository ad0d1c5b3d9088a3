use eacc_lab::bounds::{eacc_singleton, separate_singleton};
use eacc_lab::codes::{
    build_separate, build_separate_smallest, build_spaceshared, params_theorem1, separate_field, EaccCode,
    ErasurePattern,
};
use eacc_lab::entropy_audit::{audit, check_no_signaling, AuditError, AuditInstance, Chain};
use eacc_lab::gf::Field;
use eacc_lab::rational::Rational;
use eacc_lab::verify::{check_rate_against_bounds, check_separate_encoders, verify_code, VerifyPolicy};
use proptest::prelude::*;
use proptest::sample::subsequence;

/// Admissible `(n, d, c)` with `n` in `1..=nmax`.
fn triple(nmax: usize) -> impl Strategy<Value = (usize, usize, usize)> {
    (1..=nmax).prop_flat_map(|n| (Just(n), 1..=n + 1, 0..=n))
}

fn r(x: usize) -> Rational {
    Rational::from_integer(x as i64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spaceshared_round_trips((n, d, c) in triple(4), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let code = build_spaceshared(n, d, c, None).unwrap();
        let report = verify_code(&code, VerifyPolicy::Sampled { seed, count: 16 });
        prop_assert!(report.passed, "{report}");

        let patterns = ErasurePattern::all(n, d - 1);
        let pattern = &patterns[pick.index(patterns.len())];
        let dits = code.message_dits();
        let q_bar = code.params().q_bar;
        let msg: Vec<u32> = (0..dits).map(|i| ((seed >> (i % 64)) as u32 ^ i as u32) % q_bar).collect();
        prop_assert_eq!(code.transmit(&msg, pattern).unwrap(), msg);
    }

    #[test]
    fn separate_round_trips((n, d, c) in triple(4), seed in any::<u64>()) {
        let code = build_separate(n, d, c, &separate_field(n, c).unwrap()).unwrap();
        let report = verify_code(&code, VerifyPolicy::Sampled { seed, count: 16 });
        prop_assert!(report.passed, "{report}");
        prop_assert!(check_separate_encoders(&code).separate);
    }

    #[test]
    fn schedule_spreads_entanglement_evenly((n, d, c) in triple(12)) {
        let p = params_theorem1(n, d, c).unwrap();
        let per_position = c * p.r as usize / n;
        prop_assert_eq!(p.l2 as usize, per_position);
        prop_assert_eq!(p.l1 + p.l2, p.r);
        // rate identity: averaging the subcode rates over the r sub-slot rows
        let k = Rational::new((p.l1 as usize * p.k1 + p.l2 as usize * p.k2) as i64, p.r as i64);
        prop_assert_eq!(k, p.k);
        prop_assert_eq!(p.k, (r(1) + Rational::new(c as i64, n as i64)) * r(n + 1 - d));
    }

    #[test]
    fn schedule_uses_every_alice_subslot_once((n, d, c) in triple(6)) {
        let code = build_spaceshared(n, d, c, None).unwrap();
        let s = code.schedule();
        let rr = code.params().r as usize;
        prop_assert_eq!(s.len(), c * rr);
        for i in 0..n {
            prop_assert_eq!(s.entangled_at(i), c * rr / n);
        }
        let mut alice: Vec<_> = s.assignment.iter().map(|a| a.alice).collect();
        alice.sort_unstable();
        alice.dedup();
        prop_assert_eq!(alice.len(), c * rr);
    }

    #[test]
    fn json_round_trip_preserves_code((n, d, c) in triple(4), separate in any::<bool>()) {
        let code = if separate {
            build_separate(n, d, c, &separate_field(n, c).unwrap()).unwrap()
        } else {
            build_spaceshared(n, d, c, None).unwrap()
        };
        let text = code.to_json();
        let back = EaccCode::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.params(), code.params());
        prop_assert_eq!(check_separate_encoders(&back).separate, check_separate_encoders(&code).separate);
    }

    #[test]
    fn constructions_stay_within_their_bounds((n, d, c) in triple(10)) {
        let shared = build_spaceshared(n, d, c, None).unwrap();
        let gap = check_rate_against_bounds(&shared);
        prop_assert!(gap.saturates_eacc && gap.within_eacc);
        let sep = build_separate(n, d, c, &separate_field(n, c).unwrap()).unwrap();
        let gap = check_rate_against_bounds(&sep);
        prop_assert!(gap.saturates_separate && gap.within_separate && gap.within_eacc);
    }

    #[test]
    fn bounds_are_monotone((n, d, c) in triple(30)) {
        let (n, d, c) = (n as i64, d as i64, c as i64);
        let e = eacc_singleton(n, d, c).unwrap().value;
        let s = separate_singleton(n, d, c).unwrap().value;
        prop_assert!(s <= e);
        if c < n {
            prop_assert!(eacc_singleton(n, d, c + 1).unwrap().value >= e);
            prop_assert!(separate_singleton(n, d, c + 1).unwrap().value >= s);
        }
        if d <= n {
            prop_assert!(eacc_singleton(n, d + 1, c).unwrap().value <= e);
            prop_assert!(separate_singleton(n, d + 1, c).unwrap().value <= s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bob_sees_maximally_mixed((n, d, c) in triple(3), separate in any::<bool>()) {
        let code = if separate {
            build_separate(n, d, c, &separate_field(n, c).unwrap()).unwrap()
        } else {
            build_spaceshared(n, d, c, Some(&Field::with_order(2).unwrap())).unwrap()
        };
        let report = check_no_signaling(&code).unwrap();
        prop_assert!(report.holds, "max deviation {}", report.max_deviation);
    }

    #[test]
    fn audit_holds_on_small_separate_codes(
        (n, d, c) in triple(3),
        i_pick in subsequence((0..3).collect::<Vec<usize>>(), 0..=3),
        j_pick in subsequence((0..3).collect::<Vec<usize>>(), 0..=3),
    ) {
        let chain = if d - 1 <= c { Chain::Rich } else { Chain::Poor };
        let (i_set, j_set) = match chain {
            Chain::Rich => (i_pick.into_iter().filter(|&p| p < c).take(c + 1 - d).collect::<Vec<_>>(), (c..n).collect()),
            Chain::Poor => (Vec::new(), j_pick.into_iter().filter(|&p| p >= c && p < n).take(n + 1 - d).collect::<Vec<_>>()),
        };
        let code = build_separate_smallest(n, d, c).unwrap();
        let inst = match AuditInstance::new(code, chain, i_set, j_set) {
            Ok(inst) => inst,
            Err(AuditError::BadSets(_)) | Err(AuditError::TooManyMessages(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        match audit(&inst) {
            Ok(report) => prop_assert!(report.overall, "{report}"),
            Err(AuditError::Densim(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
