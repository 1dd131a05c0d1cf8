mod common;

use common::props::{check_chains, check_evaluation, cycle_events, placement, scripts, KEYS};
use common::{run_both, Access};
use proptest::prelude::*;
use txstream::{BlotterStatus, Scheme};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chains_are_sorted_and_conserve_operations(
        events in scripts(),
        workers in 1usize..5,
        policy in placement(),
    ) {
        check_chains(&events, workers, policy)?;
    }

    #[test]
    fn evaluation_matches_serial_order_and_respects_levels(
        events in scripts(),
        executors in 1usize..4,
        interval in 1usize..25,
        shared in any::<bool>(),
    ) {
        check_evaluation(&events, executors, interval, shared)?;
    }

    #[test]
    fn eager_schemes_match_serial_order(
        events in scripts(),
        executors in 1usize..4,
        scheme in prop_oneof![Just(Scheme::Lock), Just(Scheme::Mvlk), Just(Scheme::Pat)],
    ) {
        let (_, same) = run_both(&events, KEYS, 10, common::config(scheme, executors, 7, false));
        prop_assert!(same, "{} diverged from the serial oracle", scheme);
    }

    #[test]
    fn random_cycles_match_serial_order(
        amounts in proptest::collection::vec((any::<bool>(), 1i64..30), 2..40),
        executors in 1usize..4,
    ) {
        let (_, same) = run_both(
            &cycle_events(&amounts), 2, 20, common::config(Scheme::TStream, executors, 50, true),
        );
        prop_assert!(same);
    }
}

#[test]
fn mutual_dependency_cycles_match_oracle() {
    let mut events = cycle_events(&[(true, 6), (false, 15), (true, 30), (false, 1)]);
    events.push(vec![Access::Read(0), Access::Read(1)]);
    events.extend(cycle_events(&[(true, 24)]));
    events.push(vec![Access::Add { key: 0, delta: 1, cond: None, source: Some(1) }]);
    events.push(vec![Access::Add { key: 1, delta: 1, cond: None, source: Some(0) }]);
    events.push(vec![Access::Read(0), Access::Read(1)]);
    for scheme in [Scheme::TStream, Scheme::Lock, Scheme::Mvlk, Scheme::Pat] {
        for executors in 1..=3 {
            let (out, same) = run_both(&events, 2, 10, common::config(scheme, executors, 100, true));
            assert!(same, "{scheme} with {executors} executors");
            assert!(out.rejected() > 0, "scenario should contain aborts");
            if scheme == Scheme::TStream {
                assert!(out.batches.iter().any(|b| b.merged_components > 0));
            }
        }
    }
    let (out, _) = run_both(&events, 2, 10, common::config(Scheme::TStream, 1, 100, true));
    assert_eq!(out.records[2].status, BlotterStatus::Rejected);
}
