mod common;

use proptest::prelude::*;

use edgesim::policy::{decide_cledge, CloudPreference};
use edgesim::sim::run;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn delays_match_path_enumeration(seed in any::<u64>()) {
        let ex = common::random_topology(&mut common::rng(seed));
        let r = common::check_paths(&ex);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn pit_and_cs_follow_the_reference_model(seed in any::<u64>()) {
        let r = common::pit_cs_fuzz(seed, 400);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cledge_matches_furthest_feasible_enumeration(seed in any::<u64>(), gateway_only in any::<bool>()) {
        let ctx = common::random_context(&mut common::rng(seed));
        let pref = if gateway_only { CloudPreference::GatewayOnly } else { CloudPreference::AnyNode };
        prop_assert_eq!(decide_cledge(&ctx, pref), common::oracle_cledge(&ctx, pref));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sync_bytes_match_closed_form(
        intra in 50u32..3000,
        inter in 100u32..8000,
        seed in 0u64..1000,
    ) {
        let cfg = common::mesh_config(f64::from(intra), f64::from(inter));
        let out = run(&cfg, seed).unwrap();
        prop_assert_eq!(out.report.generated, 0);
        prop_assert_eq!(common::sync_traffic(&out), common::mesh_sync_bytes(&cfg, &out));
    }
}
