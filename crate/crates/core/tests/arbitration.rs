mod support {
    pub mod arbitration_cases;
}

use proptest::prelude::*;
use support::arbitration_cases::run_case;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_graphs_follow_arbitration_rules(seed in any::<u64>()) {
        if let Err(e) = run_case(seed, 40).all() {
            prop_assert!(false, "{}", e);
        }
    }
}
