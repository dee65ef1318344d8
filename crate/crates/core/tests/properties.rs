use proptest::prelude::*;
use qsdc::attacks::{dummy_hit_distribution, tamper_detection_probability, EveStrategy};
use qsdc::codec::{decode_message_text, encode_message_text};
use qsdc::noise::{noisy_evolve, NoiseSpec};
use qsdc::protocol::{run_protocol, ProtocolParams};
use qsdc::walk::{evolve, initial_state, position_distribution, WalkConfig, TABLE1_KS};

fn table1_config() -> impl Strategy<Value = WalkConfig> {
    proptest::sample::select(TABLE1_KS.to_vec()).prop_map(|k| WalkConfig::table1(k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn walk_recurs_from_any_start(cfg in table1_config(), start in 0usize..16, periods in 1usize..3) {
        let x0 = start % cfg.k;
        let psi = initial_state(&cfg, x0).unwrap();
        let back = evolve(&psi, &cfg, periods * cfg.t_r.unwrap()).unwrap();
        prop_assert!((back.fidelity(&psi) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distributions_are_normalised(cfg in table1_config(), t in 0usize..80) {
        let p = position_distribution(&evolve(&initial_state(&cfg, 0).unwrap(), &cfg, t).unwrap());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&q| q >= -1e-15));
    }

    #[test]
    fn noisy_states_stay_physical(
        cfg in table1_config(),
        gamma in 0.0f64..=1.0,
        t in 0usize..12,
        damping in any::<bool>(),
    ) {
        let spec = if damping {
            NoiseSpec::amplitude_damping(gamma).unwrap()
        } else {
            NoiseSpec::depolarizing(gamma).unwrap()
        };
        let rho = noisy_evolve(&cfg, spec, t).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
        prop_assert!(rho.eigenvalues().iter().all(|&e| e > -1e-10));
    }

    #[test]
    fn text_round_trips(k in 2usize..12, text in proptest::collection::vec(any::<u8>(), 0..40)) {
        let digits = encode_message_text(&text, k).unwrap();
        prop_assert!(digits.iter().all(|&d| d < k));
        prop_assert_eq!(decode_message_text(&digits, k).unwrap(), text);
    }

    #[test]
    fn dummy_hits_form_a_distribution(n_sample in 1usize..40, frac in 0.0f64..=1.0) {
        let x = (frac * 2.0 * n_sample as f64).round() as usize;
        let d = dummy_hit_distribution(x, n_sample).unwrap();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let p = tamper_detection_probability(x, n_sample).unwrap();
        prop_assert!((p - (1.0 - d[0])).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn honest_runs_deliver_and_repeat(seed in any::<u64>(), k in proptest::sample::select(vec![3usize, 5, 8])) {
        let cfg = WalkConfig::table1(k).unwrap();
        let params = ProtocolParams::new(24, cfg, seed).unwrap();
        let digits: Vec<usize> = (0..params.capacity()).map(|i| (i * 7 + 1) % k).collect();
        let a = run_protocol(&params, &digits, None).unwrap();
        let b = run_protocol(&params, &digits, None).unwrap();
        prop_assert!(a.security_pass && a.dummy_pass == Some(true));
        prop_assert_eq!(a.message(digits.len()), Some(&digits[..]));
        prop_assert_eq!(a.to_tsv(), b.to_tsv());
    }

    #[test]
    fn zero_tampering_is_invisible(seed in any::<u64>()) {
        let params = ProtocolParams::new(40, WalkConfig::table1(5).unwrap(), seed).unwrap();
        let t = run_protocol(&params, &[], Some(&EveStrategy::TamperSubset { x: 0 })).unwrap();
        prop_assert_eq!(t.dummy_pass, Some(true));
    }
}
