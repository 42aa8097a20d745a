use cdqn_core::agent::{BinningRule, ReplayBuffer, Transition};
use cdqn_core::nn::{read_params, write_params, NetworkParams};
use cdqn_core::rng;
use cdqn_core::scm::{exact_peace, ScmSpec};
use cdqn_core::{peace_from_samples, ObservationTriple};
use proptest::prelude::*;

fn triples() -> impl Strategy<Value = Vec<ObservationTriple>> {
    prop::collection::vec(
        (0i64..3, 0u64..4, -50.0f64..50.0).prop_map(|(x, z, y)| ObservationTriple::new(x, z, y)),
        1..64,
    )
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #[test]
    fn estimate_is_nonnegative_and_finite(samples in triples()) {
        let est = peace_from_samples(&samples).unwrap();
        prop_assert!(est.peace >= 0.0 && est.peace.is_finite());
        let weights: f64 = est.stratum_weight.values().sum();
        prop_assert!((weights - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scales_with_absolute_outcome_scale(samples in triples(), c in -5.0f64..5.0) {
        let scaled: Vec<_> = samples.iter().map(|s| ObservationTriple::new(s.x, s.z, c * s.y)).collect();
        let a = peace_from_samples(&samples).unwrap().peace;
        let b = peace_from_samples(&scaled).unwrap().peace;
        prop_assert!(close(b, c.abs() * a, a * 5.0), "{b} vs {}", c.abs() * a);
    }

    #[test]
    fn invariant_to_outcome_shift(samples in triples(), shift in -100.0f64..100.0) {
        let shifted: Vec<_> = samples.iter().map(|s| ObservationTriple::new(s.x, s.z, s.y + shift)).collect();
        let a = peace_from_samples(&samples).unwrap().peace;
        let b = peace_from_samples(&shifted).unwrap().peace;
        prop_assert!(close(a, b, 200.0), "{a} vs {b}");
    }

    #[test]
    fn invariant_to_sample_order(samples in triples(), seed in any::<u64>()) {
        let mut shuffled = samples.clone();
        let mut r = rng::seeded(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng::below(&mut r, i + 1));
        }
        let a = peace_from_samples(&samples).unwrap().peace;
        let b = peace_from_samples(&shuffled).unwrap().peace;
        prop_assert!(close(a, b, a), "{a} vs {b}");
    }

    #[test]
    fn relabelling_strata_changes_nothing(samples in triples()) {
        let relabelled: Vec<_> = samples.iter().map(|s| ObservationTriple::new(s.x, 1000 + 7 * s.z, s.y)).collect();
        prop_assert_eq!(
            peace_from_samples(&samples).unwrap().peace.to_bits(),
            peace_from_samples(&relabelled).unwrap().peace.to_bits()
        );
    }

    #[test]
    fn constant_outcome_has_no_effect(samples in triples(), y in -10.0f64..10.0) {
        let flat: Vec<_> = samples.iter().map(|s| ObservationTriple::new(s.x, s.z, y)).collect();
        prop_assert_eq!(peace_from_samples(&flat).unwrap().peace, 0.0);
    }

    #[test]
    fn params_round_trip_bit_exact(seed in any::<u64>(), hidden in 1usize..12) {
        let net = NetworkParams::init(&[4, hidden, 2], seed).unwrap();
        let mut bytes = Vec::new();
        write_params(&net, &mut bytes).unwrap();
        let back = read_params(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn sign_binning_keys_stay_in_range(state in prop::array::uniform4(-5.0f64..5.0)) {
        let rule = BinningRule::sign(4);
        prop_assert!(rule.key(&state) < rule.n_strata());
    }

    #[test]
    fn replay_keeps_most_recent(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buf.push(Transition::new([i as f64; 4], 0, 1.0, [0.0; 4], false));
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
        let oldest = pushes.saturating_sub(capacity);
        for k in 0..buf.len() {
            prop_assert_eq!(buf.get(k).unwrap().state[0], (oldest + k) as f64);
        }
    }
}

#[test]
fn model_description_round_trips_through_text() {
    let spec = ScmSpec::random(7, 3, 3, 0.5);
    let text = spec.to_kv().to_string();
    let parsed = ScmSpec::from_kv(&cdqn_core::kv::KvDoc::parse(&text, "model").unwrap()).unwrap();
    assert_eq!(parsed, spec);
    assert_eq!(exact_peace(&parsed).unwrap(), exact_peace(&spec).unwrap());
}
