use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
use slicer_core::scenario::{validate, GenerationParams, Scenario};

proptest! {
    #[test]
    fn json_round_trip_is_lossless(users in 1usize..=60, seed in 0u64..1000) {
        let s = GenerationParams::with_users(users, seed).generate().unwrap();
        prop_assert!(validate(&s).is_empty());
        let text = s.to_json();
        let back = Scenario::from_json(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn generation_is_deterministic(users in 1usize..=60, seed in 0u64..1000) {
        let p = GenerationParams::with_users(users, seed);
        prop_assert_eq!(p.generate().unwrap(), p.generate().unwrap());
        prop_assert_eq!(p.generate().unwrap().subareas.len(), users);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    let s = GenerationParams::with_users(20, 7).generate().unwrap();
    s.save(&path).unwrap();
    assert_eq!(Scenario::load(&path).unwrap(), s);
}
