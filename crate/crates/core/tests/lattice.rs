use nslab_core::lattice::{ball, is_generating, reachable_modes, GenerationFailure, DEFAULT_MAX_SHELLS};
use nslab_core::ForcingGeometry;
use proptest::prelude::*;

fn symmetric(modes: &[(i32, i32)]) -> ForcingGeometry {
    let pairs: Vec<[i32; 2]> = modes.iter().flat_map(|&(a, b)| [[a, b], [-a, -b]]).collect();
    ForcingGeometry::from_pairs(&pairs).unwrap()
}

#[test]
fn four_mode_forcing_reaches_ball_of_radius_ten() {
    let g = ForcingGeometry::four_mode();
    assert!(is_generating(&g).generating);
    let r = reachable_modes(&g, 10.0, DEFAULT_MAX_SHELLS).unwrap();
    assert!(r.covers_ball(10.0));
    assert_eq!(r.reached.len(), ball(10.0).len());
    for (m, path) in &r.witness_paths {
        assert_eq!(path.last().unwrap().to, *m);
        assert!(path.iter().all(|s| s.is_valid()));
    }
}

#[test]
fn axis_forcing_is_stuck() {
    let g = symmetric(&[(1, 0), (0, 1)]);
    let r = reachable_modes(&g, 6.0, DEFAULT_MAX_SHELLS).unwrap();
    assert!(r.shells[0].is_empty());
    assert!(r.saturated);
    let v = is_generating(&g);
    assert!(!v.generating);
    assert_eq!(v.failures, vec![GenerationFailure::EqualNorms]);
}

fn small_mode() -> impl Strategy<Value = (i32, i32)> {
    (-3i32..=3, -3i32..=3).prop_filter("nonzero, |k| ≤ 3", |&(a, b)| (a, b) != (0, 0) && a * a + b * b <= 9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn criterion_agrees_with_reachability(modes in prop::collection::vec(small_mode(), 1..=4)) {
        let g = symmetric(&modes);
        let verdict = is_generating(&g).generating;
        // Searched in a wider window: brackets leaving the window are
        // dropped, which can strand modes on its boundary.
        let reach = reachable_modes(&g, 16.0, DEFAULT_MAX_SHELLS).unwrap();
        prop_assert_eq!(verdict, reach.covers_ball(8.0));
        prop_assert!(reach.saturated || reach.covers_ball(16.0));
    }
}
