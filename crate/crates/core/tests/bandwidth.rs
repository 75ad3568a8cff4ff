use edgesim::network::{max_min_allocate, progressive_filling, NetworkFlow};
use edgesim::infrastructure::{Endpoint, TopologyLink};
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i64>;

/// Link capacities and flow paths; every path is a nonempty set of link ids.
fn instance() -> impl Strategy<Value = (Vec<i64>, Vec<Vec<usize>>)> {
    prop::collection::vec(1i64..=20, 1..=5).prop_flat_map(|caps| {
        let n = caps.len();
        let path = prop::collection::btree_set(0..n, 1..=n).prop_map(|s| s.into_iter().collect::<Vec<_>>());
        (Just(caps), prop::collection::vec(path, 1..=6))
    })
}

fn load(paths: &[Vec<usize>], rate: &[Q], link: usize, skip: Option<usize>) -> Q {
    paths
        .iter()
        .enumerate()
        .filter(|&(f, p)| Some(f) != skip && p.contains(&link))
        .map(|(f, _)| rate[f])
        .sum()
}

/// Can flow `f` grow while every flow whose share is at most `f`'s keeps its
/// share? The most room `f` can get is with every larger flow dropped to zero,
/// so it is enough to test that single perturbation.
fn can_grow(paths: &[Vec<usize>], caps: &[Q], rate: &[Q], f: usize) -> bool {
    paths[f].iter().all(|&l| {
        let protected: Q = paths
            .iter()
            .enumerate()
            .filter(|&(g, p)| g != f && rate[g] <= rate[f] && p.contains(&l))
            .map(|(g, _)| rate[g])
            .sum();
        caps[l] - protected > rate[f]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_allocation_is_feasible_and_max_min_fair((caps, paths) in instance()) {
        let caps: Vec<Q> = caps.into_iter().map(Q::from_integer).collect();
        let rate = progressive_filling(&paths, &caps).unwrap();
        for (l, &c) in caps.iter().enumerate() {
            prop_assert!(load(&paths, &rate, l, None) <= c, "link {l} overloaded");
        }
        for f in 0..paths.len() {
            prop_assert!(rate[f] > Q::from_integer(0), "flow {f} starved");
            prop_assert!(!can_grow(&paths, &caps, &rate, f), "flow {f} could grow: {rate:?}");
            // Bottleneck characterization: some saturated link on the path
            // where f has the largest share.
            let bottleneck = paths[f].iter().any(|&l| {
                load(&paths, &rate, l, None) == caps[l]
                    && paths.iter().enumerate().all(|(g, p)| !p.contains(&l) || rate[g] <= rate[f])
            });
            prop_assert!(bottleneck, "flow {f} has no bottleneck");
        }
    }

    #[test]
    fn float_allocation_tracks_the_exact_one((caps, paths) in instance()) {
        let exact = progressive_filling(&paths, &caps.iter().map(|&c| Q::from_integer(c)).collect::<Vec<_>>()).unwrap();
        let links: Vec<TopologyLink> = caps
            .iter()
            .enumerate()
            .map(|(id, &c)| TopologyLink { id, a: Endpoint::Switch(0), b: Endpoint::BaseStation(id), bandwidth: c as f64 })
            .collect();
        let flows: Vec<NetworkFlow> = paths
            .iter()
            .enumerate()
            .map(|(id, p)| NetworkFlow::new(id, id, 0, 1, p.clone(), 100.0))
            .collect();
        let approx = max_min_allocate(&flows, &links).unwrap();
        for (a, e) in approx.iter().zip(&exact) {
            let e = *e.numer() as f64 / *e.denom() as f64;
            prop_assert!((a - e).abs() <= 1e-9 * e.max(1.0), "{a} vs {e}");
        }
    }
}

#[test]
fn shared_link_with_a_tighter_side_link() {
    let caps = [Q::from_integer(10), Q::from_integer(2)];
    let rate = progressive_filling(&[vec![0, 1], vec![0], vec![0]], &caps).unwrap();
    assert_eq!(rate, vec![Q::from_integer(2), Q::from_integer(4), Q::from_integer(4)]);
}

#[test]
fn odd_splits_stay_exact() {
    let caps = [Q::from_integer(7)];
    let rate = progressive_filling(&[vec![0], vec![0], vec![0]], &caps).unwrap();
    assert_eq!(rate, vec![Q::new(7, 3); 3]);
    assert_eq!(rate.iter().sum::<Q>(), caps[0]);
}

#[test]
fn empty_paths_get_nothing_and_do_not_consume_capacity() {
    let caps = [Q::from_integer(6)];
    let rate = progressive_filling(&[vec![], vec![0], vec![0]], &caps).unwrap();
    assert_eq!(rate, vec![Q::from_integer(0), Q::from_integer(3), Q::from_integer(3)]);
}
