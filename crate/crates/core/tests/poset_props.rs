mod common;

use iamod_codesign::design::monetize;
use iamod_codesign::poset::{leq, minimal_elements, Antichain, LabeledPoint, ProductOrder, ResourceVector};
use proptest::prelude::*;

use common::{brute_force_front, sort_dedup};

fn lattice_point() -> impl Strategy<Value = ResourceVector> {
    (0u8..6, 0u8..6, 0u8..6).prop_map(|(c, t, e)| ResourceVector::new(c as f64, t as f64, e as f64))
}

fn continuous_point() -> impl Strategy<Value = ResourceVector> {
    (0.0..1e8f64, 0.0..1e4f64, 0.0..1e7f64).prop_map(|(c, t, e)| ResourceVector::new(c, t, e))
}

fn values(a: &Antichain<ResourceVector, usize>) -> Vec<ResourceVector> {
    let mut v: Vec<_> = a.iter().map(|p| p.resources).collect();
    sort_dedup(&mut v);
    v
}

fn front_of(points: &[ResourceVector]) -> Antichain<ResourceVector, usize> {
    minimal_elements(points.iter().enumerate().map(|(i, p)| LabeledPoint::new(*p, i)))
}

proptest! {
    #[test]
    fn order_is_reflexive_antisymmetric_transitive(a in lattice_point(), b in lattice_point(), c in lattice_point()) {
        prop_assert!(leq(&a, &a));
        if leq(&a, &b) && leq(&b, &a) {
            prop_assert_eq!(a, b);
        }
        if leq(&a, &b) && leq(&b, &c) {
            prop_assert!(leq(&a, &c));
        }
        prop_assert!(leq(&a, &ResourceVector::TOP));
    }

    #[test]
    fn front_matches_pairwise_oracle(points in prop::collection::vec(lattice_point(), 0..80)) {
        let front = front_of(&points);
        prop_assert!(front.is_antichain());
        prop_assert_eq!(values(&front), brute_force_front(&points));
        prop_assert_eq!(front.len(), brute_force_front(&points).len());
    }

    #[test]
    fn every_point_is_covered_by_the_front(points in prop::collection::vec(continuous_point(), 1..60)) {
        let front = front_of(&points);
        for p in &points {
            prop_assert!(front.dominates_point(p));
        }
    }

    #[test]
    fn front_is_idempotent(points in prop::collection::vec(lattice_point(), 0..60)) {
        let once = front_of(&points);
        let twice = minimal_elements(once.iter().cloned());
        prop_assert_eq!(values(&once), values(&twice));
    }

    #[test]
    fn front_ignores_insertion_order(points in prop::collection::vec(lattice_point(), 0..60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = points.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(values(&front_of(&points)), values(&front_of(&shuffled)));
    }

    #[test]
    fn merge_equals_front_of_union(a in prop::collection::vec(lattice_point(), 0..40), b in prop::collection::vec(lattice_point(), 0..40)) {
        let merged = front_of(&a).merge(front_of(&b));
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(values(&merged), brute_force_front(&union));
    }

    #[test]
    fn monetize_preserves_order(a in continuous_point(), b in continuous_point(), rate in 0.0..100.0f64) {
        let (ma, mb) = (monetize(&a, rate), monetize(&b, rate));
        if a.leq(&b) {
            prop_assert!(ma.leq(&mb));
        }
        let lo = ResourceVector::new(a.cost.min(b.cost), a.time.min(b.time), a.emissions.min(b.emissions));
        prop_assert!(monetize(&lo, rate).leq(&ma));
    }
}

#[test]
fn top_is_never_on_the_front() {
    let front = front_of(&[ResourceVector::TOP, ResourceVector::new(1.0, 1.0, 1.0), ResourceVector::TOP]);
    assert_eq!(values(&front), vec![ResourceVector::new(1.0, 1.0, 1.0)]);
    assert!(front_of(&[ResourceVector::TOP]).is_empty());
}
