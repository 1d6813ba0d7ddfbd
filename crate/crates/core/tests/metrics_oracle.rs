mod oracles;

use oracles::{brute_force, random_pair};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use wavemat_core::metrics::{self, iou_report};
use wavemat_core::{rng, ClassId};

#[test]
fn iou_report_matches_brute_force_on_100_pairs() {
    for seed in 0..100 {
        let (p, t) = random_pair(seed);
        let rep = metrics::evaluate(&p, &t).unwrap();
        let (per, miou) = brute_force(&p, &t);
        assert_eq!(rep.per_class_iou.len(), per.len(), "seed {seed}");
        for ((c, v), (bc, bv)) in rep.per_class_iou.iter().zip(&per) {
            assert_eq!(c.0, *bc);
            assert!((v - bv).abs() <= 1e-12, "seed {seed} class {bc}");
        }
        assert!((rep.miou - miou).abs() <= 1e-12, "seed {seed}");
    }
}

#[test]
fn perfect_and_swapped_two_class() {
    let t: Vec<ClassId> = [0, 1, 1, 0, 1, 0, 0].iter().map(|&c| ClassId(c)).collect();
    assert_eq!(metrics::evaluate(&t, &t).unwrap().miou, 1.0);
    let swapped: Vec<ClassId> = t.iter().map(|c| ClassId(1 - c.0)).collect();
    assert_eq!(metrics::evaluate(&swapped, &t).unwrap().miou, 0.0);
}

#[test]
fn only_background_truth_is_an_error() {
    let t = vec![ClassId::UNKNOWN; 3];
    let p = vec![ClassId(0); 3];
    assert!(metrics::evaluate(&p, &t).is_err());
    assert!(iou_report(&metrics::ConfusionCounts::zeros(2)).is_err());
}

#[test]
fn background_prediction_is_a_miss_only() {
    let t = vec![ClassId(0), ClassId(1)];
    let p = vec![ClassId::UNKNOWN, ClassId(1)];
    let c = metrics::confusion(&p, &t).unwrap();
    assert_eq!((c.tp[0], c.fp[0], c.fn_[0]), (0, 0, 1));
    assert_eq!((c.tp[1], c.fp[1], c.fn_[1]), (1, 0, 0));
}

fn class_vec(n: usize) -> impl Strategy<Value = Vec<ClassId>> {
    prop::collection::vec(
        prop_oneof![9 => (0u16..5).prop_map(ClassId), 1 => Just(ClassId::UNKNOWN)],
        n,
    )
}

fn pair() -> impl Strategy<Value = (Vec<ClassId>, Vec<ClassId>)> {
    (1usize..80).prop_flat_map(|n| (class_vec(n), class_vec(n))).prop_map(|(p, mut t)| {
        t[0] = ClassId(0);
        (p, t)
    })
}

proptest! {
    #[test]
    fn bounds_hold((p, t) in pair()) {
        let r = metrics::evaluate(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.miou));
        for (_, v) in &r.per_class_iou {
            prop_assert!((0.0..=1.0).contains(v));
        }
        let all_right = p.iter().zip(&t).all(|(a, b)| b.is_unknown() || a == b);
        prop_assert_eq!(r.miou == 1.0, all_right);
    }

    #[test]
    fn permutation_invariant((p, t) in pair(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.shuffle(&mut rng::stream(seed, &[]));
        let pp: Vec<ClassId> = idx.iter().map(|&i| p[i]).collect();
        let tt: Vec<ClassId> = idx.iter().map(|&i| t[i]).collect();
        prop_assert_eq!(metrics::confusion(&p, &t).unwrap(), metrics::confusion(&pp, &tt).unwrap());
        prop_assert_eq!(metrics::evaluate(&p, &t).unwrap(), metrics::evaluate(&pp, &tt).unwrap());
    }

    #[test]
    fn unknown_truth_points_change_nothing((p, t) in pair(), extra in class_vec(10)) {
        let before = metrics::evaluate(&p, &t).unwrap();
        let mut p2 = p.clone();
        let mut t2 = t.clone();
        for e in extra {
            p2.push(e);
            t2.push(ClassId::UNKNOWN);
        }
        let after = metrics::evaluate(&p2, &t2).unwrap();
        prop_assert_eq!(before.miou, after.miou);
        for (c, v) in &before.per_class_iou {
            prop_assert_eq!(after.iou(*c), Some(*v));
        }
    }
}
