mod oracles;

use ppgstress::eval::{accuracy, auc, confusion, pr_curve};
use proptest::prelude::*;

#[test]
fn auc_exhaustive_small_sets() {
    for n in 2..=8u32 {
        for code in 0..3usize.pow(n) {
            let scores: Vec<f64> = (0..n).map(|i| ((code / 3usize.pow(i)) % 3) as f64).collect();
            for mask in 1..(1u32 << n) - 1 {
                let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
                assert_eq!(auc(&scores, &labels).unwrap(), oracles::auc_pairs(&scores, &labels));
            }
        }
    }
}

#[test]
fn pr_exhaustive_small_sets() {
    for n in 1..=6u32 {
        for code in 0..3usize.pow(n) {
            let scores: Vec<f64> = (0..n).map(|i| ((code / 3usize.pow(i)) % 3) as f64 * 0.5).collect();
            for mask in 1..(1u32 << n) {
                let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
                let pts = pr_curve(&scores, &labels).unwrap();
                let mut uniq = scores.clone();
                uniq.sort_by(f64::total_cmp);
                uniq.dedup();
                assert_eq!(pts.len(), uniq.len() + 1);
                for (p, &t) in pts.iter().zip(uniq.iter().chain([&(uniq[uniq.len() - 1] + 1.0)])) {
                    assert_eq!(p.threshold, t);
                    assert_eq!((p.precision, p.recall), oracles::pr_at(&scores, &labels, t));
                }
            }
        }
    }
}

fn dataset() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(0usize..2, n),
        )
    })
}

proptest! {
    #[test]
    fn auc_flip_complements((scores, labels) in dataset()) {
        let p = labels.iter().filter(|&&l| l == 1).count();
        prop_assume!(p > 0 && p < labels.len());
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
        let flipped: Vec<usize> = labels.iter().map(|l| 1 - l).collect();
        let s = auc(&scores, &labels).unwrap() + auc(&scores, &flipped).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_monotone_invariant((scores, labels) in dataset()) {
        let p = labels.iter().filter(|&&l| l == 1).count();
        prop_assume!(p > 0 && p < labels.len());
        let warped: Vec<f64> = scores.iter().map(|s| (s / 3.0).exp() * 2.0 - 7.0).collect();
        prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&warped, &labels).unwrap());
    }

    #[test]
    fn pr_recall_non_increasing((scores, labels) in dataset()) {
        prop_assume!(labels.contains(&1));
        let pts = pr_curve(&scores, &labels).unwrap();
        prop_assert_eq!(pts[0].recall, 1.0);
        prop_assert!(pts.windows(2).all(|w| w[0].recall >= w[1].recall && w[0].threshold < w[1].threshold));
    }

    #[test]
    fn accuracy_is_confusion_trace(pairs in proptest::collection::vec((0usize..2, 0usize..2), 1..50)) {
        let (p, l): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = confusion(&p, &l).unwrap();
        prop_assert_eq!(m.iter().flatten().sum::<u64>() as usize, l.len());
        prop_assert_eq!((m[0][0] + m[1][1]) as f64 / l.len() as f64, accuracy(&p, &l).unwrap());
    }
}
