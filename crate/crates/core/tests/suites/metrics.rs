use crate::common::{brute_composite, brute_point, brute_range, brute_topk, runs};
use prescient::metrics::{events_from_labels, f1_at_k, f1_composite, f1_point, f1_range, lead_time, Event};
use prescient::scoring::{log_stabilize, Alignment, ScoreSeries};

fn bits(code: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((code >> i) & 1) as u8).collect()
}

/// Every `(flags, labels)` pair of each length up to 8.
fn all_pairs(mut f: impl FnMut(&[u8], &[u8])) -> usize {
    let mut count = 0;
    for n in 0..=8usize {
        for fc in 0..1u32 << n {
            for lc in 0..1u32 << n {
                f(&bits(fc, n), &bits(lc, n));
                count += 1;
            }
        }
    }
    count
}

pub fn point_f1_matches_brute_force_exhaustively() {
    let n = all_pairs(|flags, labels| {
        let got = f1_point(flags, labels).unwrap();
        assert_eq!((got.precision, got.recall, got.f1), brute_point(flags, labels), "{flags:?} {labels:?}");
        assert_eq!(got.tp + got.fp, flags.iter().filter(|&&f| f == 1).count());
    });
    assert_eq!(n, (0..=8).map(|k| 1usize << (2 * k)).sum::<usize>());
}

pub fn composite_f1_matches_brute_force_exhaustively() {
    all_pairs(|flags, labels| {
        let got = f1_composite(flags, labels).unwrap();
        assert_eq!(got.f1, brute_composite(flags, labels), "{flags:?} {labels:?}");
        assert_eq!(got.events, runs(labels).len());
    });
}

pub fn range_f1_matches_brute_force_exhaustively() {
    all_pairs(|flags, labels| {
        let got = f1_range(flags, labels).unwrap();
        assert_eq!((got.precision, got.recall, got.f1), brute_range(flags, labels), "{flags:?} {labels:?}");
    });
}

/// Scores derived from the flag pattern, with ties.
fn scores_for(flags: &[u8]) -> Vec<f64> {
    flags.iter().enumerate().map(|(i, &f)| 2.0 * f as f64 + ((i * 7) % 3) as f64 * 0.25).collect()
}

pub fn f1_at_k_matches_brute_force_exhaustively() {
    all_pairs(|flags, labels| {
        let scores = scores_for(flags);
        let k = labels.iter().filter(|&&l| l == 1).count();
        let want = brute_point(&brute_topk(&scores, k), labels).2;
        assert_eq!(f1_at_k(&scores, labels).unwrap(), want, "{scores:?} {labels:?}");
        let logged =
            log_stabilize(&ScoreSeries { scores: scores.clone(), alignment: Alignment::ForecastTarget, first: 0 })
                .unwrap();
        assert_eq!(f1_at_k(&logged.scores, labels).unwrap(), want);
    });
}

pub fn events_are_maximal_runs() {
    for n in 0..=10usize {
        for code in 0..1u32 << n {
            let labels = bits(code, n);
            let got: Vec<(usize, usize)> = events_from_labels(&labels).iter().map(|e| (e.start, e.end + 1)).collect();
            assert_eq!(got, runs(&labels));
        }
    }
}

pub fn mismatched_lengths_are_rejected() {
    assert!(f1_point(&[1, 0], &[1]).is_err());
    assert!(f1_composite(&[1], &[1, 0]).is_err());
    assert!(f1_range(&[1, 0, 0], &[1]).is_err());
    assert!(f1_at_k(&[0.5], &[1, 0]).is_err());
}

pub fn lead_time_counts_early_flags() {
    let events = [Event::new(10, 15), Event::new(40, 45), Event::new(80, 82)];
    let stats = lead_time(&[3, 7, 12, 44, 95], &events, 5);
    assert_eq!(stats.leads, vec![3, -4]);
    assert_eq!((stats.detected, stats.missed), (2, 1));
    assert_eq!(stats.mean(), Some(-0.5));
}
