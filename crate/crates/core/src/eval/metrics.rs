use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;

/// Mann-Whitney AUC: (concordant pairs + ½ tied pairs) / (positives × negatives).
///
/// Computed from mid-ranks in O(n log n).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUC or `None` when the labels are single-class.
pub fn auc_opt(scores: &[f64], labels: &[u8]) -> Option<f64> {
    auc(scores, labels).ok()
}

/// Label-independent baseline: each score is 1 with probability equal to the
/// training positive rate, else 0. Test labels are deliberately not an input.
pub fn stratified_dummy(train_labels: &[u8], test_size: usize, seed: u64) -> Vec<f64> {
    if train_labels.is_empty() {
        return vec![0.0; test_size];
    }
    let rate = train_labels.iter().filter(|&&y| y == 1).count() as f64 / train_labels.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..test_size).map(|_| if rng.random::<f64>() < rate { 1.0 } else { 0.0 }).collect()
}

/// Median of the values; mean of the middle pair for even counts.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// SplitMix64 step, used to derive independent sub-seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a of a string.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_case() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn extremes_and_ties() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        // one tied cross pair out of four
        assert_eq!(auc(&[0.1, 0.5, 0.5, 0.9], &[0, 0, 1, 1]).unwrap(), 0.875);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass)));
        assert!(auc_opt(&[0.1, 0.2], &[0, 0]).is_none());
        assert!(auc(&[0.1], &[0, 1]).is_err());
    }

    #[test]
    fn dummy_respects_prior() {
        assert_eq!(stratified_dummy(&[0, 0, 0], 5, 1), vec![0.0; 5]);
        assert_eq!(stratified_dummy(&[1, 1], 5, 1), vec![1.0; 5]);
        let s = stratified_dummy(&[0, 1], 10_000, 3);
        let rate = s.iter().sum::<f64>() / 10_000.0;
        assert!((rate - 0.5).abs() < 0.03);
        assert_eq!(s, stratified_dummy(&[0, 1], 10_000, 3));
        assert_ne!(s, stratified_dummy(&[0, 1], 10_000, 4));
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(Vec::<f64>::new()), None);
        assert_eq!(mean([1.0, 2.0]), Some(1.5));
    }
}
