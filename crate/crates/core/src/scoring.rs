//! AUC and rank-weighted score.

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Evaluation of one ranking against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub auc: f64,
    pub rws: f64,
    pub n_outliers: usize,
}

/// Probability that a random outlier scores above a random inlier, ties
/// counting one half.
///
/// Computed by sorting once and counting, per tie group, how many inliers
/// lie strictly below; the result is the exact ratio of two integers.
pub fn auc(scores: &[f64], labels: &LabelVector) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_out = labels.n_outliers() as u128;
    let n_in = labels.n_inliers() as u128;
    if n_out == 0 || n_in == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the Mann-Whitney U statistic
    let mut twice_u: u128 = 0;
    let mut inliers_below: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut out_here, mut in_here) = (0u128, 0u128);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels.is_outlier(idx[j]) {
                out_here += 1;
            } else {
                in_here += 1;
            }
            j += 1;
        }
        twice_u += out_here * (2 * inliers_below + in_here);
        inliers_below += in_here;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_out * n_in) as f64)
}

/// Weighted fraction of outliers among the top `N` ranks (`N` = number of
/// outliers), weight `N + 1 − i` at rank `i`, normalized so that a perfect
/// ranking scores 1.
///
/// `order` lists sample indices from most to least anomalous.
pub fn rws(order: &[usize], labels: &LabelVector) -> Result<f64> {
    if order.len() != labels.len() {
        return Err(Error::LengthMismatch(order.len(), labels.len()));
    }
    let n = labels.n_outliers();
    if n == 0 {
        return Err(Error::DegenerateLabels);
    }
    let hit: usize = order
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, &s)| labels.is_outlier(s))
        .map(|(i, _)| n - i)
        .sum();
    Ok(hit as f64 / (n * (n + 1) / 2) as f64)
}

/// Indices sorted by descending score, ties by ascending index.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn evaluate(scores: &[f64], labels: &LabelVector) -> Result<ScoreReport> {
    Ok(ScoreReport {
        auc: auc(scores, labels)?,
        rws: rws(&descending_order(scores), labels)?,
        n_outliers: labels.n_outliers(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(flags: &[bool]) -> LabelVector {
        LabelVector::from_flags(flags)
    }

    #[test]
    fn auc_examples() {
        let l = labels(&[true, false, true, false]);
        // pairs (0.9>0.8), (0.9>0.1), (0.7<0.8), (0.7>0.1)
        assert_eq!(auc(&[0.9, 0.8, 0.7, 0.1], &l).unwrap(), 0.75);
        assert_eq!(auc(&[1.0, 0.0, 2.0, -1.0], &l).unwrap(), 1.0);
        assert_eq!(auc(&[3.0; 4], &l).unwrap(), 0.5);
        assert!(matches!(
            auc(&[1.0, 2.0], &labels(&[false, false])),
            Err(Error::DegenerateLabels)
        ));
        assert!(matches!(auc(&[1.0], &l), Err(Error::LengthMismatch(1, 4))));
    }

    #[test]
    fn rws_examples() {
        let l = labels(&[true, false, true, false]);
        assert_eq!(rws(&[0, 2, 1, 3], &l).unwrap(), 1.0);
        assert_eq!(rws(&[1, 3, 0, 2], &l).unwrap(), 0.0);
        assert_eq!(rws(&[0, 1, 2, 3], &l).unwrap(), 2.0 / 3.0);
        assert!(matches!(
            rws(&[0, 1], &labels(&[false, false])),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn order_breaks_ties_by_index() {
        assert_eq!(descending_order(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
    }
}
