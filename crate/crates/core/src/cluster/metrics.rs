use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{hungarian, ClusterError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcdMetrics {
    pub acc_all: f64,
    pub acc_known: f64,
    pub acc_novel: f64,
    /// Cluster id → class id under the shared matching.
    pub matching: BTreeMap<usize, usize>,
    pub n_all: usize,
    pub n_known: usize,
    pub n_novel: usize,
}

impl GcdMetrics {
    /// `All/Known/Novel` as percentages with one decimal.
    pub fn triple(&self) -> String {
        format!(
            "{:.1}/{:.1}/{:.1}",
            100.0 * self.acc_all,
            100.0 * self.acc_known,
            100.0 * self.acc_novel
        )
    }
}

/// Accuracy on the unlabeled samples (those not in `labeled_idx`). One
/// matching between cluster ids and classes maximizes agreement over all
/// unlabeled samples; Known and Novel are then read off under it. An empty
/// subset scores 0.
pub fn gcd_accuracy(
    pred: &[usize],
    gt: &[usize],
    known_classes: &[usize],
    labeled_idx: &[usize],
) -> Result<GcdMetrics, ClusterError> {
    if pred.len() != gt.len() {
        return Err(ClusterError::LabelCount {
            labels: gt.len(),
            points: pred.len(),
        });
    }
    let mut is_labeled = vec![false; gt.len()];
    for &i in labeled_idx {
        if i >= gt.len() {
            return Err(ClusterError::IndexOutOfRange { index: i, n: gt.len() });
        }
        is_labeled[i] = true;
    }
    let eval: Vec<usize> = (0..gt.len()).filter(|&i| !is_labeled[i]).collect();

    let mut clusters: Vec<usize> = eval.iter().map(|&i| pred[i]).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let mut classes: Vec<usize> = eval.iter().map(|&i| gt[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    let c_pos: BTreeMap<usize, usize> = clusters.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let y_pos: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut counts = vec![vec![0.0; classes.len()]; clusters.len()];
    for &i in &eval {
        counts[c_pos[&pred[i]]][y_pos[&gt[i]]] += 1.0;
    }
    let cost: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let matching: BTreeMap<usize, usize> = hungarian(&cost)
        .pairs
        .into_iter()
        .map(|(r, c)| (clusters[r], classes[c]))
        .collect();

    let known = |c: usize| known_classes.contains(&c);
    let (mut hit, mut hit_k, mut hit_n, mut n_k, mut n_n) = (0, 0, 0, 0, 0);
    for &i in &eval {
        let ok = matching.get(&pred[i]) == Some(&gt[i]);
        hit += ok as usize;
        if known(gt[i]) {
            n_k += 1;
            hit_k += ok as usize;
        } else {
            n_n += 1;
            hit_n += ok as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(GcdMetrics {
        acc_all: ratio(hit, eval.len()),
        acc_known: ratio(hit_k, n_k),
        acc_novel: ratio(hit_n, n_n),
        matching,
        n_all: eval.len(),
        n_known: n_k,
        n_novel: n_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_clustering() {
        let gt = vec![0, 0, 1, 1, 2, 2];
        let pred = vec![5, 5, 3, 3, 9, 9];
        let m = gcd_accuracy(&pred, &gt, &[0], &[0]).unwrap();
        assert_eq!((m.acc_all, m.acc_known, m.acc_novel), (1.0, 1.0, 1.0));
        assert_eq!(m.n_all, 5);
        assert_eq!(m.triple(), "100.0/100.0/100.0");
    }

    #[test]
    fn fewer_clusters_than_classes() {
        let gt = vec![0, 0, 1, 1];
        let pred = vec![0, 0, 0, 0];
        let m = gcd_accuracy(&pred, &gt, &[0], &[]).unwrap();
        assert_eq!(m.acc_all, 0.5);
        assert_eq!(m.acc_novel, 0.0);
        assert_eq!(m.acc_known, 1.0);
    }
}
