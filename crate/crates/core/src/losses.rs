//! Contrastive, length, binary-constraint and categorization losses, and
//! their weighted combination.
//!
//! Contrastive scores are negative Euclidean distances over a temperature:
//! `s_ij = −‖a_i − c_j‖ / τ`. With targets `t_i` (a distribution over
//! candidates) every contrastive row costs `logΣ_j exp(s_ij) − Σ_j t_ij s_ij`,
//! which is non-negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{DiffError, Graph, Tensor, Var};

/// Additive bias that removes a candidate column from a softmax.
const EXCLUDED: f64 = -1e9;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("contrastive batch needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} is unlabeled; the categorization loss takes labeled samples only")]
    UnlabeledSample(usize),
    #[error("label {label} of sample {sample} is outside the {classes} known classes")]
    LabelOutOfRange {
        sample: usize,
        label: usize,
        classes: usize,
    },
    #[error("loss term {0} is not finite")]
    NonFinite(&'static str),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Graph(#[from] DiffError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Feature contrast.
    pub alpha: f64,
    /// Code contrast.
    pub beta: f64,
    /// Code length.
    pub delta: f64,
    /// Categorization (called "code mapping" in some write-ups).
    pub gamma: f64,
    /// Code binary constraint.
    pub zeta: f64,
    /// Mask binary constraint.
    pub mu: f64,
    /// Supervised share of the feature contrast.
    pub lambda_in: f64,
    /// Supervised share of the code contrast.
    pub lambda_code: f64,
    /// Norm order of the length loss.
    pub p: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Label smoothing for contrastive targets.
    pub smoothing: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 1.0,
            delta: 0.1,
            gamma: 0.01,
            zeta: 0.01,
            mu: 0.01,
            lambda_in: 0.35,
            lambda_code: 0.35,
            p: 1.0,
            tau: 0.1,
            smoothing: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let coeffs = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("zeta", self.zeta),
            ("mu", self.mu),
        ];
        for (n, v) in coeffs {
            if !v.is_finite() || v < 0.0 {
                return Err(LossError::InvalidWeights(format!("{n} = {v}")));
            }
        }
        for (n, v) in [
            ("lambda_in", self.lambda_in),
            ("lambda_code", self.lambda_code),
            ("smoothing", self.smoothing),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(LossError::InvalidWeights(format!("{n} = {v} outside [0, 1]")));
            }
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(LossError::InvalidWeights(format!("p = {}", self.p)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(LossError::InvalidWeights(format!("tau = {}", self.tau)));
        }
        Ok(())
    }
}

fn contrastive_rows(
    g: &mut Graph,
    anchors: Var,
    candidates: Var,
    targets: Tensor,
    col_bias: Option<Tensor>,
    row_weights: Tensor,
    tau: f64,
) -> Result<Var, LossError> {
    let d = g.pairwise_dist(anchors, candidates)?;
    let mut s = g.scale(d, -1.0 / tau);
    if let Some(bias) = col_bias {
        let b = g.constant(bias);
        s = g.add(s, b)?;
    }
    let lse = g.log_sum_exp_rows(s);
    let t = g.constant(targets);
    let st = g.mul(s, t)?;
    let pos = g.sum_rows(st);
    let per_row = g.sub(lse, pos)?;
    let w = g.constant(row_weights);
    let weighted = g.mul(per_row, w)?;
    Ok(g.sum(weighted))
}

/// InfoNCE between paired views: anchor `i` of `view1` must pick candidate
/// `i` of `view2` among all `B` candidates. Smoothing moves `smoothing` of
/// the target mass to a uniform distribution.
pub fn info_nce_unsup(
    g: &mut Graph,
    view1: Var,
    view2: Var,
    tau: f64,
    smoothing: f64,
) -> Result<Var, LossError> {
    let b = g.shape(view1).0;
    if b < 2 {
        return Err(LossError::TooFewSamples(b));
    }
    if g.shape(view2) != g.shape(view1) {
        let (r, c) = g.shape(view2);
        return Err(DiffError::Shape(format!(
            "views are {}x{} and {r}x{c}",
            b,
            g.shape(view1).1
        ))
        .into());
    }
    let u = smoothing / b as f64;
    let targets = Tensor::from_fn(b, b, |i, j| if i == j { 1.0 - smoothing + u } else { u });
    let weights = Tensor::filled(b, 1, 1.0 / b as f64);
    contrastive_rows(g, view1, view2, targets, None, weights, tau)
}

/// Supervised contrastive term and how many anchors contributed.
#[derive(Clone, Copy, Debug)]
pub struct SupTerm {
    pub value: Var,
    /// Anchors whose label has at least two members among the candidates.
    /// Zero means the term is vacuous and `value` is the constant 0.
    pub active_anchors: usize,
}

impl SupTerm {
    pub fn is_vacuous(&self) -> bool {
        self.active_anchors == 0
    }
}

/// Supervised contrast: the positives of anchor `i` are all candidates with
/// its label (candidate `i` included). Rows or columns with label `None`
/// take no part. Passing the same embeddings as anchors and candidates gives
/// the single-set form.
pub fn info_nce_sup(
    g: &mut Graph,
    anchors: Var,
    candidates: Var,
    labels: &[Option<usize>],
    tau: f64,
    smoothing: f64,
) -> Result<SupTerm, LossError> {
    let b = g.shape(anchors).0;
    if g.shape(candidates).0 != b || labels.len() != b {
        return Err(DiffError::Shape(format!(
            "{b} anchors, {} candidates, {} labels",
            g.shape(candidates).0,
            labels.len()
        ))
        .into());
    }
    let n_valid = labels.iter().filter(|l| l.is_some()).count();
    let positives: Vec<usize> = labels
        .iter()
        .map(|li| match li {
            Some(_) => labels.iter().filter(|lj| *lj == li).count(),
            None => 0,
        })
        .collect();
    let active: Vec<bool> = positives.iter().map(|&p| p >= 2).collect();
    let n_active = active.iter().filter(|&&a| a).count();
    if n_active == 0 {
        let zero = g.constant(Tensor::scalar(0.0));
        return Ok(SupTerm {
            value: zero,
            active_anchors: 0,
        });
    }
    let u = smoothing / n_valid as f64;
    let targets = Tensor::from_fn(b, b, |i, j| match (labels[i], labels[j]) {
        (Some(a), Some(c)) if active[i] => {
            let pos = if a == c { (1.0 - smoothing) / positives[i] as f64 } else { 0.0 };
            pos + u
        }
        _ => 0.0,
    });
    let bias = if n_valid < b {
        Some(Tensor::from_fn(b, b, |_, j| {
            if labels[j].is_some() {
                0.0
            } else {
                EXCLUDED
            }
        }))
    } else {
        None
    };
    let weights = Tensor::from_fn(b, 1, |i, _| if active[i] { 1.0 / n_active as f64 } else { 0.0 });
    let value = contrastive_rows(g, anchors, candidates, targets, bias, weights, tau)?;
    Ok(SupTerm {
        value,
        active_anchors: n_active,
    })
}

/// A mixed contrastive loss `(1 − λ)·u + λ·s` with its constituents.
#[derive(Clone, Copy, Debug)]
pub struct MixedTerm {
    pub total: Var,
    pub unsup: Var,
    pub sup: SupTerm,
}

fn mix(g: &mut Graph, u: Var, s: SupTerm, lambda: f64) -> Result<MixedTerm, LossError> {
    let a = g.scale(u, 1.0 - lambda);
    let b = g.scale(s.value, lambda);
    let total = g.add(a, b)?;
    Ok(MixedTerm {
        total,
        unsup: u,
        sup: s,
    })
}

/// Feature-level contrast. `labels` is `Some(class)` for labeled samples;
/// the supervised part runs over those only.
pub fn loss_c_in(
    g: &mut Graph,
    feat_v1: Var,
    feat_v2: Var,
    labels: &[Option<usize>],
    w: &LossWeights,
) -> Result<MixedTerm, LossError> {
    let u = info_nce_unsup(g, feat_v1, feat_v2, w.tau, w.smoothing)?;
    let s = info_nce_sup(g, feat_v1, feat_v2, labels, w.tau, w.smoothing)?;
    mix(g, u, s, w.lambda_in)
}

/// Code-level contrast: unsupervised on raw bit vectors of the two views,
/// supervised on truncated positional codes with true labels for labeled
/// samples and pseudo-labels elsewhere.
pub fn loss_c_code(
    g: &mut Graph,
    bits_v1: Var,
    bits_v2: Var,
    codes_v1: Var,
    codes_v2: Var,
    labels_and_pseudo: &[usize],
    w: &LossWeights,
) -> Result<MixedTerm, LossError> {
    let u = info_nce_unsup(g, bits_v1, bits_v2, w.tau, w.smoothing)?;
    let labels: Vec<Option<usize>> = labels_and_pseudo.iter().copied().map(Some).collect();
    let s = info_nce_sup(g, codes_v1, codes_v2, &labels, w.tau, w.smoothing)?;
    mix(g, u, s, w.lambda_code)
}

/// Batch mean of `‖m̄‖_p` over rows of already weighted masks.
pub fn loss_length(g: &mut Graph, weighted_masks: Var, p: f64) -> Var {
    let row_norms = if p == 1.0 {
        g.sum_rows(weighted_masks)
    } else {
        let powered = g.pow(weighted_masks, p);
        let s = g.sum_rows(powered);
        g.pow(s, 1.0 / p)
    };
    g.mean(row_norms)
}

/// `Σ v²(1 − v)²` over every entry; zero exactly on binary inputs.
pub fn loss_binary_cond(g: &mut Graph, values: Var) -> Result<Var, LossError> {
    let complement = g.scale_shift(values, -1.0, 1.0);
    let prod = g.mul(values, complement)?;
    let sq = g.pow(prod, 2.0);
    Ok(g.sum(sq))
}

/// Code constraint on bit-space code values.
pub fn loss_code_cond(g: &mut Graph, bits: Var) -> Result<Var, LossError> {
    loss_binary_cond(g, bits)
}

/// Mask constraint on soft mask values.
pub fn loss_mask_cond(g: &mut Graph, soft_mask: Var) -> Result<Var, LossError> {
    loss_binary_cond(g, soft_mask)
}

fn cross_entropy(
    g: &mut Graph,
    logits: Var,
    labels: &[Option<usize>],
) -> Result<Option<Var>, LossError> {
    let (b, classes) = g.shape(logits);
    if labels.len() != b {
        return Err(DiffError::Shape(format!("{b} logit rows, {} labels", labels.len())).into());
    }
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            if l >= classes {
                return Err(LossError::LabelOutOfRange {
                    sample: i,
                    label: l,
                    classes,
                });
            }
        }
    }
    let n = labels.iter().filter(|l| l.is_some()).count();
    if n == 0 {
        return Ok(None);
    }
    let onehot = Tensor::from_fn(b, classes, |i, j| if labels[i] == Some(j) { 1.0 } else { 0.0 });
    let weights = Tensor::from_fn(b, 1, |i, _| if labels[i].is_some() { 1.0 / n as f64 } else { 0.0 });
    let lse = g.log_sum_exp_rows(logits);
    let oh = g.constant(onehot);
    let picked = g.mul(logits, oh)?;
    let target = g.sum_rows(picked);
    let per_row = g.sub(lse, target)?;
    let w = g.constant(weights);
    let weighted = g.mul(per_row, w)?;
    Ok(Some(g.sum(weighted)))
}

/// Mean cross-entropy of known-class logits against labels. Every row must
/// be labeled.
pub fn loss_cat(g: &mut Graph, logits: Var, labels: &[Option<usize>]) -> Result<Var, LossError> {
    if let Some(i) = labels.iter().position(Option::is_none) {
        return Err(LossError::UnlabeledSample(i));
    }
    Ok(cross_entropy(g, logits, labels)?.expect("labels are non-empty"))
}

/// Cross-entropy averaged over the labeled rows of a mixed batch; `None`
/// when the batch has no labeled row.
pub fn loss_cat_labeled_rows(
    g: &mut Graph,
    logits: Var,
    labels: &[Option<usize>],
) -> Result<Option<Var>, LossError> {
    cross_entropy(g, logits, labels)
}

/// Scalar values of each loss term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub c_in_u: f64,
    pub c_in_s: f64,
    pub c_code_u: f64,
    pub c_code_s: f64,
    pub length: f64,
    pub cat: f64,
    pub code_cond: f64,
    pub mask_cond: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub c_in_u: f64,
    pub c_in_s: f64,
    pub c_code_u: f64,
    pub c_code_s: f64,
    pub length: f64,
    pub cat: f64,
    pub code_cond: f64,
    pub mask_cond: f64,
    pub total: f64,
}

/// `α·L_Cin + β·L_Ccode + δ·L_length + γ·L_cat + ζ·L_code_cond + μ·L_mask_cond`
/// with `L_Cin = (1−λ_in)u + λ_in s` and `L_Ccode = (1−λ_code)u + λ_code s`.
/// A zero coefficient drops its term entirely.
pub fn loss_final(parts: &LossParts, w: &LossWeights) -> Result<LossBreakdown, LossError> {
    let named = [
        ("c_in_u", parts.c_in_u),
        ("c_in_s", parts.c_in_s),
        ("c_code_u", parts.c_code_u),
        ("c_code_s", parts.c_code_s),
        ("length", parts.length),
        ("cat", parts.cat),
        ("code_cond", parts.code_cond),
        ("mask_cond", parts.mask_cond),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(LossError::NonFinite(name));
        }
    }
    let c_in = (1.0 - w.lambda_in) * parts.c_in_u + w.lambda_in * parts.c_in_s;
    let c_code = (1.0 - w.lambda_code) * parts.c_code_u + w.lambda_code * parts.c_code_s;
    let total = [
        (w.alpha, c_in),
        (w.beta, c_code),
        (w.delta, parts.length),
        (w.gamma, parts.cat),
        (w.zeta, parts.code_cond),
        (w.mu, parts.mask_cond),
    ]
    .iter()
    .filter(|(c, _)| *c != 0.0)
    .map(|(c, v)| c * v)
    .sum();
    Ok(LossBreakdown {
        c_in_u: parts.c_in_u,
        c_in_s: parts.c_in_s,
        c_code_u: parts.c_code_u,
        c_code_s: parts.c_code_s,
        length: parts.length,
        cat: parts.cat,
        code_cond: parts.code_cond,
        mask_cond: parts.mask_cond,
        total,
    })
}

/// Graph nodes for each weighted term, `None` where a term is absent.
#[derive(Clone, Copy, Debug, Default)]
pub struct TermVars {
    pub c_in: Option<Var>,
    pub c_code: Option<Var>,
    pub length: Option<Var>,
    pub cat: Option<Var>,
    pub code_cond: Option<Var>,
    pub mask_cond: Option<Var>,
}

/// Graph form of [`loss_final`]'s total.
pub fn combine_terms(g: &mut Graph, terms: &TermVars, w: &LossWeights) -> Result<Var, LossError> {
    let mut total = g.constant(Tensor::scalar(0.0));
    for (coef, term) in [
        (w.alpha, terms.c_in),
        (w.beta, terms.c_code),
        (w.delta, terms.length),
        (w.gamma, terms.cat),
        (w.zeta, terms.code_cond),
        (w.mu, terms.mask_cond),
    ] {
        if let (true, Some(v)) = (coef != 0.0, term) {
            let s = g.scale(v, coef);
            total = g.add(total, s)?;
        }
    }
    Ok(total)
}

// Plain-value conveniences.

pub fn info_nce_unsup_value(v1: &Tensor, v2: &Tensor, tau: f64, smoothing: f64) -> Result<f64, LossError> {
    let mut g = Graph::new();
    let a = g.constant(v1.clone());
    let b = g.constant(v2.clone());
    let l = info_nce_unsup(&mut g, a, b, tau, smoothing)?;
    Ok(g.value(l).item())
}

/// Supervised contrast over two views; `None` when vacuous.
pub fn info_nce_sup_value(
    anchors: &Tensor,
    candidates: &Tensor,
    labels: &[Option<usize>],
    tau: f64,
    smoothing: f64,
) -> Result<Option<f64>, LossError> {
    let mut g = Graph::new();
    let a = g.constant(anchors.clone());
    let c = g.constant(candidates.clone());
    let s = info_nce_sup(&mut g, a, c, labels, tau, smoothing)?;
    Ok((!s.is_vacuous()).then(|| g.value(s.value).item()))
}

/// `(1/N) Σ_i ‖m_i ⊙ [base^1..base^L]‖_p` for raw masks.
pub fn loss_length_value(masks: &[Vec<f64>], base: f64, p: f64) -> f64 {
    if masks.is_empty() {
        return 0.0;
    }
    let mut g = Graph::new();
    let rows: Vec<Vec<f64>> = masks
        .iter()
        .map(|m| {
            m.iter()
                .zip(crate::codec::base_powers(m.len(), base))
                .map(|(a, w)| a * w)
                .collect()
        })
        .collect();
    let t = g.constant(Tensor::from_rows(&rows).expect("equal mask lengths"));
    let l = loss_length(&mut g, t, p);
    g.value(l).item()
}

pub fn binary_cond_value(values: &Tensor) -> f64 {
    let mut g = Graph::new();
    let v = g.constant(values.clone());
    let l = loss_binary_cond(&mut g, v).expect("same-shape ops");
    g.value(l).item()
}

pub fn loss_cat_value(logits: &Tensor, labels: &[usize]) -> Result<f64, LossError> {
    let mut g = Graph::new();
    let l = g.constant(logits.clone());
    let labels: Vec<Option<usize>> = labels.iter().copied().map(Some).collect();
    let v = loss_cat(&mut g, l, &labels)?;
    Ok(g.value(v).item())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::column(v)
    }

    #[test]
    fn unsup_on_identical_batch_is_log_b() {
        let x = Tensor::filled(5, 3, 0.4);
        let l = info_nce_unsup_value(&x, &x, 0.1, 0.0).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unsup_limit_is_zero() {
        let x = col(&[0.0, 1e4, -1e4]);
        let l = info_nce_unsup_value(&x, &x, 1.0, 0.0).unwrap();
        assert!(l < 1e-12);
    }

    #[test]
    fn unsup_matches_hand_softmax() {
        let x = col(&[0.0, 0.1, 5.0]);
        // Rows of -|x_i - x_j|: [0,-0.1,-5], [-0.1,0,-4.9], [-5,-4.9,0].
        let s = [[0.0, -0.1, -5.0], [-0.1, 0.0, -4.9], [-5.0, -4.9, 0.0]];
        let mut expect = 0.0;
        for (i, row) in s.iter().enumerate() {
            let z: f64 = row.iter().map(|v: &f64| v.exp()).sum();
            expect += -(row[i].exp() / z).ln();
        }
        expect /= 3.0;
        let l = info_nce_unsup_value(&x, &x, 1.0, 0.0).unwrap();
        assert!((l - expect).abs() < 1e-12, "{l} vs {expect}");
    }

    #[test]
    fn unsup_rejects_single_sample() {
        let x = col(&[1.0]);
        assert!(matches!(
            info_nce_unsup_value(&x, &x, 1.0, 0.0),
            Err(LossError::TooFewSamples(1))
        ));
    }

    #[test]
    fn sup_same_label_identical_equals_unsup() {
        let x = Tensor::filled(4, 2, 1.0);
        let labels = vec![Some(3); 4];
        let s = info_nce_sup_value(&x, &x, &labels, 0.5, 0.0).unwrap().unwrap();
        let u = info_nce_unsup_value(&x, &x, 0.5, 0.0).unwrap();
        assert!((s - u).abs() < 1e-12);
    }

    #[test]
    fn sup_two_clusters_tend_to_log_two() {
        let labels = vec![Some(0), Some(0), Some(1), Some(1)];
        let mut prev = f64::INFINITY;
        for sep in [0.5, 1.0, 2.0, 5.0, 50.0] {
            let x = col(&[0.0, 0.0, sep, sep]);
            let l = info_nce_sup_value(&x, &x, &labels, 1.0, 0.0).unwrap().unwrap();
            let expect = (2.0 + 2.0 * (-sep as f64).exp()).ln();
            assert!((l - expect).abs() < 1e-12);
            assert!(l < prev);
            prev = l;
        }
        assert!((prev - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sup_without_pairs_is_vacuous() {
        let x = col(&[0.0, 1.0, 2.0]);
        let labels = vec![Some(0), Some(1), None];
        assert_eq!(info_nce_sup_value(&x, &x, &labels, 1.0, 0.0).unwrap(), None);
    }

    #[test]
    fn length_examples() {
        assert_eq!(loss_length_value(&[vec![0.0; 4]], 2.0, 1.0), 0.0);
        assert_eq!(loss_length_value(&[vec![1.0, 1.0, 0.0, 0.0]], 2.0, 1.0), 6.0);
        let lone = loss_length_value(&[vec![0.0, 0.0, 0.0, 0.0, 1.0]], 2.0, 1.0);
        let front = loss_length_value(&[vec![1.0, 1.0, 1.0, 1.0, 0.0]], 2.0, 1.0);
        assert_eq!((lone, front), (32.0, 30.0));
    }

    #[test]
    fn condition_examples() {
        assert_eq!(binary_cond_value(&Tensor::row(&[0.0, 1.0, 1.0, 0.0])), 0.0);
        assert!((binary_cond_value(&Tensor::filled(1, 12, 0.5)) - 12.0 / 16.0).abs() < 1e-15);
        assert!((binary_cond_value(&Tensor::row(&[0.9])) - 0.0081).abs() < 1e-15);
    }

    #[test]
    fn cat_examples() {
        let uniform = Tensor::zeros(2, 5);
        assert!((loss_cat_value(&uniform, &[0, 3]).unwrap() - 5f64.ln()).abs() < 1e-12);
        let sharp = Tensor::from_rows(&[vec![1e3, 0.0], vec![0.0, 1e3]]).unwrap();
        assert!(loss_cat_value(&sharp, &[0, 1]).unwrap() < 1e-12);
        let logits = Tensor::row(&[1.0, 2.0, 0.5]);
        let z = 1f64.exp() + 2f64.exp() + 0.5f64.exp();
        let expect = -(2f64.exp() / z).ln();
        assert!((loss_cat_value(&logits, &[1]).unwrap() - expect).abs() < 1e-12);
        let mut g = Graph::new();
        let l = g.constant(logits);
        assert!(matches!(
            loss_cat(&mut g, l, &[None]),
            Err(LossError::UnlabeledSample(0))
        ));
    }

    #[test]
    fn final_examples() {
        let w = LossWeights::default();
        assert_eq!(loss_final(&LossParts::default(), &w).unwrap().total, 0.0);
        let ones = LossParts {
            c_in_u: 1.0,
            c_in_s: 1.0,
            c_code_u: 1.0,
            c_code_s: 1.0,
            length: 1.0,
            cat: 1.0,
            code_cond: 1.0,
            mask_cond: 1.0,
        };
        assert!((loss_final(&ones, &w).unwrap().total - 2.13).abs() < 1e-12);
        let unsup = LossWeights { gamma: 0.0, ..w.clone() };
        let with_huge_cat = LossParts { cat: 1e9, ..ones };
        assert!((loss_final(&with_huge_cat, &unsup).unwrap().total - 2.12).abs() < 1e-12);
        let bad = LossParts { length: f64::NAN, ..ones };
        assert!(matches!(loss_final(&bad, &w), Err(LossError::NonFinite("length"))));
    }

    #[test]
    fn mixtures_hit_their_endpoints() {
        let v1 = Tensor::from_rows(&[vec![0.0, 0.1], vec![1.0, 0.3], vec![0.2, 0.9], vec![0.7, 0.7]]).unwrap();
        let v2 = v1.map(|x| x + 0.05);
        let labels = vec![Some(0), Some(0), None, Some(1)];
        let u = info_nce_unsup_value(&v1, &v2, 0.3, 0.0).unwrap();
        let s = info_nce_sup_value(&v1, &v2, &labels, 0.3, 0.0).unwrap().unwrap();
        for (lambda, expect) in [(0.0, u), (1.0, s), (0.35, 0.65 * u + 0.35 * s)] {
            let w = LossWeights {
                lambda_in: lambda,
                tau: 0.3,
                ..LossWeights::default()
            };
            let mut g = Graph::new();
            let a = g.constant(v1.clone());
            let b = g.constant(v2.clone());
            let m = loss_c_in(&mut g, a, b, &labels, &w).unwrap();
            let got = g.value(m.total).item();
            if lambda == 0.0 || lambda == 1.0 {
                assert_eq!(got, expect);
            } else {
                assert!((got - expect).abs() < 1e-12);
            }
        }
    }
}
