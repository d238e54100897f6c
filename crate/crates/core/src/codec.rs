//! Code generator, code masker and categorizer heads, plus positional
//! values, truncation and hardening of category codes.
//!
//! The generator emits values in (−1, 1); the masker emits values in
//! (0, 1). Code bits live in bit space as `(soft + 1) / 2`.

use serde::{Deserialize, Serialize};

use crate::diffcore::{BoundParams, DiffError, Graph, ParamStore, Tensor, Var};

/// Longest supported code; keeps `base^L` far from overflow.
pub const MAX_CODE_LEN: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryCode {
    /// Generator output in (−1, 1).
    pub soft: Vec<f64>,
    /// `(soft + 1) / 2`.
    pub bits: Vec<f64>,
}

impl BinaryCode {
    pub fn from_soft(soft: Vec<f64>) -> Self {
        let bits = soft.iter().map(|s| 0.5 * (s + 1.0)).collect();
        BinaryCode { soft, bits }
    }

    pub fn len(&self) -> usize {
        self.soft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soft.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSequence {
    /// Masker output in (0, 1).
    pub soft_mask: Vec<f64>,
    /// `soft_mask_k · base^k`, `k` counted from 1.
    pub weighted: Vec<f64>,
    /// One past the last position whose mask exceeds 0.5.
    pub eff_length: usize,
}

impl MaskSequence {
    pub fn new(soft_mask: Vec<f64>, base: f64) -> Self {
        let weighted = soft_mask
            .iter()
            .zip(base_powers(soft_mask.len(), base))
            .map(|(m, w)| m * w)
            .collect();
        let eff_length = soft_mask
            .iter()
            .rposition(|&m| m > 0.5)
            .map_or(0, |k| k + 1);
        MaskSequence {
            soft_mask,
            weighted,
            eff_length,
        }
    }
}

/// Aging and positional-base state for one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    /// Aging parameter `a`; sharpens the tanh heads.
    pub age: f64,
    /// Positional base in [1, 2].
    pub base: f64,
    pub epoch: usize,
    pub n_epochs: usize,
}

impl TrainSchedule {
    /// `a = 1 + epoch·(a_max − 1)/n_epochs`, `base = 2 − epoch/n_epochs`.
    pub fn at(epoch: usize, n_epochs: usize, a_max: f64) -> Self {
        let frac = if n_epochs == 0 {
            0.0
        } else {
            (epoch as f64 / n_epochs as f64).min(1.0)
        };
        TrainSchedule {
            age: 1.0 + frac * (a_max - 1.0),
            base: 2.0 - frac,
            epoch,
            n_epochs,
        }
    }
}

/// `[base^1, …, base^len]` by running products.
pub fn base_powers(len: usize, base: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut w = 1.0;
    for _ in 0..len {
        w *= base;
        out.push(w);
    }
    out
}

/// `[base^-1, …, base^-len]`.
pub fn inverse_base_powers(len: usize, base: f64) -> Vec<f64> {
    base_powers(len, base).into_iter().map(|w| 1.0 / w).collect()
}

fn mask_shift(age: f64) -> f64 {
    1.0 / (age + 1.0)
}

/// `soft = tanh(a · h)` where `h` is the generator network output.
pub fn code_head(features: &[f64], params: &ParamStore, schedule: &TrainSchedule) -> Result<BinaryCode, DiffError> {
    let h = params.forward(features)?;
    Ok(BinaryCode::from_soft(
        h.into_iter().map(|v| (schedule.age * v).tanh()).collect(),
    ))
}

/// `m = (tanh(h + 1/(a+1)) + 1) / 2`; the shift starts masks near one and
/// fades as the model ages.
pub fn mask_head(
    features: &[f64],
    params: &ParamStore,
    schedule: &TrainSchedule,
) -> Result<MaskSequence, DiffError> {
    let h = params.forward(features)?;
    let shift = mask_shift(schedule.age);
    let m = h.into_iter().map(|v| 0.5 * ((v + shift).tanh() + 1.0)).collect();
    Ok(MaskSequence::new(m, schedule.base))
}

/// `Σ_k mask_k · bits_k / base^k`.
pub fn positional_value(code: &BinaryCode, mask: &MaskSequence, base: f64) -> f64 {
    code.bits
        .iter()
        .zip(&mask.soft_mask)
        .zip(inverse_base_powers(code.len(), base))
        .map(|((b, m), w)| b * m * w)
        .sum()
}

/// Hadamard product `bits ⊙ mask`.
pub fn truncate(code: &BinaryCode, mask: &MaskSequence) -> Result<Vec<f64>, DiffError> {
    if code.len() != mask.soft_mask.len() {
        return Err(DiffError::Shape(format!(
            "code has {} bits but mask has {}",
            code.len(),
            mask.soft_mask.len()
        )));
    }
    Ok(code
        .bits
        .iter()
        .zip(&mask.soft_mask)
        .map(|(b, m)| b * m)
        .collect())
}

/// Logits over known classes for a truncated code.
pub fn categorizer(truncated: &[f64], params: &ParamStore) -> Result<Vec<f64>, DiffError> {
    params.forward(truncated)
}

/// Bit `k` is `1` iff `soft_k > 0`; the string stops at the first position
/// whose mask is at most 0.5.
pub fn harden(code: &BinaryCode, mask: &MaskSequence) -> String {
    code.soft
        .iter()
        .zip(&mask.soft_mask)
        .take_while(|(_, &m)| m > 0.5)
        .map(|(&s, _)| if s > 0.0 { '1' } else { '0' })
        .collect()
}

/// Batched head outputs on a graph. All tensors are `batch × L`.
pub struct CodeVars {
    pub soft: Var,
    pub bits: Var,
    pub mask: Var,
    pub weighted_mask: Var,
    /// `bits ⊙ mask`
    pub truncated: Var,
    /// `soft ⊙ mask`. A masked position reads 0 while live bits read ±1,
    /// so a dropped bit and a 0 bit stay distinguishable.
    pub signed: Var,
    /// `soft ⊙ mask / base^k`, the positional code used for supervised
    /// code contrast.
    pub positional: Var,
}

pub fn code_head_graph(
    g: &mut Graph,
    head: &BoundParams,
    features: Var,
    schedule: &TrainSchedule,
) -> Result<(Var, Var), DiffError> {
    let h = head.forward(g, features)?;
    let scaled = g.scale(h, schedule.age);
    let soft = g.tanh(scaled);
    let bits = g.scale_shift(soft, 0.5, 0.5);
    Ok((soft, bits))
}

pub fn mask_head_graph(
    g: &mut Graph,
    head: &BoundParams,
    features: Var,
    schedule: &TrainSchedule,
) -> Result<Var, DiffError> {
    let h = head.forward(g, features)?;
    let shifted = g.scale_shift(h, 1.0, mask_shift(schedule.age));
    let t = g.tanh(shifted);
    Ok(g.scale_shift(t, 0.5, 0.5))
}

/// Runs both heads on a batch of feature embeddings and derives the
/// weighted mask, truncated code and positional code.
pub fn encode_graph(
    g: &mut Graph,
    code: &BoundParams,
    masker: &BoundParams,
    features: Var,
    schedule: &TrainSchedule,
) -> Result<CodeVars, DiffError> {
    let (soft, bits) = code_head_graph(g, code, features, schedule)?;
    let mask = mask_head_graph(g, masker, features, schedule)?;
    let len = g.shape(bits).1;
    let pw = g.constant(Tensor::row(&base_powers(len, schedule.base)));
    let weighted_mask = g.mul(mask, pw)?;
    let truncated = g.mul(bits, mask)?;
    let signed = g.mul(soft, mask)?;
    let iw = g.constant(Tensor::row(&inverse_base_powers(len, schedule.base)));
    let positional = g.mul(signed, iw)?;
    Ok(CodeVars {
        soft,
        bits,
        mask,
        weighted_mask,
        truncated,
        signed,
        positional,
    })
}
