use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{encode_graph, harden, BinaryCode, CodeVars, MaskSequence, TrainSchedule};
use crate::diffcore::{BoundParams, DiffError, Gradients, Graph, ParamStore, Parameters, Tensor, Var};
use crate::treelab::CodeSource;

/// Feature extractor, code generator, code masker and categorizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub feat: ParamStore,
    pub code: ParamStore,
    pub mask: ParamStore,
    pub cat: ParamStore,
    /// Schedule used for inference and hardening.
    pub schedule: TrainSchedule,
}

/// Layer widths for [`Model::init`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden: usize,
    pub feat_dim: usize,
    pub code_len: usize,
    /// 0 makes the code generator and masker single linear layers.
    pub head_hidden: usize,
    pub cat_hidden: usize,
    pub known_classes: usize,
}

pub const PARTS: [&str; 4] = ["feat", "code", "mask", "cat"];

/// Graph handles for one bound model.
pub struct BoundModel {
    feat: BoundParams,
    code: BoundParams,
    mask: BoundParams,
    cat: BoundParams,
}

/// Graph outputs for one batch.
pub struct BatchVars {
    /// L2-normalized feature embeddings.
    pub features: Var,
    pub codes: CodeVars,
    /// Known-class logits from the signed truncated code.
    pub logits: Var,
}

/// Per-sample outputs of a forward pass over many rows.
#[derive(Clone, Debug)]
pub struct Inference {
    pub features: Tensor,
    pub soft: Tensor,
    pub bits: Tensor,
    pub mask: Tensor,
    pub truncated: Tensor,
    /// `soft ⊙ mask`, the code-space embedding used for evaluation.
    pub signed: Tensor,
}

impl Inference {
    pub fn code(&self, i: usize) -> (BinaryCode, MaskSequence) {
        (
            BinaryCode::from_soft(self.soft.row_slice(i).to_vec()),
            MaskSequence::new(self.mask.row_slice(i).to_vec(), 1.0),
        )
    }

    pub fn hard_codes(&self) -> Vec<String> {
        (0..self.soft.rows())
            .map(|i| {
                let (c, m) = self.code(i);
                harden(&c, &m)
            })
            .collect()
    }
}

impl Model {
    pub fn init<R: Rng>(dims: &ModelDims, rng: &mut R) -> Result<Self, DiffError> {
        let head = |out: usize| -> Vec<usize> {
            if dims.head_hidden == 0 {
                vec![dims.feat_dim, out]
            } else {
                vec![dims.feat_dim, dims.head_hidden, out]
            }
        };
        Ok(Model {
            feat: ParamStore::init(&[dims.input_dim, dims.hidden, dims.feat_dim], rng)?,
            code: ParamStore::init(&head(dims.code_len), rng)?,
            mask: ParamStore::init(&head(dims.code_len), rng)?,
            cat: ParamStore::init(&[dims.code_len, dims.cat_hidden, dims.known_classes.max(1)], rng)?,
            schedule: TrainSchedule::at(0, 1, 1.0),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.feat.in_dim()
    }

    pub fn code_len(&self) -> usize {
        self.code.out_dim()
    }

    pub fn known_classes(&self) -> usize {
        self.cat.out_dim()
    }

    pub fn part(&self, name: &str) -> Option<&ParamStore> {
        match name {
            "feat" => Some(&self.feat),
            "code" => Some(&self.code),
            "mask" => Some(&self.mask),
            "cat" => Some(&self.cat),
            _ => None,
        }
    }

    pub fn part_mut(&mut self, name: &str) -> Option<&mut ParamStore> {
        match name {
            "feat" => Some(&mut self.feat),
            "code" => Some(&mut self.code),
            "mask" => Some(&mut self.mask),
            "cat" => Some(&mut self.cat),
            _ => None,
        }
    }

    pub fn bind(&self, g: &mut Graph) -> BoundModel {
        BoundModel {
            feat: self.feat.bind(g),
            code: self.code.bind(g),
            mask: self.mask.bind(g),
            cat: self.cat.bind(g),
        }
    }

    /// Gradients for every parameter, shaped like the model.
    pub fn grads(&self, bound: &BoundModel, grads: &Gradients) -> Model {
        Model {
            feat: bound.feat.grads(grads),
            code: bound.code.grads(grads),
            mask: bound.mask.grads(grads),
            cat: bound.cat.grads(grads),
            schedule: self.schedule,
        }
    }

    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundModel,
        x: Var,
        schedule: &TrainSchedule,
    ) -> Result<BatchVars, DiffError> {
        let raw = bound.feat.forward(g, x)?;
        let features = l2_normalize(g, raw)?;
        let codes = encode_graph(g, &bound.code, &bound.mask, features, schedule)?;
        let logits = bound.cat.forward(g, codes.signed)?;
        Ok(BatchVars {
            features,
            codes,
            logits,
        })
    }

    /// Forward pass over every row of `x` with the stored schedule.
    pub fn infer(&self, x: &Tensor) -> Result<Inference, DiffError> {
        if x.cols() != self.input_dim() {
            return Err(DiffError::Shape(format!(
                "model expects {} input features, data has {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let xv = g.constant(x.clone());
        let out = self.forward_graph(&mut g, &bound, xv, &self.schedule)?;
        Ok(Inference {
            features: g.value(out.features).clone(),
            soft: g.value(out.codes.soft).clone(),
            bits: g.value(out.codes.bits).clone(),
            mask: g.value(out.codes.mask).clone(),
            truncated: g.value(out.codes.truncated).clone(),
            signed: g.value(out.codes.signed).clone(),
        })
    }
}

/// Rows scaled to unit Euclidean norm.
pub fn l2_normalize(g: &mut Graph, x: Var) -> Result<Var, DiffError> {
    let sq = g.mul(x, x)?;
    let norms = g.sum_rows(sq);
    let guarded = g.scale_shift(norms, 1.0, 1e-12);
    let inv = g.pow(guarded, -0.5);
    g.mul(x, inv)
}

impl Parameters for Model {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        PARTS
            .iter()
            .flat_map(|p| {
                self.part(p)
                    .expect("known part")
                    .named_tensors()
                    .into_iter()
                    .map(move |(n, t)| (format!("{p}.{n}"), t))
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.feat.tensors_mut();
        out.extend(self.code.tensors_mut());
        out.extend(self.mask.tensors_mut());
        out.extend(self.cat.tensors_mut());
        out
    }
}

impl CodeSource for Model {
    fn hard_codes(&self, features: &[Vec<f64>]) -> Vec<String> {
        let x = Tensor::from_rows(features).expect("rectangular features");
        self.infer(&x).expect("input width matches the model").hard_codes()
    }
}
