use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gelu, DiffError, Gradients, Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Gelu,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`
    pub weight: Tensor,
    /// `1 × out`
    pub bias: Tensor,
    pub activation: Activation,
}

/// Weights of one fully connected network. Hidden layers use GeLU, the last
/// layer is linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    layers: Vec<Layer>,
}

/// Anything that exposes its trainable tensors in a fixed order.
pub trait Parameters {
    /// Named tensors in a stable order. Names ending in `.w` are weight
    /// matrices, `.b` biases.
    fn named_tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl ParamStore {
    pub fn new(layers: Vec<Layer>) -> Result<Self, DiffError> {
        if layers.is_empty() {
            return Err(DiffError::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            let (out, _) = l.weight.shape();
            if l.bias.shape() != (1, out) {
                return Err(DiffError::Shape(format!(
                    "layer {i}: bias is {}x{}, weight has {out} outputs",
                    l.bias.rows(),
                    l.bias.cols()
                )));
            }
            if i > 0 {
                let prev = layers[i - 1].weight.rows();
                if l.weight.cols() != prev {
                    return Err(DiffError::Shape(format!(
                        "layer {i} expects {} inputs but layer {} emits {prev}",
                        l.weight.cols(),
                        i - 1
                    )));
                }
            }
        }
        Ok(ParamStore { layers })
    }

    /// Uniform `±1/√fan_in` initialisation for the given layer widths.
    pub fn init<R: Rng>(widths: &[usize], rng: &mut R) -> Result<Self, DiffError> {
        Self::build(widths, |fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            rng.gen_range(-bound..bound)
        })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self, DiffError> {
        Self::build(widths, |_| 0.0)
    }

    fn build(widths: &[usize], mut draw: impl FnMut(usize) -> f64) -> Result<Self, DiffError> {
        if widths.len() < 2 {
            return Err(DiffError::Shape(format!(
                "need at least input and output width, got {widths:?}"
            )));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (inp, out) = (widths[i], widths[i + 1]);
                let weight = Tensor::from_fn(out, inp, |_, _| draw(inp));
                let bias = Tensor::from_fn(1, out, |_, _| draw(inp));
                Layer {
                    weight,
                    bias,
                    activation: if i + 1 == n {
                        Activation::Identity
                    } else {
                        Activation::Gelu
                    },
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(|l| l.weight.rows()))
            .collect()
    }

    /// Plain forward pass for one input vector, returning the last layer's
    /// pre-activation.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, DiffError> {
        if input.len() != self.in_dim() {
            return Err(DiffError::Shape(format!(
                "input has length {} but first layer expects {}",
                input.len(),
                self.in_dim()
            )));
        }
        let mut h = input.to_vec();
        for l in &self.layers {
            let mut next = Vec::with_capacity(l.weight.rows());
            for o in 0..l.weight.rows() {
                let z: f64 = l.bias.data()[o]
                    + l.weight
                        .row_slice(o)
                        .iter()
                        .zip(&h)
                        .map(|(w, x)| w * x)
                        .sum::<f64>();
                next.push(match l.activation {
                    Activation::Gelu => gelu(z),
                    Activation::Identity => z,
                });
            }
            h = next;
        }
        Ok(h)
    }

    /// Registers every weight and bias on `g` as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        let vars = self
            .layers
            .iter()
            .map(|l| (g.param(l.weight.clone()), g.param(l.bias.clone())))
            .collect();
        BoundParams {
            vars,
            activations: self.layers.iter().map(|l| l.activation).collect(),
            shapes: self
                .layers
                .iter()
                .map(|l| (l.weight.shape(), l.bias.shape()))
                .collect(),
        }
    }
}

impl Parameters for ParamStore {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{i}.w"), &l.weight));
            out.push((format!("{i}.b"), &l.bias));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }
}

/// A [`ParamStore`] whose tensors live on a graph.
pub struct BoundParams {
    vars: Vec<(Var, Var)>,
    activations: Vec<Activation>,
    shapes: Vec<((usize, usize), (usize, usize))>,
}

impl BoundParams {
    /// Batched forward pass: `x` is `batch × in`.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var, DiffError> {
        let mut h = x;
        for (&(w, b), act) in self.vars.iter().zip(&self.activations) {
            h = g.dense(h, w, b)?;
            if *act == Activation::Gelu {
                h = g.gelu(h);
            }
        }
        Ok(h)
    }

    /// Collects gradients into a store shaped like the original parameters.
    pub fn grads(&self, grads: &Gradients) -> ParamStore {
        let fetch = |v: Var, shape: (usize, usize)| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
        };
        let layers = self
            .vars
            .iter()
            .zip(&self.shapes)
            .zip(&self.activations)
            .map(|((&(w, b), &(ws, bs)), &activation)| Layer {
                weight: fetch(w, ws),
                bias: fetch(b, bs),
                activation,
            })
            .collect();
        ParamStore { layers }
    }
}
