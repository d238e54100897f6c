use super::{DiffError, Parameters, Tensor};

/// Momentum SGD with decoupled velocity state.
///
/// `v ← μ·v + (g + λ·w)`, `w ← w − lr·v`. Weight decay applies to weight
/// matrices only; biases are left alone. With `clip_norm` set, the whole
/// gradient is rescaled so its global L2 norm is at most that value.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            weight_decay,
            clip_norm: None,
            velocity: Vec::new(),
        }
    }

    pub fn with_clip(mut self, max_norm: f64) -> Self {
        self.clip_norm = Some(max_norm);
        self
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<(), DiffError> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(DiffError::InvalidArgument(format!("learning rate {lr}")));
        }
        let named = grads.named_tensors();
        for (name, g) in &named {
            if !g.all_finite() {
                return Err(DiffError::NonFinite(format!("gradient of {name}")));
            }
        }
        let scale = match self.clip_norm {
            Some(c) if c > 0.0 => {
                let norm = named
                    .iter()
                    .flat_map(|(_, g)| g.data().iter())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > c { c / norm } else { 1.0 }
            }
            _ => 1.0,
        };
        let decay: Vec<bool> = params
            .named_tensors()
            .iter()
            .map(|(n, _)| n.ends_with(".w"))
            .collect();
        let targets = params.tensors_mut();
        if targets.len() != named.len() {
            return Err(DiffError::Shape(format!(
                "{} parameter tensors but {} gradients",
                targets.len(),
                named.len()
            )));
        }
        if self.velocity.is_empty() {
            self.velocity = named
                .iter()
                .map(|(_, g)| Tensor::zeros(g.rows(), g.cols()))
                .collect();
        }
        for (((w, (name, g)), v), &d) in targets
            .into_iter()
            .zip(&named)
            .zip(self.velocity.iter_mut())
            .zip(&decay)
        {
            if w.shape() != g.shape() {
                return Err(DiffError::Shape(format!("gradient shape mismatch for {name}")));
            }
            let wd = if d { self.weight_decay } else { 0.0 };
            for ((wi, gi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *vi = self.momentum * *vi + scale * gi + wd * *wi;
                *wi -= lr * *vi;
            }
        }
        Ok(())
    }
}

/// Cosine decay from `base_lr` to 0 over `total` epochs.
pub fn cosine_lr(base_lr: f64, epoch: usize, total: usize) -> f64 {
    if total == 0 {
        return base_lr;
    }
    0.5 * base_lr * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
}
