use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::datagen::HierParams;
use crate::losses::LossWeights;

/// Where training data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(HierParams),
    Embedding { path: PathBuf },
}

/// Which embedding the final semi-supervised k-means consumes for the
/// headline metrics. Both are always reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSpace {
    Code,
    Feature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSource,
    pub known_class_frac: f64,
    pub labeled_frac: f64,
    pub weights: LossWeights,
    pub code_len: usize,
    pub a_max: f64,
    pub hidden: usize,
    pub feat_dim: usize,
    /// Hidden width of the code generator and masker; 0 makes them linear.
    pub head_hidden: usize,
    pub cat_hidden: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub seed: u64,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Global gradient-norm cap per step; 0 disables clipping.
    pub clip_norm: f64,
    pub aug_sigma: f64,
    pub aug_drop: f64,
    /// Balanced semi-supervised k-means for per-epoch pseudo-labels.
    pub balanced_pseudo: bool,
    /// Supervised code contrast on the scalar positional value instead of
    /// the per-bit positional vector.
    pub scalar_code_contrast: bool,
    pub eval_space: EvalSpace,
    /// Epochs between checkpoints; 0 writes only the initial and final one.
    pub checkpoint_every: usize,
    /// Epochs between intermediate evaluations; 0 disables them.
    pub eval_every: usize,
    /// Omit wall-clock fields so repeated runs are byte-identical.
    pub deterministic: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSource::Synthetic(HierParams::default()),
            known_class_frac: 0.5,
            labeled_frac: 0.5,
            weights: RunConfig::desk_weights(),
            code_len: 12,
            a_max: 30.0,
            hidden: 64,
            feat_dim: 32,
            head_hidden: 32,
            cat_hidden: 32,
            batch_size: 32,
            n_epochs: 60,
            seed: 0,
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            clip_norm: 5.0,
            aug_sigma: 0.05,
            aug_drop: 0.1,
            balanced_pseudo: false,
            scalar_code_contrast: false,
            eval_space: EvalSpace::Code,
            checkpoint_every: 0,
            eval_every: 0,
            deterministic: false,
            out_dir: None,
        }
    }
}

impl RunConfig {
    /// Full-scale schedule, 200 epochs with batches of 128, and the
    /// full-strength loss coefficients.
    pub fn full_scale() -> Self {
        RunConfig {
            n_epochs: 200,
            batch_size: 128,
            weights: LossWeights::default(),
            ..RunConfig::default()
        }
    }

    /// Loss coefficients for the small synthetic runs: `LossWeights::default()`
    /// except τ = 0.2, μ = 2 and ζ = 0.001.
    pub fn desk_weights() -> LossWeights {
        LossWeights {
            tau: 0.2,
            mu: 2.0,
            zeta: 0.001,
            ..LossWeights::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RunError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RunError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_dims(&self, input_dim: usize, known_classes: usize) -> super::ModelDims {
        super::ModelDims {
            input_dim,
            hidden: self.hidden,
            feat_dim: self.feat_dim,
            code_len: self.code_len,
            head_hidden: self.head_hidden,
            cat_hidden: self.cat_hidden,
            known_classes,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.weights.validate()?;
        let bad = |m: String| Err(RunError::Config(m));
        if self.code_len == 0 || self.code_len > crate::codec::MAX_CODE_LEN {
            return bad(format!(
                "code_len {} outside 1..={}",
                self.code_len,
                crate::codec::MAX_CODE_LEN
            ));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size {} < 2", self.batch_size));
        }
        if !(self.a_max >= 1.0) {
            return bad(format!("a_max {} < 1", self.a_max));
        }
        if self.hidden == 0 || self.feat_dim == 0 || self.cat_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if !(self.lr >= 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0)
            || !(self.clip_norm >= 0.0)
        {
            return bad("optimizer settings out of range".into());
        }
        if !(self.aug_sigma >= 0.0) || !(0.0..1.0).contains(&self.aug_drop) {
            return bad("augmentation settings out of range".into());
        }
        Ok(())
    }
}
