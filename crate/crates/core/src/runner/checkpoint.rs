//! Versioned plain-text checkpoints.
//!
//! ```text
//! infosieve-checkpoint v1
//! epoch <n>
//! config <json>
//! split <json>
//! schedule <json>
//! tensor <name> <rows> <cols>
//! <rows·cols floats, space separated>
//! ...
//! end
//! ```
//!
//! Floats are printed in shortest round-trip form, so loading reproduces
//! every parameter bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Model, RunConfig, RunError, PARTS};
use crate::codec::TrainSchedule;
use crate::datagen::GcdSplit;
use crate::diffcore::{Activation, Layer, ParamStore, Parameters, Tensor};

pub const CHECKPOINT_MAGIC: &str = "infosieve-checkpoint";
pub const CHECKPOINT_VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub config: RunConfig,
    pub split: GcdSplit,
    pub model: Model,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(out, "epoch {}", self.epoch);
        let _ = writeln!(out, "config {}", serde_json::to_string(&self.config).expect("config json"));
        let _ = writeln!(out, "split {}", serde_json::to_string(&self.split).expect("split json"));
        let _ = writeln!(
            out,
            "schedule {}",
            serde_json::to_string(&self.model.schedule).expect("schedule json")
        );
        for (name, t) in self.model.named_tensors() {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RunError> {
        let bad = |m: String| RunError::Checkpoint(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad(format!("not a checkpoint: {header:?}")));
        }
        match hp.next() {
            Some(CHECKPOINT_VERSION) => {}
            other => return Err(bad(format!("unsupported checkpoint version {other:?}"))),
        }
        let mut field = |key: &str| -> Result<String, RunError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {key}, found {line:?}")))
        };
        let epoch: usize = field("epoch")?
            .parse()
            .map_err(|e| bad(format!("epoch: {e}")))?;
        let config: RunConfig =
            serde_json::from_str(&field("config")?).map_err(|e| bad(format!("config: {e}")))?;
        let split: GcdSplit =
            serde_json::from_str(&field("split")?).map_err(|e| bad(format!("split: {e}")))?;
        let schedule: TrainSchedule =
            serde_json::from_str(&field("schedule")?).map_err(|e| bad(format!("schedule: {e}")))?;

        let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
        let mut ended = false;
        while let Some(line) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [tag, name, rows, cols] = parts[..] else {
                return Err(bad(format!("bad tensor header {line:?}")));
            };
            if tag != "tensor" {
                return Err(bad(format!("bad tensor header {line:?}")));
            }
            let rows: usize = rows.parse().map_err(|e| bad(format!("{name}: {e}")))?;
            let cols: usize = cols.parse().map_err(|e| bad(format!("{name}: {e}")))?;
            let body = lines.next().ok_or_else(|| bad(format!("{name}: missing values")))?;
            let data: Vec<f64> = body
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("{name}: {e}")))?;
            let t = Tensor::from_vec(rows, cols, data).map_err(|e| bad(format!("{name}: {e}")))?;
            tensors.insert(name.to_string(), t);
        }
        if !ended {
            return Err(bad("truncated checkpoint (no end marker)".into()));
        }

        let mut stores = Vec::new();
        for part in PARTS {
            let mut layers = Vec::new();
            for i in 0.. {
                let (Some(w), Some(b)) = (
                    tensors.remove(&format!("{part}.{i}.w")),
                    tensors.remove(&format!("{part}.{i}.b")),
                ) else {
                    break;
                };
                layers.push(Layer {
                    weight: w,
                    bias: b,
                    activation: Activation::Gelu,
                });
            }
            if let Some(last) = layers.last_mut() {
                last.activation = Activation::Identity;
            }
            stores.push(ParamStore::new(layers).map_err(|e| bad(format!("{part}: {e}")))?);
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(bad(format!("unexpected tensor {extra}")));
        }
        let mut it = stores.into_iter();
        let model = Model {
            feat: it.next().unwrap(),
            code: it.next().unwrap(),
            mask: it.next().unwrap(),
            cat: it.next().unwrap(),
            schedule,
        };
        Ok(Checkpoint {
            epoch,
            config,
            split,
            model,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RunError> {
        let path = path.as_ref();
        // Write then rename so a crash never leaves a half-written file in
        // place of the last good checkpoint.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text()).map_err(|e| RunError::Io(format!("{}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RunError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_text(&text)
    }
}
