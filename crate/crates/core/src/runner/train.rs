use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, DataSource, EvalSpace, Model, RunConfig, RunError};
use crate::cluster::{gcd_accuracy, kmeans, ss_kmeans, ss_kmeans_balanced, GcdMetrics, KMeansOptions};
use crate::codec::TrainSchedule;
use crate::datagen::{augment_with, gcd_split, gen_hier_dataset, load_embedding_file, rng_from_seed, GcdSplit, HierDataset};
use crate::diffcore::{cosine_lr, DiffError, Graph, Sgd, Tensor};
use crate::losses::{
    combine_terms, loss_c_code, loss_c_in, loss_cat_labeled_rows, loss_code_cond,
    loss_final, loss_length, loss_mask_cond, LossBreakdown, LossError, LossParts, TermVars,
};
use crate::treelab::{extract_learned_tree, LearnedTree};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESULT_FILE: &str = "result.json";
pub const TREE_FILE: &str = "tree.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature: GcdMetrics,
    pub code: GcdMetrics,
}

impl EvalReport {
    pub fn headline(&self, space: EvalSpace) -> &GcdMetrics {
        match space {
            EvalSpace::Code => &self.code,
            EvalSpace::Feature => &self.feature,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub age: f64,
    pub base: f64,
    pub batches: usize,
    /// Batch means of every loss term.
    pub loss: LossBreakdown,
    /// Batches in which the supervised feature contrast had no pair.
    pub vacuous_sup: usize,
    /// Mean over samples of the summed soft mask, a smooth code length.
    pub soft_length: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub split: GcdSplit,
    pub n_samples: usize,
    pub input_dim: usize,
    pub n_classes: usize,
}

/// Tree purity of the hardened codes against ground-truth labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub mean_purity: f64,
    pub distinct_codes: usize,
    pub mean_code_length: f64,
}

impl TreeSummary {
    pub fn of(tree: &LearnedTree) -> Self {
        let n = tree.encoding.len().max(1);
        TreeSummary {
            mean_purity: tree.mean_purity,
            distinct_codes: tree.distinct_codes,
            mean_code_length: tree.encoding.total_length() as f64 / n as f64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub manifest: Manifest,
    pub history: Vec<EpochRecord>,
    pub metrics: EvalReport,
    pub tree: TreeSummary,
    /// Mean `v²(1−v)²` over every code bit and mask entry of all samples.
    pub binarization: f64,
    pub checkpoint: Option<PathBuf>,
    #[serde(skip)]
    pub model: Option<Model>,
}

impl RunResult {
    pub fn headline(&self) -> &GcdMetrics {
        self.metrics.headline(self.manifest.config.eval_space)
    }

    pub fn summary_line(&self) -> String {
        format!(
            "epochs={} code={} feature={} purity={:.3} binarization={:.5}",
            self.history.len(),
            self.metrics.code.triple(),
            self.metrics.feature.triple(),
            self.tree.mean_purity,
            self.binarization
        )
    }
}

/// Loads or generates the dataset a config names.
pub fn load_data(cfg: &RunConfig) -> Result<HierDataset, RunError> {
    match &cfg.data {
        DataSource::Synthetic(p) => Ok(gen_hier_dataset(p)?),
        DataSource::Embedding { path } => Ok(load_embedding_file(path)?),
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<(HierDataset, GcdSplit), RunError> {
    let ds = load_data(cfg)?;
    let split = gcd_split(&ds, cfg.known_class_frac, cfg.labeled_frac, cfg.seed)?;
    Ok((ds, split))
}

/// Known-class index for labeled samples, `None` elsewhere.
pub fn supervision(ds: &HierDataset, split: &GcdSplit) -> Vec<Option<usize>> {
    let mut out = vec![None; ds.len()];
    for &i in &split.labeled_idx {
        out[i] = split.known_index(ds.labels[i]);
    }
    out
}

/// Seedings per k-means call in pseudo-labeling, evaluation and the
/// baseline.
pub const KMEANS_RESTARTS: usize = 10;

fn kmeans_opts() -> KMeansOptions {
    KMeansOptions {
        n_init: KMEANS_RESTARTS,
        ..KMeansOptions::default()
    }
}

/// Semi-supervised k-means on both embedding spaces, scored on the
/// unlabeled samples.
pub fn evaluate_model(model: &Model, ds: &HierDataset, split: &GcdSplit, seed: u64) -> Result<EvalReport, RunError> {
    let inf = model.infer(&ds.features)?;
    let sup = supervision(ds, split);
    let k = ds.num_classes();
    let score = |emb: &Tensor| -> Result<GcdMetrics, RunError> {
        let a = ss_kmeans(&emb.to_rows(), &sup, k, seed, &kmeans_opts())?;
        Ok(gcd_accuracy(&a.assign, &ds.labels, &split.known_classes, &split.labeled_idx)?)
    };
    Ok(EvalReport {
        feature: score(&inf.features)?,
        code: score(&inf.signed)?,
    })
}

/// Loads a checkpoint and evaluates it on `ds` (or on the data its config
/// names).
pub fn evaluate(ckpt: &Checkpoint, ds: Option<&HierDataset>) -> Result<EvalReport, RunError> {
    let owned;
    let ds = match ds {
        Some(d) => d,
        None => {
            owned = load_data(&ckpt.config)?;
            &owned
        }
    };
    if ds.dim() != ckpt.model.input_dim() {
        return Err(RunError::Dimension {
            model: ckpt.model.input_dim(),
            data: ds.dim(),
        });
    }
    if let Some(&i) = ckpt.split.labeled_idx.iter().chain(&ckpt.split.unlabeled_idx).find(|&&i| i >= ds.len()) {
        return Err(RunError::Config(format!(
            "split references sample {i} but the data has {} samples",
            ds.len()
        )));
    }
    evaluate_model(&ckpt.model, ds, &ckpt.split, ckpt.config.seed)
}

/// Unsupervised k-means with the true K on the raw input features.
pub fn kmeans_baseline(ds: &HierDataset, split: &GcdSplit, seed: u64) -> Result<GcdMetrics, RunError> {
    let a = kmeans(&ds.features.to_rows(), ds.num_classes(), seed, &kmeans_opts())?;
    Ok(gcd_accuracy(&a.assign, &ds.labels, &split.known_classes, &split.labeled_idx)?)
}

/// Mean `v²(1−v)²` over all code bits and mask values.
pub fn binarization(model: &Model, ds: &HierDataset) -> Result<f64, RunError> {
    let inf = model.infer(&ds.features)?;
    let vals: Vec<f64> = inf.bits.data().iter().chain(inf.mask.data()).copied().collect();
    Ok(vals.iter().map(|v| (v * (1.0 - v)).powi(2)).sum::<f64>() / vals.len().max(1) as f64)
}

pub fn extract_tree(model: &Model, ds: &HierDataset) -> LearnedTree {
    extract_learned_tree(model, &ds.features.to_rows(), &ds.labels)
}

struct Outputs {
    dir: Option<PathBuf>,
    metrics: Option<BufWriter<File>>,
}

impl Outputs {
    fn open(dir: Option<&Path>) -> Result<Self, RunError> {
        let Some(dir) = dir else {
            return Ok(Outputs { dir: None, metrics: None });
        };
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        let f = File::create(dir.join(METRICS_FILE)).map_err(|e| RunError::Io(e.to_string()))?;
        Ok(Outputs {
            dir: Some(dir.to_path_buf()),
            metrics: Some(BufWriter::new(f)),
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<(), RunError> {
        if let Some(d) = &self.dir {
            std::fs::write(d.join(name), text).map_err(|e| RunError::Io(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    fn record(&mut self, rec: &EpochRecord) -> Result<(), RunError> {
        if let Some(w) = &mut self.metrics {
            let line = serde_json::to_string(rec).expect("record json");
            writeln!(w, "{line}").map_err(|e| RunError::Io(e.to_string()))?;
        }
        Ok(())
    }

    fn checkpoint(&self, ck: &Checkpoint) -> Result<Option<PathBuf>, RunError> {
        match &self.dir {
            Some(d) => {
                let p = d.join(CHECKPOINT_FILE);
                ck.save(&p)?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    fn finish(&mut self) -> Result<(), RunError> {
        if let Some(w) = &mut self.metrics {
            w.flush().map_err(|e| RunError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

/// Objective value, its parts and every parameter gradient for one batch
/// of two augmented views.
#[derive(Clone, Debug)]
pub struct BatchObjective {
    pub loss: f64,
    pub parts: LossParts,
    pub grads: Model,
    /// The supervised feature contrast had no positive pair.
    pub vacuous_sup: bool,
    /// Mean over samples of the summed soft mask, both views.
    pub soft_length: f64,
}

/// Builds the full training objective for views `x1`, `x2` and
/// backpropagates it. `sup` carries known-class labels, `pseudo` the
/// cluster ids used by the supervised code contrast.
pub fn batch_objective(
    model: &Model,
    cfg: &RunConfig,
    x1: Tensor,
    x2: Tensor,
    sup: &[Option<usize>],
    pseudo: &[usize],
    schedule: &TrainSchedule,
) -> Result<BatchObjective, RunError> {
    let w = &cfg.weights;
    let mut g = Graph::new();
    let bound = model.bind(&mut g);
    let a = g.constant(x1);
    let b = g.constant(x2);
    let v1 = model.forward_graph(&mut g, &bound, a, schedule)?;
    let v2 = model.forward_graph(&mut g, &bound, b, schedule)?;

    let c_in = loss_c_in(&mut g, v1.features, v2.features, sup, w)?;
    let (p1, p2) = if cfg.scalar_code_contrast {
        (g.sum_rows(v1.codes.positional), g.sum_rows(v2.codes.positional))
    } else {
        (v1.codes.positional, v2.codes.positional)
    };
    let c_code = loss_c_code(&mut g, v1.codes.bits, v2.codes.bits, p1, p2, pseudo, w)?;
    let len1 = loss_length(&mut g, v1.codes.weighted_mask, w.p);
    let len2 = loss_length(&mut g, v2.codes.weighted_mask, w.p);
    let len_sum = g.add(len1, len2)?;
    let length = g.scale(len_sum, 0.5);
    let cat = match (
        loss_cat_labeled_rows(&mut g, v1.logits, sup)?,
        loss_cat_labeled_rows(&mut g, v2.logits, sup)?,
    ) {
        (Some(c1), Some(c2)) => {
            let s = g.add(c1, c2)?;
            Some(g.scale(s, 0.5))
        }
        _ => None,
    };
    let cc1 = loss_code_cond(&mut g, v1.codes.bits)?;
    let cc2 = loss_code_cond(&mut g, v2.codes.bits)?;
    let code_cond = g.add(cc1, cc2)?;
    let mc1 = loss_mask_cond(&mut g, v1.codes.mask)?;
    let mc2 = loss_mask_cond(&mut g, v2.codes.mask)?;
    let mask_cond = g.add(mc1, mc2)?;

    let terms = TermVars {
        c_in: Some(c_in.total),
        c_code: Some(c_code.total),
        length: Some(length),
        cat,
        code_cond: Some(code_cond),
        mask_cond: Some(mask_cond),
    };
    let total = combine_terms(&mut g, &terms, w)?;
    let val = |v| g.value(v).item();
    let parts = LossParts {
        c_in_u: val(c_in.unsup),
        c_in_s: val(c_in.sup.value),
        c_code_u: val(c_code.unsup),
        c_code_s: val(c_code.sup.value),
        length: val(length),
        cat: cat.map_or(0.0, val),
        code_cond: val(code_cond),
        mask_cond: val(mask_cond),
    };
    let loss = val(total);
    if !loss.is_finite() {
        return Err(RunError::NonFinite {
            epoch: schedule.epoch,
            term: "total".into(),
            last_good: None,
        });
    }
    let grads = g.backward(total)?;
    let m1 = g.value(v1.codes.mask);
    let m2 = g.value(v2.codes.mask);
    let soft_length = (m1.data().iter().sum::<f64>() + m2.data().iter().sum::<f64>()) / (m1.rows() + m2.rows()) as f64;
    Ok(BatchObjective {
        loss,
        parts,
        grads: model.grads(&bound, &grads),
        vacuous_sup: c_in.sup.is_vacuous(),
        soft_length,
    })
}

fn batch_step(
    model: &mut Model,
    opt: &mut Sgd,
    cfg: &RunConfig,
    x1: Tensor,
    x2: Tensor,
    sup: &[Option<usize>],
    pseudo: &[usize],
    schedule: &TrainSchedule,
    lr: f64,
) -> Result<BatchObjective, RunError> {
    let obj = batch_objective(model, cfg, x1, x2, sup, pseudo, schedule)?;
    let breakdown = loss_final(&obj.parts, &cfg.weights)?;
    debug_assert!((breakdown.total - obj.loss).abs() <= 1e-9 * obj.loss.abs().max(1.0));
    opt.step(model, &obj.grads, lr).map_err(|e| match e {
        DiffError::NonFinite(what) => RunError::NonFinite {
            epoch: schedule.epoch,
            term: what,
            last_good: None,
        },
        e => e.into(),
    })?;
    Ok(obj)
}

/// Splits a shuffled order into batches of `size`, folding a trailing
/// batch with fewer than 2 samples into its predecessor.
fn batches(order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().map_or(false, |b| b.len() < 2) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Trains on the data the config names.
pub fn train(cfg: &RunConfig) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let (ds, split) = prepare(cfg)?;
    train_on(cfg, &ds, &split)
}

pub fn train_on(cfg: &RunConfig, ds: &HierDataset, split: &GcdSplit) -> Result<RunResult, RunError> {
    cfg.validate()?;
    if ds.len() < 2 {
        return Err(RunError::Config("need at least 2 samples".into()));
    }
    let started = (!cfg.deterministic).then(Instant::now);
    let mut out = Outputs::open(cfg.out_dir.as_deref())?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: cfg.clone(),
        split: split.clone(),
        n_samples: ds.len(),
        input_dim: ds.dim(),
        n_classes: ds.num_classes(),
    };
    out.write(MANIFEST_FILE, &(serde_json::to_string_pretty(&manifest).expect("manifest json") + "\n"))?;
    out.write(CONFIG_FILE, &cfg.to_toml_string())?;

    let mut rng = rng_from_seed(cfg.seed);
    let mut model = Model::init(&cfg.model_dims(ds.dim(), split.known_classes.len()), &mut rng)?;
    model.schedule = TrainSchedule::at(0, cfg.n_epochs, cfg.a_max);
    let mut opt = Sgd::new(cfg.momentum, cfg.weight_decay);
    if cfg.clip_norm > 0.0 {
        opt = opt.with_clip(cfg.clip_norm);
    }
    let sup = supervision(ds, split);
    let k = ds.num_classes();
    let rows = ds.features.to_rows();

    let snapshot = |model: &Model, epoch: usize| Checkpoint {
        epoch,
        config: cfg.clone(),
        split: split.clone(),
        model: model.clone(),
    };
    let mut last_good = out.checkpoint(&snapshot(&model, 0))?;

    let mut history = Vec::with_capacity(cfg.n_epochs);
    for epoch in 0..cfg.n_epochs {
        let schedule = TrainSchedule::at(epoch, cfg.n_epochs, cfg.a_max);
        model.schedule = schedule;
        let lr = cosine_lr(cfg.lr, epoch, cfg.n_epochs);

        let emb = model.infer(&ds.features)?.features.to_rows();
        let pseudo_seed = cfg.seed.wrapping_add(epoch as u64);
        let pseudo = if cfg.balanced_pseudo {
            ss_kmeans_balanced(&emb, &sup, k, pseudo_seed, &kmeans_opts())?
        } else {
            ss_kmeans(&emb, &sup, k, pseudo_seed, &kmeans_opts())?
        }
        .assign;

        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        let mut n_batches = 0usize;
        let mut vacuous = 0usize;
        let mut soft_length = 0.0;
        for idx in batches(&order, cfg.batch_size) {
            if idx.len() < 2 {
                continue;
            }
            let view = |rng: &mut _| {
                let r: Vec<Vec<f64>> = idx
                    .iter()
                    .map(|&i| augment_with(&rows[i], rng, cfg.aug_sigma, cfg.aug_drop))
                    .collect();
                Tensor::from_rows(&r).expect("rectangular batch")
            };
            let x1 = view(&mut rng);
            let x2 = view(&mut rng);
            let bsup: Vec<Option<usize>> = idx.iter().map(|&i| sup[i]).collect();
            let bpseudo: Vec<usize> = idx.iter().map(|&i| pseudo[i]).collect();
            let bl = match batch_step(&mut model, &mut opt, cfg, x1, x2, &bsup, &bpseudo, &schedule, lr) {
                Ok(b) => b,
                Err(RunError::NonFinite { term, .. }) => {
                    let _ = out.finish();
                    return Err(RunError::NonFinite { epoch, term, last_good });
                }
                Err(RunError::Loss(LossError::NonFinite(term))) => {
                    let _ = out.finish();
                    return Err(RunError::NonFinite {
                        epoch,
                        term: term.to_string(),
                        last_good,
                    });
                }
                Err(e) => return Err(e),
            };
            add_parts(&mut sum, &bl.parts);
            n_batches += 1;
            vacuous += bl.vacuous_sup as usize;
            soft_length += bl.soft_length;
        }
        let mean = scale_parts(&sum, 1.0 / n_batches.max(1) as f64);
        let loss = loss_final(&mean, &cfg.weights)?;
        let eval = if cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 {
            Some(evaluate_model(&model, ds, split, cfg.seed)?)
        } else {
            None
        };
        let rec = EpochRecord {
            epoch,
            lr,
            age: schedule.age,
            base: schedule.base,
            batches: n_batches,
            loss,
            vacuous_sup: vacuous,
            soft_length: soft_length / n_batches.max(1) as f64,
            eval,
            elapsed_ms: started.map(|t| t.elapsed().as_millis() as u64),
        };
        out.record(&rec)?;
        history.push(rec);
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            model.schedule = TrainSchedule::at(epoch + 1, cfg.n_epochs, cfg.a_max);
            last_good = out.checkpoint(&snapshot(&model, epoch + 1))?;
        }
    }
    model.schedule = TrainSchedule::at(cfg.n_epochs, cfg.n_epochs, cfg.a_max);
    out.finish()?;

    let metrics = evaluate_model(&model, ds, split, cfg.seed)?;
    let tree = extract_tree(&model, ds);
    let bin = binarization(&model, ds)?;
    let checkpoint = out.checkpoint(&snapshot(&model, cfg.n_epochs))?;
    let result = RunResult {
        manifest,
        history,
        metrics,
        tree: TreeSummary::of(&tree),
        binarization: bin,
        checkpoint,
        model: Some(model),
    };
    out.write(TREE_FILE, &tree.stats_text())?;
    out.write(SUMMARY_FILE, &summary_csv(&[("run".to_string(), &result)]))?;
    out.write(RESULT_FILE, &(serde_json::to_string_pretty(&result).expect("result json") + "\n"))?;
    Ok(result)
}

fn add_parts(acc: &mut LossParts, p: &LossParts) {
    acc.c_in_u += p.c_in_u;
    acc.c_in_s += p.c_in_s;
    acc.c_code_u += p.c_code_u;
    acc.c_code_s += p.c_code_s;
    acc.length += p.length;
    acc.cat += p.cat;
    acc.code_cond += p.code_cond;
    acc.mask_cond += p.mask_cond;
}

fn scale_parts(p: &LossParts, s: f64) -> LossParts {
    LossParts {
        c_in_u: p.c_in_u * s,
        c_in_s: p.c_in_s * s,
        c_code_u: p.c_code_u * s,
        c_code_s: p.c_code_s * s,
        length: p.length * s,
        cat: p.cat * s,
        code_cond: p.code_cond * s,
        mask_cond: p.mask_cond * s,
    }
}

/// One CSV row per named run.
pub fn summary_csv(rows: &[(String, &RunResult)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "run", "epochs", "seed", "code_all", "code_known", "code_novel", "feature_all", "feature_known",
        "feature_novel", "purity", "binarization", "final_loss",
    ])
    .expect("in-memory csv");
    for (name, r) in rows {
        let final_loss = r.history.last().map_or(f64::NAN, |h| h.loss.total);
        w.write_record([
            name.clone(),
            r.history.len().to_string(),
            r.manifest.seed.to_string(),
            format!("{:.4}", r.metrics.code.acc_all),
            format!("{:.4}", r.metrics.code.acc_known),
            format!("{:.4}", r.metrics.code.acc_novel),
            format!("{:.4}", r.metrics.feature.acc_all),
            format!("{:.4}", r.metrics.feature.acc_known),
            format!("{:.4}", r.metrics.feature.acc_novel),
            format!("{:.4}", r.tree.mean_purity),
            format!("{:.6}", r.binarization),
            format!("{final_loss:.6}"),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv")
}
