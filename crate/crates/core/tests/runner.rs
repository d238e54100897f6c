use infosieve::datagen::{rng_from_seed, HierParams};
use infosieve::diffcore::{grad_check, GradResult, Tensor};
use infosieve::runner::{
    ablate, batch_objective, evaluate, leave_one_out_rows, parse_row, prepare, train, Checkpoint, DataSource,
    EvalReport, Model, RunConfig, RunError, Term, CHECKPOINT_FILE, METRICS_FILE, RESULT_FILE,
};
use infosieve::codec::TrainSchedule;
use rand::Rng;

fn tiny(epochs: usize) -> RunConfig {
    RunConfig {
        data: DataSource::Synthetic(HierParams {
            depth: 2,
            per_leaf: 6,
            dim: 8,
            ..HierParams::default()
        }),
        n_epochs: epochs,
        batch_size: 8,
        hidden: 16,
        feat_dim: 8,
        head_hidden: 8,
        cat_hidden: 8,
        code_len: 6,
        ..RunConfig::default()
    }
}

#[test]
fn zero_epochs_give_empty_history_and_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..tiny(0)
    };
    let r = train(&cfg).unwrap();
    assert!(r.history.is_empty());
    let ck = Checkpoint::load(dir.path().join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(ck.epoch, 0);
    assert_eq!(&ck.model, r.model.as_ref().unwrap());
}

#[test]
fn history_has_one_record_per_epoch() {
    let r = train(&tiny(3)).unwrap();
    assert_eq!(r.history.len(), 3);
    for (e, rec) in r.history.iter().enumerate() {
        assert_eq!(rec.epoch, e);
        assert!(rec.loss.total.is_finite());
    }
    assert!(r.history[0].age < r.history[2].age);
    assert!(r.history[0].base > r.history[2].base);
}

#[test]
fn deterministic_runs_write_identical_files() {
    // Same directory both times: the checkpoint records the output path.
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        deterministic: true,
        eval_every: 1,
        out_dir: Some(dir.path().to_path_buf()),
        ..tiny(3)
    };
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    train(&cfg).unwrap();
    let first = [read(METRICS_FILE), read(CHECKPOINT_FILE), read(RESULT_FILE)];
    train(&cfg).unwrap();
    let second = [read(METRICS_FILE), read(CHECKPOINT_FILE), read(RESULT_FILE)];
    for (f, (x, y)) in [METRICS_FILE, CHECKPOINT_FILE, RESULT_FILE].iter().zip(first.iter().zip(&second)) {
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn evaluating_the_final_checkpoint_reproduces_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..tiny(2)
    };
    let r = train(&cfg).unwrap();
    let ck = Checkpoint::load(r.checkpoint.as_ref().unwrap()).unwrap();
    let rep = evaluate(&ck, None).unwrap();
    assert_eq!(rep, r.metrics);
    let json = std::fs::read_to_string(dir.path().join(RESULT_FILE)).unwrap();
    assert!(json.contains("\"acc_all\""));
}

#[test]
fn metrics_serialization_round_trips() {
    let r = train(&tiny(1)).unwrap();
    let text = serde_json::to_string(&r.metrics).unwrap();
    let back: EvalReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r.metrics);
}

#[test]
fn checkpoint_text_round_trips_bit_for_bit() {
    let r = train(&tiny(1)).unwrap();
    let (_, split) = prepare(&tiny(1)).unwrap();
    let ck = Checkpoint {
        epoch: 1,
        config: tiny(1),
        split,
        model: r.model.unwrap(),
    };
    let back = Checkpoint::from_text(&ck.to_text()).unwrap();
    assert_eq!(back, ck);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let r = train(&tiny(0)).unwrap();
    let (_, split) = prepare(&tiny(0)).unwrap();
    let text = Checkpoint {
        epoch: 0,
        config: tiny(0),
        split,
        model: r.model.unwrap(),
    }
    .to_text();
    assert!(Checkpoint::from_text(&text.replace(" v1", " v9")).is_err());
    assert!(Checkpoint::from_text(text.trim_end_matches("end\n")).is_err());
    assert!(Checkpoint::from_text("hello").is_err());
}

#[test]
fn config_toml_round_trips() {
    let cfg = RunConfig {
        seed: 42,
        lr: 0.02,
        balanced_pseudo: true,
        ..tiny(7)
    };
    let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    let partial = RunConfig::from_toml_str("n_epochs = 5\nseed = 3\n").unwrap();
    assert_eq!(partial.n_epochs, 5);
    assert_eq!(partial.code_len, RunConfig::default().code_len);
}

#[test]
fn invalid_config_is_rejected() {
    for cfg in [
        RunConfig { batch_size: 1, ..tiny(1) },
        RunConfig { code_len: 0, ..tiny(1) },
        RunConfig { lr: -1.0, ..tiny(1) },
        RunConfig { clip_norm: -1.0, ..tiny(1) },
    ] {
        assert!(matches!(train(&cfg), Err(RunError::Config(_))), "{cfg:?}");
    }
}

#[test]
fn non_finite_loss_aborts_and_keeps_the_last_good_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        lr: 1e10,
        clip_norm: 0.0,
        checkpoint_every: 1,
        out_dir: Some(dir.path().to_path_buf()),
        ..tiny(20)
    };
    match train(&cfg) {
        Err(RunError::NonFinite { epoch, last_good, .. }) => {
            let path = last_good.expect("a checkpoint was written");
            let ck = Checkpoint::load(&path).unwrap();
            assert_eq!(ck.epoch, epoch);
            assert!(ck.model.infer(&Tensor::zeros(1, 8)).unwrap().soft.all_finite());
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("training with lr 1e10 stayed finite"),
    }
}

#[test]
fn ablation_emits_one_row_per_configuration() {
    let rows = vec![Vec::new(), parse_row("c_code,length").unwrap()];
    let rep = ablate(&tiny(1), &rows, &[0, 1]).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert!(rep.rows.iter().all(|r| r.runs.len() == 2));
    assert_eq!(rep.rows[1].name, "-c_code -length");
    assert!(!rep.rows[1].is_on(Term::Length));
    assert_eq!(rep.table().lines().count(), 3);
    assert_eq!(rep.csv().lines().count(), 3);
    assert_eq!(leave_one_out_rows().len(), 7);
    assert!(parse_row("nonsense").is_err());
    assert_eq!(parse_row("full").unwrap(), Vec::<Term>::new());
}

#[test]
fn full_ablation_row_equals_plain_training() {
    let cfg = tiny(2);
    let rep = ablate(&cfg, &[Vec::new()], &[cfg.seed]).unwrap();
    let r = train(&cfg).unwrap();
    assert_eq!(rep.rows[0].runs[0].acc_all, r.headline().acc_all);
    assert_eq!(rep.rows[0].runs[0].purity, r.tree.mean_purity);
}

#[test]
fn full_objective_gradients_match_finite_differences() {
    let cfg = tiny(1);
    let mut rng = rng_from_seed(5);
    let model = Model::init(&cfg.model_dims(8, 2), &mut rng).unwrap();
    let x1 = Tensor::from_fn(4, 8, |_, _| rng.gen_range(-1.0..1.0));
    let x2 = Tensor::from_fn(4, 8, |_, _| rng.gen_range(-1.0..1.0));
    let sup = [Some(0), Some(0), Some(1), None];
    let pseudo = [0, 0, 1, 1];
    let sched = TrainSchedule::at(0, 10, cfg.a_max);
    let f = |m: &Model| {
        let o = batch_objective(m, &cfg, x1.clone(), x2.clone(), &sup, &pseudo, &sched).unwrap();
        GradResult { loss: o.loss, grads: o.grads }
    };
    assert!(grad_check(f, &model, 1e-6) < 1e-4);
}
