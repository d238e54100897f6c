//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use infosieve::cluster::{balanced_kmeans, hungarian, ss_kmeans, ss_kmeans_balanced, KMeansOptions};
use infosieve::codec::{positional_value, BinaryCode, MaskSequence, TrainSchedule};
use infosieve::datagen::rng_from_seed;
use infosieve::diffcore::{grad_check, GradResult, Tensor};
use infosieve::losses::{binary_cond_value, loss_final, loss_length_value, LossParts, LossWeights};
use infosieve::runner::{
    ablate, batch_objective, kmeans_baseline, leave_one_out_rows, prepare, train, Model, ModelDims, RunConfig,
    RunResult, METRICS_FILE,
};
use infosieve::treelab::{is_valid_encoding, oracle_optimal_encoding, theorem_desk_check, Encoding, DEFAULT_MAX_N};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("{what} took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let dims = ModelDims {
        input_dim: 10,
        hidden: 16,
        feat_dim: 8,
        code_len: 8,
        head_hidden: 8,
        cat_hidden: 8,
        known_classes: 2,
    };
    let errors: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = rng_from_seed(seed);
            let model = Model::init(&dims, &mut rng).unwrap();
            let x1 = Tensor::from_fn(4, dims.input_dim, |_, _| rng.gen_range(-1.0..1.0));
            let x2 = Tensor::from_fn(4, dims.input_dim, |_, _| rng.gen_range(-1.0..1.0));
            let sup: Vec<Option<usize>> = (0..4).map(|_| rng.gen_bool(0.6).then(|| rng.gen_range(0..2))).collect();
            let pseudo: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
            let sched = TrainSchedule::at(rng.gen_range(0..60), 60, cfg.a_max);
            let f = |m: &Model| {
                let o = batch_objective(m, &cfg, x1.clone(), x2.clone(), &sup, &pseudo, &sched).unwrap();
                GradResult { loss: o.loss, grads: o.grads }
            };
            grad_check(f, &model, 1e-6)
        })
        .collect();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    within(start.elapsed(), 30, "gradient check")?;
    ensure(worst < 1e-4, || format!("max relative error {worst:.2e}"))?;
    Ok(format!("max relative error {worst:.2e} over 100 seeds in {:.1}s", start.elapsed().as_secs_f64()))
}

fn loss_oracles() -> Outcome {
    let mut rng = rng_from_seed(2);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    for trial in 0..1000 {
        let n = rng.gen_range(1..6);
        let l = rng.gen_range(1..13);
        let base: f64 = rng.gen_range(1.0..2.0);
        let p = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        let masks: Vec<Vec<f64>> = (0..n).map(|_| (0..l).map(|_| rng.gen::<f64>()).collect()).collect();
        let mut want = 0.0;
        for m in &masks {
            let mut s = 0.0;
            for (k, v) in m.iter().enumerate() {
                s += (v * base.powi(k as i32 + 1)).powf(p);
            }
            want += s.powf(1.0 / p);
        }
        want /= n as f64;
        let got = loss_length_value(&masks, base, p);
        ensure(close(got, want), || format!("length trial {trial}: {got} vs {want}"))?;

        let vals: Vec<f64> = (0..n * l).map(|_| rng.gen_range(-0.2..1.2)).collect();
        let want: f64 = vals.iter().map(|v| v * v * (1.0 - v) * (1.0 - v)).sum();
        let got = binary_cond_value(&Tensor::from_vec(n, l, vals).unwrap());
        ensure(close(got, want), || format!("condition trial {trial}: {got} vs {want}"))?;

        let soft: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mask: Vec<f64> = (0..l).map(|_| rng.gen()).collect();
        let mut want = 0.0;
        for k in 0..l {
            want += (soft[k] + 1.0) / 2.0 * mask[k] / base.powi(k as i32 + 1);
        }
        let got = positional_value(&BinaryCode::from_soft(soft), &MaskSequence::new(mask, base), base);
        ensure(close(got, want), || format!("positional trial {trial}: {got} vs {want}"))?;

        let v: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..5.0)).collect();
        let parts = LossParts {
            c_in_u: v[0],
            c_in_s: v[1],
            c_code_u: v[2],
            c_code_s: v[3],
            length: v[4],
            cat: v[5],
            code_cond: v[6],
            mask_cond: v[7],
        };
        let w = LossWeights {
            alpha: rng.gen(),
            beta: rng.gen(),
            delta: rng.gen(),
            gamma: rng.gen(),
            zeta: rng.gen(),
            mu: rng.gen(),
            lambda_in: rng.gen(),
            lambda_code: rng.gen(),
            ..LossWeights::default()
        };
        let want = w.alpha * ((1.0 - w.lambda_in) * v[0] + w.lambda_in * v[1])
            + w.beta * ((1.0 - w.lambda_code) * v[2] + w.lambda_code * v[3])
            + w.delta * v[4]
            + w.gamma * v[5]
            + w.zeta * v[6]
            + w.mu * v[7];
        let got = loss_final(&parts, &w).unwrap().total;
        ensure(close(got, want), || format!("loss_final trial {trial}: {got} vs {want}"))?;
    }

    // A binary mask whose last one sits further right always costs more
    // than any mask confined to earlier positions.
    let l = 12;
    for trial in 0..10_000 {
        let p = if trial % 2 == 0 { 1.0 } else { 2.0 };
        let k = rng.gen_range(1..=l);
        let mut later = vec![0.0; l];
        later[k - 1] = 1.0;
        for v in later.iter_mut().take(k - 1) {
            *v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        }
        let mut earlier = vec![0.0; l];
        for v in earlier.iter_mut().take(k - 1) {
            *v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        }
        let a = loss_length_value(&[later.clone()], 2.0, p);
        let full_prefix: Vec<f64> = (0..l).map(|i| if i < k - 1 { 1.0 } else { 0.0 }).collect();
        let b = loss_length_value(&[earlier.clone()], 2.0, p);
        let c = loss_length_value(&[full_prefix], 2.0, p);
        ensure(a > b && a > c, || format!("dominance trial {trial}: {later:?} vs {earlier:?}"))?;
    }
    Ok("1000 trials per formula within 1e-9; dominance on 10000 masks".into())
}

fn brute_force(cost: &[Vec<f64>], row: usize, used: &mut [bool]) -> f64 {
    if row == cost.len() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            best = best.min(cost[row][c] + brute_force(cost, row + 1, used));
            used[c] = false;
        }
    }
    best
}

fn hungarian_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(3);
    for trial in 0..1000 {
        let n = 1 + trial % 6;
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
        let got = hungarian(&cost).total;
        let want = brute_force(&cost, 0, &mut vec![false; n]);
        ensure((got - want).abs() < 1e-9, || format!("trial {trial}: {got} vs {want}"))?;
    }
    within(start.elapsed(), 10, "hungarian")?;
    Ok(format!("1000 matrices, n in 1..=6, {:.2}s", start.elapsed().as_secs_f64()))
}

fn semi_supervised_kmeans() -> Outcome {
    for seed in 0..100u64 {
        let mut rng = rng_from_seed(4000 + seed);
        let k = rng.gen_range(2..=5);
        let n = rng.gen_range(3 * k..60);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let labeled: Vec<Option<usize>> = (0..n).map(|_| rng.gen_bool(0.3).then(|| rng.gen_range(0..k))).collect();
        let r = ss_kmeans(&x, &labeled, k, seed, &KMeansOptions::default()).unwrap();
        for (i, l) in labeled.iter().enumerate() {
            ensure(l.map_or(true, |c| r.assign[i] == c), || format!("instance {seed}: labeled point {i} moved"))?;
        }
        for w in r.history.windows(2) {
            ensure(w[1] <= w[0] + 1e-12, || format!("instance {seed}: objective rose {} -> {}", w[0], w[1]))?;
        }

        let band = |sizes: Vec<usize>| {
            let ceil = n.div_ceil(k);
            sizes.iter().all(|&s| s + 1 >= ceil && s <= ceil + 1)
        };
        let b = balanced_kmeans(&x, k, seed, &KMeansOptions::default()).unwrap();
        ensure(band(b.sizes()), || format!("instance {seed}: balanced sizes {:?}", b.sizes()))?;
        let mut sparse = vec![None; n];
        sparse[0] = Some(0);
        sparse[1] = Some(k - 1);
        let sb = ss_kmeans_balanced(&x, &sparse, k, seed, &KMeansOptions::default()).unwrap();
        ensure(band(sb.sizes()), || format!("instance {seed}: balanced ss sizes {:?}", sb.sizes()))?;
        ensure(sb.assign[0] == 0 && sb.assign[1] == k - 1, || format!("instance {seed}: balanced ss moved a label"))?;
    }
    Ok("100 instances: labels pinned, objective nonincreasing, sizes in band".into())
}

fn tree_oracle() -> Outcome {
    let start = Instant::now();
    let labels = ["A", "A", "B", "B"];
    let r = oracle_optimal_encoding(&labels, DEFAULT_MAX_N).map_err(|e| e.to_string())?;
    ensure(r.min_total == 8, || format!("minimum total {}", r.min_total))?;
    ensure(r.category_prefixes.iter().all(|p| p.len() == 1), || {
        format!("prefixes {:?}", r.category_prefixes)
    })?;
    let depths = r.optima[0].length_multiset();
    ensure(r.optima.iter().all(|e| e.length_multiset() == depths), || "optima differ in depths".into())?;

    let mut rng = rng_from_seed(5);
    let mut valid = 0;
    for _ in 0..100_000 {
        let codes: Vec<String> = (0..4)
            .map(|_| (0..rng.gen_range(1..=5)).map(|_| if rng.gen_bool(0.5) { '1' } else { '0' }).collect())
            .collect();
        let e = Encoding::new(codes).unwrap();
        if is_valid_encoding(&e, &labels).valid {
            valid += 1;
            ensure(e.total_length() >= 8, || format!("sampled valid encoding shorter than 8: {e:?}"))?;
        }
    }
    ensure(valid > 0, || "random sampling found no valid encoding".into())?;

    let mut checked = 0;
    for inst in ["AABB", "ABCD", "AABBCC", "AAABBBCC", "AAAABBBB", "AABBCCDD", "ABCDEFG"] {
        let l: Vec<char> = inst.chars().collect();
        let c = theorem_desk_check(&l, DEFAULT_MAX_N).map_err(|e| e.to_string())?;
        ensure(c.sweep_min_total == c.oracle_min_total && c.optima_share_depths, || {
            format!("{inst}: {c:?}")
        })?;
        checked += c.valid_encodings;
    }
    within(start.elapsed(), 60, "tree oracle")?;
    Ok(format!(
        "total 8, prefixes of length 1, {valid} sampled valid encodings all >= 8, {checked} exhaustive encodings, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

/// The reference synthetic run shared by criteria 6-8.
struct Reference {
    result: RunResult,
    elapsed: Duration,
    baseline_all: f64,
    untrained_purity: f64,
}

fn reference_run() -> Reference {
    let cfg = RunConfig {
        deterministic: true,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let result = train(&cfg).expect("reference run");
    let elapsed = start.elapsed();
    let (ds, split) = prepare(&cfg).unwrap();
    let baseline_all = kmeans_baseline(&ds, &split, cfg.seed).unwrap().acc_all;
    let untrained = train(&RunConfig { n_epochs: 0, ..cfg }).unwrap();
    Reference {
        result,
        elapsed,
        baseline_all,
        untrained_purity: untrained.tree.mean_purity,
    }
}

fn binarization(r: &Reference) -> Outcome {
    let b = r.result.binarization;
    ensure(b < 0.01, || format!("mean v²(1−v)² = {b:.5}"))?;
    Ok(format!("mean v²(1−v)² = {b:.5}"))
}

fn discovery(r: &Reference) -> Outcome {
    let m = r.result.headline();
    let summary = format!(
        "code {} feature {} vs k-means all {:.1}, {:.1}s",
        m.triple(),
        r.result.metrics.feature.triple(),
        100.0 * r.baseline_all,
        r.elapsed.as_secs_f64()
    );
    ensure(m.acc_all >= 0.90, || format!("acc_all below 0.90: {summary}"))?;
    ensure(m.acc_novel >= 0.85, || format!("acc_novel below 0.85: {summary}"))?;
    ensure(m.acc_all > r.baseline_all, || format!("does not beat k-means: {summary}"))?;
    within(r.elapsed, 300, "reference run")?;
    Ok(summary)
}

fn tree_recovery(r: &Reference) -> Outcome {
    let p = r.result.tree.mean_purity;
    let summary = format!("trained purity {p:.3}, untrained {:.3}", r.untrained_purity);
    ensure(p >= 0.9, || summary.clone())?;
    ensure(r.untrained_purity <= 0.5, || summary.clone())?;
    Ok(summary)
}

fn ablation_shape() -> Outcome {
    let rep = ablate(&RunConfig::default(), &leave_one_out_rows(), &[0, 1, 2]).map_err(|e| e.to_string())?;
    let (full, full_sd) = rep.rows[0].acc_all();
    let mut notes = Vec::new();
    for row in &rep.rows[1..] {
        let (m, sd) = row.acc_all();
        notes.push(format!("{} {:.1}", row.name, 100.0 * m));
        let noise = full_sd.max(sd);
        ensure(full >= m - noise, || {
            format!("{} scores {:.1}±{:.1} above full {:.1}±{:.1}", row.name, 100.0 * m, 100.0 * sd, 100.0 * full, 100.0 * full_sd)
        })?;
    }
    Ok(format!("full {:.1}±{:.1}; {}", 100.0 * full, 100.0 * full_sd, notes.join(", ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        deterministic: true,
        eval_every: 10,
        out_dir: Some(dir.path().to_path_buf()),
        ..RunConfig::default()
    };
    train(&cfg).map_err(|e| e.to_string())?;
    let first = std::fs::read(dir.path().join(METRICS_FILE)).map_err(|e| e.to_string())?;
    train(&cfg).map_err(|e| e.to_string())?;
    let second = std::fs::read(dir.path().join(METRICS_FILE)).map_err(|e| e.to_string())?;
    ensure(first == second, || "metrics files differ".into())?;
    Ok(format!("{} identical bytes", first.len()))
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {n:>2} {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {n:>2} {name}: {detail}");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and similar probes expect no work.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    ok &= run(1, "gradient fidelity", gradient_fidelity);
    ok &= run(2, "loss formula oracles", loss_oracles);
    ok &= run(3, "hungarian correctness", hungarian_correctness);
    ok &= run(4, "semi-supervised k-means", semi_supervised_kmeans);
    ok &= run(5, "tree oracle", tree_oracle);
    let reference = catch_unwind(reference_run);
    match &reference {
        Ok(r) => {
            ok &= run(6, "binarization", || binarization(r));
            ok &= run(7, "end-to-end discovery", || discovery(r));
            ok &= run(8, "tree recovery", || tree_recovery(r));
        }
        Err(_) => {
            for (n, name) in [(6, "binarization"), (7, "end-to-end discovery"), (8, "tree recovery")] {
                ok &= run(n, name, || Err("reference run failed".into()));
            }
        }
    }
    ok &= run(9, "ablation shape", ablation_shape);
    ok &= run(10, "determinism", determinism);
    if !ok {
        std::process::exit(1);
    }
}
