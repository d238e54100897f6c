use super::{GradResult, Parameters};

/// Maximum relative disagreement between analytic gradients and central
/// differences, `|analytic − numeric| / max(1, |numeric|)`, over every
/// scalar parameter.
pub fn grad_check<P, F>(loss_fn: F, params: &P, eps: f64) -> f64
where
    P: Parameters + Clone,
    F: Fn(&P) -> GradResult<P>,
{
    assert!(eps > 0.0, "eps must be positive");
    let analytic = loss_fn(params).grads;
    let analytic: Vec<f64> = analytic
        .named_tensors()
        .iter()
        .flat_map(|(_, t)| t.data().to_vec())
        .collect();

    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut flat = 0usize;
    let n_tensors = probe.tensors_mut().len();
    for ti in 0..n_tensors {
        let len = probe.tensors_mut()[ti].len();
        for k in 0..len {
            let orig = probe.tensors_mut()[ti].data()[k];
            probe.tensors_mut()[ti].data_mut()[k] = orig + eps;
            let up = loss_fn(&probe).loss;
            probe.tensors_mut()[ti].data_mut()[k] = orig - eps;
            let down = loss_fn(&probe).loss;
            probe.tensors_mut()[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = (analytic[flat] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
            flat += 1;
        }
    }
    worst
}
