//! Central-difference verification of the analytic gradients.

// index loops drive several parallel arrays throughout
#![allow(clippy::needless_range_loop)]

use ndarray::Array2;

use super::mlp::MlpNet;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters excluded because perturbing them moved some rectifier
    /// pre-activation across its kink.
    pub skipped_kinks: usize,
}

/// Full loss including the L2 term, dropout disabled.
fn loss(net: &MlpNet, x: &Array2<f64>, y: &Array2<f64>, l2: f64) -> f64 {
    let data = MlpNet::mse(&net.infer(x), y);
    let reg: f64 = net.params().iter().map(|p| p * p).sum::<f64>() * l2;
    data + reg
}

/// Compare analytic gradients of the regularized MSE loss against central
/// finite differences with the given step. Parameters whose perturbation
/// flips any hidden pre-activation sign are skipped: the loss is not
/// differentiable across a leaky-rectifier kink, so the comparison is
/// meaningless there.
pub fn gradient_check(
    net: &MlpNet,
    x: &Array2<f64>,
    y: &Array2<f64>,
    l2: f64,
    step: f64,
) -> GradCheckReport {
    let cache = net.forward(x, None);
    let mut analytic = net.backward(&cache, y);
    for (g, &p) in analytic.iter_mut().zip(net.params()) {
        *g += 2.0 * l2 * p;
    }

    let base_signs = net.activation_signs(x);
    let mut probe = net.clone();
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;

    for i in 0..net.param_count() {
        let original = net.params()[i];

        probe.params_mut()[i] = original + step;
        let plus = loss(&probe, x, y, l2);
        let plus_signs = probe.activation_signs(x);

        probe.params_mut()[i] = original - step;
        let minus = loss(&probe, x, y, l2);
        let minus_signs = probe.activation_signs(x);

        probe.params_mut()[i] = original;

        if plus_signs != base_signs || minus_signs != base_signs {
            skipped += 1;
            continue;
        }

        let fd = (plus - minus) / (2.0 * step);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
        let rel = (analytic[i] - fd).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
        checked += 1;
    }

    GradCheckReport { max_rel_error: max_rel, checked, skipped_kinks: skipped }
}
