//! Cross-module invariants from the module contracts that don't fit a
//! single unit test: layer-level gradient sweeps, histogram MLE optimality,
//! weighted-training edge cases, ESS properties, and parallel-batch
//! determinism.

mod common;

use common::trapezoid_2d;
use lfi_core::abc::{ess_estimate, simulate_batch, WeightedPopulation};
use lfi_core::classic::{gaussian_mle_fit, histogram_fit};
use lfi_core::dataset::Dataset;
use lfi_core::flows::{train_mle, TrainConfig};
use lfi_core::mdn::MdnModel;
use lfi_core::num::{finite_diff_grad, Activation, MaskedLayer, Matrix, RngStream};
use lfi_core::sim::GaussianToy;

/// Layer gradients match finite differences to 1e-5 relative over 100
/// random configurations spanning every activation.
#[test]
fn layer_gradients_match_fd_on_100_random_configs() {
    let mut rng = RngStream::new(700, 0);
    for trial in 0..100 {
        let in_dim = 1 + trial % 4;
        let out_dim = 1 + (trial / 3) % 4;
        let activation = match trial % 3 {
            0 => Activation::Identity,
            1 => Activation::Tanh,
            _ => Activation::Relu,
        };
        let mut layer = MaskedLayer::dense(in_dim, out_dim, activation, &mut rng);
        for v in layer.weight.data_mut() {
            *v = rng.uniform_in(-1.0, 1.0);
        }
        for b in &mut layer.bias {
            *b = rng.uniform_in(-1.0, 1.0);
        }
        let mut mask = Matrix::zeros(out_dim, in_dim);
        for v in mask.data_mut() {
            *v = if rng.uniform() < 0.7 { 1.0 } else { 0.0 };
        }
        layer.mask = mask;
        let mut x = Matrix::zeros(3, in_dim);
        for v in x.data_mut() {
            // Stay away from the ReLU kink so central differences are exact.
            *v = rng.uniform_in(0.1, 1.0) * if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
        }

        let (out, pre) = layer.forward_cached(&x).unwrap();
        let ones = Matrix::from_vec(out.rows(), out.cols(), vec![1.0; out.data().len()]).unwrap();
        let (grads, _) = layer.backward(&x, &pre, &ones);

        let base = layer.clone();
        let mut w0 = Vec::new();
        base.read_params(&mut w0);
        let xc = x.clone();
        let mut f = |p: &[f64]| {
            let mut l = base.clone();
            l.write_params(&mut p.iter().cloned());
            l.forward(&xc).unwrap().data().iter().sum::<f64>()
        };
        let fd = finite_diff_grad(&mut f, &w0, 1e-5).unwrap();
        let mut analytic = Vec::new();
        MaskedLayer::read_grads(&grads, &mut analytic);
        for (i, (a, b)) in analytic.iter().zip(&fd).enumerate() {
            let rel = (a - b).abs() / (1.0 + a.abs().max(b.abs()));
            assert!(rel <= 1e-5, "trial {trial} param {i}: {a} vs {b}");
        }
    }
}

/// Output entry j is bit-invariant to input entry i whenever mask[j, i] = 0.
#[test]
fn masked_out_inputs_never_reach_outputs() {
    let mut rng = RngStream::new(701, 0);
    for _ in 0..50 {
        let mut layer = MaskedLayer::dense(4, 3, Activation::Tanh, &mut rng);
        let mut mask = Matrix::zeros(3, 4);
        for v in mask.data_mut() {
            *v = if rng.uniform() < 0.5 { 1.0 } else { 0.0 };
        }
        layer.mask = mask;
        let mut x = Matrix::zeros(1, 4);
        for v in x.data_mut() {
            *v = rng.normal();
        }
        let y0 = layer.forward(&x).unwrap();
        for i in 0..4 {
            let mut x2 = x.clone();
            x2.set(0, i, rng.normal() * 10.0);
            let y1 = layer.forward(&x2).unwrap();
            for j in 0..3 {
                if layer.mask.get(j, i) == 0.0 {
                    assert_eq!(
                        y0.get(0, j).to_bits(),
                        y1.get(0, j).to_bits(),
                        "masked input {i} leaked into output {j}"
                    );
                }
            }
        }
    }
}

/// Histogram densities maximize the training log likelihood subject to
/// Σ πₖ|Bₖ| = 1: perturbing any pair of bins along the constraint strictly
/// decreases the average training log likelihood.
#[test]
fn histogram_is_constrained_maximum_likelihood() {
    let mut rng = RngStream::new(702, 0);
    for _ in 0..20 {
        let edges = vec![vec![0.0, 0.3, 0.55, 1.0]];
        let n = 200;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            rows.push(vec![rng.uniform()]);
        }
        let data = Matrix::from_rows(&rows).unwrap();
        let model = histogram_fit(&data, &edges).unwrap();
        let avg_ll = |densities: &[f64]| -> f64 {
            let mut m = model.clone();
            m.densities = densities.to_vec();
            data.iter_rows().map(|r| m.log_prob(r)).sum::<f64>() / n as f64
        };
        let base = avg_ll(&model.densities);
        let volumes = [0.3, 0.25, 0.45];
        for _ in 0..10 {
            let i = rng.below(3);
            let mut j = rng.below(3);
            while j == i {
                j = rng.below(3);
            }
            // Move mass δ from bin j to bin i, preserving Σ π|B| = 1.
            let delta = rng.uniform_in(0.01, 0.1)
                * model.densities[j].min(model.densities[i]).max(0.05)
                * volumes[j];
            let mut perturbed = model.densities.clone();
            perturbed[i] += delta / volumes[i];
            perturbed[j] -= delta / volumes[j];
            if perturbed[j] < 0.0 {
                continue;
            }
            let ll = avg_ll(&perturbed);
            assert!(
                ll < base + 1e-12,
                "perturbation raised the training log likelihood: {ll} vs {base}"
            );
        }
    }
}

/// The fitted Gaussian integrates to 1 by quadrature in 2-D.
#[test]
fn gaussian_model_normalizes_by_quadrature() {
    let mut rng = RngStream::new(703, 0);
    let mut rows = Vec::with_capacity(500);
    for _ in 0..500 {
        let a = rng.normal();
        rows.push(vec![a, 0.6 * a + 0.8 * rng.normal()]);
    }
    let g = gaussian_mle_fit(&Matrix::from_rows(&rows).unwrap()).unwrap();
    let mut f = |x: f64, y: f64| g.log_prob(&[x, y]).exp();
    let mass = trapezoid_2d(&mut f, -10.0, 10.0, 500);
    assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
}

/// A row with weight zero cannot influence the weighted loss: perturbing
/// that row's target leaves the loss bit-identical.
#[test]
fn zero_weight_rows_do_not_affect_mdn_loss() {
    let mut rng = RngStream::new(704, 0);
    let model = MdnModel::new(1, 1, 2, &[8], &mut rng);
    let mut targets = Matrix::zeros(5, 1);
    let mut contexts = Matrix::zeros(5, 1);
    for v in targets.data_mut() {
        *v = rng.normal();
    }
    for v in contexts.data_mut() {
        *v = rng.normal();
    }
    let weights = [1.0, 1.0, 0.0, 1.0, 1.0];
    let l0 = model
        .nll(&targets, Some(&contexts), Some(&weights))
        .unwrap();
    let mut perturbed = targets.clone();
    perturbed.set(2, 0, 99.0);
    let l1 = model
        .nll(&perturbed, Some(&contexts), Some(&weights))
        .unwrap();
    assert_eq!(l0.to_bits(), l1.to_bits());

    // The gradient ignores the row too.
    let (_, g0) = model
        .nll_grad(&targets, Some(&contexts), Some(&weights))
        .unwrap();
    let (_, g1) = model
        .nll_grad(&perturbed, Some(&contexts), Some(&weights))
        .unwrap();
    assert_eq!(g0, g1);
}

/// Constant unit weights train identically to the unweighted path.
#[test]
fn mdn_unit_weights_match_unweighted_training() {
    let mut rng = RngStream::new(705, 0);
    let mut targets = Matrix::zeros(400, 1);
    let mut contexts = Matrix::zeros(400, 1);
    for i in 0..400 {
        let x = rng.normal();
        contexts.set(i, 0, x);
        targets.set(i, 0, 0.5 * x + 0.3 * rng.normal());
    }
    let data = Dataset::conditional(targets, contexts).unwrap();
    let mut cfg = TrainConfig {
        minibatch: 50,
        max_epochs: 15,
        patience: 5,
        validation_fraction: 0.15,
        ..Default::default()
    };
    cfg.adam.learning_rate = 0.02;
    let mut m1 = MdnModel::new(1, 1, 1, &[8], &mut RngStream::new(7, 7));
    let mut m2 = MdnModel::new(1, 1, 1, &[8], &mut RngStream::new(7, 7));
    train_mle(&mut m1, &data, None, &cfg, &mut RngStream::new(8, 8)).unwrap();
    let ones = vec![1.0; data.len()];
    train_mle(&mut m2, &data, Some(&ones), &cfg, &mut RngStream::new(8, 8)).unwrap();
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    m1.read_params(&mut p1);
    m2.read_params(&mut p2);
    assert_eq!(p1, p2);
}

/// K = 1 MDN with constant heads trained on x-independent Gaussian data
/// recovers the closed-form MLE mean within 2% at N = 10⁴.
#[test]
fn mdn_recovers_gaussian_mle_mean() {
    let mut rng = RngStream::new(706, 0);
    let (mu, sigma) = (2.0, 0.7);
    let n = 10_000;
    let mut targets = Matrix::zeros(n, 1);
    let mut contexts = Matrix::zeros(n, 1);
    for i in 0..n {
        targets.set(i, 0, mu + sigma * rng.normal());
        contexts.set(i, 0, rng.normal());
    }
    let mle_mean = gaussian_mle_fit(&targets).unwrap().mean()[0];
    let data = Dataset::conditional(targets, contexts).unwrap();
    // Constant heads: no trunk, and the head weights see raw x; training
    // drives them toward zero since θ is independent of x.
    let mut model = MdnModel::new(1, 1, 1, &[], &mut rng);
    let mut cfg = TrainConfig {
        minibatch: 100,
        max_epochs: 200,
        patience: 20,
        validation_fraction: 0.1,
        ..Default::default()
    };
    cfg.adam.learning_rate = 0.05;
    train_mle(&mut model, &data, None, &cfg, &mut rng).unwrap();
    let fitted = model.mixture_at(&[0.0]).unwrap().mean()[0];
    assert!(
        (fitted - mle_mean).abs() / mle_mean.abs() < 0.02,
        "fitted {fitted} vs mle {mle_mean}"
    );
}

/// ESS lies in [1, N] for any normalized weights and equals N only for
/// uniform ones.
#[test]
fn ess_bounds_hold_for_random_weights() {
    let mut rng = RngStream::new(707, 0);
    for _ in 0..500 {
        let n = 2 + rng.below(50);
        let weights: Vec<f64> = (0..n).map(|_| rng.uniform_open()).collect();
        let pop = WeightedPopulation::new(Matrix::zeros(n, 1), weights).unwrap();
        let ess = ess_estimate(&pop);
        assert!(
            ess >= 1.0 - 1e-12 && ess <= n as f64 + 1e-12,
            "ess {ess} outside [1, {n}]"
        );
        let uniform = pop
            .weights
            .iter()
            .all(|w| (w - 1.0 / n as f64).abs() < 1e-12);
        if (ess - n as f64).abs() < 1e-12 {
            assert!(uniform, "ess = N with non-uniform weights");
        }
    }
}

/// Batched simulation is a pure function of the parent stream: repeated
/// calls agree with each other and with a sequential slot-by-slot loop.
#[test]
fn simulate_batch_matches_sequential_slots() {
    let sim = GaussianToy::default();
    let mut thetas = Matrix::zeros(64, 1);
    for (i, v) in thetas.data_mut().iter_mut().enumerate() {
        *v = i as f64 * 0.01;
    }
    let base = RngStream::new(708, 5);
    let a = simulate_batch(&sim, &thetas, &mut base.clone()).unwrap();
    let b = simulate_batch(&sim, &thetas, &mut base.clone()).unwrap();
    assert_eq!(a.data(), b.data());

    // Manual sequential loop with the same derivation scheme.
    let mut parent = base.clone();
    let sub = parent.substream();
    for i in 0..64 {
        let mut slot = sub.derive(i as u64);
        let x = lfi_core::abc::Simulator::simulate(&sim, thetas.row(i), &mut slot);
        assert_eq!(a.row(i), &x[..]);
    }
}
