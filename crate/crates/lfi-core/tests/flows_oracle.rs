//! Oracle-backed integration tests for the autoregressive flow stack:
//! trained-model recovery against closed-form MLE, sampling against
//! quadrature CDFs, Jacobians against finite differences, and the
//! density/sampling self-consistency checks.

mod common;

use common::{ks_distance, mean, trapezoid, variance};
use lfi_core::classic::gaussian_mle_fit;
use lfi_core::dataset::Dataset;
use lfi_core::flows::{train_mle, MadeNet, MafModel, TrainConfig, Trainable};
use lfi_core::num::{finite_diff_grad, logabsdet, Matrix, RngStream};

fn quick_train() -> TrainConfig {
    let mut cfg = TrainConfig {
        minibatch: 100,
        max_epochs: 200,
        patience: 15,
        validation_fraction: 0.15,
        ..Default::default()
    };
    cfg.adam.learning_rate = 0.02;
    cfg
}

/// Training a direct-parameterization MADE (D=1, no hidden layers) on
/// Gaussian data recovers β → μ and α → log σ.
#[test]
fn made_direct_parameterization_recovers_gaussian_mle() {
    let mut rng = RngStream::new(101, 0);
    let (mu, sigma) = (1.8, 0.6);
    let mut data = Matrix::zeros(10_000, 1);
    for v in data.data_mut() {
        *v = mu + sigma * rng.normal();
    }
    let mut model = MadeNet::new(1, 0, &[], vec![0], &mut rng);
    train_mle(
        &mut model,
        &Dataset::unconditional(data),
        None,
        &quick_train(),
        &mut rng,
    )
    .unwrap();
    // β and α are the output biases; read them through the parameter vector.
    let params = Trainable::params(&model);
    let beta = params[params.len() - 2];
    let alpha = params[params.len() - 1];
    assert!((beta - mu).abs() / mu < 0.05, "beta {beta} vs mu {mu}");
    assert!(
        (alpha - sigma.ln()).abs() / sigma.ln().abs() < 0.05,
        "alpha {alpha} vs ln sigma {}",
        sigma.ln()
    );
}

#[test]
fn zero_epochs_leaves_model_unchanged() {
    let mut rng = RngStream::new(102, 0);
    let mut model = MadeNet::new(2, 0, &[10], vec![0, 1], &mut rng);
    let before = Trainable::params(&model);
    let mut data = Matrix::zeros(500, 2);
    for v in data.data_mut() {
        *v = rng.normal();
    }
    let cfg = TrainConfig {
        max_epochs: 0,
        ..quick_train()
    };
    train_mle(
        &mut model,
        &Dataset::unconditional(data),
        None,
        &cfg,
        &mut rng,
    )
    .unwrap();
    assert_eq!(before, Trainable::params(&model));
}

/// On bimodal data a trained MADE beats the single-Gaussian MLE baseline in
/// held-out average log likelihood.
#[test]
fn made_beats_gaussian_baseline_on_mixture_data() {
    let mut rng = RngStream::new(103, 0);
    let draw = |rng: &mut RngStream| {
        if rng.uniform() < 0.5 {
            -2.0 + 0.4 * rng.normal()
        } else {
            2.0 + 0.4 * rng.normal()
        }
    };
    let mut train = Matrix::zeros(4000, 1);
    for v in train.data_mut() {
        *v = draw(&mut rng);
    }
    let mut test = Matrix::zeros(2000, 1);
    for v in test.data_mut() {
        *v = draw(&mut rng);
    }
    let mut model = MadeNet::new(1, 0, &[30], vec![0], &mut rng);
    train_mle(
        &mut model,
        &Dataset::unconditional(train.clone()),
        None,
        &quick_train(),
        &mut rng,
    )
    .unwrap();
    let made_ll: f64 = test
        .iter_rows()
        .map(|r| model.log_prob(r, &[]).unwrap().0)
        .sum::<f64>()
        / test.rows() as f64;
    let gauss = gaussian_mle_fit(&train).unwrap();
    let gauss_ll: f64 =
        test.iter_rows().map(|r| gauss.log_prob(r)).sum::<f64>() / test.rows() as f64;
    assert!(
        made_ll >= gauss_ll,
        "made {made_ll} should beat gaussian {gauss_ll}"
    );
}

/// 10⁵ samples from a trained 1-D model match the model's own quadrature
/// CDF within Kolmogorov-Smirnov distance 0.01.
#[test]
fn made_sampling_matches_quadrature_cdf() {
    let mut rng = RngStream::new(104, 0);
    let mut data = Matrix::zeros(4000, 1);
    for v in data.data_mut() {
        *v = 0.7 + 1.3 * rng.normal();
    }
    let mut model = MadeNet::new(1, 0, &[20], vec![0], &mut rng);
    train_mle(
        &mut model,
        &Dataset::unconditional(data),
        None,
        &quick_train(),
        &mut rng,
    )
    .unwrap();

    // Quadrature CDF on a fixed grid, interpolated.
    let (lo, hi, steps) = (-20.0, 20.0, 40_000);
    let h = (hi - lo) / steps as f64;
    let mut cdf_grid = vec![0.0; steps + 1];
    let mut acc = 0.0;
    let mut prev = model.log_prob(&[lo], &[]).unwrap().0.exp();
    for i in 1..=steps {
        let x = lo + i as f64 * h;
        let cur = model.log_prob(&[x], &[]).unwrap().0.exp();
        acc += 0.5 * (prev + cur) * h;
        cdf_grid[i] = acc;
        prev = cur;
    }
    let total = acc;
    let cdf = move |x: f64| -> f64 {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let pos = (x - lo) / h;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        (cdf_grid[i] * (1.0 - frac) + cdf_grid[(i + 1).min(steps)] * frac) / total
    };

    let samples = model.sample_n(100_000, None, &mut rng).unwrap();
    let mut xs: Vec<f64> = samples.data().to_vec();
    let d = ks_distance(&mut xs, &cdf);
    assert!(d < 0.01, "KS distance {d}");
}

/// Moments of 10⁵ samples from a MAF trained on N(3, 0.25).
#[test]
fn maf_trained_on_gaussian_recovers_moments() {
    let mut rng = RngStream::new(105, 0);
    let mut data = Matrix::zeros(5000, 1);
    for v in data.data_mut() {
        *v = 3.0 + 0.5 * rng.normal();
    }
    let mut model = MafModel::new(1, 0, 2, &[16], &mut rng);
    train_mle(
        &mut model,
        &Dataset::unconditional(data),
        None,
        &quick_train(),
        &mut rng,
    )
    .unwrap();
    let samples = model.sample_n(100_000, None, &mut rng).unwrap();
    let xs: Vec<f64> = samples.data().to_vec();
    assert!((mean(&xs) - 3.0).abs() < 0.05, "mean {}", mean(&xs));
    assert!((variance(&xs) - 0.25).abs() < 0.05, "var {}", variance(&xs));
}

/// log|det J| implied by the density matches the finite-difference Jacobian.
#[test]
fn maf_logdet_matches_numerical_jacobian() {
    let mut rng = RngStream::new(106, 0);
    for trial in 0..10 {
        let d = 2 + (trial % 3);
        let maf = MafModel::new(d, 0, 1 + trial % 3, &[12], &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
        let logp = maf.log_prob_one(&x, &[]).unwrap();
        let xm = Matrix::from_vec(1, d, x.clone()).unwrap();
        let u = maf.transform_to_noise(&xm, None).unwrap();
        let base: f64 = u
            .row(0)
            .iter()
            .map(|&z| lfi_core::num::std_normal_log_pdf(z))
            .sum();
        let analytic_logdet = logp - base;

        // Numerical Jacobian of x → u.
        let h = 1e-6;
        let mut jac = Matrix::zeros(d, d);
        for j in 0..d {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm2 = x.clone();
            xm2[j] -= h;
            let up = maf
                .transform_to_noise(&Matrix::from_vec(1, d, xp).unwrap(), None)
                .unwrap();
            let um = maf
                .transform_to_noise(&Matrix::from_vec(1, d, xm2).unwrap(), None)
                .unwrap();
            for i in 0..d {
                jac.set(i, j, (up.get(0, i) - um.get(0, i)) / (2.0 * h));
            }
        }
        let numeric_logdet = logabsdet(&jac);
        assert!(
            (analytic_logdet - numeric_logdet).abs() < 1e-4,
            "trial {trial}: {analytic_logdet} vs {numeric_logdet}"
        );
    }
}

/// Average log-prob of a model's own sample batch agrees with an estimate
/// from a second independent batch within 3 standard errors.
#[test]
fn sampling_density_self_consistency() {
    let mut rng = RngStream::new(107, 0);
    let model = MafModel::new(2, 0, 2, &[12], &mut rng);
    let n = 10_000;
    let batch1 = model.sample_n(n, None, &mut rng).unwrap();
    let batch2 = model.sample_n(n, None, &mut rng).unwrap();
    let lp = |batch: &Matrix| -> Vec<f64> { model.log_prob_batch(batch, None).unwrap() };
    let l1 = lp(&batch1);
    let l2 = lp(&batch2);
    let (m1, m2) = (mean(&l1), mean(&l2));
    let se = (variance(&l1) / n as f64).sqrt() + (variance(&l2) / n as f64).sqrt();
    assert!(
        (m1 - m2).abs() < 3.0 * se,
        "batch means {m1} vs {m2}, se {se}"
    );
}

/// Between-layer permutations do not change total probability mass.
#[test]
fn permutations_preserve_quadrature_mass() {
    let mut rng = RngStream::new(108, 0);
    let maf = MafModel::new(2, 0, 2, &[10], &mut rng);
    let layers = maf.layers().to_vec();
    let identity_perms = vec![vec![0usize, 1]; 2];
    let no_perm = MafModel::with_permutations(layers, identity_perms).unwrap();
    for model in [&maf, &no_perm] {
        let mut f = |x: f64, y: f64| model.log_prob_one(&[x, y], &[]).unwrap().exp();
        let mass = common::trapezoid_2d(&mut f, -10.0, 10.0, 500);
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }
}

/// Weighted training with all weights c = 1 matches unweighted exactly.
#[test]
fn unit_weights_match_unweighted_training() {
    let mut rng = RngStream::new(109, 0);
    let mut data = Matrix::zeros(600, 1);
    for v in data.data_mut() {
        *v = rng.normal() * 0.8 + 0.3;
    }
    let ds = Dataset::unconditional(data);
    let cfg = TrainConfig {
        max_epochs: 20,
        ..quick_train()
    };
    let mut m1 = MadeNet::new(1, 0, &[8], vec![0], &mut RngStream::new(9, 9));
    let mut m2 = MadeNet::new(1, 0, &[8], vec![0], &mut RngStream::new(9, 9));
    train_mle(&mut m1, &ds, None, &cfg, &mut RngStream::new(5, 5)).unwrap();
    let ones = vec![1.0; ds.len()];
    train_mle(&mut m2, &ds, Some(&ones), &cfg, &mut RngStream::new(5, 5)).unwrap();
    assert_eq!(Trainable::params(&m1), Trainable::params(&m2));
}

/// Divergent training (NaN validation loss) reports the epoch.
#[test]
fn divergence_is_reported_with_epoch() {
    let mut rng = RngStream::new(110, 0);
    let mut data = Matrix::zeros(300, 1);
    for v in data.data_mut() {
        *v = rng.normal();
    }
    let mut model = MadeNet::new(1, 0, &[8], vec![0], &mut rng);
    // A huge learning rate reliably blows the parameters up: the first step
    // lands at ±1e200, where the squared noise overflows to infinity.
    let mut cfg = quick_train();
    cfg.adam.learning_rate = 1e200;
    cfg.max_epochs = 50;
    let err = train_mle(
        &mut model,
        &Dataset::unconditional(data),
        None,
        &cfg,
        &mut rng,
    );
    match err {
        Err(lfi_core::Error::Training { .. }) => {}
        other => panic!("expected divergence error, got {other:?}"),
    }
}

/// The quadrature mass of a randomly initialized conditional MADE is 1 for
/// any context.
#[test]
fn conditional_made_normalizes_at_fixed_context() {
    let mut rng = RngStream::new(111, 0);
    let model = MadeNet::new(1, 2, &[10], vec![0], &mut rng);
    for ctx in [[0.0, 0.0], [1.5, -0.5]] {
        let ctx_m = Matrix::from_vec(1, 2, ctx.to_vec()).unwrap();
        let mut f = |x: f64| {
            let xm = Matrix::from_vec(1, 1, vec![x]).unwrap();
            model.log_prob_batch(&xm, Some(&ctx_m)).unwrap().0[0].exp()
        };
        let mass = trapezoid(&mut f, -14.0, 14.0, 14_000);
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass} at ctx {ctx:?}");
    }
}

/// Reverse-mode gradients match central finite differences on random small
/// models of every trainable family (spot check; the full 50-configuration
/// sweep runs in the acceptance suite).
#[test]
fn gradients_match_finite_differences_spot_check() {
    let mut rng = RngStream::new(112, 0);
    let mut x = Matrix::zeros(6, 2);
    for v in x.data_mut() {
        *v = rng.uniform_in(-1.0, 1.0);
    }
    let model = MafModel::new(2, 0, 2, &[6], &mut rng);
    let (_, grad) = model.nll_grad(&x, None, None).unwrap();
    let params = Trainable::params(&model);
    let mut f = |p: &[f64]| {
        let mut m = model.clone();
        Trainable::set_params(&mut m, p);
        m.nll(&x, None, None).unwrap()
    };
    let fd = finite_diff_grad(&mut f, &params, 1e-5).unwrap();
    for (i, (a, b)) in grad.iter().zip(&fd).enumerate() {
        assert!(
            (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs())),
            "param {i}: {a} vs {b}"
        );
    }
}
