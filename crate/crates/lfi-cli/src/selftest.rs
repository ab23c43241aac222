//! Quick invariant suite behind `lfi selftest`: one line per check.

use lfi_core::abc::Simulator;
use lfi_core::abc::{ess_estimate, WeightedPopulation};
use lfi_core::flows::MafModel;
use lfi_core::gauss::{Gaussian, GaussianMixture};
use lfi_core::mdn::{snpea_correct, CorrectionPrior};
use lfi_core::num::{adam_step, finite_diff_grad, AdamConfig, AdamState, Matrix, RngStream};
use lfi_core::sim::GaussianToy;

pub fn run_selftest() -> i32 {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, name);
        if !ok {
            failures += 1;
        }
    };

    // Stream reproducibility.
    {
        let mut a = RngStream::new(11, 2);
        let mut b = RngStream::new(11, 2);
        check(
            "rng streams with equal keys repeat",
            (0..1000).all(|_| a.next_u64() == b.next_u64()),
        );
    }

    // Adam determinism and first-step size.
    {
        let state = AdamState::new(
            1,
            AdamConfig {
                learning_rate: 0.1,
                ..Default::default()
            },
        );
        let (_, p1) = adam_step(&state, &[0.0], &[1.0]).unwrap();
        let (_, p2) = adam_step(&state, &[0.0], &[1.0]).unwrap();
        check(
            "adam first step is -lr and deterministic",
            (p1[0] + 0.1).abs() < 1e-8 && p1 == p2,
        );
    }

    // MAF round trip and gradient against finite differences.
    {
        let mut rng = RngStream::new(21, 0);
        let maf = MafModel::new(2, 0, 2, &[8], &mut rng);
        let mut x = Matrix::zeros(20, 2);
        for v in x.data_mut() {
            *v = rng.normal();
        }
        let u = maf.transform_to_noise(&x, None).unwrap();
        let back = maf.transform_from_noise(&u, None).unwrap();
        let rt = back
            .data()
            .iter()
            .zip(x.data())
            .all(|(a, b)| (a - b).abs() < 1e-8);
        check("maf round trip exact to 1e-8", rt);

        let (_, grad) = maf.nll_grad(&x, None, None).unwrap();
        let mut params = Vec::new();
        maf.read_params(&mut params);
        let mut f = |p: &[f64]| {
            let mut m = maf.clone();
            m.write_params(&mut p.iter().cloned());
            m.nll(&x, None, None).unwrap()
        };
        let fd = finite_diff_grad(&mut f, &params, 1e-5).unwrap();
        let ok = grad
            .iter()
            .zip(&fd)
            .all(|(a, b)| (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs())));
        check("maf loss gradient matches finite differences", ok);
    }

    // Autoregressive property of the first MAF layer.
    {
        let mut rng = RngStream::new(22, 0);
        let maf = MafModel::new(3, 0, 1, &[10], &mut rng);
        let made = &maf.layers()[0];
        let x = Matrix::from_rows(&[vec![0.1, -0.5, 0.7]]).unwrap();
        let (b0, a0, _) = made.forward_params(&x, None).unwrap();
        let mut x2 = x.clone();
        x2.set(0, 2, 9.0);
        let (b1, a1, _) = made.forward_params(&x2, None).unwrap();
        check(
            "made outputs before a dimension ignore it",
            (0..2).all(|d| b0.get(0, d) == b1.get(0, d) && a0.get(0, d) == a1.get(0, d)),
        );
    }

    // Correction identity and the negative-definite detection.
    {
        let comp = Gaussian::new(vec![0.1], Matrix::from_vec(1, 1, vec![0.8]).unwrap()).unwrap();
        let q = GaussianMixture::new(vec![1.0], vec![comp]).unwrap();
        let p = Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let same = snpea_correct(&q, &p, CorrectionPrior::Gaussian(&p)).unwrap();
        check(
            "snpea correction with proposal = prior is the identity",
            (same.log_prob(&[0.3]) - q.log_prob(&[0.3])).abs() < 1e-9,
        );
        let narrow = Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![0.4]).unwrap()).unwrap();
        check(
            "snpea correction flags a narrower proposal",
            snpea_correct(&q, &narrow, CorrectionPrior::Uniform).is_err(),
        );
    }

    // Effective sample size edge cases.
    {
        let pop = |w: Vec<f64>| WeightedPopulation::new(Matrix::zeros(w.len(), 1), w).unwrap();
        check(
            "ess hits its edge cases exactly",
            (ess_estimate(&pop(vec![1.0; 7])) - 7.0).abs() < 1e-12
                && (ess_estimate(&pop(vec![0.0, 3.0])) - 1.0).abs() < 1e-12
                && (ess_estimate(&pop(vec![0.5, 0.5, 0.0])) - 2.0).abs() < 1e-12,
        );
    }

    // Conjugate oracle against quadrature.
    {
        let toy = GaussianToy::default();
        let post = toy.exact_posterior(&[1.0]).unwrap();
        check(
            "gaussian toy exact posterior is N(0.5, 0.5)",
            (post.mean()[0] - 0.5).abs() < 1e-12
                && (post.covariance().get(0, 0) - 0.5).abs() < 1e-12,
        );
    }

    // Simulator determinism.
    {
        let toy = GaussianToy::default();
        let a = toy.simulate(&[0.2], &mut RngStream::new(3, 4));
        let b = toy.simulate(&[0.2], &mut RngStream::new(3, 4));
        check("simulators are pure given (theta, stream)", a == b);
    }

    if failures == 0 {
        println!("selftest: all checks passed");
        0
    } else {
        println!("selftest: {failures} check(s) failed");
        1
    }
}
