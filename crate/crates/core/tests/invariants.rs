//! Property tests over randomized shapes and values.

use proptest::prelude::*;

use groove::model::loss::groupclip_loss;
use groove::model::Kernel;
use groove::numerics::matrix::{pairwise_sq_dists, Matrix};
use groove::ot::{sinkhorn_cost, sinkhorn_eot, AlignSpec, AlignerKind};
use groove::RngStream;

fn embedding(seed: u64, n: usize, d: usize) -> Matrix {
    let mut rng = RngStream::new(seed);
    Matrix::from_fn(n, d, |_, _| rng.normal())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// GroupCLIP is nonnegative and zero when all labels agree.
    #[test]
    fn groupclip_nonnegative(seed in 0u64..1000, n1 in 3usize..10, n2 in 3usize..10, d in 2usize..6) {
        let z1 = embedding(seed, n1, d);
        let z2 = embedding(seed.wrapping_add(1), n2, d);
        let l1: Vec<usize> = (0..n1).map(|i| i % 2).collect();
        let l2: Vec<usize> = (0..n2).map(|i| (i + 1) % 2).collect();
        for kernel in [Kernel::Cosine, Kernel::TDist] {
            let loss = groupclip_loss(&z1, &z2, &l1, &l2, kernel, 0.2, 1.0).unwrap();
            prop_assert!(loss >= 0.0, "{kernel:?} loss {loss}");
        }
        let ones1 = vec![1usize; n1];
        let ones2 = vec![1usize; n2];
        for kernel in [Kernel::Cosine, Kernel::TDist] {
            let loss = groupclip_loss(&z1, &z2, &ones1, &ones2, kernel, 0.2, 1.0).unwrap();
            prop_assert_eq!(loss, 0.0);
        }
    }

    /// Permuting samples within a modality leaves the loss unchanged up
    /// to floating re-association.
    #[test]
    fn groupclip_permutation_invariant(seed in 0u64..1000, n in 4usize..12, d in 2usize..6) {
        let z1 = embedding(seed, n, d);
        let z2 = embedding(seed.wrapping_add(9), n, d);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let base = groupclip_loss(&z1, &z2, &labels, &labels, Kernel::Cosine, 0.2, 1.0).unwrap();
        let mut rng = RngStream::new(seed.wrapping_add(42));
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let z2p = z2.select_rows(&perm);
        let lp: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let permuted = groupclip_loss(&z1, &z2p, &labels, &lp, Kernel::Cosine, 0.2, 1.0).unwrap();
        prop_assert!((base - permuted).abs() <= 1e-9, "{base} vs {permuted}");
    }

    /// Rescaling embeddings by a positive scalar leaves the cosine-kernel
    /// loss unchanged.
    #[test]
    fn groupclip_cosine_scale_invariant(seed in 0u64..1000, scale in 0.05f64..50.0) {
        let n = 8;
        let z1 = embedding(seed, n, 4);
        let z2 = embedding(seed.wrapping_add(3), n, 4);
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let base = groupclip_loss(&z1, &z2, &labels, &labels, Kernel::Cosine, 0.2, 1.0).unwrap();
        let scaled = groupclip_loss(&z1.scale(scale), &z2, &labels, &labels, Kernel::Cosine, 0.2, 1.0).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9, "{base} vs {scaled}");
    }

    /// Sinkhorn plans are nonnegative, satisfy their marginals, and the
    /// per-iteration marginal violation never increases.
    #[test]
    fn sinkhorn_contract(seed in 0u64..1000, n1 in 2usize..20, n2 in 2usize..20) {
        let za = embedding(seed, n1, 3);
        let zb = embedding(seed.wrapping_add(5), n2, 3);
        let plan = sinkhorn_eot(&za, &zb, &AlignSpec::new(AlignerKind::Eot)).unwrap();
        prop_assert!(plan.coupling.data().iter().all(|&v| v >= 0.0));
        prop_assert!(plan.marginal_violation() < 1e-6);
        prop_assert!((plan.total_mass() - 1.0).abs() < 1e-8);

        let mut cost = pairwise_sq_dists(&za, &zb).unwrap();
        let mean = cost.mean();
        if mean > 0.0 {
            for v in cost.data_mut() {
                *v /= mean;
            }
        }
        let a = vec![1.0 / n1 as f64; n1];
        let b = vec![1.0 / n2 as f64; n2];
        let out = sinkhorn_cost(&cost, &a, &b, 0.05, 300, 1e-12).unwrap();
        for w in out.residual_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    /// Wasserstein distance between a set and itself is zero; always
    /// nonnegative.
    #[test]
    fn wasserstein_zero_iff_identical(seed in 0u64..1000, n in 1usize..30) {
        let mut rng = RngStream::new(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        prop_assert_eq!(groove::eval::wasserstein_1d(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        let w = groove::eval::wasserstein_1d(&a, &b);
        prop_assert!((w - 0.5).abs() < 1e-12);
    }
}
