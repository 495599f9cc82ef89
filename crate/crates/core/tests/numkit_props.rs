use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skillforge::numkit::{entropy, mlp_forward, mlp_gradient, softmax, MlpSpec};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mlp_case() -> impl Strategy<Value = (MlpSpec, u64, Vec<f64>, Vec<f64>)> {
    (
        1usize..5,
        prop::collection::vec(1usize..6, 0..3),
        1usize..4,
        any::<u64>(),
    )
        .prop_flat_map(|(input, hidden, output, seed)| {
            let spec = MlpSpec::new(input, &hidden, output);
            (
                Just(spec),
                Just(seed),
                prop::collection::vec(-2.0..2.0f64, input),
                prop::collection::vec(-1.0..1.0f64, output),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn backprop_matches_central_differences((spec, seed, x, og) in mlp_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec.init_params(&mut rng, 1.0);
        let analytic = mlp_gradient(&spec, &params, &x, &og).unwrap();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus.values_mut()[i] += h;
            let mut minus = params.clone();
            minus.values_mut()[i] -= h;
            let fp = dot(&mlp_forward(&spec, &plus, &x).unwrap(), &og);
            let fm = dot(&mlp_forward(&spec, &minus, &x).unwrap(), &og);
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.values()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            prop_assert!(rel <= 1e-4, "param {i}: analytic {a} numeric {numeric}");
        }
    }
}

proptest! {
    #[test]
    fn softmax_is_normalised_and_shift_invariant(
        logits in prop::collection::vec(-50.0..50.0f64, 1..20),
        shift in -100.0..100.0f64,
        t in 0.05..10.0f64,
    ) {
        let p = softmax(&logits, t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = logits.iter().copied().fold(f64::INFINITY, f64::min);
        if (max - min) / t < 700.0 {
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let q = softmax(&shifted, t).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let argmax = |v: &[f64]| {
            let mut best = 0;
            for (i, &x) in v.iter().enumerate() {
                if x > v[best] {
                    best = i;
                }
            }
            best
        };
        prop_assert_eq!(argmax(&logits), argmax(&p));
    }

    #[test]
    fn entropy_grows_with_temperature(logits in prop::collection::vec(-5.0..5.0f64, 2..12)) {
        let mut last = 0.0;
        for k in 0..60 {
            let t = 0.01 * 1.2f64.powi(k);
            let h = entropy(&softmax(&logits, t).unwrap()).unwrap();
            prop_assert!(h >= last - 1e-12, "T={t}: {h} < {last}");
            last = h;
        }
        prop_assert!(last <= (logits.len() as f64).ln() + 1e-12);
    }
}
