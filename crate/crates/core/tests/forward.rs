use coggen::forward::{
    add_awgn, apply_adjoint, apply_forward, gen_vd_mask, radial_distances, MaskPattern, MeasurementSet, SamplingMask,
};
use coggen::math::fft::{fft2, ifft2};
use coggen::spcl::normalized_residuals;
use coggen::{Complex64, ComplexGrid};
use proptest::prelude::*;

fn random_grid(h: usize, w: usize, values: &[(f64, f64)]) -> ComplexGrid {
    ComplexGrid::new(h, w, values.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
}

fn pair() -> impl Strategy<Value = (f64, f64)> {
    (-1.0f64..1.0, -1.0f64..1.0)
}

fn mask_strategy() -> impl Strategy<Value = SamplingMask> {
    (0u64..10_000, prop_oneof![Just(MaskPattern::Vd2d), Just(MaskPattern::Vd1dPe)], 2.0f64..6.0)
        .prop_map(|(seed, pattern, af)| gen_vd_mask(16, 16, pattern, af, 0.05, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn adjoint_identity(
        mask in mask_strategy(),
        x in prop::collection::vec(pair(), 256),
        y in prop::collection::vec(pair(), 256),
    ) {
        let x = random_grid(16, 16, &x);
        let ax = apply_forward(&mask, &x).unwrap();
        let y = MeasurementSet::new(
            mask.clone(),
            y.iter().take(mask.count()).map(|&(a, b)| Complex64::new(a, b)).collect(),
        ).unwrap();
        let lhs: Complex64 = ax.values.iter().zip(&y.values).map(|(a, b)| a.conj() * b).sum();
        let rhs = x.inner(&apply_adjoint(&mask, &y).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12 * x.norm() * y.norm());
        // Parseval restricted to the sampled bins.
        prop_assert!(ax.norm() <= x.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn normal_operator_is_an_orthogonal_projector(mask in mask_strategy(), x in prop::collection::vec(pair(), 256)) {
        let x = random_grid(16, 16, &x);
        let p = |g: &ComplexGrid| apply_adjoint(&mask, &apply_forward(&mask, g).unwrap()).unwrap();
        let px = p(&x);
        prop_assert!(p(&px).sub(&px).norm() <= 1e-12 * x.norm());
        // Centered position (r, c) holds the unshifted bin (r + 8, c + 8) mod 16.
        let mut k = fft2(&x).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                if !mask.is_selected(r, c) {
                    k.set((r + 8) % 16, (c + 8) % 16, Complex64::new(0.0, 0.0));
                }
            }
        }
        prop_assert!(ifft2(&k).unwrap().sub(&px).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn mask_invariants(seed in 0u64..100_000, af in 2.0f64..10.0) {
        let mask = gen_vd_mask(32, 32, MaskPattern::Vd2d, af, 0.04, seed).unwrap();
        prop_assert!((mask.achieved_af() / af - 1.0).abs() <= 0.05 || mask.count() == (1024.0 / af).round() as usize);
        prop_assert_eq!(&mask, &gen_vd_mask(32, 32, MaskPattern::Vd2d, af, 0.04, seed).unwrap());
        let radius = (0.04 * 1024.0 / std::f64::consts::PI).sqrt();
        let (cr, cc) = mask.center();
        for r in 0..32 {
            for c in 0..32 {
                let d = ((r as f64 - cr as f64).powi(2) + (c as f64 - cc as f64).powi(2)).sqrt();
                if d <= radius {
                    prop_assert!(mask.is_selected(r, c));
                }
            }
        }
        let dist = radial_distances(&mask);
        prop_assert_eq!(dist.distances.len(), mask.count());
        prop_assert!(dist.distances.iter().all(|&d| d >= 0.0 && d <= dist.max_distance));
    }

    #[test]
    fn phase_encode_masks_are_whole_columns(seed in 0u64..100_000, af in 2.0f64..8.0) {
        let mask = gen_vd_mask(16, 32, MaskPattern::Vd1dPe, af, 0.06, seed).unwrap();
        for c in 0..32 {
            let column: Vec<bool> = (0..16).map(|r| mask.is_selected(r, c)).collect();
            prop_assert!(column.iter().all(|&b| b == column[0]));
        }
    }

    #[test]
    fn residuals_are_scale_free(x in prop::collection::vec(pair(), 64), scale in 0.01f64..100.0) {
        let mask = SamplingMask::full(8, 8);
        let x = random_grid(8, 8, &x);
        let y = apply_forward(&mask, &x).unwrap();
        let pred = add_awgn(&y, 0.1, 3);
        let scaled = |m: &MeasurementSet| MeasurementSet::new(
            mask.clone(),
            m.values.iter().map(|v| v * scale).collect(),
        ).unwrap();
        let a = normalized_residuals(&pred, &y).unwrap();
        let b = normalized_residuals(&scaled(&pred), &scaled(&y)).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * p.max(1.0));
        }
    }
}

#[test]
fn awgn_sample_statistics() {
    let mask = SamplingMask::full(100, 100);
    let y = apply_forward(&mask, &ComplexGrid::zeros(100, 100)).unwrap();
    let noisy = add_awgn(&y, 0.01, 11);
    for part in [|z: &Complex64| z.re, |z: &Complex64| z.im] {
        let v: Vec<f64> = noisy.values.iter().map(part).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        assert!((0.0097..=0.0103).contains(&sd), "sd {sd}");
    }
    assert_eq!(add_awgn(&y, 0.0, 11), y);
}
