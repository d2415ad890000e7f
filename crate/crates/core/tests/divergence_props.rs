use midiv_core::density::{fit_kde, GaussianComponent, Gmm};
use midiv_core::divergence::{bhattacharyya, ckl, gaussian_bhattacharyya, gaussian_kl, kl};
use midiv_core::{DensityModel, DivergenceSpec, Integrator, Kernel};
use proptest::prelude::*;

fn gaussian() -> impl Strategy<Value = (f64, f64)> {
    (-2.0f64..2.0, 0.5f64..3.0)
}

fn mixture() -> impl Strategy<Value = DensityModel> {
    prop::collection::vec((0.2f64..1.0, -3.0f64..3.0, 0.5f64..4.0), 1..4).prop_map(|parts| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let mut comps: Vec<GaussianComponent> = parts
            .iter()
            .map(|&(w, mean, variance)| GaussianComponent { weight: w / total, mean, variance })
            .collect();
        let s: f64 = comps.iter().map(|c| c.weight).sum();
        comps[0].weight += 1.0 - s;
        DensityModel::Gmm(Gmm::new(comps).unwrap())
    })
}

fn kde_model() -> impl Strategy<Value = DensityModel> {
    (prop::collection::vec(-6.0f64..6.0, 3..60), any::<bool>()).prop_map(|(xs, epan)| {
        let kernel = if epan { Kernel::Epanechnikov } else { Kernel::Gaussian };
        fit_kde(&xs, kernel, None).unwrap_or_else(|_| DensityModel::kde(kernel, 0.5, xs).unwrap())
    })
}

fn riemann(points: usize) -> DivergenceSpec {
    DivergenceSpec {
        grid_points: points,
        ..DivergenceSpec::default().with_integrator(Integrator::Riemann)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn matches_gaussian_closed_forms(p in gaussian(), q in gaussian()) {
        let (fp, fq) = (DensityModel::normal(p.0, p.1).unwrap(), DensityModel::normal(q.0, q.1).unwrap());
        // The ratio clip is lifted so the comparison sees the untruncated integrand.
        let spec = DivergenceSpec { ratio_clip: 1e300, ..riemann(10_000) };
        let k = kl(&fp, &fq, &spec, 0).unwrap().value;
        let b = bhattacharyya(&fp, &fq, &spec, 0).unwrap().value;
        let (k0, b0) = (gaussian_kl(p, q), gaussian_bhattacharyya(p, q));
        prop_assert!((k - k0).abs() <= 0.03 * k0 + 1e-9, "KL {k} vs {k0}");
        prop_assert!((b - b0).abs() <= 0.03 * b0 + 1e-9, "BH {b} vs {b0}");
    }

    #[test]
    fn integrators_agree(f in mixture(), g in mixture(), seed in any::<u64>()) {
        let grid = riemann(4096);
        let imp = DivergenceSpec { n_imp: 100_000, ..DivergenceSpec::default() };
        for (r, i) in [
            (kl(&f, &g, &grid, seed).unwrap().value, kl(&f, &g, &imp, seed).unwrap().value),
            (bhattacharyya(&f, &g, &grid, seed).unwrap().value, bhattacharyya(&f, &g, &imp, seed).unwrap().value),
        ] {
            prop_assert!((r - i).abs() < 0.02 + 0.02 * r.abs(), "riemann {r} vs importance {i}");
        }
    }

    #[test]
    fn estimates_are_non_negative_and_reproducible(f in kde_model(), g in kde_model(), seed in any::<u64>()) {
        let spec = DivergenceSpec::default();
        let k = kl(&f, &g, &spec, seed).unwrap();
        let b = bhattacharyya(&f, &g, &spec, seed).unwrap();
        prop_assert!(k.value >= -1e-6 && b.value >= -1e-6, "{} {}", k.value, b.value);
        prop_assert_eq!(k.value.to_bits(), kl(&f, &g, &spec, seed).unwrap().value.to_bits());
        prop_assert_eq!(b.value.to_bits(), bhattacharyya(&f, &g, &spec, seed).unwrap().value.to_bits());
        let c = ckl(&f, &g, &f, &spec, seed).unwrap();
        prop_assert_eq!(c.value.to_bits(), ckl(&f, &g, &f, &spec, seed).unwrap().value.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn ckl_with_equal_classes_is_kl(b in mixture(), p in mixture(), seed in any::<u64>()) {
        let spec = DivergenceSpec::default();
        let reps: Vec<f64> = (0..8).map(|s| kl(&b, &p, &spec, seed ^ s).unwrap().value).collect();
        let mean = reps.iter().sum::<f64>() / reps.len() as f64;
        let sd = (reps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
        let c = ckl(&b, &p, &p, &spec, seed).unwrap().value;
        let k = kl(&b, &p, &spec, seed).unwrap().value;
        prop_assert!((c - k).abs() <= 3.0 * std::f64::consts::SQRT_2 * sd + 1e-9, "cKL {c} vs KL {k} (sd {sd})");
    }
}
