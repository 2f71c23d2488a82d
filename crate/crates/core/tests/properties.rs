use std::collections::HashSet;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srlinksim::analytic::cf::{cdf_gil_pelaez, ExpMixtureCf};
use srlinksim::analytic::pe::{ofsk_model, RateModel};
use srlinksim::analytic::rate::{sum_rate, SharedInterference};
use srlinksim::channel::draw;
use srlinksim::config::{min_subcarriers, validate, Modulation, Scheme, SnrReference, SystemConfig};
use srlinksim::detect::{detect_mfsk, detect_ofsk};
use srlinksim::ofdm::AllocationMap;

fn scheme_strategy() -> impl Strategy<Value = (Scheme, Modulation)> {
    prop_oneof![
        Just((Scheme::FullyOrthogonal, Modulation::Ofsk)),
        Just((Scheme::FullyOrthogonal, Modulation::Mfsk)),
        Just((Scheme::SemiOrthogonal, Modulation::Ofsk)),
        Just((Scheme::SemiOrthogonal, Modulation::Mfsk)),
    ]
}

fn spectrum(values: &[(f64, f64)]) -> Vec<Complex64> {
    values.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ofsk_decision_is_monotone_in_threshold(
        values in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 64),
        g1 in 0.0f64..20.0,
        dg in 0.0f64..20.0,
    ) {
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 2);
        let y = spectrum(&values);
        for dev in 1..=2 {
            let low = detect_ofsk(&y, &map, dev, g1, false);
            let high = detect_ofsk(&y, &map, dev, g1 + dg, false);
            prop_assert!(high <= low);
        }
    }

    #[test]
    fn mfsk_decision_is_scale_invariant(
        values in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 64),
        scale in 1e-3f64..1e3,
    ) {
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Mfsk, 64, 2);
        let y = spectrum(&values);
        let scaled: Vec<Complex64> = y.iter().map(|v| v * scale).collect();
        for dev in 1..=2 {
            prop_assert_eq!(detect_mfsk(&y, &map, dev, false), detect_mfsk(&scaled, &map, dev, false));
        }
    }

    #[test]
    fn cdf_is_monotone_and_bounded(
        terms in prop::collection::vec((0.01f64..2.0, 1u32..12), 1..4),
        a in 0.0f64..3.0,
        d in 0.0f64..3.0,
    ) {
        let cf = ExpMixtureCf::from_means(terms);
        let m = cf.mean();
        let lo = cdf_gil_pelaez(&cf, a * m).unwrap();
        let hi = cdf_gil_pelaez(&cf, (a + d) * m).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&lo));
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&hi));
        prop_assert!(hi >= lo - 1e-9);
    }

    #[test]
    fn allocation_roles_are_disjoint((scheme, modulation) in scheme_strategy(), p in 1usize..6, extra in 0usize..40) {
        let n = min_subcarriers(scheme, modulation, p) + extra;
        let map = AllocationMap::for_scheme(scheme, modulation, n, p);
        let data: HashSet<usize> = map.data.iter().copied().collect();
        prop_assert_eq!(data.len(), map.data.len());
        let mut nulls = HashSet::new();
        for dev in &map.nulls {
            for slot in dev {
                for &k in slot {
                    prop_assert!(k < n);
                    prop_assert!(!data.contains(&k), "null {} is a data bin", k);
                    prop_assert!(nulls.insert(k), "null {} assigned twice", k);
                }
            }
        }
        let mut shared = HashSet::new();
        for dev in &map.shared {
            for slot in dev {
                for &k in slot {
                    prop_assert!(!nulls.contains(&k));
                    prop_assert!(shared.insert(k), "shared {} owned twice", k);
                }
            }
        }
    }

    #[test]
    fn rate_terms_add_up((scheme, modulation) in scheme_strategy(), p in 1usize..5, seed in 0u64..1000, snr in -5.0f64..30.0) {
        let n = min_subcarriers(scheme, modulation, p).max(64);
        let cfg = validate(SystemConfig {
            scheme,
            modulation,
            n_subcarriers: n,
            snr_reference: SnrReference::Subcarrier,
            ..SystemConfig::default().with_devices(p, 0.5)
        }).unwrap();
        let map = AllocationMap::build(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = draw(&cfg.config().channel_profile, p, 0.0, &mut rng);
        let r = sum_rate(&map, &real, &cfg.config().alpha, cfg.noise_variance(snr), 15e3, SharedInterference::Direct);
        prop_assert!(r.r_bd >= 0.0 && r.r_primary >= 0.0);
        prop_assert!((r.r_total - (r.r_bd + r.r_primary)).abs() <= 1e-9 * r.r_total.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn false_alarm_falls_and_miss_rises_with_threshold(alpha in 0.2f64..1.0, snr in 0.0f64..25.0, q in 0.5f64..2.0) {
        let cfg = validate(SystemConfig::default().with_devices(1, alpha)).unwrap();
        let map = AllocationMap::build(&cfg);
        let model = ofsk_model(&cfg, &map, 1, false, cfg.noise_variance(snr), RateModel::Covariance);
        let g1 = q * model.mean_h1() * 0.5;
        let g2 = g1 * 1.3;
        let (m1, f1) = model.error_point(g1).unwrap();
        let (m2, f2) = model.error_point(g2).unwrap();
        prop_assert!(f2 <= f1 + 1e-9);
        prop_assert!(m2 >= m1 - 1e-9);
    }
}
