use pgru_core::abundance::{fcls, residual_norm};
use pgru_core::features::{
    compute_features, compute_prior, dmp_feature, emp_feature, lbp_feature, standardize,
    FeatureConfig, K,
};
use pgru_core::io::{read_envi_cube, write_envi_cube};
use pgru_core::metrics::{coherence_rho, sad};
use pgru_core::models::{
    attention_weights, combined_residual, gbm_residual, hapke_residual, refl_to_ssa, ssa_to_refl,
    AttentionParams, GbmParams, HapkeGeometry, ResidualStack,
};
use pgru_core::synth::{generate_scene, Layout, SynthMechanism, SynthSpec};
use pgru_core::{Cube, EndmemberSet, MapF64};
use proptest::prelude::*;

fn cube_strategy() -> impl Strategy<Value = Cube> {
    (1usize..=8, 1usize..=8, 1usize..=16).prop_flat_map(|(r, c, b)| {
        prop::collection::vec(-0.05f32..=1.5f32, r * c * b)
            .prop_map(move |d| Cube::new(b, r, c, d, None).unwrap())
    })
}

fn endmembers(bands: usize, m: usize) -> impl Strategy<Value = EndmemberSet> {
    prop::collection::vec(prop::collection::vec(0.0f64..=1.0, bands), m)
        .prop_map(|s| EndmemberSet::unnamed(s).unwrap())
}

fn map_strategy(rows: usize, cols: usize) -> impl Strategy<Value = MapF64> {
    prop::collection::vec(0i32..20, rows * cols)
        .prop_map(move |v| MapF64::new(rows, cols, v.into_iter().map(f64::from).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envi_round_trip_is_bit_exact(cube in cube_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hdr");
        write_envi_cube(&cube, &path).unwrap();
        let back = read_envi_cube(&path).unwrap();
        prop_assert_eq!(back.data().len(), cube.data().len());
        for (a, b) in back.data().iter().zip(cube.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!((back.bands(), back.rows(), back.cols()), (cube.bands(), cube.rows(), cube.cols()));
    }

    #[test]
    fn fcls_is_feasible_and_beats_vertices(
        (e, y) in (2usize..=4, 3usize..=10).prop_flat_map(|(m, b)| (endmembers(b, m), prop::collection::vec(0.0f64..=1.0, b)))
    ) {
        let sol = fcls(&y, &e).unwrap();
        prop_assert!(sol.abundances.iter().all(|&a| a >= 0.0));
        prop_assert!((sol.abundances.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        let obj = residual_norm(&y, &e, &sol.abundances);
        for m in 0..e.count() {
            let mut v = vec![0.0; e.count()];
            v[m] = 1.0;
            prop_assert!(obj <= residual_norm(&y, &e, &v) + 1e-9);
        }
    }

    #[test]
    fn features_are_finite_and_prior_is_bounded(cube in (3usize..=7, 3usize..=7, 3usize..=12).prop_flat_map(|(r, c, b)| {
        prop::collection::vec(0.0f32..=1.0, r * c * b).prop_map(move |d| Cube::new(b, r, c, d, None).unwrap())
    })) {
        let raw = compute_features(&cube, &FeatureConfig::default()).unwrap();
        for k in 0..K {
            prop_assert!(raw.plane(k).iter().all(|v| v.is_finite()));
        }
        let prior = compute_prior(&raw);
        prop_assert!(prior.values().iter().all(|&p| (0.0..=1.0).contains(&p)));
        let once = standardize(&raw);
        let twice = standardize(&once);
        for k in 0..K {
            for (a, b) in once.plane(k).iter().zip(twice.plane(k)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lbp_ignores_monotone_affine_rescaling(map in map_strategy(6, 7), scale in 1i32..6, shift in -5i32..5) {
        let rescaled = MapF64::new(6, 7, map.values().iter().map(|v| f64::from(scale) * v + f64::from(shift)).collect()).unwrap();
        prop_assert_eq!(lbp_feature(&map).unwrap(), lbp_feature(&rescaled).unwrap());
    }

    #[test]
    fn morphology_features_follow_shifts(map in map_strategy(14, 14), dr in 0usize..3, dc in 0usize..3) {
        // Shift by (dr, dc) and compare interiors far enough from the borders.
        let n: usize = 14;
        let shifted: Vec<f64> = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                map.get(r.saturating_sub(dr), c.saturating_sub(dc))
            })
            .collect();
        let shifted = MapF64::new(n, n, shifted).unwrap();
        let scales = [1, 2];
        let margin = 2 * scales[1] + 1;
        for f in [emp_feature, dmp_feature] {
            let a = f(&map, &scales).unwrap();
            let b = f(&shifted, &scales).unwrap();
            for r in margin..n - margin - dr {
                for c in margin..n - margin - dc {
                    prop_assert_eq!(a.get(r, c), b.get(r + dr, c + dc));
                }
            }
        }
    }

    #[test]
    fn sad_is_symmetric_and_scale_free(
        (a, b) in (2usize..10).prop_flat_map(|n| (prop::collection::vec(0.01f64..1.0, n), prop::collection::vec(0.01f64..1.0, n))),
        k in 0.1f64..10.0,
    ) {
        let ab = sad(&a, &b).unwrap();
        prop_assert_eq!(ab, sad(&b, &a).unwrap());
        let scaled: Vec<f64> = a.iter().map(|v| k * v).collect();
        prop_assert!((sad(&scaled, &b).unwrap() - ab).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&ab));
    }

    #[test]
    fn rho_ignores_positive_affine_maps(
        pairs in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 9..30),
        k in 0.1f64..5.0,
        s in -3.0f64..3.0,
    ) {
        let n = pairs.len();
        let (xs, ds): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let xm = MapF64::new(1, n, xs.clone()).unwrap();
        let dm = MapF64::new(1, n, ds.clone()).unwrap();
        let rho = coherence_rho(&xm, &dm);
        prop_assume!(rho.is_ok());
        let rho = rho.unwrap();
        let xt = MapF64::new(1, n, xs.iter().map(|v| k * v + s).collect()).unwrap();
        let dt = MapF64::new(1, n, ds.iter().map(|v| k * v - s).collect()).unwrap();
        prop_assert!((coherence_rho(&xt, &dm).unwrap() - rho).abs() < 1e-9);
        prop_assert!((coherence_rho(&xm, &dt).unwrap() - rho).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&rho));
    }

    #[test]
    fn attention_stays_on_the_simplex(
        u in prop::collection::vec(-20.0f64..20.0, 3 * K),
        c in prop::collection::vec(-20.0f64..20.0, 3),
        f in prop::collection::vec(-5.0f64..5.0, K),
        tau in 1e-3f64..10.0,
    ) {
        let p = AttentionParams {
            u: std::array::from_fn(|k| std::array::from_fn(|j| u[k * K + j])),
            c: [c[0], c[1], c[2]],
            tau,
        };
        let f: [f64; K] = std::array::from_fn(|j| f[j]);
        let a = attention_weights(&f, &p);
        prop_assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn combined_residual_is_bandwise_convex(
        r in prop::collection::vec(-1.0f64..1.0, 15),
        w in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-6);
        let alpha = [w[0] / total, w[1] / total, 1.0 - w[0] / total - w[1] / total];
        prop_assume!(alpha[2] >= 0.0);
        let stack = ResidualStack::new([r[0..5].to_vec(), r[5..10].to_vec(), r[10..15].to_vec()], alpha).unwrap();
        let d = combined_residual(&stack);
        for b in 0..5 {
            let vals = [r[b], r[5 + b], r[10 + b]];
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(d[b] >= lo - 1e-12 && d[b] <= hi + 1e-12);
        }
    }

    #[test]
    fn pure_pixels_have_no_nonlinear_residual(e in endmembers(6, 3), m in 0usize..3) {
        let mut a = vec![0.0; 3];
        a[m] = 1.0;
        let g = GbmParams::from_gammas(&[0.3, 0.6, 0.9]).unwrap();
        prop_assert!(gbm_residual(&a, &e, &g).unwrap().iter().all(|&v| v == 0.0));
        let h = hapke_residual(&a, &e, &HapkeGeometry::default()).unwrap();
        prop_assert!(h.iter().all(|v| v.abs() < 1e-8), "{:?}", h);
    }

    #[test]
    fn hapke_round_trip(r in 0.0f64..1.0, mu0 in 0.05f64..=1.0, mu in 0.05f64..=1.0) {
        let g = HapkeGeometry::new(mu0, mu).unwrap();
        prop_assume!(r < g.max_reflectance() - 1e-6);
        let back = ssa_to_refl(refl_to_ssa(r, &g), &g).unwrap();
        prop_assert!((back - r).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_cubes_are_valid(
        rows in 2usize..8, cols in 2usize..8, bands in 3usize..20, m in 2usize..5,
        layout in prop::sample::select(vec![Layout::HalfSplit, Layout::Blocks, Layout::AllLinear, Layout::AllNonlinear]),
        mech in prop::sample::select(vec![
            SynthMechanism::Bilinear { gamma: 0.7 }, SynthMechanism::Ppnm { b: -0.4 }, SynthMechanism::Hapke,
        ]),
        noise in 0.0f64..0.05, seed in any::<u64>(),
    ) {
        let spec = SynthSpec { rows, cols, bands, endmembers: m, layout, mechanism: mech, noise, seed };
        let scene = generate_scene(&spec).unwrap();
        prop_assert!(scene.cube.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(scene.labels.iter().all(|&l| l <= 1));
        prop_assert_eq!(scene.labels.len(), rows * cols);
        for p in 0..rows * cols {
            let a = &scene.abundances[p * m..(p + 1) * m];
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert_eq!(scene.mechanisms[p].is_some(), scene.labels[p] == 1);
        }
    }

    #[test]
    fn noiseless_linear_pixels_lie_in_the_hull(seed in any::<u64>()) {
        let spec = SynthSpec {
            rows: 4, cols: 4, bands: 12, endmembers: 3,
            layout: Layout::AllLinear, mechanism: SynthMechanism::Hapke, noise: 0.0, seed,
        };
        let scene = generate_scene(&spec).unwrap();
        let y = scene.cube.pixel_matrix();
        for p in 0..16 {
            let sol = fcls(y.pixel(p), &scene.endmembers).unwrap();
            // f32 storage bounds how closely the spectrum matches E a.
            prop_assert!(residual_norm(y.pixel(p), &scene.endmembers, &sol.abundances) < 1e-6);
        }
    }
}
