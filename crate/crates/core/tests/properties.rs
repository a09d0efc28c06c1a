use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use squintlab::analog::{assign_users, conjugate_steering, gain_profile};
use squintlab::baselines::{branch_partition, ttd_precoder, TtdConfig};
use squintlab::channel::{complex_normal, path_length, user_position, UserGeometry, Waveband};
use squintlab::digital::{sinr, spectral_efficiency, transmit_power, wmmse, WmmseConfig};
use squintlab::geometry::{nominal_layout, validate_layout, wavelength};
use squintlab::layout::{
    linearized_spacing, near_worst_set, optimize_layout, solve_tile_subproblem, ScaConfig, SurrogateModel,
    ThresholdMode, TileObjective,
};

const FC: f64 = 100e9;

fn user_strategy() -> impl Strategy<Value = UserGeometry> {
    (1.0..20.0f64, -PI / 3.0..PI / 3.0, -PI / 3.0..PI / 3.0)
        .prop_map(|(r, a, e)| UserGeometry::new(r, a, e).unwrap())
}

fn channels(seed: u64, k: usize, n: usize) -> Vec<DVector<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| DVector::from_fn(n, |_, _| complex_normal(&mut rng))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_length_is_euclidean_and_positive(u in user_strategy(), y in -0.05..0.05f64, z in -0.05..0.05f64) {
        let e = Vector2::new(y, z);
        let d = path_length(&e, &u);
        let p = user_position(&u);
        let expected = ((p.x).powi(2) + (p.y - y).powi(2) + (p.z - z).powi(2)).sqrt();
        prop_assert!(d > 0.0);
        prop_assert!((d - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn nominal_layouts_validate(h in 1usize..3, v in 1usize..3, nt in 1usize..10, s in 1usize..4) {
        let layout = nominal_layout(h, v, nt, s * s, wavelength(FC)).unwrap();
        prop_assert!(validate_layout(&layout).is_ok());
        prop_assert_eq!(layout.num_elements(), h * v * nt * s * s);
    }

    #[test]
    fn analog_columns_have_unit_modulus(u in user_strategy(), nt in 1usize..9) {
        let layout = nominal_layout(1, 2, nt, 4, wavelength(FC)).unwrap();
        let band = Waveband::new(FC, 10e9, 8).unwrap();
        let users = [u];
        let a = assign_users(&layout, &band, &users).unwrap();
        let p = conjugate_steering(&layout, &band, &users, &a).unwrap();
        let dense_rows = p.to_dense();
        let dense = DMatrix::from_fn(layout.num_elements(), 2, |i, j| dense_rows[i][j]);
        let gram = dense.adjoint() * &dense;
        let n_sub = layout.elements_per_panel() as f64;
        prop_assert!((gram - DMatrix::identity(2, 2) * Complex64::from(n_sub)).norm() < 1e-9);
    }

    #[test]
    fn gain_never_exceeds_panel_size(u in user_strategy(), b in 0.0..30e9f64) {
        let layout = nominal_layout(1, 1, 16, 4, wavelength(FC)).unwrap();
        let band = Waveband::new(FC, b, 16).unwrap();
        for g in gain_profile(&layout, &band, &u, 0) {
            prop_assert!((0.0..=64.0 + 1e-9).contains(&g));
        }
    }

    #[test]
    fn near_worst_set_contains_argmin(g in prop::collection::vec(0.0..10.0f64, 1..40), eps in 0.0..1.0f64) {
        for mode in [ThresholdMode::Absolute, ThresholdMode::Relative] {
            let set = near_worst_set(&g, eps, mode);
            let argmin = (0..g.len()).min_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
            prop_assert!(set.contains(&argmin));
            prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn subproblem_solution_is_feasible_and_no_worse(seed in 0u64..10_000, u in user_strategy()) {
        let layout = nominal_layout(1, 1, 4, 4, wavelength(FC)).unwrap();
        let band = Waveband::new(FC, 20e9, 8).unwrap();
        let obj = TileObjective::from_layout(&layout, &band, &u, 0, (seed % 4) as usize);
        let tile = (seed % 4) as usize;
        let x0 = layout.translation(0, tile);
        let all: Vec<usize> = (0..8).collect();
        let model = SurrogateModel::build(&obj, x0, &all).unwrap();
        let bounds = squintlab::geometry::feasible_translation_box(&layout, 0, tile).unwrap().intersect_square(&x0, 0.01);
        let halfspaces: Vec<_> = (0..4)
            .filter(|&t| t != tile)
            .map(|t| linearized_spacing(&x0, &layout.translation(0, t), layout.d_min()).unwrap())
            .collect();
        let sol = solve_tile_subproblem(&model, &bounds, &halfspaces, 1e-6).unwrap();
        prop_assert!(bounds.contains(&sol.delta));
        prop_assert!(halfspaces.iter().all(|h| h.contains(&sol.delta)));
        prop_assert!(sol.value >= model.min_value(&x0) - 1e-9 * model.min_value(&x0).abs().max(1.0));
    }

    #[test]
    fn wmmse_respects_budget(seed in 0u64..10_000, k in 1usize..5, snr in -10.0..30.0f64) {
        let h = channels(seed, k, 4);
        let power = 0.5;
        let out = wmmse(&h, power, power / 10f64.powf(snr / 10.0), &WmmseConfig::default());
        prop_assert!(out.precoder.norm_squared() <= power * (1.0 + 1e-9));
        prop_assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn sinr_invariant_to_common_phase(seed in 0u64..10_000, phase in -PI..PI) {
        let h = channels(seed, 3, 4);
        let d = DMatrix::from_columns(&channels(seed + 1, 3, 4));
        let rotated = &d * Complex64::from_polar(1.0, phase);
        let a = sinr(&h, &d, 0.1);
        let b = sinr(&h, &rotated, 0.1);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn cyclic_prefix_scales_rate(g in prop::collection::vec(0.0..100.0f64, 4), l in 1usize..64) {
        let sinr = vec![g.clone(); l];
        let r = spectral_efficiency(&sinr, l, l / 8);
        let expected = r.cp_free / (l + l / 8) as f64;
        prop_assert!((r.total - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn branch_partition_is_balanced(tiles in 1usize..40, branches in 1usize..10) {
        let b = branch_partition(tiles, branches);
        prop_assert_eq!(b.len(), tiles);
        prop_assert!(b.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        let used = branches.min(tiles);
        let counts: Vec<usize> = (0..used).map(|g| b.iter().filter(|&&x| x == g).count()).collect();
        prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn zero_delay_ttd_equals_base(u in user_strategy(), offset in -10e9..10e9f64) {
        let layout = nominal_layout(1, 1, 8, 4, wavelength(FC)).unwrap();
        let band = Waveband::new(FC, 10e9, 4).unwrap();
        let users = [u];
        let a = assign_users(&layout, &band, &users).unwrap();
        let base = conjugate_steering(&layout, &band, &users, &a).unwrap();
        let out = ttd_precoder(&base, &layout, &[vec![0.0; 8]], &TtdConfig::default(), offset);
        prop_assert_eq!(out, base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimizer_is_monotone_and_feasible(u in user_strategy(), b in 1e9..30e9f64) {
        let layout = nominal_layout(1, 1, 4, 4, wavelength(FC)).unwrap();
        let band = Waveband::new(FC, b, 16).unwrap();
        let users = [u];
        let a = assign_users(&layout, &band, &users).unwrap();
        let (out, trace) = optimize_layout(&layout, &band, &users, &a, &ScaConfig::default()).unwrap();
        prop_assert!(validate_layout(&out).is_ok());
        let accepted: Vec<f64> = trace.rows.iter().filter(|r| r.accepted).map(|r| r.min_j).collect();
        prop_assert!(accepted.windows(2).all(|w| w[1] >= w[0]));
        let before = gain_profile(&layout, &band, &u, 0).into_iter().fold(f64::INFINITY, f64::min);
        let after = gain_profile(&out, &band, &u, 0).into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(after >= before * (1.0 - 1e-12));
    }

    #[test]
    fn digital_power_maps_to_total_power(seed in 0u64..1000) {
        let layout = nominal_layout(2, 1, 4, 4, wavelength(FC)).unwrap();
        let band = Waveband::new(FC, 10e9, 4).unwrap();
        let users = [UserGeometry::new(6.0, 0.3, 0.1).unwrap(), UserGeometry::new(9.0, -0.4, 0.2).unwrap()];
        let a = assign_users(&layout, &band, &users).unwrap();
        let p = conjugate_steering(&layout, &band, &users, &a).unwrap();
        let d = DMatrix::from_columns(&channels(seed, 2, 2));
        let dense_rows = p.to_dense();
        let dense = DMatrix::from_fn(layout.num_elements(), 2, |i, j| dense_rows[i][j]);
        let expected = (dense * &d).norm_squared();
        prop_assert!((transmit_power(&p, &d) - expected).abs() <= 1e-9 * expected);
    }
}
