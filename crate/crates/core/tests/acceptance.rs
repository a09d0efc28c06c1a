//! Acceptance suite. Every test prints one `[PASS]` or `[FAIL]` line and
//! then asserts; tolerances and runtime budgets are fixed here.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use squintlab::analog::{assign_users, average_gain, conjugate_steering, gain_profile, Assignment};
use squintlab::channel::{complex_normal, path_length, user_position, UserGeometry, Waveband};
use squintlab::digital::{digital_power_budget, sum_rate, transmit_power, wmmse, WmmseConfig};
use squintlab::geometry::{
    feasible_translation_box, min_cross_tile_distance, nominal_layout, tile_pitch, wavelength, ArrayLayout,
    IntraTileLayout, PanelSpec, TranslationBox,
};
use squintlab::harness::cli_entry;
use squintlab::harness::config::ScenarioConfig;
use squintlab::harness::experiments::{max_gap, run_gain_vs_frequency, run_rate_vs_bandwidth};
use squintlab::layout::{
    concavify, max_eigenvalue_sym2, optimize_layout, solve_tile_subproblem, Halfspace, ScaConfig, SurrogateModel,
    SurrogateTerm, TileObjective,
};
use squintlab::pipeline::Scheme;

const FC: f64 = 100e9;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:02} {name}: {detail}");
}

fn check(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let in_time = elapsed <= budget;
    report(
        id,
        name,
        pass && in_time,
        format!("{detail}; {:.2}s of {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()),
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its runtime budget");
}

fn paper_user() -> UserGeometry {
    UserGeometry::new(5.0, PI / 3.0, PI / 6.0).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn min(g: &[f64]) -> f64 {
    g.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn ac01_geometry_consistency() {
    let start = Instant::now();
    let lambda = wavelength(FC);
    let mut worst_err: f64 = 0.0;
    let mut never_below = true;
    for s in [2, 3, 4] {
        let intra = IntraTileLayout::square(s, lambda / 2.0).unwrap();
        let pitch = tile_pitch(s, lambda);
        let mut smallest = f64::INFINITY;
        for k in 0..=3600 {
            let a = 2.0 * PI * k as f64 / 3600.0;
            let d = min_cross_tile_distance(&intra, &(pitch * Vector2::new(a.cos(), a.sin())));
            smallest = smallest.min(d);
        }
        worst_err = worst_err.max((smallest - lambda / 2.0).abs());
        never_below &= smallest >= lambda / 2.0 - 1e-12;
        let layout = nominal_layout(1, 1, 4, s * s, lambda).unwrap();
        for t in 0..4 {
            for u in 0..t {
                let sep = layout.translation(0, t) - layout.translation(0, u);
                never_below &= min_cross_tile_distance(&intra, &sep) >= lambda / 2.0 - 1e-12;
            }
        }
    }
    check(
        1,
        "geometry consistency",
        worst_err <= 1e-12 && never_below,
        format!("max |min distance - lambda/2| = {worst_err:.3e} m"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn ac02_channel_path_length() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let u = UserGeometry::new(
            rng.random_range(0.5..20.0),
            rng.random_range(-PI..PI),
            rng.random_range(-PI / 2.0..PI / 2.0),
        )
        .unwrap();
        let e = Vector2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let euclid = (user_position(&u) - Vector3::new(0.0, e.x, e.y)).norm();
        worst = worst.max((path_length(&e, &u) - euclid).abs() / euclid);
    }
    check(
        2,
        "channel path length",
        worst <= 1e-12,
        format!("max relative error {worst:.3e}"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

fn random_objective(rng: &mut ChaCha8Rng) -> (TileObjective, Vector2<f64>, usize) {
    let lambda = wavelength(FC);
    let u = UserGeometry::new(
        rng.random_range(2.0..15.0),
        rng.random_range(-PI / 3.0..PI / 3.0),
        rng.random_range(-PI / 3.0..PI / 3.0),
    )
    .unwrap();
    let s = rng.random_range(1..=3usize);
    let intra = IntraTileLayout::square(s, lambda / 2.0).unwrap();
    let center = Vector2::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
    let l = rng.random_range(1..=8usize);
    let omegas: Vec<f64> = (0..l)
        .map(|_| 2.0 * PI * rng.random_range(-15e9..15e9) / 299_792_458.0)
        .collect();
    let rest: Vec<Complex64> = (0..l)
        .map(|_| Complex64::from_polar(rng.random_range(0.0..60.0), rng.random_range(-PI..PI)))
        .collect();
    let obj = TileObjective::new(&u, center, intra.offsets().to_vec(), omegas, rest);
    let delta = Vector2::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
    (obj, delta, rng.random_range(0..l))
}

#[test]
fn ac03_derivative_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let (obj, x, l) = random_objective(&mut rng);
        let (_, g, h) = obj.derivatives(l, &x).unwrap();
        let q = |p: Vector2<f64>| obj.squared_gain(l, &p);
        let hg = 1e-7;
        let e = [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
        let g_fd = Vector2::new(
            (q(x + hg * e[0]) - q(x - hg * e[0])) / (2.0 * hg),
            (q(x + hg * e[1]) - q(x - hg * e[1])) / (2.0 * hg),
        );
        let hh = 1e-5;
        let mut h_fd = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                h_fd[(a, b)] = (q(x + hh * e[a] + hh * e[b]) - q(x + hh * e[a] - hh * e[b])
                    - q(x - hh * e[a] + hh * e[b])
                    + q(x - hh * e[a] - hh * e[b]))
                    / (4.0 * hh * hh);
            }
        }
        // Relative to the natural scale of each quantity: Q·ω and Q·ω².
        let qv = q(x).max(1.0);
        let omega = 2.0 * PI * 15e9 / 299_792_458.0;
        worst_g = worst_g.max((g - g_fd).norm() / g.norm().max(1e-3 * qv * omega));
        worst_h = worst_h.max((h - h_fd).norm() / h.norm().max(1e-3 * qv * omega * omega));
    }
    check(
        3,
        "derivative correctness",
        worst_g <= 1e-5 && worst_h <= 1e-4,
        format!("gradient rel err {worst_g:.3e}, Hessian rel err {worst_h:.3e}"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn ac04_surrogate_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tangent = true;
    let mut worst_concavity: f64 = 0.0;
    let mut top_eig = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let (obj, x0, l) = random_objective(&mut rng);
        let model = SurrogateModel::build(&obj, x0, &[l]).unwrap();
        let term = &model.terms[0];
        let (_, g, _) = obj.derivatives(l, &x0).unwrap();
        tangent &= term.eval(&x0, &x0) == obj.squared_gain(l, &x0) && term.gradient_at(&x0, &x0) == g;
        top_eig = top_eig.max(max_eigenvalue_sym2(&term.curvature));
        let x = x0 + Vector2::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
        let y = x0 + Vector2::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
        let t: f64 = rng.random_range(0.0..1.0);
        let mid = term.eval(&x0, &(t * x + (1.0 - t) * y));
        let chord = t * term.eval(&x0, &x) + (1.0 - t) * term.eval(&x0, &y);
        let scale = term.value.abs().max(1.0);
        worst_concavity = worst_concavity.max((chord - mid) / scale);
    }
    let pass = tangent && worst_concavity <= 1e-12 && top_eig <= 1e-12;
    check(
        4,
        "surrogate properties",
        pass,
        format!("tangency exact: {tangent}, worst concavity violation {worst_concavity:.3e}, max eigenvalue of U {top_eig:.3e}"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

struct Instance {
    model: SurrogateModel,
    bounds: TranslationBox,
    halfspaces: Vec<Halfspace>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let bounds = TranslationBox {
        lo: Vector2::new(-0.5, -0.5),
        hi: Vector2::new(0.5, 0.5),
    };
    let x0 = Vector2::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
    let terms = (0..rng.random_range(1..=6usize))
        .map(|l| {
            let a = Matrix2::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            SurrogateTerm {
                subcarrier: l,
                value: rng.random_range(1.0..2.0),
                gradient: Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                curvature: concavify(&(-(a * a.transpose()))),
            }
        })
        .collect();
    let halfspaces = (0..rng.random_range(0..=3usize))
        .map(|_| {
            let ang: f64 = rng.random_range(0.0..2.0 * PI);
            let normal = Vector2::new(ang.cos(), ang.sin());
            Halfspace {
                normal,
                offset: normal.dot(&x0) - rng.random_range(0.0..0.3),
            }
        })
        .collect();
    Instance {
        model: SurrogateModel { expansion: x0, terms },
        bounds,
        halfspaces,
    }
}

fn feasible(inst: &Instance, x: &Vector2<f64>) -> bool {
    inst.bounds.contains(x) && inst.halfspaces.iter().all(|h| h.margin(x) >= 0.0)
}

/// Grid search with step `width / 200` followed by a shrinking compass
/// search around the best grid point.
fn grid_oracle(inst: &Instance) -> f64 {
    let n = 200;
    let step = (inst.bounds.hi - inst.bounds.lo) / n as f64;
    let mut best = (f64::NEG_INFINITY, inst.model.expansion);
    for i in 0..=n {
        for j in 0..=n {
            let x = inst.bounds.lo + Vector2::new(step.x * i as f64, step.y * j as f64);
            if feasible(inst, &x) {
                let v = inst.model.min_value(&x);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
    }
    let x0 = inst.model.expansion;
    let v0 = inst.model.min_value(&x0);
    if v0 > best.0 {
        best = (v0, x0);
    }
    let mut h = step.x;
    while h > 1e-12 {
        let mut improved = false;
        for d in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let x = best.1 + h * Vector2::new(d.0, d.1);
            if feasible(inst, &x) {
                let v = inst.model.min_value(&x);
                if v > best.0 {
                    best = (v, x);
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best.0
}

#[test]
fn ac05_subproblem_optimality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut all_feasible = true;
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let sol = solve_tile_subproblem(&inst.model, &inst.bounds, &inst.halfspaces, 1e-6).unwrap();
        all_feasible &= inst.bounds.contains(&sol.delta) && inst.halfspaces.iter().all(|h| h.contains(&sol.delta));
        let oracle = grid_oracle(&inst);
        worst = worst.max((oracle - sol.value) / oracle.abs());
    }
    check(
        5,
        "subproblem optimality",
        worst <= 0.01 && all_feasible,
        format!("worst shortfall vs grid oracle {:.3e} (relative), solutions feasible: {all_feasible}", worst),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn ac06_algorithm_monotonicity_and_convergence() {
    let start = Instant::now();
    let band = Waveband::new(FC, 20e9, 64).unwrap();
    let users = [paper_user()];
    let cfg = ScaConfig::default();
    let mut pass = true;
    let mut details = Vec::new();
    for (n_t, n_e) in [(16, 4), (8, 16)] {
        let layout = nominal_layout(1, 1, n_t, n_e, wavelength(FC)).unwrap();
        let a = assign_users(&layout, &band, &users).unwrap();
        let (out, trace) = optimize_layout(&layout, &band, &users, &a, &cfg).unwrap();
        let accepted: Vec<f64> = trace.rows.iter().filter(|r| r.accepted).map(|r| r.min_j).collect();
        let monotone = accepted.windows(2).all(|w| w[1] >= w[0]);
        let budget = 1 + cfg.outer_sweeps * n_t * cfg.max_inner;
        let n_sub = (n_t * n_e) as f64;
        let fpa = average_gain(&layout, &band, &users[0], 0) / n_sub;
        let ma = average_gain(&out, &band, &users[0], 0) / n_sub;
        pass &= monotone && trace.rows.len() <= budget && ma > fpa;
        details.push(format!(
            "N_sub={}: monotone {monotone}, {} rows (budget {budget}), avg gain {fpa:.4} -> {ma:.4}",
            n_t * n_e,
            trace.rows.len()
        ));
    }
    check(
        6,
        "layout optimization monotone and convergent",
        pass,
        details.join("; "),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn ac07_tiny_instance_global_check() {
    let start = Instant::now();
    let lambda = wavelength(FC);
    let band = Waveband::new(FC, 20e9, 4).unwrap();
    let user = paper_user();
    let intra = IntraTileLayout::square(1, lambda / 2.0).unwrap();
    let side = 2.0 * 2f64.sqrt() * lambda;
    let panel = PanelSpec {
        m: 0,
        n: 0,
        center_yz: [0.0, 0.0],
        side,
    };
    let d_min = 2.0 * lambda;
    let layout = ArrayLayout::new(
        1,
        1,
        vec![panel],
        vec![vec![Vector2::new(-lambda, 0.0), Vector2::new(lambda, 0.0)]],
        intra,
        d_min,
    )
    .unwrap();
    let a = Assignment::new(vec![0], 1).unwrap();
    let (out, _) = optimize_layout(&layout, &band, &[user], &a, &ScaConfig::default()).unwrap();
    let alg = min(&gain_profile(&out, &band, &user, 0));
    let start_gain = min(&gain_profile(&layout, &band, &user, 0));

    let b = feasible_translation_box(&layout, 0, 0).unwrap();
    let n = 60;
    let pts: Vec<Vector2<f64>> = (0..=n)
        .flat_map(|i| {
            (0..=n).map(move |j| {
                b.lo + Vector2::new((b.hi.x - b.lo.x) * i as f64 / n as f64, (b.hi.y - b.lo.y) * j as f64 / n as f64)
            })
        })
        .collect();
    let omegas: Vec<f64> = band
        .frequencies()
        .iter()
        .map(|f| 2.0 * PI * (f - FC) / 299_792_458.0)
        .collect();
    let dist: Vec<f64> = pts.iter().map(|p| path_length(p, &user)).collect();
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in 0..i {
            if (pts[i] - pts[j]).norm() < d_min {
                continue;
            }
            let g = omegas
                .iter()
                .map(|w| (Complex64::from_polar(1.0, w * dist[i]) + Complex64::from_polar(1.0, w * dist[j])).norm())
                .fold(f64::INFINITY, f64::min);
            best = best.max(g);
        }
    }
    check(
        7,
        "tiny instance against exhaustive search",
        alg >= 0.98 * best,
        format!("start {start_gain:.5}, optimized {alg:.5}, grid optimum {best:.5}"),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

/// Zero forcing with water-filling over the per-user power costs.
fn zf_waterfilling_rate(h: &[DVector<Complex64>], power: f64, noise: f64) -> f64 {
    let hm = DMatrix::from_columns(h);
    let gram = hm.adjoint() * &hm;
    let v = &hm * gram.try_inverse().expect("full-rank channel");
    let cost: Vec<f64> = v.column_iter().map(|c| c.norm_squared()).collect();
    let alloc = |nu: f64| -> Vec<f64> { cost.iter().map(|c| (1.0 / (nu * c) - noise).max(0.0)).collect() };
    let used = |p: &[f64]| -> f64 { p.iter().zip(&cost).map(|(p, c)| p * c).sum() };
    let (mut lo, mut hi) = (1e-300f64, 1e300f64);
    for _ in 0..3000 {
        let mid = (lo * hi).sqrt();
        if used(&alloc(mid)) > power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    alloc(hi).iter().map(|p| (1.0 + p / noise).log2()).sum()
}

#[test]
fn ac08_wmmse() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = WmmseConfig::default();
    let mut worst_drop: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut worst_zf: f64 = f64::INFINITY;

    // Power on a real multi-panel analog precoder.
    let layout = nominal_layout(2, 2, 4, 4, wavelength(FC)).unwrap();
    let band = Waveband::new(FC, 20e9, 8).unwrap();
    let users: Vec<_> = (0..4)
        .map(|_| UserGeometry::new(rng.random_range(5.0..15.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap())
        .collect();
    let assignment = assign_users(&layout, &band, &users).unwrap();
    let analog = conjugate_steering(&layout, &band, &users, &assignment).unwrap();
    let p_t = 1.0;
    let mut worst_power: f64 = 0.0;
    for _ in 0..200 {
        let h: Vec<DVector<Complex64>> = (0..4)
            .map(|_| {
                let full: Vec<Complex64> = (0..layout.num_elements()).map(|_| complex_normal(&mut rng)).collect();
                DVector::from_vec(analog.project(&full).unwrap())
            })
            .collect();
        let power = digital_power_budget(p_t, layout.elements_per_panel());
        let out = wmmse(&h, power, 10f64.powf(-rng.random_range(-1.0..3.0)), &cfg);
        worst_drop = worst_drop.max(out.history.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max));
        worst_power = worst_power.max(transmit_power(&analog, &out.precoder) / p_t);
    }

    for _ in 0..200 {
        let h = vec![DVector::from_fn(4, |_, _| complex_normal(&mut rng))];
        let noise = 10f64.powf(-rng.random_range(-1.0..3.0));
        let out = wmmse(&h, 0.25, noise, &cfg);
        let expected = (1.0 + 0.25 * h[0].norm_squared() / noise).log2();
        worst_closed = worst_closed.max((sum_rate(&h, &out.precoder, noise) - expected).abs() / expected);
    }

    for _ in 0..200 {
        let h: Vec<_> = (0..2).map(|_| DVector::from_fn(2, |_, _| complex_normal(&mut rng))).collect();
        let noise = 10f64.powf(-rng.random_range(0.0..3.0));
        let out = wmmse(&h, 1.0, noise, &cfg);
        let zf = zf_waterfilling_rate(&h, 1.0, noise);
        worst_zf = worst_zf.min(sum_rate(&h, &out.precoder, noise) - zf);
    }
    let pass = worst_drop <= 1e-9 && worst_power <= 1.0 + 1e-9 && worst_closed <= 1e-9 && worst_zf >= 0.0;
    check(
        8,
        "WMMSE",
        pass,
        format!(
            "largest per-iteration drop {worst_drop:.3e}, max power/P_t {worst_power:.12}, single-user rel err {worst_closed:.3e}, min (WMMSE - ZF) {worst_zf:.3e}"
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

/// Largest `max_l |MA − TTD|` seen in the pinned single-user runs.
const MA_TTD_GAP_64: f64 = 0.09;
const MA_TTD_GAP_128: f64 = 0.02;

#[test]
fn ac09_squint_reproduction() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (file, threshold) in [("single_user.toml", MA_TTD_GAP_64), ("single_user_128.toml", MA_TTD_GAP_128)] {
        let cfg = ScenarioConfig::load(&configs_dir().join(file)).unwrap();
        let (c, _) = run_gain_vs_frequency(&cfg, dir.path()).unwrap();
        let l = c.fpa.len();
        let center = 0.5 * (c.fpa[l / 2 - 1] + c.fpa[l / 2]);
        let edge = c.fpa[0].min(c.fpa[l - 1]);
        let gap = max_gap(&c.ma, &c.ttd);
        let ok = edge < 0.9 * center && min(&c.ma) > min(&c.fpa) && min(&c.ttd) > min(&c.fpa) && gap <= threshold;
        pass &= ok;
        details.push(format!(
            "{file}: FPA edge/center {:.4}, min gain FPA {:.4} TTD {:.4} MA {:.4}, max MA-TTD gap {gap:.4} (limit {threshold})",
            edge / center,
            min(&c.fpa),
            min(&c.ttd),
            min(&c.ma)
        ));
    }
    check(9, "beam squint reproduction", pass, details.join("; "), start.elapsed(), Duration::from_secs(300));
}

#[test]
fn ac10_multi_user_ordering() {
    let start = Instant::now();
    let mut cfg = ScenarioConfig::load(&configs_dir().join("multi_user.toml")).unwrap();
    cfg.snr_db = 30.0;
    cfg.sweep.bandwidth = vec![20e9, 30e9];
    cfg.schemes = Scheme::ALL.to_vec();
    assert!(cfg.seeds.count >= 50 && cfg.num_users() == 4 && cfg.band.subcarriers == 64);
    let dir = tempfile::tempdir().unwrap();
    let (sweep, _) = run_rate_vs_bandwidth(&cfg, dir.path()).unwrap();
    let over_fpa_20 = sweep.compare(0, Scheme::HscHbf, Scheme::Fpa).unwrap();
    let over_ttd_20 = sweep.compare(0, Scheme::HscHbf, Scheme::FpaTtd).unwrap();
    let over_fpa_30 = sweep.compare(1, Scheme::HscHbf, Scheme::Fpa).unwrap();
    let pass = over_fpa_20.p_greater < 0.05 && over_ttd_20.p_less >= 0.05 && over_fpa_30.p_greater < 0.05;
    let m = |p, s| sweep.mean(p, s).unwrap();
    check(
        10,
        "multi-user ordering",
        pass,
        format!(
            "B=20 GHz means HSC {:.3} FPA {:.3} TTD {:.3}, p(HSC>FPA)={:.2e}, p(HSC<TTD)={:.3}; B=30 GHz means HSC {:.3} FPA {:.3}, p(HSC>FPA)={:.2e}",
            m(0, Scheme::HscHbf),
            m(0, Scheme::Fpa),
            m(0, Scheme::FpaTtd),
            over_fpa_20.p_greater,
            over_ttd_20.p_less,
            m(1, Scheme::HscHbf),
            m(1, Scheme::Fpa),
            over_fpa_30.p_greater
        ),
        start.elapsed(),
        Duration::from_secs(1800),
    );
}

#[test]
fn ac11_complexity_scaling() {
    let start = Instant::now();
    let layout = nominal_layout(1, 1, 16, 4, wavelength(FC)).unwrap();
    let users = [paper_user()];
    let cfg = ScaConfig::default();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in [32usize, 64, 128, 256] {
        let band = Waveband::new(FC, 20e9, l).unwrap();
        let a = assign_users(&layout, &band, &users).unwrap();
        let mut times: Vec<f64> = (0..7)
            .map(|_| {
                let t = Instant::now();
                let _ = optimize_layout(&layout, &band, &users, &a, &cfg).unwrap();
                t.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        xs.push((l as f64).ln());
        ys.push(times[times.len() / 2].ln());
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    check(
        11,
        "complexity scaling",
        slope <= 1.6,
        format!("log-log slope of wall time vs L = {slope:.3}"),
        start.elapsed(),
        Duration::from_secs(900),
    );
}

fn write_small_config(dir: &Path, name: &str, source: &str, seeds: usize) -> PathBuf {
    let mut cfg = ScenarioConfig::load(&configs_dir().join(source)).unwrap();
    cfg.seeds.count = seeds;
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    path
}

fn run_cli(cmd: &str, config: &Path, out: &Path, threads: usize) -> i32 {
    cli_entry([
        "squintlab",
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
        "--threads",
        &threads.to_string(),
    ])
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn ac12_determinism() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let single = write_small_config(tmp.path(), "single.json", "single_user.toml", 1);
    let multi = write_small_config(tmp.path(), "multi.json", "multi_user.toml", 4);
    let runs = [
        ("convergence", &single),
        ("gain-vs-freq", &single),
        ("optimize-layout", &multi),
        ("rate-vs-snr", &multi),
        ("rate-vs-bw", &multi),
    ];
    let mut pass = true;
    let mut compared = 0;
    for (cmd, cfg) in runs {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        pass &= run_cli(cmd, cfg, &a, 1) == 0 && run_cli(cmd, cfg, &b, 4) == 0;
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        compared += fa.len();
        pass &= !fa.is_empty() && fa == fb;
    }
    check(
        12,
        "determinism across thread counts",
        pass,
        format!("{compared} output files compared byte for byte"),
        start.elapsed(),
        Duration::from_secs(300),
    );
}
