//! Gittins indices and the exact dynamic program.

use metabayes::bayes_agent::gittins::GaussianGittinsTable;
use metabayes::bayes_agent::{
    argmax_low, gittins_index_bernoulli, gittins_index_gaussian, policy_value, GittinsBandit,
    GittinsConfig, QTable, SufficientStats,
};
use metabayes::task_env::suite::task_by_id;

fn with_horizon(h: usize) -> GittinsConfig {
    GittinsConfig {
        horizon: h,
        ..GittinsConfig::default()
    }
}

#[test]
fn doubling_the_calibration_horizon_leaves_indices_unchanged() {
    let (a, b) = (with_horizon(400), with_horizon(800));
    for (al, be) in [
        (1.0, 1.0),
        (2.0, 1.0),
        (1.0, 2.0),
        (0.5, 0.5),
        (7.0, 3.0),
        (1.0, 20.0),
    ] {
        let (x, y) = (
            gittins_index_bernoulli(al, be, &a).unwrap(),
            gittins_index_bernoulli(al, be, &b).unwrap(),
        );
        assert!((x - y).abs() <= a.tolerance, "Beta({al}, {be}): {x} vs {y}");
    }
    for n in [0.5, 2.0, 16.0] {
        let (x, y) = (
            gittins_index_gaussian(n, &a).unwrap(),
            gittins_index_gaussian(n, &b).unwrap(),
        );
        assert!((x - y).abs() <= 2.0 * a.tolerance, "n_eff {n}: {x} vs {y}");
    }
}

#[test]
fn bernoulli_index_matches_published_value() {
    // Uniform prior with discount 0.9: 0.7029 in the standard tables.
    let v = gittins_index_bernoulli(1.0, 1.0, &GittinsConfig::with_discount(0.9)).unwrap();
    assert!((v - 0.7029).abs() < 1e-4, "{v}");
}

#[test]
fn gaussian_index_is_stable_under_grid_refinement_and_non_increasing() {
    let coarse = GittinsConfig::default();
    let mut fine = coarse.clone();
    fine.gaussian.step /= 2.0;
    let (mut last_coarse, mut last_fine) = (f64::INFINITY, f64::INFINITY);
    for n in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let (x, y) = (
            gittins_index_gaussian(n, &coarse).unwrap(),
            gittins_index_gaussian(n, &fine).unwrap(),
        );
        assert!((x - y).abs() < 1e-3, "n_eff {n}: {x} vs {y}");
        assert!(
            x <= last_coarse && y <= last_fine,
            "index increases at n_eff {n}"
        );
        (last_coarse, last_fine) = (x, y);
    }
}

#[test]
fn gaussian_table_is_non_increasing_and_positive() {
    let t = GaussianGittinsTable::build(&GittinsConfig::default()).unwrap();
    assert!(t.nu.iter().all(|&v| v > 0.0));
    assert!(t.nu.windows(2).all(|w| w[1] <= w[0] + 1e-6));
}

#[test]
fn shifting_all_gaussian_means_preserves_the_choice() {
    let spec = task_by_id("bandit-gaussian-normal-0-1").unwrap();
    let g = GittinsBandit::new(&spec).unwrap();
    let tau = spec.known_precision.unwrap();
    let arms = [(0.1, 1.0), (-0.2, 3.0), (0.4, 8.0), (0.35, 2.0)];
    for &(m1, p1) in &arms {
        for &(m2, p2) in &arms {
            let idx = |shift: f64| {
                let s = |m: f64, p: f64| SufficientStats::Gaussian {
                    mean: m + shift,
                    precision: p,
                    tau,
                };
                [
                    g.index(0, &s(m1, p1)).unwrap(),
                    g.index(1, &s(m2, p2)).unwrap(),
                ]
            };
            let base = idx(0.0);
            for c in [-3.0, 0.7, 5.0] {
                let v = idx(c);
                assert!((v[0] - base[0] - c).abs() < 1e-12 && (v[1] - base[1] - c).abs() < 1e-12);
                if (base[0] - base[1]).abs() > 1e-9 {
                    assert_eq!(argmax_low(v), argmax_low(base));
                }
            }
        }
    }
}

#[test]
fn exact_tables_satisfy_bellman_and_bound_gittins() {
    for id in ["bandit-bernoulli-beta-1-1", "bandit-bernoulli-beta-2-1-1-2"] {
        let spec = task_by_id(id).unwrap();
        let q = QTable::build(&spec).unwrap();
        assert!(q.max_bellman_residual() < 1e-12, "{id}");
        let g = GittinsBandit::new(&spec).unwrap();
        let prior = |a: usize| spec.arm_prior(a).to_vec();
        let gittins = policy_value(&q, |c| {
            let s = |a: usize| SufficientStats::Bernoulli {
                alpha: prior(a)[0] + f64::from(c[2 * a]),
                beta: prior(a)[1] + f64::from(c[2 * a + 1]),
            };
            argmax_low([g.index(0, &s(0)).unwrap(), g.index(1, &s(1)).unwrap()])
        });
        let opt = q.optimal_return();
        assert!(
            gittins <= opt + 1e-12,
            "{id}: Gittins {gittins} beats DP {opt}"
        );
        assert!(opt - gittins < 0.01, "{id}: gap {}", opt - gittins);
    }
}
