use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;

fn gauss1(m: f64, v: f64) -> AnalyticDensity {
    AnalyticDensity::gaussian_diagonal(vec![m], vec![v]).unwrap()
}

fn two_gaussians() -> (Vec<AnalyticDensity>, AnalyticMixture) {
    let c = vec![gauss1(-1.0, 0.5), gauss1(1.5, 1.0)];
    let mu = AnalyticMixture::new(c.clone(), SimplexWeights::new(vec![0.3, 0.7]).unwrap()).unwrap();
    (c, mu)
}

fn line() -> QuadratureGrid {
    QuadratureGrid::interval(-14.0, 14.0, 4001).unwrap()
}

#[test]
fn kl_of_identical_is_zero() {
    let (_, mu) = two_gaussians();
    assert!(quadrature_kl(&mu, &mu, &line()).unwrap().abs() <= 1e-10);
}

#[test]
fn kl_of_shifted_gaussians() {
    let g = QuadratureGrid::interval(-12.0, 13.0, 2001).unwrap();
    let kl = quadrature_kl(&gauss1(0.0, 1.0), &gauss1(1.0, 1.0), &g).unwrap();
    assert!((kl - 0.5).abs() <= 1e-6);
}

#[test]
fn kl_detects_absolute_continuity_violation() {
    struct Nowhere;
    impl LogDensity for Nowhere {
        fn ln_density(&self, _: &[f64]) -> f64 {
            f64::NEG_INFINITY
        }
    }
    assert!(matches!(
        quadrature_kl(&gauss1(0.0, 1.0), &Nowhere, &line()),
        Err(Error::AbsoluteContinuity { .. })
    ));
}

#[test]
fn gradient_is_constant_at_the_minimizer() {
    let (c, mu) = two_gaussians();
    let g = exact_gradient(&c, &mu, mu.weights(), &line()).unwrap();
    for v in &g {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
    let p = exp_gradient_step(mu.weights(), &g, 0.05).unwrap();
    assert!(p.sup_distance(mu.weights().as_slice()) < 1e-14);
}

#[test]
fn gradient_matches_finite_differences() {
    let (c, mu) = two_gaussians();
    let grid = line();
    let other = mu.with_weights(SimplexWeights::new(vec![0.6, 0.4]).unwrap()).unwrap();
    let p = [0.3, 0.7];
    let g = exact_gradient(&c, &other, &SimplexWeights::new(p.to_vec()).unwrap(), &grid).unwrap();
    let h = 1e-5;
    for k in 0..2 {
        let mut up = p;
        let mut down = p;
        up[k] += h;
        down[k] -= h;
        let fd = (objective(&c, &other, &up, &grid).unwrap() - objective(&c, &other, &down, &grid).unwrap()) / (2.0 * h);
        assert!(((fd - g[k]) / g[k]).abs() <= 1e-5, "k={k} fd={fd} exact={}", g[k]);
    }
}

#[test]
fn gradient_differences_survive_a_shared_gaussian_block() {
    // 1-D problem in x, then the same problem with an independent z ~ N(0.3, 0.8) block.
    let marg = vec![gauss1(-1.0, 0.5), gauss1(1.5, 1.0)];
    let mu_marg = AnalyticMixture::new(vec![gauss1(0.0, 1.5), gauss1(2.0, 0.4)], SimplexWeights::uniform(2)).unwrap();
    let lift = |m: f64, v: f64| AnalyticDensity::gaussian_diagonal(vec![m, 0.3], vec![v, 0.8]).unwrap();
    let full = vec![lift(-1.0, 0.5), lift(1.5, 1.0)];
    let mu_full = AnalyticMixture::new(vec![lift(0.0, 1.5), lift(2.0, 0.4)], SimplexWeights::uniform(2)).unwrap();
    let p = SimplexWeights::new(vec![0.35, 0.65]).unwrap();
    let g1 = exact_gradient(&marg, &mu_marg, &p, &QuadratureGrid::interval(-12.0, 12.0, 2001).unwrap()).unwrap();
    let grid2 = QuadratureGrid::rectangle((-12.0, 12.0), (-11.0, 11.0), 401).unwrap();
    let g2 = exact_gradient(&full, &mu_full, &p, &grid2).unwrap();
    assert!(((g1[0] - g1[1]) - (g2[0] - g2[1])).abs() < 1e-8);
}

#[test]
fn hessian_trivial_cases() {
    let (c, mu) = two_gaussians();
    assert_eq!(hessian_quadratic_form(&c, mu.weights(), &[0.0, 0.0], &line()).unwrap(), 0.0);
    let same = vec![gauss1(0.2, 0.7), gauss1(0.2, 0.7)];
    let v = hessian_quadratic_form(&same, &SimplexWeights::uniform(2), &[1.0, -1.0], &line()).unwrap();
    assert!(v.abs() <= 1e-10);
}

#[test]
fn hessian_matches_second_differences() {
    let (c, mu) = two_gaussians();
    let grid = line();
    let p = [0.4, 0.6];
    let u = [1.0, -1.0];
    let h = 1e-3;
    let j = |t: f64| objective(&c, &mu, &[p[0] + t * u[0], p[1] + t * u[1]], &grid).unwrap();
    let fd = (j(h) - 2.0 * j(0.0) + j(-h)) / (h * h);
    let exact = hessian_quadratic_form(&c, &SimplexWeights::new(p.to_vec()).unwrap(), &u, &grid).unwrap();
    assert!(((fd - exact) / exact).abs() <= 1e-4, "fd={fd} exact={exact}");
}

#[test]
fn exact_descent_fixed_point() {
    let (c, mu) = two_gaussians();
    let cfg = DescentConfig {
        iterations: 100,
        init: Init::Custom(mu.weights().clone()),
        ..DescentConfig::default()
    };
    let t = exact_descent(&c, &mu, &cfg, &line()).unwrap();
    for w in t.iterates.windows(2) {
        assert!(w[1].sup_distance(w[0].as_slice()) <= 1e-12);
    }
}

#[test]
fn exact_descent_decreases_and_converges() {
    let (c, mu) = two_gaussians();
    let grid = QuadratureGrid::interval(-14.0, 14.0, 1001).unwrap();
    let cfg = DescentConfig {
        step_size: 0.01,
        iterations: 200,
        init: Init::Custom(SimplexWeights::new(vec![0.9, 0.1]).unwrap()),
        ..DescentConfig::default()
    };
    let t = exact_descent(&c, &mu, &cfg, &grid).unwrap();
    let j: Vec<f64> = t.iterates.iter().map(|p| objective(&c, &mu, p.as_slice(), &grid).unwrap()).collect();
    for w in j.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
    let cfg = DescentConfig {
        step_size: 0.05,
        iterations: 2000,
        ..cfg
    };
    let t = exact_descent(&c, &mu, &cfg, &grid).unwrap();
    assert!(t.final_weights().sup_distance(mu.weights().as_slice()) <= 1e-4);
}

#[test]
fn disjoint_weights_examples() {
    let q = SimplexWeights::uniform(2);
    let t = DisjointSupportTruth::new(q.clone(), 0.0, vec![0.0, 0.0]).unwrap();
    assert_eq!(disjoint_asymptotic_weights(&t).unwrap(), q);
    let t = DisjointSupportTruth::new(q.clone(), 0.0, vec![0.0, 2f64.ln()]).unwrap();
    let p = disjoint_asymptotic_weights(&t).unwrap();
    assert_relative_eq!(p[0], 2.0 / 3.0, epsilon = 1e-15);
    assert_relative_eq!(p[1], 1.0 / 3.0, epsilon = 1e-15);
    let shifted = DisjointSupportTruth::new(q, 0.0, vec![5.0, 5.0 + 2f64.ln()]).unwrap();
    assert!(disjoint_asymptotic_weights(&shifted).unwrap().sup_distance(p.as_slice()) < 1e-15);
}

#[test]
fn disjoint_truth_from_quadrature_recovers_exact_case() {
    let c = vec![gauss1(-6.0, 0.5), gauss1(6.0, 0.5)];
    let mu = AnalyticMixture::new(c.clone(), SimplexWeights::new(vec![0.25, 0.75]).unwrap()).unwrap();
    let grid = QuadratureGrid::interval(-14.0, 14.0, 4001).unwrap();
    let truth = DisjointSupportTruth::from_quadrature(&mu, &c, |x| Some(usize::from(x[0] >= 0.0)), &grid).unwrap();
    assert!((truth.conditional_weights[0] - 0.25).abs() < 1e-12);
    assert!(truth.missing_mass < 1e-12);
    assert!(truth.kl_per_cluster.iter().all(|v| v.abs() < 1e-10));
    let p = disjoint_asymptotic_weights(&truth).unwrap();
    assert!(p.sup_distance(&[0.25, 0.75]) < 1e-10);
}

#[test]
fn double_well_symmetric_control_is_one_half() {
    let grid = double_well_default_grid(256).unwrap();
    let v = split_probability(&|x: f64, y: f64| x.powi(4) / 4.0 - x * x / 2.0 + y * y / 2.0, 1.0, &grid).unwrap();
    assert!((v - 0.5).abs() <= 1e-10, "{v}");
}

#[test]
fn double_well_reference_properties() {
    let g512 = double_well_default_grid(512).unwrap();
    let hot = double_well_reference(1.0, &g512).unwrap();
    let cold = double_well_reference(10.0, &g512).unwrap();
    assert!(cold < hot, "cold={cold} hot={hot}");
    let cold_fine = double_well_reference(10.0, &g512.refined()).unwrap();
    assert!(((cold_fine - cold) / cold).abs() <= 1e-6);
    for (beta, v) in [(1.0, hot), (10.0, cold)] {
        let alt = double_well_reference_1d(beta, (-4.0, 4.0), 4001).unwrap();
        assert!(((alt - v) / v).abs() < 1e-7, "beta={beta}: {alt} vs {v}");
    }
}

#[test]
fn double_well_rejects_small_box() {
    let g = QuadratureGrid::rectangle((-2.0, 2.0), (-4.0, 4.0), 128).unwrap();
    assert!(double_well_reference(1.0, &g).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kl_is_nonnegative(m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, v1 in 0.2f64..2.0, v2 in 0.2f64..2.0, a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let c = vec![gauss1(m1, v1), gauss1(m2, v2)];
        let rho = AnalyticMixture::new(c.clone(), SimplexWeights::new(vec![a, 1.0 - a]).unwrap()).unwrap();
        let mu = AnalyticMixture::new(c, SimplexWeights::new(vec![b, 1.0 - b]).unwrap()).unwrap();
        let grid = QuadratureGrid::interval(-20.0, 20.0, 801).unwrap();
        prop_assert!(quadrature_kl(&rho, &mu, &grid).unwrap() >= -1e-10);
    }

    #[test]
    fn hessian_is_nonnegative(a in 0.05f64..0.95, u0 in -3.0f64..3.0, u1 in -3.0f64..3.0) {
        let (c, _) = two_gaussians();
        let grid = QuadratureGrid::interval(-14.0, 14.0, 801).unwrap();
        let v = hessian_quadratic_form(&c, &SimplexWeights::new(vec![a, 1.0 - a]).unwrap(), &[u0, u1], &grid).unwrap();
        prop_assert!(v >= -1e-10);
        if u0.abs() + u1.abs() > 1e-3 {
            prop_assert!(v > 0.0);
        }
    }
}
