use approx::assert_relative_eq;
use bsde_core::problem::{
    validate_moment_budget, validate_stepsize, BenchmarkId, BenchmarkProblem, Domain, GridSpec, MomentBudget,
};
use proptest::prelude::*;

#[test]
fn stepsize_examples() {
    let v = validate_stepsize(0.02, 1.0).unwrap();
    assert!(v.ok());
    assert_relative_eq!(v.bound, 1.0 / 12.0);
    assert_eq!(validate_stepsize(0.1, 1.0).unwrap().violation.unwrap().to_string(), "h ≥ 1/(12 L_f)");
    assert_eq!(validate_stepsize(0.05, 0.04).unwrap().violation.unwrap().to_string(), "h ≥ L_f");
    assert!(validate_stepsize(-0.1, 1.0).is_err());
    assert!(validate_stepsize(0.1, 0.0).is_err());
}

fn budget(d: usize, l_mu: f64, l_sigma: f64, l_f: f64, q1: f64, q2: f64, rho: f64) -> MomentBudget {
    MomentBudget { d, l_mu, l_sigma, l_f, q1, q2, rho }
}

#[test]
fn budget_examples() {
    let v = validate_moment_budget(&budget(1, 0.01, 0.01, 0.01, 64.0, 8.0, 5.0)).unwrap();
    assert!(!v.feasible);
    assert_relative_eq!(v.threshold(), 5.0688, epsilon = 1e-12);

    let v = validate_moment_budget(&budget(1, 0.0, 0.0, 0.01, 64.0, 8.0, 0.5)).unwrap();
    assert!(v.feasible);
    assert_eq!(v.diffusion_threshold, 0.0);
    assert_relative_eq!(v.generator_threshold, 0.32, epsilon = 1e-15);

    let v = validate_moment_budget(&budget(2, 0.5, 0.5, 1.0, 64.0, 8.0, 100.0)).unwrap();
    assert!(!v.feasible);
    assert_relative_eq!(v.diffusion_threshold, 6528.0, epsilon = 1e-9);
}

#[test]
fn analytic_values() {
    let b3 = BenchmarkProblem::new(BenchmarkId::B3).unwrap();
    assert_relative_eq!(b3.analytic_value(&[0.37]).unwrap(), 0.37);
    let b1 = BenchmarkProblem::new(BenchmarkId::B1 { lambda: 0.1, half_width: 1.0 }).unwrap();
    assert_relative_eq!(b1.analytic_value(&[0.0]).unwrap(), 0.1);
    let b4 = BenchmarkProblem::new(BenchmarkId::B4 { dim: 2, radius: 1.0 }).unwrap();
    assert_eq!(b4.analytic_value(&[1.0, 0.0]).unwrap(), 0.0);
    assert!(b3.analytic_value(&[1.5]).is_err());
    assert!(b4.analytic_value(&[0.9, 0.9]).is_err());
}

#[test]
fn catalog_ids() {
    for name in ["B1", "b2", "B3", "B4"] {
        let id = BenchmarkId::parse(name).unwrap();
        assert_eq!(id.label(), name.to_ascii_uppercase());
    }
    assert!(BenchmarkId::parse("B9").is_err());
}

#[test]
fn boundary_data_matches_solution_on_boundary() {
    let b1 = BenchmarkProblem::new(BenchmarkId::B1 { lambda: 0.1, half_width: 1.0 }).unwrap();
    assert!((b1.problem.boundary)(&[1.0]).abs() < 1e-15);
    assert!((b1.problem.boundary)(&[-1.0]).abs() < 1e-15);
    let b3 = BenchmarkProblem::new(BenchmarkId::B3).unwrap();
    assert_relative_eq!((b3.problem.boundary)(&[1.0]), 1.0);
    assert_relative_eq!((b3.problem.boundary)(&[-1.0]), -1.0);
}

#[test]
fn pde_residuals_vanish() {
    let ids = [
        BenchmarkId::B1 { lambda: 0.1, half_width: 1.0 },
        BenchmarkId::B2 { c: -0.5, a: 0.5, half_width: 1.0 },
        BenchmarkId::B3,
        BenchmarkId::B4 { dim: 2, radius: 1.0 },
        BenchmarkId::B4 { dim: 3, radius: 1.5 },
    ];
    for id in ids {
        let b = BenchmarkProblem::new(id).unwrap();
        let r = b.pde_residual(100, 1e-4, 7);
        assert!(r < 1e-6, "{id:?}: residual {r}");
    }
}

#[test]
fn grid_shape() {
    let g = GridSpec::new(0.25, 2.0).unwrap();
    assert_eq!(g.nodes(), 8);
    assert_eq!(g.time(3), 0.75);
    assert_relative_eq!(g.weight(1, 0.1), 1.0 / (1.0 - 0.075));
    assert!(GridSpec::new(0.3, 1.0).is_err());
    assert_eq!(GridSpec::covering(0.3, 1.0).unwrap().nodes(), 4);
}

#[test]
fn domains() {
    let d = Domain::interval(-1.0, 1.0);
    assert!(d.contains(&[0.999]));
    assert!(!d.contains(&[1.0]));
    assert!(Domain::interval(1.0, -1.0).validate().is_err());
    let b = Domain::ball(2, 1.0);
    assert!(b.contains(&[0.7, 0.7]));
    assert!(!b.contains(&[0.8, 0.7]));
    assert!(Domain::sup_ball(2, 1.0).contains(&[0.8, 0.7]));
}

proptest! {
    #[test]
    fn stepsize_monotone(h in 1e-4f64..1.0, frac in 0.01f64..1.0, l_f in 1e-3f64..20.0) {
        if validate_stepsize(h, l_f).unwrap().ok() {
            prop_assert!(validate_stepsize(h * frac, l_f).unwrap().ok());
        }
    }

    #[test]
    fn stepsize_verdict_matches_bound(h in 1e-4f64..1.0, l_f in 1e-3f64..20.0) {
        let v = validate_stepsize(h, l_f).unwrap();
        prop_assert_eq!(v.ok(), h < l_f.min(1.0 / (12.0 * l_f)));
    }

    #[test]
    fn budget_monotone(
        d in 1usize..4,
        l_mu in 0.0f64..1.0,
        l_sigma in 0.0f64..1.0,
        l_f in 0.0f64..1.0,
        q1 in 2.0f64..64.0,
        q2 in 2.0f64..64.0,
        rho in 1e-3f64..500.0,
        up in 1.0f64..3.0,
    ) {
        let base = budget(d, l_mu, l_sigma, l_f, q1, q2, rho);
        let ok = validate_moment_budget(&base).unwrap().feasible;
        let more_rho = validate_moment_budget(&MomentBudget { rho: rho * up, ..base }).unwrap().feasible;
        prop_assert!(!ok || more_rho);
        let worse = [
            MomentBudget { q1: q1 * up, ..base },
            MomentBudget { q2: q2 * up, ..base },
            MomentBudget { l_mu: l_mu * up, ..base },
            MomentBudget { l_sigma: l_sigma * up, ..base },
            MomentBudget { l_f: l_f * up, ..base },
        ];
        for w in worse {
            prop_assert!(ok || !validate_moment_budget(&w).unwrap().feasible);
        }
    }
}
