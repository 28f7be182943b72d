mod common;

use common::{random_bumps, rel, rng};
use sms_core::grid::{build_domain, DomainShape, Field};
use sms_core::groundstate::shoot_ground_state;
use sms_core::nehari::{distinct_classes, project_t, retract_in, solve_critical_in, SolveStatus};
use sms_core::topo::photograph;
use sms_core::{CgOptions, DescentOptions, Params, Problem, SmsError};

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn closed_form_and_coupled_projection() {
    for (a, b, p) in [(1.0, 1.0, 5.0), (3.0, 0.5, 4.2), (0.2, 7.0, 5.9)] {
        let t = project_t(a, 0.0, b, p).unwrap();
        assert!(rel(t, (a / b).powf(1.0 / (p - 2.0))) <= 1e-12);
    }
    let t = project_t(1.0, 1.0, 1.0, 5.0).unwrap();
    let oracle = bisect(|t| 1.0 + t * t - t.powi(3), 1.0, 2.0);
    assert!((t - oracle).abs() <= 1e-9);
    assert!((t - 1.4655712).abs() <= 1e-7);
}

#[test]
fn projection_rejects_bad_input() {
    assert!(matches!(project_t(1.0, 0.0, 0.0, 5.0), Err(SmsError::ZeroPositivePart)));
    assert!(project_t(-1.0, 0.0, 1.0, 5.0).is_err());
    assert!(project_t(1.0, 0.0, 1.0, 3.5).is_err());
}

#[test]
fn retraction_lands_on_manifold_and_is_idempotent() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let params = Params::new(0.4, 2.0, 1.5, 4.3, 1.0).unwrap();
    let pb = Problem::new(&grid, params, CgOptions { tol: 1e-12, ..Default::default() }).unwrap();
    let mut rng = rng(21);
    for _ in 0..3 {
        let w = random_bumps(&grid, &mut rng, 0.4);
        let (u, t) = retract_in(&pb, &w).unwrap();
        assert!(t > 0.0);
        let a = pb.norm(&u).unwrap().powi(2);
        assert!(pb.nehari_residual(&u).unwrap().abs() <= 1e-9 * a);
        let (u2, t2) = retract_in(&pb, &u).unwrap();
        assert!((t2 - 1.0).abs() <= 1e-9);
        let diff = u.values().iter().zip(u2.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-9 * u.max_value());
        // energy on the manifold is the maximum along the ray
        let e = pb.energy(&u).unwrap().total;
        for s in [0.9, 1.1] {
            assert!(pb.energy(&u.scaled(s)).unwrap().total < e);
        }
    }
}

#[test]
fn retraction_of_nonpositive_field_fails() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let params = Params::new(0.4, 1.0, 1.0, 4.3, 1.0).unwrap();
    let pb = Problem::new(&grid, params, CgOptions::default()).unwrap();
    let w = Field::from_fn(&grid, |_| -1.0);
    assert!(matches!(retract_in(&pb, &w), Err(SmsError::ZeroPositivePart)));
}

#[test]
fn descent_converges_to_a_positive_critical_point() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let params = Params::new(0.5, 2.0, 1.5, 4.3, 0.8).unwrap();
    let pb = Problem::new(&grid, params, CgOptions { tol: 1e-11, ..Default::default() }).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let seed = photograph(&pb, &[0.1, 0.0, 0.0], &profile).unwrap();
    let report = solve_critical_in(&pb, &seed.field, &DescentOptions::default()).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    let unorm = pb.norm(report.field().unwrap()).unwrap();
    assert!(report.grad_norm <= 1e-6 * unorm.max(1.0));
    assert!(report.nehari_abs <= 1e-9 * report.norm_sq);
    assert!(report.min_value >= 0.0);
    assert!(report.ray_hessian < 0.0);
    assert!(report.energy.total <= pb.energy(&seed.field).unwrap().total);
    // energy decreases along the trace
    assert!(report.trace.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12));
    // a solution satisfies the equation: the gradient vanishes
    let g = pb.sobolev_gradient(report.field().unwrap()).unwrap();
    assert!(pb.norm(&g).unwrap() <= 1e-5 * unorm);
}

#[test]
fn quasi_newton_and_gradient_descent_agree() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let params = Params::new(0.5, 2.0, 1.5, 4.3, 0.8).unwrap();
    let pb = Problem::new(&grid, params, CgOptions { tol: 1e-11, ..Default::default() }).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let seed = photograph(&pb, &[0.1, 0.0, 0.0], &profile).unwrap();
    let tight = DescentOptions { tol: 1e-8, max_iter: 5000, ..Default::default() };
    let qn = solve_critical_in(&pb, &seed.field, &tight).unwrap();
    let gd = solve_critical_in(&pb, &seed.field, &DescentOptions { memory: 0, ..tight }).unwrap();
    assert!(qn.converged && gd.converged);
    assert!(qn.iterations <= gd.iterations);
    assert!((qn.energy.total - gd.energy.total).abs() <= 1e-9 * gd.energy.total.abs());
    let diff = qn.field().unwrap().add_scaled(-1.0, gd.field().unwrap()).unwrap();
    assert!(pb.norm(&diff).unwrap() <= 1e-5 * pb.norm(gd.field().unwrap()).unwrap());
}

#[test]
fn distinct_classes_merge_identical_reports() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.125, 3).unwrap();
    let params = Params::new(0.5, 1.0, 1.0, 4.3, 1.0).unwrap();
    let pb = Problem::new(&grid, params, CgOptions::default()).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let seed = photograph(&pb, &[0.0; 3], &profile).unwrap();
    let opts = DescentOptions { max_iter: 400, ..Default::default() };
    let a = solve_critical_in(&pb, &seed.field, &opts).unwrap();
    let b = solve_critical_in(&pb, &seed.field.scaled(1.02), &opts).unwrap();
    assert!(a.converged && b.converged);
    assert_eq!(distinct_classes(&[a, b], params.r).len(), 1);
}

#[test]
fn invalid_options_are_rejected() {
    let opts = DescentOptions { backtrack: 1.5, ..Default::default() };
    assert!(opts.validate().is_err());
}
