mod common;

use common::{random_bumps, random_direction, rel, rng};
use sms_core::grid::{build_domain, inner_h1_eps, lp_pow_eps, DomainShape, Field};
use sms_core::{CgOptions, Params, Problem};

fn problem() -> Problem {
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let params = Params::new(0.4, 2.0, 1.5, 4.3, 1.0).unwrap();
    Problem::new(&grid, params, CgOptions { tol: 1e-13, ..Default::default() }).unwrap()
}

#[test]
fn sobolev_gradient_matches_central_difference() {
    let pb = problem();
    let mut rng = rng(11);
    for _ in 0..5 {
        let u = random_bumps(pb.grid(), &mut rng, 0.4);
        let phi = random_bumps(pb.grid(), &mut rng, 0.4);
        let g = pb.sobolev_gradient(&u).unwrap();
        let exact = pb.inner(&g, &phi).unwrap();
        let s = 1e-4;
        let e = |t: f64| pb.energy(&u.add_scaled(t, &phi).unwrap()).unwrap().total;
        let fd = (e(s) - e(-s)) / (2.0 * s);
        assert!(rel(fd, exact) <= 1e-5, "fd {fd} vs {exact}");
    }
}

#[test]
fn hessian_remainder_is_second_order() {
    let pb = problem();
    let mut rng = rng(12);
    let u = random_bumps(pb.grid(), &mut rng, 0.4);
    let phi = random_direction(pb.grid(), &mut rng).scaled(0.1);
    let g0 = pb.sobolev_gradient(&u).unwrap();
    let hphi = pb.hess_vec(&u, &phi).unwrap();
    let remainder = |s: f64| {
        let gs = pb.sobolev_gradient(&u.add_scaled(s, &phi).unwrap()).unwrap();
        let lin = g0.add_scaled(s, &hphi).unwrap();
        pb.norm(&gs.add_scaled(-1.0, &lin).unwrap()).unwrap()
    };
    let ratio = remainder(2e-2) / remainder(1e-2);
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn hessian_is_self_adjoint() {
    let pb = problem();
    let mut rng = rng(13);
    let u = random_bumps(pb.grid(), &mut rng, 0.4);
    let a = random_direction(pb.grid(), &mut rng);
    let b = random_direction(pb.grid(), &mut rng);
    let hab = pb.inner(&pb.hess_vec(&u, &a).unwrap(), &b).unwrap();
    let hba = pb.inner(&pb.hess_vec(&u, &b).unwrap(), &a).unwrap();
    assert!(rel(hab, hba) < 1e-9, "{hab} vs {hba}");
}

#[test]
fn energy_parts_follow_their_scaling_laws() {
    let pb = problem();
    let u = random_bumps(pb.grid(), &mut rng(14), 0.4);
    let e1 = pb.energy(&u).unwrap();
    let e2 = pb.energy(&u.scaled(2.0)).unwrap();
    assert!(rel(e2.kinetic, 4.0 * e1.kinetic) < 1e-12);
    assert!(rel(e2.coupling, 16.0 * e1.coupling) < 1e-9);
    assert!(rel(e2.potential, 2f64.powf(4.3) * e1.potential) < 1e-12);
    let total = e1.kinetic + e1.coupling - e1.potential;
    assert!(rel(e1.total, total) < 1e-12);
}

#[test]
fn scalars_agree_with_grid_quadratures() {
    let pb = problem();
    let u = random_bumps(pb.grid(), &mut rng(15), 0.4);
    let s = pb.scalars(&u).unwrap();
    let params = *pb.params();
    assert!(rel(s.a, inner_h1_eps(&u, &u, &params).unwrap()) < 1e-14);
    assert!(rel(s.b, lp_pow_eps(&u, params.p, params.eps, true)) < 1e-12);
    let psi = pb.psi(&u).unwrap();
    let g = pb.l2_eps(&u.map(|v| v * v), &psi);
    assert!(rel(s.g, g) < 1e-12);
}

#[test]
fn nehari_residual_is_derivative_along_the_ray() {
    let pb = problem();
    let u = random_bumps(pb.grid(), &mut rng(16), 0.4);
    let n = pb.nehari_residual(&u).unwrap();
    let g = pb.sobolev_gradient(&u).unwrap();
    assert!(rel(pb.inner(&g, &u).unwrap(), n) < 1e-9);
    assert!(pb.nehari_residual(&Field::zeros(pb.grid())).is_err());
}
