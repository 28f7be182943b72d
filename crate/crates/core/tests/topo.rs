mod common;

use common::rel;
use sms_core::grid::{build_domain, lp_pow_eps, DomainShape, Field};
use sms_core::groundstate::shoot_ground_state;
use sms_core::topo::{
    admissible_seeds, barycenter, concentration_fraction, good_partition, in_outer_set, is_admissible, photograph,
    sample_w, topology_catalog,
};
use sms_core::{CgOptions, Params, Problem, SmsError};

#[test]
fn sample_is_a_rescaled_truncated_profile() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.05, 3).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let params = Params::new(0.3, 1.0, 1.0, 4.3, 0.8).unwrap();
    let xi = [0.1, -0.05, 0.0];
    let w = sample_w(&xi, &profile, &params, &grid).unwrap();
    for (i, x) in grid.coords().enumerate() {
        let d = grid.distance(&x, &xi);
        if d <= 0.4 {
            assert!(rel(w.values()[i], profile.eval(d / 0.3)) < 1e-12);
        }
        if d >= 0.8 {
            assert_eq!(w.values()[i], 0.0);
        }
    }
}

#[test]
fn sample_preconditions() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let fine = Params::new(0.3, 1.0, 1.0, 4.3, 0.5).unwrap();
    assert!(matches!(sample_w(&[0.0; 3], &profile, &fine, &grid), Err(SmsError::EpsTooSmall { .. })));
    let params = Params::new(0.4, 1.0, 1.0, 4.3, 0.5).unwrap();
    assert!(!is_admissible(&grid, &[0.6, 0.0, 0.0], 0.5));
    assert!(matches!(sample_w(&[0.6, 0.0, 0.0], &profile, &params, &grid), Err(SmsError::NotAdmissible(_))));
    let planar = shoot_ground_state(4.3, 2, 1e-12).unwrap();
    assert!(sample_w(&[0.0; 3], &planar, &params, &grid).is_err());
}

#[test]
fn photograph_lies_on_the_manifold_near_the_limit_level() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.05, 3).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let params = Params::new(0.3, 1.0, 1.0, 4.3, 1.0).unwrap();
    let pb = Problem::new(&grid, params, CgOptions::default()).unwrap();
    let photo = photograph(&pb, &[0.0; 3], &profile).unwrap();
    let s = pb.scalars(&photo.field).unwrap();
    assert!(s.nehari(&params).abs() <= 1e-9 * s.a);
    assert!((photo.t - 1.0).abs() < 0.2);
    let ratio = pb.energy(&photo.field).unwrap().total / profile.m_inf;
    assert!(ratio > 0.9 && ratio < 1.3, "{ratio}");
}

#[test]
fn barycenter_follows_the_peak() {
    let grid = build_domain(&DomainShape::ball(1.0), 0.05, 3).unwrap();
    let profile = shoot_ground_state(4.3, 3, 1e-12).unwrap();
    let params = Params::new(0.2, 1.0, 1.0, 4.3, 0.4).unwrap();
    for xi in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1]] {
        let w = sample_w(&xi, &profile, &params, &grid).unwrap();
        let b = barycenter(&w, params.p).unwrap();
        // truncation is radial, the lattice offset is below a tenth of h
        assert!(grid.distance(&b, &xi) < 0.005, "{b:?} vs {xi:?}");
        assert!(in_outer_set(&b, &grid, params.r));
        assert!(concentration_fraction(&w, &b, 0.2, params.p).unwrap() > 0.99);
    }
    let neg = Field::from_fn(&grid, |_| -1.0);
    assert!(matches!(barycenter(&neg, 4.3), Err(SmsError::ZeroPositivePart)));
}

#[test]
fn partition_masses_add_up() {
    let grid = build_domain(&DomainShape::shell(0.2, 1.0), 0.04, 3).unwrap();
    let part = good_partition(&grid, 0.2).unwrap();
    let u = Field::from_fn(&grid, |x| 1.0 + x[0]);
    let total: f64 = part.cell_masses(&u, 4.3).iter().sum();
    assert!(rel(total, lp_pow_eps(&u, 4.3, 0.2, true)) < 1e-12);
    assert!(part.nu >= 1 && part.nu <= 8);
    assert!(part.r2 <= 0.2 * 3f64.sqrt() * 1.5);
    let mut nodes: Vec<usize> = part.cells.iter().flat_map(|c| c.nodes.clone()).collect();
    nodes.sort_unstable();
    nodes.dedup();
    assert_eq!(nodes.len(), grid.len());
    let mut csv = Vec::new();
    part.write_csv(&u, 4.3, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), part.cells.len() + 1);
}

#[test]
fn seeds_track_the_topology() {
    let shell = DomainShape::shell(0.2, 1.0);
    let seeds = admissible_seeds(&shell, 2).unwrap();
    assert_eq!(seeds.len(), 2);
    for s in &seeds {
        assert!(rel((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt(), 0.6) < 1e-12);
    }
    assert!(rel(seeds[0][0], -seeds[1][0]) < 1e-12);
    assert_eq!(admissible_seeds(&DomainShape::ball(1.0), 5).unwrap(), vec![[0.0; 3]]);
    assert_eq!(topology_catalog(&DomainShape::ball(1.0), 3).unwrap().cat, 1);
    assert_eq!(topology_catalog(&DomainShape::shell(0.2, 1.0), 2).unwrap().betti, vec![1, 1]);
}
