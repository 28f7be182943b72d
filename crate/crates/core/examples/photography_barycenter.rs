//! Photography Φ_ε(ξ) on a shell and the barycenter of the result.

use sms_core::grid::{build_domain, DomainShape};
use sms_core::groundstate::shoot_ground_state;
use sms_core::topo::{barycenter, concentration_fraction, inner_outer_membership, photograph};
use sms_core::{CgOptions, Params, Problem};

fn main() -> sms_core::Result<()> {
    let eps = 0.2;
    let grid = build_domain(&DomainShape::shell(0.2, 1.0), eps / 6.0, 3)?;
    let params = Params::new(eps, 3.0, 2.0, 4.3, 0.4)?;
    let pb = Problem::new(&grid, params, CgOptions::default())?;
    let profile = shoot_ground_state(params.p, 3, 1e-12)?;
    println!("nodes {}, m_inf {:.6}", grid.len(), profile.m_inf);
    for k in 0..4 {
        let th = std::f64::consts::FRAC_PI_2 * k as f64;
        let xi = [0.6 * th.cos(), 0.6 * th.sin(), 0.0];
        let photo = photograph(&pb, &xi, &profile)?;
        let beta = barycenter(&photo.field, params.p)?;
        println!(
            "xi = [{:+.3}, {:+.3}, {:+.3}]  t = {:.5}  I/m_inf = {:.5}  beta = [{:+.4}, {:+.4}, {:+.4}] {:?}  conc {:.4}",
            xi[0],
            xi[1],
            xi[2],
            photo.t,
            pb.energy(&photo.field)?.total / profile.m_inf,
            beta[0],
            beta[1],
            beta[2],
            inner_outer_membership(&beta, &grid, params.r),
            concentration_fraction(&photo.field, &beta, 0.5 * params.r, params.p)?,
        );
    }
    Ok(())
}
