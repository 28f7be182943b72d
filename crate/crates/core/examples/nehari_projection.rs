//! Projection of rays onto the Nehari manifold.

use sms_core::grid::{build_domain, DomainShape, Field};
use sms_core::nehari::{project_t, retract_in};
use sms_core::{CgOptions, Params, Problem};

fn main() -> sms_core::Result<()> {
    // A + G t² = B t^{p−2}
    println!("uncoupled A=2, B=1, p=5: t = {:.12}", project_t(2.0, 0.0, 1.0, 5.0)?);
    println!("coupled A=G=B=1, p=5:    t = {:.12}", project_t(1.0, 1.0, 1.0, 5.0)?);

    let grid = build_domain(&DomainShape::ball(1.0), 0.1, 3)?;
    let params = Params::new(0.4, 3.0, 2.0, 4.3, 1.0)?;
    let pb = Problem::new(&grid, params, CgOptions::default())?;
    let w = Field::from_fn(&grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.1).exp());
    let (u, t) = retract_in(&pb, &w)?;
    println!("t_eps(w) = {t:.8}");
    println!("N_eps(t w) / |t w|^2 = {:.2e}", pb.nehari_residual(&u)? / pb.norm(&u)?.powi(2));
    for s in [0.5, 0.9, 1.0, 1.1, 1.5] {
        println!("  I(s t w) at s = {s}: {:.6}", pb.energy(&u.scaled(s))?.total);
    }
    Ok(())
}
