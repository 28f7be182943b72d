//! Lowest Hessian eigenvalues at the ball minimizer.

use sms_core::grid::{build_domain, DomainShape};
use sms_core::groundstate::shoot_ground_state;
use sms_core::morse::{lowest_spectrum_in, morse_consistency};
use sms_core::nehari::solve_critical_in;
use sms_core::topo::{photograph, topology_catalog};
use sms_core::{CgOptions, DescentOptions, Params, Preconditioner, Problem};

fn main() -> sms_core::Result<()> {
    let shape = DomainShape::ball(1.0);
    let grid = build_domain(&shape, 0.05, 3)?;
    let params = Params::new(0.3, 3.0, 2.0, 4.3, 1.0)?;
    let pb = Problem::new(&grid, params, CgOptions { preconditioner: Preconditioner::Ssor, ..Default::default() })?;
    let profile = shoot_ground_state(params.p, 3, 1e-12)?;
    let seed = photograph(&pb, &[0.0; 3], &profile)?;
    let report = solve_critical_in(&pb, &seed.field, &DescentOptions::default())?;
    let spec = lowest_spectrum_in(&pb, report.field().expect("field"), 6, 1e-6)?;
    println!("converged {:?} in {} iterations, I/m_inf = {:.5}", report.status, report.iterations, report.energy.total / profile.m_inf);
    for (l, r) in spec.eigenvalues.iter().zip(&spec.residuals) {
        println!("  lambda {l:+.6e}  residual {r:.1e}");
    }
    println!("Morse index {}, near-zero modes {}, Lanczos steps {}", spec.negative_count, spec.near_zero_count, spec.lanczos_steps);
    let summary = morse_consistency(&[(report, spec)], &topology_catalog(&shape, 3)?);
    println!("{}: {}", summary.status, summary.note);
    Ok(())
}
