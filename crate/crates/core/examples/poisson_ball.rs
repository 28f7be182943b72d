//! Torsion problem −Δψ = 1 on the unit ball: ψ = (1 − |x|²)/6 and
//! T = ∫ψ = 4π/45. The staircase boundary makes both converge at first order.

use sms_core::grid::{build_domain, DomainShape, Field};
use sms_core::poisson::poisson_solve_certified;
use sms_core::{CgOptions, Preconditioner};

fn main() -> sms_core::Result<()> {
    let exact_t = 4.0 * std::f64::consts::PI / 45.0;
    println!("{:>7} {:>8} {:>5} {:>11} {:>11}", "h", "nodes", "CG", "psi(0) err", "T err");
    for h in [0.1, 0.05, 0.025, 0.02, 0.0125] {
        let grid = build_domain(&DomainShape::ball(1.0), h, 3)?;
        let one = Field::from_fn(&grid, |_| 1.0);
        let opts = CgOptions { preconditioner: Preconditioner::Ssor, ..Default::default() };
        let (psi, cert) = poisson_solve_certified(&one, &opts)?;
        let origin = grid.coords().position(|x| x.iter().all(|c| c.abs() < 1e-9)).expect("node at the origin");
        let centre = psi.values()[origin];
        let torsion: f64 = psi.values().iter().sum::<f64>() * grid.cell_volume();
        println!(
            "{h:>7} {:>8} {:>5} {:>10.3}% {:>10.3}%",
            grid.len(),
            cert.iterations,
            100.0 * (centre * 6.0 - 1.0),
            100.0 * (torsion / exact_t - 1.0)
        );
    }
    Ok(())
}
