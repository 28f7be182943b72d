//! Descent from the centred photograph on the unit ball.
//!
//! Usage: `cargo run --release --example descent_ball -- [eps] [eps/h] [p] [omega] [q] [r]`

use sms_core::groundstate::shoot_ground_state;
use sms_core::nehari::solve_critical_in;
use sms_core::topo::{concentration_fraction, photograph};
use sms_core::{build_domain, CgOptions, DescentOptions, DomainShape, Params, Preconditioner, Problem};

fn main() -> sms_core::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
    let (eps, ratio, p, omega, q, r) = (arg(0, 0.3), arg(1, 6.0), arg(2, 4.2), arg(3, 2.0), arg(4, 5.0), arg(5, 0.9));

    let profile = shoot_ground_state(p, 3, 1e-13)?;
    let grid = build_domain(&DomainShape::ball(1.0), eps / ratio, 3)?;
    let params = Params::new(eps, omega, q, p, r)?;
    let cg = CgOptions { preconditioner: Preconditioner::Ssor, ..Default::default() };
    let problem = Problem::new(&grid, params, cg)?;

    let photo = photograph(&problem, &[0.0; 3], &profile)?;
    let seed_energy = problem.energy(&photo.field)?.total;
    let report = solve_critical_in(&problem, &photo.field, &DescentOptions::default())?;
    let m_inf = profile.m_inf;
    let frac = concentration_fraction(report.field().expect("field"), &report.barycenter, 0.5 * r, p)?;

    println!("nodes            {}", grid.len());
    println!("m_inf            {m_inf:.6}");
    println!("t_eps(W)         {:.6}", photo.t);
    println!("G_eps(W)         {:.6e}", photo.scalars_w.g);
    println!("I(Phi)/m_inf     {:.6}", seed_energy / m_inf);
    println!("m_eps/m_inf      {:.6}", report.energy.total / m_inf);
    println!("status           {:?} after {} iterations", report.status, report.iterations);
    println!("grad / nehari    {:.2e} / {:.2e}", report.grad_norm, report.nehari_abs / report.norm_sq);
    println!("<Hu,u>           {:.4e}", report.ray_hessian);
    println!("min / max        {:.3e} / {:.4}", report.min_value, report.max_value);
    println!("concentration    {frac:.4}");
    println!("poisson solves   {}", report.poisson_solves);
    println!("wall time        {:.1} s", report.wall_time_s);
    Ok(())
}
