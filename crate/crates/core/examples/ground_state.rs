//! Radial ground state of −ΔU + U = U^{p−1} and its energy level m_∞.
//!
//! `cargo run --release --example ground_state -- [p] [d]`

use sms_core::groundstate::shoot_ground_state;

fn main() -> sms_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: f64 = args.next().map_or(4.3, |a| a.parse().expect("p"));
    let d: usize = args.next().map_or(3, |a| a.parse().expect("d"));

    let prof = shoot_ground_state(p, d, 1e-13)?;
    println!("p = {p}, d = {d}");
    println!("U(0)            {:.12}", prof.u0);
    println!("m_inf           {:.12}", prof.m_inf);
    println!("|U|_H1^2        {:.12}", prof.mh1sq);
    println!("Nehari residual {:.2e}", prof.nehari_residual);
    println!("tail            {:.4} s^{{-(d-1)/2}} e^{{-{:.4} s}} beyond s = {:.2}", prof.decay_c, prof.decay_a, prof.r_max);
    for s in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        println!("  U({s:>4}) = {:.6e}", prof.eval(s));
    }
    Ok(())
}
