//! ε-sweep on the unit ball: m_ε → m_∞ and G_ε(W) = O(ε²).
//!
//! `cargo run --release --example sweep_eps -- [out_dir] [eps,...]`

use sms_core::experiments::{cmd_sweep_eps, ExperimentConfig};

fn main() -> sms_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::default();
    cfg.out_dir = args.next().unwrap_or_else(|| "sweep-out".into());
    if let Some(list) = args.next() {
        cfg.eps = list.split(',').map(|e| e.parse().expect("eps")).collect();
    }
    let rec = cmd_sweep_eps(&cfg)?;
    println!("m_inf = {:.6}", rec.m_inf);
    println!("{:>6} {:>8} {:>10} {:>9} {:>11} {:>8}", "eps", "nodes", "m_eps", "rel_err", "G(W)", "t(W)");
    for r in &rec.rows {
        println!(
            "{:>6} {:>8} {:>10.5} {:>9.5} {:>11.4e} {:>8.5}",
            r.eps,
            r.nodes,
            r.m_eps.unwrap_or(f64::NAN),
            r.rel_err.unwrap_or(f64::NAN),
            r.g_w.unwrap_or(f64::NAN),
            r.t_w.unwrap_or(f64::NAN)
        );
    }
    println!("slope of log G(W) vs log eps: {:.4}", rec.g_slope.unwrap_or(f64::NAN));
    for a in &rec.run.assertions {
        println!("{} {}: {}", if a.passed { "ok  " } else { "FAIL" }, a.name, a.detail);
    }
    Ok(())
}
