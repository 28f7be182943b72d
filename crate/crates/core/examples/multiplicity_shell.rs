//! Two antipodal seeds on the mid-sphere of a shell give two distinct
//! concentrating solutions, matching cat = 2.
//!
//! `cargo run --release --example multiplicity_shell -- [out_dir] [eps]`

use sms_core::experiments::{cmd_multiplicity, ExperimentConfig};

fn main() -> sms_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::shell_preset();
    cfg.out_dir = args.next().unwrap_or_else(|| "shell-out".into());
    if let Some(eps) = args.next() {
        cfg.eps = vec![eps.parse().expect("eps")];
    }
    cfg.perturbations = 0;
    let rec = cmd_multiplicity(&cfg)?;
    println!("eps {} h {:.4} nodes {}  P_t = {}", rec.eps, rec.h, rec.nodes, rec.topology.poincare());
    println!("{} seeds, {} converged, {} distinct, cat = {}", rec.seeds, rec.converged, rec.distinct, rec.topology.cat);
    for s in &rec.solutions {
        let b = s.barycenter;
        println!("  I/m_inf {:.5}  beta [{:+.4}, {:+.4}, {:+.4}]  conc {:.4}", s.energy_ratio, b[0], b[1], b[2], s.concentration);
    }
    println!("max barycenter separation {:.4}", rec.max_separation);
    Ok(())
}
