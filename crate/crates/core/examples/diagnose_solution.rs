//! Solve on a coarse ball, save the field and run the diagnostics on the dump.

use sms_core::experiments::{cmd_diagnose, ExperimentConfig};
use sms_core::groundstate::shoot_ground_state;
use sms_core::nehari::solve_critical_in;
use sms_core::topo::photograph;
use sms_core::{DescentOptions, Problem};

fn main() -> sms_core::Result<()> {
    let cfg = ExperimentConfig { eps: vec![0.3], out_dir: "diagnose-out".into(), ..Default::default() };
    let eps = cfg.eps[0];
    let grid = cfg.grid_for(eps)?;
    let pb = Problem::new(&grid, cfg.params(eps)?, cfg.cg)?;
    let profile = shoot_ground_state(cfg.p, 3, cfg.shoot_tol)?;
    let seed = photograph(&pb, &[0.0; 3], &profile)?;
    let report = solve_critical_in(&pb, &seed.field, &DescentOptions::default())?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = std::path::Path::new(&cfg.out_dir).join("ball.smsfield");
    report.field().expect("field").save(&path)?;

    let d = cmd_diagnose(&path, &cfg, None)?;
    println!("Nehari residual (relative) {:.2e}", d.nehari_relative);
    println!("energy {:.8}  identities {:.8} / {:.8}", d.energy, d.energy_identity_g, d.energy_identity_b);
    println!("barycenter {:?}  concentration {:.4}", d.barycenter, d.concentration);
    println!("good partition: {} cells, nu = {}, gamma = {:.4}", d.partition_cells, d.partition_nu, d.gamma);
    println!("normalized mass {:.4} vs 2p/(p-2) m_inf = {:.4}", d.normalized_mass, d.mass_reference);
    Ok(())
}
